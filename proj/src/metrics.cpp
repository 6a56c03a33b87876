#include "pbir/metrics.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace pbir {

namespace {

RoiRect resolve_roi(const ImageGrid& grid, std::optional<RoiRect> roi) {
    if (!roi || roi->w <= 0 || roi->h <= 0) return {0, 0, grid.nx, grid.ny};
    const RoiRect r = *roi;
    if (r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > grid.nx || r.y0 + r.h > grid.ny)
        throw std::invalid_argument("roi does not fit inside the grid");
    return r;
}

template <typename F>
double roi_mean(const ImageVolume& a, const ImageVolume& b, RoiRect r, F&& f) {
    double acc = 0.0;
    for (int iy = r.y0; iy < r.y0 + r.h; ++iy)
        for (int ix = r.x0; ix < r.x0 + r.w; ++ix) {
            const std::size_t i = static_cast<std::size_t>(iy) * a.grid.nx + ix;
            acc += f(pixel_as_hu(a, i) - pixel_as_hu(b, i));
        }
    return acc / (static_cast<double>(r.w) * r.h);
}

} // namespace

double rmsd(const ImageVolume& a, const ImageVolume& b, std::optional<RoiRect> roi) {
    if (!a.same_shape(b)) throw std::invalid_argument("rmsd: grid mismatch");
    const RoiRect r = resolve_roi(a.grid, roi);
    return std::sqrt(roi_mean(a, b, r, [](double d) { return d * d; }));
}

double mad(const ImageVolume& a, const ImageVolume& b, std::optional<RoiRect> roi) {
    if (!a.same_shape(b)) throw std::invalid_argument("mad: grid mismatch");
    const RoiRect r = resolve_roi(a.grid, roi);
    return roi_mean(a, b, r, [](double d) { return std::abs(d); });
}

NPSResult nps(const std::vector<ImageVolume>& realizations, RoiRect roi, int n_bins) {
    if (realizations.size() < 2) throw std::invalid_argument("nps: need >= 2 realizations");
    const ImageGrid grid = realizations[0].grid;
    for (const auto& r : realizations)
        if (!(r.grid == grid)) throw std::invalid_argument("nps: realizations on different grids");
    const RoiRect r = resolve_roi(grid, roi);
    const int nx = r.w, ny = r.h;
    const std::size_t m = realizations.size();
    const std::size_t npix = static_cast<std::size_t>(nx) * ny;

    // ensemble mean over the ROI, in HU
    std::vector<double> mean(npix, 0.0);
    auto roi_hu = [&](const ImageVolume& img, int ix, int iy) {
        const std::size_t i = static_cast<std::size_t>(iy + r.y0) * grid.nx + (ix + r.x0);
        return pixel_as_hu(img, i);
    };
    for (const auto& img : realizations)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                mean[static_cast<std::size_t>(iy) * nx + ix] += roi_hu(img, ix, iy) / m;

    std::vector<std::complex<double>> in(npix), out(npix);
    fftw_plan plan = fftw_plan_dft_2d(ny, nx, reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                                      FFTW_ESTIMATE);
    std::vector<double> power(npix, 0.0);
    for (const auto& img : realizations) {
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const std::size_t i = static_cast<std::size_t>(iy) * nx + ix;
                in[i] = {roi_hu(img, ix, iy) - mean[i], 0.0};
            }
        fftw_execute(plan);
        for (std::size_t i = 0; i < npix; ++i) power[i] += std::norm(out[i]) / m;
    }
    fftw_destroy_plan(plan);

    NPSResult res;
    res.nx = nx;
    res.ny = ny;
    res.n_realizations = static_cast<int>(m);
    res.spectrum.resize(npix);
    const double scale = grid.dx * grid.dy / (static_cast<double>(nx) * ny);
    // fftshift so DC sits at (nx/2, ny/2)
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const int sx = (ix + nx / 2) % nx;
            const int sy = (iy + ny / 2) % ny;
            res.spectrum[static_cast<std::size_t>(sy) * nx + sx] =
                power[static_cast<std::size_t>(iy) * nx + ix] * scale;
        }
    res.fx.resize(nx);
    res.fy.resize(ny);
    for (int ix = 0; ix < nx; ++ix) res.fx[ix] = (ix - nx / 2) / (nx * grid.dx);
    for (int iy = 0; iy < ny; ++iy) res.fy[iy] = (iy - ny / 2) / (ny * grid.dy);

    // annular average over |f|
    if (n_bins <= 0) n_bins = std::max(nx, ny) / 2;
    const double f_nyq = std::max(0.5 / grid.dx, 0.5 / grid.dy);
    const double bin_width = f_nyq / n_bins;
    res.radial_freq.resize(n_bins);
    res.radial_profile.assign(n_bins, 0.0);
    std::vector<int> counts(n_bins, 0);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const double f = std::hypot(res.fx[ix], res.fy[iy]);
            const int b = static_cast<int>(f / bin_width);
            if (b >= n_bins) continue;
            res.radial_profile[b] += res.spectrum[static_cast<std::size_t>(iy) * nx + ix];
            ++counts[b];
        }
    int peak_bin = 0;
    for (int b = 0; b < n_bins; ++b) {
        res.radial_freq[b] = (b + 0.5) * bin_width;
        if (counts[b] > 0) res.radial_profile[b] /= counts[b];
        if (res.radial_profile[b] > res.radial_profile[peak_bin]) peak_bin = b;
    }
    res.peak_frequency = res.radial_freq[peak_bin];
    return res;
}

PeakPath nps_peak_path(const std::vector<NPSResult>& sequence) {
    if (sequence.empty()) throw std::invalid_argument("nps_peak_path: empty sequence");
    PeakPath out;
    out.peaks.reserve(sequence.size());
    for (const auto& s : sequence) out.peaks.push_back(s.peak_frequency);
    for (std::size_t i = 1; i < out.peaks.size(); ++i)
        if (out.peaks[i] > out.peaks[i - 1]) ++out.n_violations;
    return out;
}

} // namespace pbir
