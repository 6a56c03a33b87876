#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "pbir/solvers.hpp"

namespace pbir {

std::vector<double> ramp_filter_response(int n, double det_spacing, FbpFilter filter) {
    if (n < 2 || det_spacing <= 0.0)
        throw std::invalid_argument("ramp_filter_response: bad length or spacing");
    const int n_freq = n / 2 + 1;
    const double df = 1.0 / (n * det_spacing);
    const double f_nyq = 1.0 / (2.0 * det_spacing);
    std::vector<double> h(n_freq);
    for (int k = 0; k < n_freq; ++k) {
        const double f = k * df;
        h[k] = f;
        if (filter == FbpFilter::Hann) h[k] *= 0.5 * (1.0 + std::cos(std::numbers::pi * f / f_nyq));
    }
    h[0] = 0.0; // zero DC gain
    return h;
}

ImageVolume fbp_reconstruct(const Sinogram& sino, const ImageGrid& grid, FbpFilter filter) {
    const ScanGeometry& geom = sino.geom;
    if (geom.beam != BeamType::Parallel)
        throw std::invalid_argument("fbp_reconstruct: fan-beam data needs rebinning first");
    if (sino.l.size() != geom.n_rays())
        throw std::invalid_argument("fbp_reconstruct: sinogram does not match its geometry");
    grid.validate();

    // Generous zero padding: with the DC bin forced to zero, short transforms
    // leave a visible mean dip inside large objects (circular convolution).
    int padded = 2;
    while (padded < 8 * geom.n_dets) padded *= 2;
    const std::vector<double> ramp = ramp_filter_response(padded, geom.det_spacing, filter);

    std::vector<double> row(padded);
    std::vector<std::complex<double>> freq(padded / 2 + 1);
    auto* freq_c = reinterpret_cast<fftw_complex*>(freq.data());
    fftw_plan fwd = fftw_plan_dft_r2c_1d(padded, row.data(), freq_c, FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_1d(padded, freq_c, row.data(), FFTW_ESTIMATE);

    // Filter all views; keep the first n_dets samples of each filtered row.
    std::vector<double> filtered(geom.n_rays());
    for (int v = 0; v < geom.n_views; ++v) {
        std::fill(row.begin(), row.end(), 0.0);
        for (int d = 0; d < geom.n_dets; ++d)
            row[d] = sino.l[static_cast<std::size_t>(v) * geom.n_dets + d];
        fftw_execute(fwd);
        for (int k = 0; k < padded / 2 + 1; ++k) freq[k] *= ramp[k] / padded;
        fftw_execute(inv);
        for (int d = 0; d < geom.n_dets; ++d)
            filtered[static_cast<std::size_t>(v) * geom.n_dets + d] = row[d];
    }
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);

    // Pixel-driven backprojection with linear detector interpolation.
    ImageVolume out(grid, PixelUnit::Mu, 0.0);
    const double scale = std::numbers::pi / geom.n_views;
    const double det_center = 0.5 * (geom.n_dets - 1);
    for (int v = 0; v < geom.n_views; ++v) {
        const double c = std::cos(geom.angles[v]);
        const double s = std::sin(geom.angles[v]);
        const double* q = &filtered[static_cast<std::size_t>(v) * geom.n_dets];
        for (int iy = 0; iy < grid.ny; ++iy) {
            const double y = grid.y_center(iy);
            for (int ix = 0; ix < grid.nx; ++ix) {
                const double t = grid.x_center(ix) * c + y * s;
                const double u = t / geom.det_spacing + det_center;
                const int d0 = static_cast<int>(std::floor(u));
                if (d0 < 0 || d0 + 1 >= geom.n_dets) continue;
                const double w1 = u - d0;
                out.at(ix, iy) += scale * (q[d0] * (1.0 - w1) + q[d0 + 1] * w1);
            }
        }
    }
    return out;
}

} // namespace pbir
