#include "pbir/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace pbir {

ImageVolume rasterize(const EllipsePhantom& phantom, const ImageGrid& grid) {
    grid.validate();
    for (const auto& e : phantom.ellipses)
        if (e.a <= 0.0 || e.b <= 0.0)
            throw std::invalid_argument("rasterize: ellipse semi-axes must be > 0");
    ImageVolume img(grid, PixelUnit::HU, -1000.0);
    for (const auto& e : phantom.ellipses) {
        const double cr = std::cos(e.rot), sr = std::sin(e.rot);
        for (int iy = 0; iy < grid.ny; ++iy) {
            const double y = grid.y_center(iy) - e.cy;
            for (int ix = 0; ix < grid.nx; ++ix) {
                const double x = grid.x_center(ix) - e.cx;
                const double u = (x * cr + y * sr) / e.a;
                const double v = (-x * sr + y * cr) / e.b;
                if (u * u + v * v <= 1.0) img.at(ix, iy) += e.value_hu;
            }
        }
    }
    return img;
}

EllipsePhantom water_cylinder(const ImageGrid& grid) {
    const double r = 0.40 * std::min(grid.nx * grid.dx, grid.ny * grid.dy);
    return {{{0.0, 0.0, r, r, 0.0, 1000.0}}};
}

EllipsePhantom abdomen_phantom(const ImageGrid& grid) {
    const double w = grid.nx * grid.dx, h = grid.ny * grid.dy;
    EllipsePhantom p;
    p.ellipses.push_back({0.0, 0.0, 0.42 * w, 0.30 * h, 0.0, 1000.0}); // body, water
    p.ellipses.push_back({-0.22 * w, 0.0, 0.055 * w, 0.075 * h, 0.35, 400.0});
    p.ellipses.push_back({0.22 * w, 0.04 * h, 0.06 * w, 0.05 * h, -0.2, 200.0});
    p.ellipses.push_back({0.0, 0.15 * h, 0.10 * w, 0.05 * h, 0.0, -100.0});
    p.ellipses.push_back({0.0, -0.12 * h, 0.045 * w, 0.045 * h, 0.0, 100.0});
    p.ellipses.push_back({-0.10 * w, -0.05 * h, 0.03 * w, 0.03 * h, 0.0, 60.0});
    p.ellipses.push_back({0.12 * w, -0.14 * h, 0.035 * w, 0.025 * h, 0.5, -50.0});
    return p;
}

namespace {

std::int64_t poisson_draw(double mean, std::uint64_t seed, std::uint64_t ray_index) {
    std::mt19937_64 eng(splitmix64(seed ^ splitmix64(ray_index + 0x51ed2701ull)));
    std::poisson_distribution<std::int64_t> dist(mean);
    return dist(eng);
}

} // namespace

Sinogram simulate_counts(const ImageVolume& mu, const ScanGeometry& geom, double I0,
                         std::uint64_t seed) {
    if (!(I0 > 0.0)) throw std::invalid_argument("simulate_counts: I0 must be > 0");
    const ImageVolume mu_img = hu_to_mu(mu);
    Sinogram sino;
    sino.geom = geom;
    sino.I0 = I0;
    sino.noiseless = false;
    const std::vector<double> line = forward_project(mu_img, geom);
    const std::size_t n = line.size();
    sino.l.resize(n);
    sino.w.resize(n);
    sino.counts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = I0 * std::exp(-line[i]);
        const std::int64_t c = poisson_draw(mean, seed, i);
        sino.counts[i] = static_cast<double>(c);
        if (c < 1) ++sino.n_clamped;
        sino.l[i] = std::log(I0 / static_cast<double>(std::max<std::int64_t>(c, 1)));
        sino.w[i] = static_cast<double>(c);
    }
    return sino;
}

Sinogram simulate_noiseless(const ImageVolume& mu, const ScanGeometry& geom, double I0_ref) {
    if (!(I0_ref > 0.0)) throw std::invalid_argument("simulate_noiseless: I0_ref must be > 0");
    const ImageVolume mu_img = hu_to_mu(mu);
    Sinogram sino;
    sino.geom = geom;
    sino.I0 = I0_ref;
    sino.noiseless = true;
    sino.l = forward_project(mu_img, geom);
    const std::size_t n = sino.l.size();
    sino.w.resize(n);
    sino.counts.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sino.counts[i] = I0_ref * std::exp(-sino.l[i]);
        sino.w[i] = sino.counts[i];
    }
    return sino;
}

WeightedData weighted_data(const Sinogram& sino) {
    WeightedData out;
    const std::size_t n = sino.l.size();
    out.y.resize(n);
    out.sqrt_w.resize(n);
    out.w = sino.w;
    for (std::size_t i = 0; i < n; ++i) {
        if (sino.w[i] < 0.0) throw std::invalid_argument("weighted_data: negative weight");
        out.sqrt_w[i] = std::sqrt(sino.w[i]);
        out.y[i] = out.sqrt_w[i] * sino.l[i];
    }
    return out;
}

EllipsePhantom load_phantom(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_phantom: cannot open " + path);
    EllipsePhantom p;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ss(line);
        Ellipse e;
        if (!(ss >> e.cx)) continue; // blank line
        if (!(ss >> e.cy >> e.a >> e.b >> e.rot >> e.value_hu))
            throw std::runtime_error("load_phantom: bad ellipse on line " + std::to_string(lineno) +
                                     " of " + path);
        if (e.a <= 0.0 || e.b <= 0.0)
            throw std::runtime_error("load_phantom: semi-axes must be > 0 on line " +
                                     std::to_string(lineno));
        p.ellipses.push_back(e);
    }
    return p;
}

void save_phantom(const EllipsePhantom& phantom, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_phantom: cannot open " + path);
    out << "# cx_mm cy_mm a_mm b_mm rot_rad value_hu\n";
    char buf[160];
    for (const auto& e : phantom.ellipses) {
        std::snprintf(buf, sizeof(buf), "%.10g %.10g %.10g %.10g %.10g %.10g\n", e.cx, e.cy, e.a,
                      e.b, e.rot, e.value_hu);
        out << buf;
    }
}

} // namespace pbir
