#include "pbir/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pbir {

void ScanGeometry::validate() const {
    if (n_views < 1 || n_dets < 1)
        throw std::invalid_argument("ScanGeometry: n_views and n_dets must be >= 1");
    if (det_spacing <= 0.0) throw std::invalid_argument("ScanGeometry: det_spacing must be > 0");
    if (static_cast<int>(angles.size()) != n_views)
        throw std::invalid_argument("ScanGeometry: angles size must equal n_views");
    const double full_range = (beam == BeamType::Parallel) ? std::numbers::pi : 2.0 * std::numbers::pi;
    for (int v = 1; v < n_views; ++v) {
        if (!(angles[v] > angles[v - 1]))
            throw std::invalid_argument("ScanGeometry: angles must be strictly increasing");
    }
    if (n_views > 1 && !(angles.back() - angles.front() < full_range))
        throw std::invalid_argument("ScanGeometry: angle span must be below the full range");
    if (beam == BeamType::Fan) {
        if (fan.source_to_iso <= 0.0 || fan.source_to_det <= fan.source_to_iso)
            throw std::invalid_argument("ScanGeometry: fan distances must satisfy 0 < dso < dsd");
    }
    grid.validate();
}

ScanGeometry make_parallel_geometry(const ImageGrid& grid, int n_views, int n_dets,
                                    double det_spacing) {
    ScanGeometry g;
    g.beam = BeamType::Parallel;
    g.n_views = n_views;
    g.n_dets = n_dets;
    g.det_spacing = det_spacing;
    g.grid = grid;
    g.angles.resize(n_views);
    for (int v = 0; v < n_views; ++v) g.angles[v] = v * std::numbers::pi / n_views;
    g.validate();
    return g;
}

ScanGeometry make_fan_geometry(const ImageGrid& grid, int n_views, int n_dets, double det_spacing,
                               double source_to_iso, double source_to_det) {
    ScanGeometry g;
    g.beam = BeamType::Fan;
    g.n_views = n_views;
    g.n_dets = n_dets;
    g.det_spacing = det_spacing;
    g.fan = {source_to_iso, source_to_det};
    g.grid = grid;
    g.angles.resize(n_views);
    for (int v = 0; v < n_views; ++v) g.angles[v] = v * 2.0 * std::numbers::pi / n_views;
    g.validate();
    return g;
}

std::vector<int> bit_reversal_order(int n) {
    int bits = 0;
    while ((1 << bits) < n) ++bits;
    std::vector<int> order;
    order.reserve(n);
    for (int i = 0; i < (1 << bits); ++i) {
        int r = 0;
        for (int b = 0; b < bits; ++b)
            if (i & (1 << b)) r |= 1 << (bits - 1 - b);
        if (r < n) order.push_back(r);
    }
    return order;
}

SubsetScheme make_subsets(const ScanGeometry& geom, int n_subsets) {
    if (n_subsets < 1 || n_subsets > geom.n_views)
        throw std::invalid_argument("make_subsets: need 1 <= n_subsets <= n_views");
    SubsetScheme s;
    s.n_subsets = n_subsets;
    s.assignment.resize(geom.n_views);
    s.views.resize(n_subsets);
    for (int v = 0; v < geom.n_views; ++v) {
        s.assignment[v] = v % n_subsets;
        s.views[v % n_subsets].push_back(v);
    }
    s.order = bit_reversal_order(n_subsets);
    return s;
}

namespace {

struct Ray {
    double px, py; // a point on the ray
    double dx, dy; // unit direction
};

Ray ray_for(const ScanGeometry& geom, int view, int det) {
    const double u = (det - 0.5 * (geom.n_dets - 1)) * geom.det_spacing;
    const double c = std::cos(geom.angles[view]);
    const double s = std::sin(geom.angles[view]);
    if (geom.beam == BeamType::Parallel) {
        return {u * c, u * s, -s, c};
    }
    // Fan beam, flat detector: the source rotates on a circle of radius dso;
    // at angle 0 it sits at (0, -dso) and the detector line is orthogonal to
    // the source-isocenter axis at distance dsd from the source.
    const double sx = s * geom.fan.source_to_iso;
    const double sy = -c * geom.fan.source_to_iso;
    const double ex = sx + u * c + (geom.fan.source_to_det) * -s;
    const double ey = sy + u * s + (geom.fan.source_to_det) * c;
    double dx = ex - sx, dy = ey - sy;
    const double norm = std::hypot(dx, dy);
    return {sx, sy, dx / norm, dy / norm};
}

// Joseph-style kernel: step along the dominant axis, linearly interpolating
// between the two neighboring pixels on the crossing line. The same weights
// are used for gather (forward) and scatter (adjoint), so the pair is an
// exact transpose. Exactly one of img_in / img_out is non-null.
double joseph_ray(const ImageGrid& grid, const double* img_in, double* img_out, const Ray& ray,
                  double value) {
    const int nx = grid.nx, ny = grid.ny;
    const double x0 = grid.x_center(0), y0 = grid.y_center(0);
    double acc = 0.0;
    if (std::abs(ray.dy) >= std::abs(ray.dx)) {
        const double step_len = grid.dy / std::abs(ray.dy);
        const double slope = ray.dx / ray.dy;
        for (int iy = 0; iy < ny; ++iy) {
            const double y = y0 + iy * grid.dy;
            const double x = ray.px + (y - ray.py) * slope;
            const double fx = (x - x0) / grid.dx;
            const int ix = static_cast<int>(std::floor(fx));
            const double w1 = fx - ix;
            const std::size_t row = static_cast<std::size_t>(iy) * nx;
            if (ix >= 0 && ix < nx) {
                if (img_in) acc += img_in[row + ix] * (1.0 - w1) * step_len;
                else img_out[row + ix] += value * (1.0 - w1) * step_len;
            }
            if (ix + 1 >= 0 && ix + 1 < nx) {
                if (img_in) acc += img_in[row + ix + 1] * w1 * step_len;
                else img_out[row + ix + 1] += value * w1 * step_len;
            }
        }
    } else {
        const double step_len = grid.dx / std::abs(ray.dx);
        const double slope = ray.dy / ray.dx;
        for (int ix = 0; ix < nx; ++ix) {
            const double x = x0 + ix * grid.dx;
            const double y = ray.py + (x - ray.px) * slope;
            const double fy = (y - y0) / grid.dy;
            const int iy = static_cast<int>(std::floor(fy));
            const double w1 = fy - iy;
            if (iy >= 0 && iy < ny) {
                const std::size_t at = static_cast<std::size_t>(iy) * nx + ix;
                if (img_in) acc += img_in[at] * (1.0 - w1) * step_len;
                else img_out[at] += value * (1.0 - w1) * step_len;
            }
            if (iy + 1 >= 0 && iy + 1 < ny) {
                const std::size_t at = static_cast<std::size_t>(iy + 1) * nx + ix;
                if (img_in) acc += img_in[at] * w1 * step_len;
                else img_out[at] += value * w1 * step_len;
            }
        }
    }
    return acc;
}

void check_image(const ImageVolume& mu, const ScanGeometry& geom, const char* where) {
    if (!(mu.grid == geom.grid))
        throw std::invalid_argument(std::string(where) + ": image grid does not match geometry grid");
}

} // namespace

std::vector<double> forward_project(const ImageVolume& mu, const ScanGeometry& geom) {
    check_image(mu, geom, "forward_project");
    std::vector<double> rays(geom.n_rays(), 0.0);
    for (int v = 0; v < geom.n_views; ++v)
        for (int d = 0; d < geom.n_dets; ++d)
            rays[static_cast<std::size_t>(v) * geom.n_dets + d] =
                joseph_ray(geom.grid, mu.values.data(), nullptr, ray_for(geom, v, d), 0.0);
    return rays;
}

std::vector<double> forward_project(const ImageVolume& mu, const ScanGeometry& geom,
                                    const SubsetScheme& scheme, int subset) {
    check_image(mu, geom, "forward_project");
    if (subset < 0 || subset >= scheme.n_subsets)
        throw std::invalid_argument("forward_project: subset index out of range");
    std::vector<double> rays(geom.n_rays(), 0.0);
    for (int v : scheme.views_of(subset))
        for (int d = 0; d < geom.n_dets; ++d)
            rays[static_cast<std::size_t>(v) * geom.n_dets + d] =
                joseph_ray(geom.grid, mu.values.data(), nullptr, ray_for(geom, v, d), 0.0);
    return rays;
}

ImageVolume back_project(std::span<const double> rays, const ScanGeometry& geom) {
    if (rays.size() != geom.n_rays())
        throw std::invalid_argument("back_project: ray array size does not match geometry");
    ImageVolume out(geom.grid, PixelUnit::Mu, 0.0);
    for (int v = 0; v < geom.n_views; ++v)
        for (int d = 0; d < geom.n_dets; ++d) {
            const double val = rays[static_cast<std::size_t>(v) * geom.n_dets + d];
            if (val != 0.0)
                joseph_ray(geom.grid, nullptr, out.values.data(), ray_for(geom, v, d), val);
        }
    return out;
}

ImageVolume back_project(std::span<const double> rays, const ScanGeometry& geom,
                         const SubsetScheme& scheme, int subset) {
    if (rays.size() != geom.n_rays())
        throw std::invalid_argument("back_project: ray array size does not match geometry");
    if (subset < 0 || subset >= scheme.n_subsets)
        throw std::invalid_argument("back_project: subset index out of range");
    ImageVolume out(geom.grid, PixelUnit::Mu, 0.0);
    for (int v : scheme.views_of(subset))
        for (int d = 0; d < geom.n_dets; ++d) {
            const double val = rays[static_cast<std::size_t>(v) * geom.n_dets + d];
            if (val != 0.0)
                joseph_ray(geom.grid, nullptr, out.values.data(), ray_for(geom, v, d), val);
        }
    return out;
}

} // namespace pbir
