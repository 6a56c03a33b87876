#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "pbir/geometry.hpp"
#include "pbir/simulate.hpp"
#include "pbir/solvers.hpp"
#include "pbir/types.hpp"

namespace pbir::test {

inline ImageGrid make_grid(int n, double fov_mm = 400.0) { return {n, n, fov_mm / n, fov_mm / n}; }

inline ImageVolume random_image(const ImageGrid& grid, PixelUnit unit, double lo, double hi,
                                std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    ImageVolume img(grid, unit, 0.0);
    for (auto& v : img.values) v = dist(eng);
    return img;
}

inline std::vector<double> random_rays(std::size_t n, double lo, double hi, std::uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(eng);
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

/// Dense system matrix (n_rays x n_pixels) built column by column; only for
/// tiny grids. Used as an independent oracle against the matrix-free kernels.
inline std::vector<std::vector<double>> dense_system_matrix(const ScanGeometry& geom) {
    const std::size_t npix = geom.grid.size();
    const std::size_t nray = geom.n_rays();
    std::vector<std::vector<double>> cols(npix);
    for (std::size_t j = 0; j < npix; ++j) {
        ImageVolume unit(geom.grid, PixelUnit::Mu, 0.0);
        unit.values[j] = 1.0;
        cols[j] = forward_project(unit, geom);
        (void)nray;
    }
    return cols; // cols[j][i] = A_ij
}

/// Gaussian elimination with partial pivoting, for tiny oracle systems.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

/// Small water-cylinder PWLS problem shared by solver and path tests.
inline PWLSProblem water_problem(int n, double I0 = 2e5, std::uint64_t seed = 7,
                                 bool noiseless = false) {
    const ImageGrid grid = make_grid(n);
    const ScanGeometry geom = make_parallel_geometry(grid, std::max(2 * n, 8), (3 * n) / 2, grid.dx);
    const ImageVolume mu = hu_to_mu(rasterize(water_cylinder(grid), grid));
    PWLSProblem prob;
    prob.geom = geom;
    prob.sino = noiseless ? simulate_noiseless(mu, geom, I0) : simulate_counts(mu, geom, I0, seed);
    prob.penalty = HuberPenalty{};
    prob.beta = 0.0;
    return prob;
}

} // namespace pbir::test
