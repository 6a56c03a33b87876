#include <doctest.h>

#include <cmath>
#include <random>

#include "pbir/metrics.hpp"
#include "pbir/solvers.hpp"
#include "testutil.hpp"

using namespace pbir;
using namespace pbir::test;

TEST_SUITE_BEGIN("solvers");

namespace {

// Independent objective evaluation: own Huber code, explicit weighted sum.
double oracle_objective(const PWLSProblem& prob, const ImageVolume& mu) {
    const auto proj = forward_project(mu, prob.geom);
    double g = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const double r = proj[i] - prob.sino.l[i];
        g += 0.5 * prob.sino.w[i] * r * r;
    }
    double h = 0.0;
    const double delta = prob.penalty.delta_hu;
    const int nx = mu.grid.nx, ny = mu.grid.ny;
    auto hu = [&](int ix, int iy) { return mu_to_hu(mu.at(ix, iy)); };
    auto psi = [&](double t) {
        return std::abs(t) <= delta ? 0.5 * t * t : delta * std::abs(t) - 0.5 * delta * delta;
    };
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            if (ix + 1 < nx) h += psi(hu(ix, iy) - hu(ix + 1, iy));
            if (iy + 1 < ny) h += psi(hu(ix, iy) - hu(ix, iy + 1));
        }
    return g + prob.beta * h;
}

} // namespace

TEST_CASE("objective matches an independently coded evaluation") {
    PWLSProblem prob = water_problem(24);
    prob.beta = 0.01;
    const ImageVolume x = random_image(prob.geom.grid, PixelUnit::Mu, 0.0, 0.04, 31);
    CHECK(objective(prob, x) == doctest::Approx(oracle_objective(prob, x)).epsilon(1e-12));
}

TEST_CASE("objective is zero for an exact fit with beta = 0") {
    const ImageGrid grid = make_grid(24);
    const ScanGeometry geom = make_parallel_geometry(grid, 20, 36, grid.dx);
    const ImageVolume mu = hu_to_mu(rasterize(water_cylinder(grid), grid));
    PWLSProblem prob{geom, simulate_noiseless(mu, geom, 1e5), HuberPenalty{}, 0.0};
    CHECK(objective(prob, mu) == doctest::Approx(0.0).epsilon(1e-18));

    // zero image against zero data costs nothing for any beta
    Sinogram zero_sino = prob.sino;
    std::fill(zero_sino.l.begin(), zero_sino.l.end(), 0.0);
    PWLSProblem zp{geom, zero_sino, HuberPenalty{}, 123.0};
    CHECK(objective(zp, ImageVolume(grid, PixelUnit::Mu, 0.0)) == 0.0);
}

TEST_CASE("ls_gradient vanishes at an exact-fit image") {
    const ImageGrid grid = make_grid(20);
    const ScanGeometry geom = make_parallel_geometry(grid, 16, 30, grid.dx);
    const ImageVolume mu = hu_to_mu(rasterize(water_cylinder(grid), grid));
    PWLSProblem prob{geom, simulate_noiseless(mu, geom, 1e5), HuberPenalty{}, 0.0};
    for (double g : ls_gradient(prob, mu).values) CHECK(g == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("ls_gradient matches a directional finite difference") {
    PWLSProblem prob = water_problem(20);
    const ImageVolume x = random_image(prob.geom.grid, PixelUnit::Mu, 0.0, 0.04, 7);
    const ImageVolume dir = random_image(prob.geom.grid, PixelUnit::Mu, -1.0, 1.0, 8);
    const ImageVolume g = ls_gradient(prob, x);
    double inner = 0.0;
    for (std::size_t j = 0; j < g.values.size(); ++j) inner += g.values[j] * dir.values[j];
    const double eps = 1e-7;
    ImageVolume plus = x, minus = x;
    for (std::size_t j = 0; j < x.values.size(); ++j) {
        plus.values[j] += eps * dir.values[j];
        minus.values[j] -= eps * dir.values[j];
    }
    const double fd = (data_term(prob, plus) - data_term(prob, minus)) / (2.0 * eps);
    CHECK(std::abs(fd - inner) / std::abs(inner) < 1e-4);
}

TEST_CASE("subset gradients average to the full gradient") {
    PWLSProblem prob = water_problem(20);
    const ImageVolume x = random_image(prob.geom.grid, PixelUnit::Mu, 0.0, 0.04, 9);
    const ImageVolume full = ls_gradient(prob, x);
    const SubsetScheme scheme = make_subsets(prob.geom, 8);
    ImageVolume avg(prob.geom.grid, PixelUnit::Mu, 0.0);
    for (int m = 0; m < 8; ++m) {
        const ImageVolume g = ls_gradient(prob, x, scheme, m);
        for (std::size_t j = 0; j < avg.values.size(); ++j) avg.values[j] += g.values[j] / 8.0;
    }
    for (std::size_t j = 0; j < avg.values.size(); ++j)
        CHECK(avg.values[j] == doctest::Approx(full.values[j]).epsilon(1e-9));
}

TEST_CASE("single-subset SQS decreases the objective at every iteration") {
    PWLSProblem prob = water_problem(64);
    prob.beta = 0.01;
    const ImageVolume init = fbp_reconstruct(prob.sino, prob.geom.grid);
    SolveOptions opts;
    opts.n_iters = 100;
    opts.n_subsets = 1;
    std::vector<IterRecord> trace;
    opts.trace = &trace;
    const ImageVolume out = sqs_solve(prob, init, opts);
    REQUIRE(trace.size() == 101);
    for (std::size_t k = 1; k < trace.size(); ++k)
        CHECK(trace[k].objective <= trace[k - 1].objective);
    for (double v : out.values) CHECK(v >= 0.0);
}

TEST_CASE("SQS leaves a global minimizer untouched") {
    // constant image with its own noiseless data: objective is exactly zero
    const ImageGrid grid = make_grid(16);
    const ScanGeometry geom = make_parallel_geometry(grid, 12, 24, grid.dx);
    const ImageVolume flat(grid, PixelUnit::Mu, 0.015);
    PWLSProblem prob{geom, simulate_noiseless(flat, geom, 1e5), HuberPenalty{}, 2.0};
    SolveOptions opts;
    opts.n_iters = 5;
    opts.n_subsets = 1;
    const ImageVolume out = sqs_solve(prob, flat, opts);
    for (std::size_t j = 0; j < out.values.size(); ++j)
        CHECK(out.values[j] == doctest::Approx(flat.values[j]).epsilon(1e-8));
}

TEST_CASE("beta = 0 run on noiseless data approaches the phantom") {
    const ImageGrid grid = make_grid(32);
    const ScanGeometry geom = make_parallel_geometry(grid, 48, 48, grid.dx);
    const ImageVolume mu = hu_to_mu(rasterize(water_cylinder(grid), grid));
    PWLSProblem prob{geom, simulate_noiseless(mu, geom, 1e5), HuberPenalty{}, 0.0};
    SolveOptions opts;
    opts.n_iters = 30;
    opts.n_subsets = 1;
    opts.trace = new std::vector<IterRecord>();
    opts.reference = &mu;
    (void)sqs_solve(prob, ImageVolume(grid, PixelUnit::Mu, 0.0), opts);
    const auto& tr = *opts.trace;
    CHECK(tr.back().rmsd_to_ref < tr.front().rmsd_to_ref);
    CHECK(tr[10].rmsd_to_ref < tr[0].rmsd_to_ref);
    CHECK(tr[20].rmsd_to_ref < tr[10].rmsd_to_ref);
    delete opts.trace;
}

TEST_CASE("first ADMM step reproduces the hand-computed preconditioned s") {
    // 2x2 image, explicit dense system
    const ImageGrid grid{2, 2, 10.0, 10.0};
    const ScanGeometry geom = make_parallel_geometry(grid, 4, 5, 8.0);
    PWLSProblem prob;
    prob.geom = geom;
    prob.penalty = HuberPenalty{};
    prob.beta = 0.0;
    prob.sino.geom = geom;
    prob.sino.l = random_rays(geom.n_rays(), 0.0, 0.5, 3);
    prob.sino.w = random_rays(geom.n_rays(), 0.5, 2.0, 4);
    prob.sino.counts.assign(geom.n_rays(), 1.0);
    prob.sino.I0 = 1.0;

    const ImageVolume mu0 = random_image(grid, PixelUnit::Mu, 0.01, 0.03, 5);
    const auto cols = dense_system_matrix(geom); // cols[j][i] = A_ij
    const std::size_t nray = geom.n_rays();

    // dense G = A^T W (A mu0 - l) and t = A^T (w .* (A 1))
    std::vector<double> proj(nray, 0.0), ones_proj(nray, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < nray; ++i) {
            proj[i] += cols[j][i] * mu0.values[j];
            ones_proj[i] += cols[j][i];
        }
    std::vector<double> g(4, 0.0), t(4, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < nray; ++i) {
            g[j] += cols[j][i] * prob.sino.w[i] * (proj[i] - prob.sino.l[i]);
            t[j] += cols[j][i] * prob.sino.w[i] * ones_proj[i];
        }

    const double rho = 0.5;
    SolveOptions opts;
    opts.rho = rho;
    opts.n_inner = 2;
    AdmmState st = admm_init(prob, mu0, opts);
    const SubsetScheme scheme = make_subsets(geom, 1);
    admm_step(prob, st, opts, scheme);
    // v0 = G, so s1 = (rho G + (1 - rho) G) / (rho t) = G / (rho t)
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(st.s.values[j] == doctest::Approx(g[j] / (rho * t[j])).epsilon(1e-10));
}

TEST_CASE("ADMM with zero data and zero init stays at zero") {
    const ImageGrid grid = make_grid(12);
    const ScanGeometry geom = make_parallel_geometry(grid, 8, 18, grid.dx);
    PWLSProblem prob;
    prob.geom = geom;
    prob.penalty = HuberPenalty{};
    prob.beta = 1.0;
    prob.sino.geom = geom;
    prob.sino.l.assign(geom.n_rays(), 0.0);
    prob.sino.w.assign(geom.n_rays(), 1.0);
    prob.sino.counts.assign(geom.n_rays(), 1.0);
    prob.sino.I0 = 1.0;
    SolveOptions opts;
    opts.n_iters = 5;
    opts.n_subsets = 2;
    const ImageVolume out = admm_solve(prob, ImageVolume(grid, PixelUnit::Mu, 0.0), opts);
    for (double v : out.values) CHECK(v == 0.0);
}

TEST_CASE("ADMM rejects bad parameters") {
    PWLSProblem prob = water_problem(12);
    SolveOptions opts;
    opts.rho = 0.0;
    CHECK_THROWS_AS((void)admm_solve(prob, ImageVolume(prob.geom.grid, PixelUnit::Mu, 0.0), opts),
                    std::invalid_argument);
}

TEST_CASE("SQS and ADMM agree on the converged image") {
    PWLSProblem prob = water_problem(64);
    prob.beta = 0.01;
    ImageVolume init = fbp_reconstruct(prob.sino, prob.geom.grid);
    for (auto& v : init.values) v = std::max(0.0, v);

    auto taper = [&](bool use_sqs) {
        SolveOptions a;
        a.n_iters = 30;
        a.n_subsets = 10;
        ImageVolume r = use_sqs ? sqs_solve(prob, init, a) : admm_solve(prob, init, a);
        SolveOptions b;
        b.n_iters = 250;
        b.n_subsets = 1;
        return use_sqs ? sqs_solve(prob, r, b) : admm_solve(prob, r, b);
    };
    const ImageVolume via_sqs = taper(true);
    const ImageVolume via_admm = taper(false);
    CHECK(rmsd(via_sqs, via_admm) < 0.5);
}

TEST_CASE("estimate_beta recovers the multiplier of an exact KKT point") {
    const ImageGrid grid{3, 3, 10.0, 10.0};
    const ScanGeometry geom = make_parallel_geometry(grid, 8, 5, 7.0);
    const double beta = 7.0;
    PWLSProblem prob;
    prob.geom = geom;
    prob.penalty = HuberPenalty{};
    prob.beta = beta;
    prob.sino.geom = geom;
    prob.sino.w.assign(geom.n_rays(), 1.0);
    prob.sino.counts.assign(geom.n_rays(), 1.0);
    prob.sino.I0 = 1.0;

    const ImageVolume mu = random_image(grid, PixelUnit::Mu, 0.018, 0.024, 11);
    const ImageVolume ph = penalty_gradient(prob.penalty, mu);
    const auto cols = dense_system_matrix(geom);
    const std::size_t nray = geom.n_rays();

    // choose l = A mu + A z with (A^T A) z = beta grad h, so that
    // G = A^T (A mu - l) = -beta grad h exactly
    std::vector<std::vector<double>> ata(9, std::vector<double>(9, 0.0));
    for (std::size_t a = 0; a < 9; ++a)
        for (std::size_t b = 0; b < 9; ++b)
            for (std::size_t i = 0; i < nray; ++i) ata[a][b] += cols[a][i] * cols[b][i];
    std::vector<double> rhs(9);
    for (std::size_t j = 0; j < 9; ++j) rhs[j] = beta * ph.values[j];
    const std::vector<double> z = gauss_solve(ata, rhs);
    prob.sino.l.assign(nray, 0.0);
    for (std::size_t i = 0; i < nray; ++i)
        for (std::size_t j = 0; j < 9; ++j)
            prob.sino.l[i] += cols[j][i] * (mu.values[j] + z[j]);

    CHECK(estimate_beta(prob, mu) == doctest::Approx(beta).epsilon(1e-6));
}

TEST_CASE("estimate_beta fails cleanly on an all-zero image") {
    PWLSProblem prob = water_problem(12);
    CHECK_THROWS_AS((void)estimate_beta(prob, ImageVolume(prob.geom.grid, PixelUnit::Mu, 0.0)),
                    std::runtime_error);
}

TEST_CASE("estimate_beta tracks the beta of a direct solve") {
    PWLSProblem prob = water_problem(48);
    prob.beta = 0.01;
    ImageVolume init = fbp_reconstruct(prob.sino, prob.geom.grid);
    for (auto& v : init.values) v = std::max(0.0, v);
    SolveOptions a;
    a.n_iters = 30;
    a.n_subsets = 10;
    ImageVolume r = admm_solve(prob, init, a);
    SolveOptions b;
    b.n_iters = 80;
    b.n_subsets = 2;
    r = admm_solve(prob, r, b);
    const double ratio = estimate_beta(prob, r) / prob.beta;
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
}

TEST_CASE("ramp filter has zero DC gain and a Hann rolloff") {
    const auto ramp = ramp_filter_response(256, 1.0, FbpFilter::Ramp);
    const auto hann = ramp_filter_response(256, 1.0, FbpFilter::Hann);
    CHECK(ramp[0] == 0.0);
    CHECK(hann[0] == 0.0);
    for (std::size_t k = 1; k < ramp.size(); ++k) {
        CHECK(ramp[k] == doctest::Approx(k / 256.0));
        CHECK(hann[k] <= ramp[k] + 1e-15);
    }
    CHECK(hann.back() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("FBP of a zero sinogram is a zero image") {
    const ImageGrid grid = make_grid(24);
    const ScanGeometry geom = make_parallel_geometry(grid, 20, 36, grid.dx);
    Sinogram sino;
    sino.geom = geom;
    sino.l.assign(geom.n_rays(), 0.0);
    sino.w.assign(geom.n_rays(), 1.0);
    sino.counts.assign(geom.n_rays(), 1.0);
    for (double v : fbp_reconstruct(sino, grid).values) CHECK(v == 0.0);
}

TEST_CASE("FBP reconstructs the water level inside the cylinder") {
    const ImageGrid grid = make_grid(64);
    const ScanGeometry geom = make_parallel_geometry(grid, 180, 96, grid.dx);
    const ImageVolume mu = hu_to_mu(rasterize(water_cylinder(grid), grid));
    const ImageVolume fbp = fbp_reconstruct(simulate_noiseless(mu, geom, 2e5), grid);
    // mean over the central half-radius disk (radius 80 mm of the 160 mm cylinder)
    double mean = 0.0;
    int n = 0;
    for (int iy = 0; iy < grid.ny; ++iy)
        for (int ix = 0; ix < grid.nx; ++ix) {
            const double x = grid.x_center(ix), y = grid.y_center(iy);
            if (x * x + y * y < 80.0 * 80.0) {
                mean += mu_to_hu(fbp.at(ix, iy));
                ++n;
            }
        }
    mean /= n;
    CHECK(std::abs(mean) < 15.0);
}

TEST_CASE("FBP refuses fan-beam data") {
    const ImageGrid grid = make_grid(16);
    const ScanGeometry geom = make_fan_geometry(grid, 16, 24, grid.dx, 800.0, 1600.0);
    Sinogram sino;
    sino.geom = geom;
    sino.l.assign(geom.n_rays(), 0.0);
    sino.w.assign(geom.n_rays(), 1.0);
    sino.counts.assign(geom.n_rays(), 1.0);
    CHECK_THROWS_AS((void)fbp_reconstruct(sino, grid), std::invalid_argument);
}

TEST_CASE("problem validation rejects inconsistent shapes") {
    PWLSProblem prob = water_problem(12);
    prob.beta = -1.0;
    CHECK_THROWS_AS(prob.validate(), std::invalid_argument);
    prob.beta = 0.0;
    prob.sino.l.pop_back();
    CHECK_THROWS_AS(prob.validate(), std::invalid_argument);
}

TEST_SUITE_END();
