#include <doctest.h>

#include <numbers>

#include "pbir/geometry.hpp"
#include "pbir/simulate.hpp"
#include "testutil.hpp"

using namespace pbir;
using namespace pbir::test;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("zero image forward projects to zero rays") {
    const ImageGrid grid = make_grid(32);
    const ScanGeometry geom = make_parallel_geometry(grid, 24, 48, grid.dx);
    const ImageVolume zero(grid, PixelUnit::Mu, 0.0);
    for (double r : forward_project(zero, geom)) CHECK(r == 0.0);
}

TEST_CASE("central ray through a uniform disk matches the chord length") {
    // 50 mm radius disk of mu = 0.02 -> central integral 100 mm * 0.02 = 2.0
    const ImageGrid grid = make_grid(256, 256.0); // 1 mm pixels
    EllipsePhantom disk{{{0.0, 0.0, 50.0, 50.0, 0.0, 1000.0}}};
    const ImageVolume mu = hu_to_mu(rasterize(disk, grid));
    const int n_dets = 257; // odd: a detector sits exactly on the isocenter
    const ScanGeometry geom = make_parallel_geometry(grid, 4, n_dets, 1.0);
    const auto rays = forward_project(mu, geom);
    const int center = n_dets / 2;
    for (int v = 0; v < geom.n_views; ++v)
        CHECK(rays[v * n_dets + center] == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("ray outside the support integrates to zero") {
    const ImageGrid grid = make_grid(64, 256.0);
    EllipsePhantom disk{{{0.0, 0.0, 50.0, 50.0, 0.0, 1000.0}}};
    const ImageVolume mu = hu_to_mu(rasterize(disk, grid));
    const ScanGeometry geom = make_parallel_geometry(grid, 8, 96, grid.dx);
    const auto rays = forward_project(mu, geom);
    // outermost detectors sit at |t| ~ 190 mm, far outside the 50 mm disk
    for (int v = 0; v < geom.n_views; ++v) {
        CHECK(rays[v * geom.n_dets + 0] == 0.0);
        CHECK(rays[v * geom.n_dets + geom.n_dets - 1] == 0.0);
    }
}

TEST_CASE("forward projection is linear in the image") {
    const ImageGrid grid = make_grid(24);
    const ScanGeometry geom = make_parallel_geometry(grid, 16, 36, grid.dx);
    const ImageVolume x = random_image(grid, PixelUnit::Mu, 0.0, 0.05, 11);
    ImageVolume cx = x;
    for (auto& v : cx.values) v *= 3.5;
    const auto px = forward_project(x, geom);
    const auto pcx = forward_project(cx, geom);
    for (std::size_t i = 0; i < px.size(); ++i)
        CHECK(pcx[i] == doctest::Approx(3.5 * px[i]).epsilon(1e-12));
}

TEST_CASE("adjoint identity <Ax,y> = <x,A^T y> for random pairs") {
    for (const bool fan : {false, true}) {
        const ImageGrid grid = make_grid(32);
        const ScanGeometry geom =
            fan ? make_fan_geometry(grid, 20, 64, grid.dx, 800.0, 1600.0)
                : make_parallel_geometry(grid, 20, 48, grid.dx);
        for (std::uint64_t trial = 0; trial < 20; ++trial) {
            const ImageVolume x = random_image(grid, PixelUnit::Mu, -1.0, 1.0, 100 + trial);
            const auto y = random_rays(geom.n_rays(), -1.0, 1.0, 200 + trial);
            const auto ax = forward_project(x, geom);
            const ImageVolume aty = back_project(y, geom);
            const double lhs = dot(ax, y);
            const double rhs = dot(x.values, aty.values);
            const double denom = norm2(ax) * norm2(y);
            REQUIRE(denom > 0.0);
            CHECK(std::abs(lhs - rhs) / denom < 1e-5);
        }
    }
}

TEST_CASE("zero rays backproject to a zero image") {
    const ImageGrid grid = make_grid(16);
    const ScanGeometry geom = make_parallel_geometry(grid, 12, 24, grid.dx);
    const std::vector<double> zeros(geom.n_rays(), 0.0);
    for (double v : back_project(zeros, geom).values) CHECK(v == 0.0);
}

TEST_CASE("a single nonzero ray touches only its footprint") {
    const ImageGrid grid = make_grid(16);
    const ScanGeometry geom = make_parallel_geometry(grid, 12, 24, grid.dx);
    std::vector<double> rays(geom.n_rays(), 0.0);
    const int view = 3, det = 12;
    rays[view * geom.n_dets + det] = 1.0;
    const ImageVolume img = back_project(rays, geom);

    // footprint oracle: pixels where the same single ray picks up mass
    int nonzero = 0;
    for (std::size_t j = 0; j < img.values.size(); ++j) {
        if (img.values[j] != 0.0) {
            ++nonzero;
            ImageVolume unit(grid, PixelUnit::Mu, 0.0);
            unit.values[j] = 1.0;
            CHECK(forward_project(unit, geom)[view * geom.n_dets + det] ==
                  doctest::Approx(img.values[j]));
        }
    }
    CHECK(nonzero > 0);
    CHECK(nonzero <= 2 * std::max(grid.nx, grid.ny)); // one interpolated track
}

TEST_CASE("shape mismatches are rejected") {
    const ImageGrid grid = make_grid(16);
    const ScanGeometry geom = make_parallel_geometry(grid, 12, 24, grid.dx);
    const ImageVolume wrong(make_grid(17), PixelUnit::Mu, 0.0);
    CHECK_THROWS_AS((void)forward_project(wrong, geom), std::invalid_argument);
    std::vector<double> short_rays(geom.n_rays() - 1, 0.0);
    CHECK_THROWS_AS((void)back_project(short_rays, geom), std::invalid_argument);
}

TEST_CASE("make_subsets partitions views with modular assignment") {
    const ImageGrid grid = make_grid(16);
    const ScanGeometry geom = make_parallel_geometry(grid, 360, 24, grid.dx);

    SUBCASE("single subset holds all views") {
        const SubsetScheme s = make_subsets(geom, 1);
        CHECK(s.views_of(0).size() == 360);
        CHECK(s.order == std::vector<int>{0});
    }
    SUBCASE("360 views over 10 subsets: 36 views spaced 10 apart") {
        const SubsetScheme s = make_subsets(geom, 10);
        for (int m = 0; m < 10; ++m) {
            REQUIRE(s.views_of(m).size() == 36);
            for (std::size_t k = 0; k < 36; ++k)
                CHECK(s.views_of(m)[k] == m + static_cast<int>(k) * 10);
        }
    }
    SUBCASE("subsets are disjoint and cover all views") {
        const SubsetScheme s = make_subsets(geom, 7);
        std::vector<int> seen(geom.n_views, 0);
        for (int m = 0; m < s.n_subsets; ++m)
            for (int v : s.views_of(m)) ++seen[v];
        for (int c : seen) CHECK(c == 1);
        // the visiting order is a permutation of subset indices
        std::vector<int> order = s.order;
        std::sort(order.begin(), order.end());
        for (int m = 0; m < s.n_subsets; ++m) CHECK(order[m] == m);
    }
    SUBCASE("too many subsets is invalid") {
        CHECK_THROWS_AS((void)make_subsets(geom, 361), std::invalid_argument);
    }
}

TEST_CASE("sum of subset projections equals the full projection bit-exactly") {
    const ImageGrid grid = make_grid(24);
    const ScanGeometry geom = make_parallel_geometry(grid, 30, 36, grid.dx);
    const ImageVolume x = random_image(grid, PixelUnit::Mu, 0.0, 0.04, 5);
    const auto full = forward_project(x, geom);
    const SubsetScheme s = make_subsets(geom, 6);
    std::vector<double> sum(geom.n_rays(), 0.0);
    for (int m = 0; m < s.n_subsets; ++m) {
        const auto part = forward_project(x, geom, s, m);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += part[i];
    }
    for (std::size_t i = 0; i < sum.size(); ++i) CHECK(sum[i] == full[i]);
}

TEST_CASE("geometry invariants are validated") {
    const ImageGrid grid = make_grid(16);
    ScanGeometry g = make_parallel_geometry(grid, 8, 12, grid.dx);
    g.angles[3] = g.angles[2]; // duplicated view
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = make_parallel_geometry(grid, 8, 12, grid.dx);
    g.angles.back() = g.angles.front() + std::numbers::pi; // full span
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_SUITE_END();
