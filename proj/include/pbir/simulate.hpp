#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pbir/geometry.hpp"
#include "pbir/types.hpp"

namespace pbir {

struct Ellipse {
    double cx = 0.0;  // mm
    double cy = 0.0;  // mm
    double a = 1.0;   // semi-axis, mm
    double b = 1.0;   // semi-axis, mm
    double rot = 0.0; // radians
    double value_hu = 0.0;
};

struct EllipsePhantom {
    std::vector<Ellipse> ellipses;
};

/// Rasterize on pixel centers: value = -1000 HU (air) plus the sum of all
/// ellipses containing the center. Boundary points count as inside.
ImageVolume rasterize(const EllipsePhantom& phantom, const ImageGrid& grid);

/// Single water ellipse (0 HU inside), radius scaled to 40% of the smaller
/// grid extent (160 mm on a 400 mm field of view).
EllipsePhantom water_cylinder(const ImageGrid& grid);

/// Body-sized ellipse with a handful of soft/bony inserts (-100..+400 HU).
EllipsePhantom abdomen_phantom(const ImageGrid& grid);

/// Per-ray line integrals, statistical weights, and photon counts.
struct Sinogram {
    ScanGeometry geom;
    std::vector<double> l;      // logged normalized line integrals
    std::vector<double> w;      // least-squares weights
    std::vector<double> counts; // photon counts (Poisson means in noiseless mode)
    double I0 = 0.0;
    bool noiseless = false;
    std::int64_t n_clamped = 0; // rays whose counts were clamped to 1 before the log
};

/// Poisson projection data: counts_i ~ Poisson(I0 * exp(-[P mu]_i)) with a
/// deterministic per-ray generator keyed by (seed, ray index);
/// l_i = ln(I0 / max(counts_i, 1)), w_i = counts_i.
Sinogram simulate_counts(const ImageVolume& mu, const ScanGeometry& geom, double I0,
                         std::uint64_t seed);

/// Noiseless variant: l_i = [P mu]_i exactly, w_i = I0_ref * exp(-[P mu]_i).
Sinogram simulate_noiseless(const ImageVolume& mu, const ScanGeometry& geom, double I0_ref);

/// The explicitly scaled form y_i = sqrt(w_i) * l_i used by the least-squares
/// notation; solvers fold the weights into operator products instead.
struct WeightedData {
    std::vector<double> y;
    std::vector<double> sqrt_w;
    std::vector<double> w;
};

WeightedData weighted_data(const Sinogram& sino);

/// Phantom description file: one ellipse per line,
/// "cx_mm cy_mm a_mm b_mm rot_rad value_hu", '#' comments allowed.
EllipsePhantom load_phantom(const std::string& path);
void save_phantom(const EllipsePhantom& phantom, const std::string& path);

} // namespace pbir
