#pragma once

#include <span>
#include <vector>

#include "pbir/types.hpp"

namespace pbir {

enum class BeamType : std::uint8_t { Parallel = 0, Fan = 1 };

struct FanParams {
    double source_to_iso = 0.0; // mm
    double source_to_det = 0.0; // mm
};

/// Acquisition geometry: view angles, detector layout, and the image grid the
/// projector is configured for. Ray index = view * n_dets + det.
struct ScanGeometry {
    BeamType beam = BeamType::Parallel;
    int n_views = 0;
    int n_dets = 0;
    double det_spacing = 1.0;   // mm
    std::vector<double> angles; // radians, strictly increasing
    FanParams fan;              // meaningful iff beam == Fan
    ImageGrid grid;

    std::size_t n_rays() const {
        return static_cast<std::size_t>(n_views) * static_cast<std::size_t>(n_dets);
    }
    void validate() const;
};

/// Uniform parallel-beam geometry with angles over [0, pi).
ScanGeometry make_parallel_geometry(const ImageGrid& grid, int n_views, int n_dets,
                                    double det_spacing);

/// Uniform fan-beam geometry (flat detector) with angles over [0, 2*pi).
ScanGeometry make_fan_geometry(const ImageGrid& grid, int n_views, int n_dets, double det_spacing,
                               double source_to_iso, double source_to_det);

/// Angularly interleaved view partition. `assignment[v] = v % n_subsets`;
/// `order` visits subsets in a bit-reversal shuffle so consecutive subsets are
/// decorrelated in angle.
struct SubsetScheme {
    int n_subsets = 1;
    std::vector<int> assignment;
    std::vector<int> order;
    std::vector<std::vector<int>> views; // views per subset index

    const std::vector<int>& views_of(int subset) const { return views[subset]; }
};

SubsetScheme make_subsets(const ScanGeometry& geom, int n_subsets);

/// Bit-reversal style shuffle of 0..n-1 (used for subset visiting order).
std::vector<int> bit_reversal_order(int n);

/// Ray-driven line-integral projector (Joseph-style linear interpolation).
/// Output entry i is the line integral of mu along ray i (dimensionless).
/// When a subset is given, only that subset's view rows are computed; the
/// remaining rows are zero so subset projections sum to the full projection.
std::vector<double> forward_project(const ImageVolume& mu, const ScanGeometry& geom);
std::vector<double> forward_project(const ImageVolume& mu, const ScanGeometry& geom,
                                    const SubsetScheme& scheme, int subset);

/// Exact adjoint of forward_project (same interpolation kernel, transposed).
ImageVolume back_project(std::span<const double> rays, const ScanGeometry& geom);
ImageVolume back_project(std::span<const double> rays, const ScanGeometry& geom,
                         const SubsetScheme& scheme, int subset);

} // namespace pbir
