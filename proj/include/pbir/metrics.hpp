#pragma once

#include <optional>
#include <vector>

#include "pbir/types.hpp"

namespace pbir {

/// Pixel-indexed rectangular region; w == 0 or h == 0 selects the full grid.
struct RoiRect {
    int x0 = 0;
    int y0 = 0;
    int w = 0;
    int h = 0;
};

/// Root-mean-squared and mean-absolute difference in HU over the ROI.
double rmsd(const ImageVolume& a, const ImageVolume& b, std::optional<RoiRect> roi = {});
double mad(const ImageVolume& a, const ImageVolume& b, std::optional<RoiRect> roi = {});

/// Ensemble noise power spectrum of a square ROI. The spectrum is fftshifted
/// (DC at the center) in units of mm^2 * HU^2.
struct NPSResult {
    int nx = 0;
    int ny = 0;
    std::vector<double> spectrum;       // row-major, fy outer
    std::vector<double> fx;             // mm^-1, shifted axis
    std::vector<double> fy;             // mm^-1, shifted axis
    std::vector<double> radial_freq;    // bin centers, mm^-1
    std::vector<double> radial_profile; // annular mean of the spectrum
    double peak_frequency = 0.0;        // mm^-1, argmax of the radial profile
    int n_realizations = 0;
};

/// Ensemble estimator: subtract the ensemble mean, 2D DFT each residual ROI,
/// average |.|^2 and scale by dx*dy/(Nx*Ny). Needs >= 2 realizations on one
/// grid. n_bins == 0 picks max(nx, ny)/2 radial bins.
NPSResult nps(const std::vector<ImageVolume>& realizations, RoiRect roi, int n_bins = 0);

struct PeakPath {
    std::vector<double> peaks; // mm^-1 per frame
    int n_violations = 0;      // frames where the peak increased
};

PeakPath nps_peak_path(const std::vector<NPSResult>& sequence);

} // namespace pbir
