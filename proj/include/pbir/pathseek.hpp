#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pbir/solvers.hpp"

namespace pbir {

enum class PathDirection : std::uint8_t { Increasing = 0, Decreasing = 1 };

struct PathConfig {
    double beta1 = 5e3;
    double beta2 = 2e5;
    int n_frames = 40;
    PathDirection direction = PathDirection::Increasing;
    double p = 0.2;          // fraction of pixels updated per quantile step
    double delta_v_hu = 1.0; // fixed update step
    int n_opt = 2;           // intermediate optimization iterations per frame
    double beta_ratio = 1.45;
    int n_subsets_ps = 5;   // subsets for the path-seeking gradients
    int n_subsets_opt = 20; // subsets for the intermediate optimization
    double rho = 0.5;       // ADMM parameters for the DOG engine
    int n_inner = 2;

    void validate() const;
};

struct PathFrame {
    ImageVolume image;
    double beta_assigned = 0.0;
    int index = 0;
    double dist_to_target_hu = 0.0; // L2 over pixels in HU; target is mu(beta2)
                                    // for ROG forward, mu(beta1) for reverse/DOG
    std::int64_t pixels_updated = 0;
};

struct ReconPath {
    std::vector<PathFrame> frames;
    PathConfig config;
    std::string provenance;
    std::string termination;
};

/// Per-pixel sign of (end - start); exact zeros stay zero and are never moved
/// by direction-gated updates.
ImageVolume target_direction(const ImageVolume& mu_start, const ImageVolume& mu_end);

/// Ratio-of-gradients field. Increasing-beta mode ranks penalty dominance,
/// lambda_j = grad_j h / max(|G_j|, eps); decreasing mode swaps the roles.
ImageVolume ratio_of_gradients(const PWLSProblem& prob, const ImageVolume& mu, PathDirection dir);
ImageVolume ratio_of_gradients(const ImageVolume& ls_grad, const ImageVolume& pen_grad,
                               PathDirection dir);

/// Ratio-of-gradients path seeking between two direct solves. Frame 0 is the
/// start image bit-exactly; the walk stops when the distance to the target
/// image fails to improve twice in a row, the update set empties, or the
/// frame budget runs out.
ReconPath ps_rog(const PWLSProblem& prob, const ImageVolume& mu_beta1, const ImageVolume& mu_beta2,
                 const PathConfig& cfg);

/// Decreasing-beta variant: start at mu(beta2), walk toward mu(beta1). Less
/// stable than the forward walk when mu(beta2) is smooth.
ReconPath ps_rog_reverse(const PWLSProblem& prob, const ImageVolume& mu_beta2,
                         const ImageVolume& mu_beta1, const PathConfig& cfg);

/// Sequential projection onto { mu >= 0 } and the per-pixel half-spaces
/// { (mu_j - anchor_j) * anchor_grad_h_j <= 0 }.
ImageVolume pocs_project(const ImageVolume& image, const ImageVolume& anchor,
                         const ImageVolume& anchor_grad_h);

/// Direction-of-gradient constrained image update: approximately minimizes
///   beta h(mu) + sum_j (rho t_j / 2)(mu_j - mu_k_j + s_j)^2
/// subject to mu >= 0 and (mu_j - anchor_j) * anchor_grad_h_j <= 0, by
/// n_inner surrogate descent + projection sweeps. The output satisfies both
/// constraints exactly.
ImageVolume dog_subproblem(const PWLSProblem& prob, const ImageVolume& mu_k, const ImageVolume& s,
                           const ImageVolume& anchor, const ImageVolume& anchor_grad_h,
                           const ImageVolume& t, double beta, double rho, int n_inner);

/// Direction-of-gradient path seeking: one constrained ADMM sweep plus n_opt
/// plain sweeps per frame; beta advances by beta_ratio whenever the distance
/// to the start image stalls, until it reaches beta2.
ReconPath ps_dog(const PWLSProblem& prob, const ImageVolume& mu_beta1, const PathConfig& cfg);

/// Index and RMSD of the path frame closest to a reference image (ties go to
/// the lower index).
std::pair<int, double> closest_frame(const ReconPath& path, const ImageVolume& reference);

} // namespace pbir
