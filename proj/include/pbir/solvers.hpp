#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pbir/geometry.hpp"
#include "pbir/penalty.hpp"
#include "pbir/simulate.hpp"
#include "pbir/types.hpp"

namespace pbir {

/// The weighted least-squares reconstruction problem
///   minimize_{mu >= 0}  1/2 sum_i w_i ([P mu]_i - l_i)^2 + beta * h(mu).
struct PWLSProblem {
    ScanGeometry geom;
    Sinogram sino;
    HuberPenalty penalty;
    double beta = 0.0;

    void validate() const;
};

double data_term(const PWLSProblem& prob, const ImageVolume& mu);
double objective(const PWLSProblem& prob, const ImageVolume& mu);

/// True ascent gradient of the data term, G = P^T W (P mu - l). Signs are
/// applied explicitly at call sites; nothing here stores a negated gradient.
/// The subset variant restricts the rays to one subset and scales by
/// n_subsets so the magnitude stays unbiased.
ImageVolume ls_gradient(const PWLSProblem& prob, const ImageVolume& mu);
ImageVolume ls_gradient(const PWLSProblem& prob, const ImageVolume& mu, const SubsetScheme& scheme,
                        int subset);

/// Separable quadratic surrogate diagonal for the data term,
/// D_g = P^T (w .* (P 1)).
ImageVolume sqs_curvature(const PWLSProblem& prob);

struct IterRecord {
    int iteration = 0;
    double objective = 0.0;
    double rmsd_to_ref = -1.0; // < 0 when no reference was given
};

struct SolveOptions {
    int n_iters = 50;
    int n_subsets = 20;
    double rho = 0.5; // ADMM AL parameter
    int n_inner = 2;  // descent steps per ADMM image update
    std::vector<IterRecord>* trace = nullptr;
    const ImageVolume* reference = nullptr; // optional RMSD target for the trace
};

/// Ordered-subsets SQS gradient descent with nonnegativity. With one subset
/// the objective is monotonically non-increasing; diverging runs (objective
/// above 10x the initial value) abort with a diagnostic.
ImageVolume sqs_solve(const PWLSProblem& prob, const ImageVolume& init, const SolveOptions& opts);

/// Split-variable augmented-Lagrangian state. `v` is the backprojection of
/// the split residual; `s` is the curvature-preconditioned step
/// (rho grad + (1-rho) v) / (rho t), so the image update solves
///   min_{mu >= 0} beta h(mu) + sum_j (rho t_j / 2) (mu_j - mu_j^k + s_j)^2
/// and the interior fixed point satisfies G + beta grad h = 0.
struct AdmmState {
    ImageVolume mu;
    ImageVolume v;
    ImageVolume s;
    ImageVolume grad; // cached (subset) gradient at the current image
    ImageVolume t;    // per-pixel curvature majorizer D_g
    int sweeps_done = 0;
    int subset_cursor = 0;
};

/// Image-update customization: maps (state, beta) to the next image. Used by
/// the path-seeking engine to impose the direction-of-gradient constraint.
using AdmmImageUpdate =
    std::function<ImageVolume(const PWLSProblem&, const AdmmState&, const SolveOptions&)>;

AdmmState admm_init(const PWLSProblem& prob, const ImageVolume& init, const SolveOptions& opts);

/// One ADMM step using the subset under the cursor (the whole data set when
/// the scheme has one subset). Pass a custom image update to replace the
/// default nonnegativity-constrained prox.
void admm_step(const PWLSProblem& prob, AdmmState& state, const SolveOptions& opts,
               const SubsetScheme& scheme, const AdmmImageUpdate& update = {});

/// One full sweep over all subsets in bit-reversal order.
void admm_sweep(const PWLSProblem& prob, AdmmState& state, const SolveOptions& opts,
                const SubsetScheme& scheme, const AdmmImageUpdate& update = {});

ImageVolume admm_solve(const PWLSProblem& prob, const ImageVolume& init, const SolveOptions& opts);

/// KKT-based estimate of the tuning parameter an (approximate) optimum solves
/// for: median over {j : mu_j > 0, |grad h_j| > eps} of -G_j / grad_j h.
/// Returns +beta at an exact interior KKT point.
double estimate_beta(const PWLSProblem& prob, const ImageVolume& mu);

enum class FbpFilter : std::uint8_t { Ramp = 0, Hann = 1 };

/// Frequency-domain ramp magnitude response (zero DC gain); n/2+1 samples for
/// a length-n real transform with the given detector spacing.
std::vector<double> ramp_filter_response(int n, double det_spacing, FbpFilter filter);

/// Filtered backprojection for parallel-beam data with pi/n_views scaling.
ImageVolume fbp_reconstruct(const Sinogram& sino, const ImageGrid& grid,
                            FbpFilter filter = FbpFilter::Ramp);

} // namespace pbir
