#include "pbir/pathseek.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pbir/metrics.hpp"

namespace pbir {

namespace {
constexpr double kEpsG = 1e-12;
// Stall test for the DOG beta schedule: "not increasing" with 1% slack so
// ordered-subset jitter does not hold the schedule back.
constexpr double kStallRel = 1.01;

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), f, a, b, c);
    return buf;
}
} // namespace

void PathConfig::validate() const {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("PathConfig: p must be in (0, 1]");
    if (!(delta_v_hu > 0.0)) throw std::invalid_argument("PathConfig: delta_v must be > 0");
    if (!(beta1 >= 0.0) || !(beta2 >= beta1))
        throw std::invalid_argument("PathConfig: need 0 <= beta1 <= beta2");
    if (direction == PathDirection::Increasing && beta2 > beta1 && !(beta_ratio > 1.0))
        throw std::invalid_argument("PathConfig: beta_ratio must be > 1 for an increasing path");
    if (n_frames < 1) throw std::invalid_argument("PathConfig: n_frames must be >= 1");
    if (n_opt < 0) throw std::invalid_argument("PathConfig: n_opt must be >= 0");
    if (n_subsets_ps < 1 || n_subsets_opt < 1)
        throw std::invalid_argument("PathConfig: subset counts must be >= 1");
}

ImageVolume target_direction(const ImageVolume& mu_start, const ImageVolume& mu_end) {
    if (!mu_start.same_shape(mu_end)) throw std::invalid_argument("target_direction: grid mismatch");
    ImageVolume d(mu_start.grid, mu_start.unit, 0.0);
    for (std::size_t j = 0; j < d.values.size(); ++j) {
        const double diff = mu_end.values[j] - mu_start.values[j];
        d.values[j] = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    }
    return d;
}

ImageVolume ratio_of_gradients(const ImageVolume& ls_grad, const ImageVolume& pen_grad,
                               PathDirection dir) {
    if (!ls_grad.same_shape(pen_grad))
        throw std::invalid_argument("ratio_of_gradients: grid mismatch");
    ImageVolume lam(ls_grad.grid, ls_grad.unit, 0.0);
    for (std::size_t j = 0; j < lam.values.size(); ++j) {
        if (dir == PathDirection::Increasing) {
            lam.values[j] = pen_grad.values[j] / std::max(std::abs(ls_grad.values[j]), kEpsG);
        } else {
            // paper sign convention: the data gradient enters negated
            lam.values[j] = -ls_grad.values[j] / std::max(std::abs(pen_grad.values[j]), kEpsG);
        }
    }
    return lam;
}

ImageVolume ratio_of_gradients(const PWLSProblem& prob, const ImageVolume& mu, PathDirection dir) {
    const ImageVolume mu_img = hu_to_mu(mu);
    return ratio_of_gradients(ls_gradient(prob, mu_img), penalty_gradient(prob.penalty, mu_img),
                              dir);
}

namespace {

// Threshold t with Prob{|lambda| >= t} <= p, by exact selection.
double quantile_threshold(const std::vector<double>& lam, double p) {
    const std::size_t n = lam.size();
    const std::size_t k = static_cast<std::size_t>(p * n);
    if (k == 0) return std::numeric_limits<double>::infinity();
    std::vector<double> mags(n);
    for (std::size_t j = 0; j < n; ++j) mags[j] = std::abs(lam[j]);
    std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end(), std::greater<double>());
    return mags[k - 1];
}

// Shared ROG walk; `forward` selects the increasing-beta roles.
ReconPath rog_walk(const PWLSProblem& prob, const ImageVolume& start, const ImageVolume& target,
                   const PathConfig& cfg, bool forward) {
    cfg.validate();
    if (!start.same_shape(target)) throw std::invalid_argument("ps_rog: endpoint grid mismatch");
    const PathDirection dir = forward ? PathDirection::Increasing : PathDirection::Decreasing;
    const double dv_mu = cfg.delta_v_hu * kMuPerHu;

    ReconPath path;
    path.config = cfg;
    path.provenance = fmt("ps_rog n_opt=%.0f n_subsets_ps=%.0f n_subsets_opt=%.0f",
                          double(cfg.n_opt), double(cfg.n_subsets_ps), double(cfg.n_subsets_opt));

    ImageVolume mu = hu_to_mu(start);
    const ImageVolume mu_target = hu_to_mu(target);
    const SubsetScheme ps_scheme = make_subsets(prob.geom, cfg.n_subsets_ps);
    int ps_cursor = 0;

    double best_dist = l2_diff_hu(mu, mu_target);
    path.frames.push_back({mu, cfg.beta1, 0, best_dist, 0});
    if (best_dist == 0.0) {
        path.termination = "start equals target";
        return path;
    }

    PWLSProblem opt_prob = prob; // beta replaced by the running estimate
    double beta_hat = forward ? cfg.beta1 : cfg.beta2;
    int non_improving = 0;

    while (static_cast<int>(path.frames.size()) < cfg.n_frames) {
        // 1. estimate the tuning parameter the current image solves for. On
        // partially converged images the raw estimate dips below the level
        // already reached, which would turn the intermediate optimization
        // into a roughening step; the walk direction pins which way the
        // assigned value may move (beta_assigned is monotone along a path).
        try {
            const double raw = estimate_beta(prob, mu);
            beta_hat = forward ? std::max(beta_hat, raw) : std::min(beta_hat, std::max(0.0, raw));
        } catch (const std::runtime_error&) {
            // keep the previous estimate when the candidate set is empty
        }

        // 2. intermediate optimization at the estimate
        if (cfg.n_opt > 0) {
            opt_prob.beta = beta_hat;
            SolveOptions oo;
            oo.n_iters = cfg.n_opt;
            oo.n_subsets = cfg.n_subsets_opt;
            mu = sqs_solve(opt_prob, mu, oo);
        }

        // 3.-4. target direction and ratio-of-gradients at the refreshed image
        const ImageVolume d = target_direction(mu, mu_target);
        const int m = ps_scheme.order[ps_cursor];
        ps_cursor = (ps_cursor + 1) % static_cast<int>(ps_scheme.order.size());
        const ImageVolume g = cfg.n_subsets_ps == 1 ? ls_gradient(prob, mu)
                                                    : ls_gradient(prob, mu, ps_scheme, m);
        const ImageVolume ph = penalty_gradient(prob.penalty, mu);
        ImageVolume lam = ratio_of_gradients(g, ph, dir);

        // Keep only pixels whose local walk direction agrees with the target
        // direction, then move the largest ratios by a fixed step along d.
        // Raising beta pushes a pixel along its penalty-descent direction
        // -sign(grad h); lowering beta pushes along the data-descent
        // direction -sign(G). Pixels already within half a step of their
        // target cannot improve by a fixed-size move; dropping them frees
        // their quantile slots instead of letting them oscillate there.
        // (The selective gradient-agreement branch of the small-scale
        // regression version is no help here: with ordered subsets a sizable
        // random fraction of pixels always passes that test, and serving
        // them first starves the quantile walk that tracks the path.)
        std::int64_t updated = 0;
        const double dead = 0.5 * dv_mu;
        for (std::size_t j = 0; j < lam.values.size(); ++j) {
            const double walk_dir = forward ? -ph.values[j] : -g.values[j];
            if (walk_dir * d.values[j] <= 0.0 ||
                std::abs(mu_target.values[j] - mu.values[j]) <= dead)
                lam.values[j] = 0.0;
        }
        const double t = quantile_threshold(lam.values, cfg.p);
        for (std::size_t j = 0; j < lam.values.size(); ++j) {
            const double a = std::abs(lam.values[j]);
            if (a >= t && a > 0.0 && d.values[j] != 0.0) {
                mu.values[j] += dv_mu * d.values[j];
                ++updated;
            }
        }
        for (auto& x : mu.values) x = std::max(0.0, x);

        const double dist = l2_diff_hu(mu, mu_target);
        path.frames.push_back({mu, beta_hat, static_cast<int>(path.frames.size()), dist, updated});

        if (updated == 0) {
            path.termination = "update set empty in both branches";
            break;
        }
        if (dist < best_dist) {
            best_dist = dist;
            non_improving = 0;
        } else if (++non_improving >= 2) {
            path.termination = "distance to target stopped decreasing";
            break;
        }
    }
    if (path.termination.empty()) path.termination = "frame budget reached";
    return path;
}

} // namespace

ReconPath ps_rog(const PWLSProblem& prob, const ImageVolume& mu_beta1, const ImageVolume& mu_beta2,
                 const PathConfig& cfg) {
    return rog_walk(prob, mu_beta1, mu_beta2, cfg, true);
}

ReconPath ps_rog_reverse(const PWLSProblem& prob, const ImageVolume& mu_beta2,
                         const ImageVolume& mu_beta1, const PathConfig& cfg) {
    PathConfig c = cfg;
    c.direction = PathDirection::Decreasing;
    return rog_walk(prob, mu_beta2, mu_beta1, c, false);
}

ImageVolume pocs_project(const ImageVolume& image, const ImageVolume& anchor,
                         const ImageVolume& anchor_grad_h) {
    if (!image.same_shape(anchor) || !image.same_shape(anchor_grad_h))
        throw std::invalid_argument("pocs_project: grid mismatch");
    ImageVolume out = image;
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        if (out.values[j] <= 0.0) out.values[j] = 0.0;
        if ((out.values[j] - anchor.values[j]) * anchor_grad_h.values[j] >= 0.0)
            out.values[j] = anchor.values[j];
    }
    return out;
}

ImageVolume dog_subproblem(const PWLSProblem& prob, const ImageVolume& mu_k, const ImageVolume& s,
                           const ImageVolume& anchor, const ImageVolume& anchor_grad_h,
                           const ImageVolume& t, double beta, double rho, int n_inner) {
    if (n_inner < 1) throw std::invalid_argument("dog_subproblem: n_inner must be >= 1");
    ImageVolume mu = mu_k;
    ImageVolume pgrad, pcurv;
    for (int inner = 0; inner < n_inner; ++inner) {
        if (beta > 0.0) penalty_gradient_and_curvature(prob.penalty, mu, pgrad, pcurv);
        for (std::size_t j = 0; j < mu.values.size(); ++j) {
            const double rt = rho * t.values[j];
            double g = rt * (mu.values[j] - mu_k.values[j] + s.values[j]);
            double den = rt;
            if (beta > 0.0) {
                g += beta * pgrad.values[j];
                den += beta * pcurv.values[j];
            }
            mu.values[j] -= g / den;
        }
        mu = pocs_project(mu, anchor, anchor_grad_h);
    }
    return mu;
}

ReconPath ps_dog(const PWLSProblem& prob, const ImageVolume& mu_beta1, const PathConfig& cfg) {
    cfg.validate();
    ReconPath path;
    path.config = cfg;
    path.provenance = fmt("ps_dog n_opt=%.0f n_subsets=%.0f beta_ratio=%.6g", double(cfg.n_opt),
                          double(cfg.n_subsets_ps), cfg.beta_ratio);

    PWLSProblem dog_prob = prob;
    dog_prob.beta = cfg.beta1;
    SolveOptions so;
    so.n_subsets = cfg.n_subsets_ps;
    so.rho = cfg.rho;
    so.n_inner = cfg.n_inner;

    const SubsetScheme scheme = make_subsets(prob.geom, cfg.n_subsets_ps);
    AdmmState st = admm_init(dog_prob, mu_beta1, so);
    const ImageVolume mu_start = st.mu;

    path.frames.push_back({st.mu, cfg.beta1, 0, 0.0, 0});

    // constrained image update anchored at the iterate entering each step
    const AdmmImageUpdate dog_update = [&](const PWLSProblem& p, const AdmmState& state,
                                           const SolveOptions& o) {
        return dog_subproblem(p, state.mu, state.s, state.mu,
                              penalty_gradient(p.penalty, state.mu), state.t, p.beta, o.rho,
                              o.n_inner);
    };

    // Frames-per-level backstop: the stall test alone can starve the schedule
    // at desk scale, where ordered-subset jitter keeps the distance to the
    // start image growing slowly forever.
    int levels = 1;
    if (cfg.beta2 > cfg.beta1 && cfg.beta_ratio > 1.0)
        levels += static_cast<int>(
            std::ceil(std::log(cfg.beta2 / cfg.beta1) / std::log(cfg.beta_ratio) - 1e-12));
    const int max_hold = std::max(1, (cfg.n_frames - 1) / levels);

    double beta = cfg.beta1;
    double dist_prev = 0.0;
    int held = 0;
    while (static_cast<int>(path.frames.size()) < cfg.n_frames) {
        dog_prob.beta = beta;
        admm_sweep(dog_prob, st, so, scheme, dog_update);
        for (int i = 0; i < cfg.n_opt; ++i) admm_sweep(dog_prob, st, so, scheme);

        const double dist = l2_diff_hu(st.mu, mu_start);
        path.frames.push_back({st.mu, beta, static_cast<int>(path.frames.size()), dist, 0});

        ++held;
        const bool stalled = dist <= dist_prev * kStallRel + 1e-9;
        if (beta >= cfg.beta2) {
            // remaining budget converges the final level; quit once settled
            if (stalled) {
                path.termination = "reached beta2";
                break;
            }
        } else if (stalled || held >= max_hold) {
            beta = std::min(beta * cfg.beta_ratio, cfg.beta2);
            held = 0;
        }
        dist_prev = dist;
    }
    if (path.termination.empty()) path.termination = "frame budget reached";
    return path;
}

std::pair<int, double> closest_frame(const ReconPath& path, const ImageVolume& reference) {
    if (path.frames.empty()) throw std::invalid_argument("closest_frame: empty path");
    int best = 0;
    double best_rmsd = rmsd(path.frames[0].image, reference);
    for (std::size_t k = 1; k < path.frames.size(); ++k) {
        const double r = rmsd(path.frames[k].image, reference);
        if (r < best_rmsd) {
            best_rmsd = r;
            best = static_cast<int>(k);
        }
    }
    return {best, best_rmsd};
}

} // namespace pbir
