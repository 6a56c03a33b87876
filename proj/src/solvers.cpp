#include "pbir/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pbir/metrics.hpp"

namespace pbir {

namespace {
constexpr double kDenomFloor = 1e-30;

ImageVolume as_mu(const ImageVolume& img) { return hu_to_mu(img); }

double maybe_rmsd(const ImageVolume& a, const ImageVolume* ref) {
    return ref ? rmsd(a, *ref) : -1.0;
}
} // namespace

void PWLSProblem::validate() const {
    geom.validate();
    penalty.validate();
    if (!(beta >= 0.0)) throw std::invalid_argument("PWLSProblem: beta must be >= 0");
    if (sino.l.size() != geom.n_rays() || sino.w.size() != geom.n_rays())
        throw std::invalid_argument("PWLSProblem: sinogram shape does not match geometry");
}

double data_term(const PWLSProblem& prob, const ImageVolume& mu) {
    const std::vector<double> proj = forward_project(mu, prob.geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const double r = proj[i] - prob.sino.l[i];
        acc += 0.5 * prob.sino.w[i] * r * r;
    }
    return acc;
}

double objective(const PWLSProblem& prob, const ImageVolume& mu) {
    return data_term(prob, mu) + prob.beta * penalty_value(prob.penalty, mu);
}

namespace {

// One forward+back pass yielding the data gradient; optionally reports the
// data-term value of the same image at no extra cost.
ImageVolume gradient_and_value(const PWLSProblem& prob, const ImageVolume& mu, double* g_val) {
    std::vector<double> proj = forward_project(mu, prob.geom);
    double acc = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        const double r = proj[i] - prob.sino.l[i];
        acc += 0.5 * prob.sino.w[i] * r * r;
        proj[i] = prob.sino.w[i] * r;
    }
    if (g_val) *g_val = acc;
    return back_project(proj, prob.geom);
}

ImageVolume weighted_residual_backprojection(const PWLSProblem& prob, const ImageVolume& mu,
                                             const SubsetScheme* scheme, int subset) {
    std::vector<double> proj = scheme ? forward_project(mu, prob.geom, *scheme, subset)
                                      : forward_project(mu, prob.geom);
    const double scale = scheme ? static_cast<double>(scheme->n_subsets) : 1.0;
    if (scheme) {
        for (int v : scheme->views_of(subset))
            for (int d = 0; d < prob.geom.n_dets; ++d) {
                const std::size_t i = static_cast<std::size_t>(v) * prob.geom.n_dets + d;
                proj[i] = prob.sino.w[i] * (proj[i] - prob.sino.l[i]);
            }
        ImageVolume g = back_project(proj, prob.geom, *scheme, subset);
        for (auto& x : g.values) x *= scale;
        return g;
    }
    for (std::size_t i = 0; i < proj.size(); ++i)
        proj[i] = prob.sino.w[i] * (proj[i] - prob.sino.l[i]);
    return back_project(proj, prob.geom);
}

} // namespace

ImageVolume ls_gradient(const PWLSProblem& prob, const ImageVolume& mu) {
    return weighted_residual_backprojection(prob, mu, nullptr, 0);
}

ImageVolume ls_gradient(const PWLSProblem& prob, const ImageVolume& mu, const SubsetScheme& scheme,
                        int subset) {
    return weighted_residual_backprojection(prob, mu, &scheme, subset);
}

ImageVolume sqs_curvature(const PWLSProblem& prob) {
    const ImageVolume ones(prob.geom.grid, PixelUnit::Mu, 1.0);
    std::vector<double> proj = forward_project(ones, prob.geom);
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] *= prob.sino.w[i];
    return back_project(proj, prob.geom);
}

ImageVolume sqs_solve(const PWLSProblem& prob, const ImageVolume& init, const SolveOptions& opts) {
    prob.validate();
    if (opts.n_iters < 0 || opts.n_subsets < 1)
        throw std::invalid_argument("sqs_solve: bad iteration/subset counts");
    ImageVolume mu = as_mu(init);
    const SubsetScheme scheme = make_subsets(prob.geom, opts.n_subsets);
    const ImageVolume dg = sqs_curvature(prob);
    const bool single = opts.n_subsets == 1;

    double initial_obj = single ? 0.0 : objective(prob, mu);
    if (!single && opts.trace)
        opts.trace->push_back({0, initial_obj, maybe_rmsd(mu, opts.reference)});

    auto check_diverged = [&](double obj) {
        if (obj > 10.0 * std::abs(initial_obj) + kDenomFloor)
            throw std::runtime_error("sqs_solve: diverged, objective exceeded 10x initial");
    };

    for (int it = 0; it < opts.n_iters; ++it) {
        for (int m : scheme.order) {
            ImageVolume grad;
            if (single) {
                // the gradient pass yields the objective of the incoming image
                double g_val = 0.0;
                grad = gradient_and_value(prob, mu, &g_val);
                const double obj = g_val + prob.beta * penalty_value(prob.penalty, mu);
                if (it == 0) initial_obj = obj;
                if (opts.trace) opts.trace->push_back({it, obj, maybe_rmsd(mu, opts.reference)});
                check_diverged(obj);
            } else {
                grad = ls_gradient(prob, mu, scheme, m);
            }
            if (prob.beta > 0.0) {
                ImageVolume pgrad, pcurv;
                penalty_gradient_and_curvature(prob.penalty, mu, pgrad, pcurv);
                for (std::size_t j = 0; j < mu.values.size(); ++j) {
                    const double num = grad.values[j] + prob.beta * pgrad.values[j];
                    const double den = dg.values[j] + prob.beta * pcurv.values[j] + kDenomFloor;
                    mu.values[j] = std::max(0.0, mu.values[j] - num / den);
                }
            } else {
                for (std::size_t j = 0; j < mu.values.size(); ++j)
                    mu.values[j] = std::max(
                        0.0, mu.values[j] - grad.values[j] / (dg.values[j] + kDenomFloor));
            }
        }
        if (!single && (opts.trace || it % 5 == 4 || it + 1 == opts.n_iters)) {
            const double obj = objective(prob, mu);
            if (opts.trace) opts.trace->push_back({it + 1, obj, maybe_rmsd(mu, opts.reference)});
            check_diverged(obj);
        }
    }
    if (single && opts.n_iters > 0) {
        const double obj = objective(prob, mu);
        if (opts.trace) opts.trace->push_back({opts.n_iters, obj, maybe_rmsd(mu, opts.reference)});
        check_diverged(obj);
    }
    return mu;
}

AdmmState admm_init(const PWLSProblem& prob, const ImageVolume& init, const SolveOptions& opts) {
    prob.validate();
    if (!(opts.rho > 0.0)) throw std::invalid_argument("admm: rho must be > 0");
    if (opts.n_inner < 1) throw std::invalid_argument("admm: n_inner must be >= 1");
    AdmmState st;
    st.mu = as_mu(init);
    st.t = sqs_curvature(prob);
    for (auto& x : st.t.values) x = std::max(x, kDenomFloor);
    st.v = ls_gradient(prob, st.mu);
    st.grad = st.v;
    st.s = ImageVolume(prob.geom.grid, PixelUnit::Mu, 0.0);
    return st;
}

void admm_step(const PWLSProblem& prob, AdmmState& state, const SolveOptions& opts,
               const SubsetScheme& scheme, const AdmmImageUpdate& update) {
    const double rho = opts.rho;
    const std::size_t n = state.mu.values.size();

    // s update: curvature-preconditioned combination of gradient and v. The
    // 1/(rho t) scaling makes the interior fixed point of the three updates
    // satisfy G + beta grad h = 0 exactly (v* = G*, so rho t s* = G*).
    for (std::size_t j = 0; j < n; ++j)
        state.s.values[j] = (rho * state.grad.values[j] + (1.0 - rho) * state.v.values[j]) /
                            (rho * state.t.values[j]);

    // image update (prox with nonnegativity, or the caller's variant)
    if (update) {
        state.mu = update(prob, state, opts);
    } else {
        const ImageVolume mu_k = state.mu;
        ImageVolume pgrad, pcurv;
        for (int inner = 0; inner < opts.n_inner; ++inner) {
            if (prob.beta > 0.0) penalty_gradient_and_curvature(prob.penalty, state.mu, pgrad, pcurv);
            for (std::size_t j = 0; j < n; ++j) {
                const double rt = rho * state.t.values[j];
                double g = rt * (state.mu.values[j] - mu_k.values[j] + state.s.values[j]);
                double den = rt;
                if (prob.beta > 0.0) {
                    g += prob.beta * pgrad.values[j];
                    den += prob.beta * pcurv.values[j];
                }
                state.mu.values[j] = std::max(0.0, state.mu.values[j] - g / den);
            }
        }
    }

    // refresh gradient at the new image, then v update
    state.subset_cursor = (state.subset_cursor + 1) % static_cast<int>(scheme.order.size());
    const int m = scheme.order[state.subset_cursor];
    state.grad = scheme.n_subsets == 1 ? ls_gradient(prob, state.mu)
                                       : ls_gradient(prob, state.mu, scheme, m);
    for (std::size_t j = 0; j < n; ++j)
        state.v.values[j] =
            (rho * state.grad.values[j] + state.v.values[j]) / (rho + 1.0);
}

void admm_sweep(const PWLSProblem& prob, AdmmState& state, const SolveOptions& opts,
                const SubsetScheme& scheme, const AdmmImageUpdate& update) {
    for (int k = 0; k < scheme.n_subsets; ++k) admm_step(prob, state, opts, scheme, update);
    ++state.sweeps_done;
}

ImageVolume admm_solve(const PWLSProblem& prob, const ImageVolume& init, const SolveOptions& opts) {
    const SubsetScheme scheme = make_subsets(prob.geom, opts.n_subsets);
    AdmmState st = admm_init(prob, init, opts);
    if (opts.trace)
        opts.trace->push_back({0, objective(prob, st.mu), maybe_rmsd(st.mu, opts.reference)});
    for (int it = 0; it < opts.n_iters; ++it) {
        admm_sweep(prob, st, opts, scheme);
        if (opts.trace)
            opts.trace->push_back(
                {it + 1, objective(prob, st.mu), maybe_rmsd(st.mu, opts.reference)});
    }
    return st.mu;
}

double estimate_beta(const PWLSProblem& prob, const ImageVolume& mu) {
    const ImageVolume mu_img = as_mu(mu);
    const ImageVolume g = ls_gradient(prob, mu_img);
    const ImageVolume ph = penalty_gradient(prob.penalty, mu_img);
    const double eps_h = 1e-6 * kHuPerMu; // 1e-6 in the HU gradient convention
    std::vector<double> ratios;
    ratios.reserve(mu_img.values.size());
    for (std::size_t j = 0; j < mu_img.values.size(); ++j) {
        if (mu_img.values[j] > 0.0 && std::abs(ph.values[j]) > eps_h)
            ratios.push_back(-g.values[j] / ph.values[j]);
    }
    if (ratios.empty())
        throw std::runtime_error("estimate_beta: penalty gradient vanishes on all candidates");
    const std::size_t mid = ratios.size() / 2;
    std::nth_element(ratios.begin(), ratios.begin() + mid, ratios.end());
    double med = ratios[mid];
    if (ratios.size() % 2 == 0) {
        const double lo = *std::max_element(ratios.begin(), ratios.begin() + mid);
        med = 0.5 * (lo + med);
    }
    return med;
}

} // namespace pbir
