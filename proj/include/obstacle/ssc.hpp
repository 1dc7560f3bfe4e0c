#pragma once

// Certificates for second-order sufficient conditions. Each certificate
// searches finite witness grids for the constants in the sign conditions and,
// for the local variants, samples the curvature condition on critical
// directions. A verdict is only as strong as the sample behind it; the
// report records the sample size and the smallest curvature seen.

#include "obstacle/parallel.hpp"
#include "obstacle/sensitivity.hpp"
#include "obstacle/stationarity.hpp"
#include "obstacle/structure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace obstacle {

enum class SscTheorem { compat_local, compat_global, enhanced_local, enhanced_global, subharmonic_convex };
enum class Verdict { certified, not_certified, inapplicable };

inline std::string to_string(SscTheorem t) {
    switch (t) {
    case SscTheorem::compat_local: return "compat-local";
    case SscTheorem::compat_global: return "compat-global";
    case SscTheorem::enhanced_local: return "enhanced-local";
    case SscTheorem::enhanced_global: return "enhanced-global";
    case SscTheorem::subharmonic_convex: return "subharmonic";
    }
    return "?";
}

inline SscTheorem ssc_theorem_from_string(const std::string& s) {
    for (SscTheorem t : {SscTheorem::compat_local, SscTheorem::compat_global, SscTheorem::enhanced_local,
                         SscTheorem::enhanced_global, SscTheorem::subharmonic_convex})
        if (to_string(t) == s) return t;
    throw DomainError("unknown theorem '" + s + "'");
}

inline std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::certified: return "certified";
    case Verdict::not_certified: return "not_certified";
    case Verdict::inapplicable: return "inapplicable";
    }
    return "?";
}

/// Smallest admissible curvature per unit ||h||^2 on sampled critical directions.
inline constexpr double curvature_margin = 1e-8;

struct SscReport {
    SscTheorem theorem = SscTheorem::compat_local;
    Verdict verdict = Verdict::not_certified;
    std::optional<double> beta, gamma, delta;
    double mu = 0.0;
    double omega = 0.0;
    /// Global variants: the scalar inequality holds strictly at the witness
    /// (together with the theorem's extra hypotheses this gives uniqueness).
    bool unique_global = false;
    /// Sign-condition residuals at the witness, or the best (smallest) ones
    /// found on the grid when no witness exists.
    std::map<std::string, double> residuals;
    /// Smallest beta that would satisfy the sign conditions at the smallest
    /// gamma/delta of the grid (infinity if none does).
    double required_beta = 0.0;
    int curvature_samples = 0;
    double min_curvature = std::numeric_limits<double>::infinity();
    std::string note;
};

struct SscOptions {
    std::vector<double> beta_grid;   // empty: default grid built from alpha and omega
    std::vector<double> gamma_grid;  // empty: logspace(1e-4, 1, 13)
    std::vector<double> delta_grid;  // empty: logspace(1e-4, 1, 13)
    int samples = 500;
    /// Coordinate directions +-e_i are added when the grid has at most this many nodes.
    int coordinate_limit = 64;
    std::uint64_t seed = 1;
};

inline std::vector<double> logspace(double lo, double hi, int count) {
    std::vector<double> v;
    if (count <= 0) return v;
    if (count == 1) return {lo};
    const double a = std::log10(lo), b = std::log10(hi);
    for (int k = 0; k < count; ++k) v.push_back(std::pow(10.0, a + (b - a) * k / (count - 1)));
    return v;
}

/// {0} and 2^k alpha omega 1e-3 for k = 0..20.
inline std::vector<double> default_beta_grid(double alpha, double omega) {
    std::vector<double> v{0.0};
    for (int k = 0; k <= 20; ++k) v.push_back(std::ldexp(alpha * omega * 1e-3, k));
    return v;
}

namespace detail {

struct ResolvedGrids {
    std::vector<double> beta, gamma, delta;
};

inline ResolvedGrids resolve_grids(const SscOptions& opt, double alpha, double omega) {
    ResolvedGrids g{opt.beta_grid, opt.gamma_grid, opt.delta_grid};
    if (g.beta.empty()) g.beta = default_beta_grid(alpha, omega);
    if (g.gamma.empty()) g.gamma = logspace(1e-4, 1.0, 13);
    if (g.delta.empty()) g.delta = logspace(1e-4, 1.0, 13);
    std::sort(g.beta.begin(), g.beta.end());
    std::sort(g.gamma.begin(), g.gamma.end());
    std::sort(g.delta.begin(), g.delta.end());
    return g;
}

inline GridFn obstacle_gap(const StationarityBundle& b) { return b.y_bar - b.psi.values; }

inline bool is_contact(const StationarityBundle& b, int i) { return b.classes[static_cast<std::size_t>(i)] != NodeClass::inactive; }

// Max violation of a + beta w >= 0 over the masked nodes, and the beta needed
// to remove it (w >= 0 assumed).
struct SignCondition {
    std::vector<double> a, w;

    double violation(double beta) const {
        double v = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) v = std::max(v, -(a[i] + beta * w[i]));
        return v;
    }
    double required_beta(double tol) const {
        double need = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] >= -tol) continue;
            if (w[i] <= 0.0) return std::numeric_limits<double>::infinity();
            need = std::max(need, (-tol - a[i]) / w[i]);
        }
        return need;
    }
};

// p + beta (y - psi) on inactive nodes with gap below gamma (all inactive
// nodes if gamma is empty).
inline SignCondition adjoint_condition(const StationarityBundle& b, std::optional<double> gamma) {
    SignCondition c;
    const GridFn gap = obstacle_gap(b);
    for (int i = 0; i < gap.size(); ++i) {
        if (!is_contact(b, i) && (!gamma || gap[i] < *gamma)) {
            c.a.push_back(b.p_bar[i]);
            c.w.push_back(gap[i]);
        }
    }
    return c;
}

// p >= 0 where the state touches, as the global condition demands on all of
// the domain (there y - psi = 0, so beta does not help).
inline SignCondition adjoint_on_contact(const StationarityBundle& b) {
    SignCondition c;
    for (int i = 0; i < b.p_bar.size(); ++i)
        if (is_contact(b, i)) {
            c.a.push_back(b.p_bar[i]);
            c.w.push_back(0.0);
        }
    return c;
}

inline SignCondition state_multiplier_condition(const GridFn& eta, const GridFn& weight) {
    SignCondition c;
    for (int i = 0; i < eta.size(); ++i) {
        c.a.push_back(eta[i]);
        c.w.push_back(std::max(0.0, weight[i]));
    }
    return c;
}

// max(0, -Delta psi) on contact nodes.
inline GridFn contact_pressure(const StationarityBundle& b) {
    GridFn w(b.grid());
    for (int i = 0; i < w.size(); ++i)
        if (is_contact(b, i)) w[i] = std::max(0.0, -b.psi.laplacian[i]);
    return w;
}

// -alpha u + beta (y - psi) on {0 < gap < gamma, Delta psi < 0, 0 < u < -(2 + delta) Delta psi}.
inline SignCondition enhanced_control_condition(const StationarityBundle& b, double gamma, double delta) {
    SignCondition c;
    const GridFn gap = obstacle_gap(b);
    for (int i = 0; i < gap.size(); ++i) {
        const double lap = b.psi.laplacian[i];
        const double u = b.u_bar[i];
        if (!is_contact(b, i) && gap[i] < gamma && lap < 0.0 && u > 0.0 && u < -(2 + delta) * lap) {
            c.a.push_back(-b.objective.alpha * u);
            c.w.push_back(gap[i]);
        }
    }
    return c;
}

struct CurvatureSample {
    int count = 0;
    double min_curvature = std::numeric_limits<double>::infinity();
};

// Samples unit tangent directions of the control bounds, keeps the critical
// ones (as decided by `critical`) and records the smallest curvature
// mu_j ||S'(u; h)||^2 + alpha ||h||^2.
template <class Critical>
CurvatureSample sample_curvature(const StationarityBundle& b, const SscOptions& opt, Critical critical) {
    const Grid& g = b.grid();
    const ObstacleSolution sol{b.y_bar, b.lambda_bar, b.classes, 0.0, 0, 0, false};
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal;
    std::vector<GridFn> dirs;
    auto push = [&](GridFn h) {
        for (int i = 0; i < h.size(); ++i) {
            if (b.u_bar[i] == b.bounds.lower[i]) h[i] = std::max(h[i], 0.0);
            if (b.u_bar[i] == b.bounds.upper[i]) h[i] = std::min(h[i], 0.0);
        }
        const double nrm = norm_l2(h);
        if (nrm > 0.0) dirs.push_back((1.0 / nrm) * h);
    };
    for (int k = 0; k < opt.samples; ++k) {
        GridFn h(g);
        for (int i = 0; i < h.size(); ++i) h[i] = normal(rng);
        push(std::move(h));
    }
    if (g.size() <= opt.coordinate_limit) {
        for (int i = 0; i < g.size(); ++i) {
            for (double s : {1.0, -1.0}) {
                GridFn e(g);
                e[i] = s;
                push(std::move(e));
            }
        }
    }
    std::vector<double> curv(dirs.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(static_cast<int>(dirs.size()), [&](int k) {
        const GridFn& h = dirs[static_cast<std::size_t>(k)];
        const GridFn d = directional_derivative(sol, h);
        if (!critical(h, d)) return;
        curv[static_cast<std::size_t>(k)] = b.objective.mu_j * inner(d, d) + b.objective.alpha * inner(h, h);
    });
    CurvatureSample out;
    for (double c : curv) {
        if (std::isnan(c)) continue;
        ++out.count;
        out.min_curvature = std::min(out.min_curvature, c);
    }
    return out;
}

inline bool guard_stationary(const StationarityBundle& b, SscReport& rep) {
    const StationarityResiduals r = check_strong_stationarity(b);
    if (r.stationary()) return true;
    rep.verdict = Verdict::inapplicable;
    rep.note = "bundle is not strongly stationary (max residual " + std::to_string(r.max()) + ")";
    return false;
}

inline double criticality_tol(const StationarityBundle& b) {
    return tol_stat * std::max({1.0, norm_linf(b.p_bar), norm_linf(b.eta_bar), norm_linf(b.nu_bar)});
}

inline bool gate_holds(const StationarityBundle& b) {
    for (int i = 0; i < b.psi.values.size(); ++i)
        if (std::max(0.0, -b.psi.laplacian[i]) > b.bounds.upper[i] + tol_stat) return false;
    return true;
}

inline void finish_local(SscReport& rep, bool witness, const CurvatureSample& cs) {
    rep.curvature_samples = cs.count;
    rep.min_curvature = cs.min_curvature;
    if (!witness) {
        rep.verdict = Verdict::not_certified;
        rep.note = "no witness on the grid satisfies the sign conditions";
    } else if (cs.count > 0 && cs.min_curvature < curvature_margin) {
        rep.verdict = Verdict::not_certified;
        rep.note = "curvature condition fails on a sampled critical direction";
    } else {
        rep.verdict = Verdict::certified;
        rep.note = "certified at sample size " + std::to_string(cs.count);
    }
}

}  // namespace detail

/// Local compatibility conditions: p + beta (y - psi) >= 0 near the contact
/// set and eta + beta lambda >= 0, plus curvature on critical directions.
inline SscReport certify_compat_local(const StationarityBundle& b, const SscOptions& opt = {}) {
    SscReport rep;
    rep.theorem = SscTheorem::compat_local;
    rep.mu = b.objective.mu_j;
    rep.omega = poincare_constant(b.grid());
    if (!detail::guard_stationary(b, rep)) return rep;
    const auto grids = detail::resolve_grids(opt, b.objective.alpha, rep.omega);
    const detail::SignCondition eta_cond = detail::state_multiplier_condition(b.eta_bar, b.lambda_bar);

    bool witness = false;
    double best = std::numeric_limits<double>::infinity();
    for (double beta : grids.beta) {
        const double ve = eta_cond.violation(beta);
        for (double gamma : grids.gamma) {
            const double vp = detail::adjoint_condition(b, gamma).violation(beta);
            if (std::max(vp, ve) < best) {
                best = std::max(vp, ve);
                rep.beta = beta;
                rep.gamma = gamma;
                rep.residuals = {{"adjoint_sign", vp}, {"state_multiplier_sign", ve}};
            }
            if (vp <= tol_stat && ve <= tol_stat) {
                witness = true;
                break;
            }
        }
        if (witness) break;
    }
    rep.required_beta = std::max(detail::adjoint_condition(b, grids.gamma.front()).required_beta(tol_stat),
                                 eta_cond.required_beta(tol_stat));
    if (!witness) {
        rep.beta.reset();
        rep.gamma.reset();
        detail::finish_local(rep, false, {});
        return rep;
    }
    const double tol = detail::criticality_tol(b);
    auto critical = [&](const GridFn& h, const GridFn& d) {
        return std::abs(inner(b.nu_bar, h)) <= tol && std::abs(inner(b.p_bar, -laplacian(d) - h)) <= tol &&
               std::abs(inner(b.eta_bar, d)) <= tol;
    };
    detail::finish_local(rep, true, detail::sample_curvature(b, opt, critical));
    return rep;
}

/// Global compatibility conditions with the scalar inequality
/// mu + 2 beta omega - beta^2 / alpha >= 0.
inline SscReport certify_compat_global(const StationarityBundle& b, const SscOptions& opt = {}) {
    SscReport rep;
    rep.theorem = SscTheorem::compat_global;
    rep.mu = b.objective.mu_j;
    rep.omega = poincare_constant(b.grid());
    if (!detail::guard_stationary(b, rep)) return rep;
    const auto grids = detail::resolve_grids(opt, b.objective.alpha, rep.omega);
    const detail::SignCondition p_free = detail::adjoint_condition(b, std::nullopt);
    const detail::SignCondition p_contact = detail::adjoint_on_contact(b);
    const detail::SignCondition eta_cond = detail::state_multiplier_condition(b.eta_bar, b.lambda_bar);
    const double alpha = b.objective.alpha;

    double best = std::numeric_limits<double>::infinity();
    bool witness = false;
    for (double beta : grids.beta) {
        const double vp = std::max(p_free.violation(beta), p_contact.violation(beta));
        const double ve = eta_cond.violation(beta);
        const double scalar = rep.mu + 2 * beta * rep.omega - beta * beta / alpha;
        const double v = std::max({vp, ve, std::max(0.0, -scalar)});
        const bool ok = vp <= tol_stat && ve <= tol_stat && scalar >= 0.0;
        // Prefer witnesses where the scalar inequality is strict.
        const bool better = ok ? (!witness || (!rep.unique_global && scalar > 0.0)) : (!witness && v < best);
        if (better) {
            best = v;
            rep.beta = beta;
            rep.residuals = {{"adjoint_sign", vp}, {"state_multiplier_sign", ve}, {"scalar_inequality", scalar}};
            if (ok) {
                witness = true;
                rep.unique_global = scalar > 0.0;
            }
        }
    }
    rep.required_beta = std::max({p_free.required_beta(tol_stat), p_contact.required_beta(tol_stat), eta_cond.required_beta(tol_stat)});
    if (witness) {
        rep.verdict = Verdict::certified;
        rep.note = rep.unique_global ? "global optimum, unique with quadratic growth" : "global optimum";
    } else {
        rep.beta.reset();
        rep.verdict = Verdict::not_certified;
        rep.note = "no beta on the grid satisfies the sign conditions and the scalar inequality";
    }
    return rep;
}

/// Enhanced local conditions; requires max(0, -Delta psi) <= u_b.
inline SscReport certify_enhanced_local(const StationarityBundle& b, const SscOptions& opt = {}) {
    SscReport rep;
    rep.theorem = SscTheorem::enhanced_local;
    rep.mu = b.objective.mu_j;
    rep.omega = poincare_constant(b.grid());
    if (!detail::gate_holds(b)) {
        rep.verdict = Verdict::inapplicable;
        rep.note = "max(0, -Delta psi) exceeds the upper control bound";
        return rep;
    }
    if (!detail::guard_stationary(b, rep)) return rep;
    const auto grids = detail::resolve_grids(opt, b.objective.alpha, rep.omega);
    const detail::SignCondition eta_cond = detail::state_multiplier_condition(b.eta_bar, detail::contact_pressure(b));

    bool witness = false;
    double best = std::numeric_limits<double>::infinity();
    for (double beta : grids.beta) {
        const double ve = eta_cond.violation(beta);
        for (double gamma : grids.gamma) {
            for (double delta : grids.delta) {
                const double vu = detail::enhanced_control_condition(b, gamma, delta).violation(beta);
                if (std::max(vu, ve) < best) {
                    best = std::max(vu, ve);
                    rep.beta = beta;
                    rep.gamma = gamma;
                    rep.delta = delta;
                    rep.residuals = {{"control_sign", vu}, {"state_multiplier_sign", ve}};
                }
                if (vu <= tol_stat && ve <= tol_stat) {
                    witness = true;
                    break;
                }
            }
            if (witness) break;
        }
        if (witness) break;
    }
    rep.required_beta = std::max(detail::enhanced_control_condition(b, grids.gamma.front(), grids.delta.front()).required_beta(tol_stat),
                                 eta_cond.required_beta(tol_stat));
    if (!witness) {
        rep.beta.reset();
        rep.gamma.reset();
        rep.delta.reset();
        detail::finish_local(rep, false, {});
        return rep;
    }
    const double tol = detail::criticality_tol(b);
    auto critical = [&](const GridFn&, const GridFn& d) { return std::abs(inner(b.eta_bar, d)) <= tol; };
    detail::finish_local(rep, true, detail::sample_curvature(b, opt, critical));
    return rep;
}

/// Enhanced global conditions: u not in (0, -2 Delta psi) on the free part of
/// {Delta psi < 0}, eta + beta 1_contact max(0, -Delta psi) >= 0 and the
/// scalar inequality. Unique if mu > 0 and the inequality is strict.
inline SscReport certify_enhanced_global(const StationarityBundle& b, const SscOptions& opt = {}) {
    SscReport rep;
    rep.theorem = SscTheorem::enhanced_global;
    rep.mu = b.objective.mu_j;
    rep.omega = poincare_constant(b.grid());
    if (!detail::gate_holds(b)) {
        rep.verdict = Verdict::inapplicable;
        rep.note = "max(0, -Delta psi) exceeds the upper control bound";
        return rep;
    }
    if (!detail::guard_stationary(b, rep)) return rep;
    double exclusion = 0.0;
    int excluded_nodes = 0;
    for (int i = 0; i < b.u_bar.size(); ++i) {
        const double lap = b.psi.laplacian[i];
        const double u = b.u_bar[i];
        if (detail::is_contact(b, i) || !(lap < 0.0)) continue;
        if (u > 0.0 && u < -2 * lap) {
            ++excluded_nodes;
            exclusion = std::max(exclusion, std::min(u, -2 * lap - u));
        }
    }
    rep.residuals["interval_exclusion"] = exclusion;
    if (excluded_nodes > 0) {
        rep.verdict = Verdict::not_certified;
        rep.note = "control lies in (0, -2 Delta psi) at " + std::to_string(excluded_nodes) + " free nodes";
        return rep;
    }
    const auto grids = detail::resolve_grids(opt, b.objective.alpha, rep.omega);
    const detail::SignCondition eta_cond = detail::state_multiplier_condition(b.eta_bar, detail::contact_pressure(b));
    const double alpha = b.objective.alpha;
    bool witness = false;
    double best = std::numeric_limits<double>::infinity();
    for (double beta : grids.beta) {
        const double ve = eta_cond.violation(beta);
        const double scalar = rep.mu + 2 * beta * rep.omega - beta * beta / alpha;
        const bool ok = ve <= tol_stat && scalar >= 0.0;
        const double v = std::max(ve, std::max(0.0, -scalar));
        const bool strict = scalar > 0.0 && rep.mu > 0.0;
        const bool better = ok ? (!witness || (!rep.unique_global && strict)) : (!witness && v < best);
        if (better) {
            best = v;
            rep.beta = beta;
            rep.residuals["state_multiplier_sign"] = ve;
            rep.residuals["scalar_inequality"] = scalar;
            if (ok) {
                witness = true;
                rep.unique_global = strict;
            }
        }
    }
    rep.required_beta = eta_cond.required_beta(tol_stat);
    if (witness) {
        rep.verdict = Verdict::certified;
        rep.note = rep.unique_global ? "unique global optimum" : "global optimum";
    } else {
        rep.beta.reset();
        rep.verdict = Verdict::not_certified;
        rep.note = "no beta on the grid satisfies the sign condition and the scalar inequality";
    }
    return rep;
}

/// Subharmonic obstacle (Delta_h psi >= -tol_act) and convex j: any
/// Bouligand-stationary point is the unique global solution.
inline SscReport certify_subharmonic_convex(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& bounds) {
    spec.validate();
    bounds.validate();
    SscReport rep;
    rep.theorem = SscTheorem::subharmonic_convex;
    rep.mu = spec.mu_j;
    rep.omega = poincare_constant(psi.grid());
    double worst = 0.0;
    for (int i = 0; i < psi.laplacian.size(); ++i) worst = std::max(worst, -psi.laplacian[i]);
    rep.residuals["laplacian_of_obstacle"] = worst;
    const bool sub = classify_subharmonic(psi);
    if (sub && spec.mu_j >= 0.0) {
        rep.verdict = Verdict::certified;
        rep.unique_global = true;
        rep.note = "convex reformulation: Bouligand-stationary points are the unique global solution";
    } else {
        rep.verdict = Verdict::not_certified;
        rep.note = sub ? "objective is not convex" : "obstacle is not subharmonic";
    }
    return rep;
}

inline SscReport certify(SscTheorem t, const StationarityBundle& b, const SscOptions& opt = {}) {
    switch (t) {
    case SscTheorem::compat_local: return certify_compat_local(b, opt);
    case SscTheorem::compat_global: return certify_compat_global(b, opt);
    case SscTheorem::enhanced_local: return certify_enhanced_local(b, opt);
    case SscTheorem::enhanced_global: return certify_enhanced_global(b, opt);
    case SscTheorem::subharmonic_convex: return certify_subharmonic_convex(b.objective, b.psi, b.bounds);
    }
    return {};
}

/// Empirical growth around u_bar: J(S(u), u) - J(S(u_bar), u_bar) over
/// random admissible u in an L^2 ball (or unrestricted if radius <= 0).
struct GrowthSweep {
    double min_increase = std::numeric_limits<double>::infinity();
    double min_growth_constant = std::numeric_limits<double>::infinity();  // min 2 dJ / ||u - u_bar||^2
    int samples = 0;
};

inline GrowthSweep growth_sweep(const StationarityBundle& b, double radius, int samples, std::uint64_t seed) {
    const Grid& g = b.grid();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<GridFn> controls;
    for (int k = 0; k < samples; ++k) {
        GridFn h(g);
        for (int i = 0; i < h.size(); ++i) h[i] = normal(rng);
        const double len = radius > 0.0 ? radius * unif(rng) : 10.0 * unif(rng);
        controls.push_back(b.bounds.project(b.u_bar + (len / std::max(norm_l2(h), 1e-300)) * h));
    }
    const double base = objective(b.objective, b.y_bar, b.u_bar);
    std::vector<double> inc(controls.size()), dist(controls.size());
    parallel_for(samples, [&](int k) {
        const GridFn& u = controls[static_cast<std::size_t>(k)];
        const ObstacleSolution s = solve_obstacle(u, b.psi);
        inc[static_cast<std::size_t>(k)] = objective(b.objective, s.y, u) - base;
        const GridFn d = u - b.u_bar;
        dist[static_cast<std::size_t>(k)] = inner(d, d);
    });
    GrowthSweep out;
    out.samples = samples;
    for (std::size_t k = 0; k < inc.size(); ++k) {
        out.min_increase = std::min(out.min_increase, inc[k]);
        if (dist[k] > 0.0) out.min_growth_constant = std::min(out.min_growth_constant, 2.0 * inc[k] / dist[k]);
    }
    return out;
}

}  // namespace obstacle
