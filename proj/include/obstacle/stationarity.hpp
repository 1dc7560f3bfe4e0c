#pragma once

// Objective evaluation, the strong-stationarity bundle and the identities
// used to analyse it.

#include "obstacle/complementarity.hpp"
#include "obstacle/sensitivity.hpp"
#include "obstacle/vi_solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace obstacle {

/// Residual threshold for the strong-stationarity verdict.
inline constexpr double tol_stat = 1e-7;

/// j(y) = mu_j/2 ||y - y_D||^2 + (g, y), and J(y, u) = j(y) + alpha/2 ||u||^2.
struct ObjectiveSpec {
    double mu_j = 0.0;
    GridFn y_D;
    GridFn g;
    double alpha = 1.0;

    /// Linear objective (g, y) with Tikhonov weight alpha.
    static ObjectiveSpec linear(const GridFn& g, double alpha) { return {0.0, GridFn(g.grid()), g, alpha}; }

    void validate() const {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be positive and finite");
        if (!(mu_j >= 0.0) || !std::isfinite(mu_j)) throw DomainError("mu_j must be non-negative and finite");
        require_same_grid(y_D, g);
    }

    const Grid& grid() const { return g.grid(); }

    double j(const GridFn& y) const {
        const GridFn d = y - y_D;
        return 0.5 * mu_j * inner(d, d) + inner(g, y);
    }
    /// L^2 density of j'(y).
    GridFn j_prime(const GridFn& y) const { return mu_j * (y - y_D) + g; }
};

inline double objective(const ObjectiveSpec& spec, const GridFn& y, const GridFn& u) {
    require_same_grid(y, u);
    return spec.j(y) + 0.5 * spec.alpha * inner(u, u);
}

struct StationarityBundle {
    GridFn u_bar, y_bar, lambda_bar, p_bar, nu_bar, eta_bar;
    std::vector<NodeClass> classes;
    Obstacle psi;
    ControlBounds bounds;
    ObjectiveSpec objective;

    const Grid& grid() const { return u_bar.grid(); }
};

namespace detail {

// Nodes where the control sits on one of its bounds.
inline std::vector<char> bound_active(const GridFn& u, const ControlBounds& b) {
    std::vector<char> out(static_cast<std::size_t>(u.size()), 0);
    for (int i = 0; i < u.size(); ++i) out[static_cast<std::size_t>(i)] = (u[i] == b.lower[i] || u[i] == b.upper[i]) ? 1 : 0;
    return out;
}

}  // namespace detail

/// Builds (u, y, lambda, p, nu, eta) for a candidate control. On nodes where
/// the control is strictly between its bounds nu = 0 and p = -alpha u; on
/// bound-active nodes p solves the adjoint rows of the system and nu absorbs
/// the gradient residual. Sign failures show up in the residual report.
inline StationarityBundle assemble_bundle(const ObjectiveSpec& spec, const GridFn& u_bar, const Obstacle& psi,
                                          const ControlBounds& bounds) {
    spec.validate();
    require_same_grid(u_bar, psi.values);
    require_same_grid(u_bar, spec.g);
    bounds.validate();
    if (!bounds.admissible(u_bar)) throw DomainError("candidate control violates the control bounds");

    const Grid& g = u_bar.grid();
    ObstacleSolution sol = solve_obstacle(u_bar, psi);
    GridFn jp = spec.j_prime(sol.y);
    GridFn p = -spec.alpha * u_bar;

    const std::vector<char> at_bound = detail::bound_active(u_bar, bounds);
    if (std::find(at_bound.begin(), at_bound.end(), 1) != at_bound.end()) {
        const auto n = static_cast<std::size_t>(g.size());
        detail::UnilateralProblem prob{&g, jp.values(), p.values(), std::vector<detail::NodeRole>(n, detail::NodeRole::pinned)};
        for (std::size_t i = 0; i < n; ++i) {
            if (!at_bound[i]) continue;
            if (sol.classes[i] == NodeClass::strictly_active) {
                prob.lower[static_cast<int>(i)] = 0.0;
            } else {
                prob.roles[i] = detail::NodeRole::free_node;
            }
        }
        Vector y(g.size()), lam(g.size());
        detail::solve_with_active_set(prob, std::vector<char>(n, 0), y, lam);
        p = GridFn(g, std::move(y));
    }
    GridFn nu = spec.alpha * u_bar + p;
    GridFn eta = jp + laplacian(p);
    return {u_bar, std::move(sol.y), std::move(sol.lambda), std::move(p), std::move(nu), std::move(eta),
            std::move(sol.classes), psi, bounds, spec};
}

/// Max violations of the five strong-stationarity relations: adjoint
/// equation, gradient equation, adjoint cone, state-multiplier cone and
/// control-multiplier signs.
struct StationarityResiduals {
    std::array<double, 5> r{};

    double max() const { return *std::max_element(r.begin(), r.end()); }
    bool stationary(double tol = tol_stat) const { return max() <= tol; }
};

inline StationarityResiduals check_strong_stationarity(const StationarityBundle& b) {
    StationarityResiduals out;
    const GridFn jp = b.objective.j_prime(b.y_bar);
    const GridFn line1 = -laplacian(b.p_bar) + b.eta_bar - jp;
    const GridFn line2 = b.objective.alpha * b.u_bar + b.p_bar - b.nu_bar;
    out.r[0] = norm_linf(line1);
    out.r[1] = norm_linf(line2);
    for (int i = 0; i < b.u_bar.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double p = b.p_bar[i];
        const double eta = b.eta_bar[i];
        switch (b.classes[k]) {
        case NodeClass::strictly_active: out.r[2] = std::max(out.r[2], std::abs(p)); break;
        case NodeClass::biactive:
            out.r[2] = std::max(out.r[2], std::max(0.0, -p));
            out.r[3] = std::max(out.r[3], std::max(0.0, -eta));
            break;
        case NodeClass::inactive: out.r[3] = std::max(out.r[3], std::abs(eta)); break;
        }
        const double nu = b.nu_bar[i];
        const bool lo = b.u_bar[i] == b.bounds.lower[i];
        const bool hi = b.u_bar[i] == b.bounds.upper[i];
        double v = std::abs(nu);
        if (lo && hi) {
            v = 0.0;
        } else if (lo) {
            v = std::max(0.0, -nu);
        } else if (hi) {
            v = std::max(0.0, nu);
        }
        out.r[4] = std::max(out.r[4], v);
    }
    return out;
}

/// Whether h lies in the tangent cone of the control bounds at u.
inline bool in_control_tangent_cone(const GridFn& u, const ControlBounds& b, const GridFn& h) {
    for (int i = 0; i < u.size(); ++i) {
        if (u[i] == b.lower[i] && h[i] < 0.0) return false;
        if (u[i] == b.upper[i] && h[i] > 0.0) return false;
    }
    return true;
}

/// First-order value <j'(y), S'(u; h)> + alpha (u, h) of a single direction.
inline double first_order_value(const ObjectiveSpec& spec, const ObstacleSolution& sol, const GridFn& u, const GridFn& h) {
    return inner(spec.j_prime(sol.y), directional_derivative(sol, h)) + spec.alpha * inner(u, h);
}

/// Minimum first-order value over the directions (0 for an empty list).
/// Throws DomainError if a direction leaves the tangent cone of the bounds.
inline double bouligand_gap(const ObjectiveSpec& spec, const GridFn& u_bar, const Obstacle& psi, const ControlBounds& bounds,
                            const std::vector<GridFn>& directions) {
    if (directions.empty()) return 0.0;
    for (const GridFn& h : directions)
        if (!in_control_tangent_cone(u_bar, bounds, h)) throw DomainError("direction is not in the tangent cone of the control bounds");
    const ObstacleSolution sol = solve_obstacle(u_bar, psi);
    double gap = std::numeric_limits<double>::infinity();
    for (const GridFn& h : directions) gap = std::min(gap, first_order_value(spec, sol, u_bar, h));
    return gap;
}

/// Both sides of the expansion
///   J(y, u) - J(y_bar, u_bar) = <p, lambda - lambda_bar> + <eta, y - y_bar>
///       + (nu, u - u_bar) + mu_j/2 ||y - y_bar||^2 + alpha/2 ||u - u_bar||^2.
inline std::pair<double, double> taylor_gap_identity(const StationarityBundle& b, const GridFn& u) {
    const ObstacleSolution s = solve_obstacle(u, b.psi);
    const ObjectiveSpec& spec = b.objective;
    const GridFn dy = s.y - b.y_bar;
    const GridFn du = u - b.u_bar;
    const double lhs = objective(spec, s.y, u) - objective(spec, b.y_bar, b.u_bar);
    const double rhs = inner(b.p_bar, s.lambda - b.lambda_bar) + inner(b.eta_bar, dy) + inner(b.nu_bar, du) +
                       0.5 * spec.mu_j * inner(dy, dy) + 0.5 * spec.alpha * inner(du, du);
    return {lhs, rhs};
}

struct AuxResiduals {
    double eta_on_decrease = 0.0;     // <eta, min(0, y - y_bar)>
    double lambda_on_decrease = 0.0;  // <lambda_bar, min(0, y - y_bar)>
    double beta_identity = 0.0;       // difference of the two sides of the beta splitting
    double scale = 1.0;               // magnitude of the largest term involved
};

/// Evaluates the auxiliary identities at S(u) for the given beta.
inline AuxResiduals aux_identities_check(const StationarityBundle& b, const GridFn& u, double beta) {
    const ObstacleSolution s = solve_obstacle(u, b.psi);
    const GridFn dy = s.y - b.y_bar;
    GridFn neg = dy, pos = dy;
    for (int i = 0; i < dy.size(); ++i) {
        neg[i] = std::min(0.0, dy[i]);
        pos[i] = std::max(0.0, dy[i]);
    }
    const GridFn gap_bar = b.y_bar - b.psi.values;
    const double lhs = inner(b.p_bar, s.lambda - b.lambda_bar) + inner(b.eta_bar, dy);
    const double t1 = inner(b.p_bar + beta * gap_bar, s.lambda);
    const double t2 = inner(b.eta_bar + beta * b.lambda_bar, pos);
    const double t3 = beta * inner(dy, s.lambda - b.lambda_bar);
    AuxResiduals r;
    r.eta_on_decrease = inner(b.eta_bar, neg);
    r.lambda_on_decrease = inner(b.lambda_bar, neg);
    r.beta_identity = lhs - (t1 + t2 + t3);
    r.scale = std::max({1.0, std::abs(lhs), std::abs(t1), std::abs(t2), std::abs(t3)});
    return r;
}

}  // namespace obstacle
