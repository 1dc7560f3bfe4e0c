#pragma once

// Partially optimal controls: for an attainable state y, the admissible
// control of least Tikhonov energy with S(u_y) = y, its multiplier, and the
// state-only reformulation of the objective.

#include "obstacle/stationarity.hpp"
#include "obstacle/vi_solver.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace obstacle {

/// u_y = min(0, -Delta_h y) on contact nodes and -Delta_h y elsewhere.
///
/// On contact nodes whose neighbours are also in contact -Delta_h y equals
/// -Delta_h psi, so this is the usual min(0, -Delta psi); at the edge of the
/// contact set using y keeps S(u_y) = y exact on the grid.
inline GridFn partially_optimal_control(const GridFn& y, const ObstacleSolution& sol) {
    require_same_grid(y, sol.y);
    GridFn u = -laplacian(y);
    for (int i = 0; i < u.size(); ++i)
        if (sol.active(i)) u[i] = std::min(0.0, u[i]);
    return u;
}

/// lambda_y = max(0, -Delta_h y) on contact nodes and 0 elsewhere.
inline GridFn partially_optimal_multiplier(const GridFn& y, const ObstacleSolution& sol) {
    require_same_grid(y, sol.y);
    GridFn l = -laplacian(y);
    for (int i = 0; i < l.size(); ++i) l[i] = sol.active(i) ? std::max(0.0, l[i]) : 0.0;
    return l;
}

/// (||u||^2 - ||u_y||^2, ||u - u_y||^2) for the state y = S(u) in sol.
inline std::pair<double, double> energy_inequality_check(const GridFn& u, const ObstacleSolution& sol) {
    const GridFn uy = partially_optimal_control(sol.y, sol);
    const GridFn d = u - uy;
    return {inner(u, u) - inner(uy, uy), inner(d, d)};
}

/// Max violation of 0 <= -u_bar, lambda_bar >= 0, min(-u_bar, lambda_bar) = 0
/// over contact nodes.
inline double double_complementarity_check(const StationarityBundle& b) {
    double v = 0.0;
    for (int i = 0; i < b.u_bar.size(); ++i) {
        if (b.classes[static_cast<std::size_t>(i)] == NodeClass::inactive) continue;
        const double a = -b.u_bar[i];
        const double l = b.lambda_bar[i];
        v = std::max({v, -a, -l, std::min(a, l)});
    }
    return v;
}

/// Contact nodes of a feasible state, by the same gap threshold the obstacle
/// solver uses.
inline std::vector<char> contact_nodes(const GridFn& y, const Obstacle& psi) {
    require_same_grid(y, psi.values);
    const double scale = std::max(1.0, norm_linf(psi.values));
    std::vector<char> c(static_cast<std::size_t>(y.size()), 0);
    for (int i = 0; i < y.size(); ++i) {
        const double gap = y[i] - psi.values[i];
        if (gap < -tol_act) throw DomainError("state violates the obstacle");
        c[static_cast<std::size_t>(i)] = gap <= 1e-12 * scale ? 1 : 0;
    }
    return c;
}

/// j(y) + alpha/2 ||Delta_h y||^2 + alpha/2 int_{y > psi} max(0, -Delta_h psi)^2.
inline double reformulated_objective(const ObjectiveSpec& spec, const GridFn& y, const Obstacle& psi) {
    const std::vector<char> contact = contact_nodes(y, psi);
    GridFn extra(y.grid());
    for (int i = 0; i < y.size(); ++i)
        if (!contact[static_cast<std::size_t>(i)]) extra[i] = std::max(0.0, -psi.laplacian[i]);
    const GridFn lap = laplacian(y);
    return spec.j(y) + 0.5 * spec.alpha * (inner(lap, lap) + inner(extra, extra));
}

/// Whether Delta_h psi >= -tol_act at every node.
inline bool classify_subharmonic(const Obstacle& psi) {
    return (psi.laplacian.values().array() >= -tol_act).all();
}

}  // namespace obstacle
