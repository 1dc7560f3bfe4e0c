#pragma once

// Directional derivative S'(u; h) of the control-to-state map.

#include "obstacle/complementarity.hpp"
#include "obstacle/vi_solver.hpp"

#include <vector>

namespace obstacle {

/// Solves the reduced obstacle problem for delta = S'(u; h): delta = 0 on
/// strictly active nodes, delta >= 0 on biactive nodes, free elsewhere.
inline GridFn directional_derivative(const ObstacleSolution& sol, const GridFn& h) {
    require_same_grid(sol.y, h);
    const Grid& g = h.grid();
    const auto n = static_cast<std::size_t>(g.size());
    detail::UnilateralProblem p{&g, h.values(), Vector::Zero(g.size()), std::vector<detail::NodeRole>(n)};
    std::vector<char> start(n, 0);
    bool any_biactive = false;
    for (std::size_t i = 0; i < n; ++i) {
        switch (sol.classes[i]) {
        case NodeClass::inactive: p.roles[i] = detail::NodeRole::free_node; break;
        case NodeClass::strictly_active: p.roles[i] = detail::NodeRole::pinned; break;
        case NodeClass::biactive: p.roles[i] = detail::NodeRole::bounded; any_biactive = true; break;
        }
    }
    if (any_biactive) {
        // Start from the nodes the cone-free solution pushes below zero.
        Vector y(g.size()), lam(g.size());
        detail::solve_with_active_set(p, start, y, lam);
        for (std::size_t i = 0; i < n; ++i)
            if (p.roles[i] == detail::NodeRole::bounded && y[static_cast<int>(i)] < 0.0) start[i] = 1;
    }
    detail::UnilateralOptions opt;
    opt.tol = 1e-10;
    detail::UnilateralResult r = detail::solve_unilateral(p, std::move(start), opt);
    return GridFn(g, std::move(r.y));
}

/// Overload that solves the obstacle problem for u first.
inline GridFn directional_derivative(const GridFn& u, const Obstacle& psi, const GridFn& h) {
    return directional_derivative(solve_obstacle(u, psi), h);
}

}  // namespace obstacle
