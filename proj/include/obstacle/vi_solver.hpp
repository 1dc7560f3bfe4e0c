#pragma once

// The discrete obstacle problem S(u): find y >= psi and lambda >= 0 with
// -Delta_h y = u + lambda and lambda (y - psi) = 0 nodally.

#include "obstacle/complementarity.hpp"
#include "obstacle/errors.hpp"
#include "obstacle/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

namespace obstacle {

/// Multiplier threshold separating strictly active from biactive nodes.
inline constexpr double tol_act = 1e-8;
/// Target KKT residual of the obstacle solver.
inline constexpr double tol_kkt = 1e-10;

/// An obstacle sampled at the interior nodes together with its discrete
/// Laplacian, which uses the obstacle's own boundary values.
struct Obstacle {
    GridFn values;
    GridFn laplacian;

    static Obstacle from_field(const Grid& grid, const Field& psi) {
        GridFn v = GridFn::sample(grid, psi);
        GridFn lap = obstacle::laplacian(v, psi);
        return {std::move(v), std::move(lap)};
    }
    /// Obstacle given by nodal values only; the boundary is taken as zero.
    static Obstacle from_values(GridFn v) {
        GridFn lap = obstacle::laplacian(v);
        return {std::move(v), std::move(lap)};
    }

    const Grid& grid() const { return values.grid(); }
};

/// Pointwise control bounds u_a <= u <= u_b; entries may be infinite.
struct ControlBounds {
    Vector lower;
    Vector upper;

    static ControlBounds unbounded(const Grid& grid) {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vector::Constant(grid.size(), -inf), Vector::Constant(grid.size(), inf)};
    }
    static ControlBounds box(const GridFn& ua, const GridFn& ub) {
        ControlBounds b{ua.values(), ub.values()};
        b.validate();
        return b;
    }

    void validate() const {
        if (lower.size() != upper.size()) throw DomainError("control bounds: size mismatch");
        for (int i = 0; i < lower.size(); ++i)
            if (!(lower[i] <= 0.0 && upper[i] >= 0.0))
                throw DomainError("control bounds must satisfy u_a <= 0 <= u_b at every node");
    }
    bool is_unbounded() const {
        return (lower.array() == -std::numeric_limits<double>::infinity()).all() &&
               (upper.array() == std::numeric_limits<double>::infinity()).all();
    }
    bool admissible(const GridFn& u, double tol = 0.0) const {
        for (int i = 0; i < u.size(); ++i)
            if (u[i] < lower[i] - tol || u[i] > upper[i] + tol) return false;
        return true;
    }
    GridFn project(GridFn u) const {
        for (int i = 0; i < u.size(); ++i) u[i] = std::clamp(u[i], lower[i], upper[i]);
        return u;
    }
};

enum class NodeClass : std::uint8_t { inactive, strictly_active, biactive };

struct ObstacleSolution {
    GridFn y;
    GridFn lambda;
    std::vector<NodeClass> classes;
    double kkt_residual = 0.0;
    int pdas_iterations = 0;
    int sor_sweeps = 0;
    /// The contact set consists of exactly one node (a grid stand-in for
    /// contact on a set of capacity zero).
    bool single_node_contact = false;

    bool active(int i) const { return classes[static_cast<std::size_t>(i)] != NodeClass::inactive; }
    bool strictly_active(int i) const { return classes[static_cast<std::size_t>(i)] == NodeClass::strictly_active; }
    bool biactive(int i) const { return classes[static_cast<std::size_t>(i)] == NodeClass::biactive; }
    int count(NodeClass c) const { return static_cast<int>(std::count(classes.begin(), classes.end(), c)); }
    int active_count() const { return static_cast<int>(classes.size()) - count(NodeClass::inactive); }
};

struct ObstacleOptions {
    /// Start PDAS from this active set instead of the default warm start.
    std::optional<std::vector<char>> initial_active;
    /// Warm start from the solution on the grid of width 2h when available.
    bool nested = true;
    int max_pdas_iterations = 200;
    int max_sor_sweeps = 100000;
};

namespace detail {

// Coarse node j coincides with this fine node.
inline int coincident_fine_node(const Grid& fine, int j) {
    const int n = fine.n();
    const int nc = (fine.kind() == GridKind::radial_disc) ? (n + 1) / 2 - 1 : (n - 1) / 2;
    switch (fine.kind()) {
    case GridKind::interval1d: return 2 * j + 1;
    case GridKind::radial_disc: return 2 * j;
    case GridKind::square2d: {
        const int a = j % nc;
        const int b = j / nc;
        return (2 * b + 1) * n + (2 * a + 1);
    }
    }
    return -1;
}

// Coarse indices (per axis) surrounding fine index i on one axis; -1 marks a
// boundary neighbour.
inline std::vector<int> surrounding_axis(int i, int nc, bool radial) {
    if (radial) {
        if (i % 2 == 0) return {i / 2};
        const int hi = (i + 1) / 2;
        return {(i - 1) / 2, hi <= nc ? hi : -1};
    }
    if (i % 2 == 1) return {(i - 1) / 2};
    const int lo = i / 2 - 1;
    const int hi = i / 2;
    return {lo >= 0 ? lo : -1, hi < nc ? hi : -1};
}

inline std::vector<char> prolongate_active(const Grid& fine, const Grid& coarse, const std::vector<char>& coarse_active) {
    std::vector<char> out(static_cast<std::size_t>(fine.size()), 0);
    const int n = fine.n();
    const int nc = coarse.n();
    auto all_active = [&](const std::vector<int>& ids) {
        for (int j : ids)
            if (j < 0 || !coarse_active[static_cast<std::size_t>(j)]) return false;
        return true;
    };
    if (fine.kind() == GridKind::square2d) {
        for (int b = 0; b < n; ++b) {
            const auto yb = surrounding_axis(b, nc, false);
            for (int a = 0; a < n; ++a) {
                const auto xa = surrounding_axis(a, nc, false);
                std::vector<int> ids;
                for (int jb : yb)
                    for (int ja : xa) ids.push_back(ja < 0 || jb < 0 ? -1 : jb * nc + ja);
                out[static_cast<std::size_t>(b * n + a)] = all_active(ids) ? 1 : 0;
            }
        }
        return out;
    }
    const bool radial = fine.kind() == GridKind::radial_disc;
    for (int i = 0; i < fine.size(); ++i) out[static_cast<std::size_t>(i)] = all_active(surrounding_axis(i, nc, radial)) ? 1 : 0;
    return out;
}

inline GridFn inject(const GridFn& f, const Grid& coarse) {
    GridFn out(coarse);
    for (int j = 0; j < coarse.size(); ++j) out[j] = f[coincident_fine_node(f.grid(), j)];
    return out;
}

inline std::vector<char> violation_set(const GridFn& u, const GridFn& psi) {
    GridFn y0 = poisson_solve(u);
    std::vector<char> a(static_cast<std::size_t>(u.size()));
    for (int i = 0; i < u.size(); ++i) a[static_cast<std::size_t>(i)] = y0[i] < psi[i] ? 1 : 0;
    return a;
}

inline UnilateralResult solve_obstacle_raw(const GridFn& u, const GridFn& psi, const ObstacleOptions& opt);

inline std::vector<char> obstacle_warm_start(const GridFn& u, const GridFn& psi, const ObstacleOptions& opt) {
    const Grid& g = u.grid();
    if (opt.nested && g.coarsenable() && g.n() >= 15) {
        Grid c = g.coarse();
        ObstacleOptions copt = opt;
        copt.initial_active.reset();
        UnilateralResult coarse = solve_obstacle_raw(inject(u, c), inject(psi, c), copt);
        return prolongate_active(g, c, coarse.active);
    }
    return violation_set(u, psi);
}

inline UnilateralResult solve_obstacle_raw(const GridFn& u, const GridFn& psi, const ObstacleOptions& opt) {
    const Grid& g = u.grid();
    for (int i = 0; i < psi.size(); ++i)
        if (!(psi[i] < std::numeric_limits<double>::infinity()) || std::isnan(psi[i]))
            throw SolverError(SolverError::Kind::infeasible, "obstacle is +inf or NaN at an interior node");
    UnilateralProblem p{&g, u.values(), psi.values(), std::vector<NodeRole>(static_cast<std::size_t>(g.size()), NodeRole::bounded)};
    std::vector<char> start = opt.initial_active ? *opt.initial_active : obstacle_warm_start(u, psi, opt);
    UnilateralOptions uopt;
    uopt.max_pdas_iterations = opt.max_pdas_iterations;
    uopt.max_sor_sweeps = opt.max_sor_sweeps;
    uopt.tol = tol_kkt;
    return solve_unilateral(p, std::move(start), uopt);
}

}  // namespace detail

/// Classifies nodes from a state, its multiplier and the set of nodes the
/// solver held at the obstacle.
inline std::vector<NodeClass> classify_nodes(const GridFn& y, const GridFn& lambda, const GridFn& psi,
                                             const std::vector<char>& held) {
    std::vector<NodeClass> out(static_cast<std::size_t>(y.size()), NodeClass::inactive);
    const double scale = std::max(1.0, norm_linf(psi));
    for (int i = 0; i < y.size(); ++i) {
        const bool contact = (!held.empty() && held[static_cast<std::size_t>(i)]) || y[i] - psi[i] <= 1e-12 * scale;
        if (!contact) continue;
        out[static_cast<std::size_t>(i)] = lambda[i] > tol_act ? NodeClass::strictly_active : NodeClass::biactive;
    }
    return out;
}

/// Solves the obstacle problem for control u.
inline ObstacleSolution solve_obstacle(const GridFn& u, const Obstacle& psi, const ObstacleOptions& opt = {}) {
    require_same_grid(u, psi.values);
    detail::UnilateralResult r = detail::solve_obstacle_raw(u, psi.values, opt);
    const Grid& g = u.grid();
    ObstacleSolution s{GridFn(g, std::move(r.y)), GridFn(g, std::move(r.lambda)), {}, r.residual, r.pdas_iterations, r.sor_sweeps, false};
    s.classes = classify_nodes(s.y, s.lambda, psi.values, r.active);
    s.single_node_contact = s.active_count() == 1;
    return s;
}

/// (||Delta_h (y1 - y2)||_1, 2 ||u1 - u2||_1) for y_k = S(u_k).
inline std::pair<double, double> lipschitz_l1_check(const GridFn& u1, const GridFn& u2, const Obstacle& psi) {
    const ObstacleSolution s1 = solve_obstacle(u1, psi);
    const ObstacleSolution s2 = solve_obstacle(u2, psi);
    return {norm_l1(laplacian(s1.y - s2.y)), 2.0 * norm_l1(u1 - u2)};
}

/// Whether S(u1) <= S(u2) + tol_kkt nodally; requires u1 <= u2.
inline bool comparison_check(const GridFn& u1, const GridFn& u2, const Obstacle& psi) {
    require_same_grid(u1, u2);
    for (int i = 0; i < u1.size(); ++i)
        if (u1[i] > u2[i]) throw DomainError("comparison_check requires u1 <= u2 nodally");
    const ObstacleSolution s1 = solve_obstacle(u1, psi);
    const ObstacleSolution s2 = solve_obstacle(u2, psi);
    for (int i = 0; i < u1.size(); ++i)
        if (s1.y[i] > s2.y[i] + tol_kkt) return false;
    return true;
}

}  // namespace obstacle
