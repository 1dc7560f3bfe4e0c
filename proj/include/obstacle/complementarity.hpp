#pragma once

// Primal-dual active set solver for the discrete unilateral problem
//
//     K y = W (f + lambda),   y_i >= l_i,  lambda_i >= 0,  lambda_i (y_i - l_i) = 0
//
// with per-node roles: free nodes (l_i = -inf, lambda_i = 0), bounded nodes and
// pinned nodes (y_i prescribed, lambda_i is a free reaction). This is the
// common kernel of the obstacle solver and the directional-derivative solver.

#include "obstacle/errors.hpp"
#include "obstacle/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <vector>

namespace obstacle::detail {

enum class NodeRole : std::uint8_t { free_node, bounded, pinned };

struct UnilateralProblem {
    const Grid* grid = nullptr;
    Vector load;                 // f (density, multiplied by W internally)
    Vector lower;                // l_i for bounded nodes, pinned value for pinned nodes
    std::vector<NodeRole> roles;
};

struct UnilateralResult {
    Vector y;
    Vector lambda;
    std::vector<char> active;  // bounded nodes held at their bound, plus pinned nodes
    int pdas_iterations = 0;
    int sor_sweeps = 0;
    double residual = 0.0;
};

struct UnilateralOptions {
    int max_pdas_iterations = 200;
    int max_sor_sweeps = 100000;
    double tol = 1e-10;
};

/// Componentwise-scaled KKT residual.
inline double unilateral_residual(const UnilateralProblem& p, const Vector& y, const Vector& lambda,
                                  const std::vector<char>& active) {
    const SparseMatrix& K = p.grid->stiffness();
    const Vector& w = p.grid->weights();
    Vector scale = w.cwiseProduct(p.load).cwiseAbs();
    for (int k = 0; k < K.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(K, k); it; ++it) scale[it.row()] += std::abs(it.value() * y[it.col()]);
    // Nodes where load and state vanish locally are measured against a
    // small fraction of the global scale, not against round-off.
    const Vector local = scale.cwiseQuotient(w);
    const double floor = std::max(1e-5 * local.maxCoeff(), std::numeric_limits<double>::min());
    double res = 0.0;
    for (int i = 0; i < y.size(); ++i) {
        const double s = std::max(local[i], floor);
        switch (p.roles[i]) {
        case NodeRole::pinned: res = std::max(res, std::abs(y[i] - p.lower[i])); break;
        case NodeRole::free_node: res = std::max(res, std::abs(lambda[i]) / s); break;
        case NodeRole::bounded: {
            res = std::max(res, std::max(0.0, p.lower[i] - y[i]));
            if (active[i]) {
                res = std::max(res, std::max(0.0, -lambda[i]) / s);
            } else {
                res = std::max(res, std::abs(lambda[i]) / s);
            }
            break;
        }
        }
    }
    return res;
}

/// Solves the linear system with the current active set; returns (y, lambda).
inline void solve_with_active_set(const UnilateralProblem& p, const std::vector<char>& active, Vector& y,
                                  Vector& lambda) {
    const SparseMatrix& K = p.grid->stiffness();
    const Vector& w = p.grid->weights();
    const int n = static_cast<int>(y.size());
    std::vector<int> map(n, -1);
    int m = 0;
    for (int i = 0; i < n; ++i) {
        const bool held = p.roles[i] == NodeRole::pinned || (p.roles[i] == NodeRole::bounded && active[i]);
        if (held) {
            y[i] = p.lower[i];
        } else {
            map[i] = m++;
        }
    }
    if (m > 0) {
        Vector rhs(m);
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(K.nonZeros()));
        for (int i = 0; i < n; ++i)
            if (map[i] >= 0) rhs[map[i]] = w[i] * p.load[i];
        for (int k = 0; k < K.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(K, k); it; ++it) {
                const int r = static_cast<int>(it.row());
                const int c = static_cast<int>(it.col());
                if (map[r] < 0) continue;
                if (map[c] >= 0) {
                    t.emplace_back(map[r], map[c], it.value());
                } else {
                    rhs[map[r]] -= it.value() * y[c];
                }
            }
        }
        SparseMatrix R(m, m);
        R.setFromTriplets(t.begin(), t.end());
        Eigen::SimplicialLDLT<SparseMatrix> ldlt(R);
        if (ldlt.info() != Eigen::Success) throw SolverError(SolverError::Kind::non_convergence, "reduced system factorization failed");
        Vector z = ldlt.solve(rhs);
        for (int i = 0; i < n; ++i)
            if (map[i] >= 0) y[i] = z[map[i]];
    }
    lambda = (K * y).cwiseQuotient(w) - p.load;
}

/// Projected SOR on the same problem, warm-started from y.
inline int projected_sor(const UnilateralProblem& p, Vector& y, int max_sweeps, double tol) {
    // K is symmetric, so column i doubles as row i.
    const SparseMatrix& K = p.grid->stiffness();
    const Vector& w = p.grid->weights();
    const int n = static_cast<int>(y.size());
    Vector diag = K.diagonal();
    const double relax = 1.8;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        double change = 0.0;
        for (int i = 0; i < n; ++i) {
            if (p.roles[i] == NodeRole::pinned) {
                y[i] = p.lower[i];
                continue;
            }
            double off = 0.0;
            for (SparseMatrix::InnerIterator it(K, i); it; ++it)
                if (it.row() != i) off += it.value() * y[it.row()];
            const double gs = (w[i] * p.load[i] - off) / diag[i];
            double next = y[i] + relax * (gs - y[i]);
            if (p.roles[i] == NodeRole::bounded) next = std::max(next, p.lower[i]);
            change = std::max(change, std::abs(next - y[i]));
            y[i] = next;
        }
        if (change <= tol * std::max(1.0, y.cwiseAbs().maxCoeff())) return sweep;
    }
    return max_sweeps;
}

/// PDAS from the given initial active set, falling back to projected SOR (and
/// a polishing PDAS pass on the SOR active set) when the active set cycles or
/// the iteration cap is hit.
inline UnilateralResult solve_unilateral(const UnilateralProblem& p, std::vector<char> active,
                                         const UnilateralOptions& opt = {}) {
    const Vector& w = p.grid->weights();
    const int n = p.grid->size();
    // c ~ diagonal of W^{-1} K balances multiplier and gap units.
    const SparseMatrix& K = p.grid->stiffness();
    Vector c = K.diagonal().cwiseQuotient(w);
    for (int i = 0; i < n; ++i)
        if (p.roles[i] != NodeRole::bounded) active[i] = 0;

    UnilateralResult res;
    res.y = Vector::Zero(n);
    res.lambda = Vector::Zero(n);
    std::set<std::vector<char>> seen;

    auto pdas = [&](std::vector<char> start, int max_iter) {
        std::vector<char> cur = std::move(start);
        seen.clear();
        for (int it = 0; it < max_iter; ++it) {
            ++res.pdas_iterations;
            solve_with_active_set(p, cur, res.y, res.lambda);
            std::vector<char> next(n, 0);
            for (int i = 0; i < n; ++i)
                if (p.roles[i] == NodeRole::bounded)
                    next[i] = (res.lambda[i] + c[i] * (p.lower[i] - res.y[i]) > 0.0) ? 1 : 0;
            if (next == cur) {
                res.active = cur;
                return true;
            }
            if (!seen.insert(cur).second) return false;
            cur = std::move(next);
        }
        return false;
    };

    if (!pdas(active, opt.max_pdas_iterations)) {
        Vector y = res.y;
        for (int i = 0; i < n; ++i)
            if (p.roles[i] == NodeRole::bounded) y[i] = std::max(y[i], p.lower[i]);
        res.sor_sweeps = projected_sor(p, y, opt.max_sor_sweeps, 1e-14);
        std::vector<char> guess(n, 0);
        Vector lam = (K * y).cwiseQuotient(w) - p.load;
        for (int i = 0; i < n; ++i)
            if (p.roles[i] == NodeRole::bounded) guess[i] = (y[i] - p.lower[i] <= 1e-12 * (1.0 + std::abs(p.lower[i])) && lam[i] > 0.0) ? 1 : 0;
        if (!pdas(guess, opt.max_pdas_iterations)) {
            res.y = y;
            res.lambda = lam;
            res.active = guess;
        }
    }
    res.residual = unilateral_residual(p, res.y, res.lambda, res.active);
    if (!(res.residual <= opt.tol))
        throw SolverError(SolverError::Kind::non_convergence,
                          "unilateral solver: KKT residual " + std::to_string(res.residual) + " above tolerance");
    return res;
}

}  // namespace obstacle::detail
