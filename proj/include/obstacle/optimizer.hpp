#pragma once

// Numerical solution of the control problem: a convex state-constrained QP for
// subharmonic obstacles and a projected descent method for general ones.

#include "obstacle/complementarity.hpp"
#include "obstacle/errors.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/sensitivity.hpp"
#include "obstacle/stationarity.hpp"
#include "obstacle/structure.hpp"
#include "obstacle/vi_solver.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace obstacle {

/// Stationarity threshold of the descent method.
inline constexpr double tol_opt = 1e-6;

struct TraceRow {
    int iteration = 0;
    double objective = 0.0;
    double step = 0.0;
    double first_order = 0.0;  // first-order value along the unit descent direction
    std::string kind;          // "gradient", "sampled", "escape" or "start"
};

struct OptimizerResult {
    GridFn u, y;
    double objective = 0.0;
    std::string method;
    std::string status;  // "converged", "line_search_failure", "iteration_cap"
    int iterations = 0;
    double kkt_residual = std::numeric_limits<double>::quiet_NaN();   // subharmonic path
    double bouligand_gap = std::numeric_limits<double>::quiet_NaN();  // general path
    int escapes = 0;
    std::vector<TraceRow> trace;
};

struct SubharmonicOptions {
    int max_iterations = 200;  // PDAS cycle guard
    /// Random initial PDAS active sets drawn from this seed; empty sets otherwise.
    std::optional<std::uint64_t> random_start;
};

namespace detail {

// Working sets of the state-constrained QP: y_i = psi_i, u_i = u_a, u_i = u_b.
struct QpActiveSets {
    std::vector<char> state, lower, upper;

    explicit QpActiveSets(int n) : state(static_cast<std::size_t>(n), 0), lower(state), upper(state) {}
    bool operator==(const QpActiveSets&) const = default;
    std::vector<char> key() const {
        std::vector<char> k = state;
        k.insert(k.end(), lower.begin(), lower.end());
        k.insert(k.end(), upper.begin(), upper.end());
        return k;
    }
};

// Primal-dual point of the QP: q is the multiplier of the state equation,
// xi >= 0 that of y >= psi, zeta that of the control bounds (>= 0 at u_b,
// <= 0 at u_a).
struct QpPoint {
    GridFn y, u, q, xi, zeta;
};

class StateConstrainedQp {
public:
    StateConstrainedQp(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& b)
        : spec_(spec), psi_(psi), b_(b), g_(psi.grid()), n_(g_.size()) {}

    const Grid& grid() const { return g_; }
    int size() const { return n_; }
    const ControlBounds& bounds() const { return b_; }
    const Obstacle& psi() const { return psi_; }
    const ObjectiveSpec& spec() const { return spec_; }

    /// Minimizer with the working-set constraints held as equalities, or
    /// nullopt if they are dependent.
    std::optional<QpPoint> solve(const QpActiveSets& act) const {
        const SparseMatrix& K = g_.stiffness();
        const Vector& w = g_.weights();
        const int n = n_;
        const double alpha = spec_.alpha;
        // Unknowns [y; q]. Rows: y-stationarity (or y = psi), state equation
        // (with u = q / alpha off the bound sets).
        // Where the state is pinned on a node's whole stencil the control is
        // fixed too, and a bound held there would make the system singular.
        std::vector<char> lower = act.lower, upper = act.upper;
        for (int k = 0; k < K.outerSize(); ++k) {
            bool pinned = true;
            for (SparseMatrix::InnerIterator e(K, k); e && pinned; ++e) pinned = act.state[static_cast<std::size_t>(e.row())] != 0;
            if (pinned) lower[static_cast<std::size_t>(k)] = upper[static_cast<std::size_t>(k)] = 0;
        }
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(2 * K.nonZeros() + 2 * n));
        Vector rhs = Vector::Zero(2 * n);
        for (int i = 0; i < n; ++i) {
            if (act.state[i]) {
                t.emplace_back(i, i, 1.0);
                rhs[i] = psi_.values[i];
            } else {
                if (spec_.mu_j != 0.0) t.emplace_back(i, i, spec_.mu_j * w[i]);
                rhs[i] = w[i] * (spec_.mu_j * spec_.y_D[i] - spec_.g[i]);
            }
            if (lower[i]) {
                rhs[n + i] = w[i] * b_.lower[i];
            } else if (upper[i]) {
                rhs[n + i] = w[i] * b_.upper[i];
            } else {
                t.emplace_back(n + i, n + i, -w[i] / alpha);
            }
        }
        for (int k = 0; k < K.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator e(K, k); e; ++e) {
                const int r = static_cast<int>(e.row());
                const int c = static_cast<int>(e.col());
                if (!act.state[r]) t.emplace_back(r, n + c, e.value());
                t.emplace_back(n + r, c, e.value());
            }
        }
        SparseMatrix A(2 * n, 2 * n);
        A.setFromTriplets(t.begin(), t.end());
        Eigen::SparseLU<SparseMatrix> lu;
        lu.analyzePattern(A);
        lu.factorize(A);
        if (lu.info() != Eigen::Success) return std::nullopt;
        const Vector z = lu.solve(rhs);
        if (!z.allFinite()) return std::nullopt;
        QpPoint p{GridFn(g_, z.head(n)), GridFn(g_), GridFn(g_, z.tail(n)), GridFn(g_), GridFn(g_)};
        const GridFn lq = -laplacian(p.q);
        for (int i = 0; i < n; ++i) {
            p.u[i] = lower[i] ? b_.lower[i] : upper[i] ? b_.upper[i] : p.q[i] / alpha;
            p.zeta[i] = (lower[i] || upper[i]) ? p.q[i] - alpha * p.u[i] : 0.0;
            p.xi[i] = act.state[i] ? spec_.mu_j * (p.y[i] - spec_.y_D[i]) + spec_.g[i] + lq[i] : 0.0;
        }
        return p;
    }

    /// Scaled KKT residual: stationarity in y and u, state equation,
    /// complementarity and multiplier signs.
    /// Each row is divided by the magnitude of the terms it sums, so the
    /// h^-2 growth of Delta_h does not masquerade as a residual.
    double kkt_residual(const QpPoint& p) const {
        const GridFn jp = spec_.j_prime(p.y);
        const GridFn lq = -laplacian(p.q);
        const GridFn ly = -laplacian(p.y);
        const Vector mq = magnitude(p.q);
        const Vector my = magnitude(p.y);
        double res = 0.0;
        for (int i = 0; i < n_; ++i) {
            const double sy = 1.0 + std::abs(jp[i]) + mq[i] + std::abs(p.xi[i]);
            res = std::max(res, std::abs(jp[i] + lq[i] - p.xi[i]) / sy);
            const double su = 1.0 + spec_.alpha * std::abs(p.u[i]) + std::abs(p.q[i]) + std::abs(p.zeta[i]);
            res = std::max(res, std::abs(spec_.alpha * p.u[i] - p.q[i] + p.zeta[i]) / su);
            res = std::max(res, std::abs(ly[i] - p.u[i]) / (1.0 + my[i] + std::abs(p.u[i])));
            const double scale = 1.0 + std::abs(psi_.values[i]);
            res = std::max(res, std::max(0.0, psi_.values[i] - p.y[i]) / scale);
            res = std::max(res, std::max(0.0, -p.xi[i]) / sy);
            res = std::max(res, std::min(std::abs(p.xi[i]) / sy, std::abs(p.y[i] - psi_.values[i]) / scale));
            res = std::max(res, std::max({0.0, b_.lower[i] - p.u[i], p.u[i] - b_.upper[i]}) / (1.0 + std::abs(p.u[i])));
            if (p.zeta[i] > 0.0) res = std::max(res, std::min(p.zeta[i] / su, (b_.upper[i] - p.u[i]) / (1.0 + std::abs(p.u[i]))));
            if (p.zeta[i] < 0.0) res = std::max(res, std::min(-p.zeta[i] / su, (p.u[i] - b_.lower[i]) / (1.0 + std::abs(p.u[i]))));
        }
        return res;
    }

private:
    // (|K| |f|) / W: the size of the terms in Delta_h f.
    Vector magnitude(const GridFn& f) const {
        const SparseMatrix& K = g_.stiffness();
        Vector out = Vector::Zero(n_);
        for (int k = 0; k < K.outerSize(); ++k)
            for (SparseMatrix::InnerIterator e(K, k); e; ++e) out[e.row()] += std::abs(e.value() * f[static_cast<int>(e.col())]);
        return out.cwiseQuotient(g_.weights());
    }

    ObjectiveSpec spec_;
    Obstacle psi_;
    ControlBounds b_;
    Grid g_;
    int n_;
};

// PDAS: the next working sets are read off the multipliers and violations.
// Returns nullopt on a repeated working set or at the iteration cap.
inline std::optional<QpPoint> qp_pdas(const StateConstrainedQp& qp, QpActiveSets act, int max_iterations, int& iterations) {
    const int n = qp.size();
    const double alpha = qp.spec().alpha;
    const ControlBounds& b = qp.bounds();
    std::set<std::vector<char>> seen;
    for (int it = 0; it < max_iterations; ++it) {
        ++iterations;
        std::optional<QpPoint> sol = qp.solve(act);
        if (!sol) return std::nullopt;
        QpPoint& p = *sol;
        QpActiveSets next(n);
        for (int i = 0; i < n; ++i) {
            // The weight on the state gap is irrelevant on the working set,
            // where y = psi, so a unit weight is used.
            next.state[i] = p.xi[i] + (qp.psi().values[i] - p.y[i]) > 0.0;
            next.upper[i] = p.zeta[i] + alpha * (p.u[i] - b.upper[i]) > 0.0;
            next.lower[i] = p.zeta[i] + alpha * (p.u[i] - b.lower[i]) < 0.0;
        }
        if (next == act) return sol;
        if (!seen.insert(act.key()).second) return std::nullopt;
        act = std::move(next);
    }
    return std::nullopt;
}

// A feasible state: S_0(v) with v = u_b where finite and a constant large
// enough to lift the state above psi elsewhere.
inline GridFn qp_feasible_start(const StateConstrainedQp& qp) {
    const Grid& g = qp.grid();
    const ControlBounds& b = qp.bounds();
    const GridFn& psi = qp.psi().values;
    for (double lift = 1.0; lift < 1e16; lift *= 4.0) {
        GridFn v(g);
        for (int i = 0; i < g.size(); ++i) v[i] = std::isfinite(b.upper[i]) ? b.upper[i] : lift;
        GridFn y = poisson_solve(v);
        bool ok = true;
        for (int i = 0; i < g.size() && ok; ++i) ok = y[i] >= psi[i];
        if (ok) return y;
        if (b.upper.allFinite()) break;
    }
    throw SolverError(SolverError::Kind::infeasible, "no admissible control keeps the state above the obstacle");
}

// Primal active-set method: feasible iterates, one working-set change per
// step, objective non-increasing. Terminates finitely for this strictly
// convex QP barring degenerate cycling, which the cap guards against.
inline QpPoint qp_primal_active_set(const StateConstrainedQp& qp, int max_iterations, int& iterations) {
    const int n = qp.size();
    const ControlBounds& b = qp.bounds();
    const GridFn& psi = qp.psi().values;
    GridFn y = qp_feasible_start(qp);
    QpActiveSets act(n);
    auto set_of = [&](int kind) -> std::vector<char>& { return kind == 0 ? act.state : kind == 1 ? act.lower : act.upper; };
    auto control_of = [&](const GridFn& f) { return -laplacian(f); };
    // A blocking constraint that makes the working set singular is implied by
    // it (its rate is round-off); it is undone and skipped until a release.
    std::set<std::pair<int, int>> implied;
    std::optional<std::pair<int, int>> added;
    for (int it = 0; it < max_iterations; ++it) {
        ++iterations;
        std::optional<QpPoint> sol = qp.solve(act);
        if (!sol) {
            if (!added) throw SolverError(SolverError::Kind::non_convergence, "primal active-set method produced a dependent working set");
            set_of(added->first)[static_cast<std::size_t>(added->second)] = 0;
            implied.insert(*added);
            added.reset();
            continue;
        }
        added.reset();
        QpPoint& p = *sol;
        const GridFn d = p.y - y;
        const double dscale = std::max(1.0, norm_linf(y));
        if (norm_linf(d) > 1e-13 * dscale) {
            // Longest feasible step toward the working-set minimizer.
            const GridFn ly = control_of(y);
            const GridFn ld = control_of(d);
            double tau = 1.0;
            int block = -1;
            int block_kind = 0;
            auto consider = [&](double slack, double rate, int i, int kind) {
                if (!(rate < 0.0) || implied.count({kind, i})) return;
                const double s = std::max(0.0, slack) / -rate;
                if (s < tau) {
                    tau = s;
                    block = i;
                    block_kind = kind;
                }
            };
            for (int i = 0; i < n; ++i) {
                if (!act.state[i]) consider(y[i] - psi[i], d[i], i, 0);
                if (!act.lower[i] && std::isfinite(b.lower[i])) consider(ly[i] - b.lower[i], ld[i], i, 1);
                if (!act.upper[i] && std::isfinite(b.upper[i])) consider(b.upper[i] - ly[i], -ld[i], i, 2);
            }
            y = y + tau * d;
            if (block >= 0) {
                set_of(block_kind)[static_cast<std::size_t>(block)] = 1;
                added = std::make_pair(block_kind, block);
                continue;
            }
            y = p.y;
        }
        // At the working-set minimizer: release the most negative multiplier.
        int worst = -1;
        int worst_kind = 0;
        double most = 0.0;
        for (int i = 0; i < n; ++i) {
            const double scale = 1.0 + std::abs(p.q[i]);
            if (act.state[i] && p.xi[i] / scale < most) most = p.xi[i] / scale, worst = i, worst_kind = 0;
            if (act.lower[i] && -p.zeta[i] / scale < most) most = -p.zeta[i] / scale, worst = i, worst_kind = 1;
            if (act.upper[i] && p.zeta[i] / scale < most) most = p.zeta[i] / scale, worst = i, worst_kind = 2;
        }
        if (worst < 0 || most > -1e-13) return std::move(p);
        set_of(worst_kind)[static_cast<std::size_t>(worst)] = 0;
        implied.clear();
    }
    throw SolverError(SolverError::Kind::non_convergence, "primal active-set method hit its iteration cap");
}

}  // namespace detail

/// Minimizes j(y) + alpha/2 ||Delta_h y||^2 over y >= psi, u_a <= -Delta_h y <= u_b,
/// returning u = -Delta_h y. The obstacle must be subharmonic and j convex;
/// the result is then the unique solution of the control problem. PDAS runs
/// first; if its working sets cycle or it reaches the cap, a primal active-set
/// method finishes the solve.
inline OptimizerResult solve_subharmonic(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& bounds,
                                         const SubharmonicOptions& opt = {}) {
    spec.validate();
    bounds.validate();
    require_same_grid(spec.g, psi.values);
    if (bounds.lower.size() != psi.values.size()) throw DomainError("control bounds: size mismatch");
    if (!classify_subharmonic(psi)) throw DomainError("solve_subharmonic needs a subharmonic obstacle");
    // The state-constrained form is exact when the nodal values alone are
    // subharmonic; a positive obstacle on the boundary can break this.
    if (!(laplacian(psi.values).values().array() >= -tol_act).all())
        throw DomainError("obstacle values with zero boundary data are not subharmonic (obstacle positive on the boundary?)");

    const Grid& g = psi.grid();
    const int n = g.size();
    detail::StateConstrainedQp qp(spec, psi, bounds);
    // Also the infeasibility check: S_0(u_b) is the largest attainable state.
    (void)detail::qp_feasible_start(qp);

    detail::QpActiveSets act(n);
    if (opt.random_start) {
        std::mt19937_64 rng(*opt.random_start);
        std::uniform_int_distribution<int> pick(0, 2);
        for (int i = 0; i < n; ++i) {
            act.state[i] = static_cast<char>(pick(rng) == 0);
            const int k = pick(rng);
            if (k == 1 && std::isfinite(bounds.lower[i])) act.lower[i] = 1;
            if (k == 2 && std::isfinite(bounds.upper[i])) act.upper[i] = 1;
        }
    }

    OptimizerResult res{GridFn(g), GridFn(g)};
    res.method = "subharmonic";
    std::optional<detail::QpPoint> p = detail::qp_pdas(qp, act, opt.max_iterations, res.iterations);
    std::string kind = "pdas";
    if (!p || !(qp.kkt_residual(*p) <= 1e-9)) {
        kind = "primal_active_set";
        p = detail::qp_primal_active_set(qp, 50 * n + 1000, res.iterations);
    }
    res.kkt_residual = qp.kkt_residual(*p);
    res.u = p->u;
    res.y = p->y;
    res.objective = objective(spec, p->y, p->u);
    res.status = "converged";
    res.trace.push_back({res.iterations, res.objective, 0.0, 0.0, kind});
    return res;
}

struct GeneralOptions {
    int max_iterations = 5000;
    double tol = tol_opt;
    double sigma = 1e-4;
    double backtrack = 0.5;
    double initial_step = 1.0;
    double min_step = 1e-14;
    int direction_samples = 8;  // random tangent directions in the stopping test
    int biactive_directions = 16;
    bool escape = true;
    bool contact_newton = true;  // try the contact Newton step each iteration
    std::uint64_t seed = 1;
};

namespace detail {

// p with -Delta_h p = j'(y) off the held nodes and p = 0 on them, so that
// alpha u + p is the gradient of the reduced objective on the branch where
// those nodes stay in contact. Strictly active nodes are always held;
// biactive node i is held when hold[i] is set.
inline GridFn adjoint_surrogate(const ObjectiveSpec& spec, const ObstacleSolution& sol, const std::vector<char>& hold) {
    const Grid& g = sol.y.grid();
    const auto n = static_cast<std::size_t>(g.size());
    UnilateralProblem p{&g, spec.j_prime(sol.y).values(), Vector::Zero(g.size()), std::vector<NodeRole>(n, NodeRole::free_node)};
    for (std::size_t i = 0; i < n; ++i)
        if (sol.classes[i] == NodeClass::strictly_active || (sol.classes[i] == NodeClass::biactive && hold[i])) p.roles[i] = NodeRole::pinned;
    Vector y(g.size()), lam(g.size());
    solve_with_active_set(p, std::vector<char>(n, 0), y, lam);
    return GridFn(g, std::move(y));
}

inline GridFn adjoint_surrogate(const ObjectiveSpec& spec, const ObstacleSolution& sol) {
    return adjoint_surrogate(spec, sol, std::vector<char>(static_cast<std::size_t>(sol.y.size()), 0));
}

// Lawson-Hanson active set for min 1/2 v'Mv - b'v over v >= 0 (M symmetric
// positive semidefinite, small and dense).
inline Eigen::VectorXd lawson_hanson(const Eigen::MatrixXd& M, const Eigen::VectorXd& b) {
    const auto m = static_cast<int>(b.size());
    const double tol = 1e-13 * std::max({1.0, M.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
    std::vector<char> in(static_cast<std::size_t>(m), 0);
    for (int outer = 0; outer < 3 * m + 10; ++outer) {
        const Eigen::VectorXd w = b - M * v;
        int add = -1;
        for (int j = 0; j < m; ++j)
            if (!in[static_cast<std::size_t>(j)] && w[j] > tol && (add < 0 || w[j] > w[add])) add = j;
        if (add < 0) break;
        in[static_cast<std::size_t>(add)] = 1;
        for (int inner_it = 0; inner_it < 3 * m + 10; ++inner_it) {
            std::vector<int> P;
            for (int j = 0; j < m; ++j)
                if (in[static_cast<std::size_t>(j)]) P.push_back(j);
            const auto k = static_cast<int>(P.size());
            Eigen::MatrixXd Mp(k, k);
            Eigen::VectorXd bp(k);
            for (int r = 0; r < k; ++r) {
                bp[r] = b[P[static_cast<std::size_t>(r)]];
                for (int c = 0; c < k; ++c) Mp(r, c) = M(P[static_cast<std::size_t>(r)], P[static_cast<std::size_t>(c)]);
            }
            const Eigen::VectorXd sp = Mp.completeOrthogonalDecomposition().solve(bp);
            Eigen::VectorXd sv = Eigen::VectorXd::Zero(m);
            for (int r = 0; r < k; ++r) sv[P[static_cast<std::size_t>(r)]] = sp[r];
            bool positive = true;
            double step = 1.0;
            for (int j : P) {
                if (sv[j] <= 0.0) {
                    positive = false;
                    const double denom = v[j] - sv[j];
                    if (denom > 0.0) step = std::min(step, v[j] / denom);
                }
            }
            if (positive) {
                v = sv;
                break;
            }
            v += step * (sv - v);
            for (int j : P)
                if (v[j] <= tol) {
                    v[j] = 0.0;
                    in[static_cast<std::size_t>(j)] = 0;
                }
        }
    }
    return v;
}

// min 1/2 v'Mv - b'v over v >= 0 for symmetric positive semidefinite M.
// A primal-dual active-set iteration usually settles in a few solves; it
// falls back to Lawson-Hanson if it cycles or the reduced block is singular.
inline Eigen::VectorXd nonnegative_qp(const Eigen::MatrixXd& M, const Eigen::VectorXd& b) {
    const auto m = static_cast<int>(b.size());
    const double tol = 1e-12 * std::max({1.0, M.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
    std::vector<char> freev(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) freev[static_cast<std::size_t>(j)] = b[j] > 0.0;
    std::set<std::vector<char>> seen;
    for (int it = 0; it < 50 && seen.insert(freev).second; ++it) {
        std::vector<int> F;
        for (int j = 0; j < m; ++j)
            if (freev[static_cast<std::size_t>(j)]) F.push_back(j);
        const auto k = static_cast<int>(F.size());
        Eigen::VectorXd v = Eigen::VectorXd::Zero(m);
        if (k > 0) {
            Eigen::MatrixXd Mf(k, k);
            Eigen::VectorXd bf(k);
            for (int r = 0; r < k; ++r) {
                bf[r] = b[F[static_cast<std::size_t>(r)]];
                for (int c = 0; c < k; ++c) Mf(r, c) = M(F[static_cast<std::size_t>(r)], F[static_cast<std::size_t>(c)]);
            }
            Eigen::LLT<Eigen::MatrixXd> llt(Mf);
            if (llt.info() != Eigen::Success) break;
            const Eigen::VectorXd vf = llt.solve(bf);
            if (((Mf * vf - bf).cwiseAbs().maxCoeff()) > 1e-9 * std::max(1.0, bf.cwiseAbs().maxCoeff())) break;
            for (int r = 0; r < k; ++r) v[F[static_cast<std::size_t>(r)]] = vf[r];
        }
        const Eigen::VectorXd mu = M * v - b;
        std::vector<char> next(static_cast<std::size_t>(m));
        bool ok = true;
        for (int j = 0; j < m; ++j) {
            next[static_cast<std::size_t>(j)] = v[j] - mu[j] > 0.0;
            if (v[j] < -tol || mu[j] < -tol) ok = false;
        }
        if (ok) return v.cwiseMax(0.0);
        freev = std::move(next);
    }
    return lawson_hanson(M, b);
}

// Steepest descent on one branch of the reduced objective at a kink. On the
// branch where biactive nodes in `hold` stay in contact and the others
// separate, J'(u; h) = (G, h) for the branch gradient G, restricted to the
// polyhedral cone {delta_k(h) >= 0 on released nodes, reaction_k(h) >= 0 on
// held nodes}. Returns the projection of -G onto that cone.
inline GridFn branch_direction(const ObjectiveSpec& spec, const ObstacleSolution& sol, const GridFn& u, const std::vector<char>& hold) {
    const Grid& g = u.grid();
    const auto n = static_cast<std::size_t>(g.size());
    const Vector& w = g.weights();
    const SparseMatrix& K = g.stiffness();
    // Solves K z = W f off the pinned nodes with z = 0 on them; factored once.
    std::vector<int> map(n, -1);
    std::vector<int> bi;
    int free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pinned = sol.classes[i] == NodeClass::strictly_active || (sol.classes[i] == NodeClass::biactive && hold[i]);
        if (!pinned) map[i] = free_count++;
        if (sol.classes[i] == NodeClass::biactive) bi.push_back(static_cast<int>(i));
    }
    std::vector<Eigen::Triplet<double>> t;
    for (int k = 0; k < K.outerSize(); ++k)
        for (SparseMatrix::InnerIterator e(K, k); e; ++e)
            if (map[static_cast<std::size_t>(e.row())] >= 0 && map[static_cast<std::size_t>(e.col())] >= 0)
                t.emplace_back(map[static_cast<std::size_t>(e.row())], map[static_cast<std::size_t>(e.col())], e.value());
    SparseMatrix R(free_count, free_count);
    R.setFromTriplets(t.begin(), t.end());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt;
    if (free_count > 0) {
        ldlt.compute(R);
        if (ldlt.info() != Eigen::Success) throw SolverError(SolverError::Kind::non_convergence, "branch system factorization failed");
    }
    auto solve_pinned = [&](const Vector& load) {
        GridFn z(g);
        if (free_count == 0) return z;
        Vector rhs(free_count);
        for (std::size_t i = 0; i < n; ++i)
            if (map[i] >= 0) rhs[map[i]] = w[static_cast<Eigen::Index>(i)] * load[static_cast<Eigen::Index>(i)];
        const Vector sol_free = ldlt.solve(rhs);
        for (std::size_t i = 0; i < n; ++i)
            if (map[i] >= 0) z[static_cast<int>(i)] = sol_free[map[i]];
        return z;
    };
    const GridFn G = spec.alpha * u + solve_pinned(spec.j_prime(sol.y).values());
    if (bi.empty()) return -1.0 * G;

    // W-representers c_k of the cone constraints <c_k, h> >= 0.
    std::vector<GridFn> reps;
    for (int k : bi) {
        Vector rhs = Vector::Zero(g.size());
        if (!hold[static_cast<std::size_t>(k)]) {
            // delta_k(h) = (M^{-1} W h)_k with M the free-node stiffness.
            rhs[k] = 1.0;
        } else {
            // reaction_k(h) = (K delta)_k / w_k - h_k.
            for (SparseMatrix::InnerIterator e(K, k); e; ++e) rhs[e.row()] = e.value() / w[k];
        }
        GridFn c = solve_pinned(rhs.cwiseQuotient(w));
        if (hold[static_cast<std::size_t>(k)]) c[k] = -1.0 / w[k];
        reps.push_back(std::move(c));
    }
    const auto m = static_cast<int>(reps.size());
    Eigen::MatrixXd C(g.size(), m);
    for (int r = 0; r < m; ++r) C.col(r) = reps[static_cast<std::size_t>(r)].values();
    const Eigen::MatrixXd WC = w.asDiagonal() * C;
    const Eigen::MatrixXd M = C.transpose() * WC;
    const Eigen::VectorXd b = WC.transpose() * G.values();
    const Eigen::VectorXd nu = nonnegative_qp(M, b);
    return GridFn(g, C * nu - G.values());
}

// Projection of v onto the tangent cone of the bounds at u.
inline GridFn tangent_projection(const GridFn& u, const ControlBounds& b, GridFn v) {
    for (int i = 0; i < u.size(); ++i) {
        if (u[i] == b.lower[i]) v[i] = std::max(v[i], 0.0);
        if (u[i] == b.upper[i]) v[i] = std::min(v[i], 0.0);
    }
    return v;
}

inline std::optional<GridFn> normalized(GridFn v) {
    const double s = norm_l2(v);
    if (!(s > 0.0) || !std::isfinite(s)) return std::nullopt;
    return (1.0 / s) * std::move(v);
}

struct SampledGap {
    double gap = 0.0;
    std::optional<GridFn> direction;  // minimizing unit direction
};

// Minimum first-order value over unit tangent directions: the given descent
// candidates, cone-projected coordinate directions at biactive nodes and
// random tangent directions.
inline SampledGap sampled_gap(const ObjectiveSpec& spec, const ObstacleSolution& sol, const GridFn& u, const ControlBounds& b,
                              const std::vector<GridFn>& candidates, const GeneralOptions& opt, std::mt19937_64& rng) {
    const Grid& g = u.grid();
    std::vector<GridFn> dirs;
    for (const GridFn& c : candidates)
        if (auto d = normalized(c)) dirs.push_back(*d);
    std::vector<int> bi;
    for (int i = 0; i < g.size(); ++i)
        if (sol.biactive(i)) bi.push_back(i);
    if (static_cast<int>(bi.size()) > opt.biactive_directions) {
        std::shuffle(bi.begin(), bi.end(), rng);
        bi.resize(static_cast<std::size_t>(opt.biactive_directions));
    }
    for (int i : bi) {
        for (double s : {-1.0, 1.0}) {
            GridFn e(g);
            e[i] = s;
            if (auto d = normalized(tangent_projection(u, b, std::move(e)))) dirs.push_back(*d);
        }
    }
    std::normal_distribution<double> nd;
    for (int k = 0; k < opt.direction_samples; ++k) {
        GridFn r(g);
        for (int i = 0; i < g.size(); ++i) r[i] = nd(rng);
        if (auto d = normalized(tangent_projection(u, b, std::move(r)))) dirs.push_back(*d);
    }
    SampledGap out;
    if (dirs.empty()) return out;
    std::vector<double> vals(dirs.size());
    parallel_for(static_cast<int>(dirs.size()),
                 [&](int k) { vals[static_cast<std::size_t>(k)] = first_order_value(spec, sol, u, dirs[static_cast<std::size_t>(k)]); });
    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    out.gap = vals[best];
    out.direction = dirs[best];
    return out;
}

struct DescentState {
    GridFn u;
    ObstacleSolution sol;
    double J;
};

inline DescentState evaluate(const ObjectiveSpec& spec, const Obstacle& psi, GridFn u) {
    ObstacleSolution sol = solve_obstacle(u, psi);
    const double J = objective(spec, sol.y, u);
    return {std::move(u), std::move(sol), J};
}

// Armijo backtracking along the projected arc u(s) = P(u + s v). The
// predicted decrease is the exact directional derivative toward u(s), so the
// test stays honest at kinks of the reduced objective.
inline std::optional<std::pair<DescentState, double>> armijo(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& b,
                                                             const DescentState& cur, const GridFn& v, const GeneralOptions& opt,
                                                             double first) {
    for (double s = first; s >= opt.min_step; s *= opt.backtrack) {
        GridFn trial = b.project(cur.u + s * v);
        const double pred = first_order_value(spec, cur.sol, cur.u, trial - cur.u);
        if (!(pred < 0.0)) continue;
        DescentState next = evaluate(spec, psi, std::move(trial));
        if (next.J <= cur.J + opt.sigma * pred) return std::make_pair(std::move(next), s);
    }
    return std::nullopt;
}

}  // namespace detail

/// Projected descent for the reduced objective J(S(u), u). Each step tries
/// the negative gradients of the two branches at biactive nodes (contact
/// released or kept) and, if neither descends, the steepest sampled tangent
/// direction. Stops once the sampled Bouligand gap is >= -tol; with escape
/// enabled it then probes controls that push the state onto the obstacle near
/// its closest approach before accepting the point. Line-search failure ends
/// the run without throwing; the status field reports it.
inline OptimizerResult solve_general(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& bounds, const GridFn& u0,
                                     const GeneralOptions& opt = {});

namespace detail {

// Zeroes the positive part of u in balls around the node where the state is
// closest to the obstacle; each probe is then polished by a short descent run.
inline std::optional<OptimizerResult> escape_probe(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& b,
                                                   const DescentState& cur, const GeneralOptions& opt) {
    const Grid& g = cur.u.grid();
    int centre = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.size(); ++i) {
        const double gap = cur.sol.y[i] - psi.values[i];
        if (gap < best_gap) {
            best_gap = gap;
            centre = i;
        }
    }
    const Point c = g.node(centre);
    GeneralOptions inner = opt;
    inner.escape = false;
    inner.max_iterations = 200;
    std::optional<OptimizerResult> best;
    for (double radius : {0.4, 0.2, 0.1, 0.05, 0.025}) {
        GridFn probe = cur.u;
        bool changed = false;
        for (int i = 0; i < g.size(); ++i) {
            const Point& p = g.node(i);
            if (std::hypot(p.x - c.x, p.y - c.y) <= radius && probe[i] > 0.0) {
                probe[i] = 0.0;
                changed = true;
            }
        }
        if (!changed) continue;
        OptimizerResult r = solve_general(spec, psi, b, b.project(std::move(probe)), inner);
        if (r.objective < cur.J - opt.tol * std::max(1.0, std::abs(cur.J)) && (!best || r.objective < best->objective)) best = std::move(r);
    }
    return best;
}

// Contact Newton candidate: guesses a contact set (current contact plus
// nodes with gap below each threshold), minimizes the objective over states
// pinned to the obstacle there with u = -Delta_h y, adding nodes the result
// pushes below the obstacle. Where that state stays above the obstacle it is
// S(u) exactly, with zero multiplier. Returns the best trial that lowers J.
inline std::optional<DescentState> contact_newton(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& b,
                                                  const DescentState& cur) {
    const int n = cur.u.size();
    const StateConstrainedQp qp(spec, psi, b);
    const GridFn gap = cur.sol.y - psi.values;
    const double scale = std::max(norm_linf(gap), 1e-300);
    std::optional<DescentState> best;
    std::set<std::vector<char>> tried;
    for (double rel : {0.0, 1e-4, 1e-3, 1e-2, 1e-1}) {
        QpActiveSets act(n);
        for (int i = 0; i < n; ++i) {
            act.state[static_cast<std::size_t>(i)] = cur.sol.active(i) || gap[i] <= rel * scale;
            act.lower[static_cast<std::size_t>(i)] = cur.u[i] == b.lower[i];
            act.upper[static_cast<std::size_t>(i)] = cur.u[i] == b.upper[i];
        }
        std::optional<QpPoint> p;
        for (int round = 0; round < 8; ++round) {
            if (!tried.insert(act.key()).second) break;
            p = qp.solve(act);
            if (!p) break;
            bool grew = false;
            for (int i = 0; i < n; ++i) {
                if (!act.state[static_cast<std::size_t>(i)] && p->y[i] < psi.values[i]) {
                    act.state[static_cast<std::size_t>(i)] = 1;
                    grew = true;
                }
            }
            if (!grew) break;
            p.reset();
        }
        if (!p) continue;
        DescentState trial = evaluate(spec, psi, b.project(p->u));
        if (trial.J < cur.J && (!best || trial.J < best->J)) best = std::move(trial);
    }
    return best;
}

}  // namespace detail

inline OptimizerResult solve_general(const ObjectiveSpec& spec, const Obstacle& psi, const ControlBounds& bounds, const GridFn& u0,
                                     const GeneralOptions& opt) {
    spec.validate();
    bounds.validate();
    require_same_grid(u0, psi.values);
    require_same_grid(u0, spec.g);
    if (bounds.lower.size() != u0.size()) throw DomainError("control bounds: size mismatch");
    if (!bounds.admissible(u0)) throw DomainError("initial control violates the control bounds");

    std::mt19937_64 rng(opt.seed);
    detail::DescentState cur = detail::evaluate(spec, psi, u0);
    OptimizerResult res{GridFn(u0.grid()), GridFn(u0.grid())};
    res.method = "general";
    res.status = "iteration_cap";
    res.trace.push_back({0, cur.J, 0.0, 0.0, "start"});

    // Descent candidates: the gradient with biactive nodes released and, at a
    // kink of the model, the steepest directions of the all-released and
    // all-held branches plus that of the branch the better of the two
    // actually lands on.
    auto candidates = [&](const detail::DescentState& st, const ObstacleSolution& model) {
        const auto n = static_cast<std::size_t>(st.u.size());
        std::vector<GridFn> out;
        out.push_back(detail::tangent_projection(st.u, bounds, -1.0 * (spec.alpha * st.u + detail::adjoint_surrogate(spec, st.sol))));
        std::vector<char> all(n, 0);
        bool kink = false;
        for (int i = 0; i < st.u.size(); ++i)
            if (model.biactive(i)) all[static_cast<std::size_t>(i)] = 1, kink = true;
        if (!kink) return out;
        const GridFn jp = spec.j_prime(model.y);
        std::set<std::vector<char>> seen;
        double best = std::numeric_limits<double>::infinity();
        std::vector<char> next_hold;
        for (const std::vector<char>& hold : {std::vector<char>(n, 0), all}) {
            seen.insert(hold);
            GridFn h = detail::tangent_projection(st.u, bounds, detail::branch_direction(spec, model, st.u, hold));
            const GridFn delta = directional_derivative(model, h);
            const double hh = inner(h, h);
            const double fo = hh > 0.0 ? (inner(jp, delta) + spec.alpha * inner(st.u, h)) / std::sqrt(hh) : 0.0;
            if (fo < best) {
                best = fo;
                next_hold.assign(n, 0);
                for (int i = 0; i < st.u.size(); ++i)
                    if (all[static_cast<std::size_t>(i)]) next_hold[static_cast<std::size_t>(i)] = delta[i] <= 0.0;
            }
            out.push_back(std::move(h));
        }
        if (!next_hold.empty() && seen.insert(next_hold).second)
            out.push_back(detail::tangent_projection(st.u, bounds, detail::branch_direction(spec, model, st.u, next_hold)));
        return out;
    };

    // First trial step: doubled after a step accepted at its first trial,
    // otherwise the last accepted step, so the search adapts to the scale of
    // the reduced Hessian.
    double first = opt.initial_step;
    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        std::vector<GridFn> dirs = candidates(cur, cur.sol);
        // First-order value of each unit candidate, best first.
        std::vector<std::pair<double, std::size_t>> order;
        for (std::size_t k = 0; k < dirs.size(); ++k)
            if (auto d = detail::normalized(dirs[k])) order.emplace_back(first_order_value(spec, cur.sol, cur.u, *d), k);
        const double along = order.empty() ? 0.0 : std::min(0.0, std::min_element(order.begin(), order.end())->first);
        std::sort(order.begin(), order.end());

        std::optional<detail::SampledGap> sampled;
        if (along >= -opt.tol) {
            sampled = detail::sampled_gap(spec, cur.sol, cur.u, bounds, dirs, opt, rng);
            res.bouligand_gap = sampled->gap;
            if (sampled->gap >= -opt.tol) {
                if (opt.escape) {
                    if (auto esc = detail::escape_probe(spec, psi, bounds, cur, opt)) {
                        ++res.escapes;
                        cur = detail::evaluate(spec, psi, esc->u);
                        res.trace.push_back({it, cur.J, 0.0, esc->bouligand_gap, "escape"});
                        continue;
                    }
                }
                res.status = "converged";
                break;
            }
        }

        std::optional<std::pair<detail::DescentState, double>> step;
        std::string kind;
        // A contact Newton step is taken whenever it lowers the objective; the
        // first-order steps below keep the iteration honest at kinks.
        if (auto newton = opt.contact_newton ? detail::contact_newton(spec, psi, bounds, cur) : std::nullopt) {
            step = std::make_pair(std::move(*newton), 1.0);
            kind = "contact_newton";
        }
        for (const auto& [value, k] : order) {
            if (step || !(value < 0.0)) break;
            step = detail::armijo(spec, psi, bounds, cur, dirs[k], opt, first);
            if (step) {
                kind = k == 0 ? "gradient" : "branch";
                break;
            }
        }
        if (!step) {
            // Neither branch descends; the steepest sampled direction has a
            // negative exact directional derivative if any does.
            if (!sampled) sampled = detail::sampled_gap(spec, cur.sol, cur.u, bounds, candidates(cur, cur.sol), opt, rng);
            if (sampled->direction && sampled->gap < 0.0) {
                step = detail::armijo(spec, psi, bounds, cur, *sampled->direction, opt, first);
                kind = "sampled";
            }
        }
        if (!step) {
            res.status = "line_search_failure";
            break;
        }
        if (kind != "contact_newton") first = step->second == first ? std::min(2 * first, 1e6 * opt.initial_step) : step->second;
        cur = std::move(step->first);
        res.trace.push_back({it, cur.J, step->second, along, kind});
    }
    if (res.status != "converged")
        res.bouligand_gap = detail::sampled_gap(spec, cur.sol, cur.u, bounds, candidates(cur, cur.sol), opt, rng).gap;
    res.u = cur.u;
    res.y = cur.sol.y;
    res.objective = cur.J;
    return res;
}

}  // namespace obstacle
