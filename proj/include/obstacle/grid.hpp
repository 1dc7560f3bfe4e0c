#pragma once

// Uniform finite-difference grids on (0,1), (0,1)^2 and the unit disc (radial
// reduction), together with the discrete Laplacian, lumped-mass inner
// products, Poisson solves and the discrete Poincare constant.
//
// Every grid stores the discrete operator in the symmetric form
//
//     -Delta_h = W^{-1} K,
//
// where K is the (symmetric positive definite) stiffness matrix and W is the
// diagonal lumped mass. Inner products are (f, g) = sum_i W_ii f_i g_i, so
// -Delta_h is self-adjoint with respect to them on every grid kind.

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace obstacle {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum class GridKind { interval1d, square2d, radial_disc };

inline std::string to_string(GridKind kind) {
    switch (kind) {
    case GridKind::interval1d: return "interval1d";
    case GridKind::square2d: return "square2d";
    case GridKind::radial_disc: return "radial_disc";
    }
    return "unknown";
}

inline GridKind grid_kind_from_string(const std::string& s) {
    if (s == "interval1d" || s == "interval") return GridKind::interval1d;
    if (s == "square2d" || s == "square") return GridKind::square2d;
    if (s == "radial_disc" || s == "radial") return GridKind::radial_disc;
    throw std::invalid_argument("unknown grid kind '" + s + "'");
}

/// A node location. Interval grids use x only; radial grids use x = r.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Scalar field used to sample data at interior and boundary nodes.
using Field = std::function<double(const Point&)>;

namespace detail {

struct GridData {
    GridKind kind;
    int n;
    double h;
    std::vector<Point> nodes;
    Vector weights;
    SparseMatrix stiffness;
    // Boundary neighbours of interior nodes: (interior index, coupling k_ib, point).
    struct BoundaryLink {
        int node;
        double coupling;
        Point where;
    };
    std::vector<BoundaryLink> boundary_links;

    mutable std::once_flag factor_once;
    mutable std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> factor;
};

inline void build_interval(GridData& g) {
    const int n = g.n;
    const double h = g.h;
    g.nodes.resize(n);
    g.weights = Vector::Constant(n, h);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(3 * n);
    for (int i = 0; i < n; ++i) {
        g.nodes[i] = {(i + 1) * h, 0.0};
        t.emplace_back(i, i, 2.0 / h);
        if (i > 0) t.emplace_back(i, i - 1, -1.0 / h);
        if (i + 1 < n) t.emplace_back(i, i + 1, -1.0 / h);
    }
    g.boundary_links.push_back({0, -1.0 / h, {0.0, 0.0}});
    g.boundary_links.push_back({n - 1, -1.0 / h, {1.0, 0.0}});
    g.stiffness.resize(n, n);
    g.stiffness.setFromTriplets(t.begin(), t.end());
}

inline void build_square(GridData& g) {
    const int n = g.n;
    const double h = g.h;
    const int N = n * n;
    g.nodes.resize(N);
    g.weights = Vector::Constant(N, h * h);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(5 * N);
    auto idx = [n](int i, int j) { return j * n + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int k = idx(i, j);
            g.nodes[k] = {(i + 1) * h, (j + 1) * h};
            t.emplace_back(k, k, 4.0);
            const std::array<std::array<int, 2>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
            for (const auto& [a, b] : nb) {
                if (a < 0 || a >= n || b < 0 || b >= n) {
                    g.boundary_links.push_back({k, -1.0, {(a + 1) * h, (b + 1) * h}});
                } else {
                    t.emplace_back(k, idx(a, b), -1.0);
                }
            }
        }
    }
    g.stiffness.resize(N, N);
    g.stiffness.setFromTriplets(t.begin(), t.end());
}

// Radial nodes r_i = i h for i = 0..n; r = 1 is the (Dirichlet) boundary.
// Control volumes are annuli [r_{i-1/2}, r_{i+1/2}] (a disc of radius h/2 at
// the origin); the flux through r_{i+1/2} is 2 pi r_{i+1/2} (f_{i+1} - f_i)/h.
inline void build_radial(GridData& g) {
    const int n = g.n;
    const double h = g.h;
    const int N = n + 1;
    const double pi = std::numbers::pi;
    g.nodes.resize(N);
    g.weights.resize(N);
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(3 * N);
    for (int i = 0; i < N; ++i) {
        const double r = i * h;
        g.nodes[i] = {r, 0.0};
        g.weights[i] = (i == 0) ? pi * (h / 2) * (h / 2) : 2.0 * pi * r * h;
        const double right = 2.0 * pi * (r + h / 2) / h;
        const double left = (i == 0) ? 0.0 : 2.0 * pi * (r - h / 2) / h;
        t.emplace_back(i, i, left + right);
        if (i > 0) t.emplace_back(i, i - 1, -left);
        if (i + 1 < N) {
            t.emplace_back(i, i + 1, -right);
        } else {
            g.boundary_links.push_back({i, -right, {1.0, 0.0}});
        }
    }
    g.stiffness.resize(N, N);
    g.stiffness.setFromTriplets(t.begin(), t.end());
}

}  // namespace detail

/// Immutable uniform grid. Copies share the underlying data.
class Grid {
public:
    static Grid interval(int n) { return Grid(GridKind::interval1d, n); }
    static Grid square(int n) { return Grid(GridKind::square2d, n); }
    static Grid radial(int n) { return Grid(GridKind::radial_disc, n); }
    static Grid make(GridKind kind, int n) { return Grid(kind, n); }

    GridKind kind() const { return d_->kind; }
    int n() const { return d_->n; }
    double h() const { return d_->h; }
    /// Number of unknowns (n, n^2, or n+1 for the radial grid with its origin node).
    int size() const { return static_cast<int>(d_->nodes.size()); }
    int dimension() const { return kind() == GridKind::square2d ? 2 : 1; }

    const Point& node(int i) const { return d_->nodes[static_cast<std::size_t>(i)]; }
    const std::vector<Point>& nodes() const { return d_->nodes; }
    const Vector& weights() const { return d_->weights; }
    const SparseMatrix& stiffness() const { return d_->stiffness; }

    /// Solves K y = b with the cached Cholesky factorization of the stiffness.
    Vector solve_stiffness(const Vector& b) const {
        std::call_once(d_->factor_once, [this] {
            auto f = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>(d_->stiffness);
            if (f->info() != Eigen::Success) throw std::logic_error("stiffness factorization failed");
            d_->factor = std::move(f);
        });
        return d_->factor->solve(b);
    }

    /// sum_b k_ib f(x_b) over the boundary neighbours of every interior node.
    Vector boundary_load(const Field& f) const {
        Vector out = Vector::Zero(size());
        for (const auto& link : d_->boundary_links) out[link.node] += link.coupling * f(link.where);
        return out;
    }

    /// Whether a grid with mesh width 2h exists (used for nested warm starts).
    bool coarsenable() const { return n() % 2 == 1 && n() >= 7; }
    Grid coarse() const {
        if (!coarsenable()) throw std::logic_error("grid cannot be coarsened");
        return Grid(kind(), kind() == GridKind::radial_disc ? (n() + 1) / 2 - 1 : (n() - 1) / 2);
    }

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.d_ == b.d_ || (a.kind() == b.kind() && a.n() == b.n());
    }

private:
    Grid(GridKind kind, int n) {
        if (n < 1) throw std::invalid_argument("grid needs at least one interior node per axis");
        auto d = std::make_shared<detail::GridData>();
        d->kind = kind;
        d->n = n;
        d->h = 1.0 / (n + 1);
        switch (kind) {
        case GridKind::interval1d: detail::build_interval(*d); break;
        case GridKind::square2d: detail::build_square(*d); break;
        case GridKind::radial_disc: detail::build_radial(*d); break;
        }
        d_ = std::move(d);
    }

    std::shared_ptr<const detail::GridData> d_;
};

/// Nodal values of a function on the interior nodes of a grid. Boundary values
/// are implicitly zero.
class GridFn {
public:
    explicit GridFn(Grid grid) : grid_(std::move(grid)), v_(Vector::Zero(grid_.size())) {}
    GridFn(Grid grid, Vector values) : grid_(std::move(grid)), v_(std::move(values)) {
        if (v_.size() != grid_.size()) throw std::invalid_argument("GridFn: value count does not match grid");
    }

    static GridFn constant(const Grid& grid, double c) { return GridFn(grid, Vector::Constant(grid.size(), c)); }
    static GridFn sample(const Grid& grid, const Field& f) {
        Vector v(grid.size());
        for (int i = 0; i < grid.size(); ++i) v[i] = f(grid.node(i));
        return GridFn(grid, std::move(v));
    }

    const Grid& grid() const { return grid_; }
    const Vector& values() const { return v_; }
    Vector& values() { return v_; }
    int size() const { return static_cast<int>(v_.size()); }
    double operator[](int i) const { return v_[i]; }
    double& operator[](int i) { return v_[i]; }

    GridFn& operator+=(const GridFn& o) { check(o); v_ += o.v_; return *this; }
    GridFn& operator-=(const GridFn& o) { check(o); v_ -= o.v_; return *this; }
    GridFn& operator*=(double s) { v_ *= s; return *this; }

    friend GridFn operator+(GridFn a, const GridFn& b) { return a += b; }
    friend GridFn operator-(GridFn a, const GridFn& b) { return a -= b; }
    friend GridFn operator*(double s, GridFn a) { return a *= s; }
    friend GridFn operator*(GridFn a, double s) { return a *= s; }
    friend GridFn operator-(GridFn a) { a.v_ = -a.v_; return a; }

    void check(const GridFn& o) const {
        if (!(grid_ == o.grid_)) throw std::invalid_argument("grid mismatch");
    }

private:
    Grid grid_;
    Vector v_;
};

inline void require_same_grid(const GridFn& a, const GridFn& b) { a.check(b); }

/// Nodewise product.
inline GridFn hadamard(const GridFn& a, const GridFn& b) {
    require_same_grid(a, b);
    return GridFn(a.grid(), a.values().cwiseProduct(b.values()));
}

/// Delta_h f with zero boundary values.
inline GridFn laplacian(const GridFn& f) {
    const Grid& g = f.grid();
    Vector kf = g.stiffness() * f.values();
    return GridFn(g, -kf.cwiseQuotient(g.weights()));
}

/// Delta_h f where the boundary nodes carry the values of `boundary`.
inline GridFn laplacian(const GridFn& f, const Field& boundary) {
    const Grid& g = f.grid();
    Vector kf = g.stiffness() * f.values() + g.boundary_load(boundary);
    return GridFn(g, -kf.cwiseQuotient(g.weights()));
}

/// y with -Delta_h y = u and y = 0 on the boundary.
inline GridFn poisson_solve(const GridFn& u) {
    const Grid& g = u.grid();
    return GridFn(g, g.solve_stiffness(g.weights().cwiseProduct(u.values())));
}

inline double inner(const GridFn& f, const GridFn& g) {
    require_same_grid(f, g);
    return (f.grid().weights().array() * f.values().array() * g.values().array()).sum();
}

inline double norm_l2(const GridFn& f) { return std::sqrt(inner(f, f)); }

inline double norm_l1(const GridFn& f) {
    return (f.grid().weights().array() * f.values().array().abs()).sum();
}

inline double norm_linf(const GridFn& f) { return f.size() == 0 ? 0.0 : f.values().cwiseAbs().maxCoeff(); }

inline double integral(const GridFn& f) { return f.grid().weights().dot(f.values()); }

/// Smallest eigenvalue of -Delta_h (generalized problem K v = omega W v) by
/// inverse iteration on the cached factorization.
inline double poincare_constant(const Grid& grid, double rel_tol = 1e-10, int max_iter = 10000) {
    const Vector& w = grid.weights();
    Vector v = Vector::Ones(grid.size());
    double omega = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        v = grid.solve_stiffness(w.cwiseProduct(v));
        v /= std::sqrt(v.dot(w.cwiseProduct(v)));
        const double next = v.dot(grid.stiffness() * v);
        if (it > 0 && std::abs(next - omega) <= rel_tol * std::abs(next)) return next;
        omega = next;
    }
    throw std::runtime_error("poincare_constant: inverse iteration did not converge");
}

}  // namespace obstacle
