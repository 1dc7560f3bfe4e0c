#pragma once

// Three strongly stationary controls that are not local minimizers, with their
// closed forms and the numerical experiments showing the descent.
//
//   strict_activity:  obstacle touched everywhere, objective driven by a
//                     singular density x^-gamma (parameters r, gamma).
//   inactive_adjoint: state never touches the obstacle, adjoint negative
//                     near the boundary point x = 0 (parameter c).
//   point_contact:    radial problem on the unit disc, contact at the single
//                     point r = 0 (parameter c).

#include "obstacle/stationarity.hpp"
#include "obstacle/vi_solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace obstacle {

enum class CounterexampleId { strict_activity = 1, inactive_adjoint = 2, point_contact = 3 };

struct CounterexampleParams {
    double r = 2.0;
    double gamma = 0.25;
    double c = 1.0 / 16;
    /// Tikhonov weight; only the strict-activity example is free to choose it.
    std::optional<double> alpha;
};

/// Default grid sizes used by the experiments.
inline int default_resolution(CounterexampleId id) { return id == CounterexampleId::strict_activity ? 4095 : 2047; }

struct CounterexampleScenario {
    CounterexampleId id;
    CounterexampleParams params;
    double alpha = 1.0;
    Grid grid;
    Obstacle psi;
    ObjectiveSpec spec;
    GridFn u_bar;
    Field y_bar_exact;
    Field p_bar_exact;
    Field lambda_bar_exact;

    /// Nodal descent control u_t.
    GridFn control(double t) const {
        const double r = params.r;
        const double c = params.c;
        switch (id) {
        case CounterexampleId::strict_activity:
            return GridFn::sample(grid, [=](const Point& p) { return p.x < t ? std::pow(t, r) + std::pow(p.x, r) : 0.0; });
        case CounterexampleId::inactive_adjoint: {
            const double shift = 2 * c * (t * t - 2 * t) / ((1 - t) * (1 - t));
            return GridFn::sample(grid, [=](const Point& p) { return p.x < t ? 0.0 : p.x * (1 - p.x) + shift; });
        }
        case CounterexampleId::point_contact:
            return GridFn::sample(grid, [=](const Point& p) { return p.x < t ? 0.0 : 1 - p.x * p.x; });
        }
        return GridFn(grid);
    }

    /// Closed-form state S(u_t) where one is known (inactive_adjoint only).
    std::optional<GridFn> state_closed_form(double t) const {
        if (id != CounterexampleId::inactive_adjoint) return std::nullopt;
        const double c = params.c;
        const double a = (t * t - 2 * t) / ((1 - t) * (1 - t));
        const double b = t * t / ((1 - t) * (1 - t));
        return GridFn::sample(grid, [=, this](const Point& p) {
            const double x = p.x;
            const double yb = y_bar_exact(p);
            return x < t ? yb - c * x * x : yb + c * (1 - x) * (a * x + b);
        });
    }

    /// Lower barrier for S(u_t) on (0, t) in the strict-activity example.
    GridFn barrier(double t) const {
        const double r = params.r;
        return GridFn::sample(grid, [=, this](const Point& p) {
            const double psi_x = y_bar_exact(p);
            return p.x < t ? psi_x + 0.5 * std::pow(t, r) * (t * p.x - p.x * p.x) : psi_x;
        });
    }

    /// Exact value of the gap (inactive_adjoint), an upper bound for it
    /// (point_contact, strict_activity).
    double gap_closed_form(double t) const {
        const double c = params.c;
        switch (id) {
        case CounterexampleId::strict_activity: {
            const double r = params.r;
            const double gm = params.gamma;
            const double gain = std::pow(t, r + 3 - gm) / (2 * (2 - gm) * (3 - gm));
            return -gain + 0.5 * alpha * control_norm_sq(t);
        }
        case CounterexampleId::inactive_adjoint: {
            const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
            const double head = -0.5 * (t5 / 5 - t4 / 2 + t3 / 3) - 2 * c * (t2 / 2 - t3 / 3);
            const double s = t2 - 2 * t;
            return head + 2 * c * c * s * s / std::pow(1 - t, 3);
        }
        case CounterexampleId::point_contact: {
            const double t2 = t * t;
            return std::numbers::pi * (4 * c * t2 - t2 / 2 + t2 * t2 / 2 - t2 * t2 * t2 / 6);
        }
        }
        return 0.0;
    }

    /// ||u_t||^2 in the continuum (strict_activity).
    double control_norm_sq(double t) const {
        const double r = params.r;
        return (1 + 2 / (r + 1) + 1 / (2 * r + 1)) * std::pow(t, 2 * r + 1);
    }

    StationarityBundle bundle() const { return assemble_bundle(spec, u_bar, psi, ControlBounds::unbounded(grid)); }
};

inline std::string to_string(CounterexampleId id) {
    switch (id) {
    case CounterexampleId::strict_activity: return "strict_activity";
    case CounterexampleId::inactive_adjoint: return "inactive_adjoint";
    case CounterexampleId::point_contact: return "point_contact";
    }
    return "?";
}

/// Builds a scenario on the default grid family for `id` with n unknowns per
/// axis. Throws DomainError for parameters outside the admissible range.
inline CounterexampleScenario build_counterexample(CounterexampleId id, const CounterexampleParams& prm, int n) {
    if (n < 3) throw DomainError("counterexample grids need n >= 3");
    const double c = prm.c;
    if (id == CounterexampleId::strict_activity) {
        const double r = prm.r;
        const double gm = prm.gamma;
        if (!(r > 1.5)) throw DomainError("strict-activity example needs r > 3/2");
        if (!(gm > 2 - r && gm < 0.5)) throw DomainError("strict-activity example needs gamma in (2 - r, 1/2)");
        const double alpha = prm.alpha.value_or(0.1);
        if (!(alpha > 0)) throw DomainError("alpha must be positive");
        const double k = (r + 2) * (r + 1);
        Field yb = [=](const Point& p) { return (p.x - std::pow(p.x, r + 2)) / k; };
        Grid g = Grid::interval(n);
        GridFn dens = GridFn::sample(g, [=](const Point& p) { return -std::pow(p.x, -gm); });
        return {id,
                prm,
                alpha,
                g,
                Obstacle::from_field(g, yb),
                ObjectiveSpec::linear(dens, alpha),
                GridFn(g),
                yb,
                [](const Point&) { return 0.0; },
                [=](const Point& p) { return std::pow(p.x, r); }};
    }
    if (!(c > 0 && c < 0.125)) throw DomainError("parameter c must lie in (0, 1/8)");
    if (prm.alpha && *prm.alpha != 1.0) throw DomainError("this example is built for alpha = 1");
    const bool radial = id == CounterexampleId::point_contact;
    Grid g = radial ? Grid::radial(n) : Grid::interval(n);
    Field yb, pb;
    if (radial) {
        yb = [](const Point& p) {
            const double r2 = p.x * p.x;
            return r2 * r2 / 16 - r2 / 4 + 3.0 / 16;
        };
        pb = [](const Point& p) { return p.x * p.x - 1; };
    } else {
        yb = [](const Point& p) {
            const double x = p.x;
            return x * x * x * x / 12 - x * x * x / 6 + x / 12;
        };
        pb = [](const Point& p) { return -p.x * (1 - p.x); };
    }
    return {id,
            prm,
            1.0,
            g,
            Obstacle::from_field(g, [=](const Point& p) { return yb(p) - c * p.x * p.x; }),
            ObjectiveSpec::linear(GridFn::constant(g, radial ? -4.0 : -2.0), 1.0),
            GridFn::sample(g, [=](const Point& p) { return -pb(p); }),
            yb,
            pb,
            [](const Point&) { return 0.0; }};
}

/// (numeric, closed form) of J(S(u_t), u_t) - J(S(u_bar), u_bar).
inline std::pair<double, double> counterexample_gap(const CounterexampleScenario& s, double t) {
    if (!(t > 0 && t <= 0.5)) throw DomainError("t must lie in (0, 1/2]");
    const GridFn ut = s.control(t);
    const ObstacleSolution st = solve_obstacle(ut, s.psi);
    const ObstacleSolution sb = solve_obstacle(s.u_bar, s.psi);
    const double numeric = objective(s.spec, st.y, ut) - objective(s.spec, sb.y, s.u_bar);
    return {numeric, s.gap_closed_form(t)};
}

struct GapRow {
    double t = 0.0;
    double control_dist = 0.0;
    double gap_numeric = 0.0;
    double gap_closed_form = 0.0;
    double ratio_gap_over_t2 = 0.0;
};

struct NonoptimalityReport {
    StationarityResiduals residuals;
    std::vector<GapRow> rows;
    bool confirmed = false;
};

/// Evaluates the gap along t_grid. Confirmed iff ||u_t - u_bar|| shrinks as t
/// decreases along the grid and some t gives gap < -10 tol_stat.
inline NonoptimalityReport verify_nonoptimality(const CounterexampleScenario& s, std::vector<double> t_grid) {
    std::sort(t_grid.begin(), t_grid.end());
    NonoptimalityReport rep;
    rep.residuals = check_strong_stationarity(s.bundle());
    bool descent = false;
    bool shrinking = true;
    for (double t : t_grid) {
        auto [num, closed] = counterexample_gap(s, t);
        GapRow row{t, norm_l2(s.control(t) - s.u_bar), num, closed, num / (t * t)};
        if (!rep.rows.empty() && !(row.control_dist > rep.rows.back().control_dist)) shrinking = false;
        if (num < -10 * tol_stat) descent = true;
        rep.rows.push_back(row);
    }
    rep.confirmed = descent && shrinking && !t_grid.empty();
    return rep;
}

/// t^2 coefficient of the gap: least-squares fit of gap / t^2 = a + b t over
/// the `count` smallest t of the report, returning a.
inline double fitted_gap_coefficient(const NonoptimalityReport& rep, std::size_t count = 3) {
    std::vector<GapRow> rows = rep.rows;
    std::sort(rows.begin(), rows.end(), [](const GapRow& a, const GapRow& b) { return a.t < b.t; });
    rows.resize(std::min(count, rows.size()));
    if (rows.size() < 2) throw DomainError("fitting the gap coefficient needs at least two t values");
    Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), 2);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        A(i, 0) = 1.0;
        A(i, 1) = rows[k].t;
        b[i] = rows[k].ratio_gap_over_t2;
    }
    return A.colPivHouseholderQr().solve(b)[0];
}

/// Whether y_t stays above the barrier on (0, t) (up to tol) and
/// ||y_t - y_bar||^2 >= 0.95 t^(2r+5) / 120, for a given state y_t.
inline bool ce1_lower_bound_check(const CounterexampleScenario& s, double t, const GridFn& y_t, double tol = 1e-10) {
    if (s.id != CounterexampleId::strict_activity) throw DomainError("lower barrier exists for the strict-activity example only");
    const GridFn bar = s.barrier(t);
    for (int i = 0; i < y_t.size(); ++i)
        if (s.grid.node(i).x < t && y_t[i] < bar[i] - tol) return false;
    const GridFn d = y_t - GridFn::sample(s.grid, s.y_bar_exact);
    return inner(d, d) >= 0.95 * std::pow(t, 2 * s.params.r + 5) / 120;
}

inline bool ce1_lower_bound_check(const CounterexampleScenario& s, double t) {
    return ce1_lower_bound_check(s, t, solve_obstacle(s.control(t), s.psi).y);
}

}  // namespace obstacle
