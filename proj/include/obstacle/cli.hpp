#pragma once

// Command-line front end: scenario runner and CSV/JSON emitter.
//
// Exit codes: 0 success, 1 invalid arguments or config, 2 solver failure,
// 3 counterexample verdict "not confirmed".
//
// Every subcommand takes --csv PATH and --json PATH; either defaults to
// standard output, and when both go there the CSV comes first, then a blank
// line, then the JSON document.

#include "obstacle/config.hpp"
#include "obstacle/counterexamples.hpp"
#include "obstacle/optimizer.hpp"
#include "obstacle/parallel.hpp"
#include "obstacle/ssc.hpp"
#include "obstacle/structure.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace obstacle::cli {

enum ExitCode { ok = 0, invalid_input = 1, solver_failure = 2, not_confirmed = 3 };

/// Finite numbers as JSON numbers, the rest as "inf", "-inf" or "nan".
inline nlohmann::json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

/// CSV writer with 17 significant digits.
class Csv {
public:
    explicit Csv(std::ostream& os) : os_(os) { os_ << std::setprecision(17); }

    void header(const std::vector<std::string>& cols) { row_of(cols); }

    template <class... T>
    void row(const T&... cells) {
        bool first = true;
        ((os_ << (first ? "" : ",") << cell(cells), first = false), ...);
        os_ << '\n';
    }

private:
    void row_of(const std::vector<std::string>& cols) {
        for (std::size_t k = 0; k < cols.size(); ++k) os_ << (k ? "," : "") << cols[k];
        os_ << '\n';
    }
    static std::string cell(double v) {
        std::ostringstream s;
        s << std::setprecision(17) << v;
        return s.str();
    }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::ostream& os_;
};

/// Destinations of the two output streams of a subcommand.
class Outputs {
public:
    Outputs(std::ostream& out, std::string csv_path, std::string json_path)
        : out_(out), csv_path_(std::move(csv_path)), json_path_(std::move(json_path)) {}

    std::ostream& csv() {
        if (csv_path_.empty()) {
            csv_to_out_ = true;
            return out_;
        }
        csv_file_ = open(csv_path_);
        return *csv_file_;
    }

    void json(const nlohmann::json& doc) {
        if (json_path_.empty()) {
            if (csv_to_out_) out_ << '\n';
            out_ << doc.dump(2) << '\n';
            return;
        }
        auto f = open(json_path_);
        *f << doc.dump(2) << '\n';
    }

private:
    static std::unique_ptr<std::ofstream> open(const std::string& path) {
        auto f = std::make_unique<std::ofstream>(path);
        if (!*f) throw ConfigError("cannot write " + path);
        return f;
    }

    std::ostream& out_;
    std::string csv_path_, json_path_;
    std::unique_ptr<std::ofstream> csv_file_;
    bool csv_to_out_ = false;
};

inline std::string to_string(NodeClass c) {
    switch (c) {
    case NodeClass::inactive: return "inactive";
    case NodeClass::strictly_active: return "strictly_active";
    case NodeClass::biactive: return "biactive";
    }
    return "?";
}

// Coordinate columns of a grid.
inline std::vector<std::string> coordinate_header(const Grid& g) {
    switch (g.kind()) {
    case GridKind::interval1d: return {"x"};
    case GridKind::square2d: return {"x1", "x2"};
    case GridKind::radial_disc: return {"r"};
    }
    return {};
}

inline std::string coordinates(const Grid& g, int i) {
    std::ostringstream s;
    s << std::setprecision(17) << g.node(i).x;
    if (g.kind() == GridKind::square2d) s << ',' << g.node(i).y;
    return s.str();
}

inline void write_solution_csv(std::ostream& os, const GridFn& u, const ObstacleSolution& sol, const Obstacle& psi) {
    Csv csv(os);
    std::vector<std::string> head = coordinate_header(u.grid());
    for (const char* c : {"u", "y", "psi", "lambda", "class"}) head.emplace_back(c);
    csv.header(head);
    for (int i = 0; i < u.size(); ++i)
        csv.row(coordinates(u.grid(), i), u[i], sol.y[i], psi.values[i], sol.lambda[i], to_string(sol.classes[static_cast<std::size_t>(i)]));
}

inline nlohmann::json residuals_json(const StationarityResiduals& r) {
    nlohmann::json j;
    const char* names[] = {"adjoint_equation", "gradient_equation", "adjoint_on_contact", "state_multiplier", "control_multiplier"};
    for (std::size_t k = 0; k < r.r.size(); ++k) j[names[k]] = number(r.r[k]);
    return j;
}

inline nlohmann::json report_json(const SscReport& r) {
    nlohmann::json j{{"theorem", to_string(r.theorem)},
                     {"verdict", to_string(r.verdict)},
                     {"unique_global", r.unique_global},
                     {"mu", number(r.mu)},
                     {"omega", number(r.omega)},
                     {"required_beta", number(r.required_beta)},
                     {"curvature_samples", r.curvature_samples},
                     {"min_curvature", number(r.min_curvature)},
                     {"note", r.note}};
    j["beta"] = r.beta ? number(*r.beta) : nlohmann::json(nullptr);
    j["gamma"] = r.gamma ? number(*r.gamma) : nlohmann::json(nullptr);
    j["delta"] = r.delta ? number(*r.delta) : nlohmann::json(nullptr);
    nlohmann::json res = nlohmann::json::object();
    for (const auto& [k, v] : r.residuals) res[k] = number(v);
    j["residuals"] = res;
    return j;
}

inline nlohmann::json result_json(const OptimizerResult& r) {
    return {{"method", r.method},         {"status", r.status},
            {"objective", number(r.objective)}, {"iterations", r.iterations},
            {"kkt_residual", number(r.kkt_residual)}, {"bouligand_gap", number(r.bouligand_gap)},
            {"escapes", r.escapes}};
}

// The subharmonic solver applies when its preconditions hold.
inline bool subharmonic_applies(const Config& c) {
    return classify_subharmonic(c.psi) && (laplacian(c.psi.values).values().array() >= -tol_act).all();
}

// Random admissible start: smooth random modes, clipped to the bounds.
inline GridFn random_control(const Config& c, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    const double a = normal(rng), b = normal(rng), k = 1 + static_cast<int>(rng() % 4);
    GridFn u = GridFn::sample(c.grid, [=](const Point& p) { return a * std::sin(k * std::numbers::pi * p.x) + b * std::cos(std::numbers::pi * p.y); });
    return c.bounds.project(u);
}

struct SolveSummary {
    double objective = 0.0;
    std::string status;
    int iterations = 0;
    double residual = 0.0;
    int contact_nodes = 0;
    double state_max = 0.0;
};

inline SolveSummary run_task(const Config& c, const std::string& task) {
    SolveSummary s;
    if (task == "solve") {
        const ObstacleSolution sol = solve_obstacle(c.control, c.psi);
        s = {objective(c.spec, sol.y, c.control), "converged", sol.pdas_iterations, sol.kkt_residual, sol.active_count(), norm_linf(sol.y)};
        return s;
    }
    OptimizerResult r = subharmonic_applies(c) ? solve_subharmonic(c.spec, c.psi, c.bounds)
                                               : solve_general(c.spec, c.psi, c.bounds, c.bounds.project(c.control));
    const ObstacleSolution sol = solve_obstacle(r.u, c.psi);
    return {r.objective, r.status, r.iterations, r.method == "subharmonic" ? r.kkt_residual : r.bouligand_gap, sol.active_count(), norm_linf(r.y)};
}

/// Runs the tool on argv (argv[0] is the program name).
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Optimal control of the obstacle problem: solvers, stationarity and SSC certificates, counterexamples"};
    app.require_subcommand(1);
    std::string config_path, csv_path, json_path;
    auto common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config) sub->add_option("--config", config_path, "JSON scenario file")->required();
        sub->add_option("--csv", csv_path, "CSV destination (default: standard output)");
        sub->add_option("--json", json_path, "JSON destination (default: standard output)");
    };
    CLI::App* solve = app.add_subcommand("solve", "Solve the obstacle problem for the configured control; CSV per node");
    common(solve, true);
    CLI::App* stat = app.add_subcommand("stationarity", "Assemble the stationarity system at the configured control; JSON residuals");
    common(stat, true);
    CLI::App* ssc = app.add_subcommand("ssc", "Check a second-order sufficient condition; JSON report");
    common(ssc, true);
    std::string theorem;
    ssc->add_option("--theorem", theorem, "compat-local|compat-global|enhanced-local|enhanced-global|subharmonic")->required();
    CLI::App* opt = app.add_subcommand("optimize", "Minimize the reduced objective; trace CSV and result JSON");
    common(opt, true);
    std::string method = "auto";
    int starts = 1;
    opt->add_option("--method", method, "subharmonic|general|auto")->check(CLI::IsMember({"subharmonic", "general", "auto"}));
    opt->add_option("--starts", starts, "number of starts")->check(CLI::Range(1, 1000));
    CLI::App* ce = app.add_subcommand("counterexample", "Non-optimality experiment; per-t CSV and verdict JSON");
    common(ce, false);
    int ce_id = 0;
    std::optional<double> param, r_param, alpha_param;
    std::optional<int> n_opt;
    double tmin = 0.01, tmax = 0.3;
    int tsteps = 10;
    ce->add_option("id", ce_id, "1 strict activity, 2 inactive adjoint, 3 point contact")->required()->check(CLI::Range(1, 3));
    ce->add_option("--param", param, "c for examples 2 and 3, gamma for example 1");
    ce->add_option("--r", r_param, "exponent r of example 1");
    ce->add_option("--alpha", alpha_param, "Tikhonov weight of example 1");
    ce->add_option("--n", n_opt, "grid size")->check(CLI::Range(3, 1 << 20));
    ce->add_option("--tmin", tmin);
    ce->add_option("--tmax", tmax);
    ce->add_option("--tsteps", tsteps)->check(CLI::Range(1, 10000));
    CLI::App* sweep = app.add_subcommand("sweep", "Parameter sweep from the config's \"sweep\" entry; one CSV");
    common(sweep, true);

    std::vector<std::string> args(argv + 1, argv + argc);
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        return invalid_input;
    }

    try {
        Outputs io(out, csv_path, json_path);
        if (*ce) {
            CounterexampleParams prm;
            const auto id = static_cast<CounterexampleId>(ce_id);
            if (param) (id == CounterexampleId::strict_activity ? prm.gamma : prm.c) = *param;
            if (r_param) prm.r = *r_param;
            prm.alpha = alpha_param;
            if (!(tmin > 0 && tmax <= 0.5 && tmin <= tmax)) throw ConfigError("t range must satisfy 0 < tmin <= tmax <= 1/2");
            if (tsteps == 1 && tmin != tmax) throw ConfigError("--tsteps 1 needs tmin = tmax");
            const int n = n_opt.value_or(default_resolution(id));
            CounterexampleScenario s = [&] {
                try {
                    return build_counterexample(id, prm, n);
                } catch (const DomainError& e) {
                    throw ConfigError(e.what());
                }
            }();
            const std::vector<double> ts = tsteps == 1 ? std::vector<double>{tmin} : logspace(tmin, tmax, tsteps);
            NonoptimalityReport rep = verify_nonoptimality(s, ts);
            Csv csv(io.csv());
            csv.header({"t", "control_dist", "gap_numeric", "gap_closed_form", "ratio_gap_over_t2"});
            for (const GapRow& r : rep.rows) csv.row(r.t, r.control_dist, r.gap_numeric, r.gap_closed_form, r.ratio_gap_over_t2);
            nlohmann::json j{{"counterexample", to_string(id)},
                             {"n", n},
                             {"alpha", s.alpha},
                             {"residuals", residuals_json(rep.residuals)},
                             {"stationary", rep.residuals.stationary()},
                             {"verdict", rep.confirmed ? "non-optimality confirmed" : "not confirmed"}};
            if (id == CounterexampleId::strict_activity) {
                j["r"] = s.params.r;
                j["gamma"] = s.params.gamma;
                nlohmann::json lb = nlohmann::json::object();
                for (double t : ts) lb[std::to_string(t)] = ce1_lower_bound_check(s, t);
                j["lower_bound_check"] = lb;
            } else {
                j["c"] = s.params.c;
            }
            if (id == CounterexampleId::inactive_adjoint && rep.rows.size() >= 2) {
                j["fitted_gap_coefficient"] = fitted_gap_coefficient(rep);
                j["expected_gap_coefficient"] = -s.params.c + 8 * s.params.c * s.params.c;
            }
            io.json(j);
            return rep.confirmed ? ok : not_confirmed;
        }

        const Config cfg = load_config(config_path);
        if (*solve) {
            const ObstacleSolution sol = solve_obstacle(cfg.control, cfg.psi);
            write_solution_csv(io.csv(), cfg.control, sol, cfg.psi);
            if (!json_path.empty())
                io.json({{"objective", number(objective(cfg.spec, sol.y, cfg.control))},
                         {"kkt_residual", number(sol.kkt_residual)},
                         {"contact_nodes", sol.active_count()},
                         {"pdas_iterations", sol.pdas_iterations},
                         {"sor_sweeps", sol.sor_sweeps}});
            return ok;
        }
        if (*stat) {
            if (!cfg.bounds.admissible(cfg.control)) throw ConfigError("control violates the bounds");
            const StationarityBundle b = assemble_bundle(cfg.spec, cfg.control, cfg.psi, cfg.bounds);
            const StationarityResiduals r = check_strong_stationarity(b);
            int counts[3] = {0, 0, 0};
            for (NodeClass c : b.classes) ++counts[static_cast<int>(c)];
            io.json({{"residuals", residuals_json(r)},
                     {"max_residual", number(r.max())},
                     {"tolerance", tol_stat},
                     {"strongly_stationary", r.stationary()},
                     {"objective", number(objective(cfg.spec, b.y_bar, cfg.control))},
                     {"nodes", {{"inactive", counts[0]}, {"strictly_active", counts[1]}, {"biactive", counts[2]}}}});
            return ok;
        }
        if (*ssc) {
            const SscTheorem th = [&] {
                try {
                    return ssc_theorem_from_string(theorem);
                } catch (const DomainError& e) {
                    throw ConfigError(e.what());
                }
            }();
            SscReport rep;
            if (th == SscTheorem::subharmonic_convex) {
                rep = certify_subharmonic_convex(cfg.spec, cfg.psi, cfg.bounds);
            } else {
                if (!cfg.bounds.admissible(cfg.control)) throw ConfigError("control violates the bounds");
                SscOptions o;
                o.seed = cfg.seed;
                rep = certify(th, assemble_bundle(cfg.spec, cfg.control, cfg.psi, cfg.bounds), o);
            }
            io.json(report_json(rep));
            return ok;
        }
        if (*opt) {
            if (method == "auto") method = subharmonic_applies(cfg) ? "subharmonic" : "general";
            if (method == "subharmonic" && !subharmonic_applies(cfg))
                throw ConfigError("the subharmonic method needs an obstacle with nonnegative discrete Laplacian and nonpositive boundary values");
            std::mt19937_64 rng(cfg.seed);
            std::vector<OptimizerResult> results;
            for (int k = 0; k < starts; ++k) {
                if (method == "subharmonic") {
                    SubharmonicOptions o;
                    if (k > 0) o.random_start = rng();
                    results.push_back(solve_subharmonic(cfg.spec, cfg.psi, cfg.bounds, o));
                } else {
                    GeneralOptions o;
                    o.seed = rng();
                    const GridFn u0 = k == 0 ? cfg.bounds.project(cfg.control) : random_control(cfg, rng);
                    results.push_back(solve_general(cfg.spec, cfg.psi, cfg.bounds, u0, o));
                }
            }
            Csv csv(io.csv());
            csv.header({"start", "iteration", "objective", "step", "first_order", "kind"});
            for (std::size_t k = 0; k < results.size(); ++k)
                for (const TraceRow& t : results[k].trace) csv.row(static_cast<int>(k), t.iteration, t.objective, t.step, t.first_order, t.kind);
            std::size_t best = 0;
            double spread = 0.0;
            for (std::size_t k = 0; k < results.size(); ++k) {
                if (results[k].objective < results[best].objective) best = k;
                for (std::size_t l = 0; l < k; ++l) spread = std::max(spread, norm_l2(results[k].u - results[l].u));
            }
            nlohmann::json j = result_json(results[best]);
            j["starts"] = starts;
            j["best_start"] = static_cast<int>(best);
            j["max_pairwise_control_distance"] = spread;
            j["contact_nodes"] = solve_obstacle(results[best].u, cfg.psi).active_count();
            io.json(j);
            bool all_ok = true;
            for (const OptimizerResult& r : results) all_ok = all_ok && r.status == "converged";
            return all_ok ? ok : solver_failure;
        }
        if (*sweep) {
            if (!cfg.sweep) throw ConfigError("config has no \"sweep\" entry");
            const SweepSpec& sw = *cfg.sweep;
            std::vector<Config> points;
            for (const auto& v : sw.values) points.push_back(config_with(cfg, sw.key, v));
            std::vector<SolveSummary> rows(points.size());
            std::vector<std::string> failures(points.size());
            parallel_for(static_cast<int>(points.size()), [&](int k) {
                try {
                    rows[static_cast<std::size_t>(k)] = run_task(points[static_cast<std::size_t>(k)], sw.task);
                } catch (const SolverError& e) {
                    failures[static_cast<std::size_t>(k)] = e.what();
                } catch (const DomainError& e) {
                    failures[static_cast<std::size_t>(k)] = e.what();
                }
            });
            Csv csv(io.csv());
            csv.header({"value", "objective", "status", "iterations", "residual", "contact_nodes", "state_max"});
            bool failed = false;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                const std::string value = sw.values[k].is_string() ? sw.values[k].get<std::string>() : sw.values[k].dump();
                if (!failures[k].empty()) {
                    failed = true;
                    csv.row(value, std::nan(""), "failed", 0, std::nan(""), 0, std::nan(""));
                    err << "sweep value " << value << ": " << failures[k] << '\n';
                    continue;
                }
                const SolveSummary& r = rows[k];
                csv.row(value, r.objective, r.status, r.iterations, r.residual, r.contact_nodes, r.state_max);
            }
            return failed ? solver_failure : ok;
        }
    } catch (const ConfigError& e) {
        err << "invalid config: " << e.what() << '\n';
        return invalid_input;
    } catch (const DomainError& e) {
        err << "invalid input: " << e.what() << '\n';
        return invalid_input;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return solver_failure;
    }
    return invalid_input;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv{"obstacle"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace obstacle::cli
