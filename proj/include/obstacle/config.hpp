#pragma once

// JSON scenario files for the command-line tool.
//
//   {
//     "grid": {"kind": "interval" | "square" | "radial", "n": 255},
//     "alpha": 1.0,
//     "objective": {"mu_j": 0.0, "y_D": "0", "g": "-1"},
//     "psi": "x^2 - x",
//     "bounds": {"ua": "-inf", "ub": "inf"},
//     "control": "0",
//     "seed": 1,
//     "sweep": {"key": "/alpha", "values": [0.1, 1.0], "task": "optimize"}
//   }
//
// Expressions may be given as strings or plain numbers. "control" is the
// control handed to solve, the candidate for stationarity and ssc, and the
// start of the general optimizer. Only "grid", "alpha" and "psi" are required.

#include "obstacle/expr.hpp"
#include "obstacle/stationarity.hpp"
#include "obstacle/vi_solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace obstacle {

/// Raised for malformed or out-of-range scenario files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SweepSpec {
    std::string key;  // JSON pointer into the config, e.g. "/alpha"
    std::vector<nlohmann::json> values;
    std::string task = "optimize";  // or "solve"
};

struct Config {
    nlohmann::json raw;
    Grid grid;
    ObjectiveSpec spec;
    Obstacle psi;
    ControlBounds bounds;
    GridFn control;
    std::uint64_t seed = 1;
    std::optional<SweepSpec> sweep;
};

namespace detail {

inline std::string expression_text(const nlohmann::json& v, const std::string& where) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << v.get<double>();
        return os.str();
    }
    throw ConfigError(where + ": expected an expression string or a number");
}

inline GridFn sample_expression(const nlohmann::json& v, const Grid& g, const std::string& where) {
    const std::string text = expression_text(v, where);
    try {
        return Expression::parse(text).sample(g);
    } catch (const DomainError& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline GridFn sample_bound(const nlohmann::json& v, const Grid& g, const std::string& where, double infinite) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "-inf") {
            if ((s[0] == '-') != (infinite < 0)) throw ConfigError(where + ": infinite bound has the wrong sign");
            return GridFn::constant(g, infinite);
        }
    }
    return sample_expression(v, g, where);
}

inline double number(const nlohmann::json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    return v.get<double>();
}

inline void only_keys(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) throw ConfigError(where + ": unknown key \"" + k + "\"");
}

}  // namespace detail

inline Grid grid_from_json(const nlohmann::json& j) {
    detail::only_keys(j, {"kind", "n"}, "grid");
    if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError("grid.kind: expected \"interval\", \"square\" or \"radial\"");
    if (!j.contains("n") || !j["n"].is_number_integer()) throw ConfigError("grid.n: expected an integer");
    const std::string kind = j["kind"].get<std::string>();
    const long long n = j["n"].get<long long>();
    if (n < 1 || n > (kind == "square" ? 1023 : 1 << 20)) throw ConfigError("grid.n: out of range");
    if (kind == "interval") return Grid::interval(static_cast<int>(n));
    if (kind == "square") return Grid::square(static_cast<int>(n));
    if (kind == "radial") return Grid::radial(static_cast<int>(n));
    throw ConfigError("grid.kind: expected \"interval\", \"square\" or \"radial\"");
}

/// Builds a scenario from parsed JSON; throws ConfigError on any problem.
inline Config config_from_json(const nlohmann::json& j) {
    using detail::number;
    detail::only_keys(j, {"grid", "alpha", "objective", "psi", "bounds", "control", "seed", "sweep"}, "config");
    for (const char* key : {"grid", "alpha", "psi"})
        if (!j.contains(key)) throw ConfigError(std::string("config: missing \"") + key + "\"");
    Grid g = grid_from_json(j["grid"]);

    ObjectiveSpec spec{0.0, GridFn(g), GridFn(g), number(j["alpha"], "alpha")};
    if (j.contains("objective")) {
        const nlohmann::json& o = j["objective"];
        detail::only_keys(o, {"mu_j", "y_D", "g"}, "objective");
        if (o.contains("mu_j")) spec.mu_j = number(o["mu_j"], "objective.mu_j");
        if (o.contains("y_D")) spec.y_D = detail::sample_expression(o["y_D"], g, "objective.y_D");
        if (o.contains("g")) spec.g = detail::sample_expression(o["g"], g, "objective.g");
    }
    try {
        spec.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("objective: ") + e.what());
    }

    const std::string psi_text = detail::expression_text(j["psi"], "psi");
    Obstacle psi = [&] {
        try {
            return Obstacle::from_field(g, Expression::parse(psi_text).field(g.kind()));
        } catch (const DomainError& e) {
            throw ConfigError(std::string("psi: ") + e.what());
        }
    }();
    for (int i = 0; i < g.size(); ++i)
        if (!std::isfinite(psi.values[i]) || !std::isfinite(psi.laplacian[i])) throw ConfigError("psi: not finite at every node");

    const double inf = std::numeric_limits<double>::infinity();
    GridFn ua = GridFn::constant(g, -inf), ub = GridFn::constant(g, inf);
    if (j.contains("bounds")) {
        const nlohmann::json& b = j["bounds"];
        detail::only_keys(b, {"ua", "ub"}, "bounds");
        if (b.contains("ua")) ua = detail::sample_bound(b["ua"], g, "bounds.ua", -inf);
        if (b.contains("ub")) ub = detail::sample_bound(b["ub"], g, "bounds.ub", inf);
    }
    ControlBounds bounds{ua.values(), ub.values()};
    try {
        bounds.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("bounds: ") + e.what());
    }

    GridFn control = j.contains("control") ? detail::sample_expression(j["control"], g, "control") : GridFn(g);
    for (int i = 0; i < g.size(); ++i)
        if (!std::isfinite(control[i])) throw ConfigError("control: not finite at every node");

    std::uint64_t seed = 1;
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
        seed = j["seed"].get<std::uint64_t>();
    }

    std::optional<SweepSpec> sweep;
    if (j.contains("sweep")) {
        const nlohmann::json& s = j["sweep"];
        detail::only_keys(s, {"key", "values", "task"}, "sweep");
        if (!s.contains("key") || !s["key"].is_string()) throw ConfigError("sweep.key: expected a JSON pointer string");
        if (!s.contains("values") || !s["values"].is_array() || s["values"].empty()) throw ConfigError("sweep.values: expected a non-empty array");
        SweepSpec sw;
        sw.key = s["key"].get<std::string>();
        if (sw.key.empty() || sw.key[0] != '/' || sw.key.rfind("/sweep", 0) == 0) throw ConfigError("sweep.key: expected a pointer such as \"/alpha\"");
        for (const auto& v : s["values"]) sw.values.push_back(v);
        if (s.contains("task")) {
            if (!s["task"].is_string()) throw ConfigError("sweep.task: expected \"solve\" or \"optimize\"");
            sw.task = s["task"].get<std::string>();
        }
        if (sw.task != "solve" && sw.task != "optimize") throw ConfigError("sweep.task: expected \"solve\" or \"optimize\"");
        sweep = std::move(sw);
    }
    return {j, std::move(g), std::move(spec), std::move(psi), std::move(bounds), std::move(control), seed, std::move(sweep)};
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

/// The config with the value at `pointer` replaced (one point of a sweep).
inline Config config_with(const Config& base, const std::string& pointer, const nlohmann::json& value) {
    nlohmann::json j = base.raw;
    j.erase("sweep");
    try {
        j[nlohmann::json::json_pointer(pointer)] = value;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("sweep.key: " + std::string(e.what()));
    }
    return config_from_json(j);
}

}  // namespace obstacle
