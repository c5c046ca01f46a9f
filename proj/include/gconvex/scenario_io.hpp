#pragma once

// Batch files: [[scenario]] and [[characterization]] blocks in TOML, plus
// two-column CSV tables for tabulated h. Unknown keys are rejected.

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <toml.hpp>

#include "gconvex/driver.hpp"
#include "gconvex/errors.hpp"
#include "gconvex/jensen_lab.hpp"
#include "gconvex/scalar_function.hpp"

namespace gconvex {

inline const std::vector<std::string>& default_checks() {
    static const std::vector<std::string> c{"jensen", "coherence", "viability", "martingale"};
    return c;
}

struct BatchScenario {
    Scenario scenario;
    std::string h_source;  // expression or "table:<path>"
    std::vector<std::string> checks = default_checks();
};

struct CharacterizationCase {
    std::string id;
    GeneratorSpec gen;
    std::optional<bool> predictor;  // expected jensen_all_convex_predictor
};

struct Batch {
    std::vector<BatchScenario> scenarios;
    std::vector<CharacterizationCase> characterizations;
    bool empty() const { return scenarios.empty() && characterizations.empty(); }
};

/// Rows "y,h" with an optional header line.
inline ScalarFunction load_table_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("TableError", "cannot open table " + path.string());
    std::vector<double> ys, hs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string a, b;
        if (!std::getline(ls, a, ',') || !std::getline(ls, b)) throw InputError("TableError", "bad row " + std::to_string(lineno));
        try {
            ys.push_back(std::stod(a));
            hs.push_back(std::stod(b));
        } catch (const std::exception&) {
            if (lineno == 1 && ys.empty()) continue;  // header
            throw InputError("TableError", "non-numeric row " + std::to_string(lineno));
        }
    }
    return ScalarFunction::from_rows(ys, std::move(hs));
}

namespace detail {

[[noreturn]] inline void schema_error(const std::string& where, const std::string& msg) {
    throw InputError("ScenarioError", where + ": " + msg);
}

inline void reject_unknown(const toml::table& t, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [k, v] : t)
        if (!allowed.count(std::string(k.str()))) schema_error(where, "unknown key '" + std::string(k.str()) + "'");
}

inline std::string req_string(const toml::table& t, const char* key, const std::string& where) {
    auto v = t[key].value<std::string>();
    if (!v) schema_error(where, std::string("missing string '") + key + "'");
    return *v;
}

inline std::optional<double> opt_number(const toml::table& t, const char* key, const std::string& where) {
    const auto* n = t.get(key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>()) return *v;
    schema_error(where, std::string("'") + key + "' must be a number");
}

inline std::vector<double> number_array(const toml::node& n, const std::string& where, const char* key) {
    const auto* arr = n.as_array();
    if (!arr) schema_error(where, std::string("'") + key + "' must be an array");
    std::vector<double> out;
    for (const auto& e : *arr) {
        auto v = e.value<double>();
        if (!v) schema_error(where, std::string("'") + key + "' must hold numbers");
        out.push_back(*v);
    }
    return out;
}

inline PdeConfig parse_solver(const toml::table& t, const std::string& where) {
    reject_unknown(t, {"nx", "nt", "domain", "x0", "dt_factor"}, where);
    PdeConfig c;
    if (auto v = t["nx"].value<std::int64_t>()) {
        if (*v < 5) schema_error(where, "nx must be >= 5");
        c.nx = static_cast<std::size_t>(*v);
    }
    if (auto v = t["nt"].value<std::int64_t>()) {
        if (*v < 0) schema_error(where, "nt must be >= 0");
        c.nt = static_cast<std::size_t>(*v);
    }
    if (auto v = opt_number(t, "x0", where)) c.x0 = *v;
    if (auto v = opt_number(t, "dt_factor", where)) c.dt_factor = *v;
    if (const auto* d = t.get("domain")) {
        auto lohi = number_array(*d, where, "domain");
        if (lohi.size() != 2 || !(lohi[0] < lohi[1])) schema_error(where, "domain must be [lo, hi] with lo < hi");
        c.domain = std::pair{lohi[0], lohi[1]};
    }
    return c;
}

inline BatchScenario parse_scenario(const toml::table& t, std::size_t index, const std::filesystem::path& base) {
    std::string where = "scenario[" + std::to_string(index) + "]";
    reject_unknown(t, {"id", "gen", "payoff", "h", "h_table", "T", "times", "tol", "expect", "checks", "solver"},
                   where);
    BatchScenario b;
    Scenario& s = b.scenario;
    s.id = t["id"].value_or(std::string("scenario_") + std::to_string(index));
    where = "scenario '" + s.id + "'";
    s.T = opt_number(t, "T", where).value_or(1.0);
    if (!(s.T > 0)) schema_error(where, "T must be positive");
    s.gen = make_generator(req_string(t, "gen", where), 1, s.T);
    s.payoff = PayoffSpec::from_expr(req_string(t, "payoff", where));

    const bool has_h = t.contains("h"), has_table = t.contains("h_table");
    if (has_h == has_table) schema_error(where, "exactly one of 'h' and 'h_table' is required");
    if (has_h) {
        b.h_source = req_string(t, "h", where);
        s.h = ScalarFunction::symbolic(b.h_source);
    } else {
        const auto rel = req_string(t, "h_table", where);
        b.h_source = "table:" + rel;
        s.h = load_table_csv(base / rel);
    }
    if (const auto* n = t.get("times")) s.eval_times = number_array(*n, where, "times");
    for (double x : s.eval_times)
        if (x < 0 || x > s.T) schema_error(where, "times must lie in [0, T]");
    s.tol = opt_number(t, "tol", where);
    if (s.tol && !(*s.tol > 0)) schema_error(where, "tol must be positive");
    if (auto e = t["expect"].value<std::string>()) {
        if (*e != "holds" && *e != "fails") schema_error(where, "expect must be 'holds' or 'fails'");
        s.expect = *e;
    }
    if (const auto* c = t.get("checks")) {
        const auto* arr = c->as_array();
        if (!arr) schema_error(where, "'checks' must be an array of strings");
        b.checks.clear();
        for (const auto& e : *arr) {
            auto v = e.value<std::string>();
            static const std::set<std::string> known{"jensen", "coherence", "viability", "martingale", "cross_solver"};
            if (!v || !known.count(*v)) schema_error(where, "unknown check in 'checks'");
            b.checks.push_back(*v);
        }
    }
    if (const auto* sv = t.get("solver")) {
        const auto* st = sv->as_table();
        if (!st) schema_error(where, "'solver' must be a table");
        s.solver = parse_solver(*st, where + ".solver");
    }
    return b;
}

} // namespace detail

inline Batch parse_batch(std::string_view text, const std::filesystem::path& base = ".") {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << e.description() << " at line " << e.source().begin.line;
        throw InputError("ScenarioError", os.str());
    }
    detail::reject_unknown(root, {"scenario", "characterization"}, "batch");
    Batch batch;
    auto blocks = [&](const char* key, auto&& fn) {
        const auto* n = root.get(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) detail::schema_error("batch", std::string("'") + key + "' must be an array of tables");
        std::size_t i = 0;
        for (const auto& e : *arr) {
            const auto* tab = e.as_table();
            if (!tab) detail::schema_error("batch", std::string("'") + key + "' must be an array of tables");
            fn(*tab, i++);
        }
    };
    blocks("scenario", [&](const toml::table& t, std::size_t i) {
        batch.scenarios.push_back(detail::parse_scenario(t, i, base));
    });
    blocks("characterization", [&](const toml::table& t, std::size_t i) {
        const std::string where = "characterization[" + std::to_string(i) + "]";
        detail::reject_unknown(t, {"id", "gen", "predictor"}, where);
        CharacterizationCase c;
        c.gen = make_generator(detail::req_string(t, "gen", where));
        c.id = t["id"].value_or(c.gen.source);
        if (const auto* p = t.get("predictor")) {
            auto v = p->value<bool>();
            if (!v) detail::schema_error(where, "'predictor' must be a boolean");
            c.predictor = *v;
        }
        batch.characterizations.push_back(std::move(c));
    });
    std::set<std::string> ids;
    for (const auto& s : batch.scenarios)
        if (!ids.insert(s.scenario.id).second) detail::schema_error("batch", "duplicate scenario id '" + s.scenario.id + "'");
    return batch;
}

inline Batch load_batch(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("ScenarioError", "cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_batch(ss.str(), path.parent_path());
}

} // namespace gconvex
