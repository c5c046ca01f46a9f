#pragma once

// JSON views of the library's report structs. Full precision by default;
// round_numbers() produces the 6-digit human summaries.

#include <cmath>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "gconvex/characterization.hpp"
#include "gconvex/convexity.hpp"
#include "gconvex/jensen_lab.hpp"
#include "gconvex/mc_solver.hpp"
#include "gconvex/pde_solver.hpp"

namespace gconvex {

using json = nlohmann::ordered_json;

/// Rounds every floating-point leaf to `digits` significant digits.
inline json round_numbers(const json& j, int digits = 6) {
    if (j.is_number_float()) {
        const double v = j.get<double>();
        if (!std::isfinite(v)) return j;
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        return std::stod(buf);
    }
    if (j.is_array() || j.is_object()) {
        json out = j;
        for (auto& [k, v] : out.items()) v = round_numbers(v, digits);
        return out;
    }
    return j;
}

inline json to_json(const UniformGrid& g) { return {{"lo", g.lo}, {"hi", g.hi}, {"count", g.count}}; }

inline json to_json(const ScanPoint& p) {
    json j{{"t", p.t}, {"y", p.y}, {"z", p.z}};
    if (!p.reason.empty()) j["reason"] = p.reason;
    return j;
}

inline json to_json(const Scan& s) {
    return {{"t", s.ts}, {"y", to_json(s.y)}, {"z", to_json(s.z)}, {"dim_z", s.dim_z}};
}

inline json to_json(const ConvexityVerdict& v) {
    json j{{"decision", to_string(v.decision)},
           {"mode", to_string(v.mode)},
           {"min_margin", v.min_margin},
           {"max_margin", v.max_margin},
           {"witness", v.witness ? to_json(*v.witness) : json(nullptr)},
           {"scan", to_json(v.scan)},
           {"certificate", v.certificate},
           {"label", v.certificate ? "violated (witness)" : "no violation found on scan"},
           {"method", v.method},
           {"tolerance", v.tolerance},
           {"points", v.points}};
    return j;
}

inline json to_json(const GeneratorSpec& g) {
    return {{"source", g.source},
            {"dim_z", g.dim_z},
            {"mu_hat", g.mu_hat},
            {"lipschitz", {{"value", g.lipschitz.value}, {"refined", g.lipschitz.refined_value},
                           {"warning", g.lipschitz.non_lipschitz_warning}}},
            {"flags", {{"independent_of_y", g.flags.independent_of_y},
                       {"independent_of_z", g.flags.independent_of_z},
                       {"zero_at_origin", g.flags.zero_at_origin},
                       {"zero_on_y_axis", g.flags.zero_on_y_axis}}}};
}

inline json to_json(const CharacterizationReport& r) {
    json j{{"test", r.test}, {"verdict", r.verdict}};
    if (!r.relation.empty()) j["relation"] = r.relation;
    if (r.witness) {
        json w{{"t", r.witness->t}, {"y", r.witness->y}, {"z", r.witness->z}};
        if (r.witness->lambda) w["lambda"] = *r.witness->lambda;
        if (r.witness->c) w["c"] = *r.witness->c;
        j["witness"] = w;
    }
    j["margin"] = r.margin;
    if (!r.reason.empty()) j["reason"] = r.reason;
    return j;
}

inline json to_json(const GapPoint& p) {
    return {{"t", p.t}, {"x", p.x}, {"lhs", p.lhs}, {"rhs", p.rhs}, {"gap", p.gap}};
}

inline json to_json(const JensenReport& r) {
    json at = json::array();
    for (const auto& p : r.at_eval) at.push_back(to_json(p));
    return {{"kind", "jensen"},  {"id", r.id},       {"holds", r.holds},
            {"min_gap", r.min_gap}, {"worst", to_json(r.worst)}, {"at_eval", at},
            {"tol", r.tol},      {"window", {r.window_lo, r.window_hi}}, {"points", r.points}};
}

inline json to_json(const ViabilityReport& r) {
    return {{"kind", "viability"}, {"viable", r.viable}, {"min_margin", r.min_margin},
            {"witness", {{"t", r.at_t}, {"x", r.at_x}}}, {"tol", r.tol}};
}

inline json to_json(const ProcessReport& r) {
    return {{"class", to_string(r.kind)},
            {"min_discrepancy", r.min_discrepancy},
            {"max_discrepancy", r.max_discrepancy},
            {"at", {{"s", r.at_s}, {"x", r.at_x}}},
            {"tol", r.tol}};
}

inline json to_json(const TransformReport& r) {
    json entries = json::array();
    for (const auto& e : r.entries)
        entries.push_back({{"payoff", e.payoff}, {"class", to_string(e.kind)},
                           {"min_discrepancy", e.min_discrepancy}, {"max_discrepancy", e.max_discrepancy}});
    return {{"kind", "martingale"},
            {"convex_decision", to_string(r.convex_decision)},
            {"concave_decision", to_string(r.concave_decision)},
            {"expected", r.expected},
            {"entries", entries},
            {"consistent", r.consistent},
            {"inverse_evidence", r.inverse_evidence},
            {"level", r.level}};
}

inline json to_json(const AxiomReport& r) {
    json res = json::array();
    for (const auto& a : r.results)
        res.push_back({{"id", a.id}, {"passed", a.passed}, {"deviation", a.deviation}, {"tol", a.tol},
                       {"detail", a.detail}});
    return {{"gen", r.gen}, {"passed", r.passed()}, {"results", res}};
}

inline json to_json(const StabilityReport& r) {
    json v = json::array();
    for (auto d : r.verdicts) v.push_back(to_string(d));
    return {{"verdicts", v}, {"limit", to_string(r.limit_verdict)}, {"distances", r.distances},
            {"same_verdict", r.same_verdict}, {"monotone", r.monotone}, {"passed", r.passed()}};
}

inline json to_json(const CoherenceReport& r) {
    json j{{"decision", to_string(r.decision)}, {"jensen_holds", r.jensen_holds}, {"tol", r.tol},
           {"coherent", r.coherent}};
    j["witness_gap"] = r.witness_gap ? json(*r.witness_gap) : json(nullptr);
    return j;
}

inline json to_json(const EnvelopeResult& e) {
    json kept = json::array();
    for (const auto& p : e.kept) kept.push_back({p.a, p.b});
    json j{{"valid", e.valid}, {"grid", to_json(e.grid)}, {"slopes_tried", e.slopes_tried}, {"kept", kept.size()}};
    j["verdict"] = e.verdict ? to_json(*e.verdict) : json(nullptr);
    return j;
}

inline json to_json(const SolveDiagnostics& d) {
    return {{"scheme", d.scheme}, {"dt", d.dt}, {"dx", d.dx}, {"probed", d.probed}, {"probe_delta", d.probe_delta}};
}

inline json to_json(const McResult& r) {
    return {{"y0", r.y0},
            {"std_error", r.std_error},
            {"dt", r.diagnostics.dt},
            {"picard_iters", r.diagnostics.picard_iters},
            {"max_condition", r.diagnostics.max_condition}};
}

inline json error_json(const Error& e) { return {{"error", e.kind()}, {"message", e.what()}}; }

} // namespace gconvex
