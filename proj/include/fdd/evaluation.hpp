#pragma once

// Campaign evaluation report: global statistics, per-level and severity
// sensitivities, priority/severity correlation and priority boxplots.

#include "fdd/core.hpp"
#include "fdd/csv.hpp"
#include "fdd/diagnosis.hpp"
#include "fdd/metrics.hpp"
#include "fdd/prioritize.hpp"
#include "fdd/scanner_sim.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fdd {

struct EvaluationInputs {
    std::uint64_t seed = 0; // campaign seed, echoed in every section
    std::vector<DiagnosisRow> diagnoses;
    std::map<ChannelId, GroundTruth> truth;
    std::vector<RankedFault> priority; // every channel; may be empty
    metrics::CiMethod ci = metrics::CiMethod::Wald;
    metrics::OutlierRule outliers = metrics::OutlierRule::FromMedian;
};

namespace detail {

inline std::string list_ids(const std::vector<std::size_t>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) out += (i ? ", " : "") + std::to_string(ids[i]);
    if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

/// Throws with the symmetric difference of two channel sets.
inline void require_same_channels(const std::set<std::size_t>& a, const std::string& a_name,
                                  const std::set<std::size_t>& b, const std::string& b_name) {
    std::vector<std::size_t> only_a;
    std::vector<std::size_t> only_b;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_b));
    if (only_a.empty() && only_b.empty()) return;
    std::string msg = "channel sets differ between " + a_name + " and " + b_name;
    if (!only_a.empty()) msg += "; only in " + a_name + ": " + list_ids(only_a);
    if (!only_b.empty()) msg += "; only in " + b_name + ": " + list_ids(only_b);
    throw ValidationError(msg);
}

inline nlohmann::ordered_json interval(const metrics::Interval& ci) { return nlohmann::ordered_json::array({ci.lo, ci.hi}); }

inline std::string level_text(const metrics::RateRow& r) { return r.major ? "MAJOR" : std::to_string(r.level); }

inline nlohmann::ordered_json rate_rows(const metrics::RateTable& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
        rows.push_back({{"fault_type", to_string(r.type)},
                        {"direction", r.direction ? std::string(to_string(*r.direction)) : "both"},
                        {"level", level_text(r)},
                        {"hits", r.hits},
                        {"total", r.total},
                        {"sensitivity", r.rate},
                        {"ci", interval(r.ci)}});
    }
    return rows;
}

} // namespace detail

inline void check_inputs(const EvaluationInputs& in) {
    std::set<std::size_t> diag;
    for (const auto& d : in.diagnoses) {
        if (!diag.insert(index_of(d.channel)).second) {
            throw ValidationError("duplicate diagnosis for channel " + std::to_string(index_of(d.channel)));
        }
    }
    std::set<std::size_t> truth;
    for (const auto& [ch, g] : in.truth) truth.insert(index_of(ch));
    std::vector<std::size_t> missing;
    std::set_difference(truth.begin(), truth.end(), diag.begin(), diag.end(), std::back_inserter(missing));
    if (!missing.empty()) {
        throw ValidationError("labels name channels without a diagnosis: " + detail::list_ids(missing));
    }
    if (!in.priority.empty()) {
        std::set<std::size_t> prio;
        for (const auto& r : in.priority) prio.insert(index_of(r.channel));
        detail::require_same_channels(diag, "diagnoses", prio, "priorities");
    }
}

/// Table I: per (fault type, direction) balanced accuracy, using that
/// column's sensitivity with the scanner-wide specificity.
struct TableRow {
    std::string column;
    std::size_t hits = 0;
    std::size_t total = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double balanced_accuracy = 0.0;
};

inline std::vector<TableRow> balanced_accuracy_table(const EvaluationInputs& in, double specificity) {
    std::map<std::pair<FaultType, Direction>, std::pair<std::size_t, std::size_t>> counts;
    std::map<ChannelId, const DiagnosisRow*> by_channel;
    for (const auto& d : in.diagnoses) by_channel[d.channel] = &d;
    for (const auto& [ch, g] : in.truth) {
        if (g.major) continue;
        auto& c = counts[{g.type, g.direction}];
        ++c.second;
        if (metrics::correct_diagnosis(*by_channel.at(ch), g)) ++c.first;
    }
    std::vector<TableRow> out;
    for (const auto& [k, c] : counts) {
        TableRow r;
        r.column = std::string(to_string(k.first)) + " " + std::string(to_string(k.second));
        r.hits = c.first;
        r.total = c.second;
        r.sensitivity = static_cast<double>(c.first) / static_cast<double>(c.second);
        r.specificity = specificity;
        r.balanced_accuracy = metrics::balanced_accuracy(r.sensitivity, specificity);
        out.push_back(r);
    }
    return out;
}

/// Priority samples per fault type and level; "Ref" holds channels without
/// an injected fault.
inline std::map<std::pair<FaultType, std::string>, std::vector<double>>
priority_groups(const EvaluationInputs& in) {
    std::map<std::pair<FaultType, std::string>, std::vector<double>> out;
    for (const auto& r : in.priority) {
        auto it = in.truth.find(r.channel);
        if (it == in.truth.end()) {
            out[{FaultType::BiasShift, "Ref"}].push_back(r.priority);
            out[{FaultType::NoiseThresholdShift, "Ref"}].push_back(r.priority);
        } else {
            out[{it->second.type, it->second.major ? "MAJOR" : std::to_string(it->second.level)}].push_back(r.priority);
        }
    }
    return out;
}

struct EvaluationReport {
    nlohmann::ordered_json json;
    std::vector<std::string> warnings;
    metrics::RateTable per_level;
    metrics::RateTable severity;
    std::vector<TableRow> table;
    std::map<std::pair<FaultType, std::string>, metrics::BoxplotStats> boxplots;
};

inline EvaluationReport evaluate(const EvaluationInputs& in) {
    using nlohmann::ordered_json;
    check_inputs(in);
    EvaluationReport rep;
    auto& j = rep.json;

    const auto counts = metrics::global_counts(in.diagnoses, in.truth);
    ordered_json global = {{"seed", in.seed},
                           {"channels", in.diagnoses.size()},
                           {"tp", counts.tp},
                           {"fn", counts.fn},
                           {"tn", counts.tn},
                           {"fp", counts.fp}};
    std::optional<double> sens;
    std::optional<double> spec;
    if (counts.positives() > 0) {
        sens = metrics::sensitivity(counts);
        global["sensitivity"] = *sens;
        global["sensitivity_ci"] = detail::interval(metrics::proportion_ci(*sens, counts.positives(), in.ci));
    } else {
        global["sensitivity"] = nullptr;
        global["sensitivity_status"] = "undefined: no injected faults";
    }
    if (counts.negatives() > 0) {
        spec = metrics::specificity(counts);
        global["specificity"] = *spec;
        global["specificity_ci"] = detail::interval(metrics::proportion_ci(*spec, counts.negatives(), in.ci));
    } else {
        global["specificity"] = nullptr;
        global["specificity_status"] = "undefined: every channel is faulted";
    }
    global["balanced_accuracy"] = sens && spec ? ordered_json(metrics::balanced_accuracy(*sens, *spec)) : ordered_json();
    global["ci_method"] = in.ci == metrics::CiMethod::Wald ? "wald" : "wilson";
    if (spec) {
        rep.table = balanced_accuracy_table(in, *spec);
        ordered_json t = ordered_json::array();
        for (const auto& r : rep.table) {
            t.push_back({{"column", r.column}, {"sensitivity", r.sensitivity}, {"balanced_accuracy", r.balanced_accuracy}});
        }
        global["by_column"] = std::move(t);
    }
    j["global"] = std::move(global);

    if (!in.truth.empty()) {
        rep.per_level = metrics::fdd_sensitivity_per_level(in.diagnoses, in.truth, true, in.ci);
        rep.severity = metrics::severity_sensitivity(in.diagnoses, in.truth, false, in.ci);
    }
    rep.warnings = rep.per_level.warnings;
    rep.warnings.insert(rep.warnings.end(), rep.severity.warnings.begin(), rep.severity.warnings.end());
    j["per_level"] = {{"seed", in.seed}, {"rows", detail::rate_rows(rep.per_level)}, {"warnings", rep.per_level.warnings}};
    j["severity"] = {{"seed", in.seed}, {"rows", detail::rate_rows(rep.severity)}, {"warnings", rep.severity.warnings}};

    ordered_json corr = {{"seed", in.seed}};
    ordered_json boxes = {{"seed", in.seed}};
    if (!in.priority.empty()) {
        const auto groups = priority_groups(in);
        std::map<ChannelId, double> prio_of;
        for (const auto& r : in.priority) prio_of[r.channel] = r.priority;
        for (FaultType type : {FaultType::BiasShift, FaultType::NoiseThresholdShift}) {
            std::vector<double> level;
            std::vector<double> prio;
            for (const auto& [ch, g] : in.truth) {
                if (g.type != type || g.major) continue;
                level.push_back(g.level);
                prio.push_back(prio_of.at(ch));
            }
            const std::string key(to_string(type));
            try {
                const auto r = metrics::spearman(level, prio);
                corr[key] = {{"rho", r.rho}, {"p_value", r.p_value}, {"n", r.n}};
            } catch (const MetricError& e) {
                corr[key] = {{"rho", nullptr}, {"status", e.what()}, {"n", level.size()}};
            }
            ordered_json per_type = ordered_json::array();
            for (const auto& [k, v] : groups) {
                if (k.first != type) continue;
                const auto b = metrics::boxplot_stats(v, in.outliers);
                rep.boxplots[k] = b;
                per_type.push_back({{"level", k.second},
                                    {"n", b.n},
                                    {"q1", b.q1},
                                    {"median", b.median},
                                    {"q3", b.q3},
                                    {"iqr", b.iqr},
                                    {"whisker_low", b.whisker_low},
                                    {"whisker_high", b.whisker_high},
                                    {"outliers", b.outliers.size()}});
            }
            boxes[key] = std::move(per_type);
        }
        boxes["outlier_rule"] = in.outliers == metrics::OutlierRule::FromMedian ? "median" : "quartiles";
    } else {
        corr["status"] = "no priority table supplied";
        boxes["status"] = "no priority table supplied";
    }
    j["priority_correlation"] = std::move(corr);
    j["boxplots"] = std::move(boxes);
    return rep;
}

// CSV tables mirroring the report sections.

inline csv::Writer table_csv(const EvaluationReport& rep) {
    csv::Writer w({"column", "hits", "total", "sensitivity", "specificity", "balanced_accuracy"});
    for (const auto& r : rep.table) {
        w.row({r.column, std::to_string(r.hits), std::to_string(r.total), csv::format_double(r.sensitivity),
               csv::format_double(r.specificity), csv::format_double(r.balanced_accuracy)});
    }
    return w;
}

inline csv::Writer rate_csv(const metrics::RateTable& t) {
    csv::Writer w({"fault_type", "direction", "level", "hits", "total", "sensitivity", "ci_low", "ci_high"});
    for (const auto& r : t.rows) {
        w.row({std::string(to_string(r.type)), r.direction ? std::string(to_string(*r.direction)) : "both",
               detail::level_text(r), std::to_string(r.hits), std::to_string(r.total), csv::format_double(r.rate),
               csv::format_double(r.ci.lo), csv::format_double(r.ci.hi)});
    }
    return w;
}

inline csv::Writer boxplot_csv(const EvaluationReport& rep) {
    csv::Writer w({"fault_type", "level", "n", "q1", "median", "q3", "iqr", "whisker_low", "whisker_high", "outliers"});
    for (const auto& [k, b] : rep.boxplots) {
        w.row({std::string(to_string(k.first)), k.second, std::to_string(b.n), csv::format_double(b.q1),
               csv::format_double(b.median), csv::format_double(b.q3), csv::format_double(b.iqr),
               csv::format_double(b.whisker_low), csv::format_double(b.whisker_high), std::to_string(b.outliers.size())});
    }
    return w;
}

} // namespace fdd
