#pragma once

// Merges the forest posterior with expert-system conclusions into a channel
// diagnosis, and applies the probability-threshold fault detection.

#include "fdd/core.hpp"
#include "fdd/csv.hpp"
#include "fdd/features.hpp"
#include "fdd/forest.hpp"
#include "fdd/rules.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace fdd {

inline constexpr double kDefaultDetectionThreshold = 0.70;

/// An expert-system conclusion that differs from the selected class.
struct Finding {
    DiagnosisClass cls = DiagnosisClass::Healthy;
    double probability = 0.0; // forest posterior of that class
    std::vector<std::string> rule_ids;
    std::vector<std::string> sentences;
};

struct Diagnosis {
    ChannelId channel{};
    DiagnosisClass cls = DiagnosisClass::Healthy;
    int severity = kNoSeverity;
    double probability = 0.0;
    std::string explanation;
    std::vector<std::string> rule_ids; // rules supporting the selected class
    std::vector<Finding> findings;
    bool from_forest = false;
    bool from_rules = false;
    std::array<double, kClassCount> posterior{};

    /// "Increase Polarization (96%): Channel has ..."
    std::string summary() const {
        char pct[32];
        std::snprintf(pct, sizeof(pct), "%.0f%%", probability * 100.0);
        return std::string(display_name(cls)) + " (" + pct + "): " + explanation;
    }
};

inline std::string percent(double p) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f%%", p * 100.0);
    return buf;
}

/// Logical-OR merge: the forest picks the class and its probability; every
/// rule conclusion survives, either as the explanation of that class or as
/// an additional finding.
inline Diagnosis merge(ChannelId ch, const ForestVote& rf, const InferenceResult& es) {
    Diagnosis d;
    d.channel = ch;
    d.cls = rf.argmax;
    d.probability = rf.probability(rf.argmax);
    d.severity = rf.argmax == DiagnosisClass::Healthy ? kNoSeverity : rf.severity;
    d.posterior = rf.posterior;
    d.from_forest = rf.n_trees > 0;
    d.from_rules = !es.conclusions.empty();

    std::string text;
    if (const Conclusion* same = es.find(d.cls)) {
        d.rule_ids = same->rule_ids;
        text = join_sentences(same->sentences);
    }
    std::string extra;
    for (const auto& c : es.conclusions) {
        if (c.cls == d.cls) continue;
        Finding f{c.cls, rf.probability(c.cls), c.rule_ids, c.sentences};
        if (!extra.empty()) extra += " ";
        extra += std::string(display_name(f.cls)) + " (" + percent(f.probability) + "): " + join_sentences(f.sentences);
        d.findings.push_back(std::move(f));
    }
    if (!extra.empty()) {
        if (!text.empty()) text += " ";
        text += "Additional findings: " + extra;
    }
    if (text.empty()) {
        text = d.cls == DiagnosisClass::Healthy ? "no findings" : "no rule-based explanation";
    }
    d.explanation = std::move(text);
    return d;
}

inline void check_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ValidationError("detection threshold must lie in (0, 1], got " + csv::format_double(threshold));
    }
}

/// A channel is faulty when its selected diagnosis is not HEALTHY and its
/// probability reaches the threshold.
inline bool detect(const Diagnosis& d, double threshold = kDefaultDetectionThreshold) {
    check_threshold(threshold);
    return d.cls != DiagnosisClass::Healthy && d.probability >= threshold;
}

struct DiagnoseResult {
    std::vector<ChannelId> faults; // channel order
    std::vector<Diagnosis> diagnoses;
    std::vector<bool> detected;
};

/// Diagnoses every channel first, then applies the detection threshold.
inline DiagnoseResult diagnose_all(const std::vector<FeatureVector>& channels, const Forest& forest,
                                   const RuleSet& rules, double threshold = kDefaultDetectionThreshold) {
    check_threshold(threshold);
    DiagnoseResult out;
    out.diagnoses.reserve(channels.size());
    out.detected.reserve(channels.size());
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const auto& x = channels[i];
        if (!x.finite()) throw ValidationError("channel " + std::to_string(i) + " has non-finite features");
        const ForestVote vote = forest.classify(x.values);
        const InferenceResult es = rules.infer(x);
        Diagnosis d = merge(channel(i), vote, es);
        const bool hit = detect(d, threshold);
        if (hit) out.faults.push_back(channel(i));
        out.detected.push_back(hit);
        out.diagnoses.push_back(std::move(d));
    }
    return out;
}

inline const std::vector<std::string> kDiagnosisColumns = {"channel_id",  "class",    "severity",
                                                           "probability", "detected", "explanation"};

inline std::string severity_text(int s) { return s == kNoSeverity ? "NONE" : std::to_string(s); }

inline csv::Writer diagnosis_csv(const DiagnoseResult& r) {
    csv::Writer w(kDiagnosisColumns);
    for (std::size_t i = 0; i < r.diagnoses.size(); ++i) {
        const auto& d = r.diagnoses[i];
        w.row({std::to_string(index_of(d.channel)), std::string(to_string(d.cls)), severity_text(d.severity),
               csv::format_double(d.probability), r.detected[i] ? "1" : "0", d.explanation});
    }
    return w;
}

/// One row of a diagnosis export, as consumed by evaluation.
struct DiagnosisRow {
    ChannelId channel{};
    DiagnosisClass cls = DiagnosisClass::Healthy;
    int severity = kNoSeverity;
    double probability = 0.0;
    bool detected = false;
    std::string explanation;
};

inline std::vector<DiagnosisRow> parse_diagnoses(const csv::Table& t) {
    t.require_columns(kDiagnosisColumns);
    std::vector<DiagnosisRow> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        DiagnosisRow d;
        d.channel = channel(static_cast<std::size_t>(csv::to_int(t, r, 0)));
        auto c = parse_class(t.rows[r][1]);
        if (!c) throw ConfigError(t.source, t.row_lines[r], "unknown class '" + t.rows[r][1] + "'");
        d.cls = *c;
        d.severity = t.rows[r][2] == "NONE" ? kNoSeverity : static_cast<int>(csv::to_int(t, r, 2));
        d.probability = csv::to_double(t, r, 3);
        d.detected = csv::to_bool(t, r, 4);
        d.explanation = t.rows[r][5];
        out.push_back(std::move(d));
    }
    return out;
}

inline std::vector<DiagnosisRow> to_rows(const DiagnoseResult& r) {
    std::vector<DiagnosisRow> out;
    out.reserve(r.diagnoses.size());
    for (std::size_t i = 0; i < r.diagnoses.size(); ++i) {
        const auto& d = r.diagnoses[i];
        out.push_back({d.channel, d.cls, d.severity, d.probability, r.detected[i], d.explanation});
    }
    return out;
}

} // namespace fdd
