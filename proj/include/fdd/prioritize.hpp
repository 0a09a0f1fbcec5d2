#pragma once

// Fault prioritization: fuzzy priority from channel health and the size of
// the failed-channel cluster the channel belongs to.

#include "fdd/clustering.hpp"
#include "fdd/csv.hpp"
#include "fdd/fuzzy.hpp"

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

namespace fdd {

/// Cluster size at which the HUGE term saturates.
inline constexpr double kHugeClusterSize = 45.0;

/// Priority engine with two inputs, "health" in [0, 1] and "size" (failed
/// cluster size), and one output "priority" in [0, 1].
class FuzzyConfig {
public:
    explicit FuzzyConfig(fuzzy::Engine engine, const std::string& source = "<fuzzy>") : engine_(std::move(engine)) {
        auto need = [&](const std::string& name) {
            for (std::size_t i = 0; i < engine_.inputs.size(); ++i) {
                if (engine_.inputs[i].name == name) return i;
            }
            throw ConfigError(source, 1, "priority engine needs an input named '" + name + "'");
        };
        health_ = need("health");
        size_ = need("size");
        if (engine_.inputs.size() != 2) throw ConfigError(source, 1, "priority engine takes exactly health and size");
        if (engine_.output.name != "priority" || engine_.output.lo != 0.0 || engine_.output.hi != 1.0) {
            throw ConfigError(source, 1, "output must be 'priority' over [0, 1]");
        }
        const auto& size_var = engine_.inputs[size_];
        const auto huge = size_var.term_index("HUGE");
        if (huge == size_var.terms.size() || size_var.terms[huge].mf(kHugeClusterSize) != 1.0) {
            throw ConfigError(source, 1, "size term HUGE must have membership 1 at 45 channels");
        }
    }

    static FuzzyConfig parse(const std::string& text, const std::string& source = "<fuzzy>") {
        return FuzzyConfig(fuzzy::parse_engine(text, source), source);
    }

    static FuzzyConfig load(const std::string& path) { return parse(csv::read_file(path), path); }

    const fuzzy::Engine& engine() const noexcept { return engine_; }
    const fuzzy::Variable& size_variable() const { return engine_.inputs[size_]; }
    const fuzzy::Variable& health_variable() const { return engine_.inputs[health_]; }

    double evaluate(double health, double size) const {
        std::vector<double> in(2);
        in[health_] = health;
        in[size_] = size;
        return engine_.evaluate(in);
    }

private:
    fuzzy::Engine engine_;
    std::size_t health_ = 0;
    std::size_t size_ = 1;
};

/// Default engine: trapezoid size terms anchored at 1-3, 12, 25 and 45
/// channels; triangular health terms at 0, 0.5 and 1.
inline constexpr const char* kDefaultFuzzyConfig = R"(# Priority from health and failed-cluster size
INPUT health 0 1
TERM LOW TRIANGLE 0 0 0.5
TERM MEDIUM TRIANGLE 0 0.5 1
TERM HIGH TRIANGLE 0.5 1 1

INPUT size 1 3072
TERM SMALL TRAPEZOID 1 1 3 12
TERM MEDIUM TRIANGLE 3 12 25
TERM LARGE TRIANGLE 12 25 45
TERM HUGE TRAPEZOID 25 45 3072 3072

OUTPUT priority 0 1
TERM LOW TRIANGLE 0 0 0.4
TERM MEDIUM TRIANGLE 0.1 0.4 0.7
TERM HIGH TRIANGLE 0.4 0.7 1
TERM CRITICAL TRIANGLE 0.6 1 1

DEFUZZIFY CENTROID 1000

IF health IS HIGH AND size IS SMALL THEN priority IS LOW
IF health IS HIGH AND size IS MEDIUM THEN priority IS LOW
IF health IS HIGH AND size IS LARGE THEN priority IS MEDIUM
IF health IS HIGH AND size IS HUGE THEN priority IS HIGH
IF health IS MEDIUM AND size IS SMALL THEN priority IS MEDIUM
IF health IS MEDIUM AND size IS MEDIUM THEN priority IS MEDIUM
IF health IS MEDIUM AND size IS LARGE THEN priority IS HIGH
IF health IS MEDIUM AND size IS HUGE THEN priority IS CRITICAL
IF health IS LOW AND size IS SMALL THEN priority IS HIGH
IF health IS LOW AND size IS MEDIUM THEN priority IS HIGH
IF health IS LOW AND size IS LARGE THEN priority IS CRITICAL
IF health IS LOW AND size IS HUGE THEN priority IS CRITICAL
)";

inline FuzzyConfig default_fuzzy_config() { return FuzzyConfig::parse(kDefaultFuzzyConfig, "<default fuzzy>"); }

struct TermMembership {
    std::string term;
    double mu = 0.0;
};

inline std::vector<TermMembership> fuzzify_cluster_size(std::size_t size, const FuzzyConfig& cfg) {
    if (size < 1) throw ValidationError("cluster size must be at least 1");
    const auto& var = cfg.size_variable();
    const auto mu = var.fuzzify(static_cast<double>(size));
    std::vector<TermMembership> out;
    for (std::size_t i = 0; i < mu.size(); ++i) out.push_back({var.terms[i].name, mu[i]});
    return out;
}

struct PriorityScore {
    double value = 0.0;
};

inline PriorityScore compute_priority(double health, std::size_t cluster_size, const FuzzyConfig& cfg) {
    if (!(health >= 0.0 && health <= 1.0)) throw ValidationError("health must lie in [0, 1]");
    if (cluster_size < 1) throw ValidationError("cluster size must be at least 1");
    return {std::clamp(cfg.evaluate(health, static_cast<double>(cluster_size)), 0.0, 1.0)};
}

struct RankedFault {
    std::size_t rank = 0; // 1-based
    ChannelId channel{};
    double priority = 0.0;
    int cluster_id = -1; // -1 for noise
    std::size_t cluster_size = 1;
    double health = 1.0;
};

inline void sort_ranking(std::vector<RankedFault>& ranking) {
    std::sort(ranking.begin(), ranking.end(), [](const RankedFault& a, const RankedFault& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        return a.channel < b.channel;
    });
    for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i].rank = i + 1;
}

/// Ranks detected faults by descending priority, ties by channel id.
inline std::vector<RankedFault> rank_faults(const std::vector<std::pair<ChannelId, double>>& faults,
                                            const ScannerLayout& layout, const FuzzyConfig& cfg,
                                            const ClusterParams& params = {}) {
    std::vector<ChannelId> ids;
    ids.reserve(faults.size());
    for (const auto& f : faults) ids.push_back(f.first);
    const Clustering clusters = cluster_failed(ids, layout, params);

    std::vector<RankedFault> out;
    out.reserve(faults.size());
    for (const auto& [ch, health] : faults) {
        RankedFault r;
        r.channel = ch;
        r.health = health;
        r.cluster_id = clusters.cluster_of(ch);
        r.cluster_size = clusters.cluster_size_of(ch);
        r.priority = compute_priority(health, r.cluster_size, cfg).value;
        out.push_back(r);
    }
    sort_ranking(out);
    return out;
}

/// Priority of every channel. Clusters are formed over the fault list only;
/// channels outside it are treated as isolated.
inline std::vector<RankedFault> prioritize_all(const std::vector<double>& health, const std::vector<ChannelId>& faults,
                                               const ScannerLayout& layout, const FuzzyConfig& cfg,
                                               const ClusterParams& params = {}) {
    if (health.size() != layout.size()) throw ValidationError("health vector does not cover the scanner");
    const Clustering clusters = cluster_failed(faults, layout, params);
    std::vector<RankedFault> out(health.size());
    for (std::size_t i = 0; i < health.size(); ++i) {
        auto& r = out[i];
        r.channel = channel(i);
        r.health = health[i];
        r.cluster_id = clusters.cluster_of(r.channel);
        r.cluster_size = clusters.cluster_size_of(r.channel);
        r.priority = compute_priority(health[i], r.cluster_size, cfg).value;
        r.rank = 0;
    }
    return out;
}

inline const std::vector<std::string> kRankingColumns = {"rank",       "channel_id",   "priority",
                                                         "cluster_id", "cluster_size", "health"};

inline csv::Writer ranking_csv(const std::vector<RankedFault>& ranking) {
    csv::Writer w(kRankingColumns);
    for (const auto& r : ranking) {
        w.row({std::to_string(r.rank), std::to_string(index_of(r.channel)), csv::format_double(r.priority),
               std::to_string(r.cluster_id), std::to_string(r.cluster_size), csv::format_double(r.health)});
    }
    return w;
}

inline std::vector<RankedFault> parse_ranking(const csv::Table& t) {
    t.require_columns(kRankingColumns);
    std::vector<RankedFault> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        RankedFault f;
        f.rank = static_cast<std::size_t>(csv::to_int(t, r, 0));
        f.channel = channel(static_cast<std::size_t>(csv::to_int(t, r, 1)));
        f.priority = csv::to_double(t, r, 2);
        f.cluster_id = static_cast<int>(csv::to_int(t, r, 3));
        f.cluster_size = static_cast<std::size_t>(csv::to_int(t, r, 4));
        f.health = csv::to_double(t, r, 5);
        out.push_back(f);
    }
    return out;
}

} // namespace fdd
