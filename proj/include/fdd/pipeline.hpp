#pragma once

// End-to-end wiring: observables -> parameters -> diagnosis -> detection ->
// prioritization, plus the seeded training campaign and the run manifest.

#include "fdd/core.hpp"
#include "fdd/diagnosis.hpp"
#include "fdd/features.hpp"
#include "fdd/forest.hpp"
#include "fdd/param_extract.hpp"
#include "fdd/prioritize.hpp"
#include "fdd/rules.hpp"
#include "fdd/scanner_sim.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace fdd {

inline constexpr std::size_t kDefaultChannels = 3072;
inline constexpr std::size_t kDefaultRings = 16;

/// Reference acquisition of the unfaulted scanner: the noise-free nominal
/// response, standing in for the calibrated prior information of the scanner.
inline std::vector<ReferenceBaseline> nominal_reference(const ScannerModel& nominal, const ExtractionConfig& cfg = {}) {
    std::vector<ReferenceBaseline> out;
    out.reserve(nominal.size());
    for (std::size_t i = 0; i < nominal.size(); ++i) {
        out.push_back(make_reference(expected_observables(nominal, channel(i)), cfg));
    }
    return out;
}

/// Reference rebuilt from a scanner configuration file: the file carries the
/// nominal bias per channel, the simulator seed carries the gain anchors.
inline std::vector<ReferenceBaseline> nominal_reference(std::size_t n_channels, std::size_t rings, std::uint64_t seed,
                                                        const ResponseModel& response = {},
                                                        const ExtractionConfig& cfg = {}) {
    return nominal_reference(build_scanner(n_channels, rings, seed, response), cfg);
}

struct ChannelAnalysis {
    std::vector<ExtractedParameters> params;
    std::vector<double> health;
    std::vector<FeatureVector> features;
};

inline ChannelAnalysis analyze(const std::vector<ChannelObservables>& obs, const std::vector<ReferenceBaseline>& refs,
                               const HealthWeights& weights = {}) {
    ChannelAnalysis a;
    a.params = extract_all(obs, refs);
    a.health.reserve(obs.size());
    a.features.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double h = compute_health(a.params[i], weights).health;
        a.health.push_back(h);
        a.features.push_back(make_features(obs[i], a.params[i], h));
    }
    return a;
}

// ---------------------------------------------------------------------------
// Training campaign
// ---------------------------------------------------------------------------

/// Seeded simulated campaigns with ground-truth labels used to bootstrap the
/// forest. Each round uses its own scanner, fault selection and noise.
struct TrainingPlan {
    std::uint64_t seed = 7;
    std::size_t rounds = 2;
    std::size_t major_per_round = 200;
    std::size_t per_level_per_type = 120;
    std::size_t n_channels = kDefaultChannels;
    std::size_t rings = kDefaultRings;
    ResponseModel response;
    ExtractionConfig extraction;
    HealthWeights weights;
};

struct LabeledCase {
    ChannelId channel{};
    FeatureVector features;
    Label label;
};

inline Label truth_label(const std::map<ChannelId, GroundTruth>& faults, ChannelId ch) {
    auto it = faults.find(ch);
    if (it == faults.end()) return {DiagnosisClass::Healthy, kNoSeverity};
    return {it->second.expected_class(), it->second.severity()};
}

/// Labeled cases of one faulted scanner; healthy channels are labeled HEALTHY.
inline std::vector<LabeledCase> label_scanner(const ScannerModel& faulted, const std::vector<ReferenceBaseline>& refs,
                                              std::uint64_t noise_seed, const HealthWeights& weights = {}) {
    const auto obs = simulate_observables(faulted, noise_seed);
    const ChannelAnalysis a = analyze(obs, refs, weights);
    std::vector<LabeledCase> out;
    out.reserve(faulted.size());
    for (std::size_t i = 0; i < faulted.size(); ++i) {
        out.push_back({channel(i), a.features[i], truth_label(faulted.faults, channel(i))});
    }
    return out;
}

inline std::vector<LabeledCase> training_campaign(const TrainingPlan& plan) {
    std::vector<LabeledCase> out;
    for (std::size_t round = 0; round < plan.rounds; ++round) {
        const std::uint64_t s = mix_seed(plan.seed, 0x747261696eULL + round);
        const ScannerModel nominal = build_scanner(plan.n_channels, plan.rings, mix_seed(s, 1), plan.response);
        CampaignPlan cp;
        cp.seed = mix_seed(s, 2);
        cp.major_fault_count = plan.major_per_round;
        cp.per_level_per_type_count = plan.per_level_per_type;
        const ScannerModel faulted = apply_campaign(nominal, plan_campaign(cp, nominal));
        auto cases = label_scanner(faulted, nominal_reference(nominal, plan.extraction), mix_seed(s, 3), plan.weights);
        out.insert(out.end(), cases.begin(), cases.end());
    }
    return out;
}

inline std::vector<TrainingSample> to_samples(const std::vector<LabeledCase>& cases) {
    std::vector<TrainingSample> out;
    out.reserve(cases.size());
    for (const auto& c : cases) {
        out.push_back({std::vector<double>(c.features.values.begin(), c.features.values.end()), c.label});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pipeline run
// ---------------------------------------------------------------------------

struct PipelineResult {
    ChannelAnalysis analysis;
    DiagnoseResult diagnosis;
    std::vector<RankedFault> ranking;      // detected faults only
    std::vector<RankedFault> priority_all; // every channel, channel order
};

struct PipelineOptions {
    HealthWeights weights;
    ClusterParams cluster;
    double threshold = kDefaultDetectionThreshold;
};

inline PipelineResult run_pipeline(const ScannerLayout& layout, const std::vector<ChannelObservables>& obs,
                                   const std::vector<ReferenceBaseline>& refs, const Forest& forest,
                                   const RuleSet& rules, const FuzzyConfig& fuzzy, const PipelineOptions& opt = {}) {
    if (obs.size() != layout.size()) {
        throw ValidationError("observables cover " + std::to_string(obs.size()) + " channels, scanner has " +
                              std::to_string(layout.size()));
    }
    PipelineResult r;
    r.analysis = analyze(obs, refs, opt.weights);
    r.diagnosis = diagnose_all(r.analysis.features, forest, rules, opt.threshold);
    std::vector<std::pair<ChannelId, double>> faults;
    faults.reserve(r.diagnosis.faults.size());
    for (auto ch : r.diagnosis.faults) faults.emplace_back(ch, r.analysis.health[index_of(ch)]);
    r.ranking = rank_faults(faults, layout, fuzzy, opt.cluster);
    r.priority_all = prioritize_all(r.analysis.health, r.diagnosis.faults, layout, fuzzy, opt.cluster);
    return r;
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Everything that determines a run. Artifacts carry its hash.
struct RunManifest {
    std::uint64_t seed = 0;
    std::size_t n_channels = kDefaultChannels;
    std::size_t rings = kDefaultRings;
    CampaignPlan campaign;
    std::string fuzzy_config;  // path or "<default>"
    std::string rules_config;  // path or "<default>"
    std::string forest;        // forest content hash
    double threshold = kDefaultDetectionThreshold;

    nlohmann::ordered_json to_json() const {
        return {{"seed", seed},
                {"scanner", {{"channels", n_channels}, {"rings", rings}}},
                {"campaign",
                 {{"seed", campaign.seed},
                  {"major_fault_count", campaign.major_fault_count},
                  {"per_level_per_type_count", campaign.per_level_per_type_count},
                  {"level_magnitudes", campaign.level_magnitudes},
                  {"increase_fraction", campaign.increase_fraction}}},
                {"config", {{"fuzzy", fuzzy_config}, {"rules", rules_config}, {"forest", forest}}},
                {"threshold", threshold}};
    }

    static RunManifest from_json(const nlohmann::json& j) {
        RunManifest m;
        m.seed = j.at("seed").get<std::uint64_t>();
        m.n_channels = j.at("scanner").at("channels").get<std::size_t>();
        m.rings = j.at("scanner").at("rings").get<std::size_t>();
        const auto& c = j.at("campaign");
        m.campaign.seed = c.at("seed").get<std::uint64_t>();
        m.campaign.major_fault_count = c.at("major_fault_count").get<std::size_t>();
        m.campaign.per_level_per_type_count = c.at("per_level_per_type_count").get<std::size_t>();
        m.campaign.level_magnitudes = c.at("level_magnitudes").get<std::vector<int>>();
        m.campaign.increase_fraction = c.at("increase_fraction").get<double>();
        m.fuzzy_config = j.at("config").at("fuzzy").get<std::string>();
        m.rules_config = j.at("config").at("rules").get<std::string>();
        m.forest = j.at("config").at("forest").get<std::string>();
        m.threshold = j.at("threshold").get<double>();
        return m;
    }

    std::string hash() const { return hex64(fnv1a(to_json().dump())); }
};

} // namespace fdd
