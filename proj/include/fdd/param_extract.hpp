#pragma once

// Observables -> normalized parameters -> scalar health indicator.

#include "fdd/core.hpp"
#include "fdd/csv.hpp"
#include "fdd/scanner_sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fdd {

struct ExtractedParameters {
    double drift = 0.0;    // relative photopeak deviation from reference
    double strength = 1.0; // count rate vs reference, clamped to [0, 1]
    bool identification_pass = true;
    bool energy_pass = true;
    bool saturated = false;

    friend bool operator==(const ExtractedParameters&, const ExtractedParameters&) = default;
};

struct PerformanceIndicators {
    double health = 1.0;
};

/// Prior knowledge about a channel, taken from a reference acquisition.
struct ReferenceBaseline {
    double photopeak_adc = 0.0;
    double count_rate_cps = 0.0;
    double energy_res_bound_pct = 0.0;
};

struct ExtractionConfig {
    double energy_bound_factor = 1.5;
};

/// Weights of drift, strength, identification and energy terms.
struct HealthWeights {
    double drift = 0.3;
    double strength = 0.3;
    double identification = 0.2;
    double energy = 0.2;
};

inline ReferenceBaseline make_reference(const ChannelObservables& ref, const ExtractionConfig& cfg = {}) {
    return {ref.photopeak_adc, ref.count_rate_cps, cfg.energy_bound_factor * ref.energy_res_pct};
}

inline std::vector<ReferenceBaseline> make_references(const std::vector<ChannelObservables>& ref,
                                                      const ExtractionConfig& cfg = {}) {
    std::vector<ReferenceBaseline> out;
    out.reserve(ref.size());
    for (const auto& r : ref) out.push_back(make_reference(r, cfg));
    return out;
}

inline ExtractedParameters extract_parameters(ChannelId ch, const ChannelObservables& obs,
                                              const ReferenceBaseline& ref) {
    const auto fail = [&](const char* field) {
        return ExtractionError("channel " + std::to_string(index_of(ch)) + ": non-finite " + field);
    };
    if (!std::isfinite(obs.photopeak_adc)) throw fail("photopeak_adc");
    if (!std::isfinite(obs.count_rate_cps)) throw fail("count_rate_cps");
    if (!std::isfinite(obs.energy_res_pct)) throw fail("energy_res_pct");
    if (!(ref.photopeak_adc > 0.0) || !(ref.count_rate_cps > 0.0) || !(ref.energy_res_bound_pct > 0.0)) {
        throw ExtractionError("channel " + std::to_string(index_of(ch)) + ": reference values must be positive");
    }

    ExtractedParameters p;
    p.drift = (obs.photopeak_adc - ref.photopeak_adc) / ref.photopeak_adc;
    p.strength = std::clamp(obs.count_rate_cps / ref.count_rate_cps, 0.0, 1.0);
    p.identification_pass = obs.identification_pass;
    p.energy_pass = obs.energy_res_pct <= ref.energy_res_bound_pct;
    p.saturated = obs.saturated;
    return p;
}

inline PerformanceIndicators compute_health(const ExtractedParameters& p, const HealthWeights& w = {}) {
    const double h = w.drift * (1.0 - std::min(std::abs(p.drift), 1.0)) + w.strength * p.strength +
                     w.identification * (p.identification_pass ? 1.0 : 0.0) + w.energy * (p.energy_pass ? 1.0 : 0.0);
    return {std::clamp(h, 0.0, 1.0)};
}

inline std::vector<ExtractedParameters> extract_all(const std::vector<ChannelObservables>& obs,
                                                    const std::vector<ReferenceBaseline>& refs) {
    if (obs.size() != refs.size()) {
        throw ExtractionError("observables cover " + std::to_string(obs.size()) + " channels, reference covers " +
                              std::to_string(refs.size()));
    }
    std::vector<ExtractedParameters> out;
    out.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) out.push_back(extract_parameters(channel(i), obs[i], refs[i]));
    return out;
}

inline const std::vector<std::string> kExtractedColumns = {"channel_id",  "drift",     "strength", "ident_pass",
                                                           "energy_pass", "saturated", "health"};

inline csv::Writer extracted_csv(const std::vector<ExtractedParameters>& params, const HealthWeights& w = {}) {
    csv::Writer out(kExtractedColumns);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        out.row({std::to_string(i), csv::format_double(p.drift), csv::format_double(p.strength),
                 p.identification_pass ? "1" : "0", p.energy_pass ? "1" : "0", p.saturated ? "1" : "0",
                 csv::format_double(compute_health(p, w).health)});
    }
    return out;
}

} // namespace fdd
