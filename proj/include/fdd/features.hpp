#pragma once

#include "fdd/param_extract.hpp"
#include "fdd/scanner_sim.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string_view>

namespace fdd {

/// Diagnosis inputs: control-panel observables, extracted parameters and the
/// health indicator, in a fixed order.
enum class Feature : std::size_t {
    Drift,
    Strength,
    IdentPass,
    EnergyPass,
    Saturated,
    Health,
    PhotopeakAdc,
    CountRate,
    EnergyResPct,
};

inline constexpr std::size_t kFeatureCount = 9;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "drift", "strength", "ident_pass", "energy_pass", "saturated", "health", "photopeak_adc", "count_rate",
    "energy_res_pct"};

struct FeatureVector {
    using Values = std::array<double, kFeatureCount>;
    Values values{};

    double operator[](Feature f) const noexcept { return values[static_cast<std::size_t>(f)]; }
    double& operator[](Feature f) noexcept { return values[static_cast<std::size_t>(f)]; }

    bool finite() const noexcept {
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline std::optional<Feature> feature_by_name(std::string_view name) {
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        if (kFeatureNames[i] == name) return static_cast<Feature>(i);
    }
    return std::nullopt;
}

inline FeatureVector make_features(const ChannelObservables& obs, const ExtractedParameters& p, double health) {
    FeatureVector f;
    f[Feature::Drift] = p.drift;
    f[Feature::Strength] = p.strength;
    f[Feature::IdentPass] = p.identification_pass ? 1.0 : 0.0;
    f[Feature::EnergyPass] = p.energy_pass ? 1.0 : 0.0;
    f[Feature::Saturated] = p.saturated ? 1.0 : 0.0;
    f[Feature::Health] = health;
    f[Feature::PhotopeakAdc] = obs.photopeak_adc;
    f[Feature::CountRate] = obs.count_rate_cps;
    f[Feature::EnergyResPct] = obs.energy_res_pct;
    return f;
}

} // namespace fdd
