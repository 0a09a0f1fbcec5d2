#pragma once

// Simulated many-channel APD scanner: layout, per-channel configuration,
// an observable response model, and configuration fault injection.

#include "fdd/core.hpp"
#include "fdd/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace fdd {

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct ChannelGeometry {
    int ring = 0;  // which detector ring
    int axial = 0; // slot around the ring; wraps at channels_per_ring
    double x = 0.0;
    double y = 0.0;
};

/// Rings of equal size laid out on a cylinder. Channel i sits in ring
/// i / channels_per_ring at slot i % channels_per_ring; coordinates are in
/// cell units and the slot coordinate wraps around.
class ScannerLayout {
public:
    ScannerLayout() = default;

    ScannerLayout(std::size_t n_channels, std::size_t rings) {
        if (n_channels < 1 || rings < 1 || n_channels % rings != 0) {
            throw LayoutError("layout: " + std::to_string(n_channels) + " channels cannot be split into " +
                              std::to_string(rings) + " equal rings");
        }
        rings_ = rings;
        per_ring_ = n_channels / rings;
    }

    std::size_t size() const noexcept { return rings_ * per_ring_; }
    std::size_t rings() const noexcept { return rings_; }
    std::size_t channels_per_ring() const noexcept { return per_ring_; }

    bool contains(ChannelId id) const noexcept { return index_of(id) < size(); }

    ChannelGeometry geometry(ChannelId id) const {
        check(id);
        const auto i = index_of(id);
        ChannelGeometry g;
        g.ring = static_cast<int>(i / per_ring_);
        g.axial = static_cast<int>(i % per_ring_);
        g.x = static_cast<double>(g.axial);
        g.y = static_cast<double>(g.ring);
        return g;
    }

    ChannelId at(int ring, int axial) const {
        if (ring < 0 || axial < 0 || static_cast<std::size_t>(ring) >= rings_ ||
            static_cast<std::size_t>(axial) >= per_ring_) {
            throw LayoutError("layout: cell (" + std::to_string(ring) + "," + std::to_string(axial) +
                              ") outside the scanner");
        }
        return channel(static_cast<std::size_t>(ring) * per_ring_ + static_cast<std::size_t>(axial));
    }

    /// Euclidean distance on the cylinder surface.
    double distance(ChannelId a, ChannelId b) const {
        const auto ga = geometry(a);
        const auto gb = geometry(b);
        double dx = std::abs(ga.x - gb.x);
        dx = std::min(dx, static_cast<double>(per_ring_) - dx);
        const double dy = ga.y - gb.y;
        return std::sqrt(dx * dx + dy * dy);
    }

    void check(ChannelId id) const {
        if (!contains(id)) {
            throw ValidationError("channel " + std::to_string(index_of(id)) + " out of range [0, " +
                                  std::to_string(size()) + ")");
        }
    }

    friend bool operator==(const ScannerLayout&, const ScannerLayout&) = default;

private:
    std::size_t rings_ = 1;
    std::size_t per_ring_ = 1;
};

// ---------------------------------------------------------------------------
// Configuration, faults and the response model
// ---------------------------------------------------------------------------

struct ChannelConfig {
    double apd_bias_v = 0.0;
    int noise_threshold_bins = 0;

    friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

/// Per-channel response baseline: gain anchor and nominal bias.
struct ChannelBaseline {
    double photopeak_p0 = 0.0;
    double nominal_bias_v = 0.0;

    friend bool operator==(const ChannelBaseline&, const ChannelBaseline&) = default;
};

/// Frozen response model constants. photopeak = P0 exp(k (V - V0));
/// resolution = R0 sqrt(P0 / photopeak); the true-event fraction above the
/// threshold T is exp(-T / (spectrum_scale * photopeak)); noise counts grow as
/// noise_rate * exp((noise_floor - T) / noise_slope) up to the cap.
struct ResponseModel {
    double p0_adc = 256.0;
    double gain_per_volt = 0.04;
    double r0_pct = 14.0;
    double nominal_bias_v = 400.0;
    double bias_jitter_v = 0.5;
    double p0_jitter = 0.01;
    int nominal_threshold_bins = 30;
    double true_rate_cps = 1000.0;
    double spectrum_scale = 0.5;
    double noise_floor_bins = 20.0;
    double noise_slope_bins = 3.0;
    double noise_rate_cps = 100.0;
    double saturation_cap_cps = 5000.0;
    double measurement_sigma = 0.03;

    friend bool operator==(const ResponseModel&, const ResponseModel&) = default;
};

inline constexpr double kLevelStep = 5.0;
inline constexpr double kMajorBiasDelta = -50.0;

struct FaultSpec {
    FaultType type = FaultType::BiasShift;
    double delta = 0.0; // volts or ADC bins
    int level = 0;      // 1..5; ignored when major
    bool major = false;

    Direction direction() const noexcept { return delta >= 0.0 ? Direction::Increase : Direction::Decrease; }

    /// Severity used as the training label; MAJOR maps to the top level.
    int severity() const noexcept { return major ? kMaxSeverity : level; }

    static FaultSpec major_fault() { return {FaultType::BiasShift, kMajorBiasDelta, 0, true}; }

    static FaultSpec leveled(FaultType type, Direction dir, int level) {
        if (level < 1 || level > kMaxSeverity) {
            throw ValidationError("fault level " + std::to_string(level) + " outside [1, 5]");
        }
        const double mag = kLevelStep * level;
        return {type, dir == Direction::Increase ? mag : -mag, level, false};
    }

    /// Recovers the level from a signed delta; |delta| must be 5, 10, .. 25.
    static FaultSpec from_delta(FaultType type, double delta) {
        const double steps = std::abs(delta) / kLevelStep;
        const int level = static_cast<int>(std::lround(steps));
        if (std::abs(steps - level) > 1e-9 || level < 1 || level > kMaxSeverity) {
            throw ValidationError("fault delta " + csv::format_double(delta) + " is not a 5-unit level in [1, 5]");
        }
        return {type, delta, level, false};
    }

    friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

/// Ground-truth label recorded when a fault is injected.
struct GroundTruth {
    ChannelId channel{};
    FaultType type = FaultType::BiasShift;
    Direction direction = Direction::Decrease;
    int level = 0; // 1..5, or 0 with major = true
    bool major = false;
    bool clamped = false;

    int severity() const noexcept { return major ? kMaxSeverity : level; }
    DiagnosisClass expected_class() const noexcept { return corrective_action(type, direction); }

    /// Signed delta implied by the label.
    double delta() const noexcept {
        if (major) return kMajorBiasDelta;
        const double mag = kLevelStep * level;
        return direction == Direction::Increase ? mag : -mag;
    }

    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct ChannelObservables {
    double photopeak_adc = 0.0;
    double count_rate_cps = 0.0;
    double energy_res_pct = 0.0;
    bool identification_pass = false;
    bool saturated = false;

    friend bool operator==(const ChannelObservables&, const ChannelObservables&) = default;
};

struct ScannerModel {
    ScannerLayout layout;
    ResponseModel response;
    std::vector<ChannelConfig> config;
    std::vector<ChannelBaseline> baseline;
    std::map<ChannelId, GroundTruth> faults;

    std::size_t size() const noexcept { return layout.size(); }

    friend bool operator==(const ScannerModel&, const ScannerModel&) = default;
};

inline ScannerModel build_scanner(std::size_t n_channels, std::size_t rings, std::uint64_t seed,
                                  const ResponseModel& response = {}) {
    ScannerModel model;
    model.layout = ScannerLayout(n_channels, rings);
    model.response = response;
    model.config.reserve(n_channels);
    model.baseline.reserve(n_channels);

    std::mt19937_64 rng(mix_seed(seed, 0x6275696c64ULL));
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t i = 0; i < n_channels; ++i) {
        ChannelBaseline b;
        b.photopeak_p0 = response.p0_adc * (1.0 + response.p0_jitter * unit(rng));
        b.nominal_bias_v = response.nominal_bias_v + response.bias_jitter_v * unit(rng);
        model.baseline.push_back(b);
        model.config.push_back({b.nominal_bias_v, response.nominal_threshold_bins});
    }
    return model;
}

inline ScannerModel inject_fault(ScannerModel model, ChannelId ch, const FaultSpec& fault) {
    model.layout.check(ch);
    if (model.faults.count(ch)) {
        throw ValidationError("channel " + std::to_string(index_of(ch)) + " already carries a fault");
    }
    GroundTruth truth;
    truth.channel = ch;
    truth.type = fault.type;
    truth.direction = fault.direction();
    truth.level = fault.major ? 0 : fault.level;
    truth.major = fault.major;

    auto& cfg = model.config[index_of(ch)];
    if (fault.type == FaultType::BiasShift) {
        const double v = cfg.apd_bias_v + fault.delta;
        if (v <= 0.0) throw ValidationError("bias fault would drive APD bias to " + csv::format_double(v) + " V");
        cfg.apd_bias_v = v;
    } else {
        const long t = static_cast<long>(cfg.noise_threshold_bins) + std::lround(fault.delta);
        if (t < 0) {
            cfg.noise_threshold_bins = 0;
            truth.clamped = true;
        } else {
            cfg.noise_threshold_bins = static_cast<int>(t);
        }
    }
    model.faults.emplace(ch, truth);
    return model;
}

// ---------------------------------------------------------------------------
// Campaign planning
// ---------------------------------------------------------------------------

struct CampaignPlan {
    std::uint64_t seed = 0;
    std::size_t major_fault_count = 0;
    std::size_t per_level_per_type_count = 0;
    std::vector<int> level_magnitudes = {1, 2, 3, 4, 5};
    double increase_fraction = 0.5;

    std::size_t total() const noexcept {
        return major_fault_count + per_level_per_type_count * level_magnitudes.size() * 2;
    }
};

struct PlannedFault {
    ChannelId channel{};
    FaultSpec fault;

    friend bool operator==(const PlannedFault&, const PlannedFault&) = default;
};

/// Disjoint random channel assignment; sorted by channel id.
inline std::vector<PlannedFault> plan_campaign(const CampaignPlan& plan, const ScannerModel& model) {
    const std::size_t n = model.size();
    if (plan.total() > n) {
        throw ValidationError("campaign plans " + std::to_string(plan.total()) + " faults on " + std::to_string(n) +
                              " channels");
    }
    if (plan.increase_fraction < 0.0 || plan.increase_fraction > 1.0) {
        throw ValidationError("increase_fraction must lie in [0, 1]");
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(mix_seed(plan.seed, 0x63616d70ULL));
    // Partial Fisher-Yates: only the first total() slots are needed.
    for (std::size_t i = 0; i < plan.total(); ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(rng)]);
    }

    std::vector<PlannedFault> out;
    out.reserve(plan.total());
    std::size_t next = 0;
    for (std::size_t i = 0; i < plan.major_fault_count; ++i) {
        out.push_back({channel(order[next++]), FaultSpec::major_fault()});
    }
    const auto n_increase = static_cast<std::size_t>(
        std::lround(plan.increase_fraction * static_cast<double>(plan.per_level_per_type_count)));
    for (FaultType type : {FaultType::BiasShift, FaultType::NoiseThresholdShift}) {
        for (int level : plan.level_magnitudes) {
            for (std::size_t k = 0; k < plan.per_level_per_type_count; ++k) {
                const Direction dir = k < n_increase ? Direction::Increase : Direction::Decrease;
                out.push_back({channel(order[next++]), FaultSpec::leveled(type, dir, level)});
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const PlannedFault& a, const PlannedFault& b) { return a.channel < b.channel; });
    return out;
}

inline ScannerModel apply_campaign(ScannerModel model, const std::vector<PlannedFault>& faults) {
    for (const auto& f : faults) model = inject_fault(std::move(model), f.channel, f.fault);
    return model;
}

// ---------------------------------------------------------------------------
// Observables
// ---------------------------------------------------------------------------

/// Noise-free response of one channel.
inline ChannelObservables expected_observables(const ScannerModel& model, ChannelId ch) {
    const auto& r = model.response;
    const auto& cfg = model.config[index_of(ch)];
    const auto& base = model.baseline[index_of(ch)];
    const double threshold = static_cast<double>(cfg.noise_threshold_bins);

    ChannelObservables o;
    o.photopeak_adc = base.photopeak_p0 * std::exp(r.gain_per_volt * (cfg.apd_bias_v - base.nominal_bias_v));
    o.energy_res_pct = r.r0_pct * std::sqrt(base.photopeak_p0 / o.photopeak_adc);
    const double above_threshold = std::exp(-threshold / (r.spectrum_scale * o.photopeak_adc));
    const double noise = r.noise_rate_cps * std::exp((r.noise_floor_bins - threshold) / r.noise_slope_bins);
    o.count_rate_cps = std::min(r.saturation_cap_cps, r.true_rate_cps * above_threshold + noise);
    o.identification_pass = o.photopeak_adc >= 2.0 * threshold;
    o.saturated = o.count_rate_cps >= r.saturation_cap_cps;
    return o;
}

/// Measured response: expected values under multiplicative Gaussian noise.
/// Each channel draws from its own stream, so the result does not depend on
/// evaluation order.
inline std::vector<ChannelObservables> simulate_observables(const ScannerModel& model, std::uint64_t seed) {
    const auto& r = model.response;
    std::vector<ChannelObservables> out(model.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
        const ChannelId ch = channel(i);
        const ChannelObservables e = expected_observables(model, ch);
        std::mt19937_64 rng(mix_seed(seed, i));
        std::normal_distribution<double> noise(0.0, r.measurement_sigma);
        const double threshold = static_cast<double>(model.config[i].noise_threshold_bins);

        ChannelObservables o;
        o.photopeak_adc = std::max(0.0, e.photopeak_adc * (1.0 + noise(rng)));
        o.count_rate_cps = std::clamp(e.count_rate_cps * (1.0 + noise(rng)), 0.0, r.saturation_cap_cps);
        o.energy_res_pct = std::max(0.0, e.energy_res_pct * (1.0 + noise(rng)));
        o.identification_pass = o.photopeak_adc >= 2.0 * threshold;
        o.saturated = o.count_rate_cps >= r.saturation_cap_cps;
        out[i] = o;
    }
    return out;
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kScannerConfigColumns = {"channel_id", "ring", "axial", "apd_bias_v",
                                                               "noise_threshold_bins"};
inline const std::vector<std::string> kObservablesColumns = {
    "channel_id", "photopeak_adc", "count_rate_cps", "energy_res_pct", "identification_pass", "saturated"};
inline const std::vector<std::string> kLabelColumns = {"channel_id", "fault_type", "direction", "level"};

inline csv::Writer scanner_config_csv(const ScannerModel& model) {
    csv::Writer w(kScannerConfigColumns);
    for (std::size_t i = 0; i < model.size(); ++i) {
        const auto g = model.layout.geometry(channel(i));
        w.row({std::to_string(i), std::to_string(g.ring), std::to_string(g.axial),
               csv::format_double(model.config[i].apd_bias_v), std::to_string(model.config[i].noise_threshold_bins)});
    }
    return w;
}

/// Layout and configuration recovered from a scanner configuration file.
struct ScannerConfigFile {
    ScannerLayout layout;
    std::vector<ChannelConfig> config;
};

inline ScannerConfigFile parse_scanner_config(const csv::Table& t) {
    t.require_columns(kScannerConfigColumns);
    const std::size_t n = t.rows.size();
    if (n == 0) throw ConfigError(t.source, 1, "scanner configuration has no channels");
    long long max_ring = 0;
    for (std::size_t r = 0; r < n; ++r) max_ring = std::max(max_ring, csv::to_int(t, r, 1));
    ScannerConfigFile out;
    try {
        out.layout = ScannerLayout(n, static_cast<std::size_t>(max_ring + 1));
    } catch (const LayoutError& e) {
        throw ConfigError(t.source, 1, e.what());
    }
    out.config.resize(n);
    std::vector<bool> seen(n, false);
    for (std::size_t r = 0; r < n; ++r) {
        const long long id = csv::to_int(t, r, 0);
        if (id < 0 || static_cast<std::size_t>(id) >= n || seen[static_cast<std::size_t>(id)]) {
            throw ConfigError(t.source, t.row_lines[r], "bad or duplicate channel_id " + std::to_string(id));
        }
        const auto g = out.layout.geometry(channel(static_cast<std::size_t>(id)));
        if (g.ring != csv::to_int(t, r, 1) || g.axial != csv::to_int(t, r, 2)) {
            throw ConfigError(t.source, t.row_lines[r], "ring/axial inconsistent with channel_id");
        }
        seen[static_cast<std::size_t>(id)] = true;
        out.config[static_cast<std::size_t>(id)] = {csv::to_double(t, r, 3), static_cast<int>(csv::to_int(t, r, 4))};
    }
    return out;
}

inline csv::Writer observables_csv(const std::vector<ChannelObservables>& obs) {
    csv::Writer w(kObservablesColumns);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        w.row({std::to_string(i), csv::format_double(o.photopeak_adc), csv::format_double(o.count_rate_cps),
               csv::format_double(o.energy_res_pct), o.identification_pass ? "1" : "0", o.saturated ? "1" : "0"});
    }
    return w;
}

inline std::vector<ChannelObservables> parse_observables(const csv::Table& t) {
    t.require_columns(kObservablesColumns);
    std::vector<ChannelObservables> out(t.rows.size());
    std::vector<bool> seen(t.rows.size(), false);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const long long id = csv::to_int(t, r, 0);
        if (id < 0 || static_cast<std::size_t>(id) >= out.size() || seen[static_cast<std::size_t>(id)]) {
            throw ConfigError(t.source, t.row_lines[r], "bad or duplicate channel_id " + std::to_string(id));
        }
        seen[static_cast<std::size_t>(id)] = true;
        auto& o = out[static_cast<std::size_t>(id)];
        o.photopeak_adc = csv::to_double(t, r, 1);
        o.count_rate_cps = csv::to_double(t, r, 2);
        o.energy_res_pct = csv::to_double(t, r, 3);
        o.identification_pass = csv::to_bool(t, r, 4);
        o.saturated = csv::to_bool(t, r, 5);
    }
    return out;
}

inline csv::Writer labels_csv(const std::map<ChannelId, GroundTruth>& faults) {
    csv::Writer w(kLabelColumns);
    for (const auto& [ch, truth] : faults) {
        w.row({std::to_string(index_of(ch)), std::string(to_string(truth.type)), std::string(to_string(truth.direction)),
               truth.major ? "MAJOR" : std::to_string(truth.level)});
    }
    return w;
}

inline std::map<ChannelId, GroundTruth> parse_labels(const csv::Table& t) {
    t.require_columns(kLabelColumns);
    std::map<ChannelId, GroundTruth> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        GroundTruth g;
        const long long id = csv::to_int(t, r, 0);
        if (id < 0) throw ConfigError(t.source, t.row_lines[r], "negative channel_id");
        g.channel = channel(static_cast<std::size_t>(id));
        auto type = parse_fault_type(t.rows[r][1]);
        auto dir = parse_direction(t.rows[r][2]);
        if (!type || !dir) throw ConfigError(t.source, t.row_lines[r], "unknown fault_type or direction");
        g.type = *type;
        g.direction = *dir;
        if (t.rows[r][3] == "MAJOR") {
            g.major = true;
        } else {
            g.level = static_cast<int>(csv::to_int(t, r, 3));
            if (g.level < 1 || g.level > kMaxSeverity) throw ConfigError(t.source, t.row_lines[r], "level outside [1, 5]");
        }
        if (!out.emplace(g.channel, g).second) {
            throw ConfigError(t.source, t.row_lines[r], "duplicate channel_id " + std::to_string(id));
        }
    }
    return out;
}

} // namespace fdd
