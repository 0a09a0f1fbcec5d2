#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fdd {

/// Index of an acquisition channel, in [0, N).
enum class ChannelId : std::uint32_t {};

constexpr ChannelId channel(std::size_t index) noexcept {
    return static_cast<ChannelId>(static_cast<std::uint32_t>(index));
}
constexpr std::size_t index_of(ChannelId id) noexcept {
    return static_cast<std::size_t>(id);
}

// ---------------------------------------------------------------------------
// Errors. Each pipeline stage throws its own type so the CLI can map them
// onto exit codes.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LayoutError : public Error {
public:
    using Error::Error;
};

class ExtractionError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

class InferenceError : public Error {
public:
    using Error::Error;
};

class MetricError : public Error {
public:
    using Error::Error;
};

class StorageError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration file; carries the source name and 1-based line.
class ConfigError : public Error {
public:
    ConfigError(std::string source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what),
          source_(std::move(source)),
          line_(line) {}

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string source_;
    std::size_t line_;
};

// ---------------------------------------------------------------------------
// Fault vocabulary shared by the simulator, the diagnosis stage and metrics.
// ---------------------------------------------------------------------------

enum class FaultType : std::uint8_t { BiasShift, NoiseThresholdShift };
enum class Direction : std::uint8_t { Increase, Decrease };

/// Corrective action proposed for a channel. Declaration order is the
/// tie-break order for equal forest votes (HEALTHY last).
enum class DiagnosisClass : std::uint8_t {
    DecreaseBias,
    DecreaseNoiseThreshold,
    IncreaseBias,
    IncreaseNoiseThreshold,
    Healthy,
};

inline constexpr std::size_t kClassCount = 5;
inline constexpr std::array<DiagnosisClass, kClassCount> kAllClasses = {
    DiagnosisClass::DecreaseBias, DiagnosisClass::DecreaseNoiseThreshold,
    DiagnosisClass::IncreaseBias, DiagnosisClass::IncreaseNoiseThreshold,
    DiagnosisClass::Healthy};

/// Severity 0 stands for NONE (healthy channels).
inline constexpr int kNoSeverity = 0;
inline constexpr int kMaxSeverity = 5;

constexpr std::size_t class_index(DiagnosisClass c) noexcept {
    return static_cast<std::size_t>(c);
}

inline std::string_view to_string(FaultType t) {
    return t == FaultType::BiasShift ? "BiasShift" : "NoiseThresholdShift";
}

inline std::string_view to_string(Direction d) {
    return d == Direction::Increase ? "increase" : "decrease";
}

inline std::string_view to_string(DiagnosisClass c) {
    switch (c) {
    case DiagnosisClass::DecreaseBias: return "DECREASE_BIAS";
    case DiagnosisClass::DecreaseNoiseThreshold: return "DECREASE_NOISE_THRESHOLD";
    case DiagnosisClass::IncreaseBias: return "INCREASE_BIAS";
    case DiagnosisClass::IncreaseNoiseThreshold: return "INCREASE_NOISE_THRESHOLD";
    case DiagnosisClass::Healthy: return "HEALTHY";
    }
    return "HEALTHY";
}

/// Operator-facing wording ("Increase Polarization (96%)").
inline std::string_view display_name(DiagnosisClass c) {
    switch (c) {
    case DiagnosisClass::DecreaseBias: return "Decrease Polarization";
    case DiagnosisClass::DecreaseNoiseThreshold: return "Decrease Noise Threshold";
    case DiagnosisClass::IncreaseBias: return "Increase Polarization";
    case DiagnosisClass::IncreaseNoiseThreshold: return "Increase Noise Threshold";
    case DiagnosisClass::Healthy: return "Healthy";
    }
    return "Healthy";
}

inline std::optional<DiagnosisClass> parse_class(std::string_view s) {
    for (auto c : kAllClasses) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

inline std::optional<FaultType> parse_fault_type(std::string_view s) {
    if (s == "BiasShift") return FaultType::BiasShift;
    if (s == "NoiseThresholdShift") return FaultType::NoiseThresholdShift;
    return std::nullopt;
}

inline std::optional<Direction> parse_direction(std::string_view s) {
    if (s == "increase") return Direction::Increase;
    if (s == "decrease") return Direction::Decrease;
    return std::nullopt;
}

/// The action that undoes a fault: a lowered bias calls for INCREASE_BIAS.
constexpr DiagnosisClass corrective_action(FaultType type, Direction dir) noexcept {
    if (type == FaultType::BiasShift) {
        return dir == Direction::Decrease ? DiagnosisClass::IncreaseBias
                                          : DiagnosisClass::DecreaseBias;
    }
    return dir == Direction::Decrease ? DiagnosisClass::IncreaseNoiseThreshold
                                      : DiagnosisClass::DecreaseNoiseThreshold;
}

/// Tree label: diagnosis class together with its severity level.
struct Label {
    DiagnosisClass cls = DiagnosisClass::Healthy;
    int severity = kNoSeverity;

    friend bool operator==(const Label&, const Label&) = default;
};

/// 64-bit FNV-1a, used for stable content hashes of serialized artifacts.
inline std::uint64_t fnv1a(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

/// splitmix64 step; derives independent stream seeds from one run seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(seed) ^ (stream * 0xd1342543de82ef95ULL));
}

} // namespace fdd
