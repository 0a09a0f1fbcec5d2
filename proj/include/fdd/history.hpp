#pragma once

// Fault-history database: an append-only JSON-lines log of labeled cases and
// operator verdicts. Verdicts are amendment records; the last one wins.

#include "fdd/core.hpp"
#include "fdd/features.hpp"
#include "fdd/forest.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <vector>

namespace fdd {

enum class Verdict : std::uint8_t { Unreviewed, Confirmed, Infirmed };

inline std::string_view to_string(Verdict v) {
    switch (v) {
    case Verdict::Unreviewed: return "UNREVIEWED";
    case Verdict::Confirmed: return "CONFIRMED";
    case Verdict::Infirmed: return "INFIRMED";
    }
    return "UNREVIEWED";
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
    for (auto v : {Verdict::Unreviewed, Verdict::Confirmed, Verdict::Infirmed}) {
        if (to_string(v) == s) return v;
    }
    return std::nullopt;
}

/// What the system proposed when the case was recorded.
struct Proposal {
    Label label;
    double probability = 0.0;
    std::string explanation;

    friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct FaultRecord {
    std::uint64_t case_id = 0;
    ChannelId channel{};
    FeatureVector features;
    Proposal proposed;
    Verdict verdict = Verdict::Unreviewed;
    std::optional<Label> corrected_label;
    std::int64_t timestamp = 0;
    bool bootstrap = false; // from a simulated training campaign

    /// Label used for training; empty while unreviewed.
    std::optional<Label> training_label() const {
        switch (verdict) {
        case Verdict::Confirmed: return proposed.label;
        case Verdict::Infirmed: return corrected_label;
        case Verdict::Unreviewed: break;
        }
        return std::nullopt;
    }

    friend bool operator==(const FaultRecord&, const FaultRecord&) = default;
};

inline void check_label(const Label& l) {
    if (l.cls == DiagnosisClass::Healthy) {
        if (l.severity != kNoSeverity) throw ValidationError("HEALTHY carries no severity");
    } else if (l.severity < 1 || l.severity > kMaxSeverity) {
        throw ValidationError("severity must lie in [1, 5] for " + std::string(to_string(l.cls)));
    }
}

inline std::int64_t epoch_seconds() {
    return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

namespace history_json {

using nlohmann::json;

inline json label(const Label& l) { return {{"class", to_string(l.cls)}, {"severity", l.severity}}; }

inline Label label(const json& j) {
    auto c = parse_class(j.at("class").get<std::string>());
    if (!c) throw std::invalid_argument("unknown class");
    Label l{*c, j.at("severity").get<int>()};
    check_label(l);
    return l;
}

inline json case_line(const FaultRecord& r) {
    json features = json::array();
    for (double v : r.features.values) features.push_back(v);
    return {{"type", "case"},
            {"case_id", r.case_id},
            {"channel", index_of(r.channel)},
            {"features", std::move(features)},
            {"proposed",
             {{"class", to_string(r.proposed.label.cls)},
              {"severity", r.proposed.label.severity},
              {"probability", r.proposed.probability},
              {"explanation", r.proposed.explanation}}},
            {"verdict", to_string(r.verdict)},
            {"corrected", r.corrected_label ? label(*r.corrected_label) : json(nullptr)},
            {"timestamp", r.timestamp},
            {"bootstrap", r.bootstrap}};
}

inline FaultRecord case_record(const json& j) {
    FaultRecord r;
    r.case_id = j.at("case_id").get<std::uint64_t>();
    r.channel = channel(j.at("channel").get<std::size_t>());
    const auto& f = j.at("features");
    if (!f.is_array() || f.size() != kFeatureCount) throw std::invalid_argument("features must hold 9 numbers");
    for (std::size_t i = 0; i < kFeatureCount; ++i) r.features.values[i] = f[i].get<double>();
    const auto& p = j.at("proposed");
    r.proposed.label = label(p);
    r.proposed.probability = p.at("probability").get<double>();
    r.proposed.explanation = p.at("explanation").get<std::string>();
    auto v = parse_verdict(j.at("verdict").get<std::string>());
    if (!v) throw std::invalid_argument("unknown verdict");
    r.verdict = *v;
    if (!j.at("corrected").is_null()) r.corrected_label = label(j.at("corrected"));
    r.timestamp = j.at("timestamp").get<std::int64_t>();
    r.bootstrap = j.value("bootstrap", false);
    return r;
}

} // namespace history_json

/// Single-writer, multi-reader store. Every mutation appends one complete
/// line with a single write; a torn trailing line from a crash is dropped
/// when the store is reopened.
class HistoryStore {
public:
    using Clock = std::function<std::int64_t()>;

    static constexpr std::size_t kDefaultRetrainEvery = 50;

    explicit HistoryStore(std::filesystem::path path, Clock clock = epoch_seconds)
        : path_(std::move(path)), clock_(std::move(clock)) {
        load();
    }

    const std::filesystem::path& path() const noexcept { return path_; }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return records_.size();
    }

    std::vector<FaultRecord> records() const {
        std::shared_lock lock(mutex_);
        std::vector<FaultRecord> out;
        out.reserve(records_.size());
        for (const auto& [id, r] : records_) out.push_back(r);
        return out;
    }

    std::optional<FaultRecord> find(std::uint64_t case_id) const {
        std::shared_lock lock(mutex_);
        auto it = records_.find(case_id);
        if (it == records_.end()) return std::nullopt;
        return it->second;
    }

    /// Appends a new case and returns its id. The id and timestamp fields of
    /// the argument are ignored.
    std::uint64_t record_case(FaultRecord record) {
        validate_new(record);
        std::unique_lock lock(mutex_);
        record.case_id = next_id_;
        record.timestamp = clock_();
        append(history_json::case_line(record).dump() + "\n");
        ++next_id_;
        if (record.verdict != Verdict::Unreviewed && !record.bootstrap) ++labels_since_retrain_;
        const auto id = record.case_id;
        records_.emplace(id, std::move(record));
        return id;
    }

    /// Stores ground-truth labeled campaign cases as confirmed records, in
    /// one write.
    std::vector<std::uint64_t> record_bootstrap(const std::vector<std::pair<FeatureVector, Label>>& cases,
                                                const std::vector<ChannelId>& channels) {
        if (cases.size() != channels.size()) throw ValidationError("bootstrap cases and channels differ in length");
        std::vector<FaultRecord> batch;
        batch.reserve(cases.size());
        for (std::size_t i = 0; i < cases.size(); ++i) {
            FaultRecord r;
            r.channel = channels[i];
            r.features = cases[i].first;
            r.proposed.label = cases[i].second;
            r.proposed.probability = 1.0;
            r.proposed.explanation = "campaign ground truth";
            r.verdict = Verdict::Confirmed;
            r.bootstrap = true;
            validate_new(r);
            batch.push_back(std::move(r));
        }
        std::unique_lock lock(mutex_);
        std::string text;
        std::vector<std::uint64_t> ids;
        const auto now = clock_();
        std::uint64_t id = next_id_;
        for (auto& r : batch) {
            r.case_id = id++;
            r.timestamp = now;
            text += history_json::case_line(r).dump() + "\n";
            ids.push_back(r.case_id);
        }
        append(text);
        next_id_ = id;
        for (auto& r : batch) records_.emplace(r.case_id, std::move(r));
        return ids;
    }

    /// Records an operator verdict. Repeating the current verdict is a no-op.
    FaultRecord apply_verdict(std::uint64_t case_id, Verdict verdict, std::optional<Label> corrected = std::nullopt) {
        if (verdict == Verdict::Unreviewed) throw ValidationError("verdict must be CONFIRMED or INFIRMED");
        if (verdict == Verdict::Infirmed && !corrected) {
            throw ValidationError("INFIRMED verdict requires corrected_label");
        }
        if (verdict == Verdict::Confirmed) corrected.reset();
        if (corrected) check_label(*corrected);

        std::unique_lock lock(mutex_);
        auto it = records_.find(case_id);
        if (it == records_.end()) throw NotFoundError("unknown case " + std::to_string(case_id));
        FaultRecord& r = it->second;
        if (r.verdict == verdict && r.corrected_label == corrected) return r;

        nlohmann::json line = {{"type", "verdict"},
                               {"case_id", case_id},
                               {"verdict", to_string(verdict)},
                               {"corrected", corrected ? history_json::label(*corrected) : nlohmann::json(nullptr)},
                               {"timestamp", clock_()}};
        append(line.dump() + "\n");
        r.verdict = verdict;
        r.corrected_label = corrected;
        ++labels_since_retrain_;
        return r;
    }

    /// Reviewed cases only (bootstrap cases are stored as confirmed).
    std::vector<TrainingSample> training_view() const {
        std::shared_lock lock(mutex_);
        std::vector<TrainingSample> out;
        for (const auto& [id, r] : records_) {
            if (auto l = r.training_label()) {
                out.push_back({std::vector<double>(r.features.values.begin(), r.features.values.end()), *l});
            }
        }
        return out;
    }

    /// Labels added or changed since the last retrain marker.
    std::size_t labels_since_retrain() const {
        std::shared_lock lock(mutex_);
        return labels_since_retrain_;
    }

    bool retrain_due(std::size_t every = kDefaultRetrainEvery) const {
        return every > 0 && labels_since_retrain() >= every;
    }

    /// Persists a retrain marker so the label counter survives restarts.
    void mark_retrained(const std::string& forest_hash) {
        std::unique_lock lock(mutex_);
        nlohmann::json line = {{"type", "retrain"}, {"forest", forest_hash}, {"timestamp", clock_()}};
        append(line.dump() + "\n");
        labels_since_retrain_ = 0;
    }

private:
    static void validate_new(const FaultRecord& r) {
        if (!r.features.finite()) throw ValidationError("case features must be finite");
        check_label(r.proposed.label);
        if (r.verdict == Verdict::Infirmed && !r.corrected_label) {
            throw ValidationError("INFIRMED verdict requires corrected_label");
        }
        if (r.corrected_label) check_label(*r.corrected_label);
    }

    void append(const std::string& text) {
        std::FILE* f = std::fopen(path_.c_str(), "ab");
        if (!f) throw StorageError("cannot open " + path_.string() + " for append");
        const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0;
        std::fclose(f);
        if (!ok) throw StorageError("write to " + path_.string() + " failed");
    }

    [[noreturn]] void corrupt(std::size_t line, const std::string& what) const {
        throw StorageError(path_.string() + ":" + std::to_string(line) + ": " + what);
    }

    void load() {
        namespace fs = std::filesystem;
        if (!fs::exists(path_)) {
            if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
            append("{\"schema\":1}\n");
            return;
        }
        std::string text;
        {
            std::ifstream in(path_, std::ios::binary);
            if (!in) throw StorageError("cannot read " + path_.string());
            std::ostringstream ss;
            ss << in.rdbuf();
            text = ss.str();
        }
        // A crash mid-append leaves a line without its newline: drop it.
        const auto last_nl = text.rfind('\n');
        const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
        if (keep != text.size()) {
            fs::resize_file(path_, keep);
            text.resize(keep);
        }
        if (text.empty()) {
            append("{\"schema\":1}\n");
            return;
        }

        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                corrupt(line_no, std::string("unparseable record: ") + e.what());
            }
            if (line_no == 1) {
                if (!j.is_object() || j.value("schema", 0) != 1) corrupt(line_no, "expected {\"schema\": 1} header");
                continue;
            }
            try {
                const std::string type = j.at("type").get<std::string>();
                if (type == "case") {
                    FaultRecord r = history_json::case_record(j);
                    if (r.case_id != next_id_) corrupt(line_no, "case id " + std::to_string(r.case_id) + " out of sequence");
                    ++next_id_;
                    if (r.verdict != Verdict::Unreviewed && !r.bootstrap) ++labels_since_retrain_;
                    records_.emplace(r.case_id, std::move(r));
                } else if (type == "verdict") {
                    const auto id = j.at("case_id").get<std::uint64_t>();
                    auto it = records_.find(id);
                    if (it == records_.end()) corrupt(line_no, "verdict for unknown case " + std::to_string(id));
                    auto v = parse_verdict(j.at("verdict").get<std::string>());
                    if (!v || *v == Verdict::Unreviewed) corrupt(line_no, "bad verdict");
                    std::optional<Label> corrected;
                    if (!j.at("corrected").is_null()) corrected = history_json::label(j.at("corrected"));
                    if (*v == Verdict::Infirmed && !corrected) corrupt(line_no, "INFIRMED without corrected label");
                    it->second.verdict = *v;
                    it->second.corrected_label = corrected;
                    ++labels_since_retrain_;
                } else if (type == "retrain") {
                    labels_since_retrain_ = 0;
                } else {
                    corrupt(line_no, "unknown record type '" + type + "'");
                }
            } catch (const StorageError&) {
                throw;
            } catch (const std::exception& e) {
                corrupt(line_no, std::string("invalid record: ") + e.what());
            }
        }
    }

    std::filesystem::path path_;
    Clock clock_;
    mutable std::shared_mutex mutex_;
    std::map<std::uint64_t, FaultRecord> records_;
    std::uint64_t next_id_ = 1;
    std::size_t labels_since_retrain_ = 0;
};

} // namespace fdd
