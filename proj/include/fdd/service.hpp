#pragma once

// HTTP/JSON service for the operator loop: fault list, channel detail, map,
// case list, verdict intake and retraining. Handlers are plain functions on
// FddService so they can be exercised without a socket.

#include "fdd/core.hpp"
#include "fdd/diagnosis.hpp"
#include "fdd/forest.hpp"
#include "fdd/history.hpp"
#include "fdd/pipeline.hpp"
#include "fdd/prioritize.hpp"
#include "fdd/rules.hpp"
#include "fdd/scanner_sim.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace fdd {

struct ApiResponse {
    int status = 200;
    nlohmann::ordered_json body;
};

/// Immutable view of one pipeline result; replaced wholesale on retrain.
struct ServiceSnapshot {
    std::shared_ptr<const Forest> forest;
    PipelineResult result;
    std::map<ChannelId, std::uint64_t> case_of; // detected faults only
};

struct ServiceOptions {
    PipelineOptions pipeline;
    ForestConfig forest;
    std::size_t auto_retrain_every = HistoryStore::kDefaultRetrainEvery; // 0 disables
};

class FddService {
public:
    FddService(ScannerLayout layout, std::vector<ChannelObservables> obs, std::vector<ReferenceBaseline> refs,
               Forest forest, RuleSet rules, FuzzyConfig fuzzy, HistoryStore& store, ServiceOptions opt = {})
        : layout_(std::move(layout)),
          obs_(std::move(obs)),
          refs_(std::move(refs)),
          rules_(std::move(rules)),
          fuzzy_(std::move(fuzzy)),
          store_(store),
          opt_(std::move(opt)) {
        std::lock_guard write(write_mutex_);
        publish(build(std::make_shared<const Forest>(std::move(forest))));
    }

    std::shared_ptr<const ServiceSnapshot> snapshot() const {
        std::lock_guard lock(snapshot_mutex_);
        return snapshot_;
    }

    // ---- GET ------------------------------------------------------------

    ApiResponse faults() const {
        const auto snap = snapshot();
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& r : snap->result.ranking) out.push_back(fault_json(*snap, r));
        return {200, std::move(out)};
    }

    ApiResponse channel_detail(const std::string& id_text) const {
        const auto snap = snapshot();
        std::size_t id = 0;
        auto res = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (res.ec != std::errc{} || res.ptr != id_text.data() + id_text.size()) {
            return error(400, "channel id must be a non-negative integer");
        }
        if (id >= layout_.size()) return error(404, "no channel " + id_text);
        const ChannelId ch = channel(id);
        const auto& r = snap->result;
        const auto& d = r.diagnosis.diagnoses[id];
        const auto g = layout_.geometry(ch);
        nlohmann::ordered_json features;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            features[std::string(kFeatureNames[f])] = r.analysis.features[id].values[f];
        }
        nlohmann::ordered_json posterior;
        for (auto c : kAllClasses) posterior[std::string(to_string(c))] = d.posterior[class_index(c)];
        nlohmann::ordered_json findings = nlohmann::ordered_json::array();
        for (const auto& f : d.findings) {
            findings.push_back({{"class", to_string(f.cls)}, {"probability", f.probability}, {"rules", f.rule_ids},
                                {"sentences", f.sentences}});
        }
        const auto& p = r.priority_all[id];
        nlohmann::ordered_json out = {
            {"channel_id", id},
            {"ring", g.ring},
            {"axial", g.axial},
            {"features", std::move(features)},
            {"diagnosis",
             {{"class", to_string(d.cls)},
              {"severity", d.severity == kNoSeverity ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(d.severity)},
              {"probability", d.probability},
              {"summary", d.summary()},
              {"explanation", d.explanation},
              {"rules", d.rule_ids},
              {"findings", std::move(findings)},
              {"posterior", std::move(posterior)},
              {"sources", {{"forest", d.from_forest}, {"rules", d.from_rules}}}}},
            {"detected", static_cast<bool>(r.diagnosis.detected[id])},
            {"priority", p.priority},
            {"cluster_id", p.cluster_id},
            {"cluster_size", p.cluster_size},
            {"health", p.health}};
        auto it = snap->case_of.find(ch);
        out["case_id"] = it == snap->case_of.end() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(it->second);
        return {200, std::move(out)};
    }

    ApiResponse map() const {
        const auto snap = snapshot();
        const auto& r = snap->result;
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < layout_.size(); ++i) {
            const auto g = layout_.geometry(channel(i));
            cells.push_back({{"channel_id", i},
                             {"ring", g.ring},
                             {"axial", g.axial},
                             {"x", g.x},
                             {"y", g.y},
                             {"health", r.analysis.health[i]},
                             {"detected", static_cast<bool>(r.diagnosis.detected[i])},
                             {"cluster_id", r.priority_all[i].cluster_id}});
        }
        return {200,
                {{"rings", layout_.rings()},
                 {"channels_per_ring", layout_.channels_per_ring()},
                 {"wraps", "axial"},
                 {"cells", std::move(cells)}}};
    }

    ApiResponse cases(bool include_bootstrap = false) const {
        nlohmann::ordered_json list = nlohmann::ordered_json::array();
        for (const auto& r : store_.records()) {
            if (r.bootstrap && !include_bootstrap) continue;
            list.push_back(case_json(r));
        }
        return {200,
                {{"cases", std::move(list)},
                 {"training_view_size", store_.training_view().size()},
                 {"labels_since_retrain", store_.labels_since_retrain()}}};
    }

    // ---- POST -----------------------------------------------------------

    ApiResponse verdict(const std::string& id_text, const std::string& body) {
        std::uint64_t id = 0;
        auto res = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
        if (res.ec != std::errc{} || res.ptr != id_text.data() + id_text.size()) {
            return error(400, "case id must be a positive integer");
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception&) {
            return error(400, "request body is not valid JSON");
        }
        if (!j.is_object() || !j.contains("verdict") || !j["verdict"].is_string()) {
            return field_error(400, "verdict", "required string field");
        }
        const auto v = parse_verdict(j["verdict"].get<std::string>());
        if (!v || *v == Verdict::Unreviewed) return field_error(400, "verdict", "must be CONFIRMED or INFIRMED");

        std::optional<Label> corrected;
        const bool has_correction = j.contains("corrected_label") && !j["corrected_label"].is_null();
        if (*v == Verdict::Infirmed && !has_correction) {
            return field_error(422, "corrected_label", "required when verdict is INFIRMED");
        }
        if (*v == Verdict::Infirmed) {
            try {
                corrected = history_json::label(j["corrected_label"]);
            } catch (const std::exception& e) {
                return field_error(422, "corrected_label", std::string("invalid label: ") + e.what());
            }
        }

        std::lock_guard write(write_mutex_);
        FaultRecord updated;
        try {
            updated = store_.apply_verdict(id, *v, corrected);
        } catch (const NotFoundError& e) {
            return error(404, e.what());
        } catch (const ValidationError& e) {
            return field_error(422, "corrected_label", e.what());
        }
        nlohmann::ordered_json out = case_json(updated);
        if (opt_.auto_retrain_every > 0 && store_.retrain_due(opt_.auto_retrain_every)) {
            out["retrained"] = retrain_locked().body;
        }
        return {200, std::move(out)};
    }

    ApiResponse retrain() {
        std::lock_guard write(write_mutex_);
        return retrain_locked();
    }

    /// Registers the routes on an httplib server.
    void bind(httplib::Server& server) {
        const auto send = [](httplib::Response& res, const ApiResponse& r) {
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json; charset=utf-8");
        };
        server.Get("/api/faults", [this, send](const httplib::Request&, httplib::Response& res) { send(res, faults()); });
        server.Get(R"(/api/channels/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, channel_detail(req.matches[1]));
        });
        server.Get("/api/map", [this, send](const httplib::Request&, httplib::Response& res) { send(res, map()); });
        server.Get("/api/cases", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, cases(req.has_param("include_bootstrap") && req.get_param_value("include_bootstrap") == "1"));
        });
        server.Post(R"(/api/cases/([^/]+)/verdict)", [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, verdict(req.matches[1], req.body));
        });
        server.Post("/api/retrain", [this, send](const httplib::Request&, httplib::Response& res) { send(res, retrain()); });
        server.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            try {
                std::rethrow_exception(ep);
            } catch (const std::exception& e) {
                send(res, error(500, e.what()));
            } catch (...) {
                send(res, error(500, "unknown error"));
            }
        });
    }

private:
    static ApiResponse error(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

    static ApiResponse field_error(int status, const std::string& field, const std::string& msg) {
        return {status, {{"error", msg}, {"field", field}}};
    }

    static nlohmann::ordered_json case_json(const FaultRecord& r) {
        return {{"case_id", r.case_id},
                {"channel_id", index_of(r.channel)},
                {"proposed",
                 {{"class", to_string(r.proposed.label.cls)},
                  {"severity", r.proposed.label.severity},
                  {"probability", r.proposed.probability},
                  {"explanation", r.proposed.explanation}}},
                {"verdict", to_string(r.verdict)},
                {"corrected_label",
                 r.corrected_label ? nlohmann::ordered_json{{"class", to_string(r.corrected_label->cls)},
                                                            {"severity", r.corrected_label->severity}}
                                   : nlohmann::ordered_json(nullptr)},
                {"timestamp", r.timestamp},
                {"bootstrap", r.bootstrap}};
    }

    nlohmann::ordered_json fault_json(const ServiceSnapshot& snap, const RankedFault& r) const {
        const auto& d = snap.result.diagnosis.diagnoses[index_of(r.channel)];
        auto it = snap.case_of.find(r.channel);
        return {{"rank", r.rank},
                {"channel_id", index_of(r.channel)},
                {"priority", r.priority},
                {"cluster_id", r.cluster_id},
                {"cluster_size", r.cluster_size},
                {"health", r.health},
                {"class", to_string(d.cls)},
                {"severity", d.severity},
                {"probability", d.probability},
                {"explanation", d.explanation},
                {"case_id", it == snap.case_of.end() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(it->second)}};
    }

    /// Runs the pipeline with the given forest and records a case for each
    /// detected fault, reusing an existing case with identical features.
    std::shared_ptr<const ServiceSnapshot> build(std::shared_ptr<const Forest> forest) {
        auto snap = std::make_shared<ServiceSnapshot>();
        snap->forest = std::move(forest);
        snap->result = run_pipeline(layout_, obs_, refs_, *snap->forest, rules_, fuzzy_, opt_.pipeline);
        std::map<std::pair<ChannelId, FeatureVector::Values>, std::uint64_t> existing;
        for (const auto& rec : store_.records()) {
            if (!rec.bootstrap) existing.emplace(std::make_pair(rec.channel, rec.features.values), rec.case_id);
        }
        for (auto ch : snap->result.diagnosis.faults) {
            const auto& d = snap->result.diagnosis.diagnoses[index_of(ch)];
            const auto& x = snap->result.analysis.features[index_of(ch)];
            auto it = existing.find({ch, x.values});
            if (it != existing.end()) {
                snap->case_of[ch] = it->second;
                continue;
            }
            FaultRecord rec;
            rec.channel = ch;
            rec.features = x;
            rec.proposed = {{d.cls, d.severity}, d.probability, d.explanation};
            snap->case_of[ch] = store_.record_case(std::move(rec));
        }
        return snap;
    }

    void publish(std::shared_ptr<const ServiceSnapshot> snap) {
        std::lock_guard lock(snapshot_mutex_);
        snapshot_ = std::move(snap);
    }

    ApiResponse retrain_locked() {
        const auto view = store_.training_view();
        ForestConfig cfg = opt_.forest;
        Forest forest;
        try {
            forest = train_forest(view, cfg);
        } catch (const TrainingError& e) {
            return error(409, e.what());
        }
        const std::string hash = forest.hash();
        auto snap = build(std::make_shared<const Forest>(std::move(forest)));
        const std::size_t n_faults = snap->result.ranking.size();
        publish(std::move(snap));
        store_.mark_retrained(hash);
        return {200, {{"forest", hash}, {"training_samples", view.size()}, {"faults", n_faults}}};
    }

    ScannerLayout layout_;
    std::vector<ChannelObservables> obs_;
    std::vector<ReferenceBaseline> refs_;
    RuleSet rules_;
    FuzzyConfig fuzzy_;
    HistoryStore& store_;
    ServiceOptions opt_;

    std::mutex write_mutex_; // verdicts and retraining
    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const ServiceSnapshot> snapshot_;
};

} // namespace fdd
