#include "fdd/service.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace fdd;

namespace {

constexpr std::size_t kChannels = 768;
constexpr std::size_t kRings = 4;

const std::vector<LabeledCase>& campaign_cases() {
    static const auto cases = [] {
        TrainingPlan p;
        p.n_channels = kChannels;
        p.rings = kRings;
        p.major_per_round = 20;
        p.per_level_per_type = 10;
        return training_campaign(p);
    }();
    return cases;
}

const Forest& small_forest() {
    static const Forest f = [] {
        ForestConfig cfg;
        cfg.n_trees = 20;
        cfg.seed = 9;
        return train_forest(to_samples(campaign_cases()), cfg);
    }();
    return f;
}

// Campaign ground truth as bootstrap history, as the serve command does.
void bootstrap(HistoryStore& store) {
    std::vector<std::pair<FeatureVector, Label>> cases;
    std::vector<ChannelId> channels;
    for (const auto& c : campaign_cases()) {
        cases.emplace_back(c.features, c.label);
        channels.push_back(c.channel);
    }
    store.record_bootstrap(cases, channels);
}

struct Fixture {
    testing_support::TempDir dir{"service"};
    ScannerModel nominal = build_scanner(kChannels, kRings, 31);
    ScannerModel faulted;
    std::vector<ChannelObservables> obs;
    std::unique_ptr<HistoryStore> store;

    explicit Fixture(bool seeded = true) {
        CampaignPlan cp;
        cp.seed = 32;
        cp.major_fault_count = 8;
        cp.per_level_per_type_count = 3;
        faulted = apply_campaign(nominal, plan_campaign(cp, nominal));
        obs = simulate_observables(faulted, 33);
        store = std::make_unique<HistoryStore>(dir.file("history.jsonl"));
        if (seeded) bootstrap(*store);
    }

    std::unique_ptr<FddService> service(ServiceOptions opt = {}) {
        opt.forest.n_trees = 10;
        opt.forest.seed = 1;
        return std::make_unique<FddService>(faulted.layout, obs, nominal_reference(nominal), small_forest(),
                                            default_rules(), default_fuzzy_config(), *store, opt);
    }
};

std::string first_case(const FddService& s) {
    return std::to_string(s.faults().body.at(0).at("case_id").get<std::uint64_t>());
}

} // namespace

TEST(Service, FaultListIsRankedAndBackedByCases) {
    Fixture fx;
    auto s = fx.service();
    const auto r = s->faults();
    EXPECT_EQ(r.status, 200);
    ASSERT_GE(r.body.size(), 8u);
    for (std::size_t i = 0; i < r.body.size(); ++i) {
        EXPECT_EQ(r.body[i]["rank"], i + 1);
        EXPECT_FALSE(r.body[i]["case_id"].is_null());
    }
    EXPECT_EQ(fx.store->size(), campaign_cases().size() + r.body.size());
}

TEST(Service, RestartReusesCases) {
    Fixture fx;
    const auto before = fx.service()->faults().body;
    const auto n = fx.store->size();
    const auto after = fx.service()->faults().body;
    EXPECT_EQ(fx.store->size(), n);
    EXPECT_EQ(before, after);
}

TEST(Service, ChannelDetail) {
    Fixture fx;
    auto s = fx.service();
    EXPECT_EQ(s->channel_detail("abc").status, 400);
    EXPECT_EQ(s->channel_detail("-1").status, 400);
    EXPECT_EQ(s->channel_detail("768").status, 404);

    const auto id = s->faults().body.at(0).at("channel_id").get<std::size_t>();
    const auto r = s->channel_detail(std::to_string(id));
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body["features"].size(), kFeatureCount);
    EXPECT_TRUE(r.body["detected"].get<bool>());
    double total = 0;
    for (const auto& [k, v] : r.body["diagnosis"]["posterior"].items()) total += v.get<double>();
    EXPECT_NEAR(total, 1.0, 1e-12);
    const std::string summary = r.body["diagnosis"]["summary"];
    EXPECT_NE(summary.find("%)"), std::string::npos);

    const auto healthy = s->channel_detail("0");
    EXPECT_EQ(healthy.status, 200);
}

TEST(Service, Map) {
    Fixture fx;
    const auto r = fx.service()->map();
    EXPECT_EQ(r.body["rings"], kRings);
    EXPECT_EQ(r.body["channels_per_ring"], kChannels / kRings);
    EXPECT_EQ(r.body["cells"].size(), kChannels);
}

TEST(Service, VerdictValidation) {
    Fixture fx;
    auto s = fx.service();
    const auto id = first_case(*s);
    EXPECT_EQ(s->verdict("x", R"({"verdict":"CONFIRMED"})").status, 400);
    EXPECT_EQ(s->verdict(id, "{not json").status, 400);
    EXPECT_EQ(s->verdict(id, R"({})").body["field"], "verdict");
    EXPECT_EQ(s->verdict(id, R"({"verdict":"MAYBE"})").status, 400);
    EXPECT_EQ(s->verdict(id, R"({"verdict":"UNREVIEWED"})").status, 400);

    const auto missing = s->verdict(id, R"({"verdict":"INFIRMED"})");
    EXPECT_EQ(missing.status, 422);
    EXPECT_EQ(missing.body["field"], "corrected_label");
    EXPECT_EQ(s->verdict(id, R"({"verdict":"INFIRMED","corrected_label":{"class":"HEALTHY","severity":3}})").status,
              422);
    EXPECT_EQ(s->verdict(id, R"({"verdict":"INFIRMED","corrected_label":{"class":"NOPE","severity":1}})").status, 422);
    EXPECT_EQ(s->verdict("999999", R"({"verdict":"CONFIRMED"})").status, 404);
    EXPECT_EQ(fx.store->labels_since_retrain(), 0u);
}

TEST(Service, VerdictIsRecordedAndIdempotent) {
    Fixture fx;
    auto s = fx.service();
    const auto id = first_case(*s);
    const auto r = s->verdict(id, R"({"verdict":"INFIRMED","corrected_label":{"class":"HEALTHY","severity":0}})");
    ASSERT_EQ(r.status, 200);
    EXPECT_EQ(r.body["verdict"], "INFIRMED");
    EXPECT_EQ(r.body["corrected_label"]["class"], "HEALTHY");
    const auto bytes = std::filesystem::file_size(fx.dir.file("history.jsonl"));
    EXPECT_EQ(s->verdict(id, R"({"verdict":"INFIRMED","corrected_label":{"class":"HEALTHY","severity":0}})").status,
              200);
    EXPECT_EQ(std::filesystem::file_size(fx.dir.file("history.jsonl")), bytes);
    EXPECT_EQ(fx.store->labels_since_retrain(), 1u);

    const auto listed = s->cases().body;
    EXPECT_EQ(listed["training_view_size"], campaign_cases().size() + 1);
    EXPECT_EQ(listed["cases"].size(), s->faults().body.size());
    EXPECT_EQ(s->cases(true).body["cases"].size(), fx.store->size());
}

TEST(Service, RetrainWithoutLabelsConflicts) {
    Fixture fx(false);
    auto s = fx.service();
    const auto r = s->retrain();
    EXPECT_EQ(r.status, 409);
    EXPECT_TRUE(r.body.contains("error"));
}

TEST(Service, RetrainSwapsForest) {
    Fixture fx;
    auto s = fx.service();
    const auto old_forest = s->snapshot()->forest->hash();
    for (const auto& f : s->faults().body) {
        s->verdict(std::to_string(f["case_id"].get<std::uint64_t>()), R"({"verdict":"CONFIRMED"})");
    }
    const auto r = s->retrain();
    ASSERT_EQ(r.status, 200);
    EXPECT_NE(r.body["forest"], old_forest);
    EXPECT_EQ(s->snapshot()->forest->hash(), r.body["forest"]);
    EXPECT_EQ(fx.store->labels_since_retrain(), 0u);
}

TEST(Service, AutoRetrainAfterEnoughLabels) {
    Fixture fx;
    ServiceOptions opt;
    opt.auto_retrain_every = 2;
    auto s = fx.service(opt);
    const auto faults = s->faults().body;
    const auto a = s->verdict(std::to_string(faults[0]["case_id"].get<std::uint64_t>()), R"({"verdict":"CONFIRMED"})");
    EXPECT_FALSE(a.body.contains("retrained"));
    const auto b = s->verdict(std::to_string(faults[1]["case_id"].get<std::uint64_t>()), R"({"verdict":"CONFIRMED"})");
    ASSERT_TRUE(b.body.contains("retrained"));
    EXPECT_EQ(b.body["retrained"]["training_samples"], campaign_cases().size() + 2);
}

TEST(Service, SnapshotSurvivesRetrain) {
    Fixture fx;
    auto s = fx.service();
    const auto held = s->snapshot();
    s->verdict(first_case(*s), R"({"verdict":"CONFIRMED"})");
    ASSERT_EQ(s->retrain().status, 200);
    EXPECT_NE(held.get(), s->snapshot().get());
    EXPECT_FALSE(held->result.ranking.empty());
}

TEST(Service, HttpRoutes) {
    Fixture fx;
    auto s = fx.service();
    httplib::Server server;
    s->bind(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto faults = client.Get("/api/faults");
    ASSERT_TRUE(faults);
    EXPECT_EQ(faults->status, 200);
    const auto list = nlohmann::json::parse(faults->body);
    EXPECT_EQ(client.Get("/api/channels/zz")->status, 400);
    EXPECT_EQ(client.Get("/api/channels/5000")->status, 404);
    EXPECT_EQ(client.Get("/api/map")->status, 200);
    EXPECT_EQ(client.Get("/api/cases")->status, 200);

    const std::string path = "/api/cases/" + std::to_string(list[0]["case_id"].get<std::uint64_t>()) + "/verdict";
    EXPECT_EQ(client.Post(path, R"({"verdict":"INFIRMED"})", "application/json")->status, 422);
    EXPECT_EQ(client.Post(path, R"({"verdict":"CONFIRMED"})", "application/json")->status, 200);
    EXPECT_EQ(client.Post("/api/retrain", "", "application/json")->status, 200);

    server.stop();
    t.join();
}
