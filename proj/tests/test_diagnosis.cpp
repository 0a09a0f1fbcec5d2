#include "fdd/diagnosis.hpp"
#include "fdd/pipeline.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fdd;

namespace {

ForestVote vote(std::initializer_list<std::pair<DiagnosisClass, std::size_t>> votes, int severity = 3) {
    ForestVote v;
    for (const auto& [c, k] : votes) {
        v.votes[class_index(c)] = k;
        v.n_trees += k;
    }
    std::size_t best = 0;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        v.posterior[c] = static_cast<double>(v.votes[c]) / static_cast<double>(v.n_trees);
        if (v.votes[c] > v.votes[best]) best = c;
    }
    v.argmax = static_cast<DiagnosisClass>(best);
    v.severity = v.argmax == DiagnosisClass::Healthy ? kNoSeverity : severity;
    return v;
}

Diagnosis with_probability(DiagnosisClass c, double p) {
    Diagnosis d;
    d.cls = c;
    d.probability = p;
    return d;
}

FeatureVector weak_low_gain() {
    FeatureVector x;
    x[Feature::Drift] = -0.8;
    x[Feature::Strength] = 0.2;
    x[Feature::Health] = 0.3;
    x[Feature::PhotopeakAdc] = 51.0;
    x[Feature::CountRate] = 160.0;
    x[Feature::EnergyResPct] = 31.0;
    return x;
}

} // namespace

TEST(Merge, WorkedExampleString) {
    const auto es = default_rules().infer(weak_low_gain());
    const auto d = merge(channel(12), vote({{DiagnosisClass::IncreaseBias, 96}, {DiagnosisClass::Healthy, 4}}), es);
    EXPECT_EQ(d.summary(),
              "Increase Polarization (96%): Channel has a calibration problem (channel LYSO photopeak drift is high), "
              "channel is weak (strength is low, identification is failed, energy is failed), channel is not "
              "saturated and polarization increase is safe.");
    EXPECT_TRUE(d.from_forest);
    EXPECT_TRUE(d.from_rules);
    EXPECT_TRUE(d.findings.empty());
    EXPECT_EQ(d.severity, 3);
}

TEST(Merge, HealthyWithoutFindings) {
    const auto d = merge(channel(0), vote({{DiagnosisClass::Healthy, 9}, {DiagnosisClass::IncreaseBias, 1}}), {});
    EXPECT_EQ(d.cls, DiagnosisClass::Healthy);
    EXPECT_EQ(d.severity, kNoSeverity);
    EXPECT_DOUBLE_EQ(d.probability, 0.9);
    EXPECT_EQ(d.explanation, "no findings");
    EXPECT_FALSE(d.from_rules);
}

TEST(Merge, ForestClassWinsAndRuleConclusionIsKept) {
    InferenceResult es;
    es.conclusions.push_back({DiagnosisClass::DecreaseNoiseThreshold, {"starved"}, {"channel is starved"}});
    const auto d = merge(channel(3),
                         vote({{DiagnosisClass::IncreaseBias, 8}, {DiagnosisClass::DecreaseNoiseThreshold, 2}}), es);
    EXPECT_EQ(d.cls, DiagnosisClass::IncreaseBias);
    EXPECT_DOUBLE_EQ(d.probability, 0.8);
    ASSERT_EQ(d.findings.size(), 1u);
    EXPECT_EQ(d.findings[0].cls, DiagnosisClass::DecreaseNoiseThreshold);
    EXPECT_DOUBLE_EQ(d.findings[0].probability, 0.2);
    EXPECT_NE(d.explanation.find("Additional findings: "), std::string::npos);
    EXPECT_NE(d.explanation.find("channel is starved."), std::string::npos);
}

TEST(Merge, HealthyForestKeepsRuleFault) {
    InferenceResult es;
    es.conclusions.push_back({DiagnosisClass::IncreaseBias, {"r"}, {"gain is low"}});
    const auto d = merge(channel(3), vote({{DiagnosisClass::Healthy, 7}, {DiagnosisClass::IncreaseBias, 3}}), es);
    EXPECT_EQ(d.cls, DiagnosisClass::Healthy);
    ASSERT_EQ(d.findings.size(), 1u);
    EXPECT_DOUBLE_EQ(d.findings[0].probability, 0.3);
    EXPECT_FALSE(detect(d));
}

TEST(Merge, NeverDropsAConclusion) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto rules = default_rules();
    for (int i = 0; i < 500; ++i) {
        FeatureVector x = weak_low_gain();
        x[Feature::Drift] = u(rng);
        x[Feature::Strength] = std::abs(u(rng));
        x[Feature::Saturated] = u(rng) > 0.5;
        x[Feature::IdentPass] = u(rng) > 0.0;
        x[Feature::PhotopeakAdc] = 256.0 * (1.0 + x[Feature::Drift]);
        const auto es = rules.infer(x);
        const auto d = merge(channel(0), vote({{DiagnosisClass::DecreaseBias, 6}, {DiagnosisClass::Healthy, 4}}), es);
        std::size_t covered = d.findings.size() + (es.find(d.cls) ? 1 : 0);
        EXPECT_EQ(covered, es.conclusions.size());
        if (!es.fired.empty()) EXPECT_FALSE(d.explanation.empty());
    }
}

TEST(Detect, ThresholdIsInclusive) {
    EXPECT_TRUE(detect(with_probability(DiagnosisClass::IncreaseBias, 0.70)));
    EXPECT_FALSE(detect(with_probability(DiagnosisClass::IncreaseBias, 0.699)));
    EXPECT_FALSE(detect(with_probability(DiagnosisClass::Healthy, 0.99)));
}

TEST(Detect, RejectsOutOfRangeThresholds) {
    const auto d = with_probability(DiagnosisClass::IncreaseBias, 0.9);
    EXPECT_THROW(detect(d, 1.01), ValidationError);
    EXPECT_THROW(detect(d, 0.0), ValidationError);
    EXPECT_NO_THROW(detect(d, 1.0));
}

TEST(Detect, MonotoneInThreshold) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const auto d = with_probability(i % 5 == 0 ? DiagnosisClass::Healthy : DiagnosisClass::DecreaseBias, u(rng));
        const double t = std::max(1e-6, u(rng));
        if (detect(d, t)) {
            for (double lower : {t * 0.5, t * 0.9, t}) EXPECT_TRUE(detect(d, std::max(lower, 1e-9)));
        }
    }
}

TEST(DiagnoseAll, NominalScannerHasNoFaults) {
    const auto nominal = build_scanner(kDefaultChannels, kDefaultRings, 42);
    const auto refs = nominal_reference(nominal);
    TrainingPlan plan;
    plan.rounds = 1;
    plan.n_channels = 768;
    plan.rings = 4;
    plan.major_per_round = 60;
    plan.per_level_per_type = 20;
    ForestConfig fc;
    fc.n_trees = 30;
    const Forest forest = train_forest(to_samples(training_campaign(plan)), fc);

    // Exactly nominal response: every channel HEALTHY.
    std::vector<ChannelObservables> exact;
    for (std::size_t i = 0; i < nominal.size(); ++i) exact.push_back(expected_observables(nominal, channel(i)));
    const auto r = diagnose_all(analyze(exact, refs).features, forest, default_rules());
    EXPECT_EQ(r.diagnoses.size(), kDefaultChannels);
    EXPECT_TRUE(r.faults.empty());
    for (const auto& d : r.diagnoses) EXPECT_EQ(d.cls, DiagnosisClass::Healthy);

    // Measurement noise alone raises at most a handful of alarms.
    const auto noisy = diagnose_all(analyze(simulate_observables(nominal, 1), refs).features, forest, default_rules());
    EXPECT_LE(noisy.faults.size(), kDefaultChannels / 100);

    // A MAJOR fault on one channel is detected as INCREASE_BIAS.
    const auto faulted = inject_fault(nominal, channel(1234), FaultSpec::major_fault());
    const auto b = analyze(simulate_observables(faulted, 1), refs);
    const auto rb = diagnose_all(b.features, forest, default_rules());
    EXPECT_TRUE(rb.detected[1234]);
    EXPECT_EQ(rb.diagnoses[1234].cls, DiagnosisClass::IncreaseBias);
}

TEST(DiagnoseAll, ErrorsPropagate) {
    const Forest f = Forest::from_trees({DecisionTree{{TreeNode{}}}}, kFeatureCount);
    std::vector<FeatureVector> x(1);
    x[0][Feature::Drift] = std::nan("");
    EXPECT_THROW(diagnose_all(x, f, default_rules()), ValidationError);
    EXPECT_THROW(diagnose_all({}, f, default_rules(), 1.01), ValidationError);
    const Forest narrow = Forest::from_trees({DecisionTree{{TreeNode{}}}}, 2);
    EXPECT_THROW(diagnose_all(std::vector<FeatureVector>(1), narrow, default_rules()), ValidationError);
}

TEST(DiagnosisCsv, RoundTrip) {
    DiagnoseResult r;
    auto d = merge(channel(0), vote({{DiagnosisClass::IncreaseBias, 96}, {DiagnosisClass::Healthy, 4}}),
                   default_rules().infer(weak_low_gain()));
    r.diagnoses.push_back(d);
    r.detected.push_back(true);
    r.diagnoses.push_back(merge(channel(1), vote({{DiagnosisClass::Healthy, 1}}), {}));
    r.detected.push_back(false);
    const auto rows = parse_diagnoses(csv::parse(diagnosis_csv(r).str()));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].explanation, d.explanation);
    EXPECT_EQ(rows[0].cls, DiagnosisClass::IncreaseBias);
    EXPECT_EQ(rows[0].severity, 3);
    EXPECT_DOUBLE_EQ(rows[0].probability, 0.96);
    EXPECT_TRUE(rows[0].detected);
    EXPECT_EQ(rows[1].severity, kNoSeverity);
}
