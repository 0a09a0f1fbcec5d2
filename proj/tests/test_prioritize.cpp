#include "fdd/prioritize.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>

using namespace fdd;

namespace {

// Independent scalar evaluation of the shipped rule base: min for AND,
// clipping implication, max aggregation, centroid over a fine grid.
double tri(double x, double a, double b, double c) {
    if (x < a || x > c) return 0.0;
    if (x == b) return 1.0;
    return x < b ? (x - a) / (b - a) : (c - x) / (c - b);
}

double trap(double x, double a, double b, double c, double d) {
    if (x < a || x > d) return 0.0;
    if (x >= b && x <= c) return 1.0;
    return x < b ? (x - a) / (b - a) : (d - x) / (d - c);
}

double reference_priority(double health, double size) {
    const std::array<double, 3> h = {tri(health, 0, 0, 0.5), tri(health, 0, 0.5, 1), tri(health, 0.5, 1, 1)};
    const std::array<double, 4> s = {trap(size, 1, 1, 3, 12), tri(size, 3, 12, 25), tri(size, 12, 25, 45),
                                     trap(size, 25, 45, 3072, 3072)};
    // rows: health LOW, MEDIUM, HIGH; columns: size SMALL..HUGE; 0=LOW..3=CRITICAL
    const int table[3][4] = {{2, 2, 3, 3}, {1, 1, 2, 3}, {0, 0, 1, 2}};
    std::array<double, 4> clip{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) clip[table[i][j]] = std::max(clip[table[i][j]], std::min(h[i], s[j]));
    }
    const int n = 200000;
    double num = 0.0;
    double den = 0.0;
    for (int k = 0; k < n; ++k) {
        const double y = (k + 0.5) / n;
        const double mu = std::max({std::min(clip[0], tri(y, 0, 0, 0.4)), std::min(clip[1], tri(y, 0.1, 0.4, 0.7)),
                                    std::min(clip[2], tri(y, 0.4, 0.7, 1)), std::min(clip[3], tri(y, 0.6, 1, 1))});
        num += y * mu;
        den += mu;
    }
    return num / den;
}

const FuzzyConfig& cfg() {
    static const FuzzyConfig c = default_fuzzy_config();
    return c;
}

} // namespace

TEST(Priority, Boundaries) {
    EXPECT_LE(compute_priority(1.0, 1, cfg()).value, 0.2);
    EXPECT_GE(compute_priority(0.0, 45, cfg()).value, 0.8);
}

TEST(Priority, FrozenPoints) {
    EXPECT_NEAR(compute_priority(0.5, 10, cfg()).value, 0.4, 1e-4);
    EXPECT_NEAR(compute_priority(0.79, 23, cfg()).value, 0.5080747557790295, 1e-4);
    EXPECT_NEAR(compute_priority(1.0, 1, cfg()).value, 0.133333, 1e-4);
    EXPECT_NEAR(compute_priority(0.0, 45, cfg()).value, 0.866667, 1e-4);
    EXPECT_NEAR(compute_priority(0.0, 1, cfg()).value, 0.7, 1e-4);
}

TEST(Priority, AgreesWithScalarReference) {
    for (double h : {0.0, 0.1, 0.33, 0.5, 0.62, 0.79, 0.95, 1.0}) {
        for (std::size_t s : {1u, 2u, 3u, 7u, 12u, 18u, 25u, 33u, 45u, 300u}) {
            EXPECT_NEAR(compute_priority(h, s, cfg()).value, reference_priority(h, static_cast<double>(s)), 2e-4)
                << "health " << h << " size " << s;
        }
    }
}

// With min for AND and max aggregation, neighbouring health (or size) terms
// that share an output term cap its activation at their crossover, so the
// centroid wobbles by up to ~0.013 between term peaks. Monotonicity is exact
// at the peaks and holds within that bound everywhere else.
constexpr double kCrossoverWobble = 0.015;

TEST(Priority, MonotoneAtTermPeaks) {
    const std::vector<double> healths = {0.0, 0.5, 1.0};
    const std::vector<std::size_t> sizes = {1, 2, 3, 12, 25, 45, 60, 500};
    for (std::size_t s : sizes) {
        for (std::size_t i = 1; i < healths.size(); ++i) {
            EXPECT_LE(compute_priority(healths[i], s, cfg()).value, compute_priority(healths[i - 1], s, cfg()).value);
        }
    }
    for (double h : healths) {
        for (std::size_t i = 1; i < sizes.size(); ++i) {
            EXPECT_GE(compute_priority(h, sizes[i], cfg()).value, compute_priority(h, sizes[i - 1], cfg()).value);
        }
    }
}

TEST(Priority, MonotoneOverDenseGridWithinCrossoverWobble) {
    double worst = 0.0;
    for (std::size_t s = 1; s <= 60; ++s) {
        double prev = 2.0;
        for (int k = 0; k <= 100; ++k) {
            const double p = compute_priority(k / 100.0, s, cfg()).value;
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 1.0);
            worst = std::max(worst, p - prev);
            prev = p;
        }
    }
    for (int k = 0; k <= 100; ++k) {
        double prev = -1.0;
        for (std::size_t s = 1; s <= 60; ++s) {
            const double p = compute_priority(k / 100.0, s, cfg()).value;
            worst = std::max(worst, prev - p);
            prev = p;
        }
    }
    EXPECT_LE(worst, kCrossoverWobble);
}

TEST(Priority, RuleTableIsMonotone) {
    // Output term ranks: LOW < MEDIUM < HIGH < CRITICAL; inputs in declared order.
    const auto& e = cfg().engine();
    const std::size_t h = e.input_index("health");
    const std::size_t z = e.input_index("size");
    int table[3][4];
    for (const auto& r : e.rules) {
        std::size_t hi = 0;
        std::size_t si = 0;
        for (const auto& a : r.antecedents) (a.input == h ? hi : si) = a.term;
        ASSERT_NE(h, z);
        table[hi][si] = static_cast<int>(r.output_term);
    }
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 4; ++j) {
            if (i) EXPECT_GE(table[i - 1][j], table[i][j]);
            if (j) EXPECT_LE(table[i][j - 1], table[i][j]);
        }
    }
}

TEST(Priority, RejectsBadInputs) {
    EXPECT_THROW(compute_priority(1.2, 1, cfg()), ValidationError);
    EXPECT_THROW(compute_priority(-0.1, 1, cfg()), ValidationError);
    EXPECT_THROW(compute_priority(std::nan(""), 1, cfg()), ValidationError);
    EXPECT_THROW(compute_priority(0.5, 0, cfg()), ValidationError);
}

TEST(ClusterSize, Fuzzification) {
    const auto small = fuzzify_cluster_size(1, cfg());
    ASSERT_EQ(small.size(), 4u);
    EXPECT_EQ(small[0].term, "SMALL");
    EXPECT_EQ(small[0].mu, 1.0);
    const auto huge = fuzzify_cluster_size(45, cfg());
    EXPECT_EQ(huge[3].term, "HUGE");
    EXPECT_EQ(huge[3].mu, 1.0);
    EXPECT_EQ(huge[2].mu, 0.0);
    const auto medium = fuzzify_cluster_size(12, cfg());
    EXPECT_EQ(medium[1].mu, 1.0);
    EXPECT_THROW(fuzzify_cluster_size(0, cfg()), ValidationError);
}

TEST(RankFaults, ClusteredChannelOutranksIsolatedOne) {
    const ScannerLayout layout(3072, 16);
    std::vector<std::pair<ChannelId, double>> faults;
    const ChannelId isolated = layout.at(0, 0);
    faults.emplace_back(isolated, 0.2);
    ChannelId probe{};
    for (int r = 6; r < 11; ++r) {
        for (int a = 80; a < 89; ++a) {
            const bool centre = r == 8 && a == 84;
            faults.emplace_back(layout.at(r, a), centre ? 0.5 : 0.4);
            if (centre) probe = layout.at(r, a);
        }
    }
    const auto ranking = rank_faults(faults, layout, cfg());
    ASSERT_EQ(ranking.size(), 46u);
    std::size_t rank_isolated = 0;
    std::size_t rank_probe = 0;
    for (const auto& r : ranking) {
        if (r.channel == isolated) rank_isolated = r.rank;
        if (r.channel == probe) rank_probe = r.rank;
    }
    EXPECT_LT(rank_probe, rank_isolated);
    EXPECT_GT(reference_priority(0.5, 45), reference_priority(0.2, 1));
}

TEST(RankFaults, OrderAndTieBreak) {
    const ScannerLayout layout(3072, 16);
    const std::vector<std::pair<ChannelId, double>> faults = {
        {channel(900), 0.6}, {channel(10), 0.6}, {channel(500), 0.1}, {channel(2000), 0.9}};
    const auto ranking = rank_faults(faults, layout, cfg());
    ASSERT_EQ(ranking.size(), 4u);
    EXPECT_EQ(ranking[0].channel, channel(500));
    EXPECT_EQ(ranking[1].channel, channel(10));
    EXPECT_EQ(ranking[2].channel, channel(900));
    EXPECT_EQ(ranking[3].channel, channel(2000));
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        EXPECT_EQ(ranking[i].rank, i + 1);
        if (i) EXPECT_GE(ranking[i - 1].priority, ranking[i].priority);
    }
    EXPECT_TRUE(rank_faults({}, layout, cfg()).empty());
}

TEST(RankFaults, CsvRoundTrip) {
    const ScannerLayout layout(64, 2);
    const auto ranking = rank_faults({{channel(1), 0.3}, {channel(2), 0.4}, {channel(3), 0.5}}, layout, cfg());
    const auto back = parse_ranking(csv::parse(ranking_csv(ranking).str()));
    ASSERT_EQ(back.size(), ranking.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].channel, ranking[i].channel);
        EXPECT_EQ(back[i].priority, ranking[i].priority);
        EXPECT_EQ(back[i].cluster_id, ranking[i].cluster_id);
        EXPECT_EQ(back[i].cluster_size, 3u);
    }
}

TEST(PrioritizeAll, CoversEveryChannel) {
    const ScannerLayout layout(64, 2);
    std::vector<double> health(64, 1.0);
    health[5] = 0.3;
    const auto all = prioritize_all(health, {channel(5)}, layout, cfg());
    ASSERT_EQ(all.size(), 64u);
    EXPECT_EQ(all[5].channel, channel(5));
    EXPECT_GT(all[5].priority, all[6].priority);
    EXPECT_THROW(prioritize_all(std::vector<double>(3, 1.0), {}, layout, cfg()), ValidationError);
}

TEST(FuzzyConfigFile, ShippedFileEqualsDefault) {
    const auto loaded = FuzzyConfig::load(FDD_CONFIG_DIR "/priority.fuzzy");
    for (double h : {0.0, 0.3, 0.8}) {
        for (std::size_t s : {1u, 20u, 50u}) {
            EXPECT_EQ(compute_priority(h, s, loaded).value, compute_priority(h, s, cfg()).value);
        }
    }
}

namespace {

std::size_t error_line(const std::string& text) {
    try {
        FuzzyConfig::parse(text, "bad.fuzzy");
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.source(), "bad.fuzzy");
        return e.line();
    }
    ADD_FAILURE() << "expected ConfigError";
    return 0;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    EXPECT_NE(pos, std::string::npos) << from;
    return s.replace(pos, from.size(), to);
}

} // namespace

TEST(FuzzyConfigFile, ErrorsNameTheLine) {
    const std::string base = kDefaultFuzzyConfig;
    // Unknown keyword on line 2.
    EXPECT_EQ(error_line(replace(base, "INPUT health 0 1", "INPUTS health 0 1")), 2u);
    // Unknown term in a rule.
    EXPECT_EQ(error_line(replace(base, "THEN priority IS LOW\nIF health IS HIGH AND size IS MEDIUM",
                                 "THEN priority IS LOWEST\nIF health IS HIGH AND size IS MEDIUM")),
              21u);
    // Missing rule leaves a gap in the table.
    EXPECT_GT(error_line(replace(base, "IF health IS LOW AND size IS HUGE THEN priority IS CRITICAL\n", "")), 0u);
    // Decreasing knots.
    EXPECT_EQ(error_line(replace(base, "TERM LOW TRIANGLE 0 0 0.5", "TERM LOW TRIANGLE 0 0.6 0.5")), 3u);
    // HUGE must saturate at 45.
    EXPECT_GT(error_line(replace(base, "TERM HUGE TRAPEZOID 25 45 3072 3072", "TERM HUGE TRAPEZOID 25 50 3072 3072")),
              0u);
    // Gap in the health domain.
    EXPECT_EQ(error_line(replace(base, "TERM MEDIUM TRIANGLE 0 0.5 1", "TERM MEDIUM TRIANGLE 0.6 0.8 1")), 2u);
}
