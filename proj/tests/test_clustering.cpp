#include "fdd/clustering.hpp"

#include "oracles/dbscan_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

using namespace fdd;

namespace {

/// Cluster label per channel of `failed`, renumbered to the oracle's scheme.
std::vector<int> labels_of(const Clustering& c, const std::vector<ChannelId>& failed) {
    std::vector<int> out;
    for (auto ch : failed) out.push_back(c.cluster_of(ch));
    return out;
}

std::vector<oracle::GridPoint> to_points(const std::vector<ChannelId>& failed, const ScannerLayout& layout) {
    std::vector<oracle::GridPoint> pts;
    for (auto ch : failed) {
        const auto g = layout.geometry(ch);
        pts.push_back({index_of(ch), g.ring, g.axial});
    }
    return pts;
}

} // namespace

TEST(Dbscan, BlockOf45IsOneCluster) {
    const ScannerLayout layout(3072, 16);
    std::vector<ChannelId> failed;
    for (int r = 4; r < 9; ++r) {
        for (int a = 100; a < 109; ++a) failed.push_back(layout.at(r, a));
    }
    ASSERT_EQ(failed.size(), 45u);
    const auto c = cluster_failed(failed, layout);
    ASSERT_EQ(c.clusters.size(), 1u);
    EXPECT_EQ(c.clusters[0].size(), 45u);
    EXPECT_TRUE(c.noise.empty());
    for (auto ch : failed) EXPECT_EQ(c.cluster_size_of(ch), 45u);
}

TEST(Dbscan, ClusterAcrossTheSeam) {
    const ScannerLayout layout(3072, 16);
    const std::vector<ChannelId> failed = {layout.at(2, 190), layout.at(2, 191), layout.at(2, 0), layout.at(2, 1)};
    const auto c = cluster_failed(failed, layout);
    ASSERT_EQ(c.clusters.size(), 1u);
    EXPECT_EQ(c.clusters[0].size(), 4u);
}

TEST(Dbscan, IsolatedChannelsAreNoise) {
    const ScannerLayout layout(3072, 16);
    const std::vector<ChannelId> failed = {layout.at(0, 0), layout.at(5, 50), layout.at(10, 120)};
    const auto c = cluster_failed(failed, layout);
    EXPECT_TRUE(c.clusters.empty());
    EXPECT_EQ(c.noise.size(), 3u);
    EXPECT_EQ(c.cluster_size_of(layout.at(5, 50)), 1u);
    EXPECT_EQ(c.cluster_of(layout.at(7, 7)), -1);
}

TEST(Dbscan, EmptyInputAndDuplicates) {
    const ScannerLayout layout(64, 2);
    EXPECT_TRUE(cluster_failed({}, layout).clusters.empty());
    const auto c = cluster_failed({channel(3), channel(3), channel(4), channel(5)}, layout);
    ASSERT_EQ(c.clusters.size(), 1u);
    EXPECT_EQ(c.clusters[0].size(), 3u);
}

TEST(Dbscan, BadParametersThrow) {
    const ScannerLayout layout(64, 2);
    EXPECT_THROW(cluster_failed({channel(1)}, layout, 0.0, 3), ValidationError);
    EXPECT_THROW(cluster_failed({channel(1)}, layout, 1.5, 0), ValidationError);
    EXPECT_THROW(cluster_failed({channel(64)}, layout, 1.5, 3), ValidationError);
}

TEST(Dbscan, MatchesBruteForceOracle) {
    const ScannerLayout layout(384, 8); // 48 per ring
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<std::size_t> count(0, 90);
        std::uniform_int_distribution<std::size_t> pick(0, layout.size() - 1);
        std::uniform_int_distribution<std::size_t> mp(1, 5);
        const double eps = trial % 3 == 0 ? 1.0 : (trial % 3 == 1 ? 1.5 : 2.3);
        const std::size_t min_pts = mp(rng);
        std::set<std::size_t> ids;
        const std::size_t k = count(rng);
        while (ids.size() < k) ids.insert(pick(rng));
        std::vector<ChannelId> failed;
        for (auto i : ids) failed.push_back(channel(i));

        const auto got = labels_of(cluster_failed(failed, layout, eps, min_pts), failed);
        const auto want = oracle::dbscan(to_points(failed, layout), 48, eps, min_pts);
        ASSERT_EQ(got, want) << "trial " << trial;
    }
}

TEST(Dbscan, InvariantUnderInputPermutation) {
    const ScannerLayout layout(384, 8);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, layout.size() - 1);
    std::set<std::size_t> ids;
    while (ids.size() < 120) ids.insert(pick(rng));
    std::vector<ChannelId> failed;
    for (auto i : ids) failed.push_back(channel(i));
    const auto ref = cluster_failed(failed, layout);
    for (int k = 0; k < 20; ++k) {
        std::shuffle(failed.begin(), failed.end(), rng);
        const auto c = cluster_failed(failed, layout);
        EXPECT_EQ(c.assignment, ref.assignment);
        EXPECT_EQ(c.noise, ref.noise);
    }
}

TEST(Dbscan, SizesPartitionTheInput) {
    const ScannerLayout layout(384, 8);
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> pick(0, layout.size() - 1);
    std::set<std::size_t> ids;
    while (ids.size() < 150) ids.insert(pick(rng));
    std::vector<ChannelId> failed;
    for (auto i : ids) failed.push_back(channel(i));
    const auto c = cluster_failed(failed, layout);
    std::size_t total = c.noise.size();
    for (const auto& cl : c.clusters) {
        EXPECT_TRUE(std::is_sorted(cl.members.begin(), cl.members.end()));
        total += cl.size();
    }
    EXPECT_EQ(total, failed.size());
}
