#pragma once

// DBSCAN over failed channels on the scanner surface.

#include "fdd/core.hpp"
#include "fdd/scanner_sim.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <vector>

namespace fdd {

struct FaultCluster {
    int id = 0;
    std::vector<ChannelId> members; // sorted

    std::size_t size() const noexcept { return members.size(); }
};

struct ClusterParams {
    double eps = 1.5;
    std::size_t min_pts = 3;
};

struct Clustering {
    std::vector<FaultCluster> clusters;
    std::vector<ChannelId> noise; // sorted
    std::map<ChannelId, int> assignment; // -1 for noise

    int cluster_of(ChannelId ch) const {
        auto it = assignment.find(ch);
        return it == assignment.end() ? -1 : it->second;
    }

    /// Size used for fuzzification; noise and unclustered channels count as 1.
    std::size_t cluster_size_of(ChannelId ch) const {
        const int id = cluster_of(ch);
        return id < 0 ? 1 : clusters[static_cast<std::size_t>(id)].size();
    }
};

/// Classic DBSCAN (neighborhoods include the point itself, distance <= eps)
/// with an order-independent border rule: a border point reachable from
/// several clusters joins the one whose smallest core member id is lowest.
/// Cluster ids follow the same order.
inline Clustering cluster_failed(std::vector<ChannelId> failed, const ScannerLayout& layout, double eps,
                                 std::size_t min_pts) {
    if (!(eps > 0.0)) throw ValidationError("DBSCAN eps must be positive");
    if (min_pts < 1) throw ValidationError("DBSCAN min_pts must be at least 1");
    for (auto ch : failed) {
        if (!layout.contains(ch)) throw ValidationError("unknown channel " + std::to_string(index_of(ch)));
    }
    std::sort(failed.begin(), failed.end());
    failed.erase(std::unique(failed.begin(), failed.end()), failed.end());

    const std::size_t n = failed.size();
    std::vector<std::vector<std::size_t>> neighbors(n);
    for (std::size_t i = 0; i < n; ++i) {
        neighbors[i].push_back(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            if (layout.distance(failed[i], failed[j]) <= eps) {
                neighbors[i].push_back(j);
                neighbors[j].push_back(i);
            }
        }
    }
    std::vector<bool> core(n);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= min_pts;

    constexpr int kUnset = -1;
    std::vector<int> label(n, kUnset);
    int next_id = 0;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!core[seed] || label[seed] != kUnset) continue;
        const int id = next_id++;
        std::deque<std::size_t> frontier{seed};
        label[seed] = id;
        while (!frontier.empty()) {
            const std::size_t p = frontier.front();
            frontier.pop_front();
            for (std::size_t q : neighbors[p]) {
                if (core[q] && label[q] == kUnset) {
                    label[q] = id;
                    frontier.push_back(q);
                }
            }
        }
    }
    // Border points: lowest adjacent cluster id wins.
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        int best = kUnset;
        for (std::size_t q : neighbors[i]) {
            if (core[q] && (best == kUnset || label[q] < best)) best = label[q];
        }
        label[i] = best;
    }

    Clustering out;
    out.clusters.resize(static_cast<std::size_t>(next_id));
    for (int id = 0; id < next_id; ++id) out.clusters[static_cast<std::size_t>(id)].id = id;
    for (std::size_t i = 0; i < n; ++i) {
        out.assignment[failed[i]] = label[i];
        if (label[i] == kUnset) {
            out.noise.push_back(failed[i]);
        } else {
            out.clusters[static_cast<std::size_t>(label[i])].members.push_back(failed[i]);
        }
    }
    return out;
}

inline Clustering cluster_failed(std::vector<ChannelId> failed, const ScannerLayout& layout,
                                 const ClusterParams& params = {}) {
    return cluster_failed(std::move(failed), layout, params.eps, params.min_pts);
}

} // namespace fdd
