#pragma once

// Brute-force DBSCAN by definition: core points from full neighbor counts,
// clusters as the transitive closure of core-core reachability, border
// points joined to the reachable cluster with the smallest core member.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

struct GridPoint {
    std::size_t id;
    int ring;
    int slot;
};

inline double cylinder_distance(const GridPoint& a, const GridPoint& b, int per_ring) {
    int ds = std::abs(a.slot - b.slot);
    ds = std::min(ds, per_ring - ds);
    const int dr = a.ring - b.ring;
    return std::sqrt(static_cast<double>(ds * ds + dr * dr));
}

/// Label per point: cluster index (clusters numbered by smallest core id),
/// or -1 for noise.
inline std::vector<int> dbscan(const std::vector<GridPoint>& pts, int per_ring, double eps, std::size_t min_pts) {
    const std::size_t n = pts.size();
    std::vector<std::vector<bool>> near(n, std::vector<bool>(n, false));
    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            near[i][j] = cylinder_distance(pts[i], pts[j], per_ring) <= eps;
            if (near[i][j]) ++count;
        }
        core[i] = count >= min_pts;
    }
    // Warshall closure over core-core edges.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) reach[i][j] = core[i] && core[j] && near[i][j];
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!reach[i][k]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (reach[k][j]) reach[i][j] = true;
            }
        }
    }
    // Representative of each core: its smallest reachable core id.
    std::vector<std::size_t> rep(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        std::size_t best = pts[i].id;
        for (std::size_t j = 0; j < n; ++j) {
            if (reach[i][j]) best = std::min(best, pts[j].id);
        }
        rep[i] = best;
    }
    std::vector<std::size_t> reps;
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) reps.push_back(rep[i]);
    }
    std::sort(reps.begin(), reps.end());
    reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
    const auto index = [&](std::size_t r) {
        return static_cast<int>(std::lower_bound(reps.begin(), reps.end(), r) - reps.begin());
    };

    std::vector<int> label(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            label[i] = index(rep[i]);
            continue;
        }
        int best = -1;
        for (std::size_t j = 0; j < n; ++j) {
            if (core[j] && near[i][j]) {
                const int c = index(rep[j]);
                if (best < 0 || c < best) best = c;
            }
        }
        label[i] = best;
    }
    return label;
}

} // namespace oracle
