#pragma once

// Exhaustive best-split decision tree on tiny data sets. Every feature and
// every midpoint between distinct values is scored by weighted Gini
// impurity in floating point; ties keep the lowest feature, then the lowest
// threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <vector>

namespace oracle {

struct TreeSample {
    std::vector<double> x;
    int label; // any integer encoding of (class, severity)
};

struct OracleNode {
    bool leaf = true;
    int feature = -1;
    double threshold = 0.0;
    std::unique_ptr<OracleNode> left;
    std::unique_ptr<OracleNode> right;
};

inline double gini(const std::vector<const TreeSample*>& s) {
    std::map<int, double> counts;
    for (const auto* p : s) counts[p->label] += 1.0;
    double g = 1.0;
    for (const auto& [k, c] : counts) {
        const double q = c / static_cast<double>(s.size());
        g -= q * q;
    }
    return g;
}

inline std::unique_ptr<OracleNode> build_tree(const std::vector<const TreeSample*>& s) {
    auto node = std::make_unique<OracleNode>();
    if (gini(s) == 0.0) return node;
    const std::size_t d = s.front()->x.size();
    const double n = static_cast<double>(s.size());
    double best = 0.0;
    bool found = false;
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> values;
        for (const auto* p : s) values.push_back(p->x[f]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            const double t = (values[k] + values[k + 1]) / 2.0;
            std::vector<const TreeSample*> l;
            std::vector<const TreeSample*> r;
            for (const auto* p : s) (p->x[f] <= t ? l : r).push_back(p);
            const double score = static_cast<double>(l.size()) / n * gini(l) + static_cast<double>(r.size()) / n * gini(r);
            if (!found || score < best - 1e-12) {
                best = score;
                found = true;
                node->feature = static_cast<int>(f);
                node->threshold = t;
            }
        }
    }
    if (!found) return node;
    node->leaf = false;
    std::vector<const TreeSample*> l;
    std::vector<const TreeSample*> r;
    for (const auto* p : s) (p->x[static_cast<std::size_t>(node->feature)] <= node->threshold ? l : r).push_back(p);
    node->left = build_tree(l);
    node->right = build_tree(r);
    return node;
}

} // namespace oracle
