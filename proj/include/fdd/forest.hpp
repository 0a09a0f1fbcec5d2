#pragma once

// Random decision forest over diagnosis labels (class x severity).
// Bootstrap bagging, per-split feature subsampling, Gini splits; the class
// posterior is the fraction of trees voting for it.

#include "fdd/core.hpp"
#include "fdd/csv.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fdd {

struct TrainingSample {
    std::vector<double> x;
    Label label;
};

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0; // 0 = unlimited
    std::size_t min_leaf = 1;
    std::size_t features_per_split = 0; // 0 = ceil(sqrt(d))
    bool bootstrap = true;
    std::uint64_t seed = 0;
    std::size_t threads = 0; // 0 = hardware concurrency
};

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;  // x[feature] <= threshold
    int right = -1; // x[feature] > threshold
    Label label;

    bool leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes;

    Label predict(std::span<const double> x) const {
        std::size_t at = 0;
        while (!nodes[at].leaf()) {
            const auto& n = nodes[at];
            at = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
        }
        return nodes[at].label;
    }

    std::size_t depth() const {
        std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 1}};
        std::size_t best = 0;
        while (!stack.empty()) {
            auto [at, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            if (!nodes[at].leaf()) {
                stack.push_back({static_cast<std::size_t>(nodes[at].left), d + 1});
                stack.push_back({static_cast<std::size_t>(nodes[at].right), d + 1});
            }
        }
        return best;
    }

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestVote {
    std::size_t n_trees = 0;
    std::array<std::size_t, kClassCount> votes{};
    std::array<double, kClassCount> posterior{};
    DiagnosisClass argmax = DiagnosisClass::Healthy;
    int severity = kNoSeverity;

    double probability(DiagnosisClass c) const noexcept { return posterior[class_index(c)]; }
};

namespace detail {

inline constexpr std::size_t kLabelSlots = kClassCount * (kMaxSeverity + 1);

inline std::size_t label_slot(const Label& l) noexcept {
    return class_index(l.cls) * (kMaxSeverity + 1) + static_cast<std::size_t>(l.severity);
}

inline Label slot_label(std::size_t slot) noexcept {
    return {static_cast<DiagnosisClass>(slot / (kMaxSeverity + 1)), static_cast<int>(slot % (kMaxSeverity + 1))};
}

/// Majority label; ties go to the earlier class, then the higher severity.
inline Label majority(const std::array<std::size_t, kLabelSlots>& counts) {
    std::size_t best = kLabelSlots;
    for (std::size_t c = 0; c < kClassCount; ++c) {
        for (int s = kMaxSeverity; s >= 0; --s) {
            const std::size_t slot = c * (kMaxSeverity + 1) + static_cast<std::size_t>(s);
            if (counts[slot] > 0 && (best == kLabelSlots || counts[slot] > counts[best])) best = slot;
        }
    }
    return slot_label(best == kLabelSlots ? 0 : best);
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<TrainingSample>& data, const ForestConfig& cfg, std::size_t n_features,
                std::uint64_t seed)
        : data_(data), cfg_(cfg), d_(n_features), rng_(seed) {
        m_ = cfg.features_per_split == 0
                 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d_))))
                 : std::min(cfg.features_per_split, d_);
    }

    DecisionTree build() {
        std::vector<std::uint32_t> idx;
        const std::size_t n = data_.size();
        idx.reserve(n);
        if (cfg_.bootstrap) {
            std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
            for (std::size_t i = 0; i < n; ++i) idx.push_back(pick(rng_));
        } else {
            for (std::size_t i = 0; i < n; ++i) idx.push_back(static_cast<std::uint32_t>(i));
        }

        DecisionTree tree;
        struct Work {
            std::size_t node;
            std::vector<std::uint32_t> idx;
            std::size_t depth;
        };
        tree.nodes.emplace_back();
        std::vector<Work> stack;
        stack.push_back({0, std::move(idx), 1});
        while (!stack.empty()) {
            Work w = std::move(stack.back());
            stack.pop_back();

            std::array<std::size_t, kLabelSlots> counts{};
            for (auto i : w.idx) ++counts[label_slot(data_[i].label)];
            tree.nodes[w.node].label = majority(counts);

            const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) <= 1;
            const bool depth_capped = cfg_.max_depth != 0 && w.depth >= cfg_.max_depth;
            if (pure || depth_capped || w.idx.size() < 2 * cfg_.min_leaf) continue;

            const Split split = best_split(w.idx, counts);
            if (split.feature < 0) continue;

            std::vector<std::uint32_t> left;
            std::vector<std::uint32_t> right;
            for (auto i : w.idx) {
                (data_[i].x[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(i);
            }
            const auto l = tree.nodes.size();
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& node = tree.nodes[w.node];
            node.feature = split.feature;
            node.threshold = split.threshold;
            node.left = static_cast<int>(l);
            node.right = static_cast<int>(l + 1);
            stack.push_back({l + 1, std::move(right), w.depth + 1});
            stack.push_back({l, std::move(left), w.depth + 1});
        }
        return tree;
    }

private:
    __extension__ using Wide = __int128;

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        // Score = (SL*nR + SR*nL) / (nL*nR) with S = sum of squared class
        // counts; larger is purer. Kept as an exact fraction.
        Wide num = 0;
        Wide den = 1;
    };

    Split best_split(std::vector<std::uint32_t>& idx, const std::array<std::size_t, kLabelSlots>& total) {
        std::vector<std::size_t> order(d_);
        std::iota(order.begin(), order.end(), std::size_t{0});
        if (m_ < d_) {
            std::shuffle(order.begin(), order.end(), rng_);
        }

        Split best;
        std::size_t evaluated = 0;
        const std::size_t n = idx.size();
        std::vector<std::uint32_t> sorted = idx;
        for (std::size_t f : order) {
            if (evaluated >= m_) break;
            std::stable_sort(sorted.begin(), sorted.end(),
                             [&](std::uint32_t a, std::uint32_t b) { return data_[a].x[f] < data_[b].x[f]; });
            if (data_[sorted.front()].x[f] == data_[sorted.back()].x[f]) continue; // constant here
            ++evaluated;

            std::array<std::size_t, kLabelSlots> left{};
            for (std::size_t i = 0; i + 1 < n; ++i) {
                ++left[label_slot(data_[sorted[i]].label)];
                const double v = data_[sorted[i]].x[f];
                const double next = data_[sorted[i + 1]].x[f];
                if (v == next) continue;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < cfg_.min_leaf || nr < cfg_.min_leaf) continue;
                Wide sl = 0;
                Wide sr = 0;
                for (std::size_t s = 0; s < kLabelSlots; ++s) {
                    const auto cl = static_cast<Wide>(left[s]);
                    const auto cr = static_cast<Wide>(total[s] - left[s]);
                    sl += cl * cl;
                    sr += cr * cr;
                }
                const Wide num = sl * static_cast<Wide>(nr) + sr * static_cast<Wide>(nl);
                const Wide den = static_cast<Wide>(nl) * static_cast<Wide>(nr);
                if (best.feature < 0 || num * best.den > best.num * den) {
                    double mid = v + (next - v) / 2.0;
                    if (!(mid < next)) mid = v;
                    best = {static_cast<int>(f), mid, num, den};
                }
            }
        }
        return best;
    }

    const std::vector<TrainingSample>& data_;
    const ForestConfig& cfg_;
    std::size_t d_;
    std::size_t m_;
    std::mt19937_64 rng_;
};

} // namespace detail

class Forest {
public:
    Forest() = default;

    std::size_t n_features() const noexcept { return n_features_; }
    std::size_t size() const noexcept { return trees_.size(); }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

    /// Builds a forest directly from trees (fixtures, deserialization).
    static Forest from_trees(std::vector<DecisionTree> trees, std::size_t n_features, std::uint64_t seed = 0) {
        if (trees.empty()) throw TrainingError("forest needs at least one tree");
        Forest f;
        f.trees_ = std::move(trees);
        f.n_features_ = n_features;
        f.seed_ = seed;
        return f;
    }

    ForestVote classify(std::span<const double> x) const {
        if (x.size() != n_features_) {
            throw ValidationError("feature vector has " + std::to_string(x.size()) + " values, forest expects " +
                                  std::to_string(n_features_));
        }
        ForestVote v;
        v.n_trees = trees_.size();
        std::array<std::array<std::size_t, kMaxSeverity + 1>, kClassCount> severity_votes{};
        for (const auto& t : trees_) {
            const Label l = t.predict(x);
            ++v.votes[class_index(l.cls)];
            ++severity_votes[class_index(l.cls)][static_cast<std::size_t>(l.severity)];
        }
        std::size_t best = 0;
        for (std::size_t c = 0; c < kClassCount; ++c) {
            v.posterior[c] = static_cast<double>(v.votes[c]) / static_cast<double>(v.n_trees);
            if (v.votes[c] > v.votes[best]) best = c;
        }
        v.argmax = static_cast<DiagnosisClass>(best);
        // Highest severity first so that ties resolve upward.
        int sev = kNoSeverity;
        std::size_t top = 0;
        for (int s = kMaxSeverity; s >= 0; --s) {
            if (severity_votes[best][static_cast<std::size_t>(s)] > top) {
                top = severity_votes[best][static_cast<std::size_t>(s)];
                sev = s;
            }
        }
        v.severity = v.argmax == DiagnosisClass::Healthy ? kNoSeverity : sev;
        return v;
    }

    std::string serialize() const {
        std::ostringstream out;
        out << "fdd-forest 1\n";
        out << "features " << n_features_ << "\n";
        out << "seed " << seed_ << "\n";
        out << "trees " << trees_.size() << "\n";
        for (std::size_t t = 0; t < trees_.size(); ++t) {
            out << "tree " << t << " " << trees_[t].nodes.size() << "\n";
            for (const auto& n : trees_[t].nodes) {
                out << n.feature << " " << csv::format_double(n.threshold) << " " << n.left << " " << n.right << " "
                    << to_string(n.label.cls) << " " << n.label.severity << "\n";
            }
        }
        out << "end\n";
        return out.str();
    }

    std::string hash() const { return hex64(fnv1a(serialize())); }

    static Forest deserialize(const std::string& text, const std::string& source = "<forest>") {
        std::istringstream in(text);
        std::string line;
        std::size_t line_no = 0;
        auto next = [&]() -> std::istringstream {
            if (!std::getline(in, line)) throw ConfigError(source, line_no, "unexpected end of forest file");
            ++line_no;
            return std::istringstream(line);
        };
        auto expect = [&](std::istringstream& s, const std::string& key) {
            std::string k;
            s >> k;
            if (k != key) throw ConfigError(source, line_no, "expected '" + key + "'");
        };

        Forest f;
        {
            auto s = next();
            std::string magic;
            int version = 0;
            s >> magic >> version;
            if (magic != "fdd-forest" || version != 1) throw ConfigError(source, line_no, "not a version 1 forest file");
        }
        std::size_t n_trees = 0;
        {
            auto s = next();
            expect(s, "features");
            s >> f.n_features_;
        }
        {
            auto s = next();
            expect(s, "seed");
            s >> f.seed_;
        }
        {
            auto s = next();
            expect(s, "trees");
            s >> n_trees;
            if (!s || n_trees == 0) throw ConfigError(source, line_no, "bad tree count");
        }
        for (std::size_t t = 0; t < n_trees; ++t) {
            std::size_t id = 0;
            std::size_t n_nodes = 0;
            {
                auto s = next();
                expect(s, "tree");
                s >> id >> n_nodes;
                if (!s || id != t || n_nodes == 0) throw ConfigError(source, line_no, "bad tree header");
            }
            DecisionTree tree;
            tree.nodes.resize(n_nodes);
            for (auto& n : tree.nodes) {
                auto s = next();
                std::string thr;
                std::string cls;
                s >> n.feature >> thr >> n.left >> n.right >> cls >> n.label.severity;
                if (!s) throw ConfigError(source, line_no, "malformed node");
                auto res = std::from_chars(thr.data(), thr.data() + thr.size(), n.threshold);
                if (res.ec != std::errc{}) throw ConfigError(source, line_no, "bad threshold '" + thr + "'");
                auto c = parse_class(cls);
                if (!c) throw ConfigError(source, line_no, "unknown class '" + cls + "'");
                n.label.cls = *c;
                if (n.label.severity < 0 || n.label.severity > kMaxSeverity) {
                    throw ConfigError(source, line_no, "severity outside [0, 5]");
                }
                if (!n.leaf()) {
                    const auto in_range = [&](int k) { return k > 0 && static_cast<std::size_t>(k) < n_nodes; };
                    if (static_cast<std::size_t>(n.feature) >= f.n_features_ || !in_range(n.left) || !in_range(n.right)) {
                        throw ConfigError(source, line_no, "node references out of range");
                    }
                }
            }
            f.trees_.push_back(std::move(tree));
        }
        {
            auto s = next();
            expect(s, "end");
        }
        return f;
    }

    friend bool operator==(const Forest&, const Forest&) = default;

private:
    std::vector<DecisionTree> trees_;
    std::size_t n_features_ = 0;
    std::uint64_t seed_ = 0;
};

/// Trains one tree per seed stream; trees are independent, so they are built
/// concurrently and the result does not depend on the thread count.
inline Forest train_forest(const std::vector<TrainingSample>& history, const ForestConfig& cfg) {
    if (cfg.n_trees < 1) throw TrainingError("n_trees must be at least 1");
    if (cfg.min_leaf < 1) throw TrainingError("min_leaf must be at least 1");
    if (history.empty()) throw TrainingError("training history is empty; gather labeled cases first");
    const std::size_t d = history.front().x.size();
    if (d == 0) throw TrainingError("training samples have no features");
    bool two_classes = false;
    for (const auto& s : history) {
        if (s.x.size() != d) throw TrainingError("training samples have inconsistent dimensionality");
        for (double v : s.x) {
            if (!std::isfinite(v)) throw TrainingError("training sample has a non-finite feature");
        }
        if (s.label.severity < 0 || s.label.severity > kMaxSeverity) throw TrainingError("severity outside [0, 5]");
        two_classes = two_classes || s.label.cls != history.front().label.cls;
    }
    if (!two_classes) {
        throw TrainingError("training history holds a single class (" + std::string(to_string(history.front().label.cls)) +
                            "); gather labels for at least one more class");
    }

    std::vector<DecisionTree> trees(cfg.n_trees);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < cfg.n_trees; t = next++) {
            detail::TreeBuilder builder(history, cfg, d, mix_seed(cfg.seed, t));
            trees[t] = builder.build();
        }
    };
    std::size_t n_threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, cfg.n_trees);
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
        worker();
    }
    return Forest::from_trees(std::move(trees), d, cfg.seed);
}

} // namespace fdd
