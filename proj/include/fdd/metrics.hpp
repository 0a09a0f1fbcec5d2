#pragma once

// Classification test statistics, confidence intervals, rank correlation
// and boxplot summaries used to evaluate fault-injection campaigns.

#include "fdd/core.hpp"
#include "fdd/diagnosis.hpp"
#include "fdd/scanner_sim.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace fdd::metrics {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t positives() const noexcept { return tp + fn; }
    std::size_t negatives() const noexcept { return tn + fp; }
};

inline double sensitivity(const ConfusionCounts& c) {
    if (c.positives() == 0) throw MetricError("sensitivity is undefined without positive conditions");
    return static_cast<double>(c.tp) / static_cast<double>(c.positives());
}

inline double specificity(const ConfusionCounts& c) {
    if (c.negatives() == 0) throw MetricError("specificity is undefined without negative conditions");
    return static_cast<double>(c.tn) / static_cast<double>(c.negatives());
}

inline double balanced_accuracy(double sens, double spec) {
    if (!(sens >= 0.0 && sens <= 1.0 && spec >= 0.0 && spec <= 1.0)) {
        throw MetricError("balanced accuracy inputs must lie in [0, 1]");
    }
    return (sens + spec) / 2.0;
}

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

inline double z_value(double level) {
    if (!(level > 0.0 && level < 1.0)) throw MetricError("confidence level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal(), 0.5 + level / 2.0);
}

/// Normal-approximation interval, clamped to [0, 1].
inline Interval wald_ci(double p_hat, std::size_t n, double level = 0.95) {
    if (n < 1) throw MetricError("confidence interval needs n >= 1");
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw MetricError("proportion must lie in [0, 1]");
    const double half = z_value(level) * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n));
    return {std::max(0.0, p_hat - half), std::min(1.0, p_hat + half)};
}

/// Wilson score interval; better behaved for small n or extreme p.
inline Interval wilson_ci(double p_hat, std::size_t n, double level = 0.95) {
    if (n < 1) throw MetricError("confidence interval needs n >= 1");
    if (!(p_hat >= 0.0 && p_hat <= 1.0)) throw MetricError("proportion must lie in [0, 1]");
    const double z = z_value(level);
    const double nn = static_cast<double>(n);
    const double denom = 1.0 + z * z / nn;
    const double centre = (p_hat + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p_hat * (1.0 - p_hat) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

enum class CiMethod { Wald, Wilson };

inline Interval proportion_ci(double p_hat, std::size_t n, CiMethod method, double level = 0.95) {
    return method == CiMethod::Wald ? wald_ci(p_hat, n, level) : wilson_ci(p_hat, n, level);
}

// ---------------------------------------------------------------------------
// Spearman
// ---------------------------------------------------------------------------

struct CorrelationResult {
    double rho = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// 1-based fractional ranks; ties share their average rank.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw MetricError("correlation is undefined for constant input");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Two-sided p-value from the t approximation with n - 2 degrees of freedom.
inline double spearman_p_value(double rho, std::size_t n) {
    if (std::abs(rho) >= 1.0) return 0.0;
    const double df = static_cast<double>(n) - 2.0;
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t))), 0.0, 1.0);
}

inline CorrelationResult spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw MetricError("spearman inputs differ in length");
    if (xs.size() < 3) throw MetricError("spearman needs at least 3 pairs");
    CorrelationResult r;
    r.n = xs.size();
    r.rho = pearson(fractional_ranks(xs), fractional_ranks(ys));
    r.p_value = spearman_p_value(r.rho, r.n);
    return r;
}

// ---------------------------------------------------------------------------
// Boxplots
// ---------------------------------------------------------------------------

enum class OutlierRule {
    FromMedian,   // |x - median| > 1.5 IQR
    BeyondQuartiles, // x < Q1 - 1.5 IQR or x > Q3 + 1.5 IQR
};

struct BoxplotStats {
    std::size_t n = 0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double whisker_low = 0.0;
    double whisker_high = 0.0;
    std::vector<double> outliers;
};

/// Quantile by linear interpolation between order statistics at
/// h = (n - 1) p + 1 (1-based).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline BoxplotStats boxplot_stats(std::vector<double> values, OutlierRule rule = OutlierRule::FromMedian) {
    if (values.empty()) throw MetricError("boxplot needs at least one value");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    BoxplotStats b;
    b.n = values.size();
    b.q1 = quantile_sorted(sorted, 0.25);
    b.median = quantile_sorted(sorted, 0.5);
    b.q3 = quantile_sorted(sorted, 0.75);
    b.iqr = b.q3 - b.q1;
    const auto outlier = [&](double x) {
        if (rule == OutlierRule::FromMedian) return std::abs(x - b.median) > 1.5 * b.iqr;
        return x < b.q1 - 1.5 * b.iqr || x > b.q3 + 1.5 * b.iqr;
    };
    bool any_inlier = false;
    for (double x : sorted) {
        if (outlier(x)) {
            b.outliers.push_back(x);
        } else {
            if (!any_inlier) b.whisker_low = x;
            b.whisker_high = x;
            any_inlier = true;
        }
    }
    if (!any_inlier) b.whisker_low = b.whisker_high = b.median;
    return b;
}

// ---------------------------------------------------------------------------
// Campaign statistics
// ---------------------------------------------------------------------------

/// Correct diagnosis: detected, and the proposed action undoes the fault.
inline bool correct_diagnosis(const DiagnosisRow& d, const GroundTruth& truth) {
    return d.detected && d.cls == truth.expected_class();
}

struct RateRow {
    FaultType type = FaultType::BiasShift;
    std::optional<Direction> direction; // nullopt: both directions pooled
    int level = 0;                      // 0 with major = true
    bool major = false;
    std::size_t hits = 0;
    std::size_t total = 0;
    double rate = 0.0;
    Interval ci;
};

struct RateTable {
    std::vector<RateRow> rows;
    std::vector<std::string> warnings;
};

namespace detail {

struct RowKey {
    FaultType type;
    int direction; // -1 pooled
    int level;
    bool major;
    auto operator<=>(const RowKey&) const = default;
};

inline RowKey key_of(const GroundTruth& g, bool split_direction) {
    return {g.type, split_direction ? static_cast<int>(g.direction) : -1, g.major ? 0 : g.level, g.major};
}

inline std::map<ChannelId, const DiagnosisRow*> index_rows(const std::vector<DiagnosisRow>& diagnoses) {
    std::map<ChannelId, const DiagnosisRow*> out;
    for (const auto& d : diagnoses) out[d.channel] = &d;
    return out;
}

inline RateTable finish(std::map<RowKey, std::pair<std::size_t, std::size_t>> counts, const std::string& what,
                        CiMethod method, const std::vector<RowKey>& expected) {
    RateTable t;
    for (const auto& k : expected) counts.try_emplace(k, 0, 0);
    for (const auto& [k, c] : counts) {
        RateRow r;
        r.type = k.type;
        if (k.direction >= 0) r.direction = static_cast<Direction>(k.direction);
        r.level = k.level;
        r.major = k.major;
        r.hits = c.first;
        r.total = c.second;
        if (r.total == 0) {
            t.warnings.push_back(what + ": no " + (what == "severity" ? "correct diagnoses" : "injected faults") +
                                 " for " + std::string(to_string(r.type)) +
                                 (r.direction ? " " + std::string(to_string(*r.direction)) : "") + " level " +
                                 (r.major ? "MAJOR" : std::to_string(r.level)) + "; row omitted");
            continue;
        }
        r.rate = static_cast<double>(r.hits) / static_cast<double>(r.total);
        r.ci = proportion_ci(r.rate, r.total, method);
        t.rows.push_back(r);
    }
    return t;
}

} // namespace detail

/// Correct diagnoses over injected faults, per fault type, direction and
/// level. Every ground-truth channel must have a diagnosis.
inline RateTable fdd_sensitivity_per_level(const std::vector<DiagnosisRow>& diagnoses,
                                           const std::map<ChannelId, GroundTruth>& truth, bool split_direction = true,
                                           CiMethod method = CiMethod::Wald) {
    const auto by_channel = detail::index_rows(diagnoses);
    std::map<detail::RowKey, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& [ch, g] : truth) {
        auto it = by_channel.find(ch);
        if (it == by_channel.end()) {
            throw MetricError("no diagnosis for injected channel " + std::to_string(index_of(ch)));
        }
        auto& c = counts[detail::key_of(g, split_direction)];
        ++c.second;
        if (correct_diagnosis(*it->second, g)) ++c.first;
    }
    return detail::finish(std::move(counts), "per-level", method, {});
}

/// Exact severity matches over correct diagnoses (a conditional rate).
/// Keys that were injected but never correctly diagnosed are reported as
/// omitted rows.
inline RateTable severity_sensitivity(const std::vector<DiagnosisRow>& diagnoses,
                                      const std::map<ChannelId, GroundTruth>& truth, bool split_direction = true,
                                      CiMethod method = CiMethod::Wald) {
    const auto by_channel = detail::index_rows(diagnoses);
    std::map<detail::RowKey, std::pair<std::size_t, std::size_t>> counts;
    std::vector<detail::RowKey> injected;
    for (const auto& [ch, g] : truth) {
        auto it = by_channel.find(ch);
        if (it == by_channel.end()) {
            throw MetricError("no diagnosis for injected channel " + std::to_string(index_of(ch)));
        }
        const auto key = detail::key_of(g, split_direction);
        injected.push_back(key);
        if (!correct_diagnosis(*it->second, g)) continue;
        auto& c = counts[key];
        ++c.second;
        if (it->second->severity == g.severity()) ++c.first;
    }
    return detail::finish(std::move(counts), "severity", method, injected);
}

/// Scanner-wide confusion counts: positives are faulted channels (hit when
/// correctly diagnosed), negatives are healthy channels (hit when not
/// detected).
inline ConfusionCounts global_counts(const std::vector<DiagnosisRow>& diagnoses,
                                     const std::map<ChannelId, GroundTruth>& truth) {
    ConfusionCounts c;
    for (const auto& d : diagnoses) {
        auto it = truth.find(d.channel);
        if (it != truth.end()) {
            correct_diagnosis(d, it->second) ? ++c.tp : ++c.fn;
        } else {
            d.detected ? ++c.fp : ++c.tn;
        }
    }
    return c;
}

} // namespace fdd::metrics
