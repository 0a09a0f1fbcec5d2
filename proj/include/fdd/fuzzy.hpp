#pragma once

// Mamdani fuzzy inference (min for AND, max aggregation, centroid
// defuzzification) and the declarative text format it is configured with:
//
//   INPUT health 0 1
//   TERM LOW TRIANGLE 0 0 0.5
//   OUTPUT priority 0 1
//   TERM CRITICAL TRIANGLE 0.6 1 1
//   DEFUZZIFY CENTROID 1000
//   IF health IS LOW AND size IS HUGE THEN priority IS CRITICAL

#include "fdd/core.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace fdd::fuzzy {

/// Trapezoid a <= b <= c <= d; a triangle has b == c.
struct Membership {
    std::array<double, 4> knots{};

    double operator()(double x) const noexcept {
        const auto [a, b, c, d] = knots;
        if (x < a || x > d) return 0.0;
        if (x >= b && x <= c) return 1.0;
        if (x < b) return (x - a) / (b - a);
        return (d - x) / (d - c);
    }

    static Membership triangle(double a, double b, double c) { return {{a, b, b, c}}; }
    static Membership trapezoid(double a, double b, double c, double d) { return {{a, b, c, d}}; }
};

struct Term {
    std::string name;
    Membership mf;
};

struct Variable {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    std::vector<Term> terms;

    std::size_t term_index(const std::string& term) const {
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (terms[i].name == term) return i;
        }
        return terms.size();
    }

    double clamp(double x) const noexcept { return std::clamp(x, lo, hi); }

    std::vector<double> fuzzify(double x) const {
        std::vector<double> mu;
        mu.reserve(terms.size());
        const double v = clamp(x);
        for (const auto& t : terms) mu.push_back(t.mf(v));
        return mu;
    }
};

struct Antecedent {
    std::size_t input = 0;
    std::size_t term = 0;
};

struct Rule {
    std::vector<Antecedent> antecedents;
    std::size_t output_term = 0;
    std::size_t line = 0;
};

struct Engine {
    std::vector<Variable> inputs;
    Variable output;
    std::vector<Rule> rules;
    std::size_t resolution = 1000;

    std::size_t input_index(const std::string& name) const {
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (inputs[i].name == name) return i;
        }
        throw ValidationError("fuzzy engine has no input '" + name + "'");
    }

    /// Rule activation degrees for the given crisp inputs.
    std::vector<double> activations(std::span<const double> values) const {
        if (values.size() != inputs.size()) throw ValidationError("fuzzy engine: wrong number of inputs");
        std::vector<std::vector<double>> mu;
        mu.reserve(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) mu.push_back(inputs[i].fuzzify(values[i]));
        std::vector<double> act;
        act.reserve(rules.size());
        for (const auto& r : rules) {
            double a = 1.0;
            for (const auto& ant : r.antecedents) a = std::min(a, mu[ant.input][ant.term]);
            act.push_back(a);
        }
        return act;
    }

    /// Defuzzified output. Midpoint-sampled centroid of the aggregated set.
    double evaluate(std::span<const double> values) const {
        const auto act = activations(values);
        std::vector<double> clip(output.terms.size(), 0.0);
        for (std::size_t r = 0; r < rules.size(); ++r) {
            clip[rules[r].output_term] = std::max(clip[rules[r].output_term], act[r]);
        }
        const double dx = (output.hi - output.lo) / static_cast<double>(resolution);
        double num = 0.0;
        double den = 0.0;
        for (std::size_t i = 0; i < resolution; ++i) {
            const double y = output.lo + (static_cast<double>(i) + 0.5) * dx;
            double mu = 0.0;
            for (std::size_t t = 0; t < output.terms.size(); ++t) {
                if (clip[t] > 0.0) mu = std::max(mu, std::min(clip[t], output.terms[t].mf(y)));
            }
            num += y * mu;
            den += mu;
        }
        if (den <= 0.0) return output.lo;
        return std::clamp(num / den, output.lo, output.hi);
    }
};

namespace detail {

inline std::vector<std::string> split_words(const std::string& line) {
    std::vector<std::string> words;
    std::istringstream ss(line);
    std::string w;
    while (ss >> w) words.push_back(w);
    return words;
}

inline double number(const std::string& s, const std::string& source, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError(source, line, "expected a number, got '" + s + "'");
    }
    return v;
}

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss << v;
    return ss.str();
}

} // namespace detail

/// Checks that every input value activates some term. Memberships are
/// piecewise linear, so testing knots and the midpoints between them is
/// exhaustive.
inline void check_coverage(const Variable& var, const std::string& source, std::size_t line) {
    std::vector<double> points = {var.lo, var.hi};
    for (const auto& t : var.terms) {
        for (double k : t.mf.knots) {
            if (k >= var.lo && k <= var.hi) points.push_back(k);
        }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());
    const std::size_t n = points.size();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> probes = {points[i]};
        if (i + 1 < n) probes.push_back(0.5 * (points[i] + points[i + 1]));
        for (double x : probes) {
            bool covered = false;
            for (const auto& t : var.terms) covered = covered || t.mf(x) > 0.0;
            if (!covered) {
                throw ConfigError(source, line, "variable '" + var.name + "' has no active term at " + detail::fmt(x));
            }
        }
    }
}

/// Parses and validates an engine description.
inline Engine parse_engine(const std::string& text, const std::string& source = "<fuzzy>") {
    Engine engine;
    Variable* current = nullptr;
    bool have_output = false;
    std::vector<std::size_t> var_lines;
    std::size_t output_line = 0;

    struct PendingRule {
        std::vector<std::pair<std::string, std::string>> conds;
        std::string out_var;
        std::string out_term;
        std::size_t line;
    };
    std::vector<PendingRule> pending;

    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const auto w = detail::split_words(raw);
        if (w.empty()) continue;

        if (w[0] == "INPUT" || w[0] == "OUTPUT") {
            if (w.size() != 4) throw ConfigError(source, line, w[0] + " expects: name lo hi");
            Variable v{w[1], detail::number(w[2], source, line), detail::number(w[3], source, line), {}};
            if (!(v.lo < v.hi)) throw ConfigError(source, line, "empty domain for '" + v.name + "'");
            if (w[0] == "INPUT") {
                for (const auto& existing : engine.inputs) {
                    if (existing.name == v.name) throw ConfigError(source, line, "duplicate input '" + v.name + "'");
                }
                engine.inputs.push_back(v);
                var_lines.push_back(line);
                current = &engine.inputs.back();
            } else {
                if (have_output) throw ConfigError(source, line, "only one OUTPUT is supported");
                engine.output = v;
                have_output = true;
                output_line = line;
                current = &engine.output;
            }
        } else if (w[0] == "TERM") {
            if (!current) throw ConfigError(source, line, "TERM before any INPUT/OUTPUT");
            if (w.size() < 3) throw ConfigError(source, line, "TERM expects: name shape knots...");
            Membership mf;
            if (w[2] == "TRIANGLE" && w.size() == 6) {
                mf = Membership::triangle(detail::number(w[3], source, line), detail::number(w[4], source, line),
                                          detail::number(w[5], source, line));
            } else if (w[2] == "TRAPEZOID" && w.size() == 7) {
                mf = Membership::trapezoid(detail::number(w[3], source, line), detail::number(w[4], source, line),
                                           detail::number(w[5], source, line), detail::number(w[6], source, line));
            } else {
                throw ConfigError(source, line, "TERM shape must be 'TRIANGLE a b c' or 'TRAPEZOID a b c d'");
            }
            if (!std::is_sorted(mf.knots.begin(), mf.knots.end())) {
                throw ConfigError(source, line, "knots of term '" + w[1] + "' must be non-decreasing");
            }
            if (current->term_index(w[1]) != current->terms.size()) {
                throw ConfigError(source, line, "duplicate term '" + w[1] + "'");
            }
            current->terms.push_back({w[1], mf});
        } else if (w[0] == "DEFUZZIFY") {
            if (w.size() != 3 || w[1] != "CENTROID") throw ConfigError(source, line, "DEFUZZIFY CENTROID <resolution>");
            const double r = detail::number(w[2], source, line);
            if (r < 10 || r != std::floor(r)) throw ConfigError(source, line, "resolution must be an integer >= 10");
            engine.resolution = static_cast<std::size_t>(r);
        } else if (w[0] == "IF") {
            // IF v IS t (AND v IS t)* THEN o IS t
            PendingRule rule;
            rule.line = line;
            std::size_t i = 1;
            while (true) {
                if (i + 2 >= w.size() || w[i + 1] != "IS") throw ConfigError(source, line, "expected '<input> IS <term>'");
                rule.conds.emplace_back(w[i], w[i + 2]);
                i += 3;
                if (i < w.size() && w[i] == "AND") {
                    ++i;
                    continue;
                }
                break;
            }
            if (i + 4 != w.size() || w[i] != "THEN" || w[i + 2] != "IS") {
                throw ConfigError(source, line, "expected 'THEN <output> IS <term>'");
            }
            rule.out_var = w[i + 1];
            rule.out_term = w[i + 3];
            pending.push_back(std::move(rule));
        } else {
            throw ConfigError(source, line, "unknown keyword '" + w[0] + "'");
        }
    }

    if (engine.inputs.empty()) throw ConfigError(source, line, "no INPUT variables");
    if (!have_output) throw ConfigError(source, line, "no OUTPUT variable");
    for (std::size_t i = 0; i < engine.inputs.size(); ++i) {
        if (engine.inputs[i].terms.empty()) throw ConfigError(source, var_lines[i], "input without terms");
        check_coverage(engine.inputs[i], source, var_lines[i]);
    }
    if (engine.output.terms.empty()) throw ConfigError(source, output_line, "output without terms");

    for (const auto& p : pending) {
        Rule r;
        r.line = p.line;
        for (const auto& [var, term] : p.conds) {
            std::size_t vi = engine.inputs.size();
            for (std::size_t k = 0; k < engine.inputs.size(); ++k) {
                if (engine.inputs[k].name == var) vi = k;
            }
            if (vi == engine.inputs.size()) throw ConfigError(source, p.line, "unknown input '" + var + "'");
            const std::size_t ti = engine.inputs[vi].term_index(term);
            if (ti == engine.inputs[vi].terms.size()) {
                throw ConfigError(source, p.line, "unknown term '" + term + "' of '" + var + "'");
            }
            r.antecedents.push_back({vi, ti});
        }
        if (p.out_var != engine.output.name) throw ConfigError(source, p.line, "unknown output '" + p.out_var + "'");
        r.output_term = engine.output.term_index(p.out_term);
        if (r.output_term == engine.output.terms.size()) {
            throw ConfigError(source, p.line, "unknown output term '" + p.out_term + "'");
        }
        engine.rules.push_back(std::move(r));
    }

    // Every combination of input terms must be handled by some rule, so the
    // aggregated output set is never empty on a covered input.
    std::vector<std::size_t> combo(engine.inputs.size(), 0);
    while (true) {
        bool handled = false;
        for (const auto& r : engine.rules) {
            bool match = true;
            for (const auto& a : r.antecedents) match = match && combo[a.input] == a.term;
            if (match) {
                handled = true;
                break;
            }
        }
        if (!handled) {
            std::string desc;
            for (std::size_t k = 0; k < combo.size(); ++k) {
                desc += (k ? " AND " : "") + engine.inputs[k].name + " IS " + engine.inputs[k].terms[combo[k]].name;
            }
            throw ConfigError(source, line, "rule table has no rule for '" + desc + "'");
        }
        std::size_t k = 0;
        while (k < combo.size() && ++combo[k] == engine.inputs[k].terms.size()) combo[k++] = 0;
        if (k == combo.size()) break;
    }
    return engine;
}

} // namespace fdd::fuzzy
