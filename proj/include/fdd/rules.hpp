#pragma once

// Forward-chaining rule engine that produces diagnoses with explanations.
//
// Rule file format, one rule per block (a block may continue on following
// lines until a blank line or the next RULE):
//
//   RULE <id>: IF <atom> AND <atom> ... THEN <CLASS|fact> EXPLAIN "<template>"
//
// An atom is either "<feature> <op> <number|true|false>" with op one of
// < <= > >= == != , or the bare name of a fact concluded by another rule.
// Templates may reference "{feature}" slots for features the rule tests.

#include "fdd/core.hpp"
#include "fdd/csv.hpp"
#include "fdd/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fdd {

enum class Comparator : std::uint8_t { Less, LessEqual, Greater, GreaterEqual, Equal, NotEqual };

struct Atom {
    bool is_fact = false;
    std::string fact;
    Feature feature = Feature::Drift;
    Comparator op = Comparator::Equal;
    double value = 0.0;

    bool holds(const FeatureVector& x, const std::set<std::string>& facts) const {
        if (is_fact) return facts.count(fact) > 0;
        const double v = x[feature];
        switch (op) {
        case Comparator::Less: return v < value;
        case Comparator::LessEqual: return v <= value;
        case Comparator::Greater: return v > value;
        case Comparator::GreaterEqual: return v >= value;
        case Comparator::Equal: return v == value;
        case Comparator::NotEqual: return v != value;
        }
        return false;
    }
};

struct RuleConclusion {
    bool is_class = false;
    DiagnosisClass cls = DiagnosisClass::Healthy;
    std::string fact;
};

struct Rule {
    std::string id;
    std::vector<Atom> conditions;
    RuleConclusion conclusion;
    std::string explanation_template;
    std::size_t line = 0;
};

struct FiredRule {
    std::string id;
    std::string sentence; // empty when the rule has no template
};

struct Conclusion {
    DiagnosisClass cls = DiagnosisClass::Healthy;
    std::vector<std::string> rule_ids; // supporting rules in firing order
    std::vector<std::string> sentences;
};

struct InferenceResult {
    std::vector<FiredRule> fired;
    std::vector<Conclusion> conclusions;
    std::set<std::string> facts;

    const Conclusion* find(DiagnosisClass c) const {
        for (const auto& k : conclusions) {
            if (k.cls == c) return &k;
        }
        return nullptr;
    }
};

/// "A, B, C and D."
inline std::string join_sentences(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
        out += parts[i];
    }
    if (!out.empty()) out += ".";
    return out;
}

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_on(const std::string& s, const std::string& sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto at = s.find(sep, start);
        if (at == std::string::npos) {
            out.push_back(trim(s.substr(start)));
            return out;
        }
        out.push_back(trim(s.substr(start, at - start)));
        start = at + sep.size();
    }
}

inline bool is_identifier(const std::string& s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

inline std::string format_slot(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

/// Template slot names, in order of appearance.
inline std::vector<std::string> slots(const std::string& tmpl, const std::string& source, std::size_t line) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] == '{') {
            const auto close = tmpl.find('}', i);
            if (close == std::string::npos) throw ConfigError(source, line, "unterminated '{' in template");
            out.push_back(tmpl.substr(i + 1, close - i - 1));
            i = close;
        } else if (tmpl[i] == '}') {
            throw ConfigError(source, line, "stray '}' in template");
        }
    }
    return out;
}

} // namespace detail

class RuleSet {
public:
    RuleSet() = default;

    explicit RuleSet(std::vector<Rule> rules, const std::string& source = "<rules>") : rules_(std::move(rules)) {
        validate(source);
    }

    const std::vector<Rule>& rules() const noexcept { return rules_; }

    static RuleSet parse(const std::string& text, const std::string& source = "<rules>") {
        // Gather blocks.
        std::vector<std::pair<std::string, std::size_t>> blocks;
        std::istringstream in(text);
        std::string raw;
        std::size_t line = 0;
        bool open = false;
        while (std::getline(in, raw)) {
            ++line;
            std::string s = detail::trim(raw);
            if (s.empty()) {
                open = false;
                continue;
            }
            if (s[0] == '#') continue;
            if (s.rfind("RULE ", 0) == 0) {
                blocks.emplace_back(s, line);
                open = true;
            } else if (open) {
                blocks.back().first += " " + s;
            } else {
                throw ConfigError(source, line, "expected 'RULE <id>: IF ...'");
            }
        }

        std::vector<Rule> rules;
        for (const auto& [block, at] : blocks) rules.push_back(parse_rule(block, source, at));
        return RuleSet(std::move(rules), source);
    }

    static RuleSet load(const std::string& path) { return parse(csv::read_file(path), path); }

    /// Forward chaining to a fixpoint; each rule fires at most once.
    InferenceResult infer(const FeatureVector& x) const {
        InferenceResult res;
        std::vector<bool> fired(rules_.size(), false);
        std::map<std::string, std::size_t> asserted_by; // fact -> first rule asserting it
        std::vector<std::size_t> order;                 // firing order
        std::vector<std::set<std::size_t>> support(rules_.size());

        bool progress = true;
        while (progress) {
            progress = false;
            for (std::size_t r = 0; r < rules_.size(); ++r) {
                if (fired[r]) continue;
                const Rule& rule = rules_[r];
                const bool all = std::all_of(rule.conditions.begin(), rule.conditions.end(),
                                             [&](const Atom& a) { return a.holds(x, res.facts); });
                if (!all) continue;
                fired[r] = true;
                progress = true;
                order.push_back(r);
                support[r].insert(r);
                for (const auto& a : rule.conditions) {
                    if (a.is_fact) {
                        const auto& s = support[asserted_by.at(a.fact)];
                        support[r].insert(s.begin(), s.end());
                    }
                }
                if (!rule.conclusion.is_class) {
                    res.facts.insert(rule.conclusion.fact);
                    asserted_by.emplace(rule.conclusion.fact, r);
                }
                res.fired.push_back({rule.id, render(rule, x)});
            }
        }

        std::vector<std::size_t> rank(rules_.size(), 0);
        for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = k;
        for (std::size_t k = 0; k < order.size(); ++k) {
            const Rule& rule = rules_[order[k]];
            if (!rule.conclusion.is_class) continue;
            Conclusion* c = nullptr;
            for (auto& existing : res.conclusions) {
                if (existing.cls == rule.conclusion.cls) c = &existing;
            }
            if (!c) {
                res.conclusions.push_back({rule.conclusion.cls, {}, {}});
                c = &res.conclusions.back();
            }
            std::set<std::size_t> merged;
            for (const auto& id : c->rule_ids) {
                for (std::size_t r = 0; r < rules_.size(); ++r) {
                    if (rules_[r].id == id) merged.insert(r);
                }
            }
            merged.insert(support[order[k]].begin(), support[order[k]].end());
            std::vector<std::size_t> ordered(merged.begin(), merged.end());
            std::sort(ordered.begin(), ordered.end(), [&](std::size_t a, std::size_t b) { return rank[a] < rank[b]; });
            c->rule_ids.clear();
            c->sentences.clear();
            for (std::size_t r : ordered) {
                c->rule_ids.push_back(rules_[r].id);
                const auto& fr = res.fired[rank[r]];
                if (!fr.sentence.empty()) c->sentences.push_back(fr.sentence);
            }
        }
        return res;
    }

    const Rule* find(const std::string& id) const {
        for (const auto& r : rules_) {
            if (r.id == id) return &r;
        }
        return nullptr;
    }

    static std::string render(const Rule& rule, const FeatureVector& x) {
        std::string out;
        const auto& t = rule.explanation_template;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] == '{') {
                const auto close = t.find('}', i);
                const auto f = feature_by_name(t.substr(i + 1, close - i - 1));
                out += detail::format_slot(x[*f]);
                i = close;
            } else {
                out += t[i];
            }
        }
        return out;
    }

private:
    static Rule parse_rule(const std::string& block, const std::string& source, std::size_t line) {
        Rule rule;
        rule.line = line;
        std::string body = block.substr(5);

        const auto colon = body.find(':');
        if (colon == std::string::npos) throw ConfigError(source, line, "missing ':' after rule id");
        rule.id = detail::trim(body.substr(0, colon));
        if (!detail::is_identifier(rule.id)) throw ConfigError(source, line, "bad rule id '" + rule.id + "'");
        body = detail::trim(body.substr(colon + 1));

        const auto explain = body.find(" EXPLAIN ");
        if (explain != std::string::npos) {
            std::string quoted = detail::trim(body.substr(explain + 9));
            if (quoted.size() < 2 || quoted.front() != '"' || quoted.back() != '"') {
                throw ConfigError(source, line, "EXPLAIN expects a double-quoted template");
            }
            rule.explanation_template = quoted.substr(1, quoted.size() - 2);
            body = detail::trim(body.substr(0, explain));
        }

        if (body.rfind("IF ", 0) != 0) throw ConfigError(source, line, "rule '" + rule.id + "' must start with IF");
        const auto then = body.find(" THEN ");
        if (then == std::string::npos) throw ConfigError(source, line, "rule '" + rule.id + "' has no THEN");
        const std::string conds = detail::trim(body.substr(3, then - 3));
        const std::string concl = detail::trim(body.substr(then + 6));

        if (conds.empty()) throw ConfigError(source, line, "rule '" + rule.id + "' has no conditions");
        for (const auto& text : detail::split_on(conds, " AND ")) rule.conditions.push_back(parse_atom(text, source, line));

        if (auto c = parse_class(concl)) {
            rule.conclusion.is_class = true;
            rule.conclusion.cls = *c;
        } else if (detail::is_identifier(concl) && concl != "AND") {
            rule.conclusion.fact = concl;
        } else {
            throw ConfigError(source, line, "bad conclusion '" + concl + "'");
        }
        return rule;
    }

    static Atom parse_atom(const std::string& text, const std::string& source, std::size_t line) {
        std::istringstream ss(text);
        std::vector<std::string> w;
        for (std::string t; ss >> t;) w.push_back(t);
        Atom a;
        if (w.size() == 1) {
            if (!detail::is_identifier(w[0])) throw ConfigError(source, line, "bad fact name '" + w[0] + "'");
            if (feature_by_name(w[0])) {
                throw ConfigError(source, line, "feature '" + w[0] + "' used without a comparison");
            }
            a.is_fact = true;
            a.fact = w[0];
            return a;
        }
        if (w.size() != 3) throw ConfigError(source, line, "cannot parse condition '" + text + "'");
        auto f = feature_by_name(w[0]);
        if (!f) throw ConfigError(source, line, "unknown feature '" + w[0] + "'");
        a.feature = *f;
        static const std::map<std::string, Comparator> ops = {
            {"<", Comparator::Less},    {"<=", Comparator::LessEqual}, {">", Comparator::Greater},
            {">=", Comparator::GreaterEqual}, {"==", Comparator::Equal}, {"!=", Comparator::NotEqual}};
        auto op = ops.find(w[1]);
        if (op == ops.end()) throw ConfigError(source, line, "unknown comparator '" + w[1] + "'");
        a.op = op->second;
        if (w[2] == "true" || w[2] == "false") {
            a.value = w[2] == "true" ? 1.0 : 0.0;
        } else {
            auto res = std::from_chars(w[2].data(), w[2].data() + w[2].size(), a.value);
            if (res.ec != std::errc{} || res.ptr != w[2].data() + w[2].size()) {
                throw ConfigError(source, line, "bad constant '" + w[2] + "'");
            }
        }
        return a;
    }

    void validate(const std::string& source) const {
        std::set<std::string> ids;
        std::map<std::string, std::vector<std::size_t>> producers;
        for (std::size_t r = 0; r < rules_.size(); ++r) {
            const auto& rule = rules_[r];
            if (!ids.insert(rule.id).second) throw ConfigError(source, rule.line, "duplicate rule id '" + rule.id + "'");
            if (rule.conditions.empty()) throw ConfigError(source, rule.line, "rule '" + rule.id + "' has no conditions");
            if (!rule.conclusion.is_class) producers[rule.conclusion.fact].push_back(r);
            std::set<std::string> tested;
            for (const auto& a : rule.conditions) {
                if (!a.is_fact) tested.insert(std::string(kFeatureNames[static_cast<std::size_t>(a.feature)]));
            }
            for (const auto& slot : detail::slots(rule.explanation_template, source, rule.line)) {
                if (!tested.count(slot)) {
                    throw ConfigError(source, rule.line,
                                      "template slot '{" + slot + "}' does not name a feature tested by rule '" + rule.id + "'");
                }
            }
        }
        for (const auto& rule : rules_) {
            for (const auto& a : rule.conditions) {
                if (a.is_fact && !producers.count(a.fact)) {
                    throw ConfigError(source, rule.line, "fact '" + a.fact + "' is never concluded by any rule");
                }
            }
        }

        // Fact dependency graph: condition fact -> concluded fact. A cycle can
        // never make progress under forward chaining.
        std::map<std::string, std::set<std::string>> edges;
        for (const auto& rule : rules_) {
            if (rule.conclusion.is_class) continue;
            for (const auto& a : rule.conditions) {
                if (a.is_fact) edges[a.fact].insert(rule.conclusion.fact);
            }
        }
        std::map<std::string, int> state; // 0 new, 1 on stack, 2 done
        std::vector<std::string> path;
        std::function<void(const std::string&)> visit = [&](const std::string& f) {
            state[f] = 1;
            path.push_back(f);
            for (const auto& g : edges[f]) {
                if (state[g] == 1) {
                    std::string cycle;
                    auto it = std::find(path.begin(), path.end(), g);
                    for (; it != path.end(); ++it) cycle += *it + " -> ";
                    throw InferenceError("cyclic rule dependency: " + cycle + g);
                }
                if (state[g] == 0) visit(g);
            }
            path.pop_back();
            state[f] = 2;
        };
        for (const auto& [f, _] : producers) {
            if (state[f] == 0) visit(f);
        }
    }

    std::vector<Rule> rules_;
};

inline InferenceResult infer_rules(const RuleSet& rules, const FeatureVector& facts) { return rules.infer(facts); }

/// Shipped knowledge base.
inline constexpr const char* kDefaultRules = R"rules(# Channel diagnosis knowledge base

RULE gain_low: IF drift <= -0.15 THEN gain_low
  EXPLAIN "Channel has a calibration problem (channel LYSO photopeak drift is high)"

RULE gain_high: IF drift >= 0.15 THEN gain_high
  EXPLAIN "Channel has a calibration problem (channel LYSO photopeak drift is high)"

RULE weak_channel: IF strength < 0.5 AND ident_pass == false AND energy_pass == false THEN weak_channel
  EXPLAIN "channel is weak (strength is low, identification is failed, energy is failed)"

RULE low_gain_not_saturated: IF gain_low AND saturated == false THEN not_saturated
  EXPLAIN "channel is not saturated"

RULE bias_increase_safe: IF gain_low AND photopeak_adc < 230 THEN bias_increase_safe
  EXPLAIN "polarization increase is safe"

RULE bias_decrease_safe: IF gain_high AND photopeak_adc > 280 THEN bias_decrease_safe
  EXPLAIN "polarization decrease is safe"

RULE increase_bias_weak: IF gain_low AND weak_channel AND not_saturated AND bias_increase_safe THEN INCREASE_BIAS

RULE increase_bias: IF gain_low AND not_saturated AND bias_increase_safe THEN INCREASE_BIAS

RULE decrease_bias: IF gain_high AND bias_decrease_safe THEN DECREASE_BIAS

RULE noise_flood: IF saturated == true THEN noise_flood
  EXPLAIN "channel is saturated by noise counts"

RULE threshold_raise_safe: IF noise_flood AND ident_pass == true THEN threshold_raise_safe
  EXPLAIN "noise threshold increase is safe (identification is passed)"

RULE increase_threshold: IF noise_flood AND threshold_raise_safe THEN INCREASE_NOISE_THRESHOLD

RULE starved: IF strength < 0.85 AND drift > -0.1 AND drift < 0.1 THEN starved
  EXPLAIN "channel is starved (strength is low while photopeak drift is low)"

RULE decrease_threshold: IF starved AND saturated == false THEN DECREASE_NOISE_THRESHOLD
  EXPLAIN "noise threshold decrease is safe"
)rules";

inline RuleSet default_rules() { return RuleSet::parse(kDefaultRules, "<default rules>"); }

} // namespace fdd
