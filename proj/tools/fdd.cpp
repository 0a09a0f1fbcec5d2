// fdd: command-line front end for the channel fault detection and diagnosis
// toolkit. Subcommands: simulate, train, run, eval, serve.
//
// Exit codes: 0 ok, 1 runtime failure, 2 usage, 3 config validation.

#include "fdd/evaluation.hpp"
#include "fdd/fdd.hpp"
#include "fdd/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fdd;

namespace {

enum Exit : int { kOk = 0, kRuntime = 1, kUsage = 2, kConfig = 3 };

/// Bad flag values discovered after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 42;
    double threshold = kDefaultDetectionThreshold;
    std::string config_dir;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Seed for every random draw")->capture_default_str();
    cmd->add_option("--threshold", c.threshold, "Detection probability threshold in (0, 1]")->capture_default_str();
    cmd->add_option("--config-dir", c.config_dir, "Directory holding priority.fuzzy and diagnosis.rules");
    cmd->add_option("--out-dir", c.out_dir, "Directory for output artifacts")->capture_default_str();
}

void check_common(const Common& c) {
    try {
        check_threshold(c.threshold);
    } catch (const ValidationError& e) {
        throw UsageError(e.what());
    }
}

fs::path out_path(const Common& c, const std::string& name) {
    fs::create_directories(c.out_dir);
    return fs::path(c.out_dir) / name;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot write " + p.string());
    out << text;
}

struct Configs {
    FuzzyConfig fuzzy;
    RuleSet rules;
    std::string fuzzy_source;
    std::string rules_source;
};

/// Shipped defaults unless --config-dir is given; then both files must exist.
Configs load_configs(const Common& c) {
    if (c.config_dir.empty()) {
        return {default_fuzzy_config(), default_rules(), "<default>", "<default>"};
    }
    const auto fuzzy = (fs::path(c.config_dir) / "priority.fuzzy").string();
    const auto rules = (fs::path(c.config_dir) / "diagnosis.rules").string();
    for (const auto& p : {fuzzy, rules}) {
        if (!fs::exists(p)) throw ConfigError(p, 0, "missing config file");
    }
    try {
        return {FuzzyConfig::load(fuzzy), RuleSet::load(rules), fuzzy, rules};
    } catch (const InferenceError& e) {
        throw ConfigError(rules, 0, e.what());
    }
}

std::string sha_like(const std::string& text) { return hex64(fnv1a(text)); }

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// 0 picks the default ring count when it divides the channel count, else a
/// single ring, so small test scanners need no --rings.
std::size_t resolve_rings(std::size_t rings, std::size_t channels) {
    if (rings != 0) return rings;
    return channels % kDefaultRings == 0 ? kDefaultRings : 1;
}

struct SimulateArgs {
    std::size_t channels = kDefaultChannels;
    std::size_t rings = 0;
    std::size_t major = 0;
    std::size_t per_level = 0;
    double increase_fraction = 0.5;
};

/// Campaign manifest shared by every artifact derived from one simulation.
RunManifest campaign_manifest(const Common& c, const SimulateArgs& a) {
    RunManifest m;
    m.seed = c.seed;
    m.n_channels = a.channels;
    m.rings = resolve_rings(a.rings, a.channels);
    m.campaign.seed = mix_seed(c.seed, 2);
    m.campaign.major_fault_count = a.major;
    m.campaign.per_level_per_type_count = a.per_level;
    m.campaign.increase_fraction = a.increase_fraction;
    m.threshold = c.threshold;
    return m;
}

int cmd_simulate(const Common& c, const SimulateArgs& a) {
    check_common(c);
    if (a.increase_fraction < 0.0 || a.increase_fraction > 1.0) throw UsageError("--increase-fraction must lie in [0, 1]");
    const RunManifest m = campaign_manifest(c, a);
    const std::string campaign = m.hash();

    const ScannerModel nominal = build_scanner(a.channels, m.rings, c.seed);
    const ScannerModel faulted = apply_campaign(nominal, plan_campaign(m.campaign, nominal));
    const auto obs = simulate_observables(faulted, mix_seed(c.seed, 3));
    std::vector<ChannelObservables> reference;
    for (std::size_t i = 0; i < nominal.size(); ++i) reference.push_back(expected_observables(nominal, channel(i)));

    auto tag = [&](csv::Writer w) {
        w.meta("campaign", campaign);
        w.meta("seed", std::to_string(c.seed));
        return w;
    };
    tag(scanner_config_csv(faulted)).save(out_path(c, "scanner_config.csv").string());
    tag(observables_csv(obs)).save(out_path(c, "observables.csv").string());
    tag(observables_csv(reference)).save(out_path(c, "reference.csv").string());
    tag(labels_csv(faulted.faults)).save(out_path(c, "labels.csv").string());
    nlohmann::ordered_json j = m.to_json();
    j["campaign_hash"] = campaign;
    write_text(out_path(c, "campaign.json"), j.dump(2) + "\n");
    std::cout << "simulated " << a.channels << " channels, " << faulted.faults.size() << " faults -> " << c.out_dir
              << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::size_t rounds = 2;
    std::size_t major = 200;
    std::size_t per_level = 120;
    std::size_t trees = 100;
    std::size_t channels = kDefaultChannels;
    std::size_t rings = 0;
    std::string history;
};

TrainingPlan training_plan(const Common& c, const TrainArgs& a) {
    TrainingPlan p;
    p.seed = c.seed;
    p.rounds = a.rounds;
    p.major_per_round = a.major;
    p.per_level_per_type = a.per_level;
    p.n_channels = a.channels;
    p.rings = resolve_rings(a.rings, a.channels);
    return p;
}

Forest train_default(const Common& c, const TrainArgs& a) {
    ForestConfig fc;
    fc.n_trees = a.trees;
    fc.seed = c.seed;
    return train_forest(to_samples(training_campaign(training_plan(c, a))), fc);
}

int cmd_train(const Common& c, const TrainArgs& a) {
    check_common(c);
    if (a.trees < 1) throw UsageError("--trees must be at least 1");
    const auto cases = training_campaign(training_plan(c, a));
    ForestConfig fc;
    fc.n_trees = a.trees;
    fc.seed = c.seed;
    const Forest forest = train_forest(to_samples(cases), fc);
    write_text(out_path(c, "forest.txt"), forest.serialize());
    if (!a.history.empty()) {
        HistoryStore store(a.history);
        std::vector<std::pair<FeatureVector, Label>> labeled;
        std::vector<ChannelId> channels;
        for (const auto& k : cases) {
            labeled.emplace_back(k.features, k.label);
            channels.push_back(k.channel);
        }
        store.record_bootstrap(labeled, channels);
        store.mark_retrained(forest.hash());
    }
    std::cout << "trained " << a.trees << " trees on " << cases.size() << " cases, forest " << forest.hash() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct Inputs {
    ScannerLayout layout;
    std::vector<ChannelObservables> obs;
    std::vector<ReferenceBaseline> refs;
    std::string campaign;
};

Inputs load_inputs(const std::string& dir) {
    const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };
    const auto cfg_table = csv::load(path("scanner_config.csv"));
    const auto obs_table = csv::load(path("observables.csv"));
    const auto ref_table = csv::load(path("reference.csv"));
    Inputs in;
    in.layout = parse_scanner_config(cfg_table).layout;
    in.obs = parse_observables(obs_table);
    in.refs = make_references(parse_observables(ref_table));
    in.campaign = obs_table.meta_or("campaign");
    for (const auto* t : {&cfg_table, &ref_table}) {
        if (t->meta_or("campaign") != in.campaign) {
            throw ValidationError("inputs in " + dir + " come from different simulations");
        }
    }
    if (in.obs.size() != in.layout.size() || in.refs.size() != in.layout.size()) {
        throw ValidationError("observables, reference and scanner configuration disagree on the channel count");
    }
    return in;
}

Forest load_forest(const Common& c, const std::string& forest_path, const TrainArgs& train) {
    if (!forest_path.empty()) return Forest::deserialize(csv::read_file(forest_path), forest_path);
    return train_default(c, train);
}

int cmd_run(const Common& c, const std::string& input, const std::string& forest_path, const TrainArgs& train) {
    check_common(c);
    const Configs cfg = load_configs(c);
    const Inputs in = load_inputs(input);
    const Forest forest = load_forest(c, forest_path, train);

    RunManifest m;
    m.seed = c.seed;
    m.n_channels = in.layout.size();
    m.rings = in.layout.rings();
    m.fuzzy_config = cfg.fuzzy_source == "<default>" ? "<default>" : sha_like(csv::read_file(cfg.fuzzy_source));
    m.rules_config = cfg.rules_source == "<default>" ? "<default>" : sha_like(csv::read_file(cfg.rules_source));
    m.forest = forest.hash();
    m.threshold = c.threshold;
    const std::string manifest = m.hash();

    PipelineOptions opt;
    opt.threshold = c.threshold;
    const PipelineResult r = run_pipeline(in.layout, in.obs, in.refs, forest, cfg.rules, cfg.fuzzy, opt);

    auto tag = [&](csv::Writer w) {
        w.meta("campaign", in.campaign);
        w.meta("manifest", manifest);
        return w;
    };
    tag(diagnosis_csv(r.diagnosis)).save(out_path(c, "diagnosis.csv").string());
    tag(ranking_csv(r.ranking)).save(out_path(c, "ranking.csv").string());
    tag(ranking_csv(r.priority_all)).save(out_path(c, "priority.csv").string());
    tag(extracted_csv(r.analysis.params)).save(out_path(c, "extracted.csv").string());
    nlohmann::ordered_json j = m.to_json();
    j["campaign_hash"] = in.campaign;
    j["manifest_hash"] = manifest;
    j["config"]["fuzzy_path"] = cfg.fuzzy_source;
    j["config"]["rules_path"] = cfg.rules_source;
    write_text(out_path(c, "manifest.json"), j.dump(2) + "\n");
    std::cout << "diagnosed " << in.layout.size() << " channels, " << r.ranking.size() << " faults detected\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string input = ".";
    std::string labels;
    bool wilson = false;
    bool quartile_outliers = false;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
    check_common(c);
    const auto diag = csv::load((fs::path(a.input) / "diagnosis.csv").string());
    const auto prio = csv::load((fs::path(a.input) / "priority.csv").string());
    const auto labels = csv::load(a.labels.empty() ? (fs::path(a.input) / "labels.csv").string() : a.labels);

    const std::string campaign = diag.meta_or("campaign");
    const std::string manifest = diag.meta_or("manifest");
    if (manifest.empty()) throw ValidationError(diag.source + ": missing manifest hash");
    if (prio.meta_or("manifest") != manifest) {
        throw ValidationError("mixed manifests: " + diag.source + " has " + manifest + ", " + prio.source + " has " +
                              prio.meta_or("manifest", "none"));
    }
    for (const auto* t : {&prio, &labels}) {
        if (t->meta_or("campaign") != campaign) {
            throw ValidationError("mixed campaigns: " + diag.source + " has " + campaign + ", " + t->source + " has " +
                                  t->meta_or("campaign", "none"));
        }
    }

    EvaluationInputs in;
    in.seed = std::stoull(labels.meta_or("seed", "0"));
    in.diagnoses = parse_diagnoses(diag);
    in.truth = parse_labels(labels);
    in.priority = parse_ranking(prio);
    in.ci = a.wilson ? metrics::CiMethod::Wilson : metrics::CiMethod::Wald;
    in.outliers = a.quartile_outliers ? metrics::OutlierRule::BeyondQuartiles : metrics::OutlierRule::FromMedian;
    EvaluationReport rep = evaluate(in);
    rep.json["manifest"] = {{"campaign", campaign}, {"run", manifest}};

    auto tag = [&](csv::Writer w) {
        w.meta("campaign", campaign);
        w.meta("manifest", manifest);
        return w;
    };
    write_text(out_path(c, "report.json"), rep.json.dump(2) + "\n");
    tag(table_csv(rep)).save(out_path(c, "table_balanced_accuracy.csv").string());
    tag(rate_csv(rep.per_level)).save(out_path(c, "per_level.csv").string());
    tag(rate_csv(rep.severity)).save(out_path(c, "severity.csv").string());
    tag(boxplot_csv(rep)).save(out_path(c, "boxplots.csv").string());
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    const auto& g = rep.json["global"];
    std::cout << "sensitivity " << g["sensitivity"].dump() << ", specificity " << g["specificity"].dump()
              << ", balanced accuracy " << g["balanced_accuracy"].dump() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

httplib::Server* g_server = nullptr;

int cmd_serve(const Common& c, const std::string& input, const std::string& history, const std::string& host, int port,
              const TrainArgs& train) {
    check_common(c);
    const Configs cfg = load_configs(c);
    Inputs in = load_inputs(input);
    HistoryStore store(history.empty() ? (fs::path(c.out_dir) / "history.jsonl").string() : history);

    ServiceOptions opt;
    opt.pipeline.threshold = c.threshold;
    opt.forest.n_trees = train.trees;
    opt.forest.seed = c.seed;
    if (store.training_view().empty()) {
        const auto cases = training_campaign(training_plan(c, train));
        std::vector<std::pair<FeatureVector, Label>> labeled;
        std::vector<ChannelId> channels;
        for (const auto& k : cases) {
            labeled.emplace_back(k.features, k.label);
            channels.push_back(k.channel);
        }
        store.record_bootstrap(labeled, channels);
    }
    Forest forest = train_forest(store.training_view(), opt.forest);
    store.mark_retrained(forest.hash());

    FddService service(in.layout, std::move(in.obs), std::move(in.refs), std::move(forest), cfg.rules, cfg.fuzzy, store,
                       opt);
    httplib::Server server;
    service.bind(server);
    if (!server.bind_to_port(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
    g_server = &server;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    std::cout << "serving on http://" << host << ":" << port << "\n" << std::flush;
    server.listen_after_bind();
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Channel fault detection, prioritization and diagnosis"};
    app.require_subcommand(1);

    Common common;
    SimulateArgs sim;
    TrainArgs train;
    EvalArgs eval;
    std::string input = ".";
    std::string forest_path;
    std::string history;
    std::string host = "127.0.0.1";
    int port = 8080;

    auto* simulate = app.add_subcommand("simulate", "Build a scanner, inject a fault campaign, write observables");
    add_common(simulate, common);
    simulate->add_option("--channels", sim.channels, "Channel count")->capture_default_str();
    simulate->add_option("--rings", sim.rings, "Ring count (default 16 if it divides --channels, else 1)");
    simulate->add_option("--major", sim.major, "Channels with a -50 V bias fault")->capture_default_str();
    simulate->add_option("--per-level", sim.per_level, "Channels per severity level and fault type")
        ->capture_default_str();
    simulate->add_option("--increase-fraction", sim.increase_fraction, "Share of severity faults with a positive delta")
        ->capture_default_str();

    auto add_train = [&](CLI::App* cmd) {
        cmd->add_option("--trees", train.trees, "Trees in the forest")->capture_default_str();
        cmd->add_option("--train-rounds", train.rounds, "Simulated training scanners")->capture_default_str();
        cmd->add_option("--train-major", train.major, "Major faults per training scanner")->capture_default_str();
        cmd->add_option("--train-per-level", train.per_level, "Severity faults per level and type per training scanner")
            ->capture_default_str();
    };

    auto* train_cmd = app.add_subcommand("train", "Train the forest on a seeded labeled campaign");
    add_common(train_cmd, common);
    add_train(train_cmd);
    train_cmd->add_option("--channels", train.channels, "Channels per training scanner")->capture_default_str();
    train_cmd->add_option("--rings", train.rings, "Rings per training scanner (default as for simulate)");
    train_cmd->add_option("--history", train.history, "Also store the campaign as bootstrap cases in this history file");

    auto* run = app.add_subcommand("run", "Diagnose and prioritize a simulated acquisition");
    add_common(run, common);
    add_train(run);
    run->add_option("--input", input, "Directory written by simulate")->capture_default_str();
    run->add_option("--forest", forest_path, "Forest file from train (default: train in place)");

    auto* eval_cmd = app.add_subcommand("eval", "Compute the evaluation report of a run");
    add_common(eval_cmd, common);
    eval_cmd->add_option("--input", eval.input, "Directory written by run")->capture_default_str();
    eval_cmd->add_option("--labels", eval.labels, "Ground-truth labels (default: <input>/labels.csv)");
    eval_cmd->add_flag("--wilson", eval.wilson, "Wilson score intervals instead of Wald");
    eval_cmd->add_flag("--quartile-outliers", eval.quartile_outliers, "Outliers beyond the quartiles, not the median");

    auto* serve = app.add_subcommand("serve", "HTTP service for the operator review loop");
    add_common(serve, common);
    add_train(serve);
    serve->add_option("--input", input, "Directory written by simulate")->capture_default_str();
    serve->add_option("--history", history, "History store (default: <out-dir>/history.jsonl)");
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*simulate) return cmd_simulate(common, sim);
        if (*train_cmd) return cmd_train(common, train);
        if (*run) return cmd_run(common, input, forest_path, train);
        if (*eval_cmd) return cmd_eval(common, eval);
        if (*serve) return cmd_serve(common, input, history, host, port, train);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kUsage;
}
