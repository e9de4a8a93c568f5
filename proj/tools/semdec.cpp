#include <semdec/config.hpp>
#include <semdec/dataio.hpp>
#include <semdec/error.hpp>
#include <semdec/latent_index.hpp>
#include <semdec/pipeline.hpp>
#include <semdec/report.hpp>
#include <semdec/synth.hpp>
#include <semdec/taxonomy.hpp>
#include <semdec/text.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace semdec;

namespace {

/// Thrown for argument combinations CLI11 cannot express; maps to exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DecodeFlags {
    std::string config;
    std::string split = "test";
    std::optional<std::size_t> k;
    std::optional<std::string> metric;
    bool no_adapt = false;
    std::optional<std::string> adapt_target;
    std::optional<std::string> adapt_scope;
    std::optional<std::string> wup_formula;
    std::optional<std::size_t> threads;
    bool json = false;
};

void print_aggregates(const EvaluationReport& r, bool json) {
    const auto& a = r.aggregates;
    if (json) {
        nlohmann::json j;
        j["subject"] = r.subject;
        j["split"] = r.split;
        j["mean_wup"] = a.mean_wup;
        j["std_wup"] = a.std_wup;
        j["top1_accuracy"] = a.top1_accuracy;
        j["top5_label_hit_rate"] = a.top5_label_hit_rate;
        j["n_items"] = a.n_items;
        j["n_skipped"] = r.skipped.size();
        std::cout << j.dump() << '\n';
        return;
    }
    std::cout << r.subject << ' ' << r.split << ": mean_wup " << text::format_fixed(a.mean_wup, 4) << " +/- "
              << text::format_fixed(a.std_wup, 4) << ", top1 " << text::format_fixed(a.top1_accuracy, 4) << ", top"
              << r.k << " hit " << text::format_fixed(a.top5_label_hit_rate, 4) << ", items " << a.n_items;
    if (!r.skipped.empty()) {
        std::cout << ", skipped " << r.skipped.size();
    }
    std::cout << '\n';
}

int cmd_preprocess(const std::vector<std::string>& run_files, const std::string& events_file, std::size_t shift,
                   const std::string& out) {
    std::vector<VolumeSeries> runs;
    for (const auto& f : run_files) {
        runs.push_back(load_volume_series(f));
    }
    const auto events = load_events(events_file);
    const auto trials = preprocess(runs, events, shift);
    save_trial_matrix(trials, out);
    std::cout << "wrote " << trials.rows() << " trials x " << trials.cols() << " voxels to " << out << '\n';
    return 0;
}

int cmd_train(const std::string& config, std::optional<std::uint64_t> seed, const std::optional<std::string>& grid,
              std::optional<std::size_t> threads, bool json) {
    auto cfg = load_config(config);
    if (seed) {
        cfg.seed = *seed;
    }
    if (grid) {
        cfg.lambda_grid = parse_lambda_list(*grid);
    }
    if (threads) {
        cfg.threads = *threads;
    }
    cfg.validate();
    const auto result = run_train(cfg);
    if (json) {
        std::cout << ridge::to_json(result.grid).dump() << '\n';
    } else {
        std::cout << "lambda " << text::format_double(result.grid.chosen_lambda()) << " (validation mse "
                  << text::format_double(result.grid.losses[result.grid.chosen]) << "), model written to "
                  << cfg.model.string() << '\n';
    }
    return 0;
}

int cmd_build_index(const std::string& features, const std::string& metric, std::size_t k) {
    if (k < 1) {
        throw UsageError("--k must be at least 1");
    }
    const auto m = parse_metric(metric);
    const auto idx = LatentIndex::build(load_feature_matrix(features), m);
    if (k > idx.size()) {
        throw ConfigError("--k " + std::to_string(k) + " exceeds the index size " + std::to_string(idx.size()));
    }
    save_sidecar(features, IndexSidecar{m, k}, idx);
    std::cout << "indexed " << idx.size() << " items of dim " << idx.dim() << " (" << metric << ", k=" << k << ") -> "
              << sidecar_path(features).string() << '\n';
    return 0;
}

int cmd_decode(const DecodeFlags& f) {
    auto cfg = load_config(f.config);
    if (f.k) {
        cfg.k = *f.k;
    }
    if (f.metric) {
        cfg.metric = parse_metric(*f.metric);
    }
    if (f.no_adapt) {
        cfg.adapt = false;
    }
    if (f.adapt_target) {
        cfg.adapt_target = parse_adapt_target(*f.adapt_target);
    }
    if (f.adapt_scope) {
        cfg.adapt_scope = parse_adapt_scope(*f.adapt_scope);
    }
    if (f.wup_formula) {
        cfg.wup_formula = parse_wup_formula(*f.wup_formula);
    }
    if (f.threads) {
        cfg.threads = *f.threads;
    }
    cfg.validate();
    const auto report = run_decode(cfg, f.split);
    print_aggregates(report, f.json);
    return 0;
}

SynsetRef resolve_term(const Taxonomy& tax, const std::string& term) {
    if (tax.contains(term)) {
        return SynsetRef(term);
    }
    const auto hits = tax.lookup_lemma(term);
    if (hits.empty()) {
        throw UnknownSynsetError("'" + term + "' is neither a synset nor a lemma in the taxonomy");
    }
    return hits.front();
}

int cmd_wup(const std::string& a, const std::string& b, const std::optional<std::string>& taxonomy,
            const std::optional<std::string>& lemmas, const std::string& format, const std::string& formula_name) {
    const auto formula = parse_wup_formula(formula_name);
    if (!taxonomy) {
        // Without a taxonomy only the identity pair has a defined value.
        if (a != b) {
            throw UsageError("wup needs --taxonomy unless both ids are the same");
        }
        if (!SynsetRef::valid(a)) {
            throw ParseError("malformed synset id '" + a + "'", 0);
        }
        std::cout << text::format_fixed(formula == WupFormula::standard ? 1.0 : 0.5, 6) << '\n';
        return 0;
    }
    std::optional<fs::path> lemma_path;
    if (lemmas) {
        lemma_path = *lemmas;
    }
    Taxonomy tax;
    if (format == "wordnet") {
        tax = parse_wordnet_noun(fs::path(*taxonomy), lemma_path);
    } else if (format == "edges") {
        tax = parse_edge_list(fs::path(*taxonomy), lemma_path);
    } else {
        throw UsageError("--format must be edges or wordnet");
    }
    std::cout << text::format_fixed(tax.wup(resolve_term(tax, a), resolve_term(tax, b), formula), 6) << '\n';
    return 0;
}

int cmd_synth(synth::SynthParams p, const std::string& out, std::optional<double> snr) {
    if (snr) {
        p.voxel_snr = *snr;
    }
    const auto world = synth::generate(p);
    const auto cfg = synth::write_world(world, out);
    std::cout << "synthetic world: " << world.class_labels.size() << " classes (" << world.test_classes.size()
              << " test), " << world.train_trials.rows() << " train trials, " << world.test_trials.rows()
              << " test trials, voxel noise " << text::format_double(world.voxel_noise) << ", chance wup "
              << text::format_fixed(synth::chance_level(world), 6) << "\nconfig: " << (fs::path(out) / "config.toml").string()
              << '\n';
    return 0;
}

int cmd_prompts(const std::string& report, const std::string& out, bool all) {
    emit_prompts(load_report(report), out, all);
    return 0;
}

int cmd_chart(const std::vector<std::string>& reports, const std::string& out) {
    std::vector<EvaluationReport> rs;
    for (const auto& r : reports) {
        rs.push_back(load_report(r));
    }
    emit_report_chart(rs, out);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"semdec: decode semantic categories from brain responses"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "semdec 0.1.0");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "z-score runs and average event windows into a trial matrix");
    std::vector<std::string> pre_runs;
    std::string pre_events, pre_out;
    std::size_t pre_shift = 1;
    pre->add_option("--runs", pre_runs, "Volume series files (FMX1)")->required()->check(CLI::ExistingFile);
    pre->add_option("--events", pre_events, "Event table (TSV)")->required()->check(CLI::ExistingFile);
    pre->add_option("--hrf-shift", pre_shift, "Response lag in volumes")->capture_default_str();
    pre->add_option("--out", pre_out, "Output trial matrix")->required();

    // synth
    auto* syn = app.add_subcommand("synth", "generate a synthetic experiment with a planted voxel model");
    synth::SynthParams sp;
    std::string syn_out;
    std::optional<double> syn_snr;
    syn->add_option("--out", syn_out, "Output directory")->required();
    syn->add_option("--seed", sp.seed, "Random seed")->capture_default_str();
    syn->add_option("--classes", sp.classes, "Number of classes")->capture_default_str();
    syn->add_option("--items-per-class", sp.items_per_class, "Training/test items per class")->capture_default_str();
    syn->add_option("--test-classes", sp.test_classes, "Classes held out for testing")->capture_default_str();
    syn->add_option("--index-items", sp.index_items_per_class, "Index exemplars per class")->capture_default_str();
    syn->add_option("--dim", sp.dim, "Feature dimension")->capture_default_str();
    syn->add_option("--voxels", sp.voxels, "Voxel count")->capture_default_str();
    syn->add_option("--spread", sp.prototype_spread, "Prototype spread")->capture_default_str();
    syn->add_option("--feature-noise", sp.feature_noise, "Item noise around the class prototype")->capture_default_str();
    syn->add_option("--voxel-noise", sp.voxel_noise, "Trial-level voxel noise sd")->capture_default_str();
    syn->add_option("--voxel-snr", syn_snr, "Set voxel noise from a signal-to-noise variance ratio");
    syn->add_option("--test-repeats", sp.test_repeats, "Presentations per test image")->capture_default_str();
    syn->add_option("--test-gain", sp.test_gain, "Response gain in the test session")->capture_default_str();
    syn->add_option("--test-shift", sp.test_shift, "Baseline offset in the test session")->capture_default_str();
    syn->add_option("--events-per-run", sp.events_per_run, "Events per run")->capture_default_str();

    // train
    auto* tr = app.add_subcommand("train", "fit the voxel-to-feature ridge model with a lambda grid search");
    std::string tr_config;
    std::optional<std::uint64_t> tr_seed;
    std::optional<std::string> tr_grid;
    std::optional<std::size_t> tr_threads;
    bool tr_json = false;
    tr->add_option("--config", tr_config, "Experiment config")->required();
    tr->add_option("--seed", tr_seed, "Override the split seed");
    tr->add_option("--lambda-grid", tr_grid, "Comma-separated lambda values");
    tr->add_option("--threads", tr_threads, "Worker threads (0 = all cores)");
    tr->add_flag("--json", tr_json, "Print the grid search report as JSON");

    // build-index
    auto* bi = app.add_subcommand("build-index", "validate a labelled feature file and write its index sidecar");
    std::string bi_features, bi_metric = "euclidean";
    std::size_t bi_k = 5;
    bi->add_option("--features", bi_features, "Labelled feature matrix")->required()->check(CLI::ExistingFile);
    bi->add_option("--metric", bi_metric, "euclidean or cosine")
        ->check(CLI::IsMember({"euclidean", "cosine"}))
        ->capture_default_str();
    bi->add_option("--k", bi_k, "Default neighbour count")->capture_default_str();

    // decode
    auto* de = app.add_subcommand("decode", "predict, adapt, classify and score a split");
    DecodeFlags df;
    de->add_option("--config", df.config, "Experiment config")->required();
    de->add_option("--split", df.split, "test or train")->check(CLI::IsMember({"test", "train"}))->capture_default_str();
    de->add_option("--k", df.k, "Neighbour count");
    de->add_option("--metric", df.metric, "euclidean or cosine")->check(CLI::IsMember({"euclidean", "cosine"}));
    de->add_flag("--no-adapt", df.no_adapt, "Skip moment matching");
    de->add_option("--adapt-target", df.adapt_target, "true-train or pred-train")
        ->check(CLI::IsMember({"true-train", "pred-train"}));
    de->add_option("--adapt-scope", df.adapt_scope, "feature or global")->check(CLI::IsMember({"feature", "global"}));
    de->add_option("--wup-formula", df.wup_formula, "standard or paper")
        ->check(CLI::IsMember({"standard", "paper", "paper_literal"}));
    de->add_option("--threads", df.threads, "Worker threads (0 = all cores)");
    de->add_flag("--json", df.json, "Print aggregates as JSON");

    // wup
    auto* wu = app.add_subcommand("wup", "Wu-Palmer similarity of two synsets (ids or lemmas)");
    std::string wu_a, wu_b, wu_format = "wordnet", wu_formula = "standard";
    std::optional<std::string> wu_tax, wu_lemmas;
    wu->add_option("a", wu_a, "First synset")->required();
    wu->add_option("b", wu_b, "Second synset")->required();
    wu->add_option("--taxonomy", wu_tax, "data.noun or edge list")->check(CLI::ExistingFile);
    wu->add_option("--lemmas,--index-noun", wu_lemmas, "index.noun or lemma table")->check(CLI::ExistingFile);
    wu->add_option("--format", wu_format, "wordnet or edges")
        ->check(CLI::IsMember({"wordnet", "edges"}))
        ->capture_default_str();
    wu->add_option("--wup-formula", wu_formula, "standard or paper")
        ->check(CLI::IsMember({"standard", "paper", "paper_literal"}))
        ->capture_default_str();

    // prompts
    auto* pr = app.add_subcommand("prompts", "write generator prompts from a decode report");
    std::string pr_report, pr_out;
    bool pr_all = false;
    pr->add_option("--report", pr_report, "Report JSON")->required()->check(CLI::ExistingFile);
    pr->add_option("--out", pr_out, "Output TSV")->required();
    pr->add_flag("--all-candidates", pr_all, "One line per neighbour instead of per item");

    // chart
    auto* ch = app.add_subcommand("chart", "bar chart of mean Wu-Palmer similarity per report");
    std::vector<std::string> ch_reports;
    std::string ch_out;
    ch->add_option("--report", ch_reports, "Report JSON files")->required()->check(CLI::ExistingFile);
    ch->add_option("--out", ch_out, "Output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*pre) {
            return cmd_preprocess(pre_runs, pre_events, pre_shift, pre_out);
        }
        if (*syn) {
            return cmd_synth(sp, syn_out, syn_snr);
        }
        if (*tr) {
            return cmd_train(tr_config, tr_seed, tr_grid, tr_threads, tr_json);
        }
        if (*bi) {
            return cmd_build_index(bi_features, bi_metric, bi_k);
        }
        if (*de) {
            return cmd_decode(df);
        }
        if (*wu) {
            return cmd_wup(wu_a, wu_b, wu_tax, wu_lemmas, wu_format, wu_formula);
        }
        if (*pr) {
            return cmd_prompts(pr_report, pr_out, pr_all);
        }
        if (*ch) {
            return cmd_chart(ch_reports, ch_out);
        }
    } catch (const UsageError& e) {
        std::cerr << "semdec: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "semdec: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
