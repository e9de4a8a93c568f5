#pragma once

#include "adapt.hpp"
#include "config.hpp"
#include "dataio.hpp"
#include "error.hpp"
#include "latent_index.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "report.hpp"
#include "ridge.hpp"
#include "taxonomy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

/**
 * @file pipeline.hpp
 *
 * @brief End-to-end train and decode runs over files named by an ExperimentConfig.
 *
 * decode: average repetitions per image -> predict features -> moment-match to
 * the training statistics -> k nearest labelled neighbours -> plurality class
 * -> Wu-Palmer similarity against the true class.
 */

namespace semdec {

/**
 * Collapses rows sharing an image id into their mean. Output rows follow the
 * first appearance of each id. Throws if one id carries two different labels.
 */
inline TrialMatrix average_by_image_id(const TrialMatrix& trials) {
    validate(trials);
    std::vector<std::string> order;
    std::unordered_map<std::string, std::size_t> slot;
    std::vector<SynsetRef> labels;
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < trials.image_ids.size(); ++i) {
        const auto& id = trials.image_ids[i];
        auto [it, fresh] = slot.try_emplace(id, order.size());
        if (fresh) {
            order.push_back(id);
            labels.push_back(trials.labels[i]);
            counts.push_back(0);
        } else if (labels[it->second] != trials.labels[i]) {
            throw AlignmentError("image '" + id + "' is labelled both '" + labels[it->second].str() + "' and '" +
                                 trials.labels[i].str() + "'");
        }
        ++counts[it->second];
    }

    TrialMatrix out;
    out.data = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(order.size()), trials.cols());
    for (std::size_t i = 0; i < trials.image_ids.size(); ++i) {
        out.data.row(static_cast<Eigen::Index>(slot[trials.image_ids[i]])) += trials.data.row(static_cast<Eigen::Index>(i));
    }
    for (std::size_t s = 0; s < order.size(); ++s) {
        out.data.row(static_cast<Eigen::Index>(s)) /= static_cast<double>(counts[s]);
    }
    out.labels = std::move(labels);
    out.image_ids = std::move(order);
    return out;
}

/// Reorders the target rows so row i belongs to trial i's image id.
inline FeatureMatrix align_targets(const TrialMatrix& trials, const FeatureMatrix& targets) {
    std::unordered_map<std::string, std::size_t> row;
    for (std::size_t i = 0; i < targets.item_ids.size(); ++i) {
        if (!row.emplace(targets.item_ids[i], i).second) {
            throw AlignmentError("feature file lists image '" + targets.item_ids[i] + "' twice");
        }
    }
    std::vector<std::string> missing;
    FeatureMatrix out;
    out.data.resize(trials.rows(), targets.cols());
    for (std::size_t i = 0; i < trials.image_ids.size(); ++i) {
        const auto it = row.find(trials.image_ids[i]);
        if (it == row.end()) {
            missing.push_back(trials.image_ids[i]);
            continue;
        }
        out.data.row(static_cast<Eigen::Index>(i)) = targets.data.row(static_cast<Eigen::Index>(it->second));
    }
    if (!missing.empty()) {
        std::string list;
        for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
            list += (i ? ", " : "") + missing[i];
        }
        if (missing.size() > 10) {
            list += ", ...";
        }
        throw AlignmentError(std::to_string(missing.size()) + " trial image id(s) have no feature row: " + list);
    }
    out.item_ids = trials.image_ids;
    out.labels = trials.labels;
    return out;
}

inline Taxonomy load_taxonomy(const ExperimentConfig& cfg) {
    if (cfg.taxonomy_format == TaxonomyFormat::wordnet) {
        return parse_wordnet_noun(cfg.taxonomy, cfg.lemmas);
    }
    return parse_edge_list(cfg.taxonomy, cfg.lemmas);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainResult {
    ridge::RidgeModel model;
    ridge::GridSearchReport grid;
};

inline TrainResult train(const TrialMatrix& trials, const FeatureMatrix& targets, const ExperimentConfig& cfg) {
    const auto aligned = align_targets(trials, targets);
    ridge::GridSearchOptions opt;
    opt.split_fraction = cfg.split_fraction;
    opt.seed = cfg.seed;
    opt.with_intercept = cfg.intercept;
    opt.threads = cfg.threads;
    auto [model, grid] = ridge::grid_search(trials.data, aligned.data, cfg.lambda_grid, opt);
    return {std::move(model), std::move(grid)};
}

/// Fits the model, writes it to cfg.model and the grid search to <out_dir>/grid_search.json.
inline TrainResult run_train(const ExperimentConfig& cfg) {
    const auto trials = load_trial_matrix(cfg.train_trials);
    const auto targets = load_feature_matrix(cfg.train_features);
    auto result = train(trials, targets, cfg);

    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.model.has_parent_path()) {
        std::filesystem::create_directories(cfg.model.parent_path());
    }
    ridge::save_model(result.model, cfg.model);
    std::ofstream out(cfg.out_dir / "grid_search.json", std::ios::binary | std::ios::trunc);
    out << ridge::to_json(result.grid).dump(2) << '\n';
    return result;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct DecodeOptions {
    std::size_t k = 5;
    bool adapt = true;
    AdaptTarget adapt_target = AdaptTarget::true_train;
    adapt::Scope adapt_scope = adapt::Scope::per_feature;
    WupFormula formula = WupFormula::standard;
    std::string subject = "subject";
    std::string split = "test";
    std::size_t threads = 1;
};

namespace detail {

/// Training-feature moments from the per-feature values stored in the model.
inline adapt::MomentPair true_train_moments(const ridge::RidgeModel& model, adapt::Scope scope) {
    adapt::MomentPair m{model.train_feature_mean, model.train_feature_std};
    if (scope == adapt::Scope::per_feature) {
        return m;
    }
    if (model.n_train < 2) {
        throw DegenerateError("global adaptation needs the training row count stored in the model");
    }
    // Pooled variance over all N x D entries from per-column means and variances.
    const auto N = static_cast<double>(model.n_train);
    const auto D = static_cast<double>(m.mean.size());
    const double mean = m.mean.mean();
    const double within = (N - 1.0) * m.std.array().square().sum();
    const double between = N * (m.mean.array() - mean).square().sum();
    const double sd = std::sqrt((within + between) / (N * D - 1.0));
    return {Eigen::VectorXd::Constant(m.mean.size(), mean), Eigen::VectorXd::Constant(m.mean.size(), sd)};
}

} // namespace detail

/**
 * Predicts and optionally adapts features for the given trials. `train_trials`
 * is only needed for AdaptTarget::pred_train.
 */
inline FeatureMatrix predict_adapted(const ridge::RidgeModel& model, const TrialMatrix& trials,
                                     const DecodeOptions& opt, const TrialMatrix* train_trials = nullptr) {
    auto predicted = ridge::predict(model, trials);
    if (!opt.adapt) {
        return predicted;
    }
    const auto source = adapt::compute_moments(predicted, opt.adapt_scope);
    adapt::MomentPair target;
    if (opt.adapt_target == AdaptTarget::true_train) {
        target = detail::true_train_moments(model, opt.adapt_scope);
    } else {
        if (!train_trials) {
            throw ConfigError("adaptation target pred-train needs the training trials");
        }
        target = adapt::compute_moments(ridge::predict(model, train_trials->data), opt.adapt_scope);
    }
    return adapt::moment_match(predicted, source, target);
}

/**
 * Classifies every feature row against the index and scores it. Rows are
 * reported in image-id order; rows whose true synset the taxonomy lacks are
 * listed in `skipped`.
 */
inline EvaluationReport evaluate(const FeatureMatrix& features, const LatentIndex& index, const Taxonomy& taxonomy,
                                 const DecodeOptions& opt) {
    if (!features.labels) {
        throw FormatError("evaluate: features carry no true labels");
    }
    {
        std::set<SynsetRef> missing;
        for (const auto& l : index.labels()) {
            if (!taxonomy.contains(l)) {
                missing.insert(l);
            }
        }
        if (!missing.empty()) {
            std::string list;
            for (const auto& m : missing) {
                list += (list.empty() ? "" : ", ") + m.str();
            }
            throw UnknownSynsetError("index labels absent from the taxonomy: " + list);
        }
    }

    std::vector<std::size_t> order(features.item_ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return features.item_ids[a] < features.item_ids[b]; });

    EvaluationReport report;
    report.subject = opt.subject;
    report.split = opt.split;
    report.metric = std::string(to_string(index.metric()));
    report.wup_formula = opt.formula == WupFormula::standard ? "standard" : "paper";
    report.k = opt.k;
    report.adapted = opt.adapt;

    std::vector<std::size_t> kept;
    for (auto i : order) {
        if (taxonomy.contains((*features.labels)[i])) {
            kept.push_back(i);
        } else {
            report.skipped.push_back(features.item_ids[i]);
        }
    }

    report.records.resize(kept.size());
    parallel_for(kept.size(), opt.threads, [&](std::size_t slot) {
        const auto i = kept[slot];
        const Eigen::VectorXd q = features.data.row(static_cast<Eigen::Index>(i)).transpose();
        const auto nn = index.query_knn(q, opt.k);
        const auto ranked = rank_candidates(nn);

        auto& rec = report.records[slot];
        rec.image_id = features.item_ids[i];
        rec.true_synset = (*features.labels)[i];
        rec.predicted_synset = ranked.front().label;
        rec.predicted_name = taxonomy.display_name(rec.predicted_synset);
        rec.wup = taxonomy.wup(rec.true_synset, rec.predicted_synset, opt.formula);
        for (const auto& c : ranked) {
            rec.candidates.push_back({c.label, taxonomy.display_name(c.label), c.votes, c.best_distance});
        }
        for (std::size_t n = 0; n < nn.size(); ++n) {
            rec.neighbors.push_back({nn.indices[n], index.ids()[nn.indices[n]], nn.labels[n],
                                     taxonomy.display_name(nn.labels[n]), nn.distances[n]});
        }
    });
    report.aggregates = compute_aggregates(report.records);
    return report;
}

inline DecodeOptions decode_options(const ExperimentConfig& cfg, const IndexSidecar& sidecar) {
    DecodeOptions opt;
    opt.k = cfg.k.value_or(sidecar.k_default);
    opt.adapt = cfg.adapt;
    opt.adapt_target = cfg.adapt_target;
    opt.adapt_scope = cfg.adapt_scope;
    opt.formula = cfg.wup_formula;
    opt.subject = cfg.subject;
    opt.threads = cfg.threads;
    return opt;
}

/**
 * Decodes one split ("test" reads test_trials, "train" reads train_trials) and
 * writes <out_dir>/report_<split>.json and .csv.
 */
inline EvaluationReport run_decode(const ExperimentConfig& cfg, const std::string& split = "test") {
    if (split != "test" && split != "train") {
        throw ConfigError("split must be test or train, got '" + split + "'");
    }
    const auto model = ridge::load_model(cfg.model);
    const auto trials = average_by_image_id(load_trial_matrix(split == "test" ? cfg.test_trials : cfg.train_trials));

    std::optional<TrialMatrix> train_trials;
    if (cfg.adapt && cfg.adapt_target == AdaptTarget::pred_train) {
        train_trials = load_trial_matrix(cfg.train_trials);
    }

    const auto sidecar = load_sidecar(cfg.index);
    const auto index = LatentIndex::build(load_feature_matrix(cfg.index), cfg.metric.value_or(sidecar.metric));
    const auto taxonomy = load_taxonomy(cfg);

    auto opt = decode_options(cfg, sidecar);
    opt.split = split;
    const auto features = predict_adapted(model, trials, opt, train_trials ? &*train_trials : nullptr);
    auto report = evaluate(features, index, taxonomy, opt);

    std::filesystem::create_directories(cfg.out_dir);
    save_report(report, cfg.out_dir / ("report_" + split + ".json"));
    save_report_csv(report, cfg.out_dir / ("report_" + split + ".csv"));
    return report;
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/**
 * Exact expected Wu-Palmer score of a guesser that picks uniformly among
 * `candidates` for every item in `truths` (mean over all truth x candidate pairs).
 */
inline double chance_wup(const Taxonomy& taxonomy, std::span<const SynsetRef> truths,
                         std::span<const SynsetRef> candidates, WupFormula formula = WupFormula::standard) {
    if (truths.empty() || candidates.empty()) {
        throw DegenerateError("chance level needs at least one truth and one candidate");
    }
    double sum = 0.0;
    for (const auto& t : truths) {
        for (const auto& c : candidates) {
            sum += taxonomy.wup(t, c, formula);
        }
    }
    return sum / static_cast<double>(truths.size() * candidates.size());
}

/// Distinct labels of an index, sorted.
inline std::vector<SynsetRef> distinct_labels(std::span<const SynsetRef> labels) {
    std::set<SynsetRef> s(labels.begin(), labels.end());
    return {s.begin(), s.end()};
}

/// Per-item scores of a seeded uniform guesser over `candidates`.
inline std::vector<double> random_guess_scores(const Taxonomy& taxonomy, std::span<const SynsetRef> truths,
                                               std::span<const SynsetRef> candidates, std::uint64_t seed,
                                               WupFormula formula = WupFormula::standard) {
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(truths.size());
    for (const auto& t : truths) {
        out.push_back(taxonomy.wup(t, candidates[rng.index(candidates.size())], formula));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompts and charts
// ---------------------------------------------------------------------------

/**
 * Conditioning text for an external generator, TSV with header
 * `image_id  synset_id  prompt`. One line per item with its predicted class, or
 * with all_candidates one line per neighbour in rank order.
 */
inline void emit_prompts(const EvaluationReport& report, const std::filesystem::path& out_path,
                         bool all_candidates = false) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + out_path.string());
    }
    auto clean = [](std::string s) {
        std::replace(s.begin(), s.end(), '_', ' ');
        std::replace(s.begin(), s.end(), '\t', ' ');
        return s;
    };
    out << "image_id\tsynset_id\tprompt\n";
    for (const auto& rec : report.records) {
        if (all_candidates) {
            for (const auto& nb : rec.neighbors) {
                out << rec.image_id << '\t' << nb.label << '\t' << clean(nb.name) << '\n';
            }
        } else {
            out << rec.image_id << '\t' << rec.predicted_synset << '\t' << clean(rec.predicted_name) << '\n';
        }
    }
}

/**
 * Bar chart of mean Wu-Palmer similarity with +/- one standard deviation
 * whiskers, one bar per report, y axis fixed to [0, 1].
 */
inline std::string render_report_chart(std::span<const EvaluationReport> reports) {
    if (reports.empty()) {
        throw DegenerateError("chart: no reports given");
    }
    for (const auto& r : reports) {
        if (r.aggregates.n_items == 0) {
            throw DegenerateError("chart: report for " + r.subject + "/" + r.split + " has no items");
        }
    }

    constexpr double left = 60, top = 40, plot_h = 240, bar_w = 60, gap = 40, bottom = 60;
    const double plot_w = static_cast<double>(reports.size()) * (bar_w + gap) + gap;
    const double width = left + plot_w + 20;
    const double height = top + plot_h + bottom;
    auto fx = [](double v) { return text::format_fixed(v, 2); };
    auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fx(width) + "\" height=\"" + fx(height) +
         "\" viewBox=\"0 0 " + fx(width) + " " + fx(height) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + fx(width) + "\" height=\"" + fx(height) + "\" fill=\"white\"/>\n";
    s += "<text x=\"" + fx(width / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">Wu-Palmer similarity (mean "
         "&#177; s.d.)</text>\n";
    s += "<line class=\"axis\" x1=\"" + fx(left) + "\" y1=\"" + fx(top) + "\" x2=\"" + fx(left) + "\" y2=\"" +
         fx(top + plot_h) + "\" stroke=\"black\"/>\n";
    s += "<line class=\"axis\" x1=\"" + fx(left) + "\" y1=\"" + fx(top + plot_h) + "\" x2=\"" + fx(left + plot_w) +
         "\" y2=\"" + fx(top + plot_h) + "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = t / 4.0;
        s += "<text x=\"" + fx(left - 6) + "\" y=\"" + fx(y_of(v) + 4) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + text::format_fixed(v, 2) +
             "</text>\n";
    }

    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& a = reports[i].aggregates;
        const double x = left + gap + static_cast<double>(i) * (bar_w + gap);
        const double y = y_of(a.mean_wup);
        s += "<rect class=\"bar\" x=\"" + fx(x) + "\" y=\"" + fx(y) + "\" width=\"" + fx(bar_w) + "\" height=\"" +
             fx(top + plot_h - y) + "\" fill=\"#4c72b0\"><title>" + reports[i].subject + " " + reports[i].split +
             ": " + text::format_fixed(a.mean_wup, 3) + " &#177; " + text::format_fixed(a.std_wup, 3) +
             "</title></rect>\n";
        const double cx = x + bar_w / 2;
        const double lo = y_of(a.mean_wup - a.std_wup);
        const double hi = y_of(a.mean_wup + a.std_wup);
        s += "<line class=\"errorbar\" x1=\"" + fx(cx) + "\" y1=\"" + fx(lo) + "\" x2=\"" + fx(cx) + "\" y2=\"" +
             fx(hi) + "\" stroke=\"black\"/>\n";
        s += "<line class=\"errorbar\" x1=\"" + fx(cx - 8) + "\" y1=\"" + fx(hi) + "\" x2=\"" + fx(cx + 8) +
             "\" y2=\"" + fx(hi) + "\" stroke=\"black\"/>\n";
        s += "<line class=\"errorbar\" x1=\"" + fx(cx - 8) + "\" y1=\"" + fx(lo) + "\" x2=\"" + fx(cx + 8) +
             "\" y2=\"" + fx(lo) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + fx(cx) + "\" y=\"" + fx(top + plot_h + 16) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + reports[i].subject +
             "</text>\n";
        s += "<text x=\"" + fx(cx) + "\" y=\"" + fx(top + plot_h + 30) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + reports[i].split +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline void emit_report_chart(std::span<const EvaluationReport> reports, const std::filesystem::path& out_svg) {
    const auto svg = render_report_chart(reports);
    std::ofstream out(out_svg, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + out_svg.string());
    }
    out << svg;
}

} // namespace semdec
