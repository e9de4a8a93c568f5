#pragma once

#include "config.hpp"
#include "dataio.hpp"
#include "error.hpp"
#include "fmx.hpp"
#include "latent_index.hpp"
#include "random.hpp"
#include "taxonomy.hpp"
#include "text.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

/**
 * @file synth.hpp
 *
 * @brief Synthetic experiments with a planted linear voxel model.
 *
 * Classes are the leaves of a balanced binary taxonomy. Class prototypes are
 * drawn down the tree (child = parent + Gaussian step), so taxonomic neighbours
 * are also close in feature space. Items are prototype + N(0, feature_noise^2),
 * and trial responses are gain * A f + shift + N(0, voxel_noise^2) with a planted
 * V x D map A. Test classes are disjoint from training classes; the retrieval
 * index holds fresh exemplars of every class.
 */

namespace semdec::synth {

struct SynthParams {
    std::size_t classes = 20;
    std::size_t items_per_class = 8;
    std::size_t test_classes = 5;
    std::size_t index_items_per_class = 8;
    std::size_t dim = 64;
    std::size_t voxels = 256;
    double prototype_spread = 1.5;
    double feature_noise = 0.5;
    double voxel_noise = 0.0;
    std::optional<double> voxel_snr; ///< Overrides voxel_noise: noise variance = signal variance / snr.
    std::size_t test_repeats = 1;
    double test_gain = 1.0;  ///< Test-session response gain (covariate shift).
    double test_shift = 0.0; ///< Test-session baseline offset added to every voxel.
    std::size_t events_per_run = 40;
    std::uint64_t seed = 0;

    void validate() const {
        if (classes < 2) {
            throw ConfigError("synth: need at least 2 classes");
        }
        if (test_classes < 1 || test_classes >= classes) {
            throw ConfigError("synth: test classes must be in [1, classes)");
        }
        if (dim < 2 || voxels < 1) {
            throw ConfigError("synth: need dim >= 2 and voxels >= 1");
        }
        if (items_per_class < 1 || index_items_per_class < 1 || test_repeats < 1 || events_per_run < 1) {
            throw ConfigError("synth: item, index, repeat and run counts must be positive");
        }
        if (!(feature_noise >= 0) || !(voxel_noise >= 0) || !(prototype_spread > 0)) {
            throw ConfigError("synth: noise levels must be >= 0 and the prototype spread > 0");
        }
        if (voxel_snr && !(*voxel_snr > 0)) {
            throw ConfigError("synth: voxel SNR must be positive");
        }
        if (!std::isfinite(test_gain) || !std::isfinite(test_shift)) {
            throw ConfigError("synth: test gain and shift must be finite");
        }
    }
};

struct SyntheticWorld {
    SynthParams params;
    double voxel_noise = 0.0; ///< Effective noise level after resolving voxel_snr.

    std::vector<SynsetRef> class_labels; ///< c00, c01, ...
    std::vector<SynsetRef> train_classes;
    std::vector<SynsetRef> test_classes;
    std::vector<std::pair<SynsetRef, SynsetRef>> edges; ///< child, parent
    std::vector<std::pair<SynsetRef, std::string>> lemmas;
    Taxonomy taxonomy;

    Eigen::MatrixXd planted_map; ///< V x D
    Eigen::MatrixXd prototypes;  ///< C x D, row order of class_labels

    TrialMatrix train_trials;
    FeatureMatrix train_features;
    TrialMatrix test_trials; ///< One row per presentation; repeats share an image id.
    FeatureMatrix test_features;
    FeatureMatrix index;

    std::vector<VolumeSeries> runs;
    std::vector<StimulusEvent> events;
};

namespace detail {

inline std::string two_digits(std::size_t i, std::size_t width) {
    auto s = std::to_string(i);
    return std::string(s.size() < width ? width - s.size() : 0, '0') + s;
}

struct TreeBuilder {
    const std::vector<SynsetRef>& leaves;
    std::size_t width;
    std::vector<std::pair<SynsetRef, SynsetRef>>& edges;
    std::vector<std::pair<SynsetRef, std::string>>& lemmas;

    // Children of [lo, hi) are the two halves; single classes are leaves.
    SynsetRef node(std::size_t lo, std::size_t hi) {
        if (hi - lo == 1) {
            return leaves[lo];
        }
        SynsetRef id("g_" + two_digits(lo, width) + "_" + two_digits(hi - 1, width));
        lemmas.emplace_back(id, "group_" + two_digits(lo, width) + "_" + two_digits(hi - 1, width));
        const auto mid = lo + (hi - lo + 1) / 2;
        edges.emplace_back(node(lo, mid), id);
        edges.emplace_back(node(mid, hi), id);
        return id;
    }
};

} // namespace detail

inline SyntheticWorld generate(const SynthParams& p) {
    p.validate();
    SyntheticWorld w;
    w.params = p;
    const auto C = p.classes;
    const auto D = static_cast<Eigen::Index>(p.dim);
    const auto V = static_cast<Eigen::Index>(p.voxels);
    const std::size_t width = std::to_string(C - 1).size() < 2 ? 2 : std::to_string(C - 1).size();

    for (std::size_t c = 0; c < C; ++c) {
        w.class_labels.emplace_back("c" + detail::two_digits(c, width));
        w.lemmas.emplace_back(w.class_labels.back(), "class_" + detail::two_digits(c, width));
    }

    // Taxonomy: root "entity" over a balanced binary split of the classes.
    const SynsetRef root("entity");
    w.lemmas.emplace_back(root, "entity");
    detail::TreeBuilder tb{w.class_labels, width, w.edges, w.lemmas};
    w.edges.emplace_back(tb.node(0, C), root);
    {
        Taxonomy::Builder b;
        b.add_node(root);
        for (const auto& [child, parent] : w.edges) {
            b.add_node(child);
            b.add_node(parent);
            b.add_edge(child, parent);
        }
        for (const auto& [id, lemma] : w.lemmas) {
            b.add_node(id, {lemma});
            b.add_lemma_index(lemma, id);
        }
        w.taxonomy = std::move(b).finish();
    }

    // Independent streams: structure, exemplar noise, voxel noise.
    Rng structure(p.seed ^ 0x5eed'0001'0000'0000ULL);
    Rng items(p.seed ^ 0x5eed'0002'0000'0000ULL);
    Rng noise(p.seed ^ 0x5eed'0003'0000'0000ULL);

    // Prototypes walk down the tree from a zero root.
    std::size_t max_depth = 1;
    for (const auto& c : w.class_labels) {
        max_depth = std::max(max_depth, w.taxonomy.depth(c));
    }
    const double step = p.prototype_spread / std::sqrt(static_cast<double>(max_depth - 1 > 0 ? max_depth - 1 : 1));
    std::map<SynsetRef, Eigen::VectorXd> proto;
    proto[root] = Eigen::VectorXd::Zero(D);
    // Edges were recorded children-first, so walk them in reverse (parents before children).
    for (auto it = w.edges.rbegin(); it != w.edges.rend(); ++it) {
        Eigen::VectorXd v = proto.at(it->second);
        for (Eigen::Index d = 0; d < D; ++d) {
            v[d] += structure.normal(0.0, step);
        }
        proto[it->first] = std::move(v);
    }
    w.prototypes.resize(static_cast<Eigen::Index>(C), D);
    for (std::size_t c = 0; c < C; ++c) {
        w.prototypes.row(static_cast<Eigen::Index>(c)) = proto.at(w.class_labels[c]).transpose();
    }

    w.planted_map.resize(V, D);
    const double a_sd = 1.0 / std::sqrt(static_cast<double>(D));
    for (Eigen::Index j = 0; j < D; ++j) {
        for (Eigen::Index v = 0; v < V; ++v) {
            w.planted_map(v, j) = structure.normal(0.0, a_sd);
        }
    }

    auto order = structure.permutation(C);
    std::vector<bool> is_test(C, false);
    for (std::size_t i = 0; i < p.test_classes; ++i) {
        is_test[order[i]] = true;
    }
    for (std::size_t c = 0; c < C; ++c) {
        (is_test[c] ? w.test_classes : w.train_classes).push_back(w.class_labels[c]);
    }

    auto exemplars = [&](const std::vector<std::size_t>& cls, std::size_t per_class, const std::string& prefix) {
        FeatureMatrix m;
        m.data.resize(static_cast<Eigen::Index>(cls.size() * per_class), D);
        m.labels.emplace();
        Eigen::Index r = 0;
        for (auto c : cls) {
            for (std::size_t i = 0; i < per_class; ++i, ++r) {
                for (Eigen::Index d = 0; d < D; ++d) {
                    m.data(r, d) = w.prototypes(static_cast<Eigen::Index>(c), d) + items.normal(0.0, p.feature_noise);
                }
                m.item_ids.push_back(prefix + "_" + w.class_labels[c].str() + "_" + detail::two_digits(i, 2));
                m.labels->push_back(w.class_labels[c]);
            }
        }
        return m;
    };
    std::vector<std::size_t> train_idx, test_idx, all_idx;
    for (std::size_t c = 0; c < C; ++c) {
        (is_test[c] ? test_idx : train_idx).push_back(c);
        all_idx.push_back(c);
    }
    w.train_features = exemplars(train_idx, p.items_per_class, "train");
    w.test_features = exemplars(test_idx, p.items_per_class, "test");
    w.index = exemplars(all_idx, p.index_items_per_class, "index");

    // Noise-free responses.
    const Eigen::MatrixXd train_signal = w.train_features.data * w.planted_map.transpose();
    const Eigen::MatrixXd test_signal = p.test_gain * (w.test_features.data * w.planted_map.transpose());

    w.voxel_noise = p.voxel_noise;
    if (p.voxel_snr) {
        const double mean = train_signal.mean();
        const double var = (train_signal.array() - mean).square().sum() / static_cast<double>(train_signal.size());
        w.voxel_noise = std::sqrt(var / *p.voxel_snr);
    }

    // Runs: event i starts at volume 4i and lasts three volumes; its response
    // lags by one volume, so volumes 4i+1 .. 4i+3 carry it and 4i is rest.
    constexpr std::size_t span = 3;
    constexpr std::size_t block = span + 1;
    const double per_volume_sd = w.voxel_noise * std::sqrt(static_cast<double>(span));

    struct Presentation {
        Eigen::VectorXd signal;
        double baseline;
        std::string image_id;
        SynsetRef label;
    };
    auto make_runs = [&](const std::vector<Presentation>& pres, const std::string& prefix) {
        for (std::size_t first = 0, run = 0; first < pres.size(); first += p.events_per_run, ++run) {
            const auto n = std::min(p.events_per_run, pres.size() - first);
            VolumeSeries vs;
            vs.run_id = prefix + "-" + detail::two_digits(run + 1, 2);
            const auto T = static_cast<Eigen::Index>(n * block + 1);
            vs.data.resize(V, T);
            const double base = pres[first].baseline;
            for (Eigen::Index t = 0; t < T; ++t) {
                const auto owner = static_cast<std::size_t>(t) / block;
                const bool active = static_cast<std::size_t>(t) % block != 0 && owner < n;
                for (Eigen::Index v = 0; v < V; ++v) {
                    double value = base + per_volume_sd * noise.normal();
                    if (active) {
                        value += pres[first + owner].signal[v];
                    }
                    vs.data(v, t) = value;
                }
            }
            for (Eigen::Index v = 0; v < V; ++v) {
                vs.voxel_ids.push_back("v" + detail::two_digits(static_cast<std::size_t>(v), 3));
            }
            std::vector<StimulusEvent> evs;
            for (std::size_t i = 0; i < n; ++i) {
                evs.push_back({vs.run_id, i * block, span, pres[first + i].image_id, pres[first + i].label});
            }
            w.events.insert(w.events.end(), evs.begin(), evs.end());
            w.runs.push_back(std::move(vs));
        }
    };

    std::vector<Presentation> train_pres;
    for (Eigen::Index r = 0; r < w.train_features.data.rows(); ++r) {
        train_pres.push_back({train_signal.row(r).transpose(), 0.0, w.train_features.item_ids[static_cast<std::size_t>(r)],
                              (*w.train_features.labels)[static_cast<std::size_t>(r)]});
    }
    // Presentation order within a session is shuffled.
    structure.shuffle(std::span<Presentation>(train_pres));
    make_runs(train_pres, "train");

    std::vector<Presentation> test_pres;
    for (std::size_t rep = 0; rep < p.test_repeats; ++rep) {
        std::vector<Presentation> one;
        for (Eigen::Index r = 0; r < w.test_features.data.rows(); ++r) {
            one.push_back({test_signal.row(r).transpose(), p.test_shift, w.test_features.item_ids[static_cast<std::size_t>(r)],
                           (*w.test_features.labels)[static_cast<std::size_t>(r)]});
        }
        structure.shuffle(std::span<Presentation>(one));
        test_pres.insert(test_pres.end(), one.begin(), one.end());
    }
    const auto n_train_runs = w.runs.size();
    make_runs(test_pres, "test");

    // Trials are the raw window means of the runs (no run-wise z-scoring, so the
    // noise level and any test-session shift stay as generated).
    auto collect = [&](std::size_t run_begin, std::size_t run_end) {
        TrialMatrix out;
        std::vector<Eigen::VectorXd> rows;
        for (std::size_t r = run_begin; r < run_end; ++r) {
            std::vector<StimulusEvent> evs;
            for (const auto& e : w.events) {
                if (e.run_id == w.runs[r].run_id) {
                    evs.push_back(e);
                }
            }
            auto t = window_average(w.runs[r], evs, 1);
            for (Eigen::Index i = 0; i < t.data.rows(); ++i) {
                rows.push_back(t.data.row(i).transpose());
            }
            out.labels.insert(out.labels.end(), t.labels.begin(), t.labels.end());
            out.image_ids.insert(out.image_ids.end(), t.image_ids.begin(), t.image_ids.end());
        }
        out.data.resize(static_cast<Eigen::Index>(rows.size()), V);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.data.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        }
        return out;
    };
    w.train_trials = collect(0, n_train_runs);
    w.test_trials = collect(n_train_runs, w.runs.size());
    return w;
}

/// Exact chance level: mean similarity over every (test class, any class) pair.
inline double chance_level(const SyntheticWorld& w, WupFormula formula = WupFormula::standard) {
    double sum = 0.0;
    for (const auto& t : w.test_classes) {
        for (const auto& c : w.class_labels) {
            sum += w.taxonomy.wup(t, c, formula);
        }
    }
    return sum / static_cast<double>(w.test_classes.size() * w.class_labels.size());
}

/**
 * Writes every artifact of the world under `dir` plus a ready-to-run
 * config.toml, and returns that config (paths absolute).
 */
inline ExperimentConfig write_world(const SyntheticWorld& w, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "runs");

    {
        std::ofstream out(dir / "taxonomy.tsv", std::ios::binary | std::ios::trunc);
        out << "# child\tparent\n";
        for (const auto& [c, p] : w.edges) {
            out << c << '\t' << p << '\n';
        }
        std::ofstream lem(dir / "lemmas.tsv", std::ios::binary | std::ios::trunc);
        for (const auto& [id, lemma] : w.lemmas) {
            lem << id << '\t' << lemma << '\n';
        }
        if (!out || !lem) {
            throw Error("cannot write taxonomy files under " + dir.string());
        }
    }

    save_trial_matrix(w.train_trials, dir / "train_trials.fmx");
    save_feature_matrix(w.train_features, dir / "train_features.fmx");
    save_trial_matrix(w.test_trials, dir / "test_trials.fmx");
    save_feature_matrix(w.test_features, dir / "test_features.fmx");
    save_feature_matrix(w.index, dir / "index.fmx");
    save_sidecar(dir / "index.fmx", IndexSidecar{}, LatentIndex::build(w.index));

    std::vector<std::string> dims;
    for (std::size_t d = 0; d < w.params.dim; ++d) {
        dims.push_back("f" + std::to_string(d));
    }
    fmx::write(dir / "planted_map.fmx", {{"ids", dims}, {"labels", nullptr}}, w.planted_map.transpose());
    std::vector<std::string> classes;
    for (const auto& c : w.class_labels) {
        classes.push_back(c.str());
    }
    fmx::write(dir / "prototypes.fmx", {{"ids", classes}, {"labels", classes}}, w.prototypes);

    for (const auto& run : w.runs) {
        save_volume_series(run, dir / "runs" / (run.run_id + ".fmx"));
    }
    save_events(w.events, dir / "events.tsv");

    ExperimentConfig cfg;
    cfg.base_dir = dir;
    cfg.subject = "synthetic";
    cfg.train_trials = dir / "train_trials.fmx";
    cfg.train_features = dir / "train_features.fmx";
    cfg.test_trials = dir / "test_trials.fmx";
    cfg.index = dir / "index.fmx";
    cfg.taxonomy = dir / "taxonomy.tsv";
    cfg.lemmas = dir / "lemmas.tsv";
    cfg.taxonomy_format = TaxonomyFormat::edges;
    cfg.events = dir / "events.tsv";
    cfg.model = dir / "model.fmx";
    cfg.out_dir = dir / "out";
    cfg.seed = w.params.seed;

    std::ofstream out(dir / "config.toml", std::ios::binary | std::ios::trunc);
    out << format_config(cfg, dir);
    if (!out) {
        throw Error("cannot write " + (dir / "config.toml").string());
    }

    std::ofstream info(dir / "world.json", std::ios::binary | std::ios::trunc);
    nlohmann::json j;
    j["classes"] = w.params.classes;
    j["items_per_class"] = w.params.items_per_class;
    j["index_items_per_class"] = w.params.index_items_per_class;
    j["dim"] = w.params.dim;
    j["voxels"] = w.params.voxels;
    j["feature_noise"] = w.params.feature_noise;
    j["voxel_noise"] = w.voxel_noise;
    j["prototype_spread"] = w.params.prototype_spread;
    j["test_repeats"] = w.params.test_repeats;
    j["test_gain"] = w.params.test_gain;
    j["test_shift"] = w.params.test_shift;
    j["seed"] = w.params.seed;
    std::vector<std::string> tr, te;
    for (const auto& c : w.train_classes) {
        tr.push_back(c.str());
    }
    for (const auto& c : w.test_classes) {
        te.push_back(c.str());
    }
    j["train_classes"] = tr;
    j["test_classes"] = te;
    j["chance_wup"] = chance_level(w);
    info << j.dump(2) << '\n';
    return cfg;
}

} // namespace semdec::synth
