#pragma once

#include "error.hpp"
#include "synset.hpp"
#include "text.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace semdec {

struct Candidate {
    SynsetRef label;
    std::string name;
    std::size_t votes = 0;
    double best_distance = 0.0;
};

struct Neighbor {
    std::size_t index = 0;
    std::string item_id;
    SynsetRef label;
    std::string name;
    double distance = 0.0;
};

struct ItemRecord {
    std::string image_id;
    SynsetRef true_synset;
    SynsetRef predicted_synset;
    std::string predicted_name;
    double wup = 0.0;
    std::vector<Candidate> candidates; ///< Ranked; the first is the prediction.
    std::vector<Neighbor> neighbors;   ///< Ascending distance.
};

struct Aggregates {
    double mean_wup = 0.0;
    double std_wup = 0.0; ///< Sample standard deviation; 0 for fewer than 2 items.
    double top1_accuracy = 0.0;
    double top5_label_hit_rate = 0.0; ///< True label among the k neighbour labels.
    std::size_t n_items = 0;

    friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

struct EvaluationReport {
    std::string subject;
    std::string split = "test";
    std::string metric;
    std::string wup_formula;
    std::size_t k = 5;
    bool adapted = false;
    std::vector<ItemRecord> records;
    std::vector<std::string> skipped; ///< Image ids whose true synset is absent from the taxonomy.
    Aggregates aggregates;
};

inline Aggregates compute_aggregates(std::span<const ItemRecord> records) {
    Aggregates a;
    a.n_items = records.size();
    if (records.empty()) {
        return a;
    }
    double sum = 0.0;
    std::size_t hits = 0;
    std::size_t label_hits = 0;
    for (const auto& r : records) {
        sum += r.wup;
        hits += r.predicted_synset == r.true_synset;
        for (const auto& nb : r.neighbors) {
            if (nb.label == r.true_synset) {
                ++label_hits;
                break;
            }
        }
    }
    const auto n = static_cast<double>(records.size());
    a.mean_wup = sum / n;
    if (records.size() > 1) {
        double ss = 0.0;
        for (const auto& r : records) {
            ss += (r.wup - a.mean_wup) * (r.wup - a.mean_wup);
        }
        a.std_wup = std::sqrt(ss / (n - 1.0));
    }
    a.top1_accuracy = static_cast<double>(hits) / n;
    a.top5_label_hit_rate = static_cast<double>(label_hits) / n;
    return a;
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["subject"] = r.subject;
    j["split"] = r.split;
    j["metric"] = r.metric;
    j["wup_formula"] = r.wup_formula;
    j["k"] = r.k;
    j["adapted"] = r.adapted;
    j["skipped"] = r.skipped;
    j["n_skipped"] = r.skipped.size();

    auto& agg = j["aggregates"];
    agg["mean_wup"] = r.aggregates.mean_wup;
    agg["std_wup"] = r.aggregates.std_wup;
    agg["top1_accuracy"] = r.aggregates.top1_accuracy;
    agg["top5_label_hit_rate"] = r.aggregates.top5_label_hit_rate;
    agg["n_items"] = r.aggregates.n_items;

    j["records"] = nlohmann::json::array();
    for (const auto& rec : r.records) {
        nlohmann::json jr;
        jr["image_id"] = rec.image_id;
        jr["true_synset"] = rec.true_synset.str();
        jr["predicted_synset"] = rec.predicted_synset.str();
        jr["predicted_name"] = rec.predicted_name;
        jr["wup"] = rec.wup;
        jr["candidates"] = nlohmann::json::array();
        for (const auto& c : rec.candidates) {
            jr["candidates"].push_back(
                {{"label", c.label.str()}, {"name", c.name}, {"votes", c.votes}, {"best_distance", c.best_distance}});
        }
        jr["neighbors"] = nlohmann::json::array();
        for (const auto& nb : rec.neighbors) {
            jr["neighbors"].push_back({{"index", nb.index},
                                       {"item_id", nb.item_id},
                                       {"label", nb.label.str()},
                                       {"name", nb.name},
                                       {"distance", nb.distance}});
        }
        j["records"].push_back(std::move(jr));
    }
    return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
    try {
        EvaluationReport r;
        r.subject = j.at("subject").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.metric = j.at("metric").get<std::string>();
        r.wup_formula = j.at("wup_formula").get<std::string>();
        r.k = j.at("k").get<std::size_t>();
        r.adapted = j.at("adapted").get<bool>();
        r.skipped = j.at("skipped").get<std::vector<std::string>>();
        const auto& agg = j.at("aggregates");
        r.aggregates.mean_wup = agg.at("mean_wup").get<double>();
        r.aggregates.std_wup = agg.at("std_wup").get<double>();
        r.aggregates.top1_accuracy = agg.at("top1_accuracy").get<double>();
        r.aggregates.top5_label_hit_rate = agg.at("top5_label_hit_rate").get<double>();
        r.aggregates.n_items = agg.at("n_items").get<std::size_t>();
        for (const auto& jr : j.at("records")) {
            ItemRecord rec;
            rec.image_id = jr.at("image_id").get<std::string>();
            rec.true_synset = SynsetRef(jr.at("true_synset").get<std::string>());
            rec.predicted_synset = SynsetRef(jr.at("predicted_synset").get<std::string>());
            rec.predicted_name = jr.at("predicted_name").get<std::string>();
            rec.wup = jr.at("wup").get<double>();
            for (const auto& jc : jr.at("candidates")) {
                rec.candidates.push_back({SynsetRef(jc.at("label").get<std::string>()), jc.at("name").get<std::string>(),
                                          jc.at("votes").get<std::size_t>(), jc.at("best_distance").get<double>()});
            }
            for (const auto& jn : jr.at("neighbors")) {
                rec.neighbors.push_back({jn.at("index").get<std::size_t>(), jn.at("item_id").get<std::string>(),
                                         SynsetRef(jn.at("label").get<std::string>()), jn.at("name").get<std::string>(),
                                         jn.at("distance").get<double>()});
            }
            r.records.push_back(std::move(rec));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed evaluation report: ") + e.what());
    }
}

inline void save_report(const EvaluationReport& r, const std::filesystem::path& json_path) {
    std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + json_path.string());
    }
    out << to_json(r).dump(2) << '\n';
}

inline EvaluationReport load_report(const std::filesystem::path& json_path) {
    std::ifstream in(json_path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + json_path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(json_path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

/// One row per item: image_id,true_synset,predicted_synset,wup,neighbor_labels,neighbor_distances.
inline void save_report_csv(const EvaluationReport& r, const std::filesystem::path& csv_path) {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + csv_path.string());
    }
    out << "image_id,true_synset,predicted_synset,wup,neighbor_labels,neighbor_distances\n";
    for (const auto& rec : r.records) {
        out << rec.image_id << ',' << rec.true_synset << ',' << rec.predicted_synset << ','
            << text::format_double(rec.wup) << ',';
        for (std::size_t i = 0; i < rec.neighbors.size(); ++i) {
            out << (i ? ";" : "") << rec.neighbors[i].label;
        }
        out << ',';
        for (std::size_t i = 0; i < rec.neighbors.size(); ++i) {
            out << (i ? ";" : "") << text::format_double(rec.neighbors[i].distance);
        }
        out << '\n';
    }
}

} // namespace semdec
