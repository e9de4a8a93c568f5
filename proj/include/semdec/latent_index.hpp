#pragma once

#include "dataio.hpp"
#include "error.hpp"
#include "synset.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file latent_index.hpp
 *
 * @brief Exact k-nearest-neighbour retrieval over a labelled feature database.
 *
 * Search is brute force: every stored vector is scored and the k smallest
 * (distance, index) pairs are selected, so ties resolve toward the smaller
 * item index. Candidate classes are the neighbour labels ranked by vote count,
 * then best distance, then synset id.
 */

namespace semdec {

enum class Metric { euclidean, cosine };

inline std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

inline Metric parse_metric(std::string_view s) {
    if (s == "euclidean") {
        return Metric::euclidean;
    }
    if (s == "cosine") {
        return Metric::cosine;
    }
    throw ConfigError("unknown metric '" + std::string(s) + "' (expected euclidean or cosine)");
}

struct NeighborSet {
    std::vector<std::size_t> indices;
    std::vector<double> distances; ///< Ascending.
    std::vector<SynsetRef> labels;

    std::size_t size() const { return indices.size(); }
};

struct CandidateClass {
    SynsetRef label;
    std::size_t votes = 0;
    double best_distance = 0.0;
};

class LatentIndex {
public:
    /// Row-major copy of the labelled features. Throws on missing labels or, for cosine, zero-norm rows.
    static LatentIndex build(const FeatureMatrix& features, Metric metric = Metric::euclidean) {
        if (!features.labels) {
            throw FormatError("latent index: feature matrix has no labels");
        }
        validate(features);
        if (features.rows() < 1) {
            throw ShapeError("latent index: needs at least one item");
        }

        LatentIndex idx;
        idx.metric_ = metric;
        idx.dim_ = static_cast<std::size_t>(features.cols());
        idx.size_ = static_cast<std::size_t>(features.rows());
        idx.labels_ = *features.labels;
        idx.ids_ = features.item_ids;
        idx.store_.resize(idx.size_ * idx.dim_);
        idx.norms_.assign(idx.size_, 0.0);
        for (std::size_t i = 0; i < idx.size_; ++i) {
            for (std::size_t d = 0; d < idx.dim_; ++d) {
                idx.store_[i * idx.dim_ + d] = features.data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d));
            }
            idx.norms_[i] = norm(idx.row(i));
            if (metric == Metric::cosine && !(idx.norms_[i] > 0.0)) {
                throw DegenerateError("latent index: item " + std::to_string(i) + " ('" + idx.ids_[i] +
                                      "') has zero norm under the cosine metric");
            }
        }
        return idx;
    }

    std::size_t size() const { return size_; }
    std::size_t dim() const { return dim_; }
    Metric metric() const { return metric_; }
    const std::vector<SynsetRef>& labels() const { return labels_; }
    const std::vector<std::string>& ids() const { return ids_; }

    std::span<const double> row(std::size_t i) const { return {store_.data() + i * dim_, dim_}; }

    /// Euclidean: sqrt(sum (q - x)^2). Cosine: 1 - <q, x> / (|q| |x|).
    double distance(std::span<const double> q, std::size_t item) const {
        return distance(q, metric_ == Metric::cosine ? norm(q) : 0.0, item);
    }

    NeighborSet query_knn(std::span<const double> q, std::size_t k) const {
        if (q.size() != dim_) {
            throw ShapeError("latent index: query has dimension " + std::to_string(q.size()) + ", index has " +
                             std::to_string(dim_));
        }
        if (k < 1 || k > size_) {
            throw OutOfBoundsError("latent index: k=" + std::to_string(k) + " outside [1, " + std::to_string(size_) +
                                   "]");
        }
        const double qnorm = norm(q);
        if (metric_ == Metric::cosine && !(qnorm > 0.0)) {
            throw DegenerateError("latent index: zero-norm query under the cosine metric");
        }

        std::vector<std::pair<double, std::size_t>> scored(size_);
        for (std::size_t i = 0; i < size_; ++i) {
            scored[i] = {distance(q, qnorm, i), i};
        }
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());

        NeighborSet out;
        out.indices.reserve(k);
        out.distances.reserve(k);
        out.labels.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            out.distances.push_back(scored[i].first);
            out.indices.push_back(scored[i].second);
            out.labels.push_back(labels_[scored[i].second]);
        }
        return out;
    }

    NeighborSet query_knn(const Eigen::VectorXd& q, std::size_t k) const {
        return query_knn(std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), k);
    }

private:
    double distance(std::span<const double> q, double qnorm, std::size_t item) const {
        const auto x = row(item);
        if (metric_ == Metric::euclidean) {
            double s = 0.0;
            for (std::size_t d = 0; d < dim_; ++d) {
                const double diff = q[d] - x[d];
                s += diff * diff;
            }
            return std::sqrt(s);
        }
        double dot = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            dot += q[d] * x[d];
        }
        return 1.0 - dot / (qnorm * norms_[item]);
    }

    static double norm(std::span<const double> v) {
        double s = 0.0;
        for (double x : v) {
            s += x * x;
        }
        return std::sqrt(s);
    }

    Metric metric_ = Metric::euclidean;
    std::size_t dim_ = 0;
    std::size_t size_ = 0;
    std::vector<double> store_;
    std::vector<double> norms_;
    std::vector<SynsetRef> labels_;
    std::vector<std::string> ids_;
};

/// Aggregates neighbour labels; the first entry is the predicted class.
inline std::vector<CandidateClass> rank_candidates(const NeighborSet& nn) {
    std::map<SynsetRef, CandidateClass> acc;
    for (std::size_t i = 0; i < nn.size(); ++i) {
        auto [it, fresh] = acc.try_emplace(nn.labels[i], CandidateClass{nn.labels[i], 0, nn.distances[i]});
        it->second.votes += 1;
        it->second.best_distance = std::min(it->second.best_distance, nn.distances[i]);
    }
    std::vector<CandidateClass> out;
    out.reserve(acc.size());
    for (auto& [_, c] : acc) {
        out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const CandidateClass& a, const CandidateClass& b) {
        if (a.votes != b.votes) {
            return a.votes > b.votes;
        }
        if (a.best_distance != b.best_distance) {
            return a.best_distance < b.best_distance;
        }
        return a.label < b.label;
    });
    return out;
}

inline std::vector<CandidateClass> candidate_classes(const LatentIndex& index, std::span<const double> q,
                                                     std::size_t k = 5) {
    return rank_candidates(index.query_knn(q, k));
}

// ---------------------------------------------------------------------------
// Sidecar: the index is the labelled FMX1 file plus <file>.index.json.
// ---------------------------------------------------------------------------

struct IndexSidecar {
    Metric metric = Metric::euclidean;
    std::size_t k_default = 5;
};

inline std::filesystem::path sidecar_path(const std::filesystem::path& features) {
    return features.string() + ".index.json";
}

inline void save_sidecar(const std::filesystem::path& features, const IndexSidecar& sc, const LatentIndex& idx) {
    nlohmann::json j;
    j["metric"] = std::string(to_string(sc.metric));
    j["k_default"] = sc.k_default;
    j["features"] = features.filename().string();
    j["size"] = idx.size();
    j["dim"] = idx.dim();
    std::ofstream out(sidecar_path(features), std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + sidecar_path(features).string());
    }
    out << j.dump(2) << '\n';
}

/// Missing sidecar means the defaults (euclidean, k = 5).
inline IndexSidecar load_sidecar(const std::filesystem::path& features) {
    IndexSidecar sc;
    const auto p = sidecar_path(features);
    if (!std::filesystem::exists(p)) {
        return sc;
    }
    std::ifstream in(p, std::ios::binary);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(p.string() + ": " + e.what());
    }
    if (j.contains("metric")) {
        sc.metric = parse_metric(j["metric"].get<std::string>());
    }
    if (j.contains("k_default")) {
        sc.k_default = j["k_default"].get<std::size_t>();
    }
    return sc;
}

} // namespace semdec
