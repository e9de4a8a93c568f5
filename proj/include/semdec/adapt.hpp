#pragma once

#include "dataio.hpp"
#include "error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace semdec::adapt {

/// Featurewise first and second moments (sample std, N-1).
struct MomentPair {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    Eigen::Index size() const { return mean.size(); }
};

/// Per-feature statistics, or one scalar pair broadcast over every feature.
enum class Scope { per_feature, global };

inline constexpr double degenerate_std_eps = 1e-12;

inline MomentPair compute_moments(const Eigen::MatrixXd& m, Scope scope = Scope::per_feature) {
    const Eigen::Index N = m.rows();
    if (N < 2) {
        throw DegenerateError("moments need at least 2 rows, got " + std::to_string(N));
    }
    MomentPair out;
    if (scope == Scope::global) {
        const double mean = m.mean();
        const double sd = std::sqrt((m.array() - mean).square().sum() / static_cast<double>(m.size() - 1));
        out.mean = Eigen::VectorXd::Constant(m.cols(), mean);
        out.std = Eigen::VectorXd::Constant(m.cols(), sd);
        return out;
    }
    out.mean = m.colwise().mean().transpose();
    out.std.resize(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        out.std(j) = std::sqrt((m.col(j).array() - out.mean(j)).square().sum() / static_cast<double>(N - 1));
    }
    return out;
}

inline MomentPair compute_moments(const FeatureMatrix& m, Scope scope = Scope::per_feature) {
    return compute_moments(m.data, scope);
}

/**
 * Replaces the source moments of each column by the target moments:
 * y = (x - source.mean) / source.std * target.std + target.mean.
 *
 * A column whose source std is at most 1e-12 is only allowed when the target
 * std is 0 as well; it then becomes the target mean.
 */
inline Eigen::MatrixXd moment_match(const Eigen::MatrixXd& predicted, const MomentPair& source,
                                    const MomentPair& target) {
    const Eigen::Index D = predicted.cols();
    if (source.mean.size() != D || source.std.size() != D || target.mean.size() != D || target.std.size() != D) {
        throw ShapeError("moment_match: dimension mismatch (data has " + std::to_string(D) + " columns)");
    }

    std::vector<Eigen::Index> degenerate;
    for (Eigen::Index j = 0; j < D; ++j) {
        if (source.std(j) <= degenerate_std_eps && target.std(j) > 0.0) {
            degenerate.push_back(j);
        }
    }
    if (!degenerate.empty()) {
        std::string cols;
        for (std::size_t i = 0; i < degenerate.size(); ++i) {
            cols += (i ? ", " : "") + std::to_string(degenerate[i]);
        }
        throw DegenerateError("moment_match: zero source std with non-zero target std in column(s) " + cols);
    }

    Eigen::MatrixXd out(predicted.rows(), D);
    for (Eigen::Index j = 0; j < D; ++j) {
        if (source.std(j) <= degenerate_std_eps) {
            out.col(j).setConstant(target.mean(j));
        } else if (source.mean(j) == target.mean(j) && source.std(j) == target.std(j)) {
            out.col(j) = predicted.col(j);
        } else {
            out.col(j) = ((predicted.col(j).array() - source.mean(j)) / source.std(j)) * target.std(j) + target.mean(j);
        }
    }
    return out;
}

inline FeatureMatrix moment_match(const FeatureMatrix& predicted, const MomentPair& source,
                                  const MomentPair& target) {
    return {moment_match(predicted.data, source, target), predicted.item_ids, predicted.labels};
}

} // namespace semdec::adapt
