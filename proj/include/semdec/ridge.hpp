#pragma once

#include "dataio.hpp"
#include "error.hpp"
#include "fmx.hpp"
#include "parallel.hpp"
#include "random.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

/**
 * @file ridge.hpp
 *
 * @brief Multi-output ridge regression from voxel patterns to latent features.
 *
 * Minimizes sum_i |W x_i - f_i|^2 + lambda |W|_F^2 jointly over all outputs.
 * With an intercept, X and F are mean-centered before the solve and the
 * intercept is recovered afterwards; without one the objective above is solved
 * exactly as written. lambda is not rescaled by the number of samples.
 */

namespace semdec::ridge {

/// Which normal-equation system to factor. `automatic` picks the smaller of V x V and N x N.
enum class SolvePath { automatic, primal, kernel };

struct RidgeModel {
    Eigen::MatrixXd weights;   ///< D features x V voxels.
    Eigen::VectorXd intercept; ///< Length D; zero when fitted without intercept.
    bool with_intercept = true;
    double lambda = 0.0;
    Eigen::VectorXd train_feature_mean; ///< Moments of the fitted targets, used for test-time adaptation.
    Eigen::VectorXd train_feature_std;
    std::size_t n_train = 0;

    Eigen::Index features() const { return weights.rows(); }
    Eigen::Index voxels() const { return weights.cols(); }
};

struct GridSearchReport {
    std::vector<double> lambdas;
    std::vector<double> losses; ///< Validation mean squared feature error, one per candidate.
    std::size_t chosen = 0;
    std::size_t n_train = 0;
    std::size_t n_validation = 0;
    std::uint64_t seed = 0;

    double chosen_lambda() const { return lambdas.at(chosen); }
};

struct GridSearchOptions {
    double split_fraction = 0.9;
    std::uint64_t seed = 0;
    bool with_intercept = true;
    std::size_t threads = 1;
};

/// Decade grid 1e-3 ... 1e5.
inline std::vector<double> default_lambda_grid() {
    std::vector<double> out;
    for (int e = -3; e <= 5; ++e) {
        out.push_back(std::pow(10.0, e));
    }
    return out;
}

namespace detail {

inline Eigen::MatrixXd spd_solve(Eigen::MatrixXd system, const Eigen::MatrixXd& rhs, double lambda,
                                 const char* which) {
    system.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(system);
    const auto n = static_cast<double>(system.rows());
    bool singular = llt.info() != Eigen::Success;
    if (!singular && lambda == 0.0) {
        const Eigen::VectorXd pivots = llt.matrixL().toDenseMatrix().diagonal().array().square();
        const double scale = system.diagonal().cwiseAbs().maxCoeff();
        singular = !(pivots.minCoeff() > scale * n * DBL_EPSILON);
    }
    if (singular) {
        throw SingularSystemError(std::string("ridge: the ") + which + " Gram matrix is numerically singular at lambda=" +
                                  std::to_string(lambda));
    }
    return llt.solve(rhs);
}

inline Eigen::VectorXd column_std(const Eigen::MatrixXd& m, const Eigen::VectorXd& mean) {
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(m.cols());
    if (m.rows() < 2) {
        return sd;
    }
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        sd(j) = std::sqrt((m.col(j).array() - mean(j)).square().sum() / static_cast<double>(m.rows() - 1));
    }
    return sd;
}

} // namespace detail

/**
 * Fits W (D x V) from X (N x V) and F (N x D).
 *
 * Solves W (X^T X + lambda I) = F^T X through a Cholesky factorization of
 * either X^T X + lambda I (primal) or X X^T + lambda I (kernel form, then
 * W^T = X^T (X X^T + lambda I)^-1 F). At lambda = 0 a numerically singular
 * system is an error rather than a silent pseudo-inverse.
 */
inline RidgeModel fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, double lambda, bool with_intercept = true,
                      SolvePath path = SolvePath::automatic) {
    if (X.rows() != F.rows()) {
        throw ShapeError("ridge: X has " + std::to_string(X.rows()) + " rows but F has " + std::to_string(F.rows()));
    }
    if (X.rows() < 1 || X.cols() < 1 || F.cols() < 1) {
        throw ShapeError("ridge: empty design or target matrix");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw Error("ridge: lambda must be a finite non-negative number");
    }

    const Eigen::Index N = X.rows();
    const Eigen::Index V = X.cols();

    RidgeModel model;
    model.lambda = lambda;
    model.with_intercept = with_intercept;
    model.n_train = static_cast<std::size_t>(N);
    model.train_feature_mean = F.colwise().mean().transpose();
    model.train_feature_std = detail::column_std(F, model.train_feature_mean);

    Eigen::RowVectorXd x_mean = Eigen::RowVectorXd::Zero(V);
    Eigen::RowVectorXd f_mean = Eigen::RowVectorXd::Zero(F.cols());
    Eigen::MatrixXd Xc;
    Eigen::MatrixXd Fc;
    if (with_intercept) {
        x_mean = X.colwise().mean();
        f_mean = F.colwise().mean();
        Xc = X.rowwise() - x_mean;
        Fc = F.rowwise() - f_mean;
    } else {
        Xc = X;
        Fc = F;
    }

    if (path == SolvePath::automatic) {
        path = N < V ? SolvePath::kernel : SolvePath::primal;
    }

    Eigen::MatrixXd wt; // V x D
    if (path == SolvePath::primal) {
        wt = detail::spd_solve(Xc.transpose() * Xc, Xc.transpose() * Fc, lambda, "V x V");
    } else {
        wt = Xc.transpose() * detail::spd_solve(Xc * Xc.transpose(), Fc, lambda, "N x N");
    }

    model.weights = wt.transpose();
    if (with_intercept) {
        model.intercept = (f_mean - x_mean * wt).transpose();
    } else {
        model.intercept = Eigen::VectorXd::Zero(F.cols());
    }
    return model;
}

inline RidgeModel fit(const TrialMatrix& X, const FeatureMatrix& F, double lambda, bool with_intercept = true,
                      SolvePath path = SolvePath::automatic) {
    return fit(X.data, F.data, lambda, with_intercept, path);
}

/// Row i of the result is W x_i + intercept.
inline Eigen::MatrixXd predict(const RidgeModel& model, const Eigen::MatrixXd& X) {
    if (X.cols() != model.voxels()) {
        throw ShapeError("ridge: model expects " + std::to_string(model.voxels()) + " voxels, got " +
                         std::to_string(X.cols()));
    }
    Eigen::MatrixXd out = X * model.weights.transpose();
    out.rowwise() += model.intercept.transpose();
    return out;
}

inline FeatureMatrix predict(const RidgeModel& model, const TrialMatrix& X) {
    return {predict(model, X.data), X.image_ids, X.labels};
}

/// The objective being minimized, in the centered coordinates when an intercept is used.
inline double objective(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F, const Eigen::MatrixXd& W, double lambda,
                        const Eigen::VectorXd& intercept) {
    Eigen::MatrixXd resid = X * W.transpose() - F;
    resid.rowwise() += intercept.transpose();
    return resid.squaredNorm() + lambda * W.squaredNorm();
}

/**
 * Seeded train/validation split, one fit per candidate, refit of the winner on
 * every row. Candidates may be evaluated concurrently; each writes only its own
 * slot, so the report does not depend on scheduling. Ties go to the larger lambda.
 */
inline std::pair<RidgeModel, GridSearchReport> grid_search(const Eigen::MatrixXd& X, const Eigen::MatrixXd& F,
                                                           std::span<const double> lambdas,
                                                           const GridSearchOptions& opt = {}) {
    if (X.rows() != F.rows()) {
        throw ShapeError("grid search: X has " + std::to_string(X.rows()) + " rows but F has " +
                         std::to_string(F.rows()));
    }
    if (lambdas.size() < 2) {
        throw Error("grid search: need at least 2 candidate lambdas");
    }
    if (!(opt.split_fraction > 0.0 && opt.split_fraction < 1.0)) {
        throw Error("grid search: split fraction must lie in (0, 1)");
    }

    const auto N = static_cast<std::size_t>(X.rows());
    const auto n_train = static_cast<std::size_t>(std::floor(opt.split_fraction * static_cast<double>(N) + 1e-9));
    if (n_train < 1 || n_train >= N) {
        throw DegenerateError("grid search: " + std::to_string(N) + " rows at split " +
                              std::to_string(opt.split_fraction) + " leave an empty training or validation split");
    }

    Rng rng(opt.seed);
    const auto order = rng.permutation(N);
    Eigen::MatrixXd x_train(n_train, X.cols()), f_train(n_train, F.cols());
    Eigen::MatrixXd x_val(N - n_train, X.cols()), f_val(N - n_train, F.cols());
    for (std::size_t i = 0; i < N; ++i) {
        const auto src = static_cast<Eigen::Index>(order[i]);
        if (i < n_train) {
            x_train.row(static_cast<Eigen::Index>(i)) = X.row(src);
            f_train.row(static_cast<Eigen::Index>(i)) = F.row(src);
        } else {
            x_val.row(static_cast<Eigen::Index>(i - n_train)) = X.row(src);
            f_val.row(static_cast<Eigen::Index>(i - n_train)) = F.row(src);
        }
    }

    GridSearchReport report;
    report.lambdas.assign(lambdas.begin(), lambdas.end());
    report.losses.assign(lambdas.size(), 0.0);
    report.n_train = n_train;
    report.n_validation = N - n_train;
    report.seed = opt.seed;

    parallel_for(lambdas.size(), opt.threads, [&](std::size_t i) {
        const auto m = fit(x_train, f_train, lambdas[i], opt.with_intercept);
        report.losses[i] = (predict(m, x_val) - f_val).squaredNorm() / static_cast<double>(f_val.size());
    });

    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!std::isfinite(report.losses[i])) {
            throw DegenerateError("grid search: non-finite validation loss at lambda=" + std::to_string(lambdas[i]));
        }
        const double best = report.losses[report.chosen];
        if (report.losses[i] < best || (report.losses[i] == best && lambdas[i] > lambdas[report.chosen])) {
            report.chosen = i;
        }
    }

    return {fit(X, F, lambdas[report.chosen], opt.with_intercept), std::move(report)};
}

inline std::pair<RidgeModel, GridSearchReport> grid_search(const TrialMatrix& X, const FeatureMatrix& F,
                                                           std::span<const double> lambdas,
                                                           const GridSearchOptions& opt = {}) {
    // rows must already be aligned by id
    if (X.image_ids != F.item_ids) {
        throw AlignmentError("grid search: trial image ids and feature item ids differ row by row");
    }
    return grid_search(X.data, F.data, lambdas, opt);
}

inline nlohmann::json to_json(const GridSearchReport& r) {
    nlohmann::json j;
    j["lambdas"] = r.lambdas;
    j["validation_losses"] = r.losses;
    j["chosen_index"] = r.chosen;
    j["chosen_lambda"] = r.chosen_lambda();
    j["n_train"] = r.n_train;
    j["n_validation"] = r.n_validation;
    j["seed"] = r.seed;
    return j;
}

// ---------------------------------------------------------------------------
// Persistence: FMX1 with W row-major and the scalars/vectors in the header.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

inline Eigen::VectorXd vector_field(const nlohmann::json& h, const char* key, Eigen::Index n,
                                    const std::string& source) {
    if (!h.contains(key) || !h[key].is_array() || static_cast<Eigen::Index>(h[key].size()) != n) {
        throw FormatError(source + ": model header field '" + key + "' must be an array of " + std::to_string(n) +
                          " numbers");
    }
    Eigen::VectorXd out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& v = h[key][static_cast<std::size_t>(i)];
        if (!v.is_number()) {
            throw FormatError(source + ": non-numeric entry in '" + key + "'");
        }
        out(i) = v.get<double>();
    }
    return out;
}

} // namespace detail

inline void save_model(const RidgeModel& m, const std::filesystem::path& path) {
    nlohmann::json h;
    std::vector<std::string> ids;
    for (Eigen::Index i = 0; i < m.features(); ++i) {
        ids.push_back("f" + std::to_string(i));
    }
    h["ids"] = ids;
    h["labels"] = nullptr;
    h["lambda"] = m.lambda;
    h["with_intercept"] = m.with_intercept;
    h["intercept"] = detail::to_std(m.intercept);
    h["train_mean"] = detail::to_std(m.train_feature_mean);
    h["train_std"] = detail::to_std(m.train_feature_std);
    h["n_train"] = m.n_train;
    fmx::write(path, h, m.weights);
}

inline RidgeModel load_model(const std::filesystem::path& path) {
    auto c = fmx::read(path);
    const std::string src = path.string();
    RidgeModel m;
    if (!c.header.contains("lambda") || !c.header["lambda"].is_number()) {
        throw FormatError(src + ": model header lacks lambda");
    }
    m.lambda = c.header["lambda"].get<double>();
    m.with_intercept = c.header.value("with_intercept", true);
    m.n_train = c.header.value("n_train", std::size_t{0});
    const auto D = c.data.rows();
    m.intercept = detail::vector_field(c.header, "intercept", D, src);
    m.train_feature_mean = detail::vector_field(c.header, "train_mean", D, src);
    m.train_feature_std = detail::vector_field(c.header, "train_std", D, src);
    m.weights = std::move(c.data);
    return m;
}

} // namespace semdec::ridge
