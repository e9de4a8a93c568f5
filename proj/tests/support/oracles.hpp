#pragma once

// Reference computations written independently of the library code paths.

#include <semdec/dataio.hpp>
#include <semdec/latent_index.hpp>
#include <semdec/random.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Ridge weights (D x V) by explicit dense inversion of the V x V normal matrix.
inline Eigen::MatrixXd ridge_dense_inverse(Eigen::MatrixXd X, Eigen::MatrixXd F, double lambda, bool intercept) {
    if (intercept) {
        const Eigen::RowVectorXd xm = X.colwise().mean();
        const Eigen::RowVectorXd fm = F.colwise().mean();
        X.rowwise() -= xm;
        F.rowwise() -= fm;
    }
    Eigen::MatrixXd G = X.transpose() * X;
    G.diagonal().array() += lambda;
    const Eigen::MatrixXd Ginv = Eigen::FullPivLU<Eigen::MatrixXd>(G).inverse();
    return (Ginv * X.transpose() * F).transpose();
}

// ||W (X'X + lambda I) - F'X||_F / ||F'X||_F on centred data when requested.
inline double normal_equation_residual(Eigen::MatrixXd X, Eigen::MatrixXd F, const Eigen::MatrixXd& W, double lambda,
                                       bool intercept) {
    if (intercept) {
        X.rowwise() -= X.colwise().mean();
        F.rowwise() -= F.colwise().mean();
    }
    Eigen::MatrixXd G = X.transpose() * X;
    G.diagonal().array() += lambda;
    const Eigen::MatrixXd rhs = F.transpose() * X;
    return (W * G - rhs).norm() / rhs.norm();
}

struct Hit {
    double distance;
    std::size_t index;
};

// Full sort of every distance, ties by index.
inline std::vector<Hit> knn_full_sort(const Eigen::MatrixXd& items, const Eigen::VectorXd& q, std::size_t k,
                                      semdec::Metric metric) {
    std::vector<Hit> all;
    for (Eigen::Index i = 0; i < items.rows(); ++i) {
        const Eigen::VectorXd x = items.row(i).transpose();
        double d;
        if (metric == semdec::Metric::euclidean) {
            d = (x - q).norm();
        } else {
            d = 1.0 - x.dot(q) / (x.norm() * q.norm());
        }
        all.push_back({d, static_cast<std::size_t>(i)});
    }
    std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
    });
    all.resize(k);
    return all;
}

inline Eigen::MatrixXd random_matrix(semdec::Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.normal(0.0, sd);
        }
    }
    return m;
}

// Column means and sample standard deviations, two-pass.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> column_moments(const Eigen::MatrixXd& m) {
    const auto n = static_cast<double>(m.rows());
    Eigen::VectorXd mean(m.cols()), sd(m.cols());
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            s += m(i, j);
        }
        mean[j] = s / n;
        double ss = 0.0;
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            ss += (m(i, j) - mean[j]) * (m(i, j) - mean[j]);
        }
        sd[j] = std::sqrt(ss / (n - 1.0));
    }
    return {mean, sd};
}

inline semdec::FeatureMatrix labelled(const Eigen::MatrixXd& data, const std::vector<std::string>& labels) {
    semdec::FeatureMatrix m;
    m.data = data;
    m.labels.emplace();
    for (std::size_t i = 0; i < static_cast<std::size_t>(data.rows()); ++i) {
        m.item_ids.push_back("item" + std::to_string(i));
        m.labels->emplace_back(labels[i % labels.size()]);
    }
    return m;
}

} // namespace oracle

namespace testenv {

inline std::filesystem::path data_dir() { return SEMDEC_TEST_DATA_DIR; }

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::path(SEMDEC_TEST_SCRATCH_DIR) / name;
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace testenv
