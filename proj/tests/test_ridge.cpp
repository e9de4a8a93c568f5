#include <semdec/error.hpp>
#include <semdec/ridge.hpp>

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace semdec;

TEST(RidgeFit, IdentityInterpolation) {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    for (auto path : {ridge::SolvePath::primal, ridge::SolvePath::kernel}) {
        const auto m = ridge::fit(I, I, 0.0, false, path);
        EXPECT_LT((m.weights - I).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_EQ(m.intercept, Eigen::VectorXd::Zero(3));
    }
}

TEST(RidgeFit, MatchesDenseInverseOracle) {
    Rng rng(20);
    const auto X = oracle::random_matrix(rng, 20, 5);
    const auto F = oracle::random_matrix(rng, 20, 2);
    for (bool icpt : {false, true}) {
        const auto m = ridge::fit(X, F, 0.7, icpt);
        const auto W = oracle::ridge_dense_inverse(X, F, 0.7, icpt);
        EXPECT_LT((m.weights - W).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT(oracle::normal_equation_residual(X, F, m.weights, 0.7, icpt), 1e-8);
    }
}

TEST(RidgeFit, HugeLambdaShrinksToZero) {
    Rng rng(21);
    const auto X = oracle::random_matrix(rng, 15, 6);
    const auto F = oracle::random_matrix(rng, 15, 3);
    EXPECT_LT(ridge::fit(X, F, 1e12).weights.norm(), 1e-6);
}

TEST(RidgeFit, RandomInstancesSatisfyNormalEquations) {
    Rng rng(22);
    for (int t = 0; t < 100; ++t) {
        const auto N = static_cast<Eigen::Index>(2 + rng.index(29));
        const auto V = static_cast<Eigen::Index>(1 + rng.index(30));
        const auto D = static_cast<Eigen::Index>(1 + rng.index(30));
        const double lambda = std::pow(10.0, -2.0 + 4.0 * rng.uniform());
        const bool icpt = rng.index(2) == 1;
        const auto X = oracle::random_matrix(rng, N, V);
        const auto F = oracle::random_matrix(rng, N, D);
        const auto m = ridge::fit(X, F, lambda, icpt);
        ASSERT_LT(oracle::normal_equation_residual(X, F, m.weights, lambda, icpt), 1e-8) << "instance " << t;
        const auto W = oracle::ridge_dense_inverse(X, F, lambda, icpt);
        ASSERT_LT((m.weights - W).cwiseAbs().maxCoeff(), 1e-8) << "instance " << t;
    }
}

TEST(RidgeFit, PrimalAndKernelAgree) {
    Rng rng(23);
    for (int t = 0; t < 50; ++t) {
        const bool wide = t % 2 == 0;
        const auto N = static_cast<Eigen::Index>(wide ? 5 + rng.index(15) : 25 + rng.index(20));
        const auto V = static_cast<Eigen::Index>(wide ? N + 1 + static_cast<Eigen::Index>(rng.index(20)) : 3 + rng.index(20));
        const auto X = oracle::random_matrix(rng, N, V);
        const auto F = oracle::random_matrix(rng, N, 4);
        const double lambda = 0.05 + rng.uniform();
        const auto p = ridge::fit(X, F, lambda, t % 3 == 0, ridge::SolvePath::primal);
        const auto k = ridge::fit(X, F, lambda, t % 3 == 0, ridge::SolvePath::kernel);
        ASSERT_LT((p.weights - k.weights).cwiseAbs().maxCoeff(), 1e-7) << "instance " << t;
        ASSERT_LT((p.intercept - k.intercept).cwiseAbs().maxCoeff(), 1e-7);
    }
}

TEST(RidgeFit, TrainingResidualGrowsWithLambda) {
    Rng rng(24);
    const auto X = oracle::random_matrix(rng, 30, 12);
    const auto F = oracle::random_matrix(rng, 30, 4);
    double prev = -1.0;
    for (double lambda : {0.0, 1e-3, 1e-1, 1.0, 10.0, 100.0, 1e4}) {
        const auto m = ridge::fit(X, F, lambda);
        const double r = (ridge::predict(m, X) - F).norm();
        EXPECT_GE(r, prev - 1e-12) << "lambda " << lambda;
        prev = r;
    }
}

TEST(RidgeFit, PerturbationNeverLowersObjective) {
    Rng rng(25);
    for (int t = 0; t < 20; ++t) {
        const auto X = oracle::random_matrix(rng, 18, 9);
        const auto F = oracle::random_matrix(rng, 18, 3);
        const double lambda = 0.5;
        const auto m = ridge::fit(X, F, lambda, t % 2 == 0);
        const double base = ridge::objective(X, F, m.weights, lambda, m.intercept);
        for (int k = 0; k < 10; ++k) {
            Eigen::MatrixXd dW = oracle::random_matrix(rng, 3, 9);
            dW *= 1e-3 / dW.norm();
            EXPECT_GE(ridge::objective(X, F, m.weights + dW, lambda, m.intercept), base);
        }
    }
}

TEST(RidgeFit, InterceptRecoversOffsets) {
    Rng rng(26);
    const auto X = oracle::random_matrix(rng, 40, 6);
    const auto Wtrue = oracle::random_matrix(rng, 3, 6);
    Eigen::MatrixXd F = X * Wtrue.transpose();
    F.rowwise() += Eigen::RowVector3d(5, -2, 7);
    const auto m = ridge::fit(X, F, 0.0, true);
    EXPECT_LT((m.weights - Wtrue).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((m.intercept - Eigen::Vector3d(5, -2, 7)).cwiseAbs().maxCoeff(), 1e-9);
    const auto [mean, sd] = oracle::column_moments(F);
    EXPECT_LT((m.train_feature_mean - mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((m.train_feature_std - sd).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(m.n_train, 40u);
}

TEST(RidgeFit, Errors) {
    EXPECT_THROW(ridge::fit(Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(4, 1), 1.0), ShapeError);
    EXPECT_THROW(ridge::fit(Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(3, 1), -1.0), Error);
    // Rank-one design: singular at lambda = 0 on both paths, fine with a ridge.
    Eigen::MatrixXd X(4, 3);
    X << 1, 2, 3, 2, 4, 6, 3, 6, 9, 4, 8, 12;
    const Eigen::MatrixXd F = Eigen::MatrixXd::Ones(4, 1);
    EXPECT_THROW(ridge::fit(X, F, 0.0, false, ridge::SolvePath::primal), SingularSystemError);
    EXPECT_THROW(ridge::fit(X, F, 0.0, false, ridge::SolvePath::kernel), SingularSystemError);
    EXPECT_NO_THROW(ridge::fit(X, F, 0.1, false));
}

TEST(RidgePredict, IdentityZeroAndNoiselessRecovery) {
    ridge::RidgeModel id;
    id.weights = Eigen::MatrixXd::Identity(3, 3);
    id.intercept = Eigen::VectorXd::Zero(3);
    Rng rng(27);
    const auto X = oracle::random_matrix(rng, 5, 3);
    EXPECT_EQ(ridge::predict(id, X), X);

    ridge::RidgeModel zero;
    zero.weights = Eigen::MatrixXd::Zero(2, 3);
    zero.intercept = Eigen::Vector2d(1.5, -1);
    const auto z = ridge::predict(zero, X);
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        EXPECT_EQ(z.row(i), Eigen::RowVector2d(1.5, -1));
    }
    EXPECT_THROW(ridge::predict(zero, Eigen::MatrixXd::Ones(2, 4)), ShapeError);

    // N <= V at lambda = 0 interpolates the training targets.
    const auto Xw = oracle::random_matrix(rng, 8, 20);
    const auto Fw = oracle::random_matrix(rng, 8, 4);
    const auto m = ridge::fit(Xw, Fw, 0.0, false);
    EXPECT_LT((ridge::predict(m, Xw) - Fw).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GridSearch, PicksSmallLambdaForPlantedModel) {
    Rng rng(28);
    const auto X = oracle::random_matrix(rng, 60, 10);
    const auto W = oracle::random_matrix(rng, 3, 10);
    const Eigen::MatrixXd F = X * W.transpose() + 1e-4 * oracle::random_matrix(rng, 60, 3);
    const std::vector<double> grid{1e-3, 1e3};
    const auto [model, report] = ridge::grid_search(X, F, grid);
    EXPECT_EQ(report.chosen_lambda(), 1e-3);
    EXPECT_EQ(model.lambda, 1e-3);
    EXPECT_EQ(report.n_train, 54u);
    EXPECT_EQ(report.n_validation, 6u);
    ASSERT_EQ(report.losses.size(), 2u);
    // The returned model is the refit on all rows.
    const auto full = ridge::fit(X, F, 1e-3);
    EXPECT_EQ(model.weights, full.weights);
}

TEST(GridSearch, TieGoesToLargerLambdaAndOrderDoesNotMatter) {
    Rng rng(29);
    const auto X = oracle::random_matrix(rng, 30, 5);
    const auto F = oracle::random_matrix(rng, 30, 2);
    const std::vector<double> tie{0.1, 0.1};
    const auto [m, r] = ridge::grid_search(X, F, tie);
    EXPECT_NEAR(r.losses[0], r.losses[1], 1e-12);
    EXPECT_EQ(r.chosen_lambda(), 0.1);

    std::vector<double> grid = ridge::default_lambda_grid();
    ASSERT_EQ(grid.size(), 9u);
    EXPECT_EQ(grid.front(), 1e-3);
    EXPECT_EQ(grid.back(), 1e5);
    ridge::GridSearchOptions opt;
    opt.seed = 4;
    const double chosen = ridge::grid_search(X, F, grid, opt).second.chosen_lambda();
    std::reverse(grid.begin(), grid.end());
    EXPECT_EQ(ridge::grid_search(X, F, grid, opt).second.chosen_lambda(), chosen);
    Rng shuf(1);
    shuf.shuffle(std::span<double>(grid));
    opt.threads = 3;
    EXPECT_EQ(ridge::grid_search(X, F, grid, opt).second.chosen_lambda(), chosen);
}

TEST(GridSearch, DeterministicPerSeedAndThreadCount) {
    Rng rng(30);
    const auto X = oracle::random_matrix(rng, 40, 8);
    const auto F = oracle::random_matrix(rng, 40, 3);
    const auto grid = ridge::default_lambda_grid();
    ridge::GridSearchOptions a, b;
    a.seed = b.seed = 17;
    a.threads = 1;
    b.threads = 4;
    EXPECT_EQ(ridge::grid_search(X, F, grid, a).second.losses, ridge::grid_search(X, F, grid, b).second.losses);
    b.seed = 18;
    EXPECT_NE(ridge::grid_search(X, F, grid, a).second.losses, ridge::grid_search(X, F, grid, b).second.losses);
}

TEST(GridSearch, Errors) {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(5, 2);
    const Eigen::MatrixXd F = Eigen::MatrixXd::Ones(5, 1);
    const std::vector<double> one{1.0};
    EXPECT_THROW(ridge::grid_search(X, F, one), Error);
    const std::vector<double> two{1.0, 2.0};
    ridge::GridSearchOptions opt;
    opt.split_fraction = 0.1;
    EXPECT_THROW(ridge::grid_search(X, F, two, opt), DegenerateError);
    opt.split_fraction = 1.0;
    EXPECT_THROW(ridge::grid_search(X, F, two, opt), Error);
    // lambda = 0 on a rank-deficient split is reported, not silently solved.
    const std::vector<double> with_zero{0.0, 1.0};
    EXPECT_THROW(ridge::grid_search(X, F, with_zero), SingularSystemError);
}

TEST(RidgeModelFile, RoundTrip) {
    Rng rng(31);
    const auto X = oracle::random_matrix(rng, 12, 4);
    const auto F = oracle::random_matrix(rng, 12, 3);
    const auto m = ridge::fit(X, F, 0.3);
    const auto p = testenv::scratch("model") / "m.fmx";
    ridge::save_model(m, p);
    const auto back = ridge::load_model(p);
    EXPECT_EQ(back.lambda, 0.3);
    EXPECT_TRUE(back.with_intercept);
    EXPECT_EQ(back.n_train, 12u);
    EXPECT_LT((back.weights - m.weights).cwiseAbs().maxCoeff(), 1e-6 * m.weights.cwiseAbs().maxCoeff());
    EXPECT_LT((back.intercept - m.intercept).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((back.train_feature_std - m.train_feature_std).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GridSearchReportJson, HasEveryCandidate) {
    ridge::GridSearchReport r;
    r.lambdas = {1, 10};
    r.losses = {0.5, 0.25};
    r.chosen = 1;
    const auto j = ridge::to_json(r);
    EXPECT_EQ(j.at("chosen_lambda"), 10.0);
    EXPECT_EQ(j.at("validation_losses").size(), 2u);
}
