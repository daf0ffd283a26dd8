#include <gtest/gtest.h>

#include <cmath>

#include "dutrpca/errors.hpp"
#include "dutrpca/trpca.hpp"
#include "dutrpca/tsvd.hpp"
#include "oracles.hpp"

using namespace dutrpca;

TEST(SoftThreshold, HandCase) {
    const Tensor3 t(1, 1, 3, std::vector<double>{-3.0, 0.5, 2.0});
    const Tensor3 out = soft_threshold(t, 1.0);
    EXPECT_EQ(out(0, 0, 0), -2.0);
    EXPECT_EQ(out(0, 0, 1), 0.0);
    EXPECT_EQ(out(0, 0, 2), 1.0);
}

TEST(SoftThreshold, IdentityAndZero) {
    const Tensor3 t = oracle::random_tensor(3, 3, 3, 1);
    EXPECT_EQ(max_abs_diff(soft_threshold(t, 0.0), t), 0.0);
    EXPECT_EQ(soft_threshold(Tensor3(2, 2, 2), 0.7).frobenius_norm(), 0.0);
    EXPECT_THROW(soft_threshold(t, -0.1), InvalidArgument);
}

TEST(DefaultLambda, Formula) {
    EXPECT_NEAR(default_lambda(30, 30, 10), 1.0 / std::sqrt(300.0), 1e-15);
    EXPECT_NEAR(default_lambda(30, 30, 10), 0.05774, 5e-6);
    EXPECT_EQ(default_lambda(1, 1, 1), 1.0);
    EXPECT_NEAR(default_lambda(512, 512, 31), 0.0079375, 1e-6);
    EXPECT_NEAR(default_lambda(20, 40, 2), 1.0 / std::sqrt(80.0), 1e-15);
}

TEST(TrpcaConfig, Validation) {
    TrpcaConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.lambda_S = 0.0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    cfg = TrpcaConfig{};
    cfg.max_iters = 0;
    EXPECT_THROW(cfg.validate(), InvalidArgument);
    const TrpcaConfig p = TrpcaConfig::for_problem(0.5, 4, 0.1);
    EXPECT_DOUBLE_EQ(p.lambda_S, 0.2);
}

TEST(TrpcaSolve, ZeroInputStopsAfterOneIteration) {
    const TrpcaResult r = trpca_solve(Tensor3(4, 4, 3), TrpcaConfig{});
    EXPECT_EQ(r.iters, 1);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.L.frobenius_norm(), 0.0);
    EXPECT_EQ(r.S.frobenius_norm(), 0.0);
}

TEST(TrpcaSolve, PureLowRankWithHugeSparsityWeight) {
    const Tensor3 x = oracle::low_tubal_rank(10, 10, 4, 1, 3);
    TrpcaConfig cfg;
    cfg.lambda = 1.0;
    cfg.lambda_L = 1e-9;
    cfg.lambda_S = 1e6;
    const TrpcaResult r = trpca_solve(x, cfg);
    EXPECT_LE(relative_error(r.L, x), 1e-6);
    EXPECT_EQ(r.S.frobenius_norm(), 0.0);
}

TEST(TrpcaSolve, RecoversPlantedProblemAndStaysFeasible) {
    const PlantedProblem p = planted_problem(30, 30, 10, 2, 0.05, 11);
    const TrpcaConfig cfg = TrpcaConfig::for_problem(default_lambda(30, 30, 10), 10, 0.01);
    const TrpcaResult r = trpca_solve(p.X, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iters, 500);
    EXPECT_LE(relative_error(r.L, p.L), 1e-3);
    EXPECT_EQ(static_cast<int>(r.residual_history.size()), r.iters);
    EXPECT_EQ(static_cast<int>(r.objective_history.size()), r.iters);
    for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
        EXPECT_LE(r.objective_history[k], r.objective_history[k - 1] + 1e-9);
    }
}

TEST(TrpcaSolve, ObjectiveHistoryMatchesIndependentEvaluation) {
    const PlantedProblem p = planted_problem(12, 10, 5, 2, 0.1, 12);
    TrpcaConfig cfg = TrpcaConfig::for_problem(default_lambda(12, 10, 5), 5, 0.05);
    cfg.max_iters = 3;
    const TrpcaResult r = trpca_solve(p.X, cfg);
    ASSERT_EQ(r.iters, 3);
    double l1 = 0.0;
    for (double v : r.S.values()) {
        l1 += std::abs(v);
    }
    const double fit = (p.X - r.L - r.S).frobenius_norm();
    const double expected = 0.5 * fit * fit + cfg.lambda_L * 5.0 * oracle::bcirc_tnn(r.L) + cfg.lambda_S * l1;
    EXPECT_NEAR(r.objective_history.back(), expected, 1e-9 * expected);
    EXPECT_NEAR(trpca_objective(p.X, r.L, r.S, cfg), expected, 1e-9 * expected);
}

TEST(TrpcaSolve, FixedPointIsStable) {
    const PlantedProblem p = planted_problem(15, 15, 6, 2, 0.05, 13);
    TrpcaConfig cfg = TrpcaConfig::for_problem(default_lambda(15, 15, 6), 6, 0.01);
    const TrpcaResult r = trpca_solve(p.X, cfg);
    ASSERT_TRUE(r.converged);
    const Tensor3 l = tsvt(p.X - r.S, cfg.lambda_L);
    const Tensor3 s = soft_threshold(p.X - l, cfg.lambda_S);
    const double scale = p.X.frobenius_norm();
    EXPECT_LE((l - r.L).frobenius_norm() / scale, cfg.tol);
    EXPECT_LE((s - r.S).frobenius_norm() / scale, cfg.tol);
}

TEST(TrpcaSolve, RejectsNonFiniteInput) {
    Tensor3 x(3, 3, 3);
    x(1, 1, 1) = INFINITY;
    EXPECT_THROW(trpca_solve(x, TrpcaConfig{}), NonFinite);
}

TEST(PlantedProblem, HasRequestedStructure) {
    const PlantedProblem p = planted_problem(20, 20, 5, 2, 0.05, 14);
    EXPECT_EQ(tubal_rank(p.L), 2);
    long nonzero = 0;
    for (double v : p.S.values()) {
        EXPECT_TRUE(v == 0.0 || v == 1.0 || v == -1.0);
        nonzero += v != 0.0;
    }
    EXPECT_GT(nonzero, 50);
    EXPECT_LT(nonzero, 150);
    EXPECT_EQ(max_abs_diff(p.X, p.L + p.S), 0.0);
}
