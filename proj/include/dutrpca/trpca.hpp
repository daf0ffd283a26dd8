#pragma once

#include <cstdint>
#include <vector>

#include "dutrpca/tensor3.hpp"

namespace dutrpca {

/**
 * Weights for the alternating low-rank / sparse solver.
 *
 * The solver minimizes 0.5*||X - L - S||_F^2 + lambda_L * n3 * TNN(L) + lambda_S * ||S||_1
 * by exact block updates. `lambda` is the sparsity weight of the constrained
 * problem min TNN(L) + lambda*||S||_1; it is linked to the block weights by
 * lambda_S = lambda * n3 * lambda_L (see for_problem()).
 */
struct TrpcaConfig {
    double lambda = 1.0;
    double lambda_L = 1.0;
    double lambda_S = 1.0;
    int max_iters = 500;
    double tol = 1e-7;

    /// Block weights whose penalized objective is n3 * lambda_L times the constrained one.
    static TrpcaConfig for_problem(double lambda, Index n3, double lambda_L);

    void validate() const;
};

struct TrpcaResult {
    Tensor3 L;
    Tensor3 S;
    int iters = 0;
    bool converged = false;
    /// ||X - L - S||_F / ||X||_F after each iteration.
    std::vector<double> residual_history;
    /// Penalized objective after each iteration.
    std::vector<double> objective_history;
};

/// sign(t) * max(|t| - tau, 0), element-wise.
Tensor3 soft_threshold(const Tensor3& t, double tau);

/// 1 / sqrt(max(n1, n2) * n3)
double default_lambda(Index n1, Index n2, Index n3);

/// 0.5*||X - L - S||_F^2 + lambda_L*n3*TNN(L) + lambda_S*||S||_1
double trpca_objective(const Tensor3& x, const Tensor3& l, const Tensor3& s, const TrpcaConfig& cfg);

TrpcaResult trpca_solve(const Tensor3& x, const TrpcaConfig& cfg);

/// Low-rank plus sparse test problem with known parts, X = L + S.
struct PlantedProblem {
    Tensor3 L;
    Tensor3 S;
    Tensor3 X;
};

/**
 * L = A * B (t-product) with A (n1 x rank x n3), B (rank x n2 x n3) i.i.d. standard normal;
 * each entry of S is independently +-1 with probability sparse_fraction, else 0.
 */
PlantedProblem planted_problem(Index n1, Index n2, Index n3, Index rank, double sparse_fraction, std::uint64_t seed);

} // namespace dutrpca
