#include "dutrpca/trpca.hpp"

#include <algorithm>
#include <cmath>

#include "dutrpca/errors.hpp"
#include "dutrpca/rng.hpp"
#include "dutrpca/tsvd.hpp"

namespace dutrpca {

TrpcaConfig TrpcaConfig::for_problem(double lambda, Index n3, double lambda_L) {
    TrpcaConfig cfg;
    cfg.lambda = lambda;
    cfg.lambda_L = lambda_L;
    cfg.lambda_S = lambda * static_cast<double>(n3) * lambda_L;
    return cfg;
}

void TrpcaConfig::validate() const {
    if (!(lambda > 0.0) || !(lambda_L > 0.0) || !(lambda_S > 0.0) || !(tol > 0.0)) {
        throw InvalidArgument("TrpcaConfig: lambda, lambda_L, lambda_S and tol must be positive");
    }
    if (max_iters < 1) {
        throw InvalidArgument("TrpcaConfig: max_iters must be >= 1");
    }
}

Tensor3 soft_threshold(const Tensor3& t, double tau) {
    if (!(tau >= 0.0)) {
        throw InvalidArgument("soft_threshold: tau must be >= 0");
    }
    Tensor3 out = t;
    for (double& v : out.values()) {
        const double mag = std::abs(v) - tau;
        v = mag > 0.0 ? std::copysign(mag, v) : 0.0;
    }
    return out;
}

double default_lambda(Index n1, Index n2, Index n3) {
    if (n1 < 1 || n2 < 1 || n3 < 1) {
        throw InvalidArgument("default_lambda: dimensions must be >= 1");
    }
    return 1.0 / std::sqrt(static_cast<double>(std::max(n1, n2)) * static_cast<double>(n3));
}

namespace {

double objective_with_tnn(const Tensor3& x, const Tensor3& l, const Tensor3& s, const TrpcaConfig& cfg, double tnn) {
    const double fit = (x - l - s).frobenius_norm();
    double l1 = 0.0;
    for (double v : s.values()) {
        l1 += std::abs(v);
    }
    return 0.5 * fit * fit + cfg.lambda_L * static_cast<double>(x.n3()) * tnn + cfg.lambda_S * l1;
}

} // namespace

double trpca_objective(const Tensor3& x, const Tensor3& l, const Tensor3& s, const TrpcaConfig& cfg) {
    return objective_with_tnn(x, l, s, cfg, tubal_nuclear_norm(l));
}

TrpcaResult trpca_solve(const Tensor3& x, const TrpcaConfig& cfg) {
    cfg.validate();
    if (!x.all_finite()) {
        throw NonFinite("trpca_solve: input contains non-finite entries");
    }
    TrpcaResult result;
    result.L = Tensor3(x.shape());
    result.S = Tensor3(x.shape());
    const double x_norm = x.frobenius_norm();
    const double scale = x_norm > 0.0 ? x_norm : 1.0;

    for (int it = 0; it < cfg.max_iters; ++it) {
        double tnn = 0.0;
        Tensor3 l_next = tsvt(x - result.S, cfg.lambda_L, &tnn);
        Tensor3 s_next = soft_threshold(x - l_next, cfg.lambda_S);
        const double change = std::max((l_next - result.L).frobenius_norm(),
                                       (s_next - result.S).frobenius_norm()) / scale;
        result.L = std::move(l_next);
        result.S = std::move(s_next);
        result.iters = it + 1;
        result.residual_history.push_back((x - result.L - result.S).frobenius_norm() / scale);
        result.objective_history.push_back(objective_with_tnn(x, result.L, result.S, cfg, tnn));
        if (change < cfg.tol) {
            result.converged = true;
            break;
        }
    }
    return result;
}

PlantedProblem planted_problem(Index n1, Index n2, Index n3, Index rank, double sparse_fraction, std::uint64_t seed) {
    if (rank < 1 || rank > std::min(n1, n2)) {
        throw InvalidArgument("planted_problem: rank must lie in [1, min(n1, n2)]");
    }
    if (!(sparse_fraction >= 0.0 && sparse_fraction <= 1.0)) {
        throw InvalidArgument("planted_problem: sparse_fraction must lie in [0, 1]");
    }
    Rng rng(seed);
    Tensor3 a(n1, rank, n3);
    Tensor3 b(rank, n2, n3);
    for (double& v : a.values()) {
        v = rng.normal();
    }
    for (double& v : b.values()) {
        v = rng.normal();
    }
    PlantedProblem p;
    p.L = t_product(a, b);
    p.S = Tensor3(n1, n2, n3);
    for (double& v : p.S.values()) {
        if (rng.bernoulli(sparse_fraction)) {
            v = rng.bernoulli(0.5) ? 1.0 : -1.0;
        }
    }
    p.X = p.L + p.S;
    return p;
}

} // namespace dutrpca
