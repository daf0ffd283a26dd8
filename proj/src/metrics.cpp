#include "dutrpca/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "dutrpca/errors.hpp"

namespace dutrpca {

namespace {

constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> w{};
    double total = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
        total += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) {
        v /= total;
    }
    return w;
}

// Separable valid-mode Gaussian filter of one band.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& m, const std::array<double, kWindow>& w) {
    const Index rows = m.rows() - kWindow + 1;
    const Index cols = m.cols() - kWindow + 1;
    Eigen::MatrixXd tmp = Eigen::MatrixXd::Zero(rows, m.cols());
    for (Index i = 0; i < rows; ++i) {
        for (int t = 0; t < kWindow; ++t) {
            tmp.row(i) += w[static_cast<std::size_t>(t)] * m.row(i + t);
        }
    }
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (int t = 0; t < kWindow; ++t) {
            out.col(j) += w[static_cast<std::size_t>(t)] * tmp.col(j + t);
        }
    }
    return out;
}

} // namespace

double psnr(const Tensor3& ref, const Tensor3& est, double peak) {
    require_same_shape(ref, est, "psnr");
    const Index n1 = ref.n1(), n2 = ref.n2(), n3 = ref.n3();
    double total = 0.0;
    for (Index k = 0; k < n3; ++k) {
        double se = 0.0;
        for (Index i = 0; i < n1; ++i) {
            for (Index j = 0; j < n2; ++j) {
                const double d = ref(i, j, k) - est(i, j, k);
                se += d * d;
            }
        }
        const double mse = se / static_cast<double>(n1 * n2);
        total += mse > 0.0 ? std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse)) : kPsnrCap;
    }
    return total / static_cast<double>(n3);
}

double ssim(const Tensor3& ref, const Tensor3& est, double peak) {
    require_same_shape(ref, est, "ssim");
    if (ref.n1() < kWindow || ref.n2() < kWindow) {
        throw WindowTooLarge("spatial extent must be at least 11x11");
    }
    const double c1 = (0.01 * peak) * (0.01 * peak);
    const double c2 = (0.03 * peak) * (0.03 * peak);
    const auto w = gaussian_taps();
    double total = 0.0;
    for (Index k = 0; k < ref.n3(); ++k) {
        const Eigen::MatrixXd a = ref.frontal_slice(k);
        const Eigen::MatrixXd b = est.frontal_slice(k);
        const Eigen::ArrayXXd mu_a = filter_valid(a, w).array();
        const Eigen::ArrayXXd mu_b = filter_valid(b, w).array();
        const Eigen::ArrayXXd aa = filter_valid(a.cwiseProduct(a), w).array() - mu_a.square();
        const Eigen::ArrayXXd bb = filter_valid(b.cwiseProduct(b), w).array() - mu_b.square();
        const Eigen::ArrayXXd ab = filter_valid(a.cwiseProduct(b), w).array() - mu_a * mu_b;
        const Eigen::ArrayXXd map = ((2.0 * mu_a * mu_b + c1) * (2.0 * ab + c2)) /
                                    ((mu_a.square() + mu_b.square() + c1) * (aa + bb + c2));
        total += map.mean();
    }
    return total / static_cast<double>(ref.n3());
}

double sam(const Tensor3& ref, const Tensor3& est) {
    require_same_shape(ref, est, "sam");
    const Index n3 = ref.n3();
    const auto rv = ref.values();
    const auto ev = est.values();
    double total = 0.0;
    Index counted = 0;
    for (Index p = 0; p < ref.n1() * ref.n2(); ++p) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (Index k = 0; k < n3; ++k) {
            const double a = rv[static_cast<std::size_t>(p * n3 + k)];
            const double b = ev[static_cast<std::size_t>(p * n3 + k)];
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        if (na == 0.0 || nb == 0.0) {
            continue;
        }
        total += std::acos(std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0));
        ++counted;
    }
    if (counted == 0) {
        throw AllSpectraZero("no position has nonzero spectra in both inputs");
    }
    return total / static_cast<double>(counted);
}

Metrics evaluate(const Tensor3& ref, const Tensor3& est, double peak) {
    return {psnr(ref, est, peak), ssim(ref, est, peak), sam(ref, est)};
}

} // namespace dutrpca
