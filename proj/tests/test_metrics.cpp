#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dutrpca/errors.hpp"
#include "dutrpca/metrics.hpp"
#include "oracles.hpp"

using namespace dutrpca;

TEST(Psnr, TwentyDecibelCase) {
    const Tensor3 ref(4, 4, 3, 0.0), est(4, 4, 3, 0.1);
    EXPECT_NEAR(psnr(ref, est), 20.0, 1e-12);
    EXPECT_NEAR(psnr(ref, est, 10.0), 40.0, 1e-12);
}

TEST(Psnr, CapsExactBands) {
    const Tensor3 a = oracle::random_tensor(5, 5, 2, 1, 0.0, 1.0);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    Tensor3 b = a;
    b(0, 0, 1) += 0.1;
    // Band 0 is exact and capped; band 1 has MSE 0.01 / 25.
    EXPECT_NEAR(psnr(a, b), (kPsnrCap + 10.0 * std::log10(2500.0)) / 2.0, 1e-9);
}

TEST(Psnr, IsBandMeanOfDirectFormula) {
    const Tensor3 a = oracle::random_tensor(6, 7, 4, 2, 0.0, 1.0), b = oracle::random_tensor(6, 7, 4, 3, 0.0, 1.0);
    double acc = 0.0;
    for (Index k = 0; k < 4; ++k) {
        double mse = 0.0;
        for (Index i = 0; i < 6; ++i)
            for (Index j = 0; j < 7; ++j) {
                mse += (a(i, j, k) - b(i, j, k)) * (a(i, j, k) - b(i, j, k));
            }
        acc += 10.0 * std::log10(42.0 / mse);
    }
    EXPECT_NEAR(psnr(a, b), acc / 4.0, 1e-10);
    EXPECT_DOUBLE_EQ(psnr(a, b), psnr(b, a));
    EXPECT_THROW(psnr(a, Tensor3(6, 7, 3)), ShapeMismatch);
}

TEST(Sam, AngleCases) {
    Tensor3 a(1, 1, 2), b(1, 1, 2);
    a(0, 0, 0) = 1.0;
    b(0, 0, 0) = 2.0;
    EXPECT_NEAR(sam(a, b), 0.0, 1e-12);
    b(0, 0, 1) = 2.0;
    EXPECT_NEAR(sam(a, b), std::numbers::pi / 4, 1e-12);
    b(0, 0, 0) = 0.0;
    EXPECT_NEAR(sam(a, b), std::numbers::pi / 2, 1e-12);
    EXPECT_NEAR(sam(b, a), std::numbers::pi / 2, 1e-12);
}

TEST(Sam, SkipsZeroSpectra) {
    Tensor3 a(1, 2, 2), b(1, 2, 2);
    a(0, 0, 0) = 1.0;
    b(0, 0, 0) = 1.0;
    b(0, 0, 1) = 1.0;
    a(0, 1, 0) = 3.0; // b is zero here
    EXPECT_NEAR(sam(a, b), std::numbers::pi / 4, 1e-12);
    EXPECT_THROW(sam(Tensor3(2, 2, 3), Tensor3(2, 2, 3)), AllSpectraZero);
}

TEST(Ssim, MatchesDirectWindowedDefinition) {
    const Tensor3 a = oracle::random_tensor(16, 14, 3, 4, 0.0, 1.0);
    Tensor3 b = a + oracle::random_tensor(16, 14, 3, 5, -0.1, 0.1);
    double ref = 0.0;
    for (Index k = 0; k < 3; ++k) {
        ref += oracle::ssim_band(a, b, k);
    }
    EXPECT_NEAR(ssim(a, b), ref / 3.0, 1e-10);
    EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-12);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesClosedForm) {
    const double x = 0.2, y = 0.6, c1 = 1e-4;
    EXPECT_NEAR(ssim(Tensor3(11, 11, 1, x), Tensor3(11, 11, 1, y)), (2 * x * y + c1) / (x * x + y * y + c1), 1e-12);
}

TEST(Ssim, RejectsSmallImages) {
    EXPECT_THROW(ssim(Tensor3(10, 12, 2), Tensor3(10, 12, 2)), WindowTooLarge);
    EXPECT_THROW(ssim(Tensor3(12, 10, 2), Tensor3(12, 10, 2)), WindowTooLarge);
}

TEST(Metrics, EvaluateBundlesAll) {
    const Tensor3 a = oracle::random_tensor(12, 12, 4, 6, 0.1, 1.0), b = oracle::random_tensor(12, 12, 4, 7, 0.1, 1.0);
    const Metrics m = evaluate(a, b);
    EXPECT_EQ(m.psnr, psnr(a, b));
    EXPECT_EQ(m.ssim, ssim(a, b));
    EXPECT_EQ(m.sam, sam(a, b));
}
