#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dutrpca/errors.hpp"
#include "dutrpca/noise.hpp"
#include "oracles.hpp"

using namespace dutrpca;

namespace {

Tensor3 clean_cube(Index n1, Index n2, Index n3, std::uint64_t seed) {
    return oracle::random_tensor(n1, n2, n3, seed, 0.1, 0.9);
}

NoiseSpec quiet(NoiseKind kind) {
    NoiseSpec s;
    s.kind = kind;
    s.sigma_min = 0.0;
    s.sigma_max = 0.0;
    return s;
}

} // namespace

TEST(Noise, ZeroSigmaIsIdentity) {
    const Tensor3 c = clean_cube(6, 5, 4, 1);
    NoiseSpec s;
    s.sigma = 0.0;
    EXPECT_EQ(apply_noise(c, s).values()[0], c.values()[0]);
    EXPECT_EQ(max_abs_diff(apply_noise(c, s), c), 0.0);
    EXPECT_EQ(max_abs_diff(apply_noise(c, quiet(NoiseKind::NonIid)), c), 0.0);
}

TEST(Noise, GaussianResidualHasRequestedSpread) {
    const Tensor3 c = clean_cube(100, 100, 2, 2);
    NoiseSpec s;
    s.sigma = 25.5;
    s.seed = 3;
    const Tensor3 d = apply_noise(c, s) - c;
    double mean = 0.0, sq = 0.0;
    for (double v : d.values()) {
        mean += v;
        sq += v * v;
    }
    mean /= static_cast<double>(d.size());
    const double sd = std::sqrt(sq / static_cast<double>(d.size()) - mean * mean);
    EXPECT_NEAR(mean, 0.0, 0.003);
    EXPECT_NEAR(sd, 0.1, 0.003);
}

TEST(Noise, BandSigmasStayInRange) {
    NoiseSpec s;
    s.kind = NoiseKind::NonIid;
    s.seed = 4;
    const NoiseRealization r = apply_noise_detailed(clean_cube(4, 4, 50, 5), s);
    ASSERT_EQ(r.band_sigma.size(), 50u);
    for (double sigma : r.band_sigma) {
        EXPECT_GE(sigma, 10.0 / 255.0);
        EXPECT_LE(sigma, 70.0 / 255.0);
    }
    s.kind = NoiseKind::Blind;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        s.seed = seed;
        const NoiseRealization b = apply_noise_detailed(clean_cube(4, 4, 3, 6), s);
        EXPECT_GE(b.band_sigma[0], 30.0 / 255.0);
        EXPECT_LE(b.band_sigma[0], 70.0 / 255.0);
        EXPECT_EQ(std::set<double>(b.band_sigma.begin(), b.band_sigma.end()).size(), 1u);
    }
}

TEST(Noise, ImpulseWithCertaintyGivesBinaryBands) {
    NoiseSpec s = quiet(NoiseKind::Impulse);
    s.impulse_prob = 1.0;
    s.seed = 7;
    const Tensor3 c = clean_cube(8, 8, 9, 8);
    const NoiseRealization r = apply_noise_detailed(c, s);
    EXPECT_EQ(r.impulse_bands.size(), 3u);
    EXPECT_EQ(r.impulse_count, 3 * 64);
    for (int k : r.impulse_bands) {
        for (Index i = 0; i < 8; ++i)
            for (Index j = 0; j < 8; ++j) {
                const double v = r.noisy(i, j, k);
                EXPECT_TRUE(v == 0.0 || v == 1.0);
            }
    }
}

TEST(Noise, ImpulseFractionMatchesProbability) {
    NoiseSpec s = quiet(NoiseKind::Impulse);
    s.band_fraction = 1.0;
    s.seed = 9;
    const NoiseRealization r = apply_noise_detailed(clean_cube(100, 100, 2, 10), s);
    const double frac = static_cast<double>(r.impulse_count) / 20000.0;
    EXPECT_GE(frac, 0.27);
    EXPECT_LE(frac, 0.33);
}

TEST(Noise, DeadlineColumnsAreZero) {
    NoiseSpec s;
    s.kind = NoiseKind::Deadline;
    s.seed = 11;
    const NoiseRealization r = apply_noise_detailed(clean_cube(20, 40, 6, 12), s);
    EXPECT_EQ(r.deadline_bands.size(), 2u);
    ASSERT_FALSE(r.deadline_columns.empty());
    for (auto [band, col] : r.deadline_columns) {
        EXPECT_TRUE(std::count(r.deadline_bands.begin(), r.deadline_bands.end(), band) == 1);
        for (Index i = 0; i < 20; ++i) {
            EXPECT_EQ(r.noisy(i, col, band), 0.0);
        }
    }
}

TEST(Noise, StripesAreConstantAlongColumns) {
    NoiseSpec s = quiet(NoiseKind::Stripe);
    s.seed = 13;
    const Tensor3 c = clean_cube(10, 40, 3, 14);
    const NoiseRealization r = apply_noise_detailed(c, s);
    ASSERT_EQ(r.stripe_bands.size(), 1u);
    const int k = r.stripe_bands[0];
    int striped = 0;
    for (Index j = 0; j < 40; ++j) {
        const double off = r.noisy(0, j, k) - c(0, j, k);
        EXPECT_LE(std::abs(off), 0.25);
        for (Index i = 1; i < 10; ++i) {
            EXPECT_NEAR(r.noisy(i, j, k) - c(i, j, k), off, 1e-12);
        }
        striped += off != 0.0 ? 1 : 0;
    }
    EXPECT_GE(striped, 2);
    EXPECT_LE(striped, 6);
    for (Index b = 0; b < 3; ++b) {
        if (b != k) {
            EXPECT_EQ(r.noisy(0, 0, b), c(0, 0, b));
        }
    }
}

TEST(Noise, MixtureRecordsEveryCorruption) {
    NoiseSpec s;
    s.kind = NoiseKind::Mixture;
    s.seed = 15;
    const NoiseRealization r = apply_noise_detailed(clean_cube(16, 16, 31, 16), s);
    EXPECT_FALSE(r.stripe_bands.empty());
    EXPECT_FALSE(r.impulse_bands.empty());
    EXPECT_FALSE(r.deadline_bands.empty());
    EXPECT_GT(r.impulse_count, 0);
}

TEST(Noise, IsDeterministicPerSeed) {
    const Tensor3 c = clean_cube(8, 8, 8, 17);
    NoiseSpec s;
    s.kind = NoiseKind::Mixture;
    s.seed = 18;
    EXPECT_EQ(max_abs_diff(apply_noise(c, s), apply_noise(c, s)), 0.0);
    NoiseSpec t = s;
    t.seed = 19;
    EXPECT_GT(max_abs_diff(apply_noise(c, s), apply_noise(c, t)), 0.0);
}

TEST(Noise, RejectsOutOfRangeClean) {
    Tensor3 c = clean_cube(4, 4, 2, 20);
    c(1, 1, 1) = 1.5;
    EXPECT_THROW(apply_noise(c, NoiseSpec{}), RangeError);
    c(1, 1, 1) = -0.01;
    EXPECT_THROW(apply_noise(c, NoiseSpec{}), RangeError);
}

TEST(Noise, SpecValidation) {
    NoiseSpec s;
    s.sigma_min = 50;
    s.sigma_max = 20;
    EXPECT_THROW(s.validate(), InvalidArgument);
    s = NoiseSpec{};
    s.impulse_prob = 1.2;
    EXPECT_THROW(s.validate(), InvalidArgument);
    EXPECT_THROW(parse_noise_kind("pink"), InvalidArgument);
}

TEST(Noise, SpecKeyValueRoundTrip) {
    NoiseSpec s;
    s.kind = NoiseKind::Stripe;
    s.sigma = 12.5;
    s.band_fraction = 0.2;
    s.deadline_max_width = 2;
    s.seed = 12345678901ULL;
    const NoiseSpec t = NoiseSpec::from_key_values(s.to_key_values());
    EXPECT_EQ(t.to_key_values(), s.to_key_values());
    EXPECT_EQ(t.kind, NoiseKind::Stripe);
    EXPECT_EQ(t.seed, s.seed);
    for (NoiseKind k : {NoiseKind::NonIid, NoiseKind::Stripe, NoiseKind::Deadline, NoiseKind::Impulse,
                        NoiseKind::Mixture, NoiseKind::Gaussian, NoiseKind::Blind}) {
        EXPECT_EQ(parse_noise_kind(to_string(k)), k);
    }
    EXPECT_THROW(NoiseSpec::from_key_values({{"colour", "red"}}), InvalidArgument);
}

TEST(Scene, StaysInUnitRangeAndVaries) {
    const Tensor3 s = synthetic_scene(16, 12, 10, 21);
    double lo = 1.0, hi = 0.0;
    for (double v : s.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LE(hi, 1.0);
    EXPECT_GT(hi - lo, 0.1);
    EXPECT_EQ(max_abs_diff(s, synthetic_scene(16, 12, 10, 21)), 0.0);
}
