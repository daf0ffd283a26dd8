#include <gtest/gtest.h>

#include <cmath>

#include "dutrpca/autodiff.hpp"
#include "dutrpca/errors.hpp"
#include "dutrpca/tsvd.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dutrpca;
using namespace dutrpca::ad;
using gradcheck::random_array;
using gradcheck::worst_error;

namespace {

constexpr double kTol = 1e-4;

// Values in +-[0.1, 1] so rectifier kinks and Top-K ties stay far away.
Array away_from_zero(std::vector<Index> shape, std::uint64_t seed) {
    Array a = random_array(std::move(shape), seed, 0.1, 1.0);
    Rng rng(seed + 1);
    for (double& v : a.data) {
        if (rng.bernoulli(0.5)) {
            v = -v;
        }
    }
    return a;
}

// Direct-definition 3-D convolution, zero padding.
Array naive_conv3d(const Array& x, const Array& w, const Array& b, const ConvGeometry& g) {
    const Index cin = x.dim(0), cout = w.dim(0);
    std::array<Index, 3> in{x.dim(1), x.dim(2), x.dim(3)}, out{};
    for (int d = 0; d < 3; ++d) {
        out[d] = (in[d] + 2 * g.pad[d] - g.kernel[d]) / g.stride[d] + 1;
    }
    Array y({cout, out[0], out[1], out[2]});
    for (Index o = 0; o < cout; ++o)
        for (Index i = 0; i < out[0]; ++i)
            for (Index j = 0; j < out[1]; ++j)
                for (Index k = 0; k < out[2]; ++k) {
                    double s = b[o];
                    for (Index c = 0; c < cin; ++c)
                        for (Index a = 0; a < g.kernel[0]; ++a)
                            for (Index bb = 0; bb < g.kernel[1]; ++bb)
                                for (Index cc = 0; cc < g.kernel[2]; ++cc) {
                                    const Index p = i * g.stride[0] - g.pad[0] + a;
                                    const Index q = j * g.stride[1] - g.pad[1] + bb;
                                    const Index r = k * g.stride[2] - g.pad[2] + cc;
                                    if (p < 0 || q < 0 || r < 0 || p >= in[0] || q >= in[1] || r >= in[2]) {
                                        continue;
                                    }
                                    const Index wi = (((o * cin + c) * g.kernel[0] + a) * g.kernel[1] + bb) *
                                                         g.kernel[2] + cc;
                                    const Index xi = ((c * in[0] + p) * in[1] + q) * in[2] + r;
                                    s += w[wi] * x[xi];
                                }
                    y[((o * out[0] + i) * out[1] + j) * out[2] + k] = s;
                }
    return y;
}

double dot(const Array& a, const Array& b) {
    double s = 0.0;
    for (Index n = 0; n < a.numel(); ++n) {
        s += a[n] * b[n];
    }
    return s;
}

} // namespace

TEST(Backward, SumGivesOnes) {
    Parameter p("p", random_array({2, 3}, 1));
    Tape tape;
    tape.backward(sum(tape.parameter(p)));
    ASSERT_TRUE(p.has_grad);
    for (double g : p.grad.data) {
        EXPECT_EQ(g, 1.0);
    }
}

TEST(Backward, HalfSquaredNormGivesValue) {
    Parameter p("p", random_array({3, 3}, 2));
    Tape tape;
    tape.backward(scale(sq_frobenius(tape.parameter(p)), 0.5));
    for (Index n = 0; n < p.value.numel(); ++n) {
        EXPECT_DOUBLE_EQ(p.grad[n], p.value[n]);
    }
}

TEST(Backward, ParameterGradientsAccumulateAcrossTapes) {
    Parameter p("p", random_array({4}, 3));
    for (int rep = 0; rep < 2; ++rep) {
        Tape tape;
        tape.backward(sum(tape.parameter(p)));
    }
    EXPECT_EQ(p.grad[0], 2.0);
    p.zero_grad();
    EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Backward, CompositeElementwiseMatchesFiniteDifferences) {
    auto build = [](Tape&, const std::vector<Var>& v) {
        return sigmoid(add(mul(v[0], v[1]), scale(leaky_relu(sub(v[0], v[1])), 3.0)));
    };
    const Array a = away_from_zero({3, 3}, 4);
    Array b = away_from_zero({3, 3}, 6);
    EXPECT_LT(worst_error(build, {a, b}), kTol);
}

TEST(Backward, RejectsNonScalarLoss) {
    Tape tape;
    Var x = tape.input(random_array({2, 2}, 5));
    EXPECT_THROW(tape.backward(x), NonScalarLoss);
}

TEST(Backward, IsBitwiseDeterministic) {
    Parameter w("w", random_array({2, 2, 3, 3, 3}, 7));
    Parameter b("b", random_array({2}, 8));
    const Array x = random_array({2, 4, 4, 3}, 9);
    std::vector<std::vector<double>> runs;
    for (int rep = 0; rep < 2; ++rep) {
        w.zero_grad();
        b.zero_grad();
        Tape tape;
        Var y = conv3d(tape.constant(x), tape.parameter(w), tape.parameter(b), ConvGeometry{});
        tape.backward(sq_frobenius(softmax(y, 0)));
        runs.push_back(w.grad.data);
    }
    EXPECT_EQ(runs[0], runs[1]);
}

TEST(Primitives, ElementwiseOps) {
    const Array a = away_from_zero({2, 3, 2}, 10), b = away_from_zero({2, 3, 2}, 11);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return add(v[0], v[1]); }, {a, b}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return sub(v[0], v[1]); }, {a, b}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return mul(v[0], v[1]); }, {a, b}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return scale(v[0], -1.7); }, {a}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return leaky_relu(v[0], 0.1); }, {a}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return sigmoid(v[0]); }, {a}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return scalar_mul(v[1], v[0]); }, {a, Array({1}, 0.7)}), kTol);
}

TEST(Primitives, Reductions) {
    const Array a = random_array({3, 2, 2}, 12);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return sum(v[0]); }, {a}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return mean(v[0]); }, {a}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return sq_frobenius(v[0]); }, {a}), kTol);
    Tape tape;
    EXPECT_NEAR(mean(tape.constant(a)).value()[0] * 12.0, sum(tape.constant(a)).value()[0], 1e-12);
}

TEST(Primitives, ReshapeAndPermute) {
    const Array a = random_array({2, 3, 4}, 13);
    Tape tape;
    Var p = permute(tape.constant(a), {2, 0, 1});
    ASSERT_EQ(p.value().shape, (std::vector<Index>{4, 2, 3}));
    EXPECT_EQ(p.value()[(3 * 2 + 1) * 3 + 2], a[(1 * 3 + 2) * 4 + 3]);
    EXPECT_THROW(reshape(tape.constant(a), {5, 5}), ShapeMismatch);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return reshape(v[0], {6, 4}); }, {a}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return permute(v[0], {1, 2, 0}); }, {a}), kTol);
}

TEST(Primitives, SoftmaxRowsAreStochastic) {
    const Array a = random_array({3, 4, 5}, 14, -3.0, 3.0);
    for (int axis = 0; axis < 3; ++axis) {
        Tape tape;
        const Array& s = softmax(tape.constant(a), axis).value();
        if (axis == 2) {
            for (Index r = 0; r < 12; ++r) {
                double t = 0.0;
                for (Index c = 0; c < 5; ++c) {
                    t += s[r * 5 + c];
                }
                EXPECT_NEAR(t, 1.0, 1e-12);
            }
        }
        EXPECT_LT(worst_error([axis](Tape&, const auto& v) { return softmax(v[0], axis); }, {a}), kTol);
    }
}

TEST(Primitives, LayerNorm) {
    const Array x = random_array({3, 4, 5}, 15);
    const Array gamma = random_array({5}, 16, 0.5, 1.5), beta = random_array({5}, 17);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return layer_norm(v[0], 2, v[1], v[2]); }, {x, gamma, beta}),
              kTol);
    const Array g0 = random_array({3}, 18, 0.5, 1.5), b0 = random_array({3}, 19);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return layer_norm(v[0], 0, v[1], v[2]); }, {x, g0, b0}), kTol);
    Tape tape;
    const Array& y = layer_norm(tape.constant(x), 2, tape.constant(Array({5}, 1.0)), tape.constant(Array({5}))).value();
    double m = 0.0;
    for (Index c = 0; c < 5; ++c) {
        m += y[c];
    }
    EXPECT_NEAR(m, 0.0, 1e-12);
}

TEST(Primitives, MatmulVariants) {
    Tape tape;
    const Array a = random_array({2, 3}, 20), b = random_array({3, 4}, 21);
    const Array& c = matmul(tape.constant(a), tape.constant(b)).value();
    EXPECT_NEAR(c[1 * 4 + 2], a[3] * b[2] + a[4] * b[6] + a[5] * b[10], 1e-15);
    EXPECT_THROW(matmul(tape.constant(a), tape.constant(a)), ShapeMismatch);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return matmul(v[0], v[1]); }, {a, b}), kTol);
    const Array ba = random_array({4, 2, 3}, 22), bb = random_array({4, 5, 3}, 23);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return matmul(v[0], v[1]); }, {ba, b}), kTol);
    EXPECT_LT(worst_error([](Tape&, const auto& v) { return matmul(v[0], v[1], true); }, {ba, bb}), kTol);
}

TEST(Primitives, Conv3dMatchesDirectDefinition) {
    const Array x = random_array({2, 4, 4, 3}, 24), w = random_array({3, 2, 3, 3, 3}, 25), b = random_array({3}, 26);
    for (const ConvGeometry& g : {ConvGeometry{}, ConvGeometry{{3, 3, 3}, {2, 2, 1}, {1, 1, 1}},
                                  ConvGeometry{{1, 1, 1}, {1, 1, 1}, {0, 0, 0}}}) {
        const Array wk = g.kernel[0] == 1 ? random_array({3, 2, 1, 1, 1}, 27) : w;
        Tape tape;
        const Array& y = conv3d(tape.constant(x), tape.constant(wk), tape.constant(b), g).value();
        const Array ref = naive_conv3d(x, wk, b, g);
        ASSERT_EQ(y.shape, ref.shape);
        EXPECT_LT(oracle::rel_diff(y, ref), 1e-13);
        EXPECT_LT(worst_error([g](Tape&, const auto& v) { return conv3d(v[0], v[1], v[2], g); }, {x, wk, b}), kTol);
    }
}

TEST(Primitives, ConvTransposeIsAdjointOfConv) {
    const ConvGeometry g{{3, 3, 3}, {2, 2, 1}, {1, 1, 1}};
    const Array x = random_array({2, 4, 4, 3}, 28), w = random_array({3, 2, 3, 3, 3}, 29);
    const Array y = random_array({3, 2, 2, 3}, 30);
    Tape tape;
    const Array fwd = conv3d(tape.constant(x), tape.constant(w), tape.constant(Array({3})), g).value();
    const Array adj = conv_transpose3d(tape.constant(y), tape.constant(w), tape.constant(Array({2})), g, {4, 4, 3}).value();
    ASSERT_EQ(adj.shape, x.shape);
    EXPECT_NEAR(dot(fwd, y), dot(x, adj), 1e-12);
    const Array b = random_array({2}, 31);
    EXPECT_LT(worst_error([g](Tape&, const auto& v) { return conv_transpose3d(v[0], v[1], v[2], g, {4, 4, 3}); },
                          {y, w, b}),
              kTol);
}

TEST(TsvdProjectNode, ForwardIsTruncatedProjection) {
    const Tensor3 t = oracle::random_tensor(5, 4, 3, 32);
    Tape tape;
    const Tensor3 y = to_tensor(tsvd_project(tape.constant(to_array(t)), 2).value());
    EXPECT_LT(max_abs_diff(y, truncated_tsvd_project(t, 2)), 1e-12);
}

TEST(TsvdProjectNode, InactiveTruncationHasIdentityGradient) {
    const Array x = to_array(oracle::random_tensor(4, 3, 5, 33));
    gradcheck::Probe probe([](Tape&, const auto& v) { return tsvd_project(v[0], 3); }, 34);
    const auto analytic = probe.analytic({x});
    const auto numeric = probe.numeric({x});
    EXPECT_LT(oracle::rel_diff(analytic[0], numeric[0]), 1e-5);
    // With full rank the cotangent passes through unchanged.
    Tape tape;
    Var in = tape.input(x);
    const Array w = random_array(x.shape, 35);
    tape.backward(sum(mul(tsvd_project(in, 3), tape.constant(w))));
    EXPECT_LT(oracle::rel_diff(in.grad(), w), 1e-12);
}

TEST(TsvdProjectNode, DiscardedDirectionGetsZeroGradient) {
    Tensor3 x(2, 2, 1);
    x(0, 0, 0) = 5.0;
    x(1, 1, 0) = 0.1;
    Tensor3 g(2, 2, 1);
    g(1, 1, 0) = 1.0;
    const Tensor3 out = tsvd_pseudo_gradient(x, 1, g);
    EXPECT_EQ(out.frobenius_norm(), 0.0);

    // Same structure spread over several bands through frontal slice 0.
    Tensor3 xb(3, 3, 4);
    const Eigen::Vector3d a(1.0, 2.0, 2.0), c(2.0, -2.0, 1.0);
    const Eigen::Vector3d b(2.0, 1.0, -2.0), d(1.0, 2.0, 2.0);
    Tensor3 gb(3, 3, 4);
    for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) {
            xb(i, j, 0) = 5.0 * a(i) * b(j) / 9.0 + 0.1 * c(i) * d(j) / 9.0;
            gb(i, j, 0) = c(i) * d(j) / 9.0;
        }
    }
    EXPECT_LT(tsvd_pseudo_gradient(xb, 1, gb).frobenius_norm(), 1e-14);
}

TEST(TsvdProjectNode, RetainedReconstructionPassesUnchanged) {
    Tensor3 x(2, 2, 1);
    x(0, 0, 0) = 5.0;
    x(1, 1, 0) = 0.1;
    const Tensor3 kept = truncated_tsvd_project(x, 1);
    EXPECT_LT(max_abs_diff(tsvd_pseudo_gradient(x, 1, kept), kept), 1e-14);

    const Tensor3 xr = oracle::random_tensor(5, 4, 6, 36);
    const Tensor3 kr = truncated_tsvd_project(xr, 1);
    EXPECT_LT(max_abs_diff(tsvd_pseudo_gradient(xr, 1, kr), kr), 1e-10);
}

TEST(TsvdProjectNode, CotangentMapIsALinearProjector) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const Tensor3 x = oracle::random_tensor(5, 4, 3 + seed, 40 + seed);
        const Tensor3 g1 = oracle::random_tensor(5, 4, 3 + seed, 50 + seed);
        const Tensor3 g2 = oracle::random_tensor(5, 4, 3 + seed, 60 + seed);
        const Tensor3 p1 = tsvd_pseudo_gradient(x, 2, g1);
        EXPECT_LT(max_abs_diff(tsvd_pseudo_gradient(x, 2, p1), p1), 1e-9);
        const Tensor3 lin = tsvd_pseudo_gradient(x, 2, g1 * 2.0 - g2);
        EXPECT_LT(max_abs_diff(lin, p1 * 2.0 - tsvd_pseudo_gradient(x, 2, g2)), 1e-12);
    }
}

TEST(TsvdProjectNode, BackwardUsesPseudoGradient) {
    const Tensor3 x = oracle::random_tensor(4, 4, 3, 70);
    const Tensor3 w = oracle::random_tensor(4, 4, 3, 71);
    Tape tape;
    Var in = tape.input(to_array(x));
    tape.backward(sum(mul(tsvd_project(in, 1), tape.constant(to_array(w)))));
    EXPECT_LT(max_abs_diff(to_tensor(in.grad()), tsvd_pseudo_gradient(x, 1, w)), 1e-14);
}

TEST(TopK, HandCase) {
    Tape tape;
    Var x = tape.input(Array({4, 1, 1, 1}, std::vector<double>{3.0, -1.0, 0.5, -2.0}));
    Var ratio = tape.input(Array({1}, 0.5));
    Var y = topk_channels(x, ratio);
    EXPECT_EQ(y.value().data, (std::vector<double>{3.0, 0.0, 0.0, -2.0}));
    const Array g({4, 1, 1, 1}, std::vector<double>{0.3, -0.7, 1.1, 0.2});
    tape.backward(sum(mul(y, tape.constant(g))));
    EXPECT_EQ(x.grad().data, (std::vector<double>{0.3, 0.0, 0.0, 0.2}));
    // Boundary channel is the first excluded one by rank: value -1, cotangent -0.7.
    EXPECT_DOUBLE_EQ(ratio.grad()[0], 4.0 * (-0.7) * (-1.0));
}

TEST(TopK, FullRatioIsIdentity) {
    const Array a = away_from_zero({3, 2, 2, 2}, 72);
    Tape tape;
    Var x = tape.input(a);
    Var ratio = tape.input(Array({1}, 1.0));
    Var y = topk_channels(x, ratio);
    EXPECT_EQ(y.value().data, a.data);
    const Array g = random_array(a.shape, 73);
    tape.backward(sum(mul(y, tape.constant(g))));
    EXPECT_EQ(x.grad().data, g.data);
    EXPECT_EQ(ratio.grad()[0], 0.0);
}

TEST(TopK, MaskedEntriesGetExactlyZero) {
    const Array a = away_from_zero({8, 2, 2, 3}, 74);
    for (double ratio : {0.2, 0.5, 0.7}) {
        Tape tape;
        Var x = tape.input(a);
        Var y = topk_channels(x, tape.constant(Array({1}, ratio)));
        tape.backward(sum(mul(y, tape.constant(random_array(a.shape, 75)))));
        const Index keep = topk_count(ratio, 8);
        for (Index pos = 0; pos < 12; ++pos) {
            Index nonzero = 0;
            for (Index c = 0; c < 8; ++c) {
                const Index n = c * 12 + pos;
                if (y.value()[n] == 0.0) {
                    EXPECT_EQ(x.grad()[n], 0.0);
                } else {
                    ++nonzero;
                }
            }
            EXPECT_EQ(nonzero, keep);
        }
    }
    const auto build = [](Tape& t, const std::vector<Var>& v) { return topk_channels(v[0], t.constant(Array({1}, 0.5))); };
    EXPECT_LT(worst_error(build, {a}), kTol);
}

TEST(TopK, TiesFavorLowerChannel) {
    Tape tape;
    Var x = tape.constant(Array({4, 1, 1, 1}, std::vector<double>{1.0, -1.0, 1.0, 0.5}));
    EXPECT_EQ(topk_channels(x, tape.constant(Array({1}, 0.5))).value().data,
              (std::vector<double>{1.0, -1.0, 0.0, 0.0}));
}

TEST(TopK, CountAndEmptySelection) {
    EXPECT_EQ(topk_count(0.5, 8), 4);
    EXPECT_EQ(topk_count(0.51, 8), 5);
    EXPECT_EQ(topk_count(0.01, 8), 1);
    EXPECT_THROW(topk_count(0.0, 8), EmptySelection);
    Tape tape;
    EXPECT_THROW(topk_channels(tape.constant(Array({4, 1, 1, 1})), tape.constant(Array({1}, 0.0))), EmptySelection);
}

TEST(Adam, ZeroGradientLeavesParameter) {
    Parameter p("p", Array({1}, 0.25));
    p.zero_grad();
    Adam adam;
    adam.step({&p});
    EXPECT_EQ(p.value[0], 0.25);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    for (double g : {3.0, -0.02}) {
        Parameter p("p", Array({1}, 0.0));
        p.zero_grad();
        p.grad[0] = g;
        Adam adam(AdamOptions{1e-3});
        adam.step({&p});
        EXPECT_NEAR(p.value[0], -1e-3 * (g > 0 ? 1.0 : -1.0), 1e-9);
    }
}

TEST(Adam, MatchesReferenceOverSteps) {
    Parameter p("p", random_array({5}, 76));
    oracle::AdamRef ref;
    ref.lr = 0.01;
    std::vector<double> q = p.value.data;
    const Array g = random_array({5}, 77);
    Adam adam(AdamOptions{0.01});
    for (int step = 0; step < 2; ++step) {
        p.zero_grad();
        p.grad = g;
        adam.step({&p});
        ref.step(q, g.data);
    }
    for (Index n = 0; n < 5; ++n) {
        EXPECT_NEAR(p.value[n], q[static_cast<std::size_t>(n)], 1e-12);
    }
    EXPECT_EQ(adam.steps(), 2);
}

TEST(Adam, RequiresGradients) {
    Parameter p("p", Array({2}, 1.0));
    EXPECT_THROW(adam_step({&p}, 1, AdamOptions{}), MissingGrad);
}
