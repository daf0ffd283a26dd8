#include "dutrpca/sparse_net.hpp"

#include <cmath>
#include <vector>

#include "dutrpca/errors.hpp"
#include "dutrpca/rng.hpp"

namespace dutrpca {

using ad::Array;
using ad::Var;

void SparseNetConfig::validate() const {
    if (base_channels < 1) {
        throw InvalidArgument("base_channels must be >= 1");
    }
    if (levels < 1 || levels > 6) {
        throw InvalidArgument("levels must be in [1, 6]");
    }
    if (attention_heads != 1) {
        throw InvalidArgument("only single-head attention is supported");
    }
    if (topk_mode == TopKMode::Learned &&
        !(topk_ratio_init > 1.0 / bottleneck_channels() && topk_ratio_init <= 1.0)) {
        throw InvalidArgument("topk_ratio_init must lie in (1/C, 1]");
    }
    if (topk_mode == TopKMode::Fixed && !(fixed_ratio > 0.0 && fixed_ratio <= 1.0)) {
        throw InvalidArgument("fixed_ratio must lie in (0, 1]");
    }
}

void check_sparse_net_input(const Tensor3& residual, int levels) {
    const Index factor = Index{1} << (levels - 1);
    if (residual.n1() % factor != 0 || residual.n2() % factor != 0) {
        throw ShapeMismatch("spatial dims " + std::to_string(residual.n1()) + "x" + std::to_string(residual.n2()) +
                            " must be divisible by " + std::to_string(factor));
    }
}

namespace {

const ad::ConvGeometry kSame{{3, 3, 3}, {1, 1, 1}, {1, 1, 1}};
const ad::ConvGeometry kDown{{3, 3, 3}, {2, 2, 1}, {1, 1, 1}};
const ad::ConvGeometry kPoint{{1, 1, 1}, {1, 1, 1}, {0, 0, 0}};

Array uniform_array(std::vector<Index> shape, double bound, Rng& rng) {
    Array a(std::move(shape));
    for (double& v : a.data) {
        v = rng.uniform(-bound, bound);
    }
    return a;
}

Array conv_weight(Index out, Index in, Index k, Rng& rng) {
    const double fan_in = static_cast<double>(in * k * k * k);
    return uniform_array({out, in, k, k, k}, 1.0 / std::sqrt(fan_in), rng);
}

Array conv_transpose_weight(Index in, Index out, Index k, Rng& rng) {
    const double fan_in = static_cast<double>(out * k * k * k);
    return uniform_array({in, out, k, k, k}, 1.0 / std::sqrt(fan_in), rng);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

} // namespace

SparseNet::SparseNet(const SparseNetConfig& cfg, std::uint64_t seed, const std::string& prefix)
    : cfg_(cfg), prefix_(prefix) {
    cfg_.validate();
    Rng rng(seed);
    const Index c0 = cfg_.base_channels;
    weights_.add(name("enc0.w"), conv_weight(c0, 1, 3, rng));
    weights_.add(name("enc0.b"), Array({c0}));
    for (int l = 1; l < cfg_.levels; ++l) {
        const Index cin = c0 << (l - 1);
        weights_.add(name("down" + std::to_string(l) + ".w"), conv_weight(2 * cin, cin, 3, rng));
        weights_.add(name("down" + std::to_string(l) + ".b"), Array({2 * cin}));
    }
    const Index e = cfg_.bottleneck_channels();
    const double att_bound = 1.0 / std::sqrt(static_cast<double>(e));
    for (const char* m : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) {
        weights_.add(name(m), uniform_array({e, e}, att_bound, rng));
    }
    weights_.add(name("attn.gamma"), Array({e}, 1.0));
    weights_.add(name("attn.beta"), Array({e}));
    if (cfg_.topk_mode == TopKMode::Learned) {
        const double init = std::min(cfg_.topk_ratio_init, 1.0 - 1e-6);
        weights_.add(name("topk.logit"), Array({1}, logit(init)));
    }
    for (int l = cfg_.levels - 1; l >= 1; --l) {
        const Index cout = c0 << (l - 1);
        weights_.add(name("up" + std::to_string(l) + ".w"), conv_transpose_weight(2 * cout, cout, 3, rng));
        weights_.add(name("up" + std::to_string(l) + ".b"), Array({cout}));
    }
    weights_.add(name("out.w"), Array({1, c0, 1, 1, 1}));
    weights_.add(name("out.b"), Array({1}));
}

double SparseNet::topk_ratio() const {
    switch (cfg_.topk_mode) {
    case TopKMode::Learned:
        return 1.0 / (1.0 + std::exp(-weights_.get(name("topk.logit")).value[0]));
    case TopKMode::Fixed:
        return cfg_.fixed_ratio;
    case TopKMode::Disabled:
        break;
    }
    return 1.0;
}

AttentionOutput attention_block(Var tokens, const AttentionWeights& w) {
    const Array& x = tokens.value();
    if (x.ndim() != 3 || x.dim(1) < 1) {
        throw ShapeMismatch("attention_block: expected (B, T, E) with T >= 1");
    }
    const double inv_sqrt_e = 1.0 / std::sqrt(static_cast<double>(x.dim(2)));
    Var q = ad::matmul(tokens, w.wq);
    Var k = ad::matmul(tokens, w.wk);
    Var v = ad::matmul(tokens, w.wv);
    Var logits = ad::scale(ad::matmul(q, k, /*transpose_b=*/true), inv_sqrt_e);
    Var attention = ad::softmax(logits, 2);
    Var mixed = ad::matmul(ad::matmul(attention, v), w.wo);
    Var out = ad::layer_norm(ad::add(tokens, mixed), 2, w.gamma, w.beta);
    return {out, attention};
}

Var SparseNet::forward(Var residual, ad::Tape& tape, Trace* trace) {
    const Array& rv = residual.value();
    if (rv.ndim() != 3) {
        throw ShapeMismatch("sparse net input must be (n1, n2, n3), got " + ad::shape_string(rv.shape));
    }
    const Index n1 = rv.dim(0), n2 = rv.dim(1), n3 = rv.dim(2);
    check_sparse_net_input(Tensor3(n1, n2, n3), cfg_.levels);

    auto param = [&](const std::string& local) { return tape.parameter(weights_.get(name(local))); };
    auto act = [](Var v) { return ad::leaky_relu(v, 0.1); };

    std::vector<Var> skips;
    Var h = act(ad::conv3d(ad::reshape(residual, {1, n1, n2, n3}), param("enc0.w"), param("enc0.b"), kSame));
    for (int l = 1; l < cfg_.levels; ++l) {
        skips.push_back(h);
        const std::string tag = "down" + std::to_string(l);
        h = act(ad::conv3d(h, param(tag + ".w"), param(tag + ".b"), kDown));
    }

    // Spectral attention: one token per band at every spatial position.
    const Index e = h.value().dim(0), bh = h.value().dim(1), bw = h.value().dim(2);
    Var tokens = ad::reshape(ad::permute(h, {1, 2, 3, 0}), {bh * bw, n3, e});
    const AttentionWeights aw{param("attn.wq"), param("attn.wk"), param("attn.wv"),
                              param("attn.wo"), param("attn.gamma"), param("attn.beta")};
    const AttentionOutput att = attention_block(tokens, aw);
    Var bottleneck = ad::permute(ad::reshape(att.out, {bh, bw, n3, e}), {3, 0, 1, 2});

    Var selected = bottleneck;
    switch (cfg_.topk_mode) {
    case TopKMode::Learned:
        selected = ad::topk_channels(bottleneck, ad::sigmoid(param("topk.logit")));
        break;
    case TopKMode::Fixed:
        selected = ad::topk_channels(bottleneck, tape.constant(Array({1}, cfg_.fixed_ratio)));
        break;
    case TopKMode::Disabled:
        break;
    }
    if (trace != nullptr) {
        trace->bottleneck = bottleneck;
        trace->selected = selected;
        trace->attention = att.attention;
    }

    h = selected;
    for (int l = cfg_.levels - 1; l >= 1; --l) {
        const std::string tag = "up" + std::to_string(l);
        const Var& skip = skips[static_cast<std::size_t>(l - 1)];
        const auto& ss = skip.value().shape;
        Var up = ad::conv_transpose3d(h, param(tag + ".w"), param(tag + ".b"), kDown, {ss[1], ss[2], ss[3]});
        h = act(ad::add(up, skip));
    }
    Var out = ad::conv3d(h, param("out.w"), param("out.b"), kPoint);
    return ad::reshape(out, {n1, n2, n3});
}

} // namespace dutrpca
