#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "dutrpca/autodiff.hpp"
#include "dutrpca/tensor3.hpp"

namespace dutrpca {

/// How the bottleneck Top-K ratio is obtained.
enum class TopKMode {
    Learned,  ///< sigmoid of a trainable logit
    Fixed,    ///< constant `fixed_ratio`
    Disabled, ///< no selection at all
};

struct SparseNetConfig {
    int base_channels = 8;
    int levels = 2;
    int attention_heads = 1;
    double topk_ratio_init = 0.5;
    TopKMode topk_mode = TopKMode::Learned;
    double fixed_ratio = 1.0;

    void validate() const;
    int bottleneck_channels() const { return base_channels << (levels - 1); }
};

/**
 * Encoder / spectral attention / Top-K / decoder network that maps a residual
 * cube to a sparse-component estimate of the same shape.
 *
 * Encoder: 3x3x3 conv to base_channels, then (levels - 1) stride-(2,2,1)
 * convs doubling the channels. The bottleneck runs one spectral attention
 * block (tokens = bands, embedding = channels) followed by Top-K channel
 * selection. The decoder mirrors the encoder with transposed convs and
 * additive skips, ending in a zero-initialized 1x1x1 conv.
 */
class SparseNet {
public:
    SparseNet(const SparseNetConfig& cfg, std::uint64_t seed, const std::string& prefix = "sparse");

    const SparseNetConfig& config() const { return cfg_; }
    ad::ParameterSet& weights() { return weights_; }
    const ad::ParameterSet& weights() const { return weights_; }

    /// Intermediate nodes of one forward pass, for inspection.
    struct Trace {
        ad::Var bottleneck; ///< after attention, before Top-K
        ad::Var selected;   ///< after Top-K
        ad::Var attention;
    };

    /// Residual node of shape (n1, n2, n3) -> node of the same shape.
    ad::Var forward(ad::Var residual, ad::Tape& tape, Trace* trace = nullptr);

    /// Current Top-K ratio value (1 when disabled).
    double topk_ratio() const;

private:
    std::string name(const std::string& local) const { return prefix_ + "." + local; }

    SparseNetConfig cfg_;
    std::string prefix_;
    ad::ParameterSet weights_;
};

/// Weights of one spectral attention block with embedding width `channels`.
struct AttentionWeights {
    ad::Var wq, wk, wv, wo, gamma, beta;
};

struct AttentionOutput {
    ad::Var out;
    /// (tokens batch, D, D) row-stochastic attention matrices.
    ad::Var attention;
};

/**
 * Single-head scaled dot-product attention over the last-but-one axis of
 * `tokens` (B, T, E), with a residual connection and layer normalization over E.
 */
AttentionOutput attention_block(ad::Var tokens, const AttentionWeights& w);

/// Throws ShapeMismatch unless n1 and n2 are divisible by 2^(levels-1).
void check_sparse_net_input(const Tensor3& residual, int levels);

} // namespace dutrpca
