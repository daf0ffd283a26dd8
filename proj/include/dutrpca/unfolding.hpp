#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

#include "dutrpca/autodiff.hpp"
#include "dutrpca/sparse_net.hpp"
#include "dutrpca/tensor3.hpp"

namespace dutrpca {

struct UnfoldingConfig {
    int stages = 4;
    /// Truncation rank; 0 selects default_rank() of the training patch.
    Index rank = 0;
    /// When false the low-rank branch uses the identity instead of the t-SVD projection.
    bool use_tsvd = true;
    SparseNetConfig sparse;
    double residual_weight_init = 1.0;

    void validate() const;
};

/// ceil(min(n1, n2) / 3)
Index default_rank(Index n1, Index n2);

/// Parameters of one unfolding stage.
class StageParams {
public:
    StageParams(const std::string& prefix, const UnfoldingConfig& cfg, Index rank, std::uint64_t seed);

    ad::Parameter& r_L() { return scalars_.get(prefix_ + ".r_L"); }
    ad::Parameter& r_S() { return scalars_.get(prefix_ + ".r_S"); }
    Index rank() const { return rank_; }
    SparseNet& sparse() { return sparse_; }

    std::vector<ad::Parameter*> parameters();
    Index scalar_count() const { return scalars_.scalar_count() + sparse_.weights().scalar_count(); }

private:
    std::string prefix_;
    Index rank_;
    ad::ParameterSet scalars_;
    SparseNet sparse_;
};

/**
 * K-stage network with "1+N" sharing: stage 1 owns its parameters, stages
 * 2..K all reference one shared StageParams.
 */
class UnfoldingNet {
public:
    UnfoldingNet(const UnfoldingConfig& cfg, Index rank, std::uint64_t seed);

    const UnfoldingConfig& config() const { return cfg_; }
    int stages() const { return cfg_.stages; }
    Index rank() const { return rank_; }

    /// Zero-based stage index; every k >= 1 returns the shared parameters.
    StageParams& stage(int k) { return k == 0 ? *first_ : *shared_; }

    /// Parameters reachable from the loss: stage 1 plus the shared set when K >= 2.
    std::vector<ad::Parameter*> trainable_parameters();
    /// Every parameter, including the shared set when K == 1 (checkpoint contents).
    std::vector<ad::Parameter*> all_parameters();
    Index trainable_scalar_count();

private:
    UnfoldingConfig cfg_;
    Index rank_;
    std::unique_ptr<StageParams> first_;
    std::unique_ptr<StageParams> shared_;
};

/// L = x - r_L * (x - P_r(x - s_prev))
ad::Var low_rank_update(ad::Var x, ad::Var s_prev, StageParams& stage, ad::Tape& tape, bool use_tsvd = true);

/// S = x - r_S * (x - N(x - l_new)), N the stage's sparse network.
ad::Var sparse_update(ad::Var x, ad::Var l_new, StageParams& stage, ad::Tape& tape);

struct ForwardTrace {
    std::vector<ad::Var> low_rank;
    std::vector<ad::Var> sparse;
};

/// Stage estimates X^1..X^K (each the stage's low-rank output), with y held fixed as X.
std::vector<ad::Var> forward(UnfoldingNet& net, const Tensor3& y, ad::Tape& tape, ForwardTrace* trace = nullptr);

/// sum_k ||clean - X^k||_F^2
ad::Var stage_loss(const std::vector<ad::Var>& outputs, const Tensor3& clean, ad::Tape& tape);

/// Final-stage estimate.
Tensor3 denoise(UnfoldingNet& net, const Tensor3& y);

struct TrainingSample {
    Tensor3 noisy;
    Tensor3 clean;
};

struct TrainConfig {
    int epochs = 1;
    int batch = 4;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    /// Stop after this many optimizer steps; 0 means no cap.
    long max_steps = 0;
    /// Multi-step decay: lr *= lr_gamma at each listed step.
    std::vector<long> lr_milestones;
    double lr_gamma = 0.1;
};

struct TrainLogRow {
    long step = 0;
    double loss = 0.0;
    double lr = 0.0;
    /// Mean validation PSNR, evaluated at epoch ends; NaN elsewhere.
    double val_psnr = std::numeric_limits<double>::quiet_NaN();
};

struct TrainingLog {
    std::vector<TrainLogRow> rows;

    /// CSV with header step,loss,lr,val_psnr.
    void write_csv(std::ostream& os) const;
    /// Mean loss over 1-based steps [first, last].
    double mean_loss(long first, long last) const;
};

/// Mean PSNR of the final-stage estimate over `samples`.
double evaluate_psnr(UnfoldingNet& net, const std::vector<TrainingSample>& samples);

/// Mini-batch Adam on the stage-wise loss (mean over the batch). Deterministic given cfg.seed.
TrainingLog train(UnfoldingNet& net, const std::vector<TrainingSample>& data, const TrainConfig& cfg,
                  const std::vector<TrainingSample>& validation = {});

} // namespace dutrpca
