#include "dutrpca/unfolding.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "dutrpca/errors.hpp"
#include "dutrpca/metrics.hpp"
#include "dutrpca/rng.hpp"

namespace dutrpca {

using ad::Array;
using ad::Var;

void UnfoldingConfig::validate() const {
    if (stages < 1) {
        throw InvalidArgument("stages must be >= 1");
    }
    if (rank < 0) {
        throw InvalidArgument("rank must be >= 0");
    }
    sparse.validate();
}

Index default_rank(Index n1, Index n2) { return (std::min(n1, n2) + 2) / 3; }

StageParams::StageParams(const std::string& prefix, const UnfoldingConfig& cfg, Index rank, std::uint64_t seed)
    : prefix_(prefix), rank_(rank), sparse_(cfg.sparse, seed, prefix + ".sparse") {
    scalars_.add(prefix_ + ".r_L", Array({1}, cfg.residual_weight_init));
    scalars_.add(prefix_ + ".r_S", Array({1}, cfg.residual_weight_init));
}

std::vector<ad::Parameter*> StageParams::parameters() {
    std::vector<ad::Parameter*> out = scalars_.all();
    for (ad::Parameter* p : sparse_.weights().all()) {
        out.push_back(p);
    }
    return out;
}

UnfoldingNet::UnfoldingNet(const UnfoldingConfig& cfg, Index rank, std::uint64_t seed) : cfg_(cfg), rank_(rank) {
    cfg_.validate();
    if (rank_ < 1) {
        throw InvalidArgument("UnfoldingNet: rank must be >= 1");
    }
    first_ = std::make_unique<StageParams>("stage0", cfg_, rank_, seed);
    shared_ = std::make_unique<StageParams>("shared", cfg_, rank_, seed + 1);
}

std::vector<ad::Parameter*> UnfoldingNet::trainable_parameters() {
    std::vector<ad::Parameter*> out = first_->parameters();
    if (cfg_.stages >= 2) {
        for (ad::Parameter* p : shared_->parameters()) {
            out.push_back(p);
        }
    }
    return out;
}

std::vector<ad::Parameter*> UnfoldingNet::all_parameters() {
    std::vector<ad::Parameter*> out = first_->parameters();
    for (ad::Parameter* p : shared_->parameters()) {
        out.push_back(p);
    }
    return out;
}

Index UnfoldingNet::trainable_scalar_count() {
    Index n = 0;
    for (const ad::Parameter* p : trainable_parameters()) {
        n += p->value.numel();
    }
    return n;
}

Var low_rank_update(Var x, Var s_prev, StageParams& stage, ad::Tape& tape, bool use_tsvd) {
    Var target = ad::sub(x, s_prev);
    Var projected = use_tsvd ? ad::tsvd_project(target, stage.rank()) : target;
    Var correction = ad::sub(x, projected);
    return ad::sub(x, ad::scalar_mul(tape.parameter(stage.r_L()), correction));
}

Var sparse_update(Var x, Var l_new, StageParams& stage, ad::Tape& tape) {
    Var refined = stage.sparse().forward(ad::sub(x, l_new), tape);
    Var correction = ad::sub(x, refined);
    return ad::sub(x, ad::scalar_mul(tape.parameter(stage.r_S()), correction));
}

std::vector<Var> forward(UnfoldingNet& net, const Tensor3& y, ad::Tape& tape, ForwardTrace* trace) {
    if (!y.all_finite()) {
        throw NonFinite("forward: input contains non-finite entries");
    }
    if (net.rank() > std::min(y.n1(), y.n2())) {
        throw InvalidArgument("forward: rank exceeds min(n1, n2) of the input");
    }
    check_sparse_net_input(y, net.config().sparse.levels);
    Var x = tape.constant(ad::to_array(y));
    Var s = tape.constant(Array(x.value().shape));
    std::vector<Var> outputs;
    for (int k = 0; k < net.stages(); ++k) {
        StageParams& stage = net.stage(k);
        Var l = low_rank_update(x, s, stage, tape, net.config().use_tsvd);
        s = sparse_update(x, l, stage, tape);
        outputs.push_back(l);
        if (trace != nullptr) {
            trace->low_rank.push_back(l);
            trace->sparse.push_back(s);
        }
    }
    return outputs;
}

Var stage_loss(const std::vector<Var>& outputs, const Tensor3& clean, ad::Tape& tape) {
    if (outputs.empty()) {
        throw InvalidArgument("stage_loss: no stage outputs");
    }
    Var target = tape.constant(ad::to_array(clean));
    Var total;
    for (const Var& out : outputs) {
        if (!out.value().same_shape(target.value())) {
            throw ShapeMismatch("stage_loss: output " + ad::shape_string(out.value().shape) + " vs clean " +
                                ad::shape_string(target.value().shape));
        }
        Var term = ad::sq_frobenius(ad::sub(target, out));
        total = total.valid() ? ad::add(total, term) : term;
    }
    return total;
}

Tensor3 denoise(UnfoldingNet& net, const Tensor3& y) {
    ad::Tape tape;
    const std::vector<Var> outputs = forward(net, y, tape);
    return ad::to_tensor(outputs.back().value());
}

void TrainingLog::write_csv(std::ostream& os) const {
    os << "step,loss,lr,val_psnr\r\n";
    const auto old = os.precision(17);
    for (const auto& r : rows) {
        os << r.step << ',' << r.loss << ',' << r.lr << ',';
        if (!std::isnan(r.val_psnr)) {
            os << r.val_psnr;
        }
        os << "\r\n";
    }
    os.precision(old);
}

double TrainingLog::mean_loss(long first, long last) const {
    double s = 0.0;
    long n = 0;
    for (const auto& r : rows) {
        if (r.step >= first && r.step <= last) {
            s += r.loss;
            ++n;
        }
    }
    if (n == 0) {
        throw InvalidArgument("mean_loss: empty window");
    }
    return s / static_cast<double>(n);
}

double evaluate_psnr(UnfoldingNet& net, const std::vector<TrainingSample>& samples) {
    if (samples.empty()) {
        throw InvalidArgument("evaluate_psnr: no samples");
    }
    double total = 0.0;
    for (const auto& s : samples) {
        total += psnr(s.clean, denoise(net, s.noisy));
    }
    return total / static_cast<double>(samples.size());
}

TrainingLog train(UnfoldingNet& net, const std::vector<TrainingSample>& data, const TrainConfig& cfg,
                  const std::vector<TrainingSample>& validation) {
    if (data.empty()) {
        throw InvalidArgument("train: dataset is empty");
    }
    if (cfg.batch < 1 || cfg.epochs < 1 || !(cfg.lr >= 0.0)) {
        throw InvalidArgument("train: batch and epochs must be >= 1, lr >= 0");
    }
    for (const auto& s : data) {
        if (!(s.noisy.shape() == s.clean.shape()) || !(s.noisy.shape() == data.front().noisy.shape())) {
            throw DataShapeMismatch("training samples must share one shape with matching noisy/clean pairs");
        }
    }

    std::vector<ad::Parameter*> params = net.trainable_parameters();
    ad::Adam adam(ad::AdamOptions{cfg.lr});
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    TrainingLog log;
    long step = 0;
    const double inv_batch = 1.0 / static_cast<double>(cfg.batch);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
        }
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                break;
            }
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            for (ad::Parameter* p : params) {
                p->zero_grad();
            }
            double batch_loss = 0.0;
            for (std::size_t n = start; n < end; ++n) {
                const TrainingSample& sample = data[order[n]];
                ad::Tape tape;
                Var loss = ad::scale(stage_loss(forward(net, sample.noisy, tape), sample.clean, tape), inv_batch);
                tape.backward(loss);
                batch_loss += loss.value()[0];
            }
            // Short final batches are rescaled to the mean over their own size.
            const double fill = static_cast<double>(cfg.batch) / static_cast<double>(end - start);
            if (fill != 1.0) {
                for (ad::Parameter* p : params) {
                    for (double& g : p->grad.data) {
                        g *= fill;
                    }
                }
                batch_loss *= fill;
            }
            ++step;
            double lr = cfg.lr;
            for (long m : cfg.lr_milestones) {
                if (step > m) {
                    lr *= cfg.lr_gamma;
                }
            }
            adam.options().lr = lr;
            adam.step(params);
            log.rows.push_back({step, batch_loss, lr, std::numeric_limits<double>::quiet_NaN()});
        }
        if (!validation.empty() && !log.rows.empty()) {
            log.rows.back().val_psnr = evaluate_psnr(net, validation);
        }
        if (cfg.max_steps > 0 && step >= cfg.max_steps) {
            break;
        }
    }
    return log;
}

} // namespace dutrpca
