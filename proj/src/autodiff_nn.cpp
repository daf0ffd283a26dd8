#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "dutrpca/autodiff.hpp"
#include "dutrpca/errors.hpp"
#include "dutrpca/tsvd.hpp"

namespace dutrpca::ad {

namespace {

// Convolution bookkeeping shared by conv3d and its transpose. The "small"
// side has positions o and the "big" side positions o*stride - pad + k.
// Weights are laid out (small channels, big channels, kh, kw, kd).
struct ConvPlan {
    Index small_channels = 0;
    Index big_channels = 0;
    std::array<Index, 3> small{};
    std::array<Index, 3> big{};
    Index taps = 0;
    Index big_step = 1;

    struct Run {
        Index tap;
        Index small_offset;
        Index big_offset;
        Index count;
    };
    std::vector<Run> runs;

    Index small_volume() const { return small[0] * small[1] * small[2]; }
    Index big_volume() const { return big[0] * big[1] * big[2]; }
};

struct AxisRange {
    Index lo;
    Index hi;
};

AxisRange valid_range(Index small, Index big, Index stride, Index pad, Index k) {
    // smallest o with o*stride - pad + k >= 0
    Index lo = 0;
    const Index need = pad - k;
    if (need > 0) {
        lo = (need + stride - 1) / stride;
    }
    // largest o with o*stride - pad + k <= big - 1
    const Index top = big - 1 + pad - k;
    Index hi = top < 0 ? 0 : top / stride + 1;
    hi = std::min(hi, small);
    return {lo, std::max(lo, hi)};
}

ConvPlan make_plan(Index small_channels, Index big_channels, std::array<Index, 3> small, std::array<Index, 3> big,
                   const ConvGeometry& g) {
    ConvPlan p;
    p.small_channels = small_channels;
    p.big_channels = big_channels;
    p.small = small;
    p.big = big;
    p.taps = g.kernel[0] * g.kernel[1] * g.kernel[2];
    p.big_step = g.stride[2];
    for (Index kh = 0; kh < g.kernel[0]; ++kh) {
        const AxisRange rh = valid_range(small[0], big[0], g.stride[0], g.pad[0], kh);
        for (Index kw = 0; kw < g.kernel[1]; ++kw) {
            const AxisRange rw = valid_range(small[1], big[1], g.stride[1], g.pad[1], kw);
            for (Index kd = 0; kd < g.kernel[2]; ++kd) {
                const AxisRange rd = valid_range(small[2], big[2], g.stride[2], g.pad[2], kd);
                if (rd.hi <= rd.lo) {
                    continue;
                }
                const Index tap = (kh * g.kernel[1] + kw) * g.kernel[2] + kd;
                for (Index oh = rh.lo; oh < rh.hi; ++oh) {
                    const Index bh = oh * g.stride[0] - g.pad[0] + kh;
                    for (Index ow = rw.lo; ow < rw.hi; ++ow) {
                        const Index bw = ow * g.stride[1] - g.pad[1] + kw;
                        const Index bd = rd.lo * g.stride[2] - g.pad[2] + kd;
                        p.runs.push_back({tap, (oh * small[1] + ow) * small[2] + rd.lo,
                                          (bh * big[1] + bw) * big[2] + bd, rd.hi - rd.lo});
                    }
                }
            }
        }
    }
    return p;
}

// small[cs] += sum_cb w[cs, cb] (*) big[cb]
void conv_gather(const ConvPlan& p, const double* big, const double* w, double* small) {
    const Index step = p.big_step;
    for (Index cs = 0; cs < p.small_channels; ++cs) {
        double* sp = small + cs * p.small_volume();
        for (Index cb = 0; cb < p.big_channels; ++cb) {
            const double* bp = big + cb * p.big_volume();
            const double* wp = w + (cs * p.big_channels + cb) * p.taps;
            for (const auto& r : p.runs) {
                const double wv = wp[r.tap];
                double* so = sp + r.small_offset;
                const double* bo = bp + r.big_offset;
                for (Index t = 0; t < r.count; ++t) {
                    so[t] += wv * bo[t * step];
                }
            }
        }
    }
}

// big[cb] += sum_cs w[cs, cb] (*)^T small[cs]
void conv_scatter(const ConvPlan& p, const double* small, const double* w, double* big) {
    const Index step = p.big_step;
    for (Index cs = 0; cs < p.small_channels; ++cs) {
        const double* sp = small + cs * p.small_volume();
        for (Index cb = 0; cb < p.big_channels; ++cb) {
            double* bp = big + cb * p.big_volume();
            const double* wp = w + (cs * p.big_channels + cb) * p.taps;
            for (const auto& r : p.runs) {
                const double wv = wp[r.tap];
                const double* so = sp + r.small_offset;
                double* bo = bp + r.big_offset;
                for (Index t = 0; t < r.count; ++t) {
                    bo[t * step] += wv * so[t];
                }
            }
        }
    }
}

// gw[cs, cb, tap] += sum_o small[cs, o] * big[cb, o*s - p + tap]
void conv_weight_grad(const ConvPlan& p, const double* small, const double* big, double* gw) {
    const Index step = p.big_step;
    for (Index cs = 0; cs < p.small_channels; ++cs) {
        const double* sp = small + cs * p.small_volume();
        for (Index cb = 0; cb < p.big_channels; ++cb) {
            const double* bp = big + cb * p.big_volume();
            double* gp = gw + (cs * p.big_channels + cb) * p.taps;
            for (const auto& r : p.runs) {
                const double* so = sp + r.small_offset;
                const double* bo = bp + r.big_offset;
                double acc = 0.0;
                for (Index t = 0; t < r.count; ++t) {
                    acc += so[t] * bo[t * step];
                }
                gp[r.tap] += acc;
            }
        }
    }
}

void add_bias(Array& out, const Array& bias) {
    const Index channels = out.dim(0);
    const Index volume = out.numel() / channels;
    for (Index c = 0; c < channels; ++c) {
        for (Index n = 0; n < volume; ++n) {
            out[c * volume + n] += bias[c];
        }
    }
}

Array bias_grad(const Array& g) {
    const Index channels = g.dim(0);
    const Index volume = g.numel() / channels;
    Array gb({channels});
    for (Index c = 0; c < channels; ++c) {
        double s = 0.0;
        for (Index n = 0; n < volume; ++n) {
            s += g[c * volume + n];
        }
        gb[c] = s;
    }
    return gb;
}

void check_conv_operands(const Array& x, const Array& w, const Array& b, const ConvGeometry& g, Index w_in_axis,
                         const char* op) {
    if (x.ndim() != 4 || w.ndim() != 5) {
        throw ShapeMismatch(std::string(op) + ": expected x (C,H,W,D) and 5-D weight");
    }
    if (w.dim(static_cast<int>(w_in_axis)) != x.dim(0)) {
        throw ShapeMismatch(std::string(op) + ": weight " + shape_string(w.shape) + " does not match input channels " +
                            std::to_string(x.dim(0)));
    }
    for (int a = 0; a < 3; ++a) {
        if (w.dim(2 + a) != g.kernel[static_cast<std::size_t>(a)] || g.stride[static_cast<std::size_t>(a)] < 1 ||
            g.pad[static_cast<std::size_t>(a)] < 0) {
            throw ShapeMismatch(std::string(op) + ": kernel geometry does not match weight shape");
        }
    }
    const Index out_channels = w.dim(static_cast<int>(1 - w_in_axis));
    if (b.numel() != out_channels) {
        throw ShapeMismatch(std::string(op) + ": bias length must equal output channels");
    }
}

} // namespace

Var conv3d(Var x, Var weight, Var bias, const ConvGeometry& g) {
    const Array& xv = x.value();
    const Array& wv = weight.value();
    check_conv_operands(xv, wv, bias.value(), g, 1, "conv3d");
    std::array<Index, 3> out_sp{};
    for (std::size_t a = 0; a < 3; ++a) {
        const Index span = xv.dim(static_cast<int>(a) + 1) + 2 * g.pad[a] - g.kernel[a];
        if (span < 0) {
            throw ShapeMismatch("conv3d: kernel larger than padded input");
        }
        out_sp[a] = span / g.stride[a] + 1;
    }
    const Index cout = wv.dim(0);
    auto plan = std::make_shared<ConvPlan>(
        make_plan(cout, xv.dim(0), out_sp, {xv.dim(1), xv.dim(2), xv.dim(3)}, g));
    Array out({cout, out_sp[0], out_sp[1], out_sp[2]});
    conv_gather(*plan, xv.data.data(), wv.data.data(), out.data.data());
    add_bias(out, bias.value());
    const int ix = x.id(), iw = weight.id(), ib = bias.id();
    return x.tape()->record(std::move(out), {ix, iw, ib}, [ix, iw, ib, plan](Tape& t, const Array& gout) {
        if (t.requires_grad(ix)) {
            Array gx(t.value(ix).shape);
            conv_scatter(*plan, gout.data.data(), t.value(iw).data.data(), gx.data.data());
            t.accumulate(ix, gx);
        }
        if (t.requires_grad(iw)) {
            Array gw(t.value(iw).shape);
            conv_weight_grad(*plan, gout.data.data(), t.value(ix).data.data(), gw.data.data());
            t.accumulate(iw, gw);
        }
        t.accumulate(ib, bias_grad(gout));
    });
}

Var conv_transpose3d(Var x, Var weight, Var bias, const ConvGeometry& g, std::array<Index, 3> out_spatial) {
    const Array& xv = x.value();
    const Array& wv = weight.value();
    check_conv_operands(xv, wv, bias.value(), g, 0, "conv_transpose3d");
    for (std::size_t a = 0; a < 3; ++a) {
        // every input position must map inside the output for the plan to be the exact adjoint of conv3d
        const Index needed = (xv.dim(static_cast<int>(a) + 1) - 1) * g.stride[a] - 2 * g.pad[a] + g.kernel[a];
        if (out_spatial[a] < 1 || out_spatial[a] < needed || out_spatial[a] >= needed + g.stride[a]) {
            throw ShapeMismatch("conv_transpose3d: output extent inconsistent with stride/padding");
        }
    }
    const Index cout = wv.dim(1);
    auto plan = std::make_shared<ConvPlan>(
        make_plan(xv.dim(0), cout, {xv.dim(1), xv.dim(2), xv.dim(3)}, out_spatial, g));
    Array out({cout, out_spatial[0], out_spatial[1], out_spatial[2]});
    conv_scatter(*plan, xv.data.data(), wv.data.data(), out.data.data());
    add_bias(out, bias.value());
    const int ix = x.id(), iw = weight.id(), ib = bias.id();
    return x.tape()->record(std::move(out), {ix, iw, ib}, [ix, iw, ib, plan](Tape& t, const Array& gout) {
        if (t.requires_grad(ix)) {
            Array gx(t.value(ix).shape);
            conv_gather(*plan, gout.data.data(), t.value(iw).data.data(), gx.data.data());
            t.accumulate(ix, gx);
        }
        if (t.requires_grad(iw)) {
            Array gw(t.value(iw).shape);
            conv_weight_grad(*plan, t.value(ix).data.data(), gout.data.data(), gw.data.data());
            t.accumulate(iw, gw);
        }
        t.accumulate(ib, bias_grad(gout));
    });
}

// --- truncated t-SVD ---

namespace {

Tensor3 apply_pseudo_gradient(const TSvdFactors& full, Index rank, const Tensor3& cotangent) {
    const Index n3 = cotangent.n3();
    const Index discarded = full.rank - rank;
    FreqSlices g = dft_mode3(cotangent);
    if (discarded > 0) {
        for (Index k = 0; k < independent_slice_count(n3); ++k) {
            const Eigen::MatrixXcd ud = full.u_hat[k].rightCols(discarded);
            const Eigen::MatrixXcd vd = full.v_hat[k].rightCols(discarded);
            Eigen::MatrixXcd& gk = g.slices[k];
            // (I - Ud Ud^H) G (I - Vd Vd^H)
            const Eigen::MatrixXcd left = gk - ud * (ud.adjoint() * gk);
            gk = left - (left * vd) * vd.adjoint();
        }
        for (Index k = independent_slice_count(n3); k < n3; ++k) {
            g.slices[k] = g.slices[n3 - k].conjugate();
        }
    }
    return idft_mode3(g);
}

} // namespace

Tensor3 tsvd_pseudo_gradient(const Tensor3& x, Index rank, const Tensor3& cotangent) {
    require_same_shape(x, cotangent, "tsvd_pseudo_gradient");
    const TSvdFactors full = t_svd(x, std::min(x.n1(), x.n2()));
    if (rank < 1 || rank > full.rank) {
        throw InvalidArgument("tsvd_pseudo_gradient: rank out of range");
    }
    return apply_pseudo_gradient(full, rank, cotangent);
}

Var tsvd_project(Var x, Index rank) {
    if (x.value().ndim() != 3) {
        throw ShapeMismatch("tsvd_project: expected a (n1, n2, n3) node, got " + shape_string(x.value().shape));
    }
    const Tensor3 xt = to_tensor(x.value());
    if (rank < 1 || rank > std::min(xt.n1(), xt.n2())) {
        throw InvalidArgument("tsvd_project: rank " + std::to_string(rank) + " out of range");
    }
    auto full = std::make_shared<TSvdFactors>(t_svd(xt, std::min(xt.n1(), xt.n2())));
    Array out = to_array(reconstruct(truncated(*full, rank)));
    const int ix = x.id();
    return x.tape()->record(std::move(out), {ix}, [ix, rank, full](Tape& t, const Array& g) {
        t.accumulate(ix, to_array(apply_pseudo_gradient(*full, rank, to_tensor(g))));
    });
}

// --- Top-K channel selection ---

Index topk_count(double ratio, Index channels) {
    const double raw = std::ceil(ratio * static_cast<double>(channels));
    if (!(raw >= 1.0)) {
        throw EmptySelection("ratio " + std::to_string(ratio) + " keeps no channel out of " + std::to_string(channels));
    }
    return std::min<Index>(channels, static_cast<Index>(raw));
}

Var topk_channels(Var x, Var ratio) {
    const Array& xv = x.value();
    if (xv.ndim() != 4) {
        throw ShapeMismatch("topk_channels: expected (C, h, w, d), got " + shape_string(xv.shape));
    }
    if (ratio.value().numel() != 1) {
        throw ShapeMismatch("topk_channels: ratio must be a single value");
    }
    const Index channels = xv.dim(0);
    const Index positions = xv.numel() / channels;
    const Index keep = topk_count(ratio.value()[0], channels);

    Array out(xv.shape);
    std::vector<unsigned char> mask(static_cast<std::size_t>(xv.numel()), 0);
    // Channel index of the first excluded entry per position, or -1 when all are kept.
    std::vector<Index> boundary(static_cast<std::size_t>(positions), -1);
    std::vector<Index> order(static_cast<std::size_t>(channels));
    for (Index pos = 0; pos < positions; ++pos) {
        std::iota(order.begin(), order.end(), Index{0});
        std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
            return std::abs(xv[a * positions + pos]) > std::abs(xv[b * positions + pos]);
        });
        for (Index r = 0; r < keep; ++r) {
            const Index n = order[static_cast<std::size_t>(r)] * positions + pos;
            mask[static_cast<std::size_t>(n)] = 1;
            out[n] = xv[n];
        }
        if (keep < channels) {
            boundary[static_cast<std::size_t>(pos)] = order[static_cast<std::size_t>(keep)];
        }
    }
    const int ix = x.id(), ir = ratio.id();
    return x.tape()->record(
        std::move(out), {ix, ir},
        [ix, ir, channels, positions, mask = std::move(mask), boundary = std::move(boundary)](Tape& t, const Array& g) {
            Array gx(g.shape);
            for (std::size_t n = 0; n < mask.size(); ++n) {
                gx.data[n] = mask[n] ? g.data[n] : 0.0;
            }
            t.accumulate(ix, gx);
            if (t.requires_grad(ir)) {
                const Array& xv = t.value(ix);
                double acc = 0.0;
                for (Index pos = 0; pos < positions; ++pos) {
                    const Index c = boundary[static_cast<std::size_t>(pos)];
                    if (c >= 0) {
                        acc += g[c * positions + pos] * xv[c * positions + pos];
                    }
                }
                t.accumulate(ir, Array(t.value(ir).shape, static_cast<double>(channels) * acc));
            }
        });
}

} // namespace dutrpca::ad
