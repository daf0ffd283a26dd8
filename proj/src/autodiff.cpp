#include "dutrpca/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Core>

#include "dutrpca/errors.hpp"

namespace dutrpca::ad {

Index shape_numel(const std::vector<Index>& shape) {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<Index>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? "," : "") + std::to_string(shape[i]);
    }
    return s + ")";
}

Array::Array(std::vector<Index> shape_, double fill) : shape(std::move(shape_)) {
    data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
}

Array::Array(std::vector<Index> shape_, std::vector<double> data_) : shape(std::move(shape_)), data(std::move(data_)) {
    if (static_cast<Index>(data.size()) != shape_numel(shape)) {
        throw ShapeMismatch("array data size " + std::to_string(data.size()) + " for shape " + shape_string(shape));
    }
}

Array to_array(const Tensor3& t) {
    return Array({t.n1(), t.n2(), t.n3()}, t.storage());
}

Tensor3 to_tensor(const Array& a) {
    if (a.ndim() == 3) {
        return Tensor3(a.dim(0), a.dim(1), a.dim(2), a.data);
    }
    if (a.ndim() == 4 && a.dim(0) == 1) {
        return Tensor3(a.dim(1), a.dim(2), a.dim(3), a.data);
    }
    throw ShapeMismatch("to_tensor: shape " + shape_string(a.shape) + " is not a single-channel cube");
}

Parameter::Parameter(std::string name, Array v) : value(std::move(v)), name_(std::move(name)) {
    grad = Array(value.shape);
    moment1 = Array(value.shape);
    moment2 = Array(value.shape);
}

void Parameter::zero_grad() {
    grad = Array(value.shape);
    has_grad = true;
}

Parameter& ParameterSet::add(std::string name, Array value) {
    if (contains(name)) {
        throw InvalidArgument("duplicate parameter '" + name + "'");
    }
    params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
    return *params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
    return const_cast<Parameter&>(static_cast<const ParameterSet&>(*this).get(name));
}

const Parameter& ParameterSet::get(const std::string& name) const {
    for (const auto& p : params_) {
        if (p->name() == name) {
            return *p;
        }
    }
    throw InvalidArgument("no parameter named '" + name + "'");
}

bool ParameterSet::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p->name() == name; });
}

std::vector<Parameter*> ParameterSet::all() {
    std::vector<Parameter*> out;
    for (auto& p : params_) {
        out.push_back(p.get());
    }
    return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params_) {
        out.push_back(p.get());
    }
    return out;
}

Index ParameterSet::scalar_count() const {
    Index n = 0;
    for (const auto& p : params_) {
        n += p->value.numel();
    }
    return n;
}

// --- Var ---

const Array& Var::value() const { return tape_->value(id_); }
const Array& Var::grad() const { return tape_->grad(id_); }
bool Var::has_grad() const { return tape_->has_grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

// --- Tape ---

const Tape::Node& Tape::node(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw InvalidArgument("node id out of range");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

Tape::Node& Tape::node(int id) {
    return const_cast<Node&>(static_cast<const Tape&>(*this).node(id));
}

Var Tape::constant(Array value) {
    Node n;
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::input(Array value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::parameter(Parameter& p) {
    Node n;
    n.value = p.value;
    n.requires_grad = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Array value, std::vector<int> parents, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (int p : parents) {
        n.requires_grad = n.requires_grad || node(p).requires_grad;
    }
    n.parents = std::move(parents);
    if (n.requires_grad) {
        n.backward = std::move(backward);
    }
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Array& Tape::value(int id) const { return node(id).value; }

const Array& Tape::grad(int id) const {
    const Node& n = node(id);
    if (!n.has_grad) {
        throw MissingGrad("node " + std::to_string(id) + " has no gradient");
    }
    return n.grad;
}

bool Tape::has_grad(int id) const { return node(id).has_grad; }
bool Tape::requires_grad(int id) const { return node(id).requires_grad; }
const std::vector<int>& Tape::parents(int id) const { return node(id).parents; }

Array& Tape::grad_slot(int id) {
    Node& n = node(id);
    if (!n.has_grad) {
        n.grad = Array(n.value.shape);
        n.has_grad = true;
    }
    return n.grad;
}

void Tape::accumulate(int id, const Array& g) {
    if (!node(id).requires_grad) {
        return;
    }
    Array& slot = grad_slot(id);
    if (!slot.same_shape(g)) {
        throw ShapeMismatch("gradient shape " + shape_string(g.shape) + " vs value " + shape_string(slot.shape));
    }
    for (std::size_t i = 0; i < slot.data.size(); ++i) {
        slot.data[i] += g.data[i];
    }
}

void Tape::backward(Var loss) {
    if (loss.tape() != this) {
        throw InvalidArgument("backward: loss belongs to another tape");
    }
    const int root = loss.id();
    if (node(root).value.numel() != 1) {
        throw NonScalarLoss("loss has shape " + shape_string(node(root).value.shape));
    }
    for (Node& n : nodes_) {
        n.has_grad = false;
        n.grad = Array();
    }
    if (!node(root).requires_grad) {
        return;
    }
    grad_slot(root).data[0] = 1.0;
    for (int id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.has_grad) {
            continue;
        }
        if (n.backward) {
            // Copy: the closure may append to other nodes' grads but never to its own.
            const Array g = n.grad;
            n.backward(*this, g);
        }
        if (n.param != nullptr) {
            Parameter& p = *n.param;
            if (!p.has_grad) {
                p.zero_grad();
            }
            for (std::size_t i = 0; i < p.grad.data.size(); ++i) {
                p.grad.data[i] += n.grad.data[i];
            }
        }
    }
}

// --- elementwise ---

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value())) {
        throw ShapeMismatch(std::string(op) + ": " + shape_string(a.value().shape) + " vs " +
                            shape_string(b.value().shape));
    }
}

template <typename F>
Array map(const Array& a, F f) {
    Array out(a.shape);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        out.data[i] = f(a.data[i]);
    }
    return out;
}

struct LineLayout {
    Index outer;
    Index n;
    Index inner;
};

LineLayout line_layout(const std::vector<Index>& shape, int axis) {
    const int nd = static_cast<int>(shape.size());
    if (axis < 0) {
        axis += nd;
    }
    if (axis < 0 || axis >= nd) {
        throw InvalidArgument("axis out of range for shape " + shape_string(shape));
    }
    LineLayout l{1, shape[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) {
        l.outer *= shape[static_cast<std::size_t>(i)];
    }
    for (int i = axis + 1; i < nd; ++i) {
        l.inner *= shape[static_cast<std::size_t>(i)];
    }
    return l;
}

} // namespace

Var add(Var a, Var b) {
    require_same(a, b, "add");
    Array out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] += b.value().data[i];
    }
    const int ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Array& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Array out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] -= b.value().data[i];
    }
    const int ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Array& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, map(g, [](double v) { return -v; }));
    });
}

Var mul(Var a, Var b) {
    require_same(a, b, "mul");
    Array out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        out.data[i] *= b.value().data[i];
    }
    const int ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {ia, ib}, [ia, ib](Tape& t, const Array& g) {
        const Array& va = t.value(ia);
        const Array& vb = t.value(ib);
        Array ga(g.shape), gb(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] = g.data[i] * vb.data[i];
            gb.data[i] = g.data[i] * va.data[i];
        }
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
    });
}

Var scale(Var a, double s) {
    const int ia = a.id();
    return a.tape()->record(map(a.value(), [s](double v) { return s * v; }), {ia},
                            [ia, s](Tape& t, const Array& g) { t.accumulate(ia, map(g, [s](double v) { return s * v; })); });
}

Var scalar_mul(Var s, Var a) {
    if (s.value().numel() != 1) {
        throw ShapeMismatch("scalar_mul: scale must have one element, got " + shape_string(s.value().shape));
    }
    const double sv = s.value()[0];
    const int is = s.id(), ia = a.id();
    return a.tape()->record(map(a.value(), [sv](double v) { return sv * v; }), {is, ia},
                            [is, ia](Tape& t, const Array& g) {
                                const Array& va = t.value(ia);
                                const double scale_value = t.value(is)[0];
                                double gs = 0.0;
                                for (std::size_t i = 0; i < g.data.size(); ++i) {
                                    gs += g.data[i] * va.data[i];
                                }
                                Array gsa(t.value(is).shape, gs);
                                t.accumulate(is, gsa);
                                t.accumulate(ia, map(g, [scale_value](double v) { return scale_value * v; }));
                            });
}

Var leaky_relu(Var a, double slope) {
    const int ia = a.id();
    return a.tape()->record(map(a.value(), [slope](double v) { return v > 0.0 ? v : slope * v; }), {ia},
                            [ia, slope](Tape& t, const Array& g) {
                                const Array& va = t.value(ia);
                                Array ga(g.shape);
                                for (std::size_t i = 0; i < g.data.size(); ++i) {
                                    ga.data[i] = va.data[i] > 0.0 ? g.data[i] : slope * g.data[i];
                                }
                                t.accumulate(ia, ga);
                            });
}

Var sigmoid(Var a) {
    const int ia = a.id();
    Array out = map(a.value(), [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    Array y = out;
    return a.tape()->record(std::move(out), {ia}, [ia, y = std::move(y)](Tape& t, const Array& g) {
        Array ga(g.shape);
        for (std::size_t i = 0; i < g.data.size(); ++i) {
            ga.data[i] = g.data[i] * y.data[i] * (1.0 - y.data[i]);
        }
        t.accumulate(ia, ga);
    });
}

// --- reductions ---

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data) {
        s += v;
    }
    const int ia = a.id();
    return a.tape()->record(Array::scalar(s), {ia}, [ia](Tape& t, const Array& g) {
        t.accumulate(ia, Array(t.value(ia).shape, g[0]));
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().numel());
    return scale(sum(a), 1.0 / n);
}

Var sq_frobenius(Var a) {
    double s = 0.0;
    for (double v : a.value().data) {
        s += v * v;
    }
    const int ia = a.id();
    return a.tape()->record(Array::scalar(s), {ia}, [ia](Tape& t, const Array& g) {
        const double g0 = g[0];
        t.accumulate(ia, map(t.value(ia), [g0](double v) { return 2.0 * g0 * v; }));
    });
}

// --- layout ---

Var reshape(Var a, std::vector<Index> shape) {
    if (shape_numel(shape) != a.value().numel()) {
        throw ShapeMismatch("reshape " + shape_string(a.value().shape) + " -> " + shape_string(shape));
    }
    const int ia = a.id();
    return a.tape()->record(Array(std::move(shape), a.value().data), {ia}, [ia](Tape& t, const Array& g) {
        t.accumulate(ia, Array(t.value(ia).shape, g.data));
    });
}

namespace {

std::vector<Index> strides_of(const std::vector<Index>& shape) {
    std::vector<Index> st(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    }
    return st;
}

// out[idx permuted] = in[idx]; out axis i is in axis perm[i].
Array permute_array(const Array& in, const std::vector<int>& perm) {
    const std::size_t nd = in.shape.size();
    std::vector<Index> out_shape(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        out_shape[i] = in.shape[static_cast<std::size_t>(perm[i])];
    }
    const std::vector<Index> in_strides = strides_of(in.shape);
    std::vector<Index> gather(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        gather[i] = in_strides[static_cast<std::size_t>(perm[i])];
    }
    Array out(out_shape);
    std::vector<Index> idx(nd, 0);
    Index src = 0;
    for (Index n = 0; n < out.numel(); ++n) {
        out.data[static_cast<std::size_t>(n)] = in.data[static_cast<std::size_t>(src)];
        for (int ax = static_cast<int>(nd) - 1; ax >= 0; --ax) {
            const auto a = static_cast<std::size_t>(ax);
            if (++idx[a] < out_shape[a]) {
                src += gather[a];
                break;
            }
            src -= gather[a] * (out_shape[a] - 1);
            idx[a] = 0;
        }
    }
    return out;
}

} // namespace

Var permute(Var a, std::vector<int> perm) {
    const std::size_t nd = a.value().shape.size();
    std::vector<int> check = perm;
    std::sort(check.begin(), check.end());
    for (std::size_t i = 0; i < check.size(); ++i) {
        if (check.size() != nd || check[i] != static_cast<int>(i)) {
            throw InvalidArgument("permute: not a permutation of the axes");
        }
    }
    std::vector<int> inverse(nd);
    for (std::size_t i = 0; i < nd; ++i) {
        inverse[static_cast<std::size_t>(perm[i])] = static_cast<int>(i);
    }
    const int ia = a.id();
    return a.tape()->record(permute_array(a.value(), perm), {ia}, [ia, inverse](Tape& t, const Array& g) {
        t.accumulate(ia, permute_array(g, inverse));
    });
}

// --- normalization ---

Var softmax(Var a, int axis) {
    const LineLayout l = line_layout(a.value().shape, axis);
    const Array& x = a.value();
    Array y(x.shape);
    for (Index o = 0; o < l.outer; ++o) {
        for (Index in = 0; in < l.inner; ++in) {
            const Index base = o * l.n * l.inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (Index j = 0; j < l.n; ++j) {
                mx = std::max(mx, x[base + j * l.inner]);
            }
            double z = 0.0;
            for (Index j = 0; j < l.n; ++j) {
                const double e = std::exp(x[base + j * l.inner] - mx);
                y[base + j * l.inner] = e;
                z += e;
            }
            for (Index j = 0; j < l.n; ++j) {
                y[base + j * l.inner] /= z;
            }
        }
    }
    const int ia = a.id();
    Array yc = y;
    return a.tape()->record(std::move(y), {ia}, [ia, l, y = std::move(yc)](Tape& t, const Array& g) {
        Array gx(g.shape);
        for (Index o = 0; o < l.outer; ++o) {
            for (Index in = 0; in < l.inner; ++in) {
                const Index base = o * l.n * l.inner + in;
                double dot = 0.0;
                for (Index j = 0; j < l.n; ++j) {
                    dot += g[base + j * l.inner] * y[base + j * l.inner];
                }
                for (Index j = 0; j < l.n; ++j) {
                    const Index p = base + j * l.inner;
                    gx[p] = y[p] * (g[p] - dot);
                }
            }
        }
        t.accumulate(ia, gx);
    });
}

Var layer_norm(Var a, int axis, Var gamma, Var beta, double eps) {
    const LineLayout l = line_layout(a.value().shape, axis);
    if (gamma.value().numel() != l.n || beta.value().numel() != l.n) {
        throw ShapeMismatch("layer_norm: gamma/beta length must equal the normalized axis");
    }
    const Array& x = a.value();
    const Array& gm = gamma.value();
    const Array& bt = beta.value();
    Array y(x.shape);
    Array xhat(x.shape);
    std::vector<double> rstd(static_cast<std::size_t>(l.outer * l.inner));
    for (Index o = 0; o < l.outer; ++o) {
        for (Index in = 0; in < l.inner; ++in) {
            const Index base = o * l.n * l.inner + in;
            double mu = 0.0;
            for (Index j = 0; j < l.n; ++j) {
                mu += x[base + j * l.inner];
            }
            mu /= static_cast<double>(l.n);
            double var = 0.0;
            for (Index j = 0; j < l.n; ++j) {
                const double d = x[base + j * l.inner] - mu;
                var += d * d;
            }
            var /= static_cast<double>(l.n);
            const double r = 1.0 / std::sqrt(var + eps);
            rstd[static_cast<std::size_t>(o * l.inner + in)] = r;
            for (Index j = 0; j < l.n; ++j) {
                const Index p = base + j * l.inner;
                xhat[p] = (x[p] - mu) * r;
                y[p] = xhat[p] * gm[j] + bt[j];
            }
        }
    }
    const int ia = a.id(), ig = gamma.id(), ib = beta.id();
    return a.tape()->record(std::move(y), {ia, ig, ib},
                            [ia, ig, ib, l, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, const Array& g) {
                                const Array& gm = t.value(ig);
                                Array gx(g.shape);
                                Array ggamma(gm.shape);
                                Array gbeta(gm.shape);
                                const double inv_n = 1.0 / static_cast<double>(l.n);
                                for (Index o = 0; o < l.outer; ++o) {
                                    for (Index in = 0; in < l.inner; ++in) {
                                        const Index base = o * l.n * l.inner + in;
                                        double mean_dx = 0.0, mean_dx_xhat = 0.0;
                                        for (Index j = 0; j < l.n; ++j) {
                                            const Index p = base + j * l.inner;
                                            const double dxhat = g[p] * gm[j];
                                            mean_dx += dxhat;
                                            mean_dx_xhat += dxhat * xhat[p];
                                            ggamma[j] += g[p] * xhat[p];
                                            gbeta[j] += g[p];
                                        }
                                        mean_dx *= inv_n;
                                        mean_dx_xhat *= inv_n;
                                        const double r = rstd[static_cast<std::size_t>(o * l.inner + in)];
                                        for (Index j = 0; j < l.n; ++j) {
                                            const Index p = base + j * l.inner;
                                            gx[p] = r * (g[p] * gm[j] - mean_dx - xhat[p] * mean_dx_xhat);
                                        }
                                    }
                                }
                                t.accumulate(ia, gx);
                                t.accumulate(ig, ggamma);
                                t.accumulate(ib, gbeta);
                            });
}

// --- matmul ---

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

struct MatmulDims {
    Index batch = 1;
    bool a_batched = false;
    bool b_batched = false;
    Index m = 0, k = 0, n = 0;
    Index b_rows = 0, b_cols = 0;
};

MatmulDims matmul_dims(const Array& a, const Array& b, bool transpose_b) {
    MatmulDims d;
    if (a.ndim() < 2 || a.ndim() > 3 || b.ndim() < 2 || b.ndim() > 3) {
        throw ShapeMismatch("matmul: operands must be 2-D or 3-D");
    }
    d.a_batched = a.ndim() == 3;
    d.b_batched = b.ndim() == 3;
    if (d.a_batched && d.b_batched && a.dim(0) != b.dim(0)) {
        throw ShapeMismatch("matmul: batch sizes differ");
    }
    d.batch = d.a_batched ? a.dim(0) : (d.b_batched ? b.dim(0) : 1);
    d.m = a.dim(a.ndim() - 2);
    d.k = a.dim(a.ndim() - 1);
    d.b_rows = b.dim(b.ndim() - 2);
    d.b_cols = b.dim(b.ndim() - 1);
    const Index bk = transpose_b ? d.b_cols : d.b_rows;
    d.n = transpose_b ? d.b_rows : d.b_cols;
    if (bk != d.k) {
        throw ShapeMismatch("matmul: inner dimensions " + shape_string(a.shape) + " x " + shape_string(b.shape));
    }
    return d;
}

} // namespace

Var matmul(Var a, Var b, bool transpose_b) {
    const MatmulDims d = matmul_dims(a.value(), b.value(), transpose_b);
    std::vector<Index> out_shape = {d.m, d.n};
    if (d.a_batched || d.b_batched) {
        out_shape.insert(out_shape.begin(), d.batch);
    }
    Array out(out_shape);
    const Array& av = a.value();
    const Array& bv = b.value();
    for (Index bi = 0; bi < d.batch; ++bi) {
        ConstMap A(av.data.data() + (d.a_batched ? bi * d.m * d.k : 0), d.m, d.k);
        ConstMap B(bv.data.data() + (d.b_batched ? bi * d.b_rows * d.b_cols : 0), d.b_rows, d.b_cols);
        MutMap C(out.data.data() + bi * d.m * d.n, d.m, d.n);
        if (transpose_b) {
            C.noalias() = A * B.transpose();
        } else {
            C.noalias() = A * B;
        }
    }
    const int ia = a.id(), ib = b.id();
    return a.tape()->record(std::move(out), {ia, ib}, [ia, ib, d, transpose_b](Tape& t, const Array& g) {
        const Array& av = t.value(ia);
        const Array& bv = t.value(ib);
        Array ga(av.shape), gb(bv.shape);
        for (Index bi = 0; bi < d.batch; ++bi) {
            const Index aoff = d.a_batched ? bi * d.m * d.k : 0;
            const Index boff = d.b_batched ? bi * d.b_rows * d.b_cols : 0;
            ConstMap A(av.data.data() + aoff, d.m, d.k);
            ConstMap B(bv.data.data() + boff, d.b_rows, d.b_cols);
            ConstMap G(g.data.data() + bi * d.m * d.n, d.m, d.n);
            MutMap GA(ga.data.data() + aoff, d.m, d.k);
            MutMap GB(gb.data.data() + boff, d.b_rows, d.b_cols);
            if (transpose_b) {
                GA.noalias() += G * B;
                GB.noalias() += G.transpose() * A;
            } else {
                GA.noalias() += G * B.transpose();
                GB.noalias() += A.transpose() * G;
            }
        }
        t.accumulate(ia, ga);
        t.accumulate(ib, gb);
    });
}

// --- optimizer ---

void adam_step(const std::vector<Parameter*>& params, long step, const AdamOptions& o) {
    if (step < 1) {
        throw InvalidArgument("adam_step: step count starts at 1");
    }
    for (const Parameter* p : params) {
        if (!p->has_grad) {
            throw MissingGrad("parameter '" + p->name() + "' has no gradient");
        }
    }
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
    for (Parameter* p : params) {
        for (std::size_t i = 0; i < p->value.data.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = p->moment1.data[i];
            double& v = p->moment2.data[i];
            m = o.beta1 * m + (1.0 - o.beta1) * g;
            v = o.beta2 * v + (1.0 - o.beta2) * g * g;
            const double mhat = m / c1;
            const double vhat = v / c2;
            p->value.data[i] -= o.lr * mhat / (std::sqrt(vhat) + o.eps);
        }
    }
}

void Adam::step(const std::vector<Parameter*>& params) {
    adam_step(params, t_ + 1, opts_);
    ++t_;
}

} // namespace dutrpca::ad
