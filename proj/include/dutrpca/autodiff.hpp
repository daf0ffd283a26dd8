#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dutrpca/tensor3.hpp"

namespace dutrpca::ad {

/// Row-major N-d real array.
struct Array {
    std::vector<Index> shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(std::vector<Index> shape_, double fill = 0.0);
    Array(std::vector<Index> shape_, std::vector<double> data_);

    static Array scalar(double v) { return Array({}, std::vector<double>{v}); }

    Index numel() const { return static_cast<Index>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    Index dim(int axis) const { return shape[static_cast<std::size_t>(axis)]; }
    bool same_shape(const Array& other) const { return shape == other.shape; }

    double& operator[](Index n) { return data[static_cast<std::size_t>(n)]; }
    double operator[](Index n) const { return data[static_cast<std::size_t>(n)]; }
};

std::string shape_string(const std::vector<Index>& shape);
Index shape_numel(const std::vector<Index>& shape);

/// Tensor3 (n1, n2, n3) viewed as an array of the same shape.
Array to_array(const Tensor3& t);
/// Accepts shapes (n1, n2, n3) and (1, n1, n2, n3).
Tensor3 to_tensor(const Array& a);

/// Trainable array that outlives individual tapes.
class Parameter {
public:
    Parameter(std::string name, Array value);

    const std::string& name() const { return name_; }

    Array value;
    Array grad;
    Array moment1;
    Array moment2;
    bool has_grad = false;

    /// Zero-filled gradient, marked present.
    void zero_grad();

private:
    std::string name_;
};

/// Owning, insertion-ordered collection of parameters with stable addresses.
class ParameterSet {
public:
    Parameter& add(std::string name, Array value);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }
    /// Total number of scalar entries.
    Index scalar_count() const;

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

class Tape;

/// Handle to a node recorded on a tape.
class Var {
public:
    Var() = default;

    const Array& value() const;
    const Array& grad() const;
    bool has_grad() const;
    bool requires_grad() const;
    int id() const { return id_; }
    Tape* tape() const { return tape_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

/**
 * Reverse-mode tape. Nodes are appended in evaluation order, so reverse id
 * order is a valid topological order for backward().
 */
class Tape {
public:
    /// Receives the gradient of the node being processed.
    using BackwardFn = std::function<void(Tape&, const Array& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Array value);
    /// Differentiable input that is not tied to a Parameter.
    Var input(Array value);
    Var parameter(Parameter& p);

    /// Records an op output. The backward closure only runs when some parent requires grad.
    Var record(Array value, std::vector<int> parents, BackwardFn backward);

    /// Populates grads of every requires-grad ancestor of `loss`. Parameter grads accumulate.
    void backward(Var loss);

    const Array& value(int id) const;
    const Array& grad(int id) const;
    bool has_grad(int id) const;
    bool requires_grad(int id) const;
    const std::vector<int>& parents(int id) const;
    std::size_t size() const { return nodes_.size(); }

    /// Adds `g` into the gradient slot of node `id` when it requires grad.
    void accumulate(int id, const Array& g);
    /// Mutable gradient slot (zero-allocated on first use); only for requires-grad nodes.
    Array& grad_slot(int id);

    Var var(int id) { return Var(this, id); }

private:
    struct Node {
        Array value;
        Array grad;
        bool has_grad = false;
        bool requires_grad = false;
        std::vector<int> parents;
        BackwardFn backward;
        Parameter* param = nullptr;
    };

    const Node& node(int id) const;
    Node& node(int id);

    std::vector<Node> nodes_;
};

// --- differentiable primitives ---

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// s * a with s a one-element node.
Var scalar_mul(Var s, Var a);
Var leaky_relu(Var a, double slope = 0.1);
Var sigmoid(Var a);

Var sum(Var a);
Var mean(Var a);
Var sq_frobenius(Var a);

Var reshape(Var a, std::vector<Index> shape);
Var permute(Var a, std::vector<int> perm);

/// Softmax along `axis`.
Var softmax(Var a, int axis);

/// Normalizes along `axis`; gamma and beta have shape (dim(axis)).
Var layer_norm(Var a, int axis, Var gamma, Var beta, double eps = 1e-5);

/**
 * Matrix product over the last two axes. `a` is (M,K) or (B,M,K); `b` is
 * (K,N) or (B,K,N), or with transpose_b (N,K) / (B,N,K). A 2-D operand is
 * shared across the batch.
 */
Var matmul(Var a, Var b, bool transpose_b = false);

struct ConvGeometry {
    std::array<Index, 3> kernel{3, 3, 3};
    std::array<Index, 3> stride{1, 1, 1};
    std::array<Index, 3> pad{1, 1, 1};
};

/// x (Cin, H, W, D), weight (Cout, Cin, kh, kw, kd), bias (Cout).
Var conv3d(Var x, Var weight, Var bias, const ConvGeometry& g);

/// x (Cin, H, W, D), weight (Cin, Cout, kh, kw, kd), bias (Cout); output spatial extent given.
Var conv_transpose3d(Var x, Var weight, Var bias, const ConvGeometry& g, std::array<Index, 3> out_spatial);

/**
 * Rank-r truncated t-SVD projection of a (n1, n2, n3) node. Backward applies,
 * per frequency slice, (I - Ud Ud^H) G (I - Vd Vd^H) where Ud, Vd are the
 * discarded singular vectors, so cotangents only reach retained components.
 */
Var tsvd_project(Var x, Index rank);

/// Cotangent map used by tsvd_project's backward, exposed for testing.
Tensor3 tsvd_pseudo_gradient(const Tensor3& x, Index rank, const Tensor3& cotangent);

/**
 * Keeps, at each (h, w, d) position of a (C, h, w, d) node, the ceil(ratio*C)
 * channels of largest magnitude (lower channel index wins ties).
 * Backward: straight-through on kept entries; ratio gets
 * C * sum over positions of cotangent*value at the first excluded channel.
 */
Var topk_channels(Var x, Var ratio);

/// Channel count kept by topk_channels; throws EmptySelection when < 1.
Index topk_count(double ratio, Index channels);

// --- optimizer ---

struct AdamOptions {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

    /// One bias-corrected adaptive-moment update. Throws MissingGrad.
    void step(const std::vector<Parameter*>& params);

    AdamOptions& options() { return opts_; }
    long steps() const { return t_; }

private:
    AdamOptions opts_;
    long t_ = 0;
};

void adam_step(const std::vector<Parameter*>& params, long step, const AdamOptions& opts);

} // namespace dutrpca::ad
