#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dutrpca {

using Index = Eigen::Index;

struct Shape3 {
    Index n1 = 0;
    Index n2 = 0;
    Index n3 = 0;

    Index numel() const { return n1 * n2 * n3; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

/**
 * Dense real n1 x n2 x n3 array.
 *
 * Storage is row-major over (i, j, k): the mode-3 tube at (i, j) is contiguous,
 * which is the axis every Fourier-domain operation walks along.
 */
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(Index n1, Index n2, Index n3, double fill = 0.0);
    Tensor3(Index n1, Index n2, Index n3, std::vector<double> values);
    explicit Tensor3(Shape3 shape, double fill = 0.0) : Tensor3(shape.n1, shape.n2, shape.n3, fill) {}

    /// t-identity: identity matrix in frontal slice 0, zeros elsewhere.
    static Tensor3 identity(Index n, Index n3);

    Index n1() const { return shape_.n1; }
    Index n2() const { return shape_.n2; }
    Index n3() const { return shape_.n3; }
    Shape3 shape() const { return shape_; }
    Index size() const { return static_cast<Index>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double& operator()(Index i, Index j, Index k) { return data_[offset(i, j, k)]; }
    double operator()(Index i, Index j, Index k) const { return data_[offset(i, j, k)]; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    const std::vector<double>& storage() const { return data_; }

    Eigen::MatrixXd frontal_slice(Index k) const;
    void set_frontal_slice(Index k, const Eigen::MatrixXd& m);

    /// t-transpose: each frontal slice transposed, slices 2..n3 in reverse order.
    Tensor3 t_transpose() const;

    double frobenius_norm() const;
    bool all_finite() const;

    Tensor3& operator+=(const Tensor3& rhs);
    Tensor3& operator-=(const Tensor3& rhs);
    Tensor3& operator*=(double s);

    friend Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
    friend Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
    friend Tensor3 operator*(Tensor3 a, double s) { return a *= s; }
    friend Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

private:
    std::size_t offset(Index i, Index j, Index k) const {
        return static_cast<std::size_t>((i * shape_.n2 + j) * shape_.n3 + k);
    }

    Shape3 shape_{};
    std::vector<double> data_;
};

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* context);

/// max |a - b| over all entries.
double max_abs_diff(const Tensor3& a, const Tensor3& b);

/// ||a - b||_F / ||b||_F, or ||a - b||_F when b is zero.
double relative_error(const Tensor3& a, const Tensor3& b);

} // namespace dutrpca
