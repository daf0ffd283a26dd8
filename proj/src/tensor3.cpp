#include "dutrpca/tensor3.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dutrpca/errors.hpp"

namespace dutrpca {

namespace {

void check_dims(Index n1, Index n2, Index n3) {
    if (n1 < 1 || n2 < 1 || n3 < 1) {
        throw InvalidArgument("tensor dimensions must be >= 1, got " + std::to_string(n1) + "x" +
                              std::to_string(n2) + "x" + std::to_string(n3));
    }
}

} // namespace

Tensor3::Tensor3(Index n1, Index n2, Index n3, double fill) : shape_{n1, n2, n3} {
    check_dims(n1, n2, n3);
    data_.assign(static_cast<std::size_t>(shape_.numel()), fill);
}

Tensor3::Tensor3(Index n1, Index n2, Index n3, std::vector<double> values)
    : shape_{n1, n2, n3}, data_(std::move(values)) {
    check_dims(n1, n2, n3);
    if (static_cast<Index>(data_.size()) != shape_.numel()) {
        throw ShapeMismatch("value count " + std::to_string(data_.size()) + " does not match " +
                            std::to_string(shape_.numel()));
    }
}

Tensor3 Tensor3::identity(Index n, Index n3) {
    Tensor3 t(n, n, n3);
    for (Index i = 0; i < n; ++i) {
        t(i, i, 0) = 1.0;
    }
    return t;
}

Eigen::MatrixXd Tensor3::frontal_slice(Index k) const {
    Eigen::MatrixXd m(shape_.n1, shape_.n2);
    for (Index i = 0; i < shape_.n1; ++i) {
        for (Index j = 0; j < shape_.n2; ++j) {
            m(i, j) = (*this)(i, j, k);
        }
    }
    return m;
}

void Tensor3::set_frontal_slice(Index k, const Eigen::MatrixXd& m) {
    if (m.rows() != shape_.n1 || m.cols() != shape_.n2) {
        throw ShapeMismatch("frontal slice shape");
    }
    for (Index i = 0; i < shape_.n1; ++i) {
        for (Index j = 0; j < shape_.n2; ++j) {
            (*this)(i, j, k) = m(i, j);
        }
    }
}

Tensor3 Tensor3::t_transpose() const {
    Tensor3 out(shape_.n2, shape_.n1, shape_.n3);
    for (Index i = 0; i < shape_.n1; ++i) {
        for (Index j = 0; j < shape_.n2; ++j) {
            out(j, i, 0) = (*this)(i, j, 0);
            for (Index k = 1; k < shape_.n3; ++k) {
                out(j, i, shape_.n3 - k) = (*this)(i, j, k);
            }
        }
    }
    return out;
}

double Tensor3::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) {
        s += v * v;
    }
    return std::sqrt(s);
}

bool Tensor3::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor3& Tensor3::operator+=(const Tensor3& rhs) {
    require_same_shape(*this, rhs, "operator+=");
    for (std::size_t n = 0; n < data_.size(); ++n) {
        data_[n] += rhs.data_[n];
    }
    return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& rhs) {
    require_same_shape(*this, rhs, "operator-=");
    for (std::size_t n = 0; n < data_.size(); ++n) {
        data_[n] -= rhs.data_[n];
    }
    return *this;
}

Tensor3& Tensor3::operator*=(double s) {
    for (double& v : data_) {
        v *= s;
    }
    return *this;
}

void require_same_shape(const Tensor3& a, const Tensor3& b, const char* context) {
    if (!(a.shape() == b.shape())) {
        auto fmt = [](Shape3 s) {
            return std::to_string(s.n1) + "x" + std::to_string(s.n2) + "x" + std::to_string(s.n3);
        };
        throw ShapeMismatch(std::string(context) + ": " + fmt(a.shape()) + " vs " + fmt(b.shape()));
    }
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t n = 0; n < av.size(); ++n) {
        m = std::max(m, std::abs(av[n] - bv[n]));
    }
    return m;
}

double relative_error(const Tensor3& a, const Tensor3& b) {
    const double diff = (a - b).frobenius_norm();
    const double ref = b.frobenius_norm();
    return ref > 0.0 ? diff / ref : diff;
}

} // namespace dutrpca
