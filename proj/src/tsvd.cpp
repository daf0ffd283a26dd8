#include "dutrpca/tsvd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "dutrpca/errors.hpp"

namespace dutrpca {

namespace {

// Twiddles exp(-2*pi*i*k/n), built so that w[n - k] == conj(w[k]) bit for bit.
// That makes the transform of a real tube exactly conjugate-symmetric.
class Twiddles {
public:
    explicit Twiddles(Index n) : n_(n), w_(static_cast<std::size_t>(n)), index_(static_cast<std::size_t>(n * n)) {
        for (Index k = 0; k <= n / 2; ++k) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            w_[k] = Complex(std::cos(angle), std::sin(angle));
        }
        w_[0] = Complex(1.0, 0.0);
        if (n % 2 == 0) {
            w_[n / 2] = Complex(-1.0, 0.0);
        }
        if (n % 4 == 0) {
            w_[n / 4] = Complex(0.0, -1.0);
        }
        for (Index k = n / 2 + 1; k < n; ++k) {
            w_[k] = std::conj(w_[n - k]);
        }
        for (Index f = 0; f < n; ++f) {
            for (Index c = 0; c < n; ++c) {
                index_[f * n + c] = static_cast<std::size_t>((f * c) % n);
            }
        }
    }

    /// exp(-2*pi*i*f*c/n)
    Complex operator()(Index f, Index c) const { return w_[index_[f * n_ + c]]; }

private:
    Index n_;
    std::vector<Complex> w_;
    std::vector<std::size_t> index_;
};

bool is_self_conjugate(Index slice, Index n3) { return slice == 0 || (n3 % 2 == 0 && slice == n3 / 2); }

struct SliceSvd {
    Eigen::MatrixXcd u;
    Eigen::VectorXd s;
    Eigen::MatrixXcd v;
};

// Self-conjugate slices are real matrices; decomposing them in real arithmetic
// keeps the singular vectors real so the mirrored factors stay symmetric.
SliceSvd slice_svd(const Eigen::MatrixXcd& m, bool real_slice) {
    SliceSvd out;
    if (real_slice) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(m.real(), Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.u = svd.matrixU().cast<Complex>();
        out.s = svd.singularValues();
        out.v = svd.matrixV().cast<Complex>();
    } else {
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        out.u = svd.matrixU();
        out.s = svd.singularValues();
        out.v = svd.matrixV();
    }
    if (!out.s.allFinite()) {
        throw NonFinite("slice SVD did not converge");
    }
    const double floor = out.s.size() > 0 ? kSingularValueFloor * out.s(0) : 0.0;
    for (Index j = 0; j < out.s.size(); ++j) {
        if (out.s(j) < floor) {
            out.s(j) = 0.0;
        }
    }
    return out;
}

void mirror_upper_slices(std::vector<Eigen::MatrixXcd>& slices) {
    const Index n3 = static_cast<Index>(slices.size());
    for (Index i = independent_slice_count(n3); i < n3; ++i) {
        slices[i] = slices[n3 - i].conjugate();
    }
}

void require_finite(const Tensor3& t, const char* context) {
    if (!t.all_finite()) {
        throw NonFinite(std::string(context) + ": input contains non-finite entries");
    }
}

void require_rank(const Tensor3& t, Index rank) {
    if (rank < 1 || rank > std::min(t.n1(), t.n2())) {
        throw InvalidArgument("rank " + std::to_string(rank) + " outside [1, " +
                              std::to_string(std::min(t.n1(), t.n2())) + "]");
    }
}

FreqSlices empty_slices(Index n1, Index n2, Index n3) {
    FreqSlices f;
    f.slices.assign(static_cast<std::size_t>(n3), Eigen::MatrixXcd::Zero(n1, n2));
    return f;
}

} // namespace

FreqSlices dft_mode3(const Tensor3& t) {
    const Index n1 = t.n1(), n2 = t.n2(), n3 = t.n3();
    FreqSlices f = empty_slices(n1, n2, n3);
    const Twiddles w(n3);
    const auto data = t.values();
    for (Index i = 0; i < n1; ++i) {
        for (Index j = 0; j < n2; ++j) {
            const double* tube = data.data() + (i * n2 + j) * n3;
            for (Index k = 0; k < n3; ++k) {
                double re = 0.0, im = 0.0;
                for (Index c = 0; c < n3; ++c) {
                    const Complex wc = w(k, c);
                    re += tube[c] * wc.real();
                    im += tube[c] * wc.imag();
                }
                f.slices[k](i, j) = Complex(re, im);
            }
        }
    }
    return f;
}

Tensor3 idft_mode3(const FreqSlices& f) {
    const Index n3 = f.n3();
    if (n3 < 1) {
        throw InvalidArgument("idft_mode3: no slices");
    }
    const Index n1 = f.n1(), n2 = f.n2();
    for (const auto& s : f.slices) {
        if (s.rows() != n1 || s.cols() != n2) {
            throw ShapeMismatch("idft_mode3: slices of unequal shape");
        }
    }
    const Twiddles w(n3);
    const double scale = 1.0 / static_cast<double>(n3);
    Tensor3 out(n1, n2, n3);
    double max_imag = 0.0;
    for (Index i = 0; i < n1; ++i) {
        for (Index j = 0; j < n2; ++j) {
            for (Index c = 0; c < n3; ++c) {
                double re = 0.0, im = 0.0;
                for (Index k = 0; k < n3; ++k) {
                    // multiply by conj(w) = exp(+2*pi*i*k*c/n3)
                    const Complex wc = w(k, c);
                    const Complex z = f.slices[k](i, j);
                    re += z.real() * wc.real() + z.imag() * wc.imag();
                    im += z.imag() * wc.real() - z.real() * wc.imag();
                }
                out(i, j, c) = re * scale;
                max_imag = std::max(max_imag, std::abs(im * scale));
            }
        }
    }
    const double norm = out.frobenius_norm();
    if (!(max_imag <= 1e-6 * norm)) {
        throw SymmetryViolation("inverse transform has imaginary residual " + std::to_string(max_imag) +
                                " against norm " + std::to_string(norm));
    }
    return out;
}

Tensor3 t_product(const Tensor3& a, const Tensor3& b) {
    if (a.n2() != b.n1() || a.n3() != b.n3()) {
        throw ShapeMismatch("t_product: inner dimension or tube length differ");
    }
    const FreqSlices fa = dft_mode3(a);
    const FreqSlices fb = dft_mode3(b);
    FreqSlices fc;
    fc.slices.resize(static_cast<std::size_t>(a.n3()));
    for (Index k = 0; k < independent_slice_count(a.n3()); ++k) {
        fc.slices[k] = fa.slices[k] * fb.slices[k];
    }
    mirror_upper_slices(fc.slices);
    return idft_mode3(fc);
}

TSvdFactors t_svd(const Tensor3& t, Index rank) {
    require_rank(t, rank);
    require_finite(t, "t_svd");
    const Index n3 = t.n3();
    const FreqSlices f = dft_mode3(t);

    TSvdFactors out;
    out.rank = rank;
    out.u_hat.resize(static_cast<std::size_t>(n3));
    out.v_hat.resize(static_cast<std::size_t>(n3));
    out.sdiag = Eigen::MatrixXd::Zero(rank, n3);
    for (Index k = 0; k < independent_slice_count(n3); ++k) {
        SliceSvd svd = slice_svd(f.slices[k], is_self_conjugate(k, n3));
        out.u_hat[k] = svd.u.leftCols(rank);
        out.v_hat[k] = svd.v.leftCols(rank);
        out.sdiag.col(k) = svd.s.head(rank);
    }
    for (Index k = independent_slice_count(n3); k < n3; ++k) {
        out.u_hat[k] = out.u_hat[n3 - k].conjugate();
        out.v_hat[k] = out.v_hat[n3 - k].conjugate();
        out.sdiag.col(k) = out.sdiag.col(n3 - k);
    }
    return out;
}

TSvdFactors truncated(const TSvdFactors& factors, Index rank) {
    if (rank < 1 || rank > factors.rank) {
        throw InvalidArgument("truncated: rank " + std::to_string(rank) + " outside [1, " +
                              std::to_string(factors.rank) + "]");
    }
    TSvdFactors out;
    out.rank = rank;
    out.sdiag = factors.sdiag.topRows(rank);
    for (std::size_t k = 0; k < factors.u_hat.size(); ++k) {
        out.u_hat.push_back(factors.u_hat[k].leftCols(rank));
        out.v_hat.push_back(factors.v_hat[k].leftCols(rank));
    }
    return out;
}

Tensor3 TSvdFactors::U() const {
    FreqSlices f;
    f.slices = u_hat;
    return idft_mode3(f);
}

Tensor3 TSvdFactors::V() const {
    FreqSlices f;
    f.slices = v_hat;
    return idft_mode3(f);
}

Tensor3 reconstruct(const TSvdFactors& factors) {
    const Index n3 = static_cast<Index>(factors.u_hat.size());
    FreqSlices f;
    f.slices.resize(static_cast<std::size_t>(n3));
    for (Index k = 0; k < independent_slice_count(n3); ++k) {
        const Eigen::VectorXcd s = factors.sdiag.col(k).cast<Complex>();
        f.slices[k] = factors.u_hat[k] * s.asDiagonal() * factors.v_hat[k].adjoint();
    }
    mirror_upper_slices(f.slices);
    return idft_mode3(f);
}

double tubal_nuclear_norm(const Tensor3& t) {
    require_finite(t, "tubal_nuclear_norm");
    const Index n3 = t.n3();
    const FreqSlices f = dft_mode3(t);
    double total = 0.0;
    for (Index k = 0; k < independent_slice_count(n3); ++k) {
        const SliceSvd svd = slice_svd(f.slices[k], is_self_conjugate(k, n3));
        const double multiplicity = is_self_conjugate(k, n3) ? 1.0 : 2.0;
        total += multiplicity * svd.s.sum();
    }
    return total / static_cast<double>(n3);
}

Index tubal_rank(const Tensor3& t) {
    require_finite(t, "tubal_rank");
    const Index n3 = t.n3();
    const FreqSlices f = dft_mode3(t);
    // Absolute floor relative to the largest singular value anywhere, so that
    // slices holding only round-off do not count.
    std::vector<Eigen::VectorXd> values;
    double global_max = 0.0;
    for (Index k = 0; k < independent_slice_count(n3); ++k) {
        values.push_back(slice_svd(f.slices[k], is_self_conjugate(k, n3)).s);
        if (values.back().size() > 0) {
            global_max = std::max(global_max, values.back()(0));
        }
    }
    Index rank = 0;
    for (const auto& s : values) {
        rank = std::max<Index>(rank, (s.array() > 1e-10 * global_max).count());
    }
    return rank;
}

Tensor3 truncated_tsvd_project(const Tensor3& t, Index rank) { return reconstruct(t_svd(t, rank)); }

Tensor3 tsvt(const Tensor3& t, double tau, double* tnn_out) {
    if (!(tau >= 0.0)) {
        throw InvalidArgument("tsvt: tau must be >= 0");
    }
    require_finite(t, "tsvt");
    const Index n3 = t.n3();
    const double threshold = static_cast<double>(n3) * tau;
    FreqSlices f = dft_mode3(t);
    double tnn = 0.0;
    for (Index k = 0; k < independent_slice_count(n3); ++k) {
        const bool self_conjugate = is_self_conjugate(k, n3);
        const SliceSvd svd = slice_svd(f.slices[k], self_conjugate);
        const Eigen::VectorXd shrunk = (svd.s.array() - threshold).max(0.0).matrix();
        tnn += (self_conjugate ? 1.0 : 2.0) * shrunk.sum();
        f.slices[k] = svd.u * shrunk.cast<Complex>().asDiagonal() * svd.v.adjoint();
    }
    if (tnn_out != nullptr) {
        *tnn_out = tnn / static_cast<double>(n3);
    }
    mirror_upper_slices(f.slices);
    return idft_mode3(f);
}

} // namespace dutrpca
