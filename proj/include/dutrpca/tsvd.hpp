#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "dutrpca/tensor3.hpp"

namespace dutrpca {

using Complex = std::complex<double>;

/// Frontal slices of a tensor after the DFT along mode 3; slice i is frequency i.
struct FreqSlices {
    std::vector<Eigen::MatrixXcd> slices;

    Index n1() const { return slices.empty() ? 0 : slices.front().rows(); }
    Index n2() const { return slices.empty() ? 0 : slices.front().cols(); }
    Index n3() const { return static_cast<Index>(slices.size()); }
};

/**
 * Fourier-domain t-SVD factors.
 *
 * u_hat[i] (n1 x r) and v_hat[i] (n2 x r) have orthonormal columns and
 * sdiag(:, i) holds the descending singular values of frequency slice i.
 * Slices above n3/2 are the complex conjugates of their mirror partners, so
 * the spatial factors U() and V() are real.
 */
struct TSvdFactors {
    std::vector<Eigen::MatrixXcd> u_hat;
    std::vector<Eigen::MatrixXcd> v_hat;
    Eigen::MatrixXd sdiag;
    Index rank = 0;

    Tensor3 U() const;
    Tensor3 V() const;
};

/// Relative floor below which a slice singular value counts as zero.
inline constexpr double kSingularValueFloor = 1e-12;

/// Number of frequency slices that are decomposed explicitly; the rest are mirrored.
inline Index independent_slice_count(Index n3) { return n3 / 2 + 1; }

FreqSlices dft_mode3(const Tensor3& t);

/// Inverse DFT along mode 3. Throws SymmetryViolation when the result is not real.
Tensor3 idft_mode3(const FreqSlices& f);

Tensor3 t_product(const Tensor3& a, const Tensor3& b);

TSvdFactors t_svd(const Tensor3& t, Index rank);

/// Keeps the leading `rank` components of every slice.
TSvdFactors truncated(const TSvdFactors& factors, Index rank);

/// U * diag(S) * V^H assembled slice-wise and transformed back.
Tensor3 reconstruct(const TSvdFactors& factors);

/// (1/n3) * sum of all Fourier-domain singular values.
double tubal_nuclear_norm(const Tensor3& t);

/// Largest per-slice count of singular values above the relative floor.
Index tubal_rank(const Tensor3& t);

/// Rank-r hard truncation of every frequency slice.
Tensor3 truncated_tsvd_project(const Tensor3& t, Index rank);

/// Tensor singular value thresholding: each Fourier-domain singular value sigma
/// becomes max(sigma - n3 * tau, 0).
Tensor3 tsvt(const Tensor3& t, double tau, double* tnn_out = nullptr);

} // namespace dutrpca
