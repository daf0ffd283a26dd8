#pragma once

#include "dutrpca/tensor3.hpp"

namespace dutrpca {

/// Band PSNR reported for an exact match.
inline constexpr double kPsnrCap = 100.0;

struct Metrics {
    double psnr = 0.0;
    double ssim = 0.0;
    double sam = 0.0;
};

/// Mean over bands of 10*log10(peak^2 / MSE_band), each band capped at 100 dB.
double psnr(const Tensor3& ref, const Tensor3& est, double peak = 1.0);

/// Band-averaged single-scale SSIM, 11x11 Gaussian window (sigma 1.5), valid positions only.
double ssim(const Tensor3& ref, const Tensor3& est, double peak = 1.0);

/// Mean spectral angle in radians over positions where both spectra are nonzero.
double sam(const Tensor3& ref, const Tensor3& est);

Metrics evaluate(const Tensor3& ref, const Tensor3& est, double peak = 1.0);

} // namespace dutrpca
