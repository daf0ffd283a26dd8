#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dutrpca/tensor3.hpp"

namespace dutrpca {

enum class NoiseKind { NonIid, Stripe, Deadline, Impulse, Mixture, Gaussian, Blind };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& text);

/**
 * Declarative degradation recipe. Sigmas are on the 0-255 intensity scale.
 * Defaults follow the usual mixed-noise protocol for HSI benchmarks: band
 * sigma in [10, 70], stripe offsets within +-0.25, deadlines 1-3 columns wide,
 * salt-and-pepper impulses, a third of the bands afflicted by each structured kind.
 */
struct NoiseSpec {
    NoiseKind kind = NoiseKind::Gaussian;
    /// Fixed sigma for `gaussian`.
    double sigma = 30.0;
    /// Per-band sigma range for the non-i.i.d. base.
    double sigma_min = 10.0;
    double sigma_max = 70.0;
    /// Per-image sigma range for `blind`.
    double blind_min = 30.0;
    double blind_max = 70.0;
    double band_fraction = 1.0 / 3.0;
    /// Fraction of columns hit per affected band, drawn in [column_fraction_min, column_fraction_max].
    double column_fraction_min = 0.05;
    double column_fraction_max = 0.15;
    double stripe_offset = 0.25;
    int deadline_max_width = 3;
    double impulse_prob = 0.3;
    std::uint64_t seed = 0;

    void validate() const;

    /// key=value lines, one per field.
    std::map<std::string, std::string> to_key_values() const;
    static NoiseSpec from_key_values(const std::map<std::string, std::string>& kv);
};

/// What a degradation actually did, for reporting and checks.
struct NoiseRealization {
    Tensor3 noisy;
    std::vector<double> band_sigma;       ///< 0-1 scale Gaussian sigma per band
    std::vector<int> stripe_bands;
    std::vector<int> deadline_bands;
    std::vector<int> impulse_bands;
    /// (band, column) pairs zeroed by deadlines.
    std::vector<std::pair<int, int>> deadline_columns;
    long impulse_count = 0;
};

/// Throws RangeError unless every clean entry lies in [0, 1]. Output is not clipped.
NoiseRealization apply_noise_detailed(const Tensor3& clean, const NoiseSpec& spec);
Tensor3 apply_noise(const Tensor3& clean, const NoiseSpec& spec);

/**
 * Smooth synthetic hyperspectral scene in [0, 1]: a few endmember spectra
 * mixed by smooth abundance maps. Used for desk-scale fixtures.
 */
Tensor3 synthetic_scene(Index n1, Index n2, Index n3, std::uint64_t seed, int endmembers = 4);

} // namespace dutrpca
