#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dutrpca/config_file.hpp"
#include "dutrpca/noise.hpp"
#include "dutrpca/unfolding.hpp"

namespace dutrpca {

/// Seeded set of synthetic clean scenes and their degraded versions.
struct FixtureSpec {
    Index n1 = 8;
    Index n2 = 8;
    Index n3 = 8;
    int count = 32;
    std::uint64_t seed = 0;
    NoiseSpec noise;

    FixtureSpec() { noise.kind = NoiseKind::Mixture; }
};

std::vector<TrainingSample> make_fixture(const FixtureSpec& spec);

struct AblationConfig {
    Index patch = 8;
    Index bands = 8;
    int train_patches = 32;
    int val_patches = 8;
    long steps = 200;
    int batch = 4;
    double lr = 1e-2;
    std::uint64_t seed = 0;
    int base_channels = 8;
    Index rank = 0;
    int stages_min = 2;
    int stages_max = 6;
    /// Stage count used for the module-toggle rows.
    int module_stages = 4;
    NoiseSpec noise;

    AblationConfig() { noise.kind = NoiseKind::Mixture; }

    void validate() const;
    /// Keys match the field names; noise keys carry a "noise." prefix.
    static AblationConfig from_key_values(const KeyValues& kv);
};

struct AblationRow {
    std::string label;
    int stages = 0;
    bool use_tsvd = true;
    bool use_topk = true;
    double noisy_psnr = 0.0;
    double psnr = 0.0;
    /// NaN when the patch is smaller than the SSIM window.
    double ssim = 0.0;
    double sam = 0.0;
    double final_loss = 0.0;
};

/// Train one configuration on the training fixture and score it on the held-out fixture.
AblationRow run_configuration(const AblationConfig& cfg, const std::string& label, int stages, bool use_tsvd,
                              bool use_topk);

/// Full model for K = stages_min..stages_max.
std::vector<AblationRow> run_stage_sweep(const AblationConfig& cfg);

/// K = module_stages with rows none, +tsvd, +topk, both.
std::vector<AblationRow> run_module_ablation(const AblationConfig& cfg);

/// CSV with header label,stages,tsvd,topk,noisy_psnr,psnr,ssim,sam,final_loss.
void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

/// Standalone SVG line plot of PSNR against stage count.
void write_stage_plot_svg(std::ostream& os, const std::vector<AblationRow>& rows);

} // namespace dutrpca
