#include "dutrpca/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "dutrpca/errors.hpp"
#include "dutrpca/metrics.hpp"

namespace dutrpca {

namespace {

constexpr std::uint64_t kSceneStride = 1000003;

std::string fixed(double v, int digits = 6) {
    if (std::isnan(v)) {
        return "";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

} // namespace

std::vector<TrainingSample> make_fixture(const FixtureSpec& spec) {
    if (spec.count < 1) {
        throw InvalidArgument("fixture count must be >= 1");
    }
    std::vector<TrainingSample> out;
    for (int n = 0; n < spec.count; ++n) {
        const std::uint64_t scene_seed = spec.seed * kSceneStride + static_cast<std::uint64_t>(n);
        Tensor3 clean = synthetic_scene(spec.n1, spec.n2, spec.n3, scene_seed);
        NoiseSpec noise = spec.noise;
        noise.seed = scene_seed ^ 0x9e3779b97f4a7c15ULL;
        out.push_back({apply_noise(clean, noise), std::move(clean)});
    }
    return out;
}

void AblationConfig::validate() const {
    if (patch < 1 || bands < 1 || train_patches < 1 || val_patches < 1 || steps < 1 || batch < 1 ||
        base_channels < 1) {
        throw InvalidArgument("ablation sizes, counts and steps must be >= 1");
    }
    if (!(lr >= 0.0)) {
        throw InvalidArgument("ablation lr must be >= 0");
    }
    if (stages_min < 1 || stages_max < stages_min || module_stages < 1) {
        throw InvalidArgument("ablation stage range must satisfy 1 <= stages_min <= stages_max");
    }
    if (rank < 0 || rank > patch) {
        throw InvalidArgument("ablation rank must lie in [0, patch]");
    }
    noise.validate();
}

AblationConfig AblationConfig::from_key_values(const KeyValues& kv) {
    AblationConfig cfg;
    KeyValues noise_kv;
    KeyValues own;
    for (const auto& [k, v] : kv) {
        if (k.rfind("noise.", 0) == 0) {
            noise_kv[k.substr(6)] = v;
        } else {
            own[k] = v;
        }
    }
    KeyReader r(own);
    long patch = cfg.patch, bands = cfg.bands, rank = cfg.rank;
    r.take_long("patch", patch);
    r.take_long("bands", bands);
    r.take_long("rank", rank);
    cfg.patch = patch;
    cfg.bands = bands;
    cfg.rank = rank;
    r.take_int("train_patches", cfg.train_patches);
    r.take_int("val_patches", cfg.val_patches);
    r.take_long("steps", cfg.steps);
    r.take_int("batch", cfg.batch);
    r.take_double("lr", cfg.lr);
    r.take_u64("seed", cfg.seed);
    r.take_int("base_channels", cfg.base_channels);
    r.take_int("stages_min", cfg.stages_min);
    r.take_int("stages_max", cfg.stages_max);
    r.take_int("module_stages", cfg.module_stages);
    r.finish();
    if (!noise_kv.count("kind")) {
        noise_kv["kind"] = "mixture";
    }
    cfg.noise = NoiseSpec::from_key_values(noise_kv);
    cfg.validate();
    return cfg;
}

AblationRow run_configuration(const AblationConfig& cfg, const std::string& label, int stages, bool use_tsvd,
                              bool use_topk) {
    cfg.validate();
    FixtureSpec fx;
    fx.n1 = fx.n2 = cfg.patch;
    fx.n3 = cfg.bands;
    fx.noise = cfg.noise;
    fx.count = cfg.train_patches;
    fx.seed = 2 * cfg.seed;
    const std::vector<TrainingSample> train_set = make_fixture(fx);
    fx.count = cfg.val_patches;
    fx.seed = 2 * cfg.seed + 1;
    const std::vector<TrainingSample> val_set = make_fixture(fx);

    UnfoldingConfig ucfg;
    ucfg.stages = stages;
    ucfg.use_tsvd = use_tsvd;
    ucfg.sparse.base_channels = cfg.base_channels;
    ucfg.sparse.topk_mode = use_topk ? TopKMode::Learned : TopKMode::Disabled;
    const Index rank = cfg.rank > 0 ? cfg.rank : default_rank(cfg.patch, cfg.patch);
    UnfoldingNet net(ucfg, rank, cfg.seed + 100);

    TrainConfig tcfg;
    tcfg.lr = cfg.lr;
    tcfg.batch = cfg.batch;
    tcfg.seed = cfg.seed + 200;
    tcfg.max_steps = cfg.steps;
    const long per_epoch = (cfg.train_patches + cfg.batch - 1) / cfg.batch;
    tcfg.epochs = static_cast<int>((cfg.steps + per_epoch - 1) / per_epoch);
    const TrainingLog log = train(net, train_set, tcfg);

    AblationRow row;
    row.label = label;
    row.stages = stages;
    row.use_tsvd = use_tsvd;
    row.use_topk = use_topk;
    row.final_loss = log.rows.back().loss;
    const bool with_ssim = cfg.patch >= 11;
    double noisy = 0.0, p = 0.0, s = 0.0, a = 0.0;
    for (const auto& sample : val_set) {
        const Tensor3 est = denoise(net, sample.noisy);
        noisy += psnr(sample.clean, sample.noisy);
        p += psnr(sample.clean, est);
        a += sam(sample.clean, est);
        if (with_ssim) {
            s += ssim(sample.clean, est);
        }
    }
    const double n = static_cast<double>(val_set.size());
    row.noisy_psnr = noisy / n;
    row.psnr = p / n;
    row.sam = a / n;
    row.ssim = with_ssim ? s / n : std::numeric_limits<double>::quiet_NaN();
    return row;
}

std::vector<AblationRow> run_stage_sweep(const AblationConfig& cfg) {
    std::vector<AblationRow> rows;
    for (int k = cfg.stages_min; k <= cfg.stages_max; ++k) {
        rows.push_back(run_configuration(cfg, "K=" + std::to_string(k), k, true, true));
    }
    return rows;
}

std::vector<AblationRow> run_module_ablation(const AblationConfig& cfg) {
    const int k = cfg.module_stages;
    return {
        run_configuration(cfg, "none", k, false, false),
        run_configuration(cfg, "+tsvd", k, true, false),
        run_configuration(cfg, "+topk", k, false, true),
        run_configuration(cfg, "both", k, true, true),
    };
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
    os << "label,stages,tsvd,topk,noisy_psnr,psnr,ssim,sam,final_loss\r\n";
    for (const auto& r : rows) {
        os << r.label << ',' << r.stages << ',' << (r.use_tsvd ? 1 : 0) << ',' << (r.use_topk ? 1 : 0) << ','
           << fixed(r.noisy_psnr) << ',' << fixed(r.psnr) << ',' << fixed(r.ssim) << ',' << fixed(r.sam) << ','
           << fixed(r.final_loss) << "\r\n";
    }
}

void write_stage_plot_svg(std::ostream& os, const std::vector<AblationRow>& rows) {
    if (rows.empty()) {
        throw InvalidArgument("stage plot needs at least one row");
    }
    constexpr double W = 480, H = 320, left = 60, right = 20, top = 30, bottom = 50;
    double lo = rows.front().psnr, hi = lo;
    int kmin = rows.front().stages, kmax = kmin;
    for (const auto& r : rows) {
        lo = std::min(lo, r.psnr);
        hi = std::max(hi, r.psnr);
        kmin = std::min(kmin, r.stages);
        kmax = std::max(kmax, r.stages);
    }
    const double pad = std::max(0.05, 0.1 * (hi - lo));
    lo -= pad;
    hi += pad;
    auto xpos = [&](int k) {
        return kmax == kmin ? left + (W - left - right) / 2
                            : left + (W - left - right) * (k - kmin) / static_cast<double>(kmax - kmin);
    };
    auto ypos = [&](double v) { return top + (H - top - bottom) * (hi - v) / (hi - lo); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << "PSNR vs stage count</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\"" << H - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
       << "\" stroke=\"black\"/>\n";
    for (int k = kmin; k <= kmax; ++k) {
        os << "<text x=\"" << fixed(xpos(k), 2) << "\" y=\"" << H - bottom + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << k << "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        os << "<text x=\"" << left - 6 << "\" y=\"" << fixed(ypos(v) + 4, 2)
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fixed(v, 2) << "</text>\n";
    }
    os << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 10
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">stages K</text>\n";
    os << "<text x=\"14\" y=\"" << (top + H - bottom) / 2 << "\" transform=\"rotate(-90 14 " << (top + H - bottom) / 2
       << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">PSNR (dB)</text>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        os << (i ? " " : "") << fixed(xpos(rows[i].stages), 2) << ',' << fixed(ypos(rows[i].psnr), 2);
    }
    os << "\"/>\n";
    for (const auto& r : rows) {
        os << "<circle cx=\"" << fixed(xpos(r.stages), 2) << "\" cy=\"" << fixed(ypos(r.psnr), 2)
           << "\" r=\"3.5\" fill=\"steelblue\"/>\n";
    }
    os << "</svg>\n";
}

} // namespace dutrpca
