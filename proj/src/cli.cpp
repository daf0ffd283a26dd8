#include "dutrpca/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "dutrpca/ablation.hpp"
#include "dutrpca/checkpoint.hpp"
#include "dutrpca/cube_io.hpp"
#include "dutrpca/errors.hpp"
#include "dutrpca/metrics.hpp"
#include "dutrpca/noise.hpp"
#include "dutrpca/trpca.hpp"

namespace dutrpca {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Shape3 parse_size(const std::string& text) {
    Shape3 s{};
    char x1 = 0, x2 = 0;
    long a = 0, b = 0, c = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%ld%c%ld%c%ld%c", &a, &x1, &b, &x2, &c, &tail) != 5 || x1 != 'x' || x2 != 'x' ||
        a < 1 || b < 1 || c < 1) {
        throw InvalidArgument("size must look like N1xN2xN3, got '" + text + "'");
    }
    s.n1 = a;
    s.n2 = b;
    s.n3 = c;
    return s;
}

TopKMode parse_topk_mode(const std::string& s) {
    if (s == "learned") {
        return TopKMode::Learned;
    }
    if (s == "fixed") {
        return TopKMode::Fixed;
    }
    if (s == "disabled") {
        return TopKMode::Disabled;
    }
    throw InvalidArgument("topk_mode must be learned, fixed or disabled");
}

// Noise flags shared by synthesize and make-fixture; unset flags keep the config/default value.
struct NoiseFlags {
    std::string config;
    std::string kind;
    std::optional<double> sigma, sigma_min, sigma_max, blind_min, blind_max, band_fraction, column_fraction,
        stripe_offset, impulse_prob;
    std::optional<int> deadline_max_width;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App& cmd) {
        cmd.add_option("--noise-config", config, "key=value noise file");
        cmd.add_option("--kind", kind, "noniid|stripe|deadline|impulse|mixture|gaussian|blind");
        cmd.add_option("--sigma", sigma, "gaussian sigma (0-255 scale)");
        cmd.add_option("--sigma-min", sigma_min);
        cmd.add_option("--sigma-max", sigma_max);
        cmd.add_option("--blind-min", blind_min);
        cmd.add_option("--blind-max", blind_max);
        cmd.add_option("--band-fraction", band_fraction);
        cmd.add_option("--column-fraction", column_fraction);
        cmd.add_option("--stripe-offset", stripe_offset);
        cmd.add_option("--deadline-max-width", deadline_max_width);
        cmd.add_option("--impulse-prob", impulse_prob);
        cmd.add_option("--seed", seed);
    }

    NoiseSpec build(const std::string& default_kind) const {
        KeyValues kv = config.empty() ? KeyValues{} : read_key_values_file(config);
        if (!kv.count("kind")) {
            kv["kind"] = default_kind;
        }
        auto set = [&kv](const char* key, const auto& v) {
            if (v) {
                kv[key] = exact(static_cast<double>(*v));
            }
        };
        if (!kind.empty()) {
            kv["kind"] = kind;
        }
        set("sigma", sigma);
        set("sigma_min", sigma_min);
        set("sigma_max", sigma_max);
        set("blind_min", blind_min);
        set("blind_max", blind_max);
        set("band_fraction", band_fraction);
        set("column_fraction", column_fraction);
        set("stripe_offset", stripe_offset);
        set("impulse_prob", impulse_prob);
        if (deadline_max_width) {
            kv["deadline_max_width"] = std::to_string(*deadline_max_width);
        }
        if (seed) {
            kv["seed"] = std::to_string(*seed);
        }
        return NoiseSpec::from_key_values(kv);
    }
};

void print_realization(std::ostream& out, const NoiseSpec& spec, const NoiseRealization& r) {
    for (const auto& [k, v] : spec.to_key_values()) {
        out << k << " = " << v << '\n';
    }
    auto list = [&out](const char* name, const std::vector<int>& v) {
        out << name << " =";
        for (std::size_t i = 0; i < v.size(); ++i) {
            out << (i ? "," : " ") << v[i];
        }
        out << '\n';
    };
    out << "band_sigma =";
    for (std::size_t i = 0; i < r.band_sigma.size(); ++i) {
        out << (i ? "," : " ") << num(r.band_sigma[i] * 255.0, 4);
    }
    out << '\n';
    list("stripe_bands", r.stripe_bands);
    list("impulse_bands", r.impulse_bands);
    list("deadline_bands", r.deadline_bands);
    out << "deadline_columns = " << r.deadline_columns.size() << '\n';
    out << "impulse_entries = " << r.impulse_count << '\n';
}

Index resolve_rank(const UnfoldingConfig& cfg, const Tensor3& sample) {
    return cfg.rank > 0 ? cfg.rank : default_rank(sample.n1(), sample.n2());
}

int cmd_synthesize(const std::string& in, const std::string& out_path, const NoiseFlags& flags, std::ostream& out) {
    const NoiseSpec spec = flags.build("gaussian");
    const Tensor3 clean = read_cube_file(in);
    const NoiseRealization r = apply_noise_detailed(clean, spec);
    write_cube_file(out_path, r.noisy);
    print_realization(out, spec, r);
    return kExitOk;
}

int cmd_scene(const std::string& out_path, const std::string& size, std::uint64_t seed, int endmembers,
              std::ostream& out) {
    const Shape3 s = parse_size(size);
    write_cube_file(out_path, synthetic_scene(s.n1, s.n2, s.n3, seed, endmembers));
    out << "wrote " << out_path << " (" << s.n1 << 'x' << s.n2 << 'x' << s.n3 << ")\n";
    return kExitOk;
}

int cmd_planted(const std::string& prefix, const std::string& size, long rank, double fraction, std::uint64_t seed,
                std::ostream& out) {
    const Shape3 s = parse_size(size);
    const PlantedProblem p = planted_problem(s.n1, s.n2, s.n3, rank, fraction, seed);
    write_cube_file(prefix + ".x.cube", p.X);
    write_cube_file(prefix + ".l.cube", p.L);
    write_cube_file(prefix + ".s.cube", p.S);
    out << "wrote " << prefix << ".{x,l,s}.cube\n";
    return kExitOk;
}

int cmd_make_fixture(const std::string& dir, const std::string& size, int count, std::uint64_t seed,
                     const NoiseFlags& flags, std::ostream& out) {
    FixtureSpec fx;
    const Shape3 s = parse_size(size);
    fx.n1 = s.n1;
    fx.n2 = s.n2;
    fx.n3 = s.n3;
    fx.count = count;
    fx.seed = seed;
    fx.noise = flags.build("mixture");
    fs::create_directories(dir);
    const std::vector<TrainingSample> samples = make_fixture(fx);
    for (std::size_t n = 0; n < samples.size(); ++n) {
        char name[32];
        std::snprintf(name, sizeof name, "p%04zu", n);
        write_cube_file((fs::path(dir) / (std::string(name) + ".clean.cube")).string(), samples[n].clean);
        write_cube_file((fs::path(dir) / (std::string(name) + ".noisy.cube")).string(), samples[n].noisy);
    }
    out << "wrote " << samples.size() << " pairs to " << dir << '\n';
    return kExitOk;
}

int cmd_trpca(const std::string& in, const std::string& out_l, const std::string& out_s,
              std::optional<double> lambda, double lambda_l, std::optional<double> lambda_s, int max_iters,
              double tol, bool strict, std::ostream& out, std::ostream& err) {
    const Tensor3 x = read_cube_file(in);
    const double lam = lambda.value_or(default_lambda(x.n1(), x.n2(), x.n3()));
    TrpcaConfig cfg = TrpcaConfig::for_problem(lam, x.n3(), lambda_l);
    if (lambda_s) {
        cfg.lambda_S = *lambda_s;
    }
    cfg.max_iters = max_iters;
    cfg.tol = tol;
    const TrpcaResult r = trpca_solve(x, cfg);
    write_cube_file(out_l, r.L);
    write_cube_file(out_s, r.S);
    out << "lambda = " << exact(cfg.lambda) << "\nlambda_L = " << exact(cfg.lambda_L)
        << "\nlambda_S = " << exact(cfg.lambda_S) << "\niterations = " << r.iters
        << "\nconverged = " << (r.converged ? "true" : "false") << "\nresidual_tail =";
    const std::size_t from = r.residual_history.size() > 5 ? r.residual_history.size() - 5 : 0;
    for (std::size_t i = from; i < r.residual_history.size(); ++i) {
        out << (i > from ? "," : " ") << exact(r.residual_history[i]);
    }
    out << '\n';
    if (!r.converged && strict) {
        err << "error: not converged within " << cfg.max_iters << " iterations\n";
        return kExitRuntime;
    }
    return kExitOk;
}

int cmd_train(const std::string& dir, const std::string& config, const std::string& ckpt, const std::string& log_path,
              const std::string& val_dir, std::ostream& out) {
    const TrainSettings st = parse_train_settings(config.empty() ? KeyValues{} : read_key_values_file(config));
    const std::vector<TrainingSample> data = load_training_pairs(dir);
    std::vector<TrainingSample> val;
    if (!val_dir.empty()) {
        val = load_training_pairs(val_dir);
    }
    UnfoldingNet net(st.net, resolve_rank(st.net, data.front().noisy), st.init_seed);
    const TrainingLog log = train(net, data, st.train, val);
    save_checkpoint(ckpt, net);
    if (!log_path.empty()) {
        std::ofstream os(log_path, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw FormatError("cannot open '" + log_path + "' for writing");
        }
        log.write_csv(os);
    }
    out << "steps = " << log.rows.size() << '\n';
    if (!log.rows.empty()) {
        out << "final_loss = " << exact(log.rows.back().loss) << '\n';
    }
    out << "trainable_scalars = " << net.trainable_scalar_count() << '\n';
    return kExitOk;
}

int cmd_denoise(const std::string& in, const std::string& out_path, const std::string& ckpt,
                const std::string& config, std::ostream& out) {
    const TrainSettings st = parse_train_settings(config.empty() ? KeyValues{} : read_key_values_file(config));
    const Tensor3 y = read_cube_file(in);
    UnfoldingNet net(st.net, resolve_rank(st.net, y), st.init_seed);
    load_checkpoint(ckpt, net);
    write_cube_file(out_path, denoise(net, y));
    out << "wrote " << out_path << '\n';
    return kExitOk;
}

int cmd_eval(const std::string& ref_path, const std::string& est_path, std::ostream& out, std::ostream& err) {
    const Tensor3 ref = read_cube_file(ref_path);
    const Tensor3 est = read_cube_file(est_path);
    require_same_shape(ref, est, "eval");
    const double p = psnr(ref, est);
    const double a = sam(ref, est);
    std::string s;
    if (ref.n1() >= 11 && ref.n2() >= 11) {
        s = num(ssim(ref, est));
    } else {
        err << "note: ssim left empty, spatial size below the 11x11 window\n";
    }
    out << "psnr,ssim,sam\r\n" << num(p) << ',' << s << ',' << num(a) << "\r\n";
    return kExitOk;
}

int cmd_ablate(const std::string& config, const std::string& dir, std::optional<std::uint64_t> seed,
               std::optional<long> steps, std::ostream& out) {
    AblationConfig cfg = AblationConfig::from_key_values(config.empty() ? KeyValues{} : read_key_values_file(config));
    if (seed) {
        cfg.seed = *seed;
    }
    if (steps) {
        cfg.steps = *steps;
    }
    cfg.validate();
    fs::create_directories(dir);
    const std::vector<AblationRow> stage_rows = run_stage_sweep(cfg);
    const std::vector<AblationRow> module_rows = run_module_ablation(cfg);
    auto open = [&dir](const char* name) {
        std::ofstream os(fs::path(dir) / name, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw FormatError(std::string("cannot write ") + name);
        }
        return os;
    };
    {
        auto os = open("stages.csv");
        write_ablation_csv(os, stage_rows);
    }
    {
        auto os = open("modules.csv");
        write_ablation_csv(os, module_rows);
    }
    {
        auto os = open("stages.svg");
        write_stage_plot_svg(os, stage_rows);
    }
    write_ablation_csv(out, stage_rows);
    write_ablation_csv(out, module_rows);
    return kExitOk;
}

} // namespace

TrainSettings parse_train_settings(const KeyValues& kv) {
    TrainSettings st;
    KeyReader r(kv);
    long rank = 0;
    std::string mode;
    r.take_int("stages", st.net.stages);
    r.take_long("rank", rank);
    st.net.rank = rank;
    r.take_bool("use_tsvd", st.net.use_tsvd);
    r.take_double("residual_weight_init", st.net.residual_weight_init);
    r.take_int("base_channels", st.net.sparse.base_channels);
    r.take_int("levels", st.net.sparse.levels);
    r.take_int("attention_heads", st.net.sparse.attention_heads);
    r.take_double("topk_ratio_init", st.net.sparse.topk_ratio_init);
    if (r.take("topk_mode", mode)) {
        st.net.sparse.topk_mode = parse_topk_mode(mode);
    }
    r.take_double("fixed_ratio", st.net.sparse.fixed_ratio);
    r.take_int("epochs", st.train.epochs);
    r.take_int("batch", st.train.batch);
    r.take_double("lr", st.train.lr);
    r.take_u64("seed", st.train.seed);
    r.take_long("max_steps", st.train.max_steps);
    r.take_longs("lr_milestones", st.train.lr_milestones);
    r.take_double("lr_gamma", st.train.lr_gamma);
    r.take_u64("init_seed", st.init_seed);
    r.finish();
    st.net.validate();
    return st;
}

std::vector<TrainingSample> load_training_pairs(const std::string& dir) {
    if (!fs::is_directory(dir)) {
        throw FormatError("'" + dir + "' is not a directory");
    }
    const std::string suffix = ".clean.cube";
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string f = entry.path().filename().string();
        if (f.size() > suffix.size() && f.compare(f.size() - suffix.size(), suffix.size(), suffix) == 0) {
            names.push_back(f.substr(0, f.size() - suffix.size()));
        }
    }
    if (names.empty()) {
        throw FormatError("no *.clean.cube files in '" + dir + "'");
    }
    std::sort(names.begin(), names.end());
    std::vector<TrainingSample> out;
    for (const auto& n : names) {
        const fs::path noisy = fs::path(dir) / (n + ".noisy.cube");
        if (!fs::exists(noisy)) {
            throw FormatError("missing " + noisy.string());
        }
        TrainingSample s{read_cube_file(noisy.string()), read_cube_file((fs::path(dir) / (n + suffix)).string())};
        if (!(s.noisy.shape() == s.clean.shape()) || !(s.clean.shape() == (out.empty() ? s.clean : out[0].clean).shape())) {
            throw DataShapeMismatch("pair '" + n + "' does not match the shape of the other samples");
        }
        out.push_back(std::move(s));
    }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tensor robust PCA and deep-unfolding hyperspectral denoising", "dutrpca"};
    app.require_subcommand(1);

    NoiseFlags syn_noise;
    std::string syn_in, syn_out;
    auto* syn = app.add_subcommand("synthesize", "Degrade a clean cube with a noise recipe");
    syn->add_option("input", syn_in)->required();
    syn->add_option("output", syn_out)->required();
    syn_noise.attach(*syn);

    std::string scene_out, scene_size = "32x32x16";
    std::uint64_t scene_seed = 0;
    int scene_endmembers = 4;
    auto* scene = app.add_subcommand("scene", "Write a smooth synthetic clean cube");
    scene->add_option("output", scene_out)->required();
    scene->add_option("--size", scene_size, "N1xN2xN3");
    scene->add_option("--seed", scene_seed);
    scene->add_option("--endmembers", scene_endmembers);

    std::string pl_prefix, pl_size = "30x30x10";
    long pl_rank = 2;
    double pl_fraction = 0.05;
    std::uint64_t pl_seed = 0;
    auto* planted = app.add_subcommand("planted", "Write a planted low-rank + sparse problem (.x/.l/.s cubes)");
    planted->add_option("prefix", pl_prefix)->required();
    planted->add_option("--size", pl_size);
    planted->add_option("--rank", pl_rank);
    planted->add_option("--sparse-fraction", pl_fraction);
    planted->add_option("--seed", pl_seed);

    NoiseFlags fx_noise;
    std::string fx_dir, fx_size = "8x8x8";
    int fx_count = 32;
    std::uint64_t fx_seed = 0;
    auto* fixture = app.add_subcommand("make-fixture", "Write clean/noisy synthetic training pairs");
    fixture->add_option("dir", fx_dir)->required();
    fixture->add_option("--size", fx_size);
    fixture->add_option("--count", fx_count);
    fixture->add_option("--fixture-seed", fx_seed);
    fx_noise.attach(*fixture);

    std::string tr_in, tr_l, tr_s;
    std::optional<double> tr_lambda, tr_lambda_s;
    double tr_lambda_l = 0.01;
    int tr_iters = 500;
    double tr_tol = 1e-7;
    bool tr_strict = false;
    auto* trpca = app.add_subcommand("trpca", "Classical low-rank + sparse decomposition");
    trpca->add_option("input", tr_in)->required();
    trpca->add_option("out_L", tr_l)->required();
    trpca->add_option("out_S", tr_s)->required();
    trpca->add_option("--lambda", tr_lambda, "sparsity weight (default 1/sqrt(max(n1,n2)*n3))");
    trpca->add_option("--lambda-L", tr_lambda_l, "low-rank threshold");
    trpca->add_option("--lambda-S", tr_lambda_s, "sparse threshold (default lambda*n3*lambda_L)");
    trpca->add_option("--max-iters", tr_iters);
    trpca->add_option("--tol", tr_tol);
    trpca->add_flag("--strict", tr_strict, "exit 1 when max-iters is reached without converging");

    std::string t_dir, t_config, t_ckpt, t_log, t_val;
    auto* trn = app.add_subcommand("train", "Train the unfolding network on cube pairs");
    trn->add_option("data_dir", t_dir)->required();
    trn->add_option("--config", t_config, "key=value training config");
    trn->add_option("--out", t_ckpt, "checkpoint path")->required();
    trn->add_option("--log", t_log, "CSV training log");
    trn->add_option("--val-dir", t_val, "held-out pairs for per-epoch PSNR");

    std::string d_in, d_out, d_ckpt, d_config;
    auto* den = app.add_subcommand("denoise", "Apply a trained checkpoint to a cube");
    den->add_option("input", d_in)->required();
    den->add_option("output", d_out)->required();
    den->add_option("--checkpoint", d_ckpt)->required();
    den->add_option("--config", d_config, "the config used for training");

    std::string e_ref, e_est;
    auto* ev = app.add_subcommand("eval", "Print PSNR, SSIM, SAM as CSV");
    ev->add_option("reference", e_ref)->required();
    ev->add_option("estimate", e_est)->required();

    std::string a_config, a_dir;
    std::optional<std::uint64_t> a_seed;
    std::optional<long> a_steps;
    auto* abl = app.add_subcommand("ablate", "Stage-count sweep and module toggles");
    abl->add_option("--config", a_config, "key=value ablation config");
    abl->add_option("--out", a_dir, "output directory")->required();
    abl->add_option("--seed", a_seed);
    abl->add_option("--steps", a_steps);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*syn) {
            return cmd_synthesize(syn_in, syn_out, syn_noise, out);
        }
        if (*scene) {
            return cmd_scene(scene_out, scene_size, scene_seed, scene_endmembers, out);
        }
        if (*planted) {
            return cmd_planted(pl_prefix, pl_size, pl_rank, pl_fraction, pl_seed, out);
        }
        if (*fixture) {
            return cmd_make_fixture(fx_dir, fx_size, fx_count, fx_seed, fx_noise, out);
        }
        if (*trpca) {
            return cmd_trpca(tr_in, tr_l, tr_s, tr_lambda, tr_lambda_l, tr_lambda_s, tr_iters, tr_tol, tr_strict, out,
                             err);
        }
        if (*trn) {
            return cmd_train(t_dir, t_config, t_ckpt, t_log, t_val, out);
        }
        if (*den) {
            return cmd_denoise(d_in, d_out, d_ckpt, d_config, out);
        }
        if (*ev) {
            return cmd_eval(e_ref, e_est, out, err);
        }
        if (*abl) {
            return cmd_ablate(a_config, a_dir, a_seed, a_steps, out);
        }
    } catch (const ShapeMismatch& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataShapeMismatch& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace dutrpca
