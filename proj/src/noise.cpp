#include "dutrpca/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "dutrpca/errors.hpp"
#include "dutrpca/rng.hpp"

namespace dutrpca {

namespace {

constexpr std::pair<NoiseKind, const char*> kKindNames[] = {
    {NoiseKind::NonIid, "noniid"},     {NoiseKind::Stripe, "stripe"},     {NoiseKind::Deadline, "deadline"},
    {NoiseKind::Impulse, "impulse"},   {NoiseKind::Mixture, "mixture"},   {NoiseKind::Gaussian, "gaussian"},
    {NoiseKind::Blind, "blind"},
};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) {
            throw std::invalid_argument(text);
        }
        return v;
    } catch (const std::exception&) {
        throw InvalidArgument("noise key '" + key + "': not a number: " + text);
    }
}

// Distinct column indices, count = round(fraction * n2), at least 1 when fraction > 0.
std::vector<int> pick_columns(Index n2, double fraction, Rng& rng) {
    Index count = static_cast<Index>(std::lround(fraction * static_cast<double>(n2)));
    if (fraction > 0.0) {
        count = std::max<Index>(count, 1);
    }
    count = std::min(count, n2);
    std::vector<int> cols(static_cast<std::size_t>(n2));
    for (Index j = 0; j < n2; ++j) {
        cols[static_cast<std::size_t>(j)] = static_cast<int>(j);
    }
    for (Index i = 0; i < count; ++i) {
        const auto pick = static_cast<std::size_t>(rng.integer(i, n2 - 1));
        std::swap(cols[static_cast<std::size_t>(i)], cols[pick]);
    }
    cols.resize(static_cast<std::size_t>(count));
    std::sort(cols.begin(), cols.end());
    return cols;
}

std::vector<int> pick_bands(Index n3, double fraction, Rng& rng) {
    const Index count = std::min<Index>(n3, static_cast<Index>(std::lround(fraction * static_cast<double>(n3))));
    std::vector<int> bands(static_cast<std::size_t>(n3));
    for (Index k = 0; k < n3; ++k) {
        bands[static_cast<std::size_t>(k)] = static_cast<int>(k);
    }
    for (Index i = 0; i < count; ++i) {
        const auto pick = static_cast<std::size_t>(rng.integer(i, n3 - 1));
        std::swap(bands[static_cast<std::size_t>(i)], bands[pick]);
    }
    bands.resize(static_cast<std::size_t>(count));
    std::sort(bands.begin(), bands.end());
    return bands;
}

void add_band_gaussian(Tensor3& t, Index band, double sigma, Rng& rng) {
    for (Index i = 0; i < t.n1(); ++i) {
        for (Index j = 0; j < t.n2(); ++j) {
            t(i, j, band) += sigma * rng.normal();
        }
    }
}

void add_stripes(Tensor3& t, Index band, const NoiseSpec& s, Rng& rng) {
    const double fraction = rng.uniform(s.column_fraction_min, s.column_fraction_max);
    for (int col : pick_columns(t.n2(), fraction, rng)) {
        const double offset = rng.uniform(-s.stripe_offset, s.stripe_offset);
        for (Index i = 0; i < t.n1(); ++i) {
            t(i, col, band) += offset;
        }
    }
}

long add_impulses(Tensor3& t, Index band, const NoiseSpec& s, Rng& rng) {
    long hits = 0;
    for (Index i = 0; i < t.n1(); ++i) {
        for (Index j = 0; j < t.n2(); ++j) {
            if (rng.bernoulli(s.impulse_prob)) {
                t(i, j, band) = rng.bernoulli(0.5) ? 1.0 : 0.0;
                ++hits;
            }
        }
    }
    return hits;
}

void add_deadlines(Tensor3& t, Index band, const NoiseSpec& s, Rng& rng, NoiseRealization& r) {
    const double fraction = rng.uniform(s.column_fraction_min, s.column_fraction_max);
    std::vector<int> hit;
    for (int col : pick_columns(t.n2(), fraction, rng)) {
        const int width = static_cast<int>(rng.integer(1, s.deadline_max_width));
        for (int w = 0; w < width && col + w < t.n2(); ++w) {
            hit.push_back(col + w);
        }
    }
    std::sort(hit.begin(), hit.end());
    hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
    for (int col : hit) {
        for (Index i = 0; i < t.n1(); ++i) {
            t(i, col, band) = 0.0;
        }
        r.deadline_columns.emplace_back(static_cast<int>(band), col);
    }
}

} // namespace

std::string to_string(NoiseKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

NoiseKind parse_noise_kind(const std::string& text) {
    for (const auto& [k, name] : kKindNames) {
        if (text == name) {
            return k;
        }
    }
    throw InvalidArgument("unknown noise kind '" + text + "'");
}

void NoiseSpec::validate() const {
    if (!(sigma >= 0.0) || !(sigma_min >= 0.0) || !(sigma_max >= sigma_min) || !(blind_min >= 0.0) ||
        !(blind_max >= blind_min)) {
        throw InvalidArgument("noise sigmas must be >= 0 with min <= max");
    }
    if (!in_unit(band_fraction) || !in_unit(column_fraction_min) || !in_unit(column_fraction_max) ||
        column_fraction_max < column_fraction_min || !in_unit(impulse_prob)) {
        throw InvalidArgument("noise fractions and probabilities must lie in [0, 1]");
    }
    if (!(stripe_offset >= 0.0) || deadline_max_width < 1) {
        throw InvalidArgument("stripe_offset must be >= 0 and deadline_max_width >= 1");
    }
}

std::map<std::string, std::string> NoiseSpec::to_key_values() const {
    return {
        {"kind", to_string(kind)},
        {"sigma", fmt(sigma)},
        {"sigma_min", fmt(sigma_min)},
        {"sigma_max", fmt(sigma_max)},
        {"blind_min", fmt(blind_min)},
        {"blind_max", fmt(blind_max)},
        {"band_fraction", fmt(band_fraction)},
        {"column_fraction_min", fmt(column_fraction_min)},
        {"column_fraction_max", fmt(column_fraction_max)},
        {"stripe_offset", fmt(stripe_offset)},
        {"deadline_max_width", std::to_string(deadline_max_width)},
        {"impulse_prob", fmt(impulse_prob)},
        {"seed", std::to_string(seed)},
    };
}

NoiseSpec NoiseSpec::from_key_values(const std::map<std::string, std::string>& kv) {
    NoiseSpec s;
    for (const auto& [key, value] : kv) {
        if (key == "kind") {
            s.kind = parse_noise_kind(value);
        } else if (key == "sigma") {
            s.sigma = parse_double(key, value);
        } else if (key == "sigma_min") {
            s.sigma_min = parse_double(key, value);
        } else if (key == "sigma_max") {
            s.sigma_max = parse_double(key, value);
        } else if (key == "blind_min") {
            s.blind_min = parse_double(key, value);
        } else if (key == "blind_max") {
            s.blind_max = parse_double(key, value);
        } else if (key == "band_fraction") {
            s.band_fraction = parse_double(key, value);
        } else if (key == "column_fraction_min") {
            s.column_fraction_min = parse_double(key, value);
        } else if (key == "column_fraction_max") {
            s.column_fraction_max = parse_double(key, value);
        } else if (key == "column_fraction") {
            s.column_fraction_min = s.column_fraction_max = parse_double(key, value);
        } else if (key == "stripe_offset") {
            s.stripe_offset = parse_double(key, value);
        } else if (key == "deadline_max_width") {
            s.deadline_max_width = static_cast<int>(parse_double(key, value));
        } else if (key == "impulse_prob") {
            s.impulse_prob = parse_double(key, value);
        } else if (key == "seed") {
            s.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else {
            throw InvalidArgument("unknown noise key '" + key + "'");
        }
    }
    s.validate();
    return s;
}

NoiseRealization apply_noise_detailed(const Tensor3& clean, const NoiseSpec& spec) {
    spec.validate();
    for (double v : clean.values()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw RangeError("clean entries must lie in [0, 1]");
        }
    }
    Rng rng(spec.seed);
    NoiseRealization r;
    r.noisy = clean;
    const Index n3 = clean.n3();

    if (spec.kind == NoiseKind::Gaussian || spec.kind == NoiseKind::Blind) {
        const double sigma = spec.kind == NoiseKind::Gaussian ? spec.sigma / 255.0
                                                              : rng.uniform(spec.blind_min, spec.blind_max) / 255.0;
        r.band_sigma.assign(static_cast<std::size_t>(n3), sigma);
        if (sigma > 0.0) {
            for (Index k = 0; k < n3; ++k) {
                add_band_gaussian(r.noisy, k, sigma, rng);
            }
        }
        return r;
    }

    for (Index k = 0; k < n3; ++k) {
        const double sigma = rng.uniform(spec.sigma_min, spec.sigma_max) / 255.0;
        r.band_sigma.push_back(sigma);
        add_band_gaussian(r.noisy, k, sigma, rng);
    }

    if (spec.kind == NoiseKind::Mixture) {
        for (Index k = 0; k < n3; ++k) {
            if (rng.bernoulli(spec.band_fraction)) {
                r.stripe_bands.push_back(static_cast<int>(k));
            }
            if (rng.bernoulli(spec.band_fraction)) {
                r.impulse_bands.push_back(static_cast<int>(k));
            }
            if (rng.bernoulli(spec.band_fraction)) {
                r.deadline_bands.push_back(static_cast<int>(k));
            }
        }
    } else if (spec.kind == NoiseKind::Stripe) {
        r.stripe_bands = pick_bands(n3, spec.band_fraction, rng);
    } else if (spec.kind == NoiseKind::Impulse) {
        r.impulse_bands = pick_bands(n3, spec.band_fraction, rng);
    } else if (spec.kind == NoiseKind::Deadline) {
        r.deadline_bands = pick_bands(n3, spec.band_fraction, rng);
    }

    // Deadlines go last so their columns stay exactly zero.
    for (int k : r.stripe_bands) {
        add_stripes(r.noisy, k, spec, rng);
    }
    for (int k : r.impulse_bands) {
        r.impulse_count += add_impulses(r.noisy, k, spec, rng);
    }
    for (int k : r.deadline_bands) {
        add_deadlines(r.noisy, k, spec, rng, r);
    }
    return r;
}

Tensor3 apply_noise(const Tensor3& clean, const NoiseSpec& spec) { return apply_noise_detailed(clean, spec).noisy; }

Tensor3 synthetic_scene(Index n1, Index n2, Index n3, std::uint64_t seed, int endmembers) {
    if (endmembers < 1) {
        throw InvalidArgument("synthetic_scene: endmembers must be >= 1");
    }
    Rng rng(seed);
    const auto e = static_cast<std::size_t>(endmembers);
    // Smooth spectra: a baseline plus two Gaussian bumps each.
    std::vector<std::vector<double>> spectra(e, std::vector<double>(static_cast<std::size_t>(n3)));
    for (auto& s : spectra) {
        const double base = rng.uniform(0.1, 0.4);
        const double c1 = rng.uniform(0.0, 1.0), c2 = rng.uniform(0.0, 1.0);
        const double a1 = rng.uniform(0.2, 0.5), a2 = rng.uniform(0.1, 0.4);
        const double w1 = rng.uniform(0.1, 0.3), w2 = rng.uniform(0.1, 0.3);
        for (Index k = 0; k < n3; ++k) {
            const double x = n3 > 1 ? static_cast<double>(k) / static_cast<double>(n3 - 1) : 0.5;
            s[static_cast<std::size_t>(k)] = base + a1 * std::exp(-std::pow((x - c1) / w1, 2)) +
                                             a2 * std::exp(-std::pow((x - c2) / w2, 2));
        }
    }
    // Abundances: softmax of smooth random fields built from low-frequency cosines.
    std::vector<Eigen::MatrixXd> fields(e, Eigen::MatrixXd::Zero(n1, n2));
    for (auto& f : fields) {
        for (int term = 0; term < 3; ++term) {
            const double fx = rng.uniform(0.5, 2.5), fy = rng.uniform(0.5, 2.5);
            const double px = rng.uniform(0.0, 2.0 * std::numbers::pi), py = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double amp = rng.uniform(0.5, 2.0);
            for (Index i = 0; i < n1; ++i) {
                for (Index j = 0; j < n2; ++j) {
                    const double u = static_cast<double>(i) / static_cast<double>(std::max<Index>(n1, 2) - 1);
                    const double v = static_cast<double>(j) / static_cast<double>(std::max<Index>(n2, 2) - 1);
                    f(i, j) += amp * std::cos(std::numbers::pi * fx * u + px) * std::cos(std::numbers::pi * fy * v + py);
                }
            }
        }
    }
    Tensor3 out(n1, n2, n3);
    for (Index i = 0; i < n1; ++i) {
        for (Index j = 0; j < n2; ++j) {
            double z = 0.0;
            std::vector<double> w(e);
            for (std::size_t m = 0; m < e; ++m) {
                w[m] = std::exp(2.0 * fields[m](i, j));
                z += w[m];
            }
            for (Index k = 0; k < n3; ++k) {
                double v = 0.0;
                for (std::size_t m = 0; m < e; ++m) {
                    v += w[m] / z * spectra[m][static_cast<std::size_t>(k)];
                }
                out(i, j, k) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return out;
}

} // namespace dutrpca
