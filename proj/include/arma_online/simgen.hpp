#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "arma_online/model.hpp"

namespace arma_online::sim {

/// Seedable generator with a fixed, documented output: the std::mt19937_64
/// engine (bit-exact by the C++ standard), 53-bit uniform doubles and
/// Box-Muller normals. std distributions are avoided because their output
/// is implementation defined.
class Rng {
public:
    static constexpr const char* kAlgorithm = "mt19937_64+u53+box-muller";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (cached_) {
            const double v = *cached_;
            cached_.reset();
            return v;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 == 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        cached_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    std::optional<double> cached_;
};

struct GaussianNoise {
    double sigma;
};
struct UniformNoise {
    double lo;
    double hi;
};
/// eps_t ~ Normal(eps_{t-1}, sigma^2), eps_0 = 0.
struct CorrelatedGaussianNoise {
    double sigma;
};
/// Caller-supplied (possibly adversarial) noise; must cover burn-in + T steps.
struct CustomNoise {
    std::vector<double> values;
};

using NoiseSpec = std::variant<GaussianNoise, UniformNoise, CorrelatedGaussianNoise, CustomNoise>;

inline void validate_noise(const NoiseSpec& n) {
    std::visit(
        [](const auto& s) {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, GaussianNoise> || std::is_same_v<S, CorrelatedGaussianNoise>) {
                if (!(s.sigma > 0.0)) throw std::invalid_argument("noise sigma must be positive");
            } else if constexpr (std::is_same_v<S, UniformNoise>) {
                if (!(s.lo < s.hi)) throw std::invalid_argument("uniform noise needs lo < hi");
            } else {
                if (s.values.empty()) throw std::invalid_argument("custom noise sequence is empty");
            }
        },
        n);
}

/// Variance of one innovation, or nullopt when the spec does not fix it.
inline std::optional<double> noise_variance(const NoiseSpec& n) {
    if (auto* g = std::get_if<GaussianNoise>(&n)) return g->sigma * g->sigma;
    if (auto* u = std::get_if<UniformNoise>(&n)) return (u->hi - u->lo) * (u->hi - u->lo) / 12.0;
    if (auto* c = std::get_if<CorrelatedGaussianNoise>(&n)) return c->sigma * c->sigma;
    return std::nullopt;
}

struct ConstantSchedule {
    ArmaCoefficients coeffs;
};
/// coeffs(t) = end * (t / horizon) + start * (1 - t / horizon); extrapolates past the horizon.
struct LinearDriftSchedule {
    ArmaCoefficients start;
    ArmaCoefficients end;
    double horizon;
};
/// first for t <= switch_time, second afterwards.
struct AbruptSchedule {
    ArmaCoefficients first;
    ArmaCoefficients second;
    std::size_t switch_time;
};

class CoefficientSchedule {
public:
    using Kind = std::variant<ConstantSchedule, LinearDriftSchedule, AbruptSchedule>;

    /// Validates every endpoint. With enforce_beta_margin = false only the
    /// alpha bound is enforced (for configurations that deliberately leave
    /// the MA invertibility margin).
    explicit CoefficientSchedule(Kind kind, double epsilon_ma = 1e-9, bool enforce_beta_margin = true)
        : kind_(std::move(kind)), epsilon_ma_(epsilon_ma), enforce_beta_(enforce_beta_margin) {
        std::visit(
            [this](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ConstantSchedule>) {
                    check(s.coeffs);
                } else if constexpr (std::is_same_v<S, LinearDriftSchedule>) {
                    if (!(s.horizon > 0.0)) throw std::invalid_argument("drift horizon must be positive");
                    same_shape(s.start, s.end);
                    check(s.start);
                    check(s.end);
                } else {
                    same_shape(s.first, s.second);
                    check(s.first);
                    check(s.second);
                }
            },
            kind_);
    }

    /// Coefficients in force at time t (1-based).
    [[nodiscard]] ArmaCoefficients at(std::size_t t) const {
        return std::visit(
            [t](const auto& s) -> ArmaCoefficients {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ConstantSchedule>) {
                    return s.coeffs;
                } else if constexpr (std::is_same_v<S, LinearDriftSchedule>) {
                    const double w = static_cast<double>(t) / s.horizon;
                    ArmaCoefficients c = s.start;
                    for (std::size_t i = 0; i < c.alpha.size(); ++i)
                        c.alpha[i] = s.end.alpha[i] * w + s.start.alpha[i] * (1.0 - w);
                    for (std::size_t j = 0; j < c.beta.size(); ++j)
                        c.beta[j] = s.end.beta[j] * w + s.start.beta[j] * (1.0 - w);
                    return c;
                } else {
                    return t <= s.switch_time ? s.first : s.second;
                }
            },
            kind_);
    }

    /// Checks snapshots over t = 1..horizon. Endpoints of a drift are exact;
    /// interior points are sampled.
    void validate_over(std::size_t horizon) const {
        if (!std::holds_alternative<LinearDriftSchedule>(kind_)) return;
        constexpr std::size_t kSamples = 64;
        for (std::size_t s = 0; s <= kSamples; ++s) {
            const std::size_t t = 1 + (horizon - 1) * s / kSamples;
            try {
                check(at(t));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument("coefficient drift leaves the valid region at t = " + std::to_string(t) +
                                            ": " + e.what());
            }
        }
    }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t k() const { return at(1).k(); }
    [[nodiscard]] std::size_t q() const { return at(1).q(); }
    [[nodiscard]] bool enforces_beta_margin() const noexcept { return enforce_beta_; }

private:
    void check(const ArmaCoefficients& c) const { validate_coefficients(c, epsilon_ma_, enforce_beta_); }
    static void same_shape(const ArmaCoefficients& a, const ArmaCoefficients& b) {
        if (a.k() != b.k() || a.q() != b.q()) throw std::invalid_argument("schedule endpoints differ in (k, q)");
    }

    Kind kind_;
    double epsilon_ma_;
    bool enforce_beta_;
};

struct SignalTrace {
    std::vector<double> values;  // X_1..X_T
    std::vector<double> noises;  // eps_1..eps_T
    std::optional<CoefficientSchedule> schedule;
    std::optional<NoiseSpec> noise;
    std::uint64_t seed = 0;
    std::string rng = Rng::kAlgorithm;
};

struct GenerateOptions {
    /// Steps generated and discarded before X_1 (coefficients frozen at t = 1).
    std::size_t burn_in = 0;
};

/// Unrolls X_t = sum alpha_i(t) X_{t-i} + sum beta_j(t) eps_{t-j} + eps_t
/// from zero initial conditions. Deterministic in (schedule, noise, T, seed).
inline SignalTrace generate(const CoefficientSchedule& schedule, const NoiseSpec& noise, std::size_t horizon,
                            std::uint64_t seed, const GenerateOptions& opt = {}) {
    if (horizon == 0) throw std::invalid_argument("T must be >= 1");
    validate_noise(noise);
    schedule.validate_over(horizon);

    const std::size_t total = opt.burn_in + horizon;
    if (auto* c = std::get_if<CustomNoise>(&noise); c && c->values.size() < total)
        throw std::invalid_argument("custom noise sequence shorter than burn-in + T");
    std::vector<double> x(total, 0.0), eps(total, 0.0);
    Rng rng(seed);
    double prev_eps = 0.0;
    for (std::size_t s = 0; s < total; ++s) {
        double e = std::visit(
            [&](const auto& spec) -> double {
                using S = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<S, GaussianNoise>) return rng.normal(0.0, spec.sigma);
                else if constexpr (std::is_same_v<S, UniformNoise>) return rng.uniform(spec.lo, spec.hi);
                else if constexpr (std::is_same_v<S, CorrelatedGaussianNoise>) return rng.normal(prev_eps, spec.sigma);
                else return spec.values[s];
            },
            noise);
        prev_eps = e;
        eps[s] = e;
    }

    std::optional<ArmaCoefficients> frozen;
    if (std::holds_alternative<ConstantSchedule>(schedule.kind())) frozen = schedule.at(1);
    for (std::size_t s = 0; s < total; ++s) {
        const std::size_t t = s < opt.burn_in ? 1 : s - opt.burn_in + 1;
        const ArmaCoefficients c = frozen ? *frozen : schedule.at(t);
        double v = eps[s];
        for (std::size_t i = 1; i <= c.k() && i <= s; ++i) v += c.alpha[i - 1] * x[s - i];
        for (std::size_t j = 1; j <= c.q() && j <= s; ++j) v += c.beta[j - 1] * eps[s - j];
        x[s] = v;
    }

    SignalTrace out;
    out.values.assign(x.begin() + static_cast<std::ptrdiff_t>(opt.burn_in), x.end());
    out.noises.assign(eps.begin() + static_cast<std::ptrdiff_t>(opt.burn_in), eps.end());
    out.schedule = schedule;
    out.noise = noise;
    out.seed = seed;
    return out;
}

struct SettingOptions {
    /// Burn-in steps; nullopt means the per-setting default (200 for setting 1, else 0).
    std::optional<std::size_t> burn_in;
    /// Setting 2: drift over T instead of the published 10^4.
    bool rescale_drift = false;
};

struct SettingSpec {
    CoefficientSchedule schedule;
    NoiseSpec noise;
    std::size_t burn_in;
};

inline const ArmaCoefficients& setting1_coefficients() {
    static const ArmaCoefficients c{{0.6, -0.5, 0.4, -0.4, 0.3}, {0.3, -0.2}};
    return c;
}

/// The four synthetic benchmark configurations.
inline SettingSpec setting_spec(int n, std::size_t horizon, const SettingOptions& opt = {}) {
    const ArmaCoefficients second{{-0.4, -0.5, 0.4, 0.4, 0.1}, {-0.3, 0.2}};
    switch (n) {
        case 1:
            return {CoefficientSchedule(ConstantSchedule{setting1_coefficients()}), GaussianNoise{0.3},
                    opt.burn_in.value_or(200)};
        case 2: {
            const ArmaCoefficients start{{0.6, -0.4, 0.4, -0.5, 0.4}, {0.32, -0.2}};
            const ArmaCoefficients end{{-0.4, -0.5, 0.4, 0.4, 0.1}, {0.32, -0.2}};
            const double h = opt.rescale_drift ? static_cast<double>(horizon) : 1e4;
            return {CoefficientSchedule(LinearDriftSchedule{start, end, h}), UniformNoise{-0.5, 0.5},
                    opt.burn_in.value_or(0)};
        }
        case 3:
            return {CoefficientSchedule(AbruptSchedule{setting1_coefficients(), second, horizon / 2}),
                    UniformNoise{-0.5, 0.5}, opt.burn_in.value_or(0)};
        case 4: {
            // sum |beta| = 1.585: outside the invertibility margin on purpose
            const ArmaCoefficients c{{0.11, -0.5}, {0.41, -0.39, -0.685, 0.1}};
            return {CoefficientSchedule(ConstantSchedule{c}, 1e-9, false), CorrelatedGaussianNoise{0.3},
                    opt.burn_in.value_or(0)};
        }
        default:
            throw std::invalid_argument("setting must be 1, 2, 3 or 4 (got " + std::to_string(n) + ")");
    }
}

inline SignalTrace setting(int n, std::size_t horizon, std::uint64_t seed, const SettingOptions& opt = {}) {
    const SettingSpec s = setting_spec(n, horizon, opt);
    return generate(s.schedule, s.noise, horizon, seed, GenerateOptions{s.burn_in});
}

/// Order (k, q) of the generating model of a setting.
inline std::pair<std::size_t, std::size_t> setting_order(int n) {
    const SettingSpec s = setting_spec(n, 2);
    return {s.schedule.k(), s.schedule.q()};
}

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Trace CSV: header `t,x,eps`, LF endings, 17 significant digits.
inline void write_trace_csv(const std::string& path, const SignalTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << "t,x,eps\n";
    for (std::size_t i = 0; i < trace.values.size(); ++i)
        out << (i + 1) << ',' << format_full(trace.values[i]) << ',' << format_full(trace.noises[i]) << '\n';
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline SignalTrace read_trace_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line != "t,x,eps")
        throw std::runtime_error("'" + path + "': expected header t,x,eps");
    SignalTrace tr;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string t, x, e;
        if (!std::getline(ss, t, ',') || !std::getline(ss, x, ',') || !std::getline(ss, e))
            throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": expected 3 fields");
        try {
            std::size_t used = 0;
            tr.values.push_back(std::stod(x, &used));
            if (used != x.size()) throw std::invalid_argument(x);
            tr.noises.push_back(std::stod(e, &used));
            if (used != e.size()) throw std::invalid_argument(e);
        } catch (const std::exception&) {
            throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": non-numeric value");
        }
    }
    return tr;
}

}  // namespace arma_online::sim
