#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace arma_online {

/// Coefficients (alpha, beta) of an ARMA(k,q) process.
///
///   X_t = sum_i alpha_i X_{t-i} + sum_j beta_j eps_{t-j} + eps_t
///
/// No bias term.
struct ArmaCoefficients {
    std::vector<double> alpha;
    std::vector<double> beta;

    [[nodiscard]] std::size_t k() const noexcept { return alpha.size(); }
    [[nodiscard]] std::size_t q() const noexcept { return beta.size(); }

    /// 1 - sum |beta_j|. Positive iff the MA part satisfies the invertibility margin.
    [[nodiscard]] double beta_margin() const noexcept {
        double s = 0.0;
        for (double b : beta) s += std::abs(b);
        return 1.0 - s;
    }

    [[nodiscard]] bool alpha_ok() const noexcept {
        return std::all_of(alpha.begin(), alpha.end(), [](double a) { return std::abs(a) < 1.0; });
    }

    bool operator==(const ArmaCoefficients&) const = default;
};

/// Throws std::invalid_argument unless k >= 1, every |alpha_i| < 1 and
/// sum |beta_j| <= 1 - epsilon_ma. Pass check_beta = false for generator
/// configurations that deliberately leave the invertibility margin.
inline void validate_coefficients(const ArmaCoefficients& c, double epsilon_ma, bool check_beta = true) {
    if (c.alpha.empty()) throw std::invalid_argument("ARMA coefficients need k >= 1");
    if (!c.alpha_ok()) throw std::invalid_argument("ARMA coefficients violate |alpha_i| < 1");
    for (double v : c.alpha)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite alpha");
    for (double v : c.beta)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite beta");
    if (check_beta && c.beta_margin() < epsilon_ma)
        throw std::invalid_argument("ARMA coefficients violate sum |beta_j| <= 1 - epsilon_ma (margin " +
                                    std::to_string(c.beta_margin()) + ")");
}

/// Improper AR weights gamma in the box K = [-1, 1]^d.
class GammaVector {
public:
    static constexpr double kBound = 1.0;

    explicit GammaVector(std::size_t dim) : v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))) {}

    /// Throws std::invalid_argument if any coordinate leaves [-1, 1].
    explicit GammaVector(Eigen::VectorXd v) : v_(std::move(v)) {
        if (!feasible(v_)) throw std::invalid_argument("gamma outside the box [-1, 1]^d");
    }

    static bool feasible(const Eigen::VectorXd& v, double slack = 0.0) {
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (!(std::abs(v[i]) <= kBound + slack)) return false;
        return true;
    }

    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return v_; }
    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(v_.size()); }
    double operator[](std::size_t i) const { return v_[static_cast<Eigen::Index>(i)]; }

private:
    Eigen::VectorXd v_;
};

/// Sum_{i=1}^{d} gamma_i * history[i-1], with history most-recent-first.
/// Missing history entries count as zero.
inline double ar_predict(std::span<const double> history, std::span<const double> gamma) {
    const std::size_t n = std::min(history.size(), gamma.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += gamma[i] * history[i];
    return s;
}

inline double ar_predict(std::span<const double> history, const GammaVector& gamma) {
    const auto& g = gamma.values();
    return ar_predict(history, std::span<const double>(g.data(), static_cast<std::size_t>(g.size())));
}

inline double squared_loss(double x, double x_hat) noexcept {
    const double r = x - x_hat;
    return r * r;
}

/// A per-step loss l(x, x_hat) together with the constants the learners
/// need. gradient_bound and exp_concavity depend on the predictor
/// dimension d (and the diameter D of the decision set).
struct LossFunction {
    std::string name;
    std::function<double(double, double)> evaluate;
    /// d l / d x_hat
    std::function<double(double, double)> gradient_wrt_prediction;
    /// Lipschitz constant in x_hat over the bounded prediction domain [-1, 1].
    double lipschitz = 0.0;
    /// Upper bound G on ||grad_gamma l^m_t||, for |X_t| < 1.
    std::function<double(std::size_t d, double diameter)> gradient_bound;
    /// lambda, or nullopt for convex-only losses.
    std::function<std::optional<double>(std::size_t d)> exp_concavity;

    [[nodiscard]] bool is_exp_concave(std::size_t d) const { return exp_concavity(d).has_value(); }
};

inline LossFunction squared_loss_function() {
    LossFunction f;
    f.name = "squared";
    f.evaluate = [](double x, double xh) { return squared_loss(x, xh); };
    f.gradient_wrt_prediction = [](double x, double xh) { return 2.0 * (xh - x); };
    f.lipschitz = 4.0;
    f.gradient_bound = [](std::size_t d, double diameter) {
        return 2.0 * std::sqrt(static_cast<double>(d)) * diameter;
    };
    f.exp_concavity = [](std::size_t d) -> std::optional<double> { return 1.0 / static_cast<double>(d); };
    return f;
}

/// |x - x_hat|. Convex but not exp-concave; usable with OGD only.
inline LossFunction absolute_loss_function() {
    LossFunction f;
    f.name = "absolute";
    f.evaluate = [](double x, double xh) { return std::abs(x - xh); };
    f.gradient_wrt_prediction = [](double x, double xh) {
        if (xh > x) return 1.0;
        if (xh < x) return -1.0;
        return 0.0;
    };
    f.lipschitz = 1.0;
    f.gradient_bound = [](std::size_t d, double) { return std::sqrt(static_cast<double>(d)); };
    f.exp_concavity = [](std::size_t) -> std::optional<double> { return std::nullopt; };
    return f;
}

inline LossFunction loss_by_name(const std::string& name) {
    if (name == "squared") return squared_loss_function();
    if (name == "absolute") return absolute_loss_function();
    throw std::invalid_argument("unknown loss '" + name + "' (expected squared or absolute)");
}

/// Infinite-memory ARMA prediction without access to the noise:
///
///   Xinf_t = sum_i alpha_i X_{t-i} + sum_j beta_j (X_{t-j} - Xinf_{t-j})
///
/// with Xinf_1 = X_1; indices before the series start contribute zero.
/// Output index 0 corresponds to t = 1.
inline std::vector<double> x_infinity(std::span<const double> series, const ArmaCoefficients& c) {
    const std::size_t n = series.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    out[0] = series[0];
    for (std::size_t t = 1; t < n; ++t) {
        double s = 0.0;
        for (std::size_t i = 1; i <= c.k() && i <= t; ++i) s += c.alpha[i - 1] * series[t - i];
        for (std::size_t j = 1; j <= c.q() && j <= t; ++j) s += c.beta[j - 1] * (series[t - j] - out[t - j]);
        out[t] = s;
    }
    return out;
}

/// Depth-m truncation of x_infinity:
///
///   X^m_t = sum_i alpha_i X_{t-i} + sum_j beta_j (X_{t-j} - X^{m-j}_{t-j})
///
/// grounded at X^mu_t = X_t for mu <= 0, with X^mu_1 = X_1 for every mu >= 1
/// as in x_infinity.
inline std::vector<double> x_truncated(std::span<const double> series, const ArmaCoefficients& c, std::size_t m) {
    if (m == 0) throw std::invalid_argument("truncation depth m must be >= 1");
    const std::size_t n = series.size();
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;

    // table[t * m + (mu - 1)] = X^mu_t for mu = 1..m
    std::vector<double> table(n * m, 0.0);
    auto depth_value = [&](std::size_t t, std::ptrdiff_t mu) {
        return mu <= 0 ? series[t] : table[t * m + static_cast<std::size_t>(mu - 1)];
    };

    for (std::size_t mu = 1; mu <= m; ++mu) table[mu - 1] = series[0];
    for (std::size_t t = 1; t < n; ++t) {
        double ar = 0.0;
        for (std::size_t i = 1; i <= c.k() && i <= t; ++i) ar += c.alpha[i - 1] * series[t - i];
        for (std::size_t mu = 1; mu <= m; ++mu) {
            double s = ar;
            for (std::size_t j = 1; j <= c.q() && j <= t; ++j) {
                const auto sub = static_cast<std::ptrdiff_t>(mu) - static_cast<std::ptrdiff_t>(j);
                s += c.beta[j - 1] * (series[t - j] - depth_value(t - j, sub));
            }
            table[t * m + mu - 1] = s;
        }
    }
    for (std::size_t t = 0; t < n; ++t) out[t] = table[t * m + m - 1];
    return out;
}

/// Which of the modelling assumptions a given data set satisfies.
/// Quantities that cannot be known from the inputs are left empty.
struct AssumptionReport {
    bool signal_bound_ok = true;          // |X_t| < 1 for all t
    std::optional<bool> alpha_ok;         // |alpha_i| < 1
    std::optional<bool> beta_ok;          // sum |beta_j| < 1
    std::optional<double> beta_margin;    // 1 - sum |beta_j|
    std::optional<double> noise_mean_abs; // empirical E|eps_t|
    std::optional<double> noise_mean;     // zero-mean diagnostic
    double max_abs_signal = 0.0;
};

inline AssumptionReport validate_assumptions(std::span<const double> series,
                                             const std::optional<ArmaCoefficients>& coeffs,
                                             std::optional<std::span<const double>> noise) {
    AssumptionReport r;
    for (double x : series) {
        const double a = std::abs(x);
        if (!(a < 1.0)) r.signal_bound_ok = false;
        if (!std::isfinite(x)) r.max_abs_signal = a;
        else r.max_abs_signal = std::max(r.max_abs_signal, a);
    }
    if (coeffs) {
        r.alpha_ok = coeffs->alpha_ok();
        r.beta_margin = coeffs->beta_margin();
        r.beta_ok = *r.beta_margin > 0.0;
    }
    if (noise && !noise->empty()) {
        double sa = 0.0, s = 0.0;
        for (double e : *noise) {
            sa += std::abs(e);
            s += e;
        }
        r.noise_mean_abs = sa / static_cast<double>(noise->size());
        r.noise_mean = s / static_cast<double>(noise->size());
    }
    return r;
}

}  // namespace arma_online
