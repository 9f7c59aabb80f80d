#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "arma_online/learners.hpp"
#include "arma_online/linalg.hpp"
#include "arma_online/log.hpp"

namespace arma_online::baselines {

namespace detail {

// Biased, mean-corrected sample autocovariances r_0..r_order of an
// oldest-first series.
inline std::vector<double> sample_autocovariance(std::span<const double> x, std::size_t order) {
    const std::size_t n = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> r(order + 1, 0.0);
    for (std::size_t j = 0; j <= order && j < n; ++j) {
        double s = 0.0;
        for (std::size_t t = j; t < n; ++t) s += (x[t] - mean) * (x[t - j] - mean);
        r[j] = s / static_cast<double>(n);
    }
    return r;
}

inline bool degenerate(double r0, double mean_square) {
    return !(r0 > 1e-12 * std::max(mean_square, 1e-300));
}

}  // namespace detail

/// One-step Yule-Walker prediction of the value following `history`
/// (oldest first), refitting AR(order) on the whole history. Falls back to
/// the last observed value when the autocovariance is degenerate.
inline double yule_walker_predict(std::span<const double> history, std::size_t order) {
    if (order == 0) throw std::invalid_argument("Yule-Walker order must be >= 1");
    if (history.size() < order + 1) throw std::invalid_argument("Yule-Walker needs at least order+1 observations");
    const auto r = detail::sample_autocovariance(history, order);
    double mean = 0.0, ms = 0.0;
    for (double v : history) {
        mean += v;
        ms += v * v;
    }
    mean /= static_cast<double>(history.size());
    ms /= static_cast<double>(history.size());
    if (detail::degenerate(r[0], ms)) return history.back();
    linalg::LevinsonResult fit;
    try {
        fit = linalg::levinson_durbin(r, order);
    } catch (const std::domain_error&) {
        return history.back();
    }
    double pred = mean;
    const std::size_t n = history.size();
    for (std::size_t i = 1; i <= order; ++i) pred += fit.coefficients[i - 1] * (history[n - i] - mean);
    return pred;
}

/// Streaming form of yule_walker_predict: autocovariance sums are updated in
/// O(order) per observation, and the AR fit is refreshed every
/// `refit_every` observations.
class YuleWalkerPredictor final : public OnlinePredictor {
public:
    explicit YuleWalkerPredictor(std::size_t order, std::size_t refit_every = 1)
        : order_(order), refit_every_(std::max<std::size_t>(refit_every, 1)), cross_(order + 1, 0.0),
          coefficients_(order, 0.0) {
        if (order == 0) throw std::invalid_argument("Yule-Walker order must be >= 1");
    }

    [[nodiscard]] double predict() const override {
        if (n_ == 0) return 0.0;
        if (!fitted_) return recent_.front();
        double pred = mean_;
        for (std::size_t i = 0; i < order_; ++i) pred += coefficients_[i] * (recent_[i] - mean_);
        return pred;
    }

    void observe(double x) override {
        if (!std::isfinite(x)) throw std::invalid_argument("observation is not finite");
        // cross_[j] += x_t * x_{t-j}
        cross_[0] += x * x;
        for (std::size_t j = 1; j <= order_ && j <= recent_.size(); ++j) cross_[j] += x * recent_[j - 1];
        recent_.push_front(x);
        if (recent_.size() > order_) recent_.pop_back();
        if (head_.size() < order_) head_.push_back(x);
        sum_ += x;
        ++n_;
        if (n_ >= order_ + 1 && (n_ - last_fit_ >= refit_every_ || !attempted_)) refit();
    }

    [[nodiscard]] std::string name() const override { return "yule-walker"; }
    [[nodiscard]] const std::vector<double>& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] bool fitted() const noexcept { return fitted_; }

    /// Current r_0..r_order (biased, mean corrected); equals the batch estimate.
    [[nodiscard]] std::vector<double> autocovariance() const {
        const double n = static_cast<double>(n_);
        const double mu = sum_ / n;
        std::vector<double> r(order_ + 1, 0.0);
        double head_sum = 0.0, tail_sum = 0.0;  // first j and last j values
        for (std::size_t j = 0; j <= order_ && j < n_; ++j) {
            if (j > 0) {
                head_sum += head_[j - 1];
                tail_sum += recent_[j - 1];
            }
            const double later = sum_ - head_sum;    // sum_{t=j+1}^{n} x_t
            const double earlier = sum_ - tail_sum;  // sum_{t=1}^{n-j} x_t
            r[j] = (cross_[j] - mu * (later + earlier) + (n - static_cast<double>(j)) * mu * mu) / n;
        }
        return r;
    }

private:
    void refit() {
        attempted_ = true;
        last_fit_ = n_;
        mean_ = sum_ / static_cast<double>(n_);
        const auto r = autocovariance();
        if (detail::degenerate(r[0], cross_[0] / static_cast<double>(n_))) {
            fitted_ = false;
            return;
        }
        try {
            auto fit = linalg::levinson_durbin(r, order_);
            for (double kappa : fit.reflection)
                if (!(std::abs(kappa) < 1.0)) throw std::domain_error("unstable Yule-Walker fit");
            coefficients_ = std::move(fit.coefficients);
            fitted_ = true;
        } catch (const std::domain_error&) {
            fitted_ = false;
        }
    }

    std::size_t order_;
    std::size_t refit_every_;
    std::size_t n_ = 0;
    std::size_t last_fit_ = 0;
    bool attempted_ = false;
    bool fitted_ = false;
    double sum_ = 0.0;
    double mean_ = 0.0;
    std::vector<double> cross_;
    std::deque<double> recent_;  // most recent first, up to `order` values
    std::vector<double> head_;   // first `order` values
    std::vector<double> coefficients_;
};

struct RlsOptions {
    std::size_t k = 5;            // lagged signals in the regressor
    std::size_t q = 2;            // lagged residual estimates in the regressor
    double forgetting = 0.99;
    double p0_scale = 100.0;      // P_0 = p0_scale * I
};

/// Recursive-least-squares fit of an ARMA-style regression
///   x_t ~ theta^T [x_{t-1..t-k}, e_{t-1..t-q}]
/// where e are a-posteriori residuals of the running fit. A stand-in for
/// the ARMA-RLS comparison method, reported as "rls-surrogate".
struct RlsState {
    Eigen::VectorXd theta;
    Eigen::MatrixXd p_matrix;
    double forgetting;
    double p0_scale;
    LagWindow signals;
    LagWindow residuals;
    std::size_t resets = 0;

    explicit RlsState(const RlsOptions& o)
        : theta(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(o.k + o.q))),
          p_matrix(o.p0_scale * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(o.k + o.q),
                                                         static_cast<Eigen::Index>(o.k + o.q))),
          forgetting(o.forgetting), p0_scale(o.p0_scale), signals(o.k), residuals(o.q) {
        if (o.k == 0) throw std::invalid_argument("RLS needs k >= 1");
        if (!(o.forgetting > 0.0 && o.forgetting <= 1.0)) throw std::invalid_argument("forgetting must lie in (0, 1]");
        if (!(o.p0_scale > 0.0)) throw std::invalid_argument("P_0 scale must be positive");
    }

    [[nodiscard]] Eigen::VectorXd regressor() const {
        Eigen::VectorXd phi(theta.size());
        phi << signals.vector(), residuals.vector();
        return phi;
    }
};

struct RlsStep {
    double prediction;
    RlsState next;
};

inline RlsStep rls_step(RlsState s, double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("observation is not finite");
    const Eigen::VectorXd phi = s.regressor();
    const double prediction = s.theta.dot(phi);
    const double err = x - prediction;

    const Eigen::VectorXd p_phi = s.p_matrix * phi;
    const double denom = s.forgetting + phi.dot(p_phi);
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        log::warn("RLS inverse correlation matrix lost positive definiteness; resetting P");
        s.p_matrix = s.p0_scale * Eigen::MatrixXd::Identity(phi.size(), phi.size());
        ++s.resets;
    } else {
        const Eigen::VectorXd gain = p_phi / denom;
        s.theta += gain * err;
        s.p_matrix = (s.p_matrix - gain * p_phi.transpose()) / s.forgetting;
        s.p_matrix = 0.5 * (s.p_matrix + s.p_matrix.transpose()).eval();
        if (!(s.p_matrix.diagonal().minCoeff() > 0.0) || !s.p_matrix.allFinite()) {
            log::warn("RLS inverse correlation matrix lost positive definiteness; resetting P");
            s.p_matrix = s.p0_scale * Eigen::MatrixXd::Identity(phi.size(), phi.size());
            ++s.resets;
        }
    }
    const double posterior = x - s.theta.dot(phi);
    s.signals.push(x);
    s.residuals.push(posterior);
    return {prediction, std::move(s)};
}

class RlsPredictor final : public OnlinePredictor {
public:
    explicit RlsPredictor(const RlsOptions& o) : state_(o) {}
    [[nodiscard]] double predict() const override { return state_.theta.dot(state_.regressor()); }
    void observe(double x) override { state_ = rls_step(std::move(state_), x).next; }
    [[nodiscard]] std::string name() const override { return "rls-surrogate"; }
    [[nodiscard]] const RlsState& state() const noexcept { return state_; }

private:
    RlsState state_;
};

}  // namespace arma_online::baselines
