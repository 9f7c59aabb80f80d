#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arma_online/linalg.hpp"
#include "arma_online/log.hpp"
#include "arma_online/model.hpp"

namespace arma_online {

/// Which reading of the printed learning rates to use.
struct RateOptions {
    /// ONS: eta = 1/2 min{4GD, lambda} as printed, instead of 1/2 min{1/(4GD), lambda}.
    bool paper_literal_eta = false;
    /// OGD: constant step D/(G sqrt(T)) instead of D/(G sqrt(t)).
    bool fixed_ogd_step = false;
    /// Clip predictions to [-1, 1] before the loss is evaluated.
    bool clip_predictions = false;
};

/// Run constants for the improper AR(m+k) learners.
struct DerivedParams {
    std::size_t m = 1;
    std::size_t k = 1;
    std::size_t d = 2;          // m + k
    std::size_t horizon = 1;    // T
    double diameter = 0.0;      // D = sqrt(2 d)
    double gradient_bound = 0;  // G
    std::optional<double> lambda;
    double eta_ons = 0.0;
    double a0_epsilon = 0.0;    // A_0 = a0_epsilon * I
    RateOptions rates;

    /// OGD step multiplying the gradient at round t (1-based).
    [[nodiscard]] double ogd_step(std::size_t t) const {
        const double n = static_cast<double>(rates.fixed_ogd_step ? horizon : std::max<std::size_t>(t, 1));
        return diameter / (gradient_bound * std::sqrt(n));
    }
};

struct ParamInputs {
    std::size_t k = 1;
    std::size_t q = 1;
    std::size_t horizon = 1;  // T
    double lipschitz = 4.0;   // L
    double m_max = 1.0;       // M_max
    double epsilon_ma = 0.5;
    /// Forces d = m + k (the replication runs fix d = 10).
    std::optional<std::size_t> d_override;
    RateOptions rates;
};

namespace detail {

// ceil that ignores round-off just above an integer (log_{0.5}(2^-10) = 10.000000000000002)
inline std::size_t tolerant_ceil(double v) {
    const double r = std::round(v);
    if (std::abs(v - r) <= 1e-9 * std::max(1.0, std::abs(v))) return static_cast<std::size_t>(std::max(r, 0.0));
    return static_cast<std::size_t>(std::max(std::ceil(v), 0.0));
}

}  // namespace detail

/// Truncation depth m = ceil(q log_{1-eps}(1/(T L M_max))), floored at 1.
inline std::size_t truncation_depth(std::size_t q, std::size_t horizon, double lipschitz, double m_max,
                                    double epsilon_ma) {
    if (q == 0) {
        log::note("q = 0: pure AR, using truncation depth m = 1");
        return 1;
    }
    if (!(epsilon_ma > 0.0 && epsilon_ma < 1.0)) throw std::invalid_argument("epsilon_ma must lie in (0, 1)");
    const double tlm = static_cast<double>(horizon) * lipschitz * m_max;
    if (!(tlm > 1.0)) throw std::invalid_argument("T * L * M_max must exceed 1 for a positive truncation depth");
    const double m = static_cast<double>(q) * std::log(1.0 / tlm) / std::log1p(-epsilon_ma);
    return std::max<std::size_t>(detail::tolerant_ceil(m), 1);
}

inline DerivedParams derive_params(const ParamInputs& in, const LossFunction& loss) {
    if (in.k == 0) throw std::invalid_argument("k must be >= 1");
    if (in.horizon == 0) throw std::invalid_argument("T must be >= 1");
    if (!(in.lipschitz > 0.0) || !(in.m_max > 0.0)) throw std::invalid_argument("L and M_max must be positive");

    DerivedParams p;
    p.k = in.k;
    p.horizon = in.horizon;
    p.rates = in.rates;
    if (in.d_override) {
        if (*in.d_override <= in.k) throw std::invalid_argument("forced predictor dimension must exceed k");
        p.m = *in.d_override - in.k;
    } else {
        p.m = truncation_depth(in.q, in.horizon, in.lipschitz, in.m_max, in.epsilon_ma);
    }
    p.d = p.m + p.k;
    p.diameter = std::sqrt(2.0 * static_cast<double>(p.d));
    p.gradient_bound = loss.gradient_bound(p.d, p.diameter);
    p.lambda = loss.exp_concavity(p.d);

    const double gd = p.gradient_bound * p.diameter;
    double first = in.rates.paper_literal_eta ? 4.0 * gd : 1.0 / (4.0 * gd);
    if (p.lambda) first = std::min(first, *p.lambda);
    p.eta_ons = 0.5 * first;
    p.a0_epsilon = 1.0 / (p.eta_ons * p.eta_ons * p.diameter * p.diameter);
    return p;
}

/// The last d observations, most recent first. Missing entries are zero.
class LagWindow {
public:
    explicit LagWindow(std::size_t d) : lags_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))) {}

    void push(double x) {
        const Eigen::Index n = lags_.size();
        for (Eigen::Index i = n - 1; i > 0; --i) lags_[i] = lags_[i - 1];
        if (n > 0) lags_[0] = x;
    }

    [[nodiscard]] const Eigen::VectorXd& vector() const noexcept { return lags_; }
    [[nodiscard]] std::span<const double> span() const noexcept {
        return {lags_.data(), static_cast<std::size_t>(lags_.size())};
    }
    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(lags_.size()); }

private:
    Eigen::VectorXd lags_;
};

namespace detail {

inline double effective_prediction(double raw, const RateOptions& rates) {
    return rates.clip_predictions ? std::clamp(raw, -1.0, 1.0) : raw;
}

inline void require_finite(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("observation is not finite");
}

}  // namespace detail

/// Gradient of l^m_t(gamma) = l(x, sum gamma_i h_i) with respect to gamma.
inline Eigen::VectorXd improper_loss_gradient(const Eigen::VectorXd& history, const Eigen::VectorXd& gamma, double x,
                                              const LossFunction& loss, const RateOptions& rates = {}) {
    const double pred = detail::effective_prediction(history.dot(gamma), rates);
    return loss.gradient_wrt_prediction(x, pred) * history;
}

struct OnsState {
    Eigen::VectorXd gamma;
    linalg::SymmetricMatrix a_matrix;
    linalg::SymmetricMatrix a_inverse;
    std::size_t t = 0;
    LagWindow history;

    explicit OnsState(const DerivedParams& p)
        : gamma(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.d))),
          a_matrix(linalg::SymmetricMatrix::scaled_identity(p.d, p.a0_epsilon)),
          a_inverse(linalg::SymmetricMatrix::scaled_identity(p.d, 1.0 / p.a0_epsilon)),
          history(p.d) {}
};

struct OgdState {
    Eigen::VectorXd gamma;
    std::size_t t = 0;
    LagWindow history;

    explicit OgdState(const DerivedParams& p) : gamma(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.d))), history(p.d) {}
};

inline double ons_predict(const OnsState& s) { return s.history.vector().dot(s.gamma); }
inline double ogd_predict(const OgdState& s) { return s.history.vector().dot(s.gamma); }

/// One ARMA-ONS round after X_t is revealed: rank-one metric update,
/// Newton-style step, projection onto the box in the A_t norm.
inline OnsState ons_observe(OnsState s, double x, const LossFunction& loss, const DerivedParams& p,
                            const linalg::ProjectionOptions& proj = {}) {
    detail::require_finite(x);
    if (!p.lambda) throw std::invalid_argument("ARMA-ONS needs an exp-concave loss; '" + loss.name + "' is not");
    const Eigen::VectorXd grad = improper_loss_gradient(s.history.vector(), s.gamma, x, loss, p.rates);
    if (!grad.isZero(0.0)) {
        s.a_matrix.add_outer(grad);
        s.a_inverse = linalg::sherman_morrison_update(s.a_inverse, grad);
        const Eigen::VectorXd y = s.gamma - (1.0 / p.eta_ons) * (s.a_inverse * grad);
        s.gamma = linalg::mahalanobis_box_project(y, s.a_matrix, GammaVector::kBound, proj).x;
#ifdef ARMA_ONLINE_CHECK_INVARIANTS
        const auto n = static_cast<Eigen::Index>(p.d);
        const double err =
            (s.a_matrix.matrix() * s.a_inverse.matrix() - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
        if (err > 1e-6) throw std::logic_error("ONS inverse drifted from A_t (" + std::to_string(err) + ")");
        if (!GammaVector::feasible(s.gamma)) throw std::logic_error("ONS iterate left the box");
#endif
    }
    s.history.push(x);
    ++s.t;
    return s;
}

/// One ARMA-OGD round: gradient step then Euclidean box projection.
inline OgdState ogd_observe(OgdState s, double x, const LossFunction& loss, const DerivedParams& p) {
    detail::require_finite(x);
    const Eigen::VectorXd grad = improper_loss_gradient(s.history.vector(), s.gamma, x, loss, p.rates);
    ++s.t;
    if (!grad.isZero(0.0)) s.gamma = linalg::box_project(s.gamma - p.ogd_step(s.t) * grad, GammaVector::kBound);
    s.history.push(x);
    return s;
}

/// Common interface of every streaming one-step-ahead predictor.
class OnlinePredictor {
public:
    virtual ~OnlinePredictor() = default;
    [[nodiscard]] virtual double predict() const = 0;
    virtual void observe(double x) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class OnsPredictor final : public OnlinePredictor {
public:
    OnsPredictor(LossFunction loss, DerivedParams p) : loss_(std::move(loss)), params_(std::move(p)), state_(params_) {
        if (!params_.lambda) throw std::invalid_argument("ARMA-ONS needs an exp-concave loss");
    }
    [[nodiscard]] double predict() const override { return ons_predict(state_); }
    void observe(double x) override { state_ = ons_observe(std::move(state_), x, loss_, params_); }
    [[nodiscard]] std::string name() const override { return "arma-ons"; }
    [[nodiscard]] const OnsState& state() const noexcept { return state_; }

private:
    LossFunction loss_;
    DerivedParams params_;
    OnsState state_;
};

class OgdPredictor final : public OnlinePredictor {
public:
    OgdPredictor(LossFunction loss, DerivedParams p) : loss_(std::move(loss)), params_(std::move(p)), state_(params_) {}
    [[nodiscard]] double predict() const override { return ogd_predict(state_); }
    void observe(double x) override { state_ = ogd_observe(std::move(state_), x, loss_, params_); }
    [[nodiscard]] std::string name() const override { return "arma-ogd"; }
    [[nodiscard]] const OgdState& state() const noexcept { return state_; }

private:
    LossFunction loss_;
    DerivedParams params_;
    OgdState state_;
};

/// Raised by run_online with the 0-based index of the failing observation.
class StepError : public std::runtime_error {
public:
    StepError(std::size_t index, const std::string& what)
        : std::runtime_error("step " + std::to_string(index) + ": " + what), index_(index) {}
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Streams the series through the predictor. The first value only seeds
/// the history, so the result has series.size() - 1 losses; entry i is the
/// loss on series[i + 1].
inline std::vector<double> run_online(std::span<const double> series, OnlinePredictor& learner,
                                      const LossFunction& loss, const RateOptions& rates = {}) {
    if (series.size() < 2) throw std::invalid_argument("run_online needs at least two observations");
    std::vector<double> losses;
    losses.reserve(series.size() - 1);
    std::size_t i = 0;
    try {
        learner.observe(series[0]);
        for (i = 1; i < series.size(); ++i) {
            const double pred = detail::effective_prediction(learner.predict(), rates);
            losses.push_back(loss.evaluate(series[i], pred));
            learner.observe(series[i]);
        }
    } catch (const StepError&) {
        throw;
    } catch (const std::exception& e) {
        throw StepError(i, e.what());
    }
    return losses;
}

enum class LearnerKind { ons, ogd };

inline std::vector<double> run_online(std::span<const double> series, LearnerKind kind, const LossFunction& loss,
                                      const DerivedParams& params) {
    if (kind == LearnerKind::ons) {
        OnsPredictor l(loss, params);
        return run_online(series, l, loss, params.rates);
    }
    OgdPredictor l(loss, params);
    return run_online(series, l, loss, params.rates);
}

}  // namespace arma_online
