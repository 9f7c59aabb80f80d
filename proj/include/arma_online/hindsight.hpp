#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "arma_online/linalg.hpp"
#include "arma_online/model.hpp"

namespace arma_online {

/// Best fixed AR(d) weights in [-1, 1]^d for a realized series. The
/// objective sums l(X_t, sum_i gamma_i X_{t-i}) over t = d+1..n (1-based),
/// the rounds where the full lag window is available.
struct HindsightResult {
    Eigen::VectorXd gamma;
    double total_loss = 0.0;
    std::size_t terms = 0;
    std::size_t iterations = 0;
    /// Norm of the gradient mapping of the per-term mean objective at gamma.
    double gradient_mapping_norm = 0.0;
};

class HindsightError : public std::runtime_error {
public:
    HindsightError(const std::string& what, HindsightResult best)
        : std::runtime_error(what), best_(std::move(best)) {}
    [[nodiscard]] const HindsightResult& best_iterate() const noexcept { return best_; }

private:
    HindsightResult best_;
};

struct HindsightOptions {
    double tol = 1e-9;
    std::size_t max_iterations = 200'000;
};

namespace detail {

inline Eigen::VectorXd lag_vector(std::span<const double> x, std::size_t t, std::size_t d) {
    Eigen::VectorXd h(static_cast<Eigen::Index>(d));
    for (std::size_t i = 1; i <= d; ++i) h[static_cast<Eigen::Index>(i - 1)] = x[t - i];
    return h;
}

inline double hindsight_objective(std::span<const double> x, std::size_t d, const Eigen::VectorXd& gamma,
                                  const LossFunction& loss) {
    double s = 0.0;
    for (std::size_t t = d; t < x.size(); ++t) {
        double pred = 0.0;
        for (std::size_t i = 1; i <= d; ++i) pred += gamma[static_cast<Eigen::Index>(i - 1)] * x[t - i];
        s += loss.evaluate(x[t], pred);
    }
    return s;
}

inline Eigen::VectorXd hindsight_gradient(std::span<const double> x, std::size_t d, const Eigen::VectorXd& gamma,
                                          const LossFunction& loss) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (std::size_t t = d; t < x.size(); ++t) {
        const Eigen::VectorXd h = lag_vector(x, t, d);
        g += loss.gradient_wrt_prediction(x[t], h.dot(gamma)) * h;
    }
    return g;
}

inline double mapping_norm(const Eigen::VectorXd& gamma, const Eigen::VectorXd& grad, double lip) {
    return (lip * (gamma - linalg::box_project(gamma - grad / lip, 1.0))).norm();
}

// Exact minimizer of g^T H g - 2 b^T g over the free coordinates of x,
// with the coordinates at the bound held fixed. Empty when infeasible.
inline std::optional<Eigen::VectorXd> free_set_solve(const Eigen::VectorXd& x, const Eigen::MatrixXd& h,
                                                     const Eigen::VectorXd& b) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (std::abs(x[i]) < 1.0) free.push_back(i);
    if (free.empty()) return std::nullopt;
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd hff(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
        rhs[r] = b[free[r]];
        for (Eigen::Index j = 0; j < x.size(); ++j)
            if (std::abs(x[j]) >= 1.0) rhs[r] -= h(free[r], j) * x[j];
        for (Eigen::Index c = 0; c < nf; ++c) hff(r, c) = h(free[r], free[c]);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(hff);
    if (ldlt.info() != Eigen::Success) return std::nullopt;
    const Eigen::VectorXd z = ldlt.solve(rhs);
    if (!z.allFinite()) return std::nullopt;
    Eigen::VectorXd out = x;
    for (Eigen::Index r = 0; r < nf; ++r) {
        if (!(std::abs(z[r]) <= 1.0)) return std::nullopt;
        out[free[r]] = z[r];
    }
    return out;
}

// Primal active-set method for min g^T H g - 2 b^T g over the unit box,
// started from a feasible point. Returns the last iterate; the caller
// checks optimality.
inline Eigen::VectorXd box_qp_active_set(const Eigen::MatrixXd& h, const Eigen::VectorXd& b, Eigen::VectorXd x,
                                         std::size_t max_changes) {
    const Eigen::Index n = x.size();
    for (std::size_t it = 0; it < max_changes; ++it) {
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < n; ++i)
            if (std::abs(x[i]) < 1.0) free.push_back(i);
        bool moved = false;
        if (!free.empty()) {
            const auto nf = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd hff(nf, nf);
            Eigen::VectorXd rhs(nf);
            for (Eigen::Index r = 0; r < nf; ++r) {
                rhs[r] = b[free[r]];
                for (Eigen::Index j = 0; j < n; ++j)
                    if (std::abs(x[j]) >= 1.0) rhs[r] -= h(free[r], j) * x[j];
                for (Eigen::Index c = 0; c < nf; ++c) hff(r, c) = h(free[r], free[c]);
            }
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(hff);
            if (ldlt.info() != Eigen::Success) return x;
            const Eigen::VectorXd z = ldlt.solve(rhs);
            if (!z.allFinite()) return x;
            // walk from x toward z until the first bound is hit
            double step = 1.0;
            Eigen::Index blocking = -1;
            for (Eigen::Index r = 0; r < nf; ++r) {
                const double from = x[free[r]], to = z[r];
                if (std::abs(to) > 1.0) {
                    const double edge = to > 0 ? 1.0 : -1.0;
                    const double s = (edge - from) / (to - from);
                    if (s < step) {
                        step = s;
                        blocking = free[r];
                    }
                }
            }
            for (Eigen::Index r = 0; r < nf; ++r) {
                const double v = x[free[r]] + step * (z[r] - x[free[r]]);
                moved = moved || v != x[free[r]];
                x[free[r]] = std::clamp(v, -1.0, 1.0);
            }
            if (blocking >= 0) {
                x[blocking] = x[blocking] > 0 ? 1.0 : -1.0;
                continue;
            }
        }
        // free coordinates are optimal; release the bound coordinate whose
        // multiplier has the wrong sign, if any
        const Eigen::VectorXd g = h * x - b;
        Eigen::Index release = -1;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::abs(x[i]) < 1.0) continue;
            const double wrong = x[i] > 0 ? g[i] : -g[i];  // > 0 means moving inward lowers the objective
            if (wrong > worst) {
                worst = wrong;
                release = i;
            }
        }
        if (release < 0) return x;
        x[release] = x[release] > 0 ? std::nextafter(1.0, 0.0) : std::nextafter(-1.0, 0.0);
        (void)moved;
    }
    return x;
}

}  // namespace detail

/// Squared loss: normal equations, accepted when feasible; otherwise
/// accelerated projected gradient (with restarts) from the clamped solution.
/// Other losses: projected gradient with backtracking. Throws HindsightError
/// carrying the best iterate when the tolerance is not reached.
inline HindsightResult best_in_hindsight(std::span<const double> series, std::size_t d, const LossFunction& loss,
                                         const HindsightOptions& opt = {}) {
    if (d == 0) throw std::invalid_argument("best_in_hindsight: d must be >= 1");
    if (series.size() <= d) throw std::invalid_argument("best_in_hindsight: series must be longer than d");
    const auto n = static_cast<Eigen::Index>(d);
    const double terms = static_cast<double>(series.size() - d);

    HindsightResult res;
    res.terms = series.size() - d;

    if (loss.name == "squared") {
        // mean objective: gamma^T H gamma - 2 b^T gamma + c
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        for (std::size_t t = d; t < series.size(); ++t) {
            const Eigen::VectorXd lag = detail::lag_vector(series, t, d);
            h.selfadjointView<Eigen::Lower>().rankUpdate(lag);
            b += series[t] * lag;
        }
        h = h.selfadjointView<Eigen::Lower>();
        h /= terms;
        b /= terms;
        auto grad = [&](const Eigen::VectorXd& g) -> Eigen::VectorXd { return 2.0 * (h * g - b); };

        const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        Eigen::VectorXd unconstrained = Eigen::VectorXd::Zero(n);
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) unconstrained = ldlt.solve(b);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h, Eigen::EigenvaluesOnly);
        const double lip = std::max(2.0 * eig.eigenvalues().maxCoeff(), 1e-300);

        const double tol = opt.tol * std::max(1.0, lip);
        const Eigen::VectorXd clamped =
            linalg::box_project(unconstrained.allFinite() ? unconstrained : Eigen::VectorXd::Zero(n), 1.0);
        const Eigen::VectorXd exact = detail::box_qp_active_set(h, b, clamped, 4 * static_cast<std::size_t>(n) + 8);
        if (unconstrained.allFinite() && GammaVector::feasible(unconstrained) &&
            detail::mapping_norm(unconstrained, grad(unconstrained), lip) < tol) {
            res.gamma = unconstrained;
        } else if (detail::mapping_norm(exact, grad(exact), lip) < tol) {
            res.gamma = exact;
        } else {
            Eigen::VectorXd x = clamped;
            Eigen::VectorXd z = x;
            double momentum = 1.0;
            auto quad = [&](const Eigen::VectorXd& g) { return g.dot(h * g) - 2.0 * b.dot(g); };
            double fx = quad(x);
            for (;;) {
                const Eigen::VectorXd gz = grad(z);
                const Eigen::VectorXd next = linalg::box_project(z - gz / lip, 1.0);
                const double fn = quad(next);
                const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
                if (fn > fx) {
                    // adaptive restart
                    z = x;
                    momentum = 1.0;
                } else {
                    z = next + ((momentum - 1.0) / m_next) * (next - x);
                    x = next;
                    fx = fn;
                    momentum = m_next;
                }
                ++res.iterations;
                res.gradient_mapping_norm = detail::mapping_norm(x, grad(x), lip);
                if (res.gradient_mapping_norm < tol) break;
                // the iterates identify the active set long before rounding lets them settle
                if (res.iterations % 50 == 0) {
                    if (auto exact = detail::free_set_solve(x, h, b)) {
                        const double nm = detail::mapping_norm(*exact, grad(*exact), lip);
                        if (nm < res.gradient_mapping_norm) {
                            x = z = *exact;
                            fx = quad(x);
                            momentum = 1.0;
                            res.gradient_mapping_norm = nm;
                            if (nm < tol) break;
                        }
                    }
                }
                if (res.iterations >= opt.max_iterations) {
                    res.gamma = x;
                    res.total_loss = detail::hindsight_objective(series, d, x, loss);
                    throw HindsightError("best_in_hindsight: no convergence (gradient mapping " +
                                             std::to_string(res.gradient_mapping_norm) + ")",
                                         res);
                }
            }
            res.gamma = x;
        }
        res.gradient_mapping_norm = detail::mapping_norm(res.gamma, grad(res.gamma), lip);
        res.total_loss = detail::hindsight_objective(series, d, res.gamma, loss);
        return res;
    }

    // general convex loss: projected (sub)gradient with backtracking on the mean objective
    auto f = [&](const Eigen::VectorXd& g) { return detail::hindsight_objective(series, d, g, loss) / terms; };
    auto gf = [&](const Eigen::VectorXd& g) -> Eigen::VectorXd {
        return detail::hindsight_gradient(series, d, g, loss) / terms;
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    double fx = f(x);
    Eigen::VectorXd best = x;
    double fbest = fx;
    double step = 1.0;
    const std::size_t budget = opt.max_iterations / 40;
    bool converged = false;
    // backtracking phase; stalls at kinks of non-smooth losses
    while (res.iterations < budget / 2) {
        const Eigen::VectorXd g = gf(x);
        res.gradient_mapping_norm = detail::mapping_norm(x, g, 1.0 / step);
        ++res.iterations;
        if (res.gradient_mapping_norm < opt.tol) {
            converged = true;
            break;
        }
        Eigen::VectorXd cand;
        double fc = 0.0;
        for (int tries = 0; tries < 60; ++tries) {
            cand = linalg::box_project(x - step * g, 1.0);
            const Eigen::VectorXd delta = cand - x;
            fc = f(cand);
            if (fc <= fx + g.dot(delta) + delta.squaredNorm() / (2.0 * step)) break;
            step *= 0.5;
        }
        x = cand;
        fx = fc;
        if (fx < fbest) {
            fbest = fx;
            best = x;
        }
        if (step < 1e-14) break;
        step *= 1.5;
    }
    if (!converged) {
        // projected subgradient with diminishing normalized steps from the best point
        x = best;
        for (std::size_t k = 0; res.iterations < budget; ++k, ++res.iterations) {
            const Eigen::VectorXd g = gf(x);
            const double gn = g.norm();
            if (gn == 0.0) break;
            x = linalg::box_project(x - (0.5 / std::sqrt(static_cast<double>(k) + 1.0)) * (g / gn), 1.0);
            const double fc = f(x);
            if (fc < fbest) {
                fbest = fc;
                best = x;
            }
        }
        res.gamma = best;
        res.total_loss = fbest * terms;
        throw HindsightError("best_in_hindsight: no convergence (gradient mapping " +
                                 std::to_string(res.gradient_mapping_norm) + ")",
                             res);
    }
    res.gamma = fx <= fbest ? x : best;
    res.total_loss = detail::hindsight_objective(series, d, res.gamma, loss);
    return res;
}

}  // namespace arma_online
