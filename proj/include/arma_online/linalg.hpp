#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arma_online/log.hpp"

namespace arma_online::linalg {

/// Dense symmetric matrix. Only exactly symmetric states are representable:
/// construction symmetrizes its input and every mutation preserves symmetry.
class SymmetricMatrix {
public:
    SymmetricMatrix() = default;

    explicit SymmetricMatrix(const Eigen::MatrixXd& m) : m_(0.5 * (m + m.transpose())) {
        if (m.rows() != m.cols()) throw std::invalid_argument("SymmetricMatrix needs a square matrix");
    }

    static SymmetricMatrix scaled_identity(std::size_t dim, double scale) {
        SymmetricMatrix s;
        const auto n = static_cast<Eigen::Index>(dim);
        s.m_ = scale * Eigen::MatrixXd::Identity(n, n);
        return s;
    }

    [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& matrix() const noexcept { return m_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// this += scale * v v^T. v_i v_j == v_j v_i in IEEE arithmetic, so symmetry is exact.
    void add_outer(const Eigen::VectorXd& v, double scale = 1.0) {
        if (v.size() != m_.rows()) throw std::invalid_argument("rank-one update dimension mismatch");
        for (Eigen::Index j = 0; j < m_.cols(); ++j) {
            const double vj = scale * v[j];
            for (Eigen::Index i = 0; i < m_.rows(); ++i) m_(i, j) += v[i] * vj;
        }
        // scale * v_i * v_j is not commutative in rounding when scale != 1
        if (scale != 1.0) symmetrize();
    }

    [[nodiscard]] Eigen::VectorXd operator*(const Eigen::VectorXd& x) const { return m_ * x; }

private:
    void symmetrize() {
        for (Eigen::Index j = 0; j < m_.cols(); ++j)
            for (Eigen::Index i = j + 1; i < m_.rows(); ++i) {
                const double v = 0.5 * (m_(i, j) + m_(j, i));
                m_(i, j) = v;
                m_(j, i) = v;
            }
    }

    Eigen::MatrixXd m_;
};

/// Given A^{-1}, returns (A + v v^T)^{-1} by the Sherman-Morrison formula
///
///   (A + v v^T)^{-1} = A^{-1} - (A^{-1} v)(A^{-1} v)^T / (1 + v^T A^{-1} v).
///
/// Throws std::domain_error when the denominator is not positive, which can
/// only happen if a_inv has lost positive definiteness.
inline SymmetricMatrix sherman_morrison_update(const SymmetricMatrix& a_inv, const Eigen::VectorXd& v) {
    if (v.size() != static_cast<Eigen::Index>(a_inv.dim()))
        throw std::invalid_argument("sherman_morrison_update: dimension mismatch");
    const Eigen::VectorXd u = a_inv * v;
    const double denom = 1.0 + v.dot(u);
    if (!(denom > 0.0)) throw std::domain_error("sherman_morrison_update: 1 + v^T A^{-1} v <= 0 (corrupted inverse)");
    SymmetricMatrix out = a_inv;
    out.add_outer(u, -1.0 / denom);
    return out;
}

/// Euclidean projection onto [-bound, bound]^n: coordinate-wise clamp.
inline Eigen::VectorXd box_project(const Eigen::VectorXd& y, double bound) {
    if (!(bound > 0.0)) throw std::invalid_argument("box bound must be positive");
    return y.cwiseMax(-bound).cwiseMin(bound);
}

struct ProjectionResult {
    Eigen::VectorXd x;
    std::size_t sweeps = 0;
    double residual = 0.0;
    bool euclidean_fallback = false;
};

class ProjectionError : public std::runtime_error {
public:
    ProjectionError(const std::string& what, ProjectionResult last)
        : std::runtime_error(what), last_(std::move(last)) {}
    [[nodiscard]] const ProjectionResult& last_iterate() const noexcept { return last_; }

private:
    ProjectionResult last_;
};

struct ProjectionOptions {
    double tol = 1e-10;
    std::size_t max_sweeps = 10'000;
    double max_condition = 1e12;
};

namespace detail {

// Largest coordinate-wise move that an exact 1-D minimization would make,
// given g = A (x - y). Zero exactly at KKT points of the box QP.
inline double kkt_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& g, const Eigen::MatrixXd& a,
                           double bound) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double target = std::clamp(x[i] - g[i] / a(i, i), -bound, bound);
        r = std::max(r, std::abs(target - x[i]));
    }
    return r;
}

// Coordinate descent crawls on ill-conditioned metrics. Once the sweeps
// have settled on an active set, solve the free coordinates exactly:
//   A_FF (x_F - y_F) = -A_FB (x_B - y_B)
// and keep the result only if it is feasible and lowers the residual.
inline void polish_free_set(ProjectionResult& res, Eigen::VectorXd& g, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd& a, double bound) {
    const Eigen::Index n = y.size();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(res.x[i]) < bound) free.push_back(i);
    if (free.empty()) return;
    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd aff(nf, nf);
    Eigen::VectorXd rhs(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (std::abs(res.x[j]) >= bound) s += a(free[r], j) * (res.x[j] - y[j]);
        rhs[r] = -s;
        for (Eigen::Index c = 0; c < nf; ++c) aff(r, c) = a(free[r], free[c]);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(aff);
    if (ldlt.info() != Eigen::Success) return;
    const Eigen::VectorXd dz = ldlt.solve(rhs);
    Eigen::VectorXd candidate = res.x;
    for (Eigen::Index r = 0; r < nf; ++r) {
        const double v = y[free[r]] + dz[r];
        if (!(std::abs(v) <= bound)) return;
        candidate[free[r]] = v;
    }
    Eigen::VectorXd gc = a * (candidate - y);
    const double rc = kkt_residual(candidate, gc, a, bound);
    if (rc < res.residual) {
        res.x = std::move(candidate);
        g = std::move(gc);
        res.residual = rc;
    }
}

}  // namespace detail

/// argmin over x in [-bound, bound]^n of (y - x)^T A (y - x), by cyclic
/// coordinate descent. Each coordinate step is the exact clamped 1-D
/// minimizer; the residual is the largest move such a step would still make.
///
/// A that is not numerically positive definite (reciprocal 1-norm condition
/// below 1/max_condition) falls back to the Euclidean box projection.
inline ProjectionResult mahalanobis_box_project(const Eigen::VectorXd& y, const SymmetricMatrix& a_sym, double bound,
                                                const ProjectionOptions& opt = {}) {
    if (!(bound > 0.0)) throw std::invalid_argument("box bound must be positive");
    const Eigen::MatrixXd& a = a_sym.matrix();
    const Eigen::Index n = y.size();
    if (a.rows() != n) throw std::invalid_argument("mahalanobis_box_project: dimension mismatch");

    ProjectionResult res;
    res.x = box_project(y, bound);
    if (res.x == y) return res;

    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !(llt.rcond() * opt.max_condition > 1.0)) {
        log::warn("projection metric is singular or ill-conditioned; using Euclidean box projection");
        res.euclidean_fallback = true;
        return res;
    }

    Eigen::VectorXd g = a * (res.x - y);
    res.residual = detail::kkt_residual(res.x, g, a, bound);
    while (res.residual >= opt.tol) {
        if (res.sweeps == opt.max_sweeps)
            throw ProjectionError("mahalanobis_box_project: no convergence after " + std::to_string(res.sweeps) +
                                      " sweeps (residual " + std::to_string(res.residual) + ")",
                                  res);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double xi = std::clamp(res.x[i] - g[i] / a(i, i), -bound, bound);
            const double delta = xi - res.x[i];
            if (delta != 0.0) {
                res.x[i] = xi;
                g.noalias() += delta * a.col(i);
            }
        }
        ++res.sweeps;
        // refresh to keep incremental drift out of the stopping test
        g.noalias() = a * (res.x - y);
        res.residual = detail::kkt_residual(res.x, g, a, bound);
        if (res.residual >= opt.tol) detail::polish_free_set(res, g, y, a, bound);
    }
    return res;
}

struct LevinsonResult {
    std::vector<double> coefficients;  // a_1..a_p with x_t ~ sum a_i x_{t-i}
    std::vector<double> reflection;    // partial autocorrelations kappa_1..kappa_p
    double innovation_variance = 0.0;
};

/// Solves the Toeplitz Yule-Walker system of the given order by the
/// Levinson-Durbin recursion. Throws std::invalid_argument on bad input and
/// std::domain_error if a prediction-error variance drops to zero or below.
inline LevinsonResult levinson_durbin(std::span<const double> autocov, std::size_t order) {
    if (order == 0) throw std::invalid_argument("levinson_durbin: order must be >= 1");
    if (autocov.size() < order + 1) throw std::invalid_argument("levinson_durbin: need order+1 autocovariances");
    if (!(autocov[0] > 0.0)) throw std::invalid_argument("levinson_durbin: autocov[0] must be positive");

    LevinsonResult out;
    std::vector<double> a(order + 1, 0.0), prev(order + 1, 0.0);
    double err = autocov[0];
    out.reflection.reserve(order);
    for (std::size_t p = 1; p <= order; ++p) {
        double acc = autocov[p];
        for (std::size_t i = 1; i < p; ++i) acc -= a[i] * autocov[p - i];
        const double kappa = acc / err;
        prev = a;
        a[p] = kappa;
        for (std::size_t i = 1; i < p; ++i) a[i] = prev[i] - kappa * prev[p - i];
        err *= (1.0 - kappa * kappa);
        out.reflection.push_back(kappa);
        if (!(err > 0.0))
            throw std::domain_error("levinson_durbin: prediction-error variance became non-positive at order " +
                                    std::to_string(p));
    }
    out.coefficients.assign(a.begin() + 1, a.end());
    out.innovation_variance = err;
    return out;
}

}  // namespace arma_online::linalg
