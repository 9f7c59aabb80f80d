#pragma once

// Reference implementations for the test suites. Deliberately naive and
// independent of Eigen and of the library code they check.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix identity(std::size_t n, double s = 1.0) {
    Matrix m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) m[i][i] = s;
    return m;
}

/// Gauss-Jordan inversion with partial pivoting.
inline Matrix invert(Matrix a) {
    const std::size_t n = a.size();
    Matrix inv = identity(n);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (a[piv][c] == 0.0) throw std::runtime_error("singular");
        std::swap(a[c], a[piv]);
        std::swap(inv[c], inv[piv]);
        const double d = a[c][c];
        for (std::size_t j = 0; j < n; ++j) {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[c][j];
                inv[r][j] -= f * inv[c][j];
            }
        }
    }
    return inv;
}

/// Solves a x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        std::swap(a[c], a[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t j = c; j < n; ++j) a[r][j] -= f * a[c][j];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

inline void add_outer(Matrix& a, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j) a[i][j] += v[i] * v[j];
}

/// Random symmetric positive definite matrix: B B^T + shift I.
inline Matrix random_spd(std::size_t n, std::mt19937_64& rng, double shift = 0.5) {
    std::normal_distribution<double> nd;
    Matrix b(n, std::vector<double>(n));
    for (auto& row : b)
        for (auto& v : row) v = nd(rng);
    Matrix a = identity(n, shift);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) a[i][j] += b[i][k] * b[j][k];
    return a;
}

/// X^inf_t recomputed from scratch for a single t: the whole prefix is
/// rebuilt from the initial condition on every call (quadratic over a series).
inline double x_infinity_at(const std::vector<double>& x, const std::vector<double>& alpha,
                            const std::vector<double>& beta, std::size_t t) {
    std::vector<double> pre(t + 1, 0.0);
    pre[0] = x[0];
    for (std::size_t s = 1; s <= t; ++s) {
        double v = 0.0;
        for (std::size_t i = 1; i <= alpha.size() && i <= s; ++i) v += alpha[i - 1] * x[s - i];
        for (std::size_t j = 1; j <= beta.size() && j <= s; ++j) v += beta[j - 1] * (x[s - j] - pre[s - j]);
        pre[s] = v;
    }
    return pre[t];
}

/// Stationary variance of an ARMA(p, q) process with noise variance s2,
/// from the psi-weights of its MA(infinity) representation.
inline double arma_variance(const std::vector<double>& alpha, const std::vector<double>& beta, double s2,
                            std::size_t terms = 5000) {
    std::vector<double> psi(terms, 0.0);
    psi[0] = 1.0;
    for (std::size_t j = 1; j < terms; ++j) {
        double v = j <= beta.size() ? beta[j - 1] : 0.0;
        for (std::size_t i = 1; i <= alpha.size() && i <= j; ++i) v += alpha[i - 1] * psi[j - i];
        psi[j] = v;
    }
    double s = 0.0;
    for (double p : psi) s += p * p;
    return s2 * s;
}

}  // namespace oracle
