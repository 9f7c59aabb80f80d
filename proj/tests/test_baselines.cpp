#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "arma_online/baselines.hpp"
#include "arma_online/simgen.hpp"
#include "oracles.hpp"

using namespace arma_online;
using namespace arma_online::baselines;

namespace {

std::vector<double> noiseless_ar1(std::size_t n, double a) {
    std::vector<double> x(n);
    x[0] = 1.0;
    for (std::size_t t = 1; t < n; ++t) x[t] = a * x[t - 1];
    return x;
}

}  // namespace

TEST(YuleWalker, IdentifiesNoiselessAr1) {
    const auto x = noiseless_ar1(10'000, 0.5);
    YuleWalkerPredictor p(1);
    for (double v : x) p.observe(v);
    ASSERT_TRUE(p.fitted());
    EXPECT_NEAR(p.coefficients()[0], 0.5, 1e-3);
}

TEST(YuleWalker, ConstantHistoryFallsBackToLastValue) {
    const std::vector<double> x(50, 0.37);
    EXPECT_EQ(yule_walker_predict(x, 3), 0.37);
    YuleWalkerPredictor p(3);
    for (double v : x) p.observe(v);
    EXPECT_FALSE(p.fitted());
    EXPECT_EQ(p.predict(), 0.37);
}

TEST(YuleWalker, StreamingMatchesBatch) {
    const auto tr = sim::setting(1, 400, 2);
    YuleWalkerPredictor p(6);
    for (std::size_t n = 0; n < tr.values.size(); ++n) {
        p.observe(tr.values[n]);
        const std::span<const double> hist(tr.values.data(), n + 1);
        const auto batch = baselines::detail::sample_autocovariance(hist, 6);
        const auto stream = p.autocovariance();
        for (std::size_t j = 0; j <= 6 && j <= n; ++j) ASSERT_NEAR(stream[j], batch[j], 1e-12) << n << "," << j;
        if (n >= 6) {
            ASSERT_NEAR(p.predict(), yule_walker_predict(hist, 6), 1e-10) << n;
        }
    }
}

TEST(YuleWalker, AutocovarianceMatchesDirectFormula) {
    const std::vector<double> x{0.3, -0.1, 0.4, 0.2, -0.5, 0.1};
    const auto r = baselines::detail::sample_autocovariance(x, 2);
    double m = 0.0;
    for (double v : x) m += v;
    m /= 6;
    double r1 = 0.0;
    for (std::size_t t = 1; t < 6; ++t) r1 += (x[t] - m) * (x[t - 1] - m);
    EXPECT_NEAR(r[1], r1 / 6, 1e-15);
}

TEST(YuleWalker, RefitEveryKeepsCoefficientsBetweenFits) {
    const auto tr = sim::setting(1, 200, 5);
    YuleWalkerPredictor p(3, 50);
    std::vector<double> last;
    for (std::size_t n = 0; n < 120; ++n) {
        p.observe(tr.values[n]);
        if (n + 1 == 60) last = p.coefficients();
    }
    YuleWalkerPredictor every(3);
    for (std::size_t n = 0; n < 54; ++n) every.observe(tr.values[n]);
    EXPECT_EQ(last, every.coefficients());
}

TEST(YuleWalker, Setting1NearNoiseFloor) {
    const auto tr = sim::setting(1, 10'000, 7);
    YuleWalkerPredictor p(10);
    const auto losses = run_online(tr.values, p, squared_loss_function());
    double tail = 0.0;
    for (std::size_t i = losses.size() - 1000; i < losses.size(); ++i) tail += losses[i];
    tail /= 1000.0;
    EXPECT_GE(tail, 0.09);
    EXPECT_LE(tail, 0.13);
}

TEST(YuleWalker, ReflectionCoefficientsStable) {
    const auto tr = sim::setting(3, 3000, 9);
    YuleWalkerPredictor p(8);
    for (double v : tr.values) {
        p.observe(v);
        if (!p.fitted()) continue;
        const auto r = p.autocovariance();
        for (double k : linalg::levinson_durbin(r, 8).reflection) ASSERT_LT(std::abs(k), 1.0);
    }
}

TEST(Rls, ZeroSignalStaysAtInitialization) {
    RlsState s(RlsOptions{});
    for (int i = 0; i < 100; ++i) {
        auto step = rls_step(std::move(s), 0.0);
        EXPECT_EQ(step.prediction, 0.0);
        s = std::move(step.next);
    }
    EXPECT_TRUE(s.theta.isZero(0.0));
    EXPECT_TRUE(s.residuals.vector().isZero(0.0));
}

TEST(Rls, IdentifiesNoiselessAr1) {
    RlsOptions o;
    o.k = 1;
    o.q = 0;
    RlsState s(o);
    for (double v : noiseless_ar1(500, 0.5)) s = rls_step(std::move(s), v).next;
    EXPECT_NEAR(s.theta[0], 0.5, 1e-2);
}

TEST(Rls, InverseCorrelationMatchesAccumulation) {
    RlsOptions o;
    o.k = 3;
    o.q = 2;
    o.forgetting = 1.0;
    RlsState s(o);
    oracle::Matrix acc = oracle::identity(5, 1.0 / o.p0_scale);
    const auto tr = sim::setting(1, 60, 4);
    for (double v : tr.values) {
        const Eigen::VectorXd phi = s.regressor();
        oracle::add_outer(acc, std::vector<double>(phi.data(), phi.data() + phi.size()));
        s = rls_step(std::move(s), v).next;
    }
    const Eigen::MatrixXd p_inv = s.p_matrix.inverse();
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) EXPECT_NEAR(p_inv(i, j), acc[i][j], 1e-6);
}

TEST(Rls, ConvergesOnDeterministicLinearSystem) {
    RlsOptions o;
    o.k = 2;
    o.q = 1;
    o.forgetting = 1.0;
    RlsState s(o);
    const double c = 2 * std::cos(0.3);
    double a = 0.5 * std::sin(0.3), b = 0.0;
    std::vector<double> err;
    for (int t = 0; t < 600; ++t) {
        const double x = c * a - b;
        b = a;
        a = x;
        auto step = rls_step(std::move(s), x);
        err.push_back((x - step.prediction) * (x - step.prediction));
        s = std::move(step.next);
    }
    double prev = INFINITY;
    for (std::size_t w = 0; w < err.size(); w += 100) {
        double m = 0.0;
        for (std::size_t i = w; i < w + 100; ++i) m += err[i];
        m /= 100;
        EXPECT_LE(m, prev + 1e-20);
        prev = m;
    }
    EXPECT_LT(prev, 1e-8);
}

TEST(Rls, PredictorMatchesStepFunction) {
    const auto tr = sim::setting(1, 300, 3);
    RlsPredictor p(RlsOptions{});
    RlsState s(RlsOptions{});
    for (double v : tr.values) {
        auto step = rls_step(std::move(s), v);
        EXPECT_EQ(p.predict(), step.prediction);
        p.observe(v);
        s = std::move(step.next);
    }
    EXPECT_EQ(p.name(), "rls-surrogate");
}

TEST(Rls, RejectsBadOptions) {
    RlsOptions o;
    o.forgetting = 0.0;
    EXPECT_THROW(RlsState{o}, std::invalid_argument);
    o.forgetting = 0.99;
    o.k = 0;
    EXPECT_THROW(RlsState{o}, std::invalid_argument);
    RlsState s(RlsOptions{});
    EXPECT_THROW(rls_step(s, NAN), std::invalid_argument);
}
