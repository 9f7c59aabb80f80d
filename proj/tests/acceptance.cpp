#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "arma_online/baselines.hpp"
#include "arma_online/harness.hpp"
#include "arma_online/learners.hpp"
#include "arma_online/linalg.hpp"
#include "arma_online/log.hpp"
#include "arma_online/model.hpp"
#include "arma_online/simgen.hpp"
#include "oracles.hpp"

using namespace arma_online;
namespace h = arma_online::harness;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("%s  %2d %-34s %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

h::ExperimentResult setting_run(int setting, std::vector<h::Algorithm> algos) {
    h::ExperimentConfig c;
    c.scenario = h::SettingScenario{setting};
    c.algorithms = std::move(algos);
    c.T = 10'000;
    c.replicas = 20;
    c.base_seed = 0;
    return h::run_experiment(c);
}

void criterion_1() {
    const auto r = setting_run(1, {h::Algorithm::ons});
    const double m = r.curve(h::Algorithm::ons).trailing_mean;
    report(1, "setting-1 noise floor", m >= 0.09 && m <= 0.105, fmt("ONS trailing mean %.4f, want [0.09, 0.105]", m));
}

void criterion_2() {
    bool ok = true;
    std::string detail;
    for (int s : {2, 3}) {
        const auto r = setting_run(s, {h::Algorithm::ons, h::Algorithm::ogd});
        const auto& ons = r.curve(h::Algorithm::ons);
        const auto& ogd = r.curve(h::Algorithm::ogd);
        int wins = 0;
        for (std::size_t k = 0; k < ons.replica_final_avg_loss.size(); ++k)
            wins += ons.replica_final_avg_loss[k] <= ogd.replica_final_avg_loss[k];
        const bool in_band = ons.trailing_mean >= 0.0833 && ons.trailing_mean <= 0.10;
        ok = ok && in_band && wins >= 15;
        detail += fmt("S%d: ONS tail %.4f in [0.0833, 0.10], ONS<=OGD %d/20 (>=15); ", s, ons.trailing_mean, wins);
    }
    detail.resize(detail.size() - 2);
    report(2, "settings 2-3 floors and ranking", ok, detail);
}

void criterion_3() {
    const auto r = setting_run(4, {h::Algorithm::ons});
    const double m = r.curve(h::Algorithm::ons).trailing_mean;
    report(3, "setting-4 correlated noise", m >= 0.09 && m <= 0.12, fmt("ONS trailing mean %.4f, want [0.09, 0.12]", m));
}

std::vector<h::BenchRow> regret_sweep(h::Algorithm a) {
    h::ExperimentConfig c;
    c.scenario = h::SettingScenario{1};
    c.algorithms = {a};
    c.replicas = 20;
    c.base_seed = 0;
    return h::run_bench(c, {1'000, 10'000, 100'000}).rows;
}

void criterion_4() {
    const auto rows = regret_sweep(h::Algorithm::ons);
    bool ok = true;
    for (std::size_t i = 1; i < rows.size(); ++i) ok = ok && rows[i].regret_over_log2 <= 1.2 * rows[i - 1].regret_over_log2;
    report(4, "ONS regret / log^2 T", ok,
           fmt("%.3f, %.3f, %.3f at T=1e3,1e4,1e5; each <= 1.2x previous", rows[0].regret_over_log2,
               rows[1].regret_over_log2, rows[2].regret_over_log2));
}

void criterion_5() {
    const auto rows = regret_sweep(h::Algorithm::ogd);
    const double ratio = rows[2].regret_over_sqrt / rows[0].regret_over_sqrt;
    report(5, "OGD regret / sqrt T", ratio <= 1.5,
           fmt("%.3f, %.3f, %.3f at T=1e3,1e4,1e5; ratio(1e5)/ratio(1e3) %.3f <= 1.5", rows[0].regret_over_sqrt,
               rows[1].regret_over_sqrt, rows[2].regret_over_sqrt, ratio));
}

ArmaCoefficients random_valid(std::mt19937_64& rng, double epsilon_ma) {
    std::uniform_int_distribution<int> kd(1, 5), qd(1, 3);
    std::uniform_real_distribution<double> u(-1, 1), total(0.05, 1.0 - epsilon_ma), ar(0.2, 0.9);
    ArmaCoefficients c;
    c.alpha.resize(static_cast<std::size_t>(kd(rng)));
    c.beta.resize(static_cast<std::size_t>(qd(rng)));
    auto fill = [&](std::vector<double>& v, double sum_abs) {
        double s = 0.0;
        for (auto& x : v) s += std::abs(x = u(rng));
        for (auto& x : v) x *= sum_abs / s;
    };
    fill(c.alpha, ar(rng));
    fill(c.beta, total(rng));
    return c;
}

void criterion_6() {
    const double epsilon_ma = 0.5, bound = (1.0 - epsilon_ma) + 0.05, floor = 1e-13;
    std::mt19937_64 rng(2024);
    std::vector<ArmaCoefficients> draws{sim::setting1_coefficients()};
    for (int i = 0; i < 5; ++i) draws.push_back(random_valid(rng, epsilon_ma));
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t c = 0; c < draws.size(); ++c) {
        const auto& co = draws[c];
        const sim::CoefficientSchedule sched(sim::ConstantSchedule{co}, epsilon_ma);
        const auto tr = sim::generate(sched, sim::GaussianNoise{0.3}, 2000, 100 + c, {200});
        const auto xi = x_infinity(tr.values, co);
        const std::size_t q = co.q(), top = 60;
        std::vector<double> err(top + 1, 0.0);
        for (std::size_t m = 1; m <= top; ++m) {
            const auto xm = x_truncated(tr.values, co, m);
            for (std::size_t t = 0; t < xm.size(); ++t) err[m] += std::abs(xm[t] - xi[t]);
            err[m] /= static_cast<double>(xm.size());
        }
        for (std::size_t m = q; m + q <= top; ++m) {
            if (err[m + q] <= floor || err[m] <= floor) continue;
            worst = std::max(worst, err[m + q] / err[m]);
            ++checked;
        }
    }
    report(6, "truncation error decay in m", checked > 0 && worst <= bound,
           fmt("worst per-q-block ratio %.4f <= %.2f over %zu pairs, 6 coefficient sets", worst, bound, checked));
}

void criterion_7() {
    const std::size_t T = 2000, runs = 20;
    std::vector<double> mean(T, 0.0);
    for (std::size_t s = 0; s < runs; ++s) {
        const auto tr = sim::setting(1, T, s);
        const auto xi = x_infinity(tr.values, sim::setting1_coefficients());
        for (std::size_t t = 0; t < T; ++t) mean[t] += std::abs(tr.values[t] - xi[t] - tr.noises[t]) / runs;
    }
    double after = 0.0;
    for (std::size_t t = 199; t < T; ++t) after = std::max(after, mean[t]);
    report(7, "X - Xinf - eps decay", after < 1e-6,
           fmt("E|.| at t=1 %.3g, max over t>=200 %.3g < 1e-6", mean[0], after));
}

Eigen::MatrixXd to_eigen(const oracle::Matrix& m) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = m[i][j];
    return out;
}

void criterion_8() {
    const auto started = std::chrono::steady_clock::now();
    std::mt19937_64 rng(88);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(-1, 1);

    double sm = 0.0;
    for (std::size_t dim : {1u, 2u, 5u, 10u, 20u}) {
        auto a = oracle::identity(dim, 0.5);
        auto inv = linalg::SymmetricMatrix::scaled_identity(dim, 2.0);
        for (int n = 0; n < 200; ++n) {
            std::vector<double> v(dim);
            for (auto& x : v) x = nd(rng);
            inv = linalg::sherman_morrison_update(inv, Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(dim)));
            oracle::add_outer(a, v);
        }
        const auto dense = oracle::invert(a);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                sm = std::max(sm, std::abs(inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - dense[i][j]));
    }

    double proj = -INFINITY;
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = to_eigen(oracle::random_spd(2, rng, 0.1));
        Eigen::VectorXd y(2);
        y << 3 * u(rng), 3 * u(rng);
        auto q = [&](const Eigen::VectorXd& x) { return (y - x).dot(a * (y - x)); };
        const double got = q(linalg::mahalanobis_box_project(y, linalg::SymmetricMatrix(a), 1.0).x);
        double grid = INFINITY;
        Eigen::VectorXd z(2);
        for (int i = 0; i <= 400; ++i)
            for (int j = 0; j <= 400; ++j) {
                z << -1 + i / 200.0, -1 + j / 200.0;
                grid = std::min(grid, q(z));
            }
        proj = std::max(proj, got - grid);
    }

    double lev = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> f(5);
        for (auto& v : f) v = nd(rng);
        std::vector<double> r(6, 0.0);
        for (std::size_t j = 0; j < r.size(); ++j)
            for (std::size_t i = 0; i + j < f.size(); ++i) r[j] += f[i] * f[i + j];
        r[0] += 0.1;
        const auto got = linalg::levinson_durbin(r, 5);
        oracle::Matrix t(5, std::vector<double>(5));
        std::vector<double> rhs(5);
        for (std::size_t i = 0; i < 5; ++i) {
            rhs[i] = r[i + 1];
            for (std::size_t j = 0; j < 5; ++j) t[i][j] = r[i > j ? i - j : j - i];
        }
        const auto x = oracle::solve(t, rhs);
        for (std::size_t i = 0; i < 5; ++i) lev = std::max(lev, std::abs(got.coefficients[i] - x[i]));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report(8, "linear-algebra oracles", sm <= 1e-7 && proj <= 1e-6 && lev <= 1e-10 && secs < 30,
           fmt("SM %.2g <= 1e-7, projection excess %.2g <= 1e-6, Levinson %.2g <= 1e-10, %.2fs < 30s", sm, proj, lev,
               secs));
}

void criterion_9() {
    const auto loss = squared_loss_function();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index d = 1 + trial % 20;
        Eigen::VectorXd hist(d), g(d);
        for (auto& v : hist) v = u(rng);
        for (auto& v : g) v = u(rng);
        const double x = u(rng);
        const Eigen::VectorXd grad = improper_loss_gradient(hist, g, x, loss);
        for (Eigen::Index i = 0; i < d; ++i) {
            Eigen::VectorXd gp = g, gm = g;
            gp[i] += 1e-6;
            gm[i] -= 1e-6;
            const double fd = (loss.evaluate(x, hist.dot(gp)) - loss.evaluate(x, hist.dot(gm))) / 2e-6;
            worst = std::max(worst, std::abs(grad[i] - fd));
        }
    }
    report(9, "gradient vs central differences", worst <= 1e-6, fmt("max abs error %.2g <= 1e-6 over 100 instances", worst));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_10() {
    const fs::path root = fs::temp_directory_path() / "arma_online_acceptance_det";
    fs::remove_all(root);
    std::vector<std::string> contents[2];
    std::size_t files = 0;
    bool ran = true;
    for (int i = 0; i < 2; ++i) {
        const fs::path out = root / std::to_string(i);
        const std::string cmd = std::string("\"") + ARMA_ONLINE_CLI +
                                "\" --quiet run --setting 2 --T 3000 --replicas 4 --seed 5 "
                                "--algos arma-ons,arma-ogd,yule-walker,rls-surrogate --formats csv --out \"" +
                                out.string() + "\" > /dev/null 2>&1";
        ran = ran && std::system(cmd.c_str()) == 0;
        std::vector<fs::path> csvs;
        if (fs::exists(out))
            for (const auto& e : fs::directory_iterator(out))
                if (e.path().extension() == ".csv") csvs.push_back(e.path());
        std::sort(csvs.begin(), csvs.end());
        for (const auto& p : csvs) contents[i].push_back(p.filename().string() + "\n" + slurp(p));
        files = csvs.size();
    }
    const bool same = ran && files > 0 && contents[0] == contents[1];
    fs::remove_all(root);
    report(10, "CLI determinism", same, fmt("%zu CSV files byte-identical across two runs", files));
}

void criterion_11() {
    std::vector<double> x(10'000);
    x[0] = 1.0;
    for (std::size_t t = 1; t < x.size(); ++t) x[t] = 0.5 * x[t - 1];
    baselines::YuleWalkerPredictor yw(1);
    for (double v : x) yw.observe(v);
    const double yw_err = std::abs(yw.coefficients()[0] - 0.5);
    baselines::RlsOptions o;
    o.k = 1;
    o.q = 0;
    baselines::RlsState s(o);
    for (std::size_t t = 0; t < 500; ++t) s = baselines::rls_step(std::move(s), x[t]).next;
    const double rls_err = std::abs(s.theta[0] - 0.5);
    report(11, "AR(1) identification", yw_err <= 1e-3 && rls_err <= 1e-2,
           fmt("Yule-Walker error %.2g <= 1e-3, RLS error %.2g <= 1e-2", yw_err, rls_err));
}

void smoke_real() {
    const fs::path out = fs::temp_directory_path() / "arma_online_acceptance_real";
    fs::remove_all(out);
    bool ok = false;
    std::string detail;
    try {
        h::ExperimentConfig c;
        c.scenario = h::CsvScenario{ARMA_ONLINE_SAMPLE_CSV, "level", true};
        c.algorithms = {h::Algorithm::ons, h::Algorithm::ogd, h::Algorithm::yule_walker, h::Algorithm::rls};
        c.k = 3;
        c.q = 2;
        const auto r = h::run_experiment(c);
        const auto written = h::emit(r, out, {h::Format::csv, h::Format::svg});
        ok = !written.empty();
        for (const auto& p : written) ok = ok && fs::file_size(p) > 0;
        detail = fmt("%zu samples, %zu files written, ONS final avg loss %.4g", r.steps, written.size(),
                     r.curve(h::Algorithm::ons).avg_loss.back());
    } catch (const std::exception& e) {
        detail = e.what();
    }
    fs::remove_all(out);
    report(12, "real-data smoke (bundled CSV)", ok, detail);
}

}  // namespace

int main() {
    log::enabled().store(false);
    const std::vector<std::function<void()>> checks{criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                                                    criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
                                                    criterion_11, smoke_real};
    for (const auto& c : checks) {
        try {
            c();
        } catch (const std::exception& e) {
            std::printf("FAIL  error: %s\n", e.what());
            ++failures;
        }
    }
    std::printf("%d failing\n", failures);
    return failures == 0 ? 0 : 1;
}
