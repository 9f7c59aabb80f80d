#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "arma_online/baselines.hpp"
#include "arma_online/hindsight.hpp"
#include "arma_online/learners.hpp"
#include "arma_online/log.hpp"
#include "arma_online/model.hpp"
#include "arma_online/simgen.hpp"

namespace arma_online::harness {

enum class Algorithm { ons, ogd, yule_walker, rls };

inline std::string to_string(Algorithm a) {
    switch (a) {
        case Algorithm::ons: return "arma-ons";
        case Algorithm::ogd: return "arma-ogd";
        case Algorithm::yule_walker: return "yule-walker";
        case Algorithm::rls: return "rls-surrogate";
    }
    return "?";
}

inline Algorithm parse_algorithm(const std::string& s) {
    if (s == "arma-ons") return Algorithm::ons;
    if (s == "arma-ogd") return Algorithm::ogd;
    if (s == "yule-walker") return Algorithm::yule_walker;
    if (s == "rls-surrogate") return Algorithm::rls;
    throw std::invalid_argument("unknown algorithm '" + s + "' (expected arma-ons, arma-ogd, yule-walker, rls-surrogate)");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        const auto b = cur.find_first_not_of(" \t");
        const auto e = cur.find_last_not_of(" \t\r");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

inline std::vector<Algorithm> parse_algorithms(const std::string& s) {
    std::vector<Algorithm> out;
    for (const auto& tok : split(s, ',')) out.push_back(parse_algorithm(tok));
    if (out.empty()) throw std::invalid_argument("algorithm list is empty");
    return out;
}

struct SettingScenario {
    int number = 1;
};
struct CsvScenario {
    std::string path;
    std::string column = "0";
    bool normalize = true;
};
/// A fixed series (e.g. a trace file or a caller-built signal); noises optional.
struct TraceScenario {
    std::string label = "trace";
    std::vector<double> values;
    std::vector<double> noises;
};
using Scenario = std::variant<SettingScenario, CsvScenario, TraceScenario>;

struct ExperimentConfig {
    Scenario scenario = SettingScenario{1};
    std::vector<Algorithm> algorithms{Algorithm::ons};
    std::size_t T = 10'000;
    std::size_t replicas = 1;
    std::uint64_t base_seed = 0;
    std::optional<std::size_t> k;  // defaults: setting's generator order, else 5
    std::optional<std::size_t> q;  // defaults: setting's generator order, else 2
    std::optional<std::size_t> d;  // forced m + k; defaults to 10 for settings
    std::string loss = "squared";
    double L = 4.0;
    double M_max = 1.0;
    double epsilon_ma = 0.5;
    RateOptions rates;
    std::optional<std::size_t> burn_in;
    bool rescale_drift = false;
    std::optional<std::size_t> yw_order;  // defaults to d
    std::size_t yw_refit_every = 1;
    double rls_forgetting = 0.99;
    /// 0 = ARMA_ONLINE_THREADS or hardware concurrency.
    std::size_t threads = 0;
    bool keep_replica_curves = false;

    void validate() const {
        if (replicas == 0) throw std::invalid_argument("replicas must be >= 1");
        if (algorithms.empty()) throw std::invalid_argument("algorithms must be nonempty");
        if (T < 2) throw std::invalid_argument("T must be >= 2");
        if (auto* s = std::get_if<SettingScenario>(&scenario); s && (s->number < 1 || s->number > 4))
            throw std::invalid_argument("setting must be in 1..4 (got " + std::to_string(s->number) + ")");
    }
};

inline std::string scenario_label(const Scenario& s) {
    if (auto* st = std::get_if<SettingScenario>(&s)) return "setting" + std::to_string(st->number);
    if (auto* c = std::get_if<CsvScenario>(&s)) return "real-" + std::filesystem::path(c->path).stem().string();
    return std::get<TraceScenario>(s).label;
}

/// Flat `key = value` configuration; keys are ExperimentConfig field names.
inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    auto to_size = [&](const std::string& v) -> std::size_t {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size() || x < 0) throw std::invalid_argument(key + ": expected a nonnegative integer");
        return static_cast<std::size_t>(x);
    };
    auto to_double = [&](const std::string& v) {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(key + ": expected a number");
        return x;
    };
    auto to_bool = [&](const std::string& v) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw std::invalid_argument(key + ": expected true or false");
    };
    try {
        if (key == "scenario") {
            if (!value.empty() && std::all_of(value.begin(), value.end(), ::isdigit)) {
                cfg.scenario = SettingScenario{std::stoi(value)};
            } else if (value.rfind("setting", 0) == 0) {
                cfg.scenario = SettingScenario{std::stoi(value.substr(7))};
            } else if (value.rfind("trace:", 0) == 0) {
                const auto tr = sim::read_trace_csv(value.substr(6));
                cfg.scenario = TraceScenario{"trace-" + std::filesystem::path(value.substr(6)).stem().string(),
                                             tr.values, tr.noises};
            } else {
                CsvScenario c;
                if (auto* old = std::get_if<CsvScenario>(&cfg.scenario)) c = *old;
                c.path = value;
                cfg.scenario = c;
            }
        } else if (key == "column" || key == "normalize") {
            CsvScenario c;
            if (auto* old = std::get_if<CsvScenario>(&cfg.scenario)) c = *old;
            if (key == "column") c.column = value;
            else c.normalize = to_bool(value);
            cfg.scenario = c;
        } else if (key == "algorithms") cfg.algorithms = parse_algorithms(value);
        else if (key == "T") cfg.T = to_size(value);
        else if (key == "replicas") cfg.replicas = to_size(value);
        else if (key == "base_seed") cfg.base_seed = to_size(value);
        else if (key == "k") cfg.k = to_size(value);
        else if (key == "q") cfg.q = to_size(value);
        else if (key == "d") cfg.d = to_size(value);
        else if (key == "loss") cfg.loss = loss_by_name(value).name;
        else if (key == "L") cfg.L = to_double(value);
        else if (key == "M_max") cfg.M_max = to_double(value);
        else if (key == "epsilon_ma") cfg.epsilon_ma = to_double(value);
        else if (key == "paper_literal_eta") cfg.rates.paper_literal_eta = to_bool(value);
        else if (key == "fixed_ogd_step") cfg.rates.fixed_ogd_step = to_bool(value);
        else if (key == "clip_predictions") cfg.rates.clip_predictions = to_bool(value);
        else if (key == "burn_in") cfg.burn_in = to_size(value);
        else if (key == "rescale_drift") cfg.rescale_drift = to_bool(value);
        else if (key == "yw_order") cfg.yw_order = to_size(value);
        else if (key == "yw_refit_every") cfg.yw_refit_every = to_size(value);
        else if (key == "rls_forgetting") cfg.rls_forgetting = to_double(value);
        else if (key == "threads") cfg.threads = to_size(value);
        else throw std::invalid_argument("unknown config key '" + key + "'");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        if (msg.rfind("unknown", 0) == 0 || msg.find(':') != std::string::npos) throw;
        throw std::invalid_argument(key + ": malformed value '" + value + "'");
    } catch (const std::out_of_range&) {
        throw std::invalid_argument(key + ": value out of range '" + value + "'");
    }
}

inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig cfg = {}) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        const auto key = split(line.substr(0, eq), '\n');
        const auto val = split(line.substr(eq + 1), '\n');
        if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        try {
            apply_config_entry(cfg, key.front(), val.empty() ? std::string{} : val.front());
        } catch (const std::exception& e) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    return parse_config(in, std::move(cfg));
}

struct IngestedSeries {
    std::vector<double> values;
    /// normalized = raw * scale (1 when not normalized).
    double scale = 1.0;
    std::size_t skipped_rows = 0;
    std::string column_name;

    [[nodiscard]] double denormalize(double v) const { return v / scale; }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') quoted = !quoted;
        else if (c == ',' && !quoted) {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') cell.push_back(c);
    }
    out.push_back(cell);
    for (auto& s : out) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    }
    return out;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

inline bool is_missing(const std::string& s) {
    return s.empty() || s == "NA" || s == "N/A" || s == "NaN" || s == "nan" || s == "null" || s == ".";
}

}  // namespace detail

/// Reads one column of a CSV file. `column` is a header name or a 0-based
/// index. The first line is a header when the selected cell is not numeric
/// (always, when selecting by name). Rows with a missing cell are skipped and
/// counted. With normalize, values are divided by 1.02 max|value|.
inline IngestedSeries ingest_csv(const std::string& path, const std::string& column, bool normalize) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "'");
    const bool by_index = !column.empty() && std::all_of(column.begin(), column.end(), ::isdigit);

    IngestedSeries out;
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::size_t> col;
    if (by_index) col = static_cast<std::size_t>(std::stoul(column));
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = detail::split_csv_line(line);
        if (first) {
            first = false;
            if (!by_index) {
                const auto it = std::find(cells.begin(), cells.end(), column);
                if (it == cells.end()) throw std::runtime_error("'" + path + "': no column named '" + column + "'");
                col = static_cast<std::size_t>(it - cells.begin());
                out.column_name = column;
                continue;
            }
            if (*col < cells.size() && !detail::parse_number(cells[*col]) && !detail::is_missing(cells[*col])) {
                out.column_name = cells[*col];
                continue;
            }
        }
        if (*col >= cells.size() || detail::is_missing(cells[*col])) {
            ++out.skipped_rows;
            continue;
        }
        const auto v = detail::parse_number(cells[*col]);
        if (!v || !std::isfinite(*v))
            throw std::runtime_error("'" + path + "' line " + std::to_string(lineno) + ": non-numeric value '" +
                                     cells[*col] + "'");
        out.values.push_back(*v);
    }
    if (out.values.empty()) throw std::runtime_error("'" + path + "': column '" + column + "' has no values");
    if (normalize) {
        double mx = 0.0;
        for (double v : out.values) mx = std::max(mx, std::abs(v));
        if (mx > 0.0) {
            out.scale = 1.0 / (1.02 * mx);
            for (double& v : out.values) v *= out.scale;
        }
    }
    return out;
}

struct AlgorithmCurves {
    Algorithm algorithm = Algorithm::ons;
    /// Running mean of the per-step loss, averaged over replicas.
    std::vector<double> avg_loss;
    /// Cumulative regret against the best fixed gamma, averaged over replicas.
    std::vector<double> cum_regret;
    /// Mean per-step loss over the last 10% of steps, averaged over replicas.
    double trailing_mean = 0.0;
    std::vector<double> replica_final_avg_loss;
    std::vector<double> replica_final_regret;
    std::vector<double> replica_trailing_mean;
    /// Loss summed over the regret window, per replica.
    std::vector<double> replica_window_loss;
    std::vector<std::vector<double>> replica_avg_loss;   // only with keep_replica_curves
    std::vector<std::vector<double>> replica_cum_regret; // only with keep_replica_curves
};

struct ReplicaDiagnostics {
    std::uint64_t seed = 0;
    Eigen::VectorXd gamma_star;
    double comparator_loss = 0.0;
    bool comparator_converged = true;
    /// Loss of predicting X_t - eps_t (the generating model) over the regret window.
    std::optional<double> generator_loss;
    AssumptionReport assumptions;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::string label;
    std::size_t d = 0;
    DerivedParams params;
    std::size_t steps = 0;         // losses per curve = series length; entry s is time s + 1
    std::size_t regret_start = 0;  // first time index counted in regret (d + 1)
    double scale = 1.0;          // normalization applied to real data
    std::vector<AlgorithmCurves> curves;
    std::vector<ReplicaDiagnostics> replicas;
    std::string rng = sim::Rng::kAlgorithm;
    double wall_seconds = 0.0;

    [[nodiscard]] const AlgorithmCurves& curve(Algorithm a) const {
        for (const auto& c : curves)
            if (c.algorithm == a) return c;
        throw std::out_of_range("algorithm not in result: " + to_string(a));
    }
};

inline std::size_t thread_limit(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ARMA_ONLINE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        log::warn("ignoring malformed ARMA_ONLINE_THREADS");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

struct ReplicaOutput {
    ReplicaDiagnostics diag;
    std::vector<std::vector<double>> losses;  // per algorithm
    std::vector<double> comparator;           // per step (0 outside the regret window)
};

struct PreparedSeries {
    std::vector<double> values;
    std::vector<double> noises;
    std::optional<ArmaCoefficients> coeffs;
    double scale = 1.0;
};

inline PreparedSeries prepare_series(const ExperimentConfig& cfg, std::uint64_t seed) {
    PreparedSeries p;
    std::visit(
        [&](const auto& sc) {
            using S = std::decay_t<decltype(sc)>;
            if constexpr (std::is_same_v<S, SettingScenario>) {
                sim::SettingOptions so;
                so.burn_in = cfg.burn_in;
                so.rescale_drift = cfg.rescale_drift;
                auto tr = sim::setting(sc.number, cfg.T, seed, so);
                p.values = std::move(tr.values);
                p.noises = std::move(tr.noises);
                if (std::holds_alternative<sim::ConstantSchedule>(tr.schedule->kind())) p.coeffs = tr.schedule->at(1);
            } else if constexpr (std::is_same_v<S, CsvScenario>) {
                auto in = ingest_csv(sc.path, sc.column, sc.normalize);
                p.values = std::move(in.values);
                p.scale = in.scale;
            } else {
                p.values = sc.values;
                p.noises = sc.noises;
            }
        },
        cfg.scenario);
    if (p.values.size() < 2) throw std::invalid_argument("series needs at least two observations");
    return p;
}

inline std::unique_ptr<OnlinePredictor> make_predictor(Algorithm a, const ExperimentConfig& cfg,
                                                       const LossFunction& loss, const DerivedParams& params,
                                                       std::size_t q) {
    switch (a) {
        case Algorithm::ons: return std::make_unique<OnsPredictor>(loss, params);
        case Algorithm::ogd: return std::make_unique<OgdPredictor>(loss, params);
        case Algorithm::yule_walker:
            return std::make_unique<baselines::YuleWalkerPredictor>(cfg.yw_order.value_or(params.d), cfg.yw_refit_every);
        case Algorithm::rls: {
            baselines::RlsOptions o;
            o.k = params.k;
            o.q = q;
            o.forgetting = cfg.rls_forgetting;
            return std::make_unique<baselines::RlsPredictor>(o);
        }
    }
    throw std::logic_error("unhandled algorithm");
}

}  // namespace detail

/// Resolved model orders and run constants for a configuration.
struct ResolvedOrders {
    std::size_t k;
    std::size_t q;
    DerivedParams params;
};

inline ResolvedOrders resolve_orders(const ExperimentConfig& cfg, std::size_t series_length) {
    std::size_t k = 5, q = 2;
    std::optional<std::size_t> d = cfg.d;
    if (auto* s = std::get_if<SettingScenario>(&cfg.scenario)) {
        std::tie(k, q) = sim::setting_order(s->number);
        if (!d) d = 10;
    }
    if (cfg.k) k = *cfg.k;
    if (cfg.q) q = *cfg.q;
    ParamInputs in;
    in.k = k;
    in.q = q;
    in.horizon = series_length;
    in.lipschitz = cfg.L;
    in.m_max = cfg.M_max;
    in.epsilon_ma = cfg.epsilon_ma;
    in.d_override = d;
    in.rates = cfg.rates;
    return {k, q, derive_params(in, loss_by_name(cfg.loss))};
}

/// Runs every requested algorithm on every replica and aggregates curves.
/// Replica r uses seed base_seed + r. Output is independent of thread count.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto started = std::chrono::steady_clock::now();
    const LossFunction loss = loss_by_name(cfg.loss);

    // Real and trace scenarios are deterministic; load once to size things.
    const auto probe = detail::prepare_series(cfg, cfg.base_seed);
    const ResolvedOrders orders = resolve_orders(cfg, probe.values.size());
    const DerivedParams& params = orders.params;
    if (probe.values.size() <= params.d) throw std::invalid_argument("series is not longer than d = m + k");
    if (!params.lambda &&
        std::find(cfg.algorithms.begin(), cfg.algorithms.end(), Algorithm::ons) != cfg.algorithms.end())
        throw std::invalid_argument("arma-ons needs an exp-concave loss; '" + cfg.loss + "' is convex only");

    const std::size_t n_alg = cfg.algorithms.size();
    std::vector<detail::ReplicaOutput> outputs(cfg.replicas);
    std::vector<std::exception_ptr> errors(cfg.replicas);

    auto run_replica = [&](std::size_t r) {
        try {
            const std::uint64_t seed = cfg.base_seed + r;
            const auto series = r == 0 ? probe : detail::prepare_series(cfg, seed);
            auto& out = outputs[r];
            out.diag.seed = seed;
            out.diag.assumptions = validate_assumptions(
                series.values, series.coeffs,
                series.noises.empty() ? std::nullopt : std::optional<std::span<const double>>(series.noises));
            for (Algorithm a : cfg.algorithms) {
                auto pred = detail::make_predictor(a, cfg, loss, params, orders.q);
                try {
                    // t = 1 is scored against the zero prediction of an empty history
                    auto l = run_online(series.values, *pred, loss, params.rates);
                    l.insert(l.begin(), loss.evaluate(series.values[0], 0.0));
                    out.losses.push_back(std::move(l));
                } catch (const StepError& e) {
                    throw std::runtime_error(to_string(a) + " " + e.what());
                }
            }
            HindsightResult best;
            try {
                best = best_in_hindsight(series.values, params.d, loss);
            } catch (const HindsightError& e) {
                log::warn(std::string("replica ") + std::to_string(r) + ": " + e.what() + "; using best iterate");
                best = e.best_iterate();
                out.diag.comparator_converged = false;
            }
            out.diag.gamma_star = best.gamma;
            out.diag.comparator_loss = best.total_loss;
            const std::size_t steps = series.values.size();
            out.comparator.assign(steps, 0.0);
            double gen = 0.0;
            for (std::size_t t = params.d; t < steps; ++t) {
                double pred = 0.0;
                for (std::size_t i = 1; i <= params.d; ++i)
                    pred += best.gamma[static_cast<Eigen::Index>(i - 1)] * series.values[t - i];
                out.comparator[t] = loss.evaluate(series.values[t], pred);
                if (!series.noises.empty())
                    gen += loss.evaluate(series.values[t], series.values[t] - series.noises[t]);
            }
            if (!series.noises.empty()) out.diag.generator_loss = gen;
        } catch (...) {
            errors[r] = std::current_exception();
        }
    };

    const std::size_t workers = std::min(thread_limit(cfg.threads), cfg.replicas);
    if (workers <= 1) {
        for (std::size_t r = 0; r < cfg.replicas; ++r) run_replica(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t r = next++; r < cfg.replicas; r = next++) run_replica(r);
            });
    }
    for (std::size_t r = 0; r < cfg.replicas; ++r) {
        if (!errors[r]) continue;
        try {
            std::rethrow_exception(errors[r]);
        } catch (const std::exception& e) {
            throw std::runtime_error("replica " + std::to_string(r) + " (seed " + std::to_string(cfg.base_seed + r) +
                                     "): " + e.what());
        }
    }

    ExperimentResult res;
    res.config = cfg;
    res.label = scenario_label(cfg.scenario);
    res.d = params.d;
    res.params = params;
    res.steps = probe.values.size();
    res.regret_start = params.d + 1;
    res.scale = probe.scale;
    const std::size_t steps = res.steps;
    const std::size_t window = std::max<std::size_t>(steps / 10, 1);
    const double inv_r = 1.0 / static_cast<double>(cfg.replicas);

    for (std::size_t ai = 0; ai < n_alg; ++ai) {
        AlgorithmCurves c;
        c.algorithm = cfg.algorithms[ai];
        c.avg_loss.assign(steps, 0.0);
        c.cum_regret.assign(steps, 0.0);
        for (std::size_t r = 0; r < cfg.replicas; ++r) {
            const auto& losses = outputs[r].losses[ai];
            if (losses.size() != steps) throw std::runtime_error("replica series lengths differ");
            std::vector<double> run_mean(steps), regret(steps);
            double sum = 0.0, learner_window = 0.0, comp_window = 0.0, tail = 0.0;
            for (std::size_t s = 0; s < steps; ++s) {
                sum += losses[s];
                run_mean[s] = sum / static_cast<double>(s + 1);
                if (s >= params.d) {
                    learner_window += losses[s];
                    comp_window += outputs[r].comparator[s];
                }
                regret[s] = learner_window - comp_window;
                if (s >= steps - window) tail += losses[s];
            }
            for (std::size_t s = 0; s < steps; ++s) {
                c.avg_loss[s] += run_mean[s] * inv_r;
                c.cum_regret[s] += regret[s] * inv_r;
            }
            c.replica_final_avg_loss.push_back(run_mean.back());
            c.replica_final_regret.push_back(regret.back());
            c.replica_trailing_mean.push_back(tail / static_cast<double>(window));
            c.replica_window_loss.push_back(learner_window);
            if (cfg.keep_replica_curves) {
                c.replica_avg_loss.push_back(std::move(run_mean));
                c.replica_cum_regret.push_back(std::move(regret));
            }
        }
        double tm = 0.0;
        for (double v : c.replica_trailing_mean) tm += v;
        c.trailing_mean = tm * inv_r;
        res.curves.push_back(std::move(c));
    }
    for (auto& o : outputs) res.replicas.push_back(std::move(o.diag));
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return res;
}


inline std::string format_sig10(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::string result_basename(const ExperimentResult& r) {
    return r.label + "_T" + std::to_string(r.steps) + "_R" + std::to_string(r.config.replicas) + "_seed" +
           std::to_string(r.config.base_seed);
}

enum class Format { csv, svg };

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& p) {
    out.close();
    if (!out) throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline void write_svg(std::ostream& out, const ExperimentResult& r) {
    constexpr double width = 800, height = 480, left = 70, right = 180, top = 30, bottom = 50;
    constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    const double pw = width - left - right, ph = height - top - bottom;
    const std::size_t n = r.steps;
    // early transients can dwarf the converged level; scale to the later part
    double ymax = 0.0;
    for (const auto& c : r.curves)
        for (std::size_t s = n / 20; s < n; ++s)
            if (std::isfinite(c.avg_loss[s])) ymax = std::max(ymax, c.avg_loss[s]);
    ymax = ymax > 0.0 ? 1.1 * ymax : 1.0;
    auto px = [&](std::size_t s) { return left + pw * (n > 1 ? static_cast<double>(s) / static_cast<double>(n - 1) : 0.0); };
    auto py = [&](double v) { return top + ph * (1.0 - std::clamp(v / ymax, 0.0, 1.0)); };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"18\">" << r.label << ": average loss, " << r.config.replicas
        << " replicas</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = ymax * i / 4.0;
        out << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << format_sig10(v)
            << "</text>\n";
        const std::size_t s = (n - 1) * static_cast<std::size_t>(i) / 4;
        out << "<text x=\"" << px(s) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << s + 1
            << "</text>\n";
    }
    out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">t</text>\n";
    const std::size_t stride = std::max<std::size_t>(n / 1000, 1);
    for (std::size_t ci = 0; ci < r.curves.size(); ++ci) {
        const auto& c = r.curves[ci];
        const char* color = colors[ci % 4];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t s = 0; s < n; s += stride) out << format_sig10(px(s)) << ',' << format_sig10(py(c.avg_loss[s])) << ' ';
        out << format_sig10(px(n - 1)) << ',' << format_sig10(py(c.avg_loss[n - 1])) << "\"/>\n";
        const double ly = top + 16.0 + 20.0 * static_cast<double>(ci);
        out << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\">" << to_string(c.algorithm) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace detail

inline void write_curves_csv(std::ostream& out, const ExperimentResult& r) {
    out << "t,algorithm,avg_loss,cum_regret\n";
    for (const auto& c : r.curves) {
        const std::string name = to_string(c.algorithm);
        for (std::size_t s = 0; s < r.steps; ++s)
            out << s + 1 << ',' << name << ',' << format_sig10(c.avg_loss[s]) << ',' << format_sig10(c.cum_regret[s])
                << '\n';
    }
}

/// Writes <basename>.csv / .svg plus a .meta sidecar (RNG identifier, config
/// echo, derived constants, wall clock). Returns the written paths.
inline std::vector<std::filesystem::path> emit(const ExperimentResult& r, const std::filesystem::path& out_dir,
                                               const std::vector<Format>& formats = {Format::csv, Format::svg}) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create '" + out_dir.string() + "': " + ec.message());
    const std::string base = result_basename(r);
    std::vector<std::filesystem::path> written;
    for (Format f : formats) {
        const auto path = out_dir / (base + (f == Format::csv ? ".csv" : ".svg"));
        auto out = detail::open_output(path);
        if (f == Format::csv) write_curves_csv(out, r);
        else detail::write_svg(out, r);
        detail::finish_output(out, path);
        written.push_back(path);
    }
    const auto meta = out_dir / (base + ".meta");
    auto out = detail::open_output(meta);
    const auto& c = r.config;
    out << "rng = " << r.rng << '\n'
        << "scenario = " << r.label << '\n'
        << "algorithms = ";
    for (std::size_t i = 0; i < c.algorithms.size(); ++i) out << (i ? "," : "") << to_string(c.algorithms[i]);
    out << '\n'
        << "T = " << r.steps << '\n'
        << "replicas = " << c.replicas << '\n'
        << "base_seed = " << c.base_seed << '\n'
        << "loss = " << c.loss << '\n'
        << "m = " << r.params.m << '\n'
        << "k = " << r.params.k << '\n'
        << "d = " << r.d << '\n'
        << "eta_ons = " << sim::format_full(r.params.eta_ons) << '\n'
        << "a0_epsilon = " << sim::format_full(r.params.a0_epsilon) << '\n'
        << "paper_literal_eta = " << (c.rates.paper_literal_eta ? "true" : "false") << '\n'
        << "fixed_ogd_step = " << (c.rates.fixed_ogd_step ? "true" : "false") << '\n'
        << "clip_predictions = " << (c.rates.clip_predictions ? "true" : "false") << '\n'
        << "normalization_scale = " << sim::format_full(r.scale) << '\n';
    for (const auto& cv : r.curves)
        out << "trailing_mean." << to_string(cv.algorithm) << " = " << format_sig10(cv.trailing_mean) << '\n';
    std::size_t unconverged = 0;
    for (const auto& d : r.replicas) unconverged += d.comparator_converged ? 0 : 1;
    out << "comparator_unconverged_replicas = " << unconverged << '\n'
        << "wall_seconds = " << format_sig10(r.wall_seconds) << '\n';
    detail::finish_output(out, meta);
    written.push_back(meta);
    return written;
}

struct BenchRow {
    std::size_t T;
    Algorithm algorithm;
    double mean_regret;
    double regret_over_log2;   // regret / (ln T)^2
    double regret_over_sqrt;   // regret / sqrt(T)
};

struct BenchResult {
    std::vector<ExperimentResult> runs;
    std::vector<BenchRow> rows;
};

/// Runs the experiment once per horizon and tabulates mean final regret.
inline BenchResult run_bench(ExperimentConfig cfg, const std::vector<std::size_t>& horizons) {
    if (horizons.empty()) throw std::invalid_argument("bench needs at least one T");
    BenchResult out;
    for (std::size_t T : horizons) {
        cfg.T = T;
        auto r = run_experiment(cfg);
        const double n = static_cast<double>(r.steps);
        for (const auto& c : r.curves) {
            double m = 0.0;
            for (double v : c.replica_final_regret) m += v;
            m /= static_cast<double>(c.replica_final_regret.size());
            const double lg = std::log(n);
            out.rows.push_back({r.steps, c.algorithm, m, m / (lg * lg), m / std::sqrt(n)});
        }
        out.runs.push_back(std::move(r));
    }
    return out;
}

inline std::vector<std::filesystem::path> emit_bench(const BenchResult& b, const std::filesystem::path& out_dir,
                                                     const std::vector<Format>& formats = {Format::csv, Format::svg}) {
    std::vector<std::filesystem::path> written;
    for (const auto& r : b.runs) {
        auto w = emit(r, out_dir, formats);
        written.insert(written.end(), w.begin(), w.end());
    }
    const auto& first = b.runs.front();
    const auto path = out_dir / (first.label + "_bench_R" + std::to_string(first.config.replicas) + "_seed" +
                                 std::to_string(first.config.base_seed) + "_summary.csv");
    auto out = detail::open_output(path);
    out << "T,algorithm,mean_regret,regret_over_log2T,regret_over_sqrtT\n";
    for (const auto& row : b.rows)
        out << row.T << ',' << to_string(row.algorithm) << ',' << format_sig10(row.mean_regret) << ','
            << format_sig10(row.regret_over_log2) << ',' << format_sig10(row.regret_over_sqrt) << '\n';
    detail::finish_output(out, path);
    written.push_back(path);
    return written;
}

}  // namespace arma_online::harness
