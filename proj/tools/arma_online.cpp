#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arma_online/harness.hpp"
#include "arma_online/log.hpp"
#include "arma_online/simgen.hpp"

namespace ao = arma_online;
namespace h = arma_online::harness;

namespace {

struct RunFlags {
    std::string config;
    int setting = 1;
    std::string T;
    std::size_t replicas = 1;
    std::uint64_t seed = 0;
    std::size_t k = 0, q = 0, d = 0;
    std::string algos = "arma-ons,arma-ogd";
    std::string out = "results";
    std::string formats = "csv,svg";
    std::size_t threads = 0;
    bool literal_eta = false, fixed_ogd = false, clip = false;
};

void add_common(CLI::App* app, RunFlags& f, bool with_setting, bool multi_T) {
    app->add_option("--config", f.config, "key = value file mirroring ExperimentConfig; flags override it")
        ->check(CLI::ExistingFile);
    if (with_setting) app->add_option("--setting", f.setting, "synthetic setting")->check(CLI::Range(1, 4));
    app->add_option("--T", f.T, multi_T ? "comma-separated horizons" : "horizon (synthetic settings)");
    app->add_option("--replicas", f.replicas, "independent replicas")->check(CLI::PositiveNumber);
    app->add_option("--seed", f.seed, "base seed; replica r uses seed + r");
    app->add_option("--k", f.k, "AR order")->check(CLI::PositiveNumber);
    app->add_option("--q", f.q, "MA order")->check(CLI::PositiveNumber);
    app->add_option("--d", f.d, "force the AR(m+k) predictor order")->check(CLI::PositiveNumber);
    app->add_option("--algos", f.algos, "arma-ons,arma-ogd,yule-walker,rls-surrogate");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--formats", f.formats, "csv,svg");
    app->add_option("--threads", f.threads, "parallel replicas (default ARMA_ONLINE_THREADS or cores)");
    app->add_flag("--paper-literal-eta", f.literal_eta, "ONS eta = 1/2 min{4GD, lambda} instead of 1/2 min{1/(4GD), lambda}");
    app->add_flag("--fixed-ogd-step", f.fixed_ogd, "OGD step D/(G sqrt(T)) instead of D/(G sqrt(t))");
    app->add_flag("--clip-predictions", f.clip, "clip predictions to [-1, 1]");
}

std::vector<std::size_t> parse_horizons(const std::string& s) {
    std::vector<std::size_t> out;
    for (const auto& tok : h::split(s, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(tok, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != tok.size() || v < 2) throw std::invalid_argument("--T: expected integers >= 2, got '" + tok + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw std::invalid_argument("--T: empty list");
    return out;
}

std::vector<h::Format> parse_formats(const std::string& s) {
    std::vector<h::Format> out;
    for (const auto& tok : h::split(s, ',')) {
        if (tok == "csv") out.push_back(h::Format::csv);
        else if (tok == "svg") out.push_back(h::Format::svg);
        else throw std::invalid_argument("--formats: expected csv and/or svg, got '" + tok + "'");
    }
    return out;
}

h::ExperimentConfig build_config(const CLI::App* app, const RunFlags& f, bool setting_scenario) {
    h::ExperimentConfig cfg;
    cfg.algorithms = h::parse_algorithms(f.algos);
    if (!f.config.empty()) cfg = h::load_config(f.config, cfg);
    auto given = [&](const char* name) { return app->count(name) > 0; };
    if (setting_scenario && (given("--setting") || f.config.empty())) cfg.scenario = h::SettingScenario{f.setting};
    if (given("--T")) cfg.T = parse_horizons(f.T).front();
    if (given("--replicas")) cfg.replicas = f.replicas;
    if (given("--seed")) cfg.base_seed = f.seed;
    if (given("--k")) cfg.k = f.k;
    if (given("--q")) cfg.q = f.q;
    if (given("--d")) cfg.d = f.d;
    if (given("--algos")) cfg.algorithms = h::parse_algorithms(f.algos);
    if (given("--threads")) cfg.threads = f.threads;
    if (f.literal_eta) cfg.rates.paper_literal_eta = true;
    if (f.fixed_ogd) cfg.rates.fixed_ogd_step = true;
    if (f.clip) cfg.rates.clip_predictions = true;
    return cfg;
}

void print_written(const std::vector<std::filesystem::path>& paths) {
    for (const auto& p : paths) std::cout << p.string() << '\n';
}

void print_summary(const h::ExperimentResult& r) {
    for (const auto& c : r.curves)
        std::fprintf(stderr, "%s %s: final avg loss %.6g, trailing mean %.6g, regret %.6g\n", r.label.c_str(),
                     h::to_string(c.algorithm).c_str(), c.avg_loss.back(), c.trailing_mean, c.cum_regret.back());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online ARMA prediction experiments"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress warnings");

    RunFlags sim_f;
    auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic trace (t,x,eps)");
    sim_cmd->add_option("--setting", sim_f.setting, "synthetic setting")->check(CLI::Range(1, 4));
    sim_cmd->add_option("--T", sim_f.T, "horizon");
    sim_cmd->add_option("--seed", sim_f.seed, "seed");
    sim_cmd->add_option("--out", sim_f.out, "output directory");

    RunFlags run_f;
    auto* run_cmd = app.add_subcommand("run", "run an experiment");
    add_common(run_cmd, run_f, true, false);

    RunFlags bench_f;
    auto* bench_cmd = app.add_subcommand("bench", "sweep T and summarize regret scaling");
    add_common(bench_cmd, bench_f, true, true);

    RunFlags real_f;
    std::string csv_path, column = "0";
    bool raw = false;
    auto* real_cmd = app.add_subcommand("real", "ingest a CSV column and run on it");
    add_common(real_cmd, real_f, false, false);
    real_cmd->add_option("--csv", csv_path, "input CSV")->required()->check(CLI::ExistingFile);
    real_cmd->add_option("--column", column, "column name or 0-based index");
    real_cmd->add_flag("--no-normalize", raw, "use values as-is instead of dividing by 1.02 max|x|");

    CLI11_PARSE(app, argc, argv);
    if (quiet) ao::log::enabled().store(false);

    try {
        if (*sim_cmd) {
            const std::size_t T = sim_f.T.empty() ? 10'000 : parse_horizons(sim_f.T).front();
            const auto trace = ao::sim::setting(sim_f.setting, T, sim_f.seed);
            std::filesystem::create_directories(sim_f.out);
            const std::string base = "setting" + std::to_string(sim_f.setting) + "_T" + std::to_string(T) + "_seed" +
                                     std::to_string(sim_f.seed) + "_trace";
            const auto csv = std::filesystem::path(sim_f.out) / (base + ".csv");
            ao::sim::write_trace_csv(csv.string(), trace);
            const auto meta = std::filesystem::path(sim_f.out) / (base + ".meta");
            std::ofstream m(meta, std::ios::binary);
            m << "rng = " << trace.rng << "\nsetting = " << sim_f.setting << "\nT = " << T
              << "\nseed = " << sim_f.seed << '\n';
            if (!m) throw std::runtime_error("write failed for '" + meta.string() + "'");
            print_written({csv, meta});
        } else if (*run_cmd) {
            const auto cfg = build_config(run_cmd, run_f, true);
            const auto r = h::run_experiment(cfg);
            print_summary(r);
            print_written(h::emit(r, run_f.out, parse_formats(run_f.formats)));
        } else if (*bench_cmd) {
            auto cfg = build_config(bench_cmd, bench_f, true);
            const auto horizons =
                bench_f.T.empty() ? std::vector<std::size_t>{1'000, 10'000, 100'000} : parse_horizons(bench_f.T);
            const auto b = h::run_bench(cfg, horizons);
            for (const auto& row : b.rows)
                std::fprintf(stderr, "T=%zu %s: regret %.6g, /log^2 T %.6g, /sqrt T %.6g\n", row.T,
                             h::to_string(row.algorithm).c_str(), row.mean_regret, row.regret_over_log2,
                             row.regret_over_sqrt);
            print_written(h::emit_bench(b, bench_f.out, parse_formats(bench_f.formats)));
        } else if (*real_cmd) {
            auto cfg = build_config(real_cmd, real_f, false);
            cfg.scenario = h::CsvScenario{csv_path, column, !raw};
            const auto r = h::run_experiment(cfg);
            print_summary(r);
            print_written(h::emit(r, real_f.out, parse_formats(real_f.formats)));
        }
    } catch (const std::exception& e) {
        std::cerr << "arma_online: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
