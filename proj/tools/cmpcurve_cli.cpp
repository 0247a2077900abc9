// cmpcurve: cross-validated predictiveness curves for competing-risks data.
//
//   cmpcurve estimate   --data d.csv --tau 4 [--out dir]
//   cmpcurve simulate   --setting 1 --n 400 --replicates 200 [--out dir]
//   cmpcurve true-curve --setting 2 --tau 4 [--mc-size N]
//   cmpcurve rerun      --manifest dir/manifest.json [--out dir]
//
// Exit status: 0 success, 2 invalid input or arguments, 3 estimation failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "cmpcurve/analysis.hpp"
#include "cmpcurve/io.hpp"
#include "cmpcurve/simgen.hpp"
#include "run_spec.hpp"

#ifndef CMPCURVE_VERSION
#define CMPCURVE_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace cmpcurve;
using cli::json;
using cli::RunSpec;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;

int exit_code_for(ErrorCode c) {
    switch (c) {
        case ErrorCode::Parse:
        case ErrorCode::Io:
        case ErrorCode::EmptyInput:
        case ErrorCode::NegativeTime:
        case ErrorCode::BadEventCode:
        case ErrorCode::RaggedCovariates:
        case ErrorCode::NonFinite:
        case ErrorCode::NoCause1Events:
        case ErrorCode::InvalidConfig:
        case ErrorCode::UnknownSetting:
        case ErrorCode::ZeroGhatAtDeterminable:
        case ErrorCode::TooFewRecords:
        case ErrorCode::DimensionMismatch:
            return kExitInput;
        default:
            return kExitEstimation;
    }
}

struct RunResult {
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
    json counts = json::object();
    std::optional<std::string> input_checksum;
};

// Everything except the execution block is a function of the spec and input.
struct ManifestHeader {
    json body;
    std::string run_id;
};

ManifestHeader manifest_header(const RunSpec& spec, const std::optional<std::string>& checksum) {
    ManifestHeader h;
    h.body["tool"] = "cmpcurve";
    h.body["version"] = CMPCURVE_VERSION;
    h.body["command"] = spec.command;
    h.body["arguments"] = cli::arguments_to_json(spec);
    h.body["config"] = cli::config_to_json(spec.config);
    h.body["seed"] = spec.config.seed;
    if (checksum) h.body["input"] = {{"path", spec.data_path}, {"fnv1a64", *checksum}};
    h.run_id = hex64(fnv1a64(h.body.dump()));
    h.body["run_id"] = h.run_id;
    return h;
}

std::string provenance(const std::string& run_id) { return "manifest=manifest.json run_id=" + run_id; }

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunResult run_estimate(const RunSpec& spec, const fs::path& out_dir, unsigned threads) {
    RunResult res;
    const std::string bytes = read_file_bytes(spec.data_path);
    res.input_checksum = hex64(fnv1a64(bytes));
    std::istringstream in(bytes);
    const CsvDataset csv = read_dataset_csv(in, spec.declared_k);
    spec.config.validate();

    const Analysis a = analyze(csv.data, spec.config, spec.p_grid, threads);
    const std::string run_id = manifest_header(spec, res.input_checksum).run_id;

    std::ostringstream curve, inverse;
    write_curve_csv(curve, a.curve, provenance(run_id));
    write_inverse_csv(inverse, a.inverse, provenance(run_id));
    write_text(out_dir / "curve.csv", curve.str());
    write_text(out_dir / "inverse.csv", inverse.str());
    res.outputs = {"curve.csv", "inverse.csv"};
    res.warnings = a.warnings;
    res.counts = {{"records", csv.data.size()},
                  {"covariates", csv.data.d},
                  {"failed_repetitions", a.failed_repetitions},
                  {"failed_replicates", a.failed_replicates},
                  {"replicates_used", a.e_used}};
    std::printf("estimate: n=%zu d=%zu, %d/%d CV repetitions and %d/%d perturbation replicates used\n",
                csv.data.size(), csv.data.d, spec.config.cv_repeats - a.failed_repetitions, spec.config.cv_repeats,
                a.e_used, spec.config.perturb_e);
    return res;
}

RunResult run_simulate(const RunSpec& spec, const fs::path& out_dir, unsigned threads) {
    RunResult res;
    const Setting setting = parse_setting(spec.setting);
    if (spec.n < 4) throw Error(ErrorCode::InvalidConfig, "--n must be at least 4");
    if (spec.replicates < 1) throw Error(ErrorCode::InvalidConfig, "--replicates must be positive");
    if (!spec.metric.empty() && spec.metric != "rv" && spec.metric != "rinv")
        throw Error(ErrorCode::InvalidConfig, "--metric must be rv or rinv");
    spec.config.validate();

    StudyOptions opt;
    opt.v_points = spec.v_points;
    opt.p_points = spec.p_points;
    opt.mc_size = spec.mc_size;
    opt.mc_rounds = spec.rounds;
    opt.threads = threads;
    const StudyReport rep = run_sim_study(setting, spec.n, spec.replicates, spec.config, opt);

    const std::string run_id = manifest_header(spec, std::nullopt).run_id;
    std::ostringstream csv;
    write_study_csv(csv, rep, spec.metric, provenance(run_id));
    write_text(out_dir / "study.csv", csv.str());
    res.outputs = {"study.csv"};
    res.warnings = rep.warnings;
    res.counts = {{"replicates_requested", rep.replicates_requested}, {"replicates_failed", rep.replicates_failed}};
    std::printf("simulate: setting %d, n=%zu, %d/%d replicates used\n", spec.setting, spec.n,
                rep.replicates_requested - rep.replicates_failed, rep.replicates_requested);
    return res;
}

RunResult run_true_curve(const RunSpec& spec, const fs::path& out_dir, unsigned) {
    RunResult res;
    const Setting setting = parse_setting(spec.setting);
    spec.config.validate();
    const auto grid = spec.config.grid();
    const TrueCurve tc = setting == Setting::S1
                             ? true_curve_setting1(grid, spec.config.tau)
                             : true_curve_setting2(grid, spec.mc_size, spec.config.seed, spec.config.tau, spec.rounds);
    const std::string run_id = manifest_header(spec, std::nullopt).run_id;
    std::ostringstream csv;
    write_true_curve_csv(csv, tc, provenance(run_id));
    write_text(out_dir / "true_curve.csv", csv.str());
    res.outputs = {"true_curve.csv"};
    if (tc.beta_tilde) res.counts = {{"beta_tilde", std::vector<double>(tc.beta_tilde->begin(), tc.beta_tilde->end())}};
    std::printf("true-curve: setting %d, %zu grid points\n", spec.setting, grid.size());
    return res;
}

int execute(const RunSpec& spec, const fs::path& out_dir, unsigned threads) {
    const auto start = std::chrono::steady_clock::now();
    const std::string started = utc_now();
    fs::create_directories(out_dir);

    RunResult res;
    if (spec.command == "estimate") res = run_estimate(spec, out_dir, threads);
    else if (spec.command == "simulate") res = run_simulate(spec, out_dir, threads);
    else res = run_true_curve(spec, out_dir, threads);

    ManifestHeader h = manifest_header(spec, res.input_checksum);
    h.body["outputs"] = res.outputs;
    h.body["counts"] = res.counts;
    h.body["warnings"] = res.warnings;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    h.body["execution"] = {{"threads", threads}, {"started_utc", started}, {"wall_clock_seconds", secs}};
    write_text(out_dir / "manifest.json", h.body.dump(2) + "\n");

    for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("wrote %s (run_id %s)\n", (out_dir / "manifest.json").string().c_str(), h.run_id.c_str());
    return 0;
}

// Flags shared by all subcommands that feed StudyConfig.
struct ConfigFlags {
    std::string config_path;
    double tau = 0.0;
    std::string param;
    int knots = 0;
    double nu0 = 0.0, nu1 = 0.0, grid_step = 0.0;
    int cv_repeats = 0, e = 0;
    std::uint64_t seed = 0;
    double level = 0.0;
    std::vector<CLI::Option*> opts;

    void add(CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON file with StudyConfig keys")->check(CLI::ExistingFile);
        opts = {
            sub->add_option("--tau", tau, "Prediction horizon")->check(CLI::PositiveNumber),
            sub->add_option("--param", param, "Curve parameterization")->check(CLI::IsMember({"glm", "rcs"})),
            sub->add_option("--knots", knots, "Spline knots")->check(CLI::IsMember({3, 4, 5})),
            sub->add_option("--nu0", nu0, "Lower end of the v grid"),
            sub->add_option("--nu1", nu1, "Upper end of the v grid"),
            sub->add_option("--grid-step", grid_step, "v grid spacing"),
            sub->add_option("--cv-repeats", cv_repeats, "Cross-validation repetitions"),
            sub->add_option("--E", e, "Perturbation replicates"),
            sub->add_option("--seed", seed, "Master seed"),
            sub->add_option("--level", level, "Confidence level"),
        };
    }

    StudyConfig build(double default_tau) const {
        StudyConfig c;
        c.tau = default_tau;
        if (!config_path.empty()) cli::apply_config_json(cli::parse_json_file(config_path), c);
        auto given = [&](std::size_t k) { return opts[k]->count() > 0; };
        if (given(0)) c.tau = tau;
        if (given(1)) c.parameterization = parse_parameterization(param);
        if (given(2)) c.knots_q = knots;
        if (given(3)) c.grid_lo = nu0;
        if (given(4)) c.grid_hi = nu1;
        if (given(5)) c.grid_step = grid_step;
        if (given(6)) c.cv_repeats = cv_repeats;
        if (given(7)) c.perturb_e = e;
        if (given(8)) c.seed = seed;
        if (given(9)) c.level = level;
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-validated predictiveness curves for competing-risks data"};
    app.set_version_flag("--version", std::string(CMPCURVE_VERSION));
    app.require_subcommand(1);

    std::string out_dir = ".";
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
    };

    RunSpec spec;
    std::vector<double> p_list, v_list;
    int declared_k = 0;

    auto* est = app.add_subcommand("estimate", "Estimate R(v) and R^-1(p) with perturbation intervals");
    ConfigFlags est_cfg;
    est_cfg.add(est);
    add_common(est);
    est->add_option("--data", spec.data_path, "CSV with columns time,status,<covariates>")->required();
    auto* est_k = est->add_option("--k", declared_k, "Number of causes (default: largest status code)");
    auto* est_p = est->add_option("--p", p_list, "Risk thresholds for R^-1 (default 0.01..0.99)")->delimiter(',');

    auto* sim = app.add_subcommand("simulate", "Monte-Carlo study: Bias, ESE, ASE and CP");
    ConfigFlags sim_cfg;
    sim_cfg.add(sim);
    add_common(sim);
    sim->add_option("--setting", spec.setting, "Simulation setting (1 or 2)")->required();
    sim->add_option("--n", spec.n, "Sample size per replicate")->required();
    sim->add_option("--replicates", spec.replicates, "Number of simulated datasets")->required();
    sim->add_option("--metric", spec.metric, "rv or rinv (default both)");
    auto* sim_v = sim->add_option("--v", v_list, "Score quantiles for R(v)")->delimiter(',');
    auto* sim_p = sim->add_option("--p", p_list, "Risk thresholds for R^-1(p)")->delimiter(',');
    sim->add_option("--mc-size", spec.mc_size, "Monte-Carlo size of the setting-2 truth");
    sim->add_option("--rounds", spec.rounds, "Monte-Carlo rounds of the setting-2 truth");

    auto* tru = app.add_subcommand("true-curve", "Tabulate the true curve of a simulation setting");
    ConfigFlags tru_cfg;
    tru_cfg.add(tru);
    add_common(tru);
    tru->add_option("--setting", spec.setting, "Simulation setting (1 or 2)")->required();
    tru->add_option("--mc-size", spec.mc_size, "Monte-Carlo size (setting 2)");
    tru->add_option("--rounds", spec.rounds, "Monte-Carlo rounds (setting 2)");

    auto* rerun = app.add_subcommand("rerun", "Repeat the run recorded in a manifest");
    std::string manifest_path;
    rerun->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required()->check(CLI::ExistingFile);
    add_common(rerun);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        if (est->parsed()) {
            spec.command = "estimate";
            spec.config = est_cfg.build(0.0);
            if (est_k->count()) spec.declared_k = declared_k;
            spec.p_grid = est_p->count() ? p_list : inverse_population_grid();
        } else if (sim->parsed()) {
            spec.command = "simulate";
            spec.config = sim_cfg.build(4.0);
            spec.v_points = sim_v->count() ? v_list : std::vector<double>{0.1, 0.3, 0.5, 0.7};
            spec.p_points = sim_p->count() ? p_list : std::vector<double>{0.2, 0.3, 0.4, 0.5};
        } else if (tru->parsed()) {
            spec.command = "true-curve";
            spec.config = tru_cfg.build(4.0);
        } else {
            spec = cli::spec_from_manifest(cli::parse_json_file(manifest_path));
            const json m = cli::parse_json_file(manifest_path);
            if (m.contains("input")) {
                const std::string now = hex64(fnv1a64(read_file_bytes(spec.data_path)));
                if (now != m["input"].value("fnv1a64", ""))
                    throw Error(ErrorCode::Io, "input '" + spec.data_path + "' changed since the recorded run (checksum " +
                                                   now + ")");
            }
        }
        for (double p : spec.p_grid)
            if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidConfig, "--p values must lie in (0, 1)");
        return execute(spec, out_dir, threads);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitEstimation;
    }
}
