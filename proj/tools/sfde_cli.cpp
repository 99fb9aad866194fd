// Batch driver: simulate paths, estimate parameters, run replication studies.
// Exit codes: 0 success, 2 config or input error, 3 numeric failure,
// 4 degenerate experiment.

#include <CLI11.hpp>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sfde/sfde.hpp"

namespace fs = std::filesystem;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir;
    int workers = 0;  // 0 = take from config
    std::string estimator;
    bool warm_start = false;
    std::optional<std::uint64_t> seed_override;
};

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw sfde::config_error("cannot open output file '" + path.string() + "'");
    }
    return out;
}

void write_manifest_file(const fs::path& dir, std::string_view command,
                         const sfde::io::AppConfig& cfg, std::uint64_t seed) {
    auto out = open_output(dir / "manifest");
    sfde::io::write_manifest(out, command, cfg.config_hash, seed);
}

sfde::EstimatorKind pick_estimator(const CliOptions& opts, const sfde::io::AppConfig& cfg) {
    if (opts.estimator == "closed_form") {
        return sfde::EstimatorKind::closed_form;
    }
    if (opts.estimator == "optimizer") {
        return sfde::EstimatorKind::optimizer;
    }
    if (!opts.estimator.empty()) {
        throw sfde::config_error("unknown estimator '" + opts.estimator + "'");
    }
    return cfg.montecarlo ? cfg.montecarlo->estimator : sfde::EstimatorKind::closed_form;
}

fs::path resolve_out_dir(const CliOptions& opts, const sfde::io::AppConfig& cfg) {
    fs::path dir = opts.out_dir.empty() ? fs::path(cfg.output_dir) : fs::path(opts.out_dir);
    fs::create_directories(dir);
    return dir;
}

int run_simulate(const CliOptions& opts) {
    const auto cfg = sfde::io::load_config_file(opts.config_path);
    if (!cfg.simulate.has_value()) {
        throw sfde::config_error("config: missing key 'simulate' for the simulate command");
    }
    const auto spec = sfde::io::model_from_config(cfg);
    sfde::SimConfig sim;
    sim.n = cfg.simulate->n;
    sim.epsilon = cfg.simulate->epsilon;
    sim.substeps = cfg.simulate->substeps;
    sim.seed = opts.seed_override.value_or(cfg.simulate->seed);
    try {
        sim.validate();
        if (!spec.box.contains(cfg.theta_true)) {
            throw std::invalid_argument("theta_true outside the model's parameter box");
        }
    } catch (const std::invalid_argument& e) {
        throw sfde::config_error(std::string("config: ") + e.what());
    }

    const auto path = sfde::simulate_path(spec, sim, cfg.theta_true);
    const fs::path dir = resolve_out_dir(opts, cfg);
    {
        auto out = open_output(dir / "path.csv");
        sfde::io::write_path_csv(out, path);
    }
    write_manifest_file(dir, "simulate", cfg, sim.seed);

    std::cout << "wrote " << (dir / "path.csv").string() << ": " << path.size()
              << " rows, final state (";
    for (int i = 0; i < path.d(); ++i) {
        std::cout << (i ? ", " : "") << sfde::io::format_double(path.at(path.n)[i]);
    }
    std::cout << ")\n";
    return 0;
}

int run_estimate(const CliOptions& opts, const std::string& path_csv) {
    const auto cfg = sfde::io::load_config_file(opts.config_path);
    const auto spec = sfde::io::model_from_config(cfg);

    std::ifstream in(path_csv);
    if (!in) {
        throw sfde::config_error("cannot open path file '" + path_csv + "'");
    }
    const auto path = sfde::io::read_path_csv(in);
    if (path.d() != spec.d) {
        throw sfde::config_error("path file dimension does not match the model");
    }
    if (cfg.simulate.has_value()) {
        if (path.n != cfg.simulate->n || path.epsilon != cfg.simulate->epsilon) {
            throw sfde::config_error("path metadata (n, epsilon) disagrees with the config");
        }
    }
    if (path.delta != spec.delay.delta()) {
        throw sfde::config_error("path metadata delta disagrees with the model's delay horizon");
    }

    const auto kind = pick_estimator(opts, cfg);
    Eigen::VectorXd theta_hat;
    double contrast_value = 0.0;
    bool converged = true;
    const auto ws = sfde::ContrastWorkspace::build(path, spec.delay);
    if (kind == sfde::EstimatorKind::closed_form) {
        theta_hat = sfde::closed_form_benchmark(path);
        contrast_value = sfde::contrast(ws, spec, spec.box.clamp(theta_hat), path.epsilon, path.n);
    } else {
        const auto start = opts.warm_start ? cfg.theta_true : spec.box.center();
        const auto result = sfde::minimize_contrast(ws, spec, path.epsilon, path.n, start);
        theta_hat = result.theta_hat;
        contrast_value = result.contrast_value;
        converged = result.converged;
    }

    const fs::path dir = resolve_out_dir(opts, cfg);
    {
        auto out = open_output(dir / "estimate.csv");
        sfde::io::write_estimate_csv(out, spec.box.p(), spec.box.q(), theta_hat, contrast_value,
                                     converged);
    }
    write_manifest_file(dir, "estimate", cfg, path.seed);
    sfde::io::write_estimate_csv(std::cout, spec.box.p(), spec.box.q(), theta_hat, contrast_value,
                                 converged);
    return 0;
}

void print_table(const sfde::MonteCarloSummary& summary) {
    const auto names = sfde::io::coordinate_names(summary.p, summary.q);
    std::map<double, std::vector<const sfde::CellSummary*>> by_epsilon;
    for (const auto& cell : summary.cells) {
        by_epsilon[cell.epsilon].push_back(&cell);
    }
    for (const auto& [eps, cells] : by_epsilon) {
        std::cout << "epsilon = " << sfde::io::format_double(eps) << "\n";
        std::cout << std::left << std::setw(10) << "coord";
        for (const auto* cell : cells) {
            std::cout << std::setw(22) << ("n=" + std::to_string(cell->n));
        }
        std::cout << "\n";
        for (std::size_t c = 0; c < names.size(); ++c) {
            std::cout << std::setw(10) << names[c];
            for (const auto* cell : cells) {
                std::ostringstream item;
                item << std::setprecision(5) << std::fixed
                     << cell->mean[static_cast<Eigen::Index>(c)] << " ("
                     << cell->sd[static_cast<Eigen::Index>(c)] << ")";
                std::cout << std::setw(22) << item.str();
            }
            std::cout << "\n";
        }
    }
}

int run_montecarlo(const CliOptions& opts) {
    const auto cfg = sfde::io::load_config_file(opts.config_path);
    if (!cfg.montecarlo.has_value()) {
        throw sfde::config_error("config: missing key 'montecarlo' for the montecarlo command");
    }
    sfde::ExperimentPlan plan;
    plan.model = std::make_shared<sfde::ModelSpec>(sfde::io::model_from_config(cfg));
    plan.theta_true = cfg.theta_true;
    plan.grid = cfg.montecarlo->grid;
    plan.replications = cfg.montecarlo->replications;
    plan.master_seed = opts.seed_override.value_or(cfg.montecarlo->master_seed);
    plan.estimator = pick_estimator(opts, cfg);
    plan.warm_start = opts.warm_start || cfg.montecarlo->warm_start;
    try {
        plan.validate();
    } catch (const std::invalid_argument& e) {
        throw sfde::config_error(std::string("config: ") + e.what());
    }
    const int workers = opts.workers > 0 ? opts.workers : cfg.workers;

    const auto summary = sfde::run_experiment(plan, workers);

    const fs::path dir = resolve_out_dir(opts, cfg);
    {
        auto out = open_output(dir / "summary.csv");
        sfde::io::write_summary_csv(out, summary);
    }
    // Q-Q and chi-square diagnostics describe the last grid cell (list the
    // most asymptotic cell last to match the ideal-case plots).
    const auto& cell = summary.cells.back();
    const auto names = sfde::io::coordinate_names(summary.p, summary.q);
    for (std::size_t c = 0; c < names.size(); ++c) {
        std::vector<double> z(cell.z_samples.rows());
        for (Eigen::Index i = 0; i < cell.z_samples.rows(); ++i) {
            z[i] = cell.z_samples(i, static_cast<Eigen::Index>(c));
        }
        auto out = open_output(dir / ("qq_normal_" + names[c] + ".csv"));
        sfde::io::write_qq_csv(out, "normal_" + names[c],
                               sfde::qq_data(z, sfde::ReferenceDist::normal()));
    }
    {
        auto out = open_output(dir / "qq_chi2.csv");
        sfde::io::write_qq_csv(
            out, "chi2",
            sfde::qq_data(cell.chi2_samples,
                          sfde::ReferenceDist::chi2(summary.p + summary.q)));
    }
    {
        auto out = open_output(dir / "chi2_samples.csv");
        sfde::io::write_chi2_samples_csv(out, cell.chi2_samples);
    }
    write_manifest_file(dir, "montecarlo", cfg, plan.master_seed);

    print_table(summary);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and minimum-contrast estimation for small-noise "
                 "stochastic functional delay equations"};
    app.require_subcommand(1);

    CliOptions opts;
    std::string path_csv;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "experiment config (JSON)")->required();
        cmd->add_option("--out", opts.out_dir, "output directory (default: config output_dir)");
        cmd->add_option("--workers", opts.workers, "worker threads for replications");
        cmd->add_option("--estimator", opts.estimator, "closed_form or optimizer");
        cmd->add_flag("--warm-start", opts.warm_start, "start the optimizer at theta_true");
        cmd->add_option("--seed", opts.seed_override, "override the configured seed");
    };

    auto* sim = app.add_subcommand("simulate", "simulate one path and write path.csv");
    add_common(sim);
    auto* est = app.add_subcommand("estimate", "estimate parameters from a path CSV");
    est->add_option("path", path_csv, "path CSV produced by simulate")->required();
    add_common(est);
    auto* mc = app.add_subcommand("montecarlo", "run the replication study");
    add_common(mc);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            return run_simulate(opts);
        }
        if (est->parsed()) {
            return run_estimate(opts, path_csv);
        }
        return run_montecarlo(opts);
    } catch (const sfde::config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const sfde::degenerate_experiment_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const sfde::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
