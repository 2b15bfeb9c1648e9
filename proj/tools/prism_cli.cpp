// Command-line harness around the prism library: synthetic data generation,
// single fits, cartesian parameter sweeps and estimate evaluation.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "prism/io.hpp"
#include "prism/sweep.hpp"

namespace {

std::uint64_t default_master_seed() {
  if (const char* env = std::getenv("PRISM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw std::runtime_error("PRISM_SEED is not a valid unsigned integer");
    }
  }
  return 0;
}

prism::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return prism::ExperimentConfig{};
  return prism::parse_experiment_config(prism::read_text_file(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prism: mixing-matrix estimation on the simplex (VCA, SISA, LISA)"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_dir = "results";
  std::uint64_t seed = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "experiment config file (key = value lines)");
  app.add_option("--seed", seed, "master seed (falls back to PRISM_SEED, then 0)")
      ->each([&seed_given](const std::string&) { seed_given = true; });
  app.add_option("--out", out_dir, "output directory");

  // generate
  auto* gen = app.add_subcommand("generate", "draw H and a synthetic dataset, write files + manifest");
  double gen_snr_db = 20.0;
  bool gen_snr_given = false;
  gen->add_option("--snr-db", gen_snr_db, "target SNR in dB (default: first config value)")
      ->each([&gen_snr_given](const std::string&) { gen_snr_given = true; });

  // fit
  auto* fit = app.add_subcommand("fit", "estimate H from a generated dataset");
  std::string fit_method = "lisa";
  std::string fit_data;
  prism::FitOptions fit_options;
  fit->add_option("--method", fit_method, "vca|sisa|lisa")->check(CLI::IsMember({"vca", "sisa", "lisa"}));
  fit->add_option("--data", fit_data, "manifest file of a generated dataset")->required();
  fit->add_option("--samples", fit_options.samples, "importance samples per observation");
  fit->add_option("--iters", fit_options.iters, "EM iterations");
  fit->add_option("--switch", fit_options.switch_iteration, "iteration at which lisa switches proposals");
  fit->add_option("--threads", fit_options.threads, "E-step worker threads");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run the full method x snr x samples x seed grid");
  int jobs = 1;
  bool plot_data = false;
  sweep->add_option("--jobs", jobs, "parallel sweep cells");
  sweep->add_flag("--plot-data", plot_data, "also write gnuplot-style summary.dat");

  // eval
  auto* eval = app.add_subcommand("eval", "permutation-aligned MSE between two matrix files");
  std::string true_path, est_path, eval_method = "unknown";
  double eval_snr_db = 0.0;
  long long eval_n = 0, eval_m = 0;
  std::string eval_csv;
  eval->add_option("--true", true_path, "ground-truth matrix file")->required();
  eval->add_option("--est", est_path, "estimate matrix file")->required();
  eval->add_option("--method", eval_method, "method label for the CSV row");
  eval->add_option("--snr-db", eval_snr_db, "snr label for the CSV row");
  eval->add_option("--n", eval_n, "observation-count label");
  eval->add_option("--samples", eval_m, "sample-count label");
  eval->add_option("--csv", eval_csv, "append the row to this CSV (created if missing)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (!seed_given) seed = default_master_seed();

    if (gen->parsed()) {
      const prism::ExperimentConfig config = load_config(config_path);
      const double snr = gen_snr_given ? gen_snr_db : config.snr_db_list.front();
      const auto files = prism::run_generate(config, snr, seed, out_dir);
      std::cout << "wrote " << files.manifest << '\n';
      return 0;
    }

    if (fit->parsed()) {
      const auto result = prism::run_fit(fit_data, prism::parse_method(fit_method), fit_options,
                                         seed, out_dir);
      std::cout << "wrote " << result.h_est_path << '\n';
      if (!result.trajectory_path.empty()) std::cout << "wrote " << result.trajectory_path << '\n';
      if (!result.metrics.method.empty())
        std::cout << "mse " << prism::format_double(result.metrics.mse) << '\n';
      return 0;
    }

    if (sweep->parsed()) {
      if (config_path.empty()) throw std::runtime_error("sweep requires --config");
      const prism::ExperimentConfig config = load_config(config_path);
      const auto outcome = prism::run_sweep(config, seed, jobs, out_dir, plot_data);
      std::cout << "wrote " << outcome.results_csv << " (" << outcome.results.size() << " rows)\n";
      std::cout << "wrote " << outcome.summary_csv << '\n';
      if (!outcome.failures_csv.empty())
        std::cerr << outcome.failures.size() << " cell(s) failed; see " << outcome.failures_csv
                  << '\n';
      return outcome.failures.empty() ? 0 : 2;
    }

    if (eval->parsed()) {
      prism::MetricRecord labels;
      labels.method = eval_method;
      labels.seed = seed;
      labels.snr_db = eval_snr_db;
      labels.n_samples = eval_n;
      labels.m_samples = eval_m;
      const prism::MetricRecord rec = prism::run_eval(true_path, est_path, labels);
      std::cout << prism::metric_csv_header() << '\n' << prism::metric_csv_row(rec) << '\n';
      if (!eval_csv.empty()) {
        std::string content;
        try {
          content = prism::read_text_file(eval_csv);
        } catch (const std::exception&) {
          content = prism::metric_csv_header() + "\n";
        }
        content += prism::metric_csv_row(rec) + "\n";
        prism::atomic_write_file(eval_csv, content);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
