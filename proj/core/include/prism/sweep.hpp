#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prism/baselines.hpp"
#include "prism/common.hpp"
#include "prism/em.hpp"
#include "prism/io.hpp"

namespace prism {

enum class Method { Vca, Sisa, Lisa };

Method parse_method(const std::string& name);
std::string method_name(Method m);

/// Experiment description: the cross product of methods, SNR points, sample
/// counts and seeds, at fixed model dimensions.
struct ExperimentConfig {
  Index d = 10;
  Index k = 4;
  Index n_obs = 1000;
  Vector alpha;  // empty = symmetric Dir(1)
  std::vector<double> snr_db_list = {20.0};
  std::vector<Index> sample_counts = {500};
  std::vector<Method> methods = {Method::Vca, Method::Sisa, Method::Lisa};
  int iters = 100;
  int switch_iteration = 50;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string out_dir = "results";

  DirichletParams prior() const;
  void validate() const;
};

/// Parses the plain-text "key = value" experiment config format. Unknown keys
/// are rejected. List-valued keys take whitespace- or comma-separated tokens.
ExperimentConfig parse_experiment_config(const std::string& text);

/// Files produced by cmd_generate, all under out_dir.
struct GeneratedFiles {
  std::string manifest;  // manifest.txt: seed, dimensions, alpha, snr_db, sigma2, file names
  std::string h_true;    // h_true.txt ("d k" matrix format)
  std::string dataset;   // dataset.txt ("N d" matrix format)
  std::string latents;   // latents.txt ("N k" matrix format)
};

/// Draws H and a dataset at the requested SNR and writes them with a
/// manifest. Deterministic in (config dims, snr_db, seed).
GeneratedFiles run_generate(const ExperimentConfig& config, double snr_db, std::uint64_t seed,
                            const std::string& out_dir);

struct FitOptions {
  Index samples = 500;
  int iters = 100;
  int switch_iteration = 50;
  int threads = 1;
};

struct FitResult {
  std::string h_est_path;      // h_est_<method>.txt
  std::string trajectory_path; // trajectory_<method>.csv (empty for VCA)
  MetricRecord metrics;        // filled when the manifest carries ground truth
};

/// Loads a generated dataset from its manifest, runs VCA and (for SISA/LISA)
/// the EM refinement initialized by it, and writes the estimate.
FitResult run_fit(const std::string& manifest_path, Method method, const FitOptions& options,
                  std::uint64_t seed, const std::string& out_dir);

/// Evaluates an estimate file against a truth file; labels from the caller.
MetricRecord run_eval(const std::string& h_true_path, const std::string& h_est_path,
                      MetricRecord labels);

struct SweepFailure {
  MetricRecord cell;  // coordinates only; mse unset
  std::string error;
};

struct SweepOutcome {
  std::vector<MetricRecord> results;
  std::vector<SweepFailure> failures;
  std::string results_csv;   // results.csv path
  std::string summary_csv;   // summary.csv path (per-cell medians and IQR)
  std::string failures_csv;  // failures.csv path (only written when non-empty)
};

/// Runs the full cartesian product (method x snr x samples x seed). Cells run
/// independently on up to `jobs` workers; outputs are byte-identical for any
/// job count. Failed cells are recorded and the sweep continues.
SweepOutcome run_sweep(const ExperimentConfig& config, std::uint64_t master_seed, int jobs,
                       const std::string& out_dir, bool write_plot_data = false);

}  // namespace prism
