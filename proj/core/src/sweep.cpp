#include "prism/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace prism {

namespace {

// Fixed tags so substreams for different purposes never collide.
constexpr std::uint64_t kTagH = 0x4801;
constexpr std::uint64_t kTagData = 0xda7a;
constexpr std::uint64_t kTagVca = 0x0bca;
constexpr std::uint64_t kTagEm = 0x00e3;

std::uint64_t method_id(Method m) { return static_cast<std::uint64_t>(m) + 1; }

std::vector<std::string> tokenize(const std::string& value) {
  std::string normalized = value;
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream ss(normalized);
  std::vector<std::string> tokens;
  std::string tok;
  while (ss >> tok) tokens.push_back(tok);
  return tokens;
}

double quantile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return std::nan("");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "vca") return Method::Vca;
  if (name == "sisa") return Method::Sisa;
  if (name == "lisa") return Method::Lisa;
  throw std::invalid_argument("unknown method '" + name + "' (expected vca|sisa|lisa)");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Vca: return "vca";
    case Method::Sisa: return "sisa";
    case Method::Lisa: return "lisa";
  }
  throw std::logic_error("method_name: bad enum");
}

DirichletParams ExperimentConfig::prior() const {
  if (alpha.size() == 0) return DirichletParams(Vector::Ones(k));
  if (alpha.size() == 1) return DirichletParams(Vector::Constant(k, alpha(0)));
  return DirichletParams(alpha);
}

void ExperimentConfig::validate() const {
  if (d < 1 || k < 2 || d < k) throw std::invalid_argument("config: need d >= k >= 2");
  if (n_obs < 1) throw std::invalid_argument("config: need n_obs >= 1");
  if (alpha.size() != 0 && alpha.size() != 1 && alpha.size() != k)
    throw std::invalid_argument("config: alpha must have 1 or k entries");
  if (snr_db_list.empty()) throw std::invalid_argument("config: snr_db list is empty");
  if (sample_counts.empty()) throw std::invalid_argument("config: samples list is empty");
  if (methods.empty()) throw std::invalid_argument("config: methods list is empty");
  if (seeds.empty()) throw std::invalid_argument("config: seeds list is empty");
  if (iters < 0 || switch_iteration < 0 || switch_iteration > iters)
    throw std::invalid_argument("config: need 0 <= switch <= iters");
  for (Index m : sample_counts)
    if (m < 1) throw std::invalid_argument("config: sample counts must be positive");
  (void)prior();  // validates alpha positivity
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (!tokenize(line).empty())
        throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const auto keys = tokenize(line.substr(0, eq));
    if (keys.size() != 1)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": bad key");
    const std::string& key = keys[0];
    const auto values = tokenize(line.substr(eq + 1));
    if (values.empty())
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty value for " + key);

    auto as_longs = [&](std::vector<long long>& out) {
      out.clear();
      for (const auto& v : values) out.push_back(std::stoll(v));
    };
    auto as_doubles = [&](std::vector<double>& out) {
      out.clear();
      for (const auto& v : values) out.push_back(std::stod(v));
    };

    try {
      if (key == "d") config.d = std::stoll(values.at(0));
      else if (key == "k") config.k = std::stoll(values.at(0));
      else if (key == "n_obs") config.n_obs = std::stoll(values.at(0));
      else if (key == "iters") config.iters = std::stoi(values.at(0));
      else if (key == "switch") config.switch_iteration = std::stoi(values.at(0));
      else if (key == "out") config.out_dir = values.at(0);
      else if (key == "alpha") {
        std::vector<double> a;
        as_doubles(a);
        config.alpha = Eigen::Map<const Vector>(a.data(), static_cast<Index>(a.size()));
      } else if (key == "snr_db") {
        as_doubles(config.snr_db_list);
      } else if (key == "samples") {
        std::vector<long long> s;
        as_longs(s);
        config.sample_counts.assign(s.begin(), s.end());
      } else if (key == "seeds") {
        config.seeds.clear();
        for (const auto& v : values) config.seeds.push_back(std::stoull(v));
      } else if (key == "methods") {
        config.methods.clear();
        for (const auto& v : values) config.methods.push_back(parse_method(v));
      } else {
        throw std::runtime_error("unknown key '" + key + "'");
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

GeneratedFiles run_generate(const ExperimentConfig& config, double snr_db, std::uint64_t seed,
                            const std::string& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const DirichletParams prior = config.prior();

  Rng h_rng = make_rng(seed, {kTagH});
  const MixingMatrix h = random_mixing_matrix(config.d, config.k, h_rng);
  const double sigma2 = sigma2_for_snr_db(h, prior, snr_db);

  Rng data_rng = make_rng(seed, {kTagData});
  const Dataset data = generate_data(h, prior, NoiseModel(sigma2), config.n_obs, data_rng);

  GeneratedFiles files;
  files.h_true = out_dir + "/h_true.txt";
  files.dataset = out_dir + "/dataset.txt";
  files.latents = out_dir + "/latents.txt";
  files.manifest = out_dir + "/manifest.txt";
  write_matrix_file(files.h_true, h);
  write_matrix_file(files.dataset, data.observations);
  write_matrix_file(files.latents, *data.latents);

  Manifest manifest;
  manifest["seed"] = std::to_string(seed);
  manifest["d"] = std::to_string(config.d);
  manifest["k"] = std::to_string(config.k);
  manifest["n_obs"] = std::to_string(config.n_obs);
  manifest["snr_db"] = format_double(snr_db);
  manifest["sigma2"] = format_double(sigma2);
  {
    std::ostringstream a;
    const Vector& alpha = prior.alpha();
    for (Index i = 0; i < alpha.size(); ++i) {
      if (i > 0) a << ' ';
      a << format_double(alpha(i));
    }
    manifest["alpha"] = a.str();
  }
  manifest["h_true"] = "h_true.txt";
  manifest["dataset"] = "dataset.txt";
  manifest["latents"] = "latents.txt";
  write_manifest(files.manifest, manifest);
  return files;
}

namespace {

struct LoadedDataset {
  Dataset data;
  DirichletParams prior;
  NoiseModel noise;
  double snr_db;
  std::uint64_t seed;
};

LoadedDataset load_from_manifest(const std::string& manifest_path) {
  const Manifest manifest = read_manifest(manifest_path);
  const std::string dir = std::filesystem::path(manifest_path).parent_path().string();
  auto resolve = [&dir](const std::string& name) {
    return dir.empty() ? name : dir + "/" + name;
  };
  auto need = [&manifest, &manifest_path](const std::string& key) -> const std::string& {
    auto it = manifest.find(key);
    if (it == manifest.end())
      throw std::runtime_error("manifest " + manifest_path + ": missing key '" + key + "'");
    return it->second;
  };

  const auto alpha_tokens = tokenize(need("alpha"));
  Vector alpha(static_cast<Index>(alpha_tokens.size()));
  for (std::size_t i = 0; i < alpha_tokens.size(); ++i)
    alpha(static_cast<Index>(i)) = std::stod(alpha_tokens[i]);

  LoadedDataset loaded{Dataset{}, DirichletParams(alpha), NoiseModel(std::stod(need("sigma2"))),
                       std::stod(need("snr_db")), std::stoull(need("seed"))};
  loaded.data.observations = read_matrix_file(resolve(need("dataset")));
  if (auto it = manifest.find("h_true"); it != manifest.end())
    loaded.data.h_true = read_matrix_file(resolve(it->second));
  if (auto it = manifest.find("latents"); it != manifest.end())
    loaded.data.latents = read_matrix_file(resolve(it->second));
  return loaded;
}

EmConfig em_config_for(Method method, const FitOptions& options) {
  EmConfig em;
  em.total_iterations = options.iters;
  em.switch_iteration = options.switch_iteration;
  em.samples_per_obs = options.samples;
  em.backend = method == Method::Sisa ? EstepBackend::Sisa : EstepBackend::SisaThenLisa;
  em.threads = options.threads;
  return em;
}

MixingMatrix fit_in_memory(const Dataset& data, const DirichletParams& prior,
                           const NoiseModel& noise, Method method, const FitOptions& options,
                           std::uint64_t seed, std::vector<EmIterationRecord>* trace) {
  Rng vca_rng = make_rng(seed, {kTagVca});
  MixingMatrix h = vca(data, prior.dim(), vca_rng);
  if (method == Method::Vca) return h;

  const EmConfig em = em_config_for(method, options);
  EmRun run = run_em(data, h, em, prior, noise, derive_seed(seed, {kTagEm, method_id(method)}));
  if (trace) *trace = std::move(run.trace);
  return std::move(run.state.h);
}

}  // namespace

FitResult run_fit(const std::string& manifest_path, Method method, const FitOptions& options,
                  std::uint64_t seed, const std::string& out_dir) {
  const LoadedDataset loaded = load_from_manifest(manifest_path);
  std::filesystem::create_directories(out_dir);

  std::vector<EmIterationRecord> trace;
  const MixingMatrix h_est = fit_in_memory(loaded.data, loaded.prior, loaded.noise, method,
                                           options, seed, &trace);

  FitResult result;
  result.h_est_path = out_dir + "/h_est_" + method_name(method) + ".txt";
  write_matrix_file(result.h_est_path, h_est);
  if (method != Method::Vca) {
    result.trajectory_path = out_dir + "/trajectory_" + method_name(method) + ".csv";
    write_trajectory_csv(result.trajectory_path, trace);
  }

  if (loaded.data.h_true) {
    result.metrics = permutation_mse(*loaded.data.h_true, h_est);
    result.metrics.method = method_name(method);
    result.metrics.seed = seed;
    result.metrics.snr_db = loaded.snr_db;
    result.metrics.n_samples = loaded.data.n();
    result.metrics.m_samples = method == Method::Vca ? 0 : options.samples;
  }
  return result;
}

MetricRecord run_eval(const std::string& h_true_path, const std::string& h_est_path,
                      MetricRecord labels) {
  const Matrix h_true = read_matrix_file(h_true_path);
  const Matrix h_est = read_matrix_file(h_est_path);
  MetricRecord rec = permutation_mse(h_true, h_est);
  rec.method = labels.method;
  rec.seed = labels.seed;
  rec.snr_db = labels.snr_db;
  rec.n_samples = labels.n_samples;
  rec.m_samples = labels.m_samples;
  return rec;
}

SweepOutcome run_sweep(const ExperimentConfig& config, std::uint64_t master_seed, int jobs,
                       const std::string& out_dir, bool write_plot_data) {
  config.validate();
  if (jobs < 1) throw std::invalid_argument("run_sweep: jobs < 1");
  std::filesystem::create_directories(out_dir);
  const DirichletParams prior = config.prior();

  struct Cell {
    Method method;
    std::size_t snr_idx;
    std::size_t m_idx;
    std::size_t seed_idx;
  };
  std::vector<Cell> cells;
  for (Method method : config.methods)
    for (std::size_t a = 0; a < config.snr_db_list.size(); ++a)
      for (std::size_t b = 0; b < config.sample_counts.size(); ++b)
        for (std::size_t s = 0; s < config.seeds.size(); ++s)
          cells.push_back(Cell{method, a, b, s});

  std::vector<MetricRecord> results(cells.size());
  std::vector<std::string> errors(cells.size());

  auto run_cell = [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const std::uint64_t seed = config.seeds[cell.seed_idx];
    const double snr = config.snr_db_list[cell.snr_idx];
    const Index m = config.sample_counts[cell.m_idx];

    MetricRecord& rec = results[idx];
    rec.method = method_name(cell.method);
    rec.seed = seed;
    rec.snr_db = snr;
    rec.n_samples = config.n_obs;
    rec.m_samples = m;
    try {
      // One H per (experiment, seed); sigma2 then realizes the cell's SNR.
      Rng h_rng = make_rng(derive_seed(master_seed, {seed}), {kTagH});
      const MixingMatrix h = random_mixing_matrix(config.d, config.k, h_rng);
      const NoiseModel noise(sigma2_for_snr_db(h, prior, snr));

      Rng data_rng = make_rng(derive_seed(master_seed, {seed, cell.snr_idx}), {kTagData});
      const Dataset data = generate_data(h, prior, noise, config.n_obs, data_rng);

      FitOptions options;
      options.samples = m;
      options.iters = config.iters;
      options.switch_iteration = config.switch_iteration;
      const std::uint64_t fit_seed =
          derive_seed(master_seed, {seed, cell.snr_idx, cell.m_idx});
      const MixingMatrix h_est = fit_in_memory(data, prior, noise, cell.method, options,
                                               fit_seed, nullptr);

      const MetricRecord aligned = permutation_mse(h, h_est);
      rec.mse = aligned.mse;
      rec.permutation = aligned.permutation;
    } catch (const std::exception& e) {
      errors[idx] = e.what();
    }
  };

  if (jobs == 1) {
    for (std::size_t idx = 0; idx < cells.size(); ++idx) run_cell(idx);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= cells.size()) return;
        run_cell(idx);
      }
    };
    std::vector<std::thread> pool;
    const std::size_t nworkers = std::min(static_cast<std::size_t>(jobs), cells.size());
    for (std::size_t t = 0; t < nworkers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepOutcome outcome;
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    if (errors[idx].empty()) {
      outcome.results.push_back(results[idx]);
    } else {
      outcome.failures.push_back(SweepFailure{results[idx], errors[idx]});
    }
  }

  outcome.results_csv = out_dir + "/results.csv";
  write_metric_csv(outcome.results_csv, outcome.results);

  // Per-cell medians over seeds.
  std::ostringstream summary;
  summary << "method,snr_db,n_samples,m_samples,median_mse,q25_mse,q75_mse,seed_count\n";
  for (Method method : config.methods)
    for (double snr : config.snr_db_list)
      for (Index m : config.sample_counts) {
        std::vector<double> mses;
        for (const auto& rec : outcome.results)
          if (rec.method == method_name(method) && rec.snr_db == snr && rec.m_samples == m)
            mses.push_back(rec.mse);
        if (mses.empty()) continue;
        std::sort(mses.begin(), mses.end());
        summary << method_name(method) << ',' << format_double(snr) << ',' << config.n_obs << ','
                << m << ',' << format_double(quantile(mses, 0.5)) << ','
                << format_double(quantile(mses, 0.25)) << ','
                << format_double(quantile(mses, 0.75)) << ',' << mses.size() << '\n';
      }
  outcome.summary_csv = out_dir + "/summary.csv";
  atomic_write_file(outcome.summary_csv, summary.str());

  if (!outcome.failures.empty()) {
    std::ostringstream fail;
    fail << "method,seed,snr_db,n_samples,m_samples,error\n";
    for (const auto& f : outcome.failures) {
      std::string msg = f.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      fail << f.cell.method << ',' << f.cell.seed << ',' << format_double(f.cell.snr_db) << ','
           << f.cell.n_samples << ',' << f.cell.m_samples << ',' << msg << '\n';
    }
    outcome.failures_csv = out_dir + "/failures.csv";
    atomic_write_file(outcome.failures_csv, fail.str());
  }

  if (write_plot_data) {
    // gnuplot-friendly: one block per method, blank-line separated.
    std::ostringstream plot;
    plot << "# method snr_db m_samples median_mse\n";
    for (Method method : config.methods) {
      for (double snr : config.snr_db_list)
        for (Index m : config.sample_counts) {
          std::vector<double> mses;
          for (const auto& rec : outcome.results)
            if (rec.method == method_name(method) && rec.snr_db == snr && rec.m_samples == m)
              mses.push_back(rec.mse);
          if (mses.empty()) continue;
          std::sort(mses.begin(), mses.end());
          plot << method_name(method) << ' ' << format_double(snr) << ' ' << m << ' '
               << format_double(quantile(mses, 0.5)) << '\n';
        }
      plot << '\n';
    }
    atomic_write_file(out_dir + "/summary.dat", plot.str());
  }
  return outcome;
}

}  // namespace prism
