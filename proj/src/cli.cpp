// Apache License, Version 2.0, refer to LICENSE.txt
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sanmix/io.hpp"
#include "sanmix/peppf.hpp"
#include "sanmix/prior.hpp"
#include "sanmix/simulate.hpp"
#include "sanmix/summaries.hpp"

namespace sanmix {

namespace {

using nlohmann::json;

// "1.5" or "gamma(shape,rate)"
AlphaPrior parse_alpha_spec(const std::string& spec) {
  if (spec.rfind("gamma(", 0) == 0 && spec.back() == ')') {
    const std::string inner = spec.substr(6, spec.size() - 7);
    const auto comma = inner.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("alpha spec needs gamma(shape,rate)");
    return AlphaPrior::gamma(std::stod(inner.substr(0, comma)),
                             std::stod(inner.substr(comma + 1)));
  }
  return AlphaPrior::fixed(std::stod(spec));
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  if (out.empty()) throw std::runtime_error("empty integer list: " + csv);
  return out;
}

DensityGrid truth_density_grid(const GroundTruth& truth, int group,
                               const Eigen::MatrixXd& grid) {
  DensityGrid out;
  out.points = grid;
  out.values.resize(grid.rows());
  for (int i = 0; i < grid.rows(); ++i)
    out.values[i] = truth.density(group, grid.row(i).transpose());
  return out;
}

long vi_state_bytes(const VariationalState& state) {
  long doubles = state.rho.size() + state.xi.size() + state.p.size() +
                 state.stick_a.size() + state.stick_b.size() +
                 state.p_tilde.size() +
                 static_cast<long>(state.elbo_trace.size()) + 2;
  for (const auto& kp : state.kernels)
    doubles += kp.m.size() + kp.D.size() + 2;
  return doubles * 8;
}

long chain_bytes(const ChainStore& chain) {
  long bytes = chain.s_draws.size() * 4 + chain.m_draws.size() * 4;
  bytes += (chain.alpha_draws.size() +
            static_cast<long>(chain.loglik.size())) * 8;
  for (const auto& w : chain.group_weights) bytes += w.size() * 8;
  for (const auto& m : chain.atom_means) bytes += m.size() * 8;
  for (const auto& draw : chain.atom_precs)
    for (const auto& p : draw) bytes += p.size() * 8;
  return bytes;
}

// ---------------------------------------------------------------------------
// fit configuration assembly: defaults, then JSON config file, then flags
// ---------------------------------------------------------------------------

struct FitCli {
  std::string data_path, out_path, config_path;
  std::string model = "fisan", backend = "vi", init = "kmeans";
  std::string alpha_spec;
  std::uint64_t seed = 0;
  int L = -1, T = -1, K = -1;
  double a = -1.0, b = -1.0;
  double tol = -1.0;
  int max_iter = -1, restarts = -1;
  long iterations = -1, burn_in = -1, thinning = -1;
  bool serial = false;
  // which flags were provided
  CLI::App* cmd = nullptr;
};

void apply_json_config(FitCli& cli, const json& cfg) {
  auto set_if = [&](const char* key, auto& target) {
    if (cfg.contains(key)) target = cfg.at(key).get<std::decay_t<decltype(target)>>();
  };
  if (cfg.contains("model") && cli.cmd->count("--model") == 0)
    cli.model = cfg.at("model").get<std::string>();
  if (cfg.contains("backend") && cli.cmd->count("--backend") == 0)
    cli.backend = cfg.at("backend").get<std::string>();
  if (cli.cmd->count("--L") == 0) set_if("L", cli.L);
  if (cli.cmd->count("--T") == 0) set_if("T", cli.T);
  if (cli.cmd->count("--K") == 0) set_if("K", cli.K);
  if (cli.cmd->count("--a") == 0) set_if("a", cli.a);
  if (cli.cmd->count("--b") == 0) set_if("b", cli.b);
  if (cli.cmd->count("--tol") == 0) set_if("tol", cli.tol);
  if (cli.cmd->count("--max-iter") == 0) set_if("max_iter", cli.max_iter);
  if (cli.cmd->count("--restarts") == 0) set_if("restarts", cli.restarts);
  if (cli.cmd->count("--init") == 0 && cfg.contains("init"))
    cli.init = cfg.at("init").get<std::string>();
  if (cli.cmd->count("--iterations") == 0) set_if("iterations", cli.iterations);
  if (cli.cmd->count("--burn-in") == 0) set_if("burn_in", cli.burn_in);
  if (cli.cmd->count("--thinning") == 0) set_if("thinning", cli.thinning);
  if (cli.cmd->count("--alpha") == 0 && cfg.contains("alpha"))
    cli.alpha_spec = cfg.at("alpha").is_string()
                         ? cfg.at("alpha").get<std::string>()
                         : cfg.at("alpha").dump();
}

SanConfig build_config(const FitCli& cli, int d, const json* file_cfg) {
  if (cli.model == "fisan") {
    FisanConfig config;
    config.kernel = KernelPrior::defaults(d);
    if (file_cfg && file_cfg->contains("kernel")) {
      const json& k = file_cfg->at("kernel");
      Eigen::VectorXd mu0(k.at("mu0").size());
      for (std::size_t i = 0; i < k.at("mu0").size(); ++i)
        mu0[i] = k.at("mu0").at(i).get<double>();
      Eigen::MatrixXd scale(k.at("scale").size(), k.at("scale").at(0).size());
      for (std::size_t r = 0; r < k.at("scale").size(); ++r)
        for (std::size_t c = 0; c < k.at("scale").at(r).size(); ++c)
          scale(r, c) = k.at("scale").at(r).at(c).get<double>();
      config.kernel = KernelPrior::normal_wishart(
          mu0, k.at("kappa0").get<double>(), k.at("dof").get<double>(), scale);
    }
    if (cli.L > 0) config.L = cli.L;
    if (cli.T > 0) config.T = cli.T;
    if (cli.b > 0) config.b = cli.b;
    if (!cli.alpha_spec.empty()) {
      if (cli.alpha_spec.front() == '{') {
        const json spec = json::parse(cli.alpha_spec);
        config.alpha = spec.at("type") == "fixed"
                           ? AlphaPrior::fixed(spec.at("value").get<double>())
                           : AlphaPrior::gamma(spec.at("shape").get<double>(),
                                               spec.at("rate").get<double>());
      } else {
        config.alpha = parse_alpha_spec(cli.alpha_spec);
      }
    }
    return config;
  }
  if (cli.model == "fsan") {
    FsanConfig config;
    config.kernel = KernelPrior::defaults(d);
    if (cli.K > 0) config.K = cli.K;
    if (cli.L > 0) config.L = cli.L;
    if (cli.a > 0) config.a = cli.a;
    if (cli.b > 0) config.b = cli.b;
    return config;
  }
  throw std::runtime_error("unknown model: " + cli.model);
}

void run_fit(const FitCli& cli) {
  const GroupedDataset data = load_grouped_csv(cli.data_path);
  json file_cfg;
  bool have_file = false;
  if (!cli.config_path.empty()) {
    std::ifstream in(cli.config_path);
    if (!in)
      throw std::runtime_error("cannot open config file: " + cli.config_path);
    file_cfg = json::parse(in);
    have_file = true;
    apply_json_config(const_cast<FitCli&>(cli), file_cfg);
  }
  const SanConfig config =
      build_config(cli, data.d, have_file ? &file_cfg : nullptr);
  for (const std::string& warning :
       std::visit([](const auto& c) { return c.validate(); }, config))
    std::cerr << "warning: " << warning << "\n";

  if (cli.backend == "vi") {
    FitOptions options;
    if (cli.tol > 0) options.tol = cli.tol;
    if (cli.max_iter > 0) options.max_iter = cli.max_iter;
    options.restarts = cli.restarts > 0 ? cli.restarts : 20;
    options.init = cli.init == "random" ? InitStrategy::random_responsibility
                                        : InitStrategy::kmeans_style;
    options.exec = cli.serial ? Exec::serial : Exec::parallel;
    const FitResult fit =
        cavi_fit(data, config, options, RngStream(cli.seed));
    save_state(fit.best, config, data.group_keys, cli.out_path);
  } else if (cli.backend == "gibbs") {
    RunLength length;
    if (cli.iterations > 0) length.iterations = cli.iterations;
    if (cli.burn_in >= 0) length.burn_in = cli.burn_in;
    if (cli.thinning > 0) length.thinning = cli.thinning;
    const ChainStore chain =
        gibbs_run(data, config, length, RngStream(cli.seed));
    save_chain(chain, is_fisan(config), data.group_keys, cli.out_path);
  } else {
    throw std::runtime_error("unknown backend: " + cli.backend);
  }
}

// ---------------------------------------------------------------------------
// summarize
// ---------------------------------------------------------------------------

struct SummarizeCli {
  std::string data_path, state_path, chains_prefix, truth_path, out_prefix;
};

void write_partition_csvs(const Partition& s_hat, const Partition& m_hat,
                          const GroupedDataset& data,
                          const std::string& prefix) {
  {
    std::ofstream out(prefix + "_distributional.csv");
    if (!out) throw std::runtime_error("cannot write " + prefix +
                                       "_distributional.csv");
    out << "unit,label\n";
    for (int j = 0; j < data.num_groups(); ++j)
      out << data.group_keys[j] << "," << s_hat.labels[j] << "\n";
  }
  {
    std::ofstream out(prefix + "_observational.csv");
    if (!out) throw std::runtime_error("cannot write " + prefix +
                                       "_observational.csv");
    out << "unit,label\n";
    int row = 0;
    for (int j = 0; j < data.num_groups(); ++j)
      for (int i = 0; i < data.groups[j].rows(); ++i)
        out << data.group_keys[j] << ":" << i << "," << m_hat.labels[row++]
            << "\n";
  }
}

void run_summarize(const SummarizeCli& cli) {
  const GroupedDataset data = load_grouped_csv(cli.data_path);
  const bool use_state = !cli.state_path.empty();
  if (use_state == !cli.chains_prefix.empty())
    throw std::runtime_error("pass exactly one of --state and --chains");

  Partition s_hat, m_hat;
  std::optional<LoadedState> loaded_state;
  std::optional<LoadedChain> loaded_chain;
  if (use_state) {
    loaded_state = load_state(cli.state_path);
    std::tie(s_hat, m_hat) = vi_partition(loaded_state->state);
  } else {
    loaded_chain = load_chain(cli.chains_prefix);
    s_hat = mcmc_partition(psm(loaded_chain->chain, Level::distributional),
                           Level::distributional);
    m_hat = mcmc_partition(psm(loaded_chain->chain, Level::observational),
                           Level::observational);
  }
  write_partition_csvs(s_hat, m_hat, data, cli.out_prefix);

  // density estimates on the standard grid (univariate quadrature only)
  std::vector<DensityGrid> densities;
  Eigen::MatrixXd grid;
  if (data.d == 1) {
    grid = grid_for_data(data, 3.0, 2000);
    std::ofstream out(cli.out_prefix + "_density.csv");
    if (!out)
      throw std::runtime_error("cannot write " + cli.out_prefix +
                               "_density.csv");
    out << "group,y1,density\n";
    char buffer[64];
    for (int j = 0; j < data.num_groups(); ++j) {
      const DensityGrid f =
          use_state ? density_vi(loaded_state->state, grid, j)
                    : density_mcmc(loaded_chain->chain, grid, j);
      densities.push_back(f);
      for (int i = 0; i < grid.rows(); ++i) {
        std::snprintf(buffer, sizeof(buffer), "%.17g,%.17g", grid(i, 0),
                      f.values[i]);
        out << data.group_keys[j] << "," << buffer << "\n";
      }
    }
  }

  if (!cli.truth_path.empty()) {
    const GroundTruth truth = load_truth_json(cli.truth_path);
    std::vector<int> m_true_flat;
    for (const auto& group_labels : truth.m_true)
      m_true_flat.insert(m_true_flat.end(), group_labels.begin(),
                         group_labels.end());
    json metrics;
    metrics["ari_distributional"] = ari(truth.s_true, s_hat.labels);
    metrics["ari_observational"] = ari(m_true_flat, m_hat.labels);
    json kl = json::array();
    for (int j = 0; j < data.num_groups(); ++j) {
      if (data.d == 1) {
        kl.push_back(kl_on_grid(truth_density_grid(truth, j, grid),
                                densities[j]));
      } else if (use_state) {
        RngStream rng(0, static_cast<std::uint64_t>(j));
        kl.push_back(
            kl_true_vs_vi_mc(truth, j, loaded_state->state, 5000, rng));
      }
    }
    metrics["kl_per_group"] = std::move(kl);
    std::ofstream out(cli.out_prefix + "_metrics.json");
    if (!out)
      throw std::runtime_error("cannot write " + cli.out_prefix +
                               "_metrics.json");
    out << metrics.dump(2) << "\n";
  }
}

// ---------------------------------------------------------------------------
// properties
// ---------------------------------------------------------------------------

struct PropertiesCli {
  std::string model, alpha_spec, beta_spec, beta0_spec, out_path;
  double a = -1.0, b = -1.0;
  int K = -1, L = -1;
  long mc_draws = 0;
  double h = 0.3;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string n1_csv, n2_csv;
};

struct ResolvedHyper {
  double fixed_value = 0.0;
  bool is_fixed = true;
  HyperPrior hyper = HyperPrior::fixed(1.0);
};

ResolvedHyper resolve_spec(const std::string& spec, double fallback) {
  ResolvedHyper out;
  if (spec.empty()) {
    out.fixed_value = fallback;
    out.hyper = HyperPrior::fixed(fallback);
    return out;
  }
  const AlphaPrior parsed = parse_alpha_spec(spec);
  if (parsed.is_fixed) {
    out.fixed_value = parsed.value;
    out.hyper = HyperPrior::fixed(parsed.value);
  } else {
    out.is_fixed = false;
    out.hyper = HyperPrior::gamma(parsed.shape, parsed.rate);
    out.fixed_value = parsed.shape / parsed.rate;  // placeholder mean
  }
  return out;
}

void run_properties(const PropertiesCli& cli) {
  const ResolvedHyper alpha = resolve_spec(cli.alpha_spec, 1.0);
  const ResolvedHyper beta = resolve_spec(cli.beta_spec, 1.0);
  const ResolvedHyper beta0 = resolve_spec(cli.beta0_spec, 1.0);

  PriorFamily family = make_ndp(1.0, 1.0);
  if (cli.model == "fisan") {
    if (cli.L <= 0 || cli.b <= 0)
      throw std::runtime_error("fisan needs --L and --b");
    family = make_fisan(alpha.fixed_value, cli.L, cli.b);
  } else if (cli.model == "fsan") {
    if (cli.K <= 0 || cli.L <= 0 || cli.a <= 0 || cli.b <= 0)
      throw std::runtime_error("fsan needs --a --K --L --b");
    family = make_fsan(cli.a, cli.K, cli.L, cli.b);
  } else if (cli.model == "ndp") {
    family = make_ndp(alpha.fixed_value, beta.fixed_value);
  } else if (cli.model == "cam") {
    family = make_cam(alpha.fixed_value, beta.fixed_value);
  } else if (cli.model == "hhdp") {
    family = make_hhdp(alpha.fixed_value, beta.fixed_value, beta0.fixed_value);
  } else {
    throw std::runtime_error("unknown model: " + cli.model);
  }

  const bool all_fixed = alpha.is_fixed && beta.is_fixed && beta0.is_fixed;
  json out;
  out["model"] = cli.model;
  if (all_fixed) {
    out["correlation"] = correlation(family);
    if (cli.model == "fisan" || cli.model == "fsan") {
      const CoclusterProbs cc = cocluster_probs(family);
      out["cocluster_distributional"] = cc.distributional;
      out["cocluster_observational"] = cc.observational;
    }
  }
  if (cli.mc_draws > 0) {
    if (!cli.seed_given)
      throw std::runtime_error("--mc requires --seed");
    HyperPriorMap hyperpriors;
    if (!alpha.is_fixed) hyperpriors["alpha"] = alpha.hyper;
    if (!beta.is_fixed) hyperpriors["beta"] = beta.hyper;
    if (!beta0.is_fixed) hyperpriors["beta0"] = beta0.hyper;
    const McEstimate mc = mc_correlation(family, hyperpriors, cli.h,
                                         cli.mc_draws, RngStream(cli.seed));
    out["mc_correlation"] = {{"estimate", mc.estimate},
                             {"std_error", mc.std_error}};
  }
  if (!cli.n1_csv.empty() || !cli.n2_csv.empty()) {
    if (cli.n1_csv.empty() || cli.n2_csv.empty())
      throw std::runtime_error("pass both --n1 and --n2 for a pEPPF value");
    const std::vector<int> n1 = parse_int_list(cli.n1_csv);
    const std::vector<int> n2 = parse_int_list(cli.n2_csv);
    if (n1.size() != n2.size())
      throw std::runtime_error("--n1 and --n2 must have equal length");
    Eigen::VectorXi v1(static_cast<Eigen::Index>(n1.size()));
    Eigen::VectorXi v2(static_cast<Eigen::Index>(n2.size()));
    for (std::size_t i = 0; i < n1.size(); ++i) {
      v1[static_cast<Eigen::Index>(i)] = n1[i];
      v2[static_cast<Eigen::Index>(i)] = n2[i];
    }
    const double log_p = peppf(family, TwoSampleCounts(v1, v2));
    out["peppf_log_probability"] = log_p;
    out["peppf_probability"] = std::exp(log_p);
  }

  if (cli.out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream file(cli.out_path);
    if (!file) throw std::runtime_error("cannot write " + cli.out_path);
    file << out.dump(2) << "\n";
  }
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkCli {
  std::string suite = "univariate", backend = "vi", out_path;
  int d = 2;
  std::string sizes_csv = "50";
  int replications = 5;
  std::uint64_t seed = 0;
  int restarts = 20, max_iter = 500;
  double tol = 1e-4;
  long iterations = 5000, burn_in = 1000, thinning = 1;
};

struct BenchmarkRow {
  std::string configuration;
  int replication;
  std::string backend;
  double ari_distributional;
  double ari_observational;
  double kl_median;
  double runtime_seconds;
  long peak_state_bytes;
};

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

BenchmarkRow bench_one(const std::string& suite, int d, int size, int rep,
                       const std::string& backend, const BenchmarkCli& cli) {
  RngStream data_rng =
      RngStream(cli.seed).split(1000 * static_cast<std::uint64_t>(size) + rep);
  auto [data, truth] = suite == "univariate"
                           ? univariate_benchmark(size, data_rng)
                           : multivariate_benchmark(d, size, data_rng);
  std::vector<int> m_true_flat;
  for (const auto& labels : truth.m_true)
    m_true_flat.insert(m_true_flat.end(), labels.begin(), labels.end());

  FisanConfig config;
  config.kernel = KernelPrior::defaults(data.d);
  BenchmarkRow row;
  row.configuration =
      suite + "_d" + std::to_string(data.d) + "_nj" + std::to_string(size);
  row.replication = rep;
  row.backend = backend;

  const auto start = std::chrono::steady_clock::now();
  Partition s_hat, m_hat;
  std::vector<double> kls;
  if (backend == "vi") {
    FitOptions options;
    options.restarts = cli.restarts;
    options.max_iter = cli.max_iter;
    options.tol = cli.tol;
    const FitResult fit = cavi_fit(data, SanConfig(config), options,
                                   RngStream(cli.seed).split(7000 + rep));
    row.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    std::tie(s_hat, m_hat) = vi_partition(fit.best);
    row.peak_state_bytes = vi_state_bytes(fit.best);
    for (int j = 0; j < data.num_groups(); ++j) {
      if (data.d == 1) {
        const Eigen::MatrixXd grid = grid_for_data(data, 3.0, 2000);
        kls.push_back(kl_on_grid(truth_density_grid(truth, j, grid),
                                 density_vi(fit.best, grid, j)));
      } else {
        RngStream rng(cli.seed, 99000 + j);
        kls.push_back(kl_true_vs_vi_mc(truth, j, fit.best, 3000, rng));
      }
    }
  } else {
    RunLength length{cli.iterations, cli.burn_in, cli.thinning};
    const ChainStore chain = gibbs_run(data, SanConfig(config), length,
                                       RngStream(cli.seed).split(8000 + rep));
    row.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    s_hat = mcmc_partition(psm(chain, Level::distributional),
                           Level::distributional);
    m_hat = mcmc_partition(psm(chain, Level::observational),
                           Level::observational);
    row.peak_state_bytes = chain_bytes(chain);
    for (int j = 0; j < data.num_groups(); ++j) {
      if (data.d == 1) {
        const Eigen::MatrixXd grid = grid_for_data(data, 3.0, 2000);
        kls.push_back(kl_on_grid(truth_density_grid(truth, j, grid),
                                 density_mcmc(chain, grid, j)));
      } else {
        // Monte Carlo KL over draws from the generating truth
        RngStream rng(cli.seed, 98000 + j);
        const auto& weights = truth.cluster_weights[truth.s_true[j]];
        const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(
            weights.data(), static_cast<Eigen::Index>(weights.size()));
        std::vector<Eigen::MatrixXd> chol(truth.components.size());
        for (std::size_t c = 0; c < truth.components.size(); ++c)
          if (weights[c] > 0.0)
            chol[c] = Eigen::LLT<Eigen::MatrixXd>(truth.components[c].cov)
                          .matrixL();
        double acc = 0.0;
        const int samples = 2000;
        for (int s = 0; s < samples; ++s) {
          const int c = rng.categorical(w);
          const Eigen::VectorXd y =
              rng.mvn_from_cholesky(truth.components[c].mean, chol[c]);
          Eigen::MatrixXd point(1, data.d);
          point.row(0) = y.transpose();
          const double fh =
              std::max(density_mcmc(chain, point, j).values[0], 1e-300);
          acc += std::log(truth.density(j, y) / fh);
        }
        kls.push_back(acc / samples);
      }
    }
  }
  row.ari_distributional = ari(truth.s_true, s_hat.labels);
  row.ari_observational = ari(m_true_flat, m_hat.labels);
  row.kl_median = median(kls);
  return row;
}

void run_benchmark(const BenchmarkCli& cli) {
  const std::vector<int> sizes = parse_int_list(cli.sizes_csv);
  std::vector<std::string> backends;
  if (cli.backend == "both") {
    backends = {"vi", "gibbs"};
  } else {
    backends = {cli.backend};
  }

  struct Task {
    int size, rep;
    std::string backend;
  };
  std::vector<Task> tasks;
  for (int size : sizes)
    for (int rep = 0; rep < cli.replications; ++rep)
      for (const auto& backend : backends) tasks.push_back({size, rep, backend});

  std::vector<BenchmarkRow> rows(tasks.size());
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    try {
      rows[t] = bench_one(cli.suite, cli.d, tasks[t].size, tasks[t].rep,
                          tasks[t].backend, cli);
    } catch (...) {
#pragma omp critical
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!cli.out_path.empty()) {
    file.open(cli.out_path);
    if (!file) throw std::runtime_error("cannot write " + cli.out_path);
    out = &file;
  }
  *out << "configuration,replication,backend,ari_distributional,"
          "ari_observational,kl_median,runtime_seconds,peak_state_bytes\n";
  char buffer[128];
  for (const auto& row : rows) {
    std::snprintf(buffer, sizeof(buffer), "%.6f,%.6f,%.6f,%.6f,%ld",
                  row.ari_distributional, row.ari_observational, row.kl_median,
                  row.runtime_seconds, row.peak_state_bytes);
    *out << row.configuration << "," << row.replication << "," << row.backend
         << "," << buffer << "\n";
  }
}

std::string default_truth_path(const std::string& out) {
  const auto dot = out.rfind(".csv");
  if (dot == std::string::npos || dot + 4 != out.size())
    return out + "_truth.json";
  return out.substr(0, dot) + "_truth.json";
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Shared-atoms nested mixture models: simulation, inference, "
               "and prior properties"};
  app.require_subcommand(1);

  // simulate -----------------------------------------------------------
  auto* sim = app.add_subcommand(
      "simulate", "Generate the synthetic grouped benchmark datasets");
  bool univariate = false;
  int sim_d = 0, sim_n = 0;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "data.csv", sim_truth;
  sim->add_flag("--univariate", univariate,
                "three-cluster univariate benchmark");
  sim->add_option("--d", sim_d, "dimension for the multivariate benchmark")
      ->check(CLI::Range(2, 10));
  sim->add_option("--n", sim_n, "observations per group")
      ->required()
      ->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "RNG seed")->required();
  sim->add_option("--out", sim_out, "output dataset CSV");
  sim->add_option("--truth", sim_truth, "output truth sidecar JSON");

  // fit ------------------------------------------------------------------
  FitCli fit_cli;
  auto* fit = app.add_subcommand("fit", "Fit a SAN model to a grouped CSV");
  fit_cli.cmd = fit;
  fit->add_option("--data", fit_cli.data_path, "grouped CSV input")
      ->required();
  fit->add_option("--model", fit_cli.model, "fisan or fsan");
  fit->add_option("--backend", fit_cli.backend, "vi or gibbs");
  fit->add_option("--seed", fit_cli.seed, "RNG seed")->required();
  fit->add_option("--out", fit_cli.out_path,
                  "state JSON (vi) or chain prefix (gibbs)")
      ->required();
  fit->add_option("--config", fit_cli.config_path, "JSON run configuration");
  fit->add_option("--L", fit_cli.L);
  fit->add_option("--T", fit_cli.T);
  fit->add_option("--K", fit_cli.K);
  fit->add_option("--a", fit_cli.a);
  fit->add_option("--b", fit_cli.b);
  fit->add_option("--alpha", fit_cli.alpha_spec,
                  "fixed value or gamma(shape,rate)");
  fit->add_option("--tol", fit_cli.tol);
  fit->add_option("--max-iter", fit_cli.max_iter);
  fit->add_option("--restarts", fit_cli.restarts);
  fit->add_option("--init", fit_cli.init, "kmeans or random");
  fit->add_option("--iterations", fit_cli.iterations);
  fit->add_option("--burn-in", fit_cli.burn_in);
  fit->add_option("--thinning", fit_cli.thinning);
  fit->add_flag("--serial", fit_cli.serial, "use the serial reference kernels");

  // summarize --------------------------------------------------------------
  SummarizeCli sum_cli;
  auto* sum = app.add_subcommand(
      "summarize", "Partitions, densities, and metrics from a fitted model");
  sum->add_option("--data", sum_cli.data_path, "grouped CSV input")->required();
  sum->add_option("--state", sum_cli.state_path, "fitted state JSON");
  sum->add_option("--chains", sum_cli.chains_prefix, "chain file prefix");
  sum->add_option("--truth", sum_cli.truth_path, "truth sidecar JSON");
  sum->add_option("--out-prefix", sum_cli.out_prefix, "output path prefix")
      ->required();

  // properties ------------------------------------------------------------
  PropertiesCli prop_cli;
  auto* prop = app.add_subcommand(
      "properties", "Closed-form and Monte Carlo prior properties");
  prop->add_option("--model", prop_cli.model, "fisan/fsan/ndp/cam/hhdp")
      ->required();
  prop->add_option("--alpha", prop_cli.alpha_spec,
                   "fixed value or gamma(shape,rate)");
  prop->add_option("--beta", prop_cli.beta_spec);
  prop->add_option("--beta0", prop_cli.beta0_spec);
  prop->add_option("--a", prop_cli.a);
  prop->add_option("--b", prop_cli.b);
  prop->add_option("--K", prop_cli.K);
  prop->add_option("--L", prop_cli.L);
  prop->add_option("--mc", prop_cli.mc_draws,
                   "Monte Carlo correlation with this many draws");
  prop->add_option("--h-prob", prop_cli.h, "set probability H(A)");
  auto* prop_seed = prop->add_option("--seed", prop_cli.seed, "RNG seed");
  prop->add_option("--n1", prop_cli.n1_csv, "pEPPF frequencies, group 1");
  prop->add_option("--n2", prop_cli.n2_csv, "pEPPF frequencies, group 2");
  prop->add_option("--out", prop_cli.out_path, "output JSON path");

  // benchmark ---------------------------------------------------------------
  BenchmarkCli bench_cli;
  auto* bench = app.add_subcommand(
      "benchmark", "Replication table over the synthetic benchmarks");
  bench->add_option("--suite", bench_cli.suite, "univariate or multivariate");
  bench->add_option("--d", bench_cli.d)->check(CLI::Range(2, 10));
  bench->add_option("--sizes", bench_cli.sizes_csv,
                    "comma-separated per-group sizes");
  bench->add_option("--replications", bench_cli.replications)
      ->check(CLI::PositiveNumber);
  bench->add_option("--backend", bench_cli.backend, "vi, gibbs, or both");
  bench->add_option("--seed", bench_cli.seed, "RNG seed")->required();
  bench->add_option("--out", bench_cli.out_path, "output CSV path");
  bench->add_option("--restarts", bench_cli.restarts);
  bench->add_option("--max-iter", bench_cli.max_iter);
  bench->add_option("--tol", bench_cli.tol);
  bench->add_option("--iterations", bench_cli.iterations);
  bench->add_option("--burn-in", bench_cli.burn_in);
  bench->add_option("--thinning", bench_cli.thinning);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed()) {
      if (univariate == (sim_d > 0))
        throw std::runtime_error("pass exactly one of --univariate and --d");
      RngStream rng(sim_seed);
      auto [data, truth] = univariate ? univariate_benchmark(sim_n, rng)
                                      : multivariate_benchmark(sim_d, sim_n, rng);
      save_grouped_csv(data, sim_out);
      save_truth_json(truth, sim_truth.empty() ? default_truth_path(sim_out)
                                               : sim_truth);
    } else if (fit->parsed()) {
      run_fit(fit_cli);
    } else if (sum->parsed()) {
      run_summarize(sum_cli);
    } else if (prop->parsed()) {
      prop_cli.seed_given = prop_seed->count() > 0;
      run_properties(prop_cli);
    } else if (bench->parsed()) {
      run_benchmark(bench_cli);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sanmix
