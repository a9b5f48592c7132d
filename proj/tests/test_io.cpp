// Apache License, Version 2.0, refer to LICENSE.txt
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sanmix/io.hpp"
#include "sanmix/math.hpp"
#include "sanmix/simulate.hpp"
#include "sanmix/summaries.hpp"

using namespace sanmix;
using Eigen::MatrixXd;

namespace {

std::string temp_path(const std::string& name) {
  return "/tmp/sanmix_test_" + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("grouped CSV ingestion") {
  const std::string path = temp_path("basic.csv");
  write_file(path,
             "artist,y1,y2\n"
             "a,1.5,2.0\n"
             "a,0.5,-1.0\n"
             "b,3.25,4.5\n");
  const GroupedDataset data = load_grouped_csv(path);
  CHECK(data.num_groups() == 2);
  CHECK(data.d == 2);
  CHECK(data.group_keys == std::vector<std::string>{"a", "b"});
  CHECK(data.groups[0].rows() == 2);
  CHECK(data.groups[1].rows() == 1);
  CHECK(data.groups[1](0, 1) == 4.5);
}

TEST_CASE("CSV parse errors carry the location") {
  const std::string missing = temp_path("missing.csv");
  write_file(missing, "g,y1\na,1.0\nb,\n");
  try {
    load_grouped_csv(missing);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row == 3);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }

  const std::string text = temp_path("text.csv");
  write_file(text, "g,y1\na,1.0\nb,oops\n");
  CHECK_THROWS_AS(load_grouped_csv(text), ParseError);

  const std::string empty = temp_path("empty.csv");
  write_file(empty, "");
  CHECK_THROWS_AS(load_grouped_csv(empty), ParseError);

  CHECK_THROWS_AS(load_grouped_csv("/nonexistent/nope.csv"),
                  std::runtime_error);
}

TEST_CASE("simulated datasets round-trip bit-exactly") {
  RngStream rng(90);
  const auto [data, truth] = multivariate_benchmark(3, 7, rng);
  const std::string path = temp_path("roundtrip.csv");
  save_grouped_csv(data, path);
  const GroupedDataset back = load_grouped_csv(path);
  CHECK(back.d == data.d);
  CHECK(back.group_keys == data.group_keys);
  for (int j = 0; j < 6; ++j) CHECK(back.groups[j] == data.groups[j]);

  const std::string truth_path = temp_path("roundtrip_truth.json");
  save_truth_json(truth, truth_path);
  const GroundTruth truth_back = load_truth_json(truth_path);
  CHECK(truth_back.s_true == truth.s_true);
  CHECK(truth_back.m_true == truth.m_true);
  CHECK(truth_back.components[2].cov == truth.components[2].cov);
}

TEST_CASE("probit preprocessing") {
  GroupedDataset data;
  data.d = 1;
  data.group_keys = {"g"};
  MatrixXd y(3, 1);
  y << 0.1, 0.5, 0.975;
  data.groups.push_back(y);

  // explicit (0,1) bounds for score-type columns
  const std::vector<ColumnBounds> unit = {{0.0, 1.0}};
  const GroupedDataset out = probit_preprocess(data, unit);
  CHECK(out.groups[0](1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(out.groups[0](2, 0) ==
        doctest::Approx(1.959963984540054).epsilon(1e-9));
  // monotone within the column
  CHECK(out.groups[0](0, 0) < out.groups[0](1, 0));
  CHECK(out.groups[0](1, 0) < out.groups[0](2, 0));

  // inferred bounds keep every value strictly inside (0, 1)
  const GroupedDataset inferred = probit_preprocess(data);
  for (int i = 0; i < 3; ++i) CHECK(std::isfinite(inferred.groups[0](i, 0)));

  GroupedDataset constant;
  constant.d = 1;
  constant.group_keys = {"g"};
  constant.groups.push_back(MatrixXd::Constant(3, 1, 2.0));
  CHECK_THROWS_AS(probit_preprocess(constant, {{std::vector<ColumnBounds>{
                      {2.0, 2.0}}}}),
                  PreprocessError);
}

TEST_CASE("group filtering") {
  GroupedDataset data;
  data.d = 1;
  data.group_keys = {"small", "mid", "large"};
  data.groups.push_back(MatrixXd::Zero(50, 1));
  data.groups.push_back(MatrixXd::Zero(150, 1));
  data.groups.push_back(MatrixXd::Zero(250, 1));

  const GroupedDataset all = filter_groups(data, 1, 1000000);
  CHECK(all.num_groups() == 3);

  const GroupedDataset mid = filter_groups(data, 100, 200);
  CHECK(mid.num_groups() == 1);
  CHECK(mid.group_keys[0] == "mid");

  CHECK_THROWS_AS(filter_groups(data, 1000, 2000), PreprocessError);
  CHECK_THROWS_AS(filter_groups(data, 10, 5), std::domain_error);
}

TEST_CASE("state JSON round trip preserves the fit") {
  RngStream data_rng(91);
  const auto [data, truth] = univariate_benchmark(12, data_rng);
  FisanConfig config;
  config.L = 6;
  config.T = 4;
  config.b = 0.1;
  config.kernel = KernelPrior::defaults(1);
  FitOptions options;
  options.restarts = 2;
  options.max_iter = 30;
  const FitResult fit =
      cavi_fit(data, SanConfig(config), options, RngStream(92));

  const std::string path = temp_path("state.json");
  save_state(fit.best, SanConfig(config), data.group_keys, path);
  const LoadedState loaded = load_state(path);
  CHECK(loaded.group_keys == data.group_keys);
  CHECK(loaded.state.rho == fit.best.rho);
  CHECK(loaded.state.xi == fit.best.xi);
  CHECK(loaded.state.p == fit.best.p);
  CHECK(loaded.state.elbo_trace == fit.best.elbo_trace);
  CHECK(std::get<FisanConfig>(loaded.config).b == 0.1);

  // derived quantities reproduce after the round trip
  const MatrixXd grid = make_grid_1d(-6.0, 6.0, 50);
  const DensityGrid before = density_vi(fit.best, grid, 0);
  const DensityGrid after = density_vi(loaded.state, grid, 0);
  CHECK((before.values - after.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("chain round trip preserves every stored draw") {
  RngStream data_rng(93);
  const auto [data, truth] = univariate_benchmark(6, data_rng);
  FisanConfig config;
  config.L = 5;
  config.T = 6;
  config.b = 0.2;
  config.kernel = KernelPrior::defaults(1);
  RunLength length{60, 20, 2};
  const ChainStore chain =
      gibbs_run(data, SanConfig(config), length, RngStream(94));

  const std::string prefix = temp_path("chain");
  save_chain(chain, true, data.group_keys, prefix);
  const LoadedChain loaded = load_chain(prefix);
  CHECK(loaded.fisan);
  CHECK(loaded.group_keys == data.group_keys);
  CHECK(loaded.chain.num_draws() == chain.num_draws());
  CHECK(loaded.chain.s_draws == chain.s_draws);
  CHECK(loaded.chain.m_draws == chain.m_draws);
  CHECK(loaded.chain.alpha_draws == chain.alpha_draws);
  CHECK(loaded.chain.loglik == chain.loglik);
  for (int t = 0; t < chain.num_draws(); ++t) {
    CHECK(loaded.chain.group_weights[t] == chain.group_weights[t]);
    CHECK(loaded.chain.atom_means[t] == chain.atom_means[t]);
    for (int l = 0; l < chain.L; ++l)
      CHECK(loaded.chain.atom_precs[t][l] == chain.atom_precs[t][l]);
  }
}

TEST_CASE("cli exit codes") {
  CHECK(cli_dispatch({"--no-such-flag"}) == 2);
  CHECK(cli_dispatch({"simulate", "--univariate", "--n", "5"}) == 2);  // no seed
  CHECK(cli_dispatch({"fit", "--data", "/nonexistent/x.csv", "--seed", "1",
                      "--out", temp_path("nope.json")}) == 1);
  CHECK(cli_dispatch({"--help"}) == 0);
}

TEST_CASE("properties subcommand emits the reference correlation") {
  const std::string out = temp_path("props.json");
  CHECK(cli_dispatch({"properties", "--model", "fsan", "--a", "0.05", "--K",
                      "20", "--L", "25", "--b", "0.05", "--out", out}) == 0);
  const nlohmann::json doc = nlohmann::json::parse(read_file(out));
  CHECK(doc.at("correlation").get<double>() ==
        doctest::Approx(0.5657).epsilon(5e-5 / 0.5657));
  CHECK(doc.contains("cocluster_observational"));

  // pEPPF value through the CLI
  const std::string out2 = temp_path("props2.json");
  CHECK(cli_dispatch({"properties", "--model", "fisan", "--alpha", "1",
                      "--L", "25", "--b", "0.05", "--n1", "1", "--n2", "1",
                      "--out", out2}) == 0);
  const nlohmann::json doc2 = nlohmann::json::parse(read_file(out2));
  CHECK(doc2.at("peppf_probability").get<double>() ==
        doctest::Approx(0.253333).epsilon(1e-4));

  // MC correlation requires a seed
  CHECK(cli_dispatch({"properties", "--model", "cam", "--alpha", "1", "--beta",
                      "1", "--mc", "10000"}) == 1);
}

TEST_CASE("simulate-fit-summarize pipeline") {
  const std::string data_path = temp_path("pipe.csv");
  const std::string truth_path = temp_path("pipe_truth.json");
  const std::string state_path = temp_path("pipe_state.json");

  CHECK(cli_dispatch({"simulate", "--univariate", "--n", "25", "--seed", "7",
                      "--out", data_path, "--truth", truth_path}) == 0);
  CHECK(cli_dispatch({"fit", "--data", data_path, "--backend", "vi", "--seed",
                      "3", "--restarts", "8", "--max-iter", "150", "--out",
                      state_path}) == 0);
  CHECK(cli_dispatch({"summarize", "--data", data_path, "--state", state_path,
                      "--truth", truth_path, "--out-prefix",
                      temp_path("pipe")}) == 0);

  // column contracts
  {
    std::ifstream in(temp_path("pipe") + "_distributional.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "unit,label");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 6);
  }
  {
    std::ifstream in(temp_path("pipe") + "_observational.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "unit,label");
  }
  {
    std::ifstream in(temp_path("pipe") + "_density.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "group,y1,density");
  }
  const nlohmann::json metrics =
      nlohmann::json::parse(read_file(temp_path("pipe") + "_metrics.json"));
  CHECK(metrics.at("ari_distributional").get<double>() ==
        doctest::Approx(1.0));
  CHECK(metrics.at("kl_per_group").size() == 6);

  // identical argv and seed give byte-identical primary outputs
  const std::string first = read_file(state_path);
  CHECK(cli_dispatch({"fit", "--data", data_path, "--backend", "vi", "--seed",
                      "3", "--restarts", "8", "--max-iter", "150", "--out",
                      state_path}) == 0);
  CHECK(read_file(state_path) == first);

  // gibbs route end to end
  const std::string chain_prefix = temp_path("pipe_chain");
  CHECK(cli_dispatch({"fit", "--data", data_path, "--backend", "gibbs",
                      "--seed", "5", "--iterations", "1000", "--burn-in", "400",
                      "--out", chain_prefix}) == 0);
  CHECK(cli_dispatch({"summarize", "--data", data_path, "--chains",
                      chain_prefix, "--truth", truth_path, "--out-prefix",
                      temp_path("pipe_g")}) == 0);
  const nlohmann::json gibbs_metrics =
      nlohmann::json::parse(read_file(temp_path("pipe_g") + "_metrics.json"));
  CHECK(gibbs_metrics.at("ari_distributional").get<double>() ==
        doctest::Approx(1.0));
}

TEST_CASE("config file with flag overrides") {
  const std::string data_path = temp_path("cfg.csv");
  CHECK(cli_dispatch({"simulate", "--univariate", "--n", "10", "--seed", "11",
                      "--out", data_path}) == 0);
  const std::string config_path = temp_path("cfg.json");
  write_file(config_path, R"({
    "model": "fisan", "backend": "vi",
    "L": 8, "T": 5, "b": 0.1,
    "alpha": {"type": "gamma", "shape": 1.0, "rate": 1.0},
    "restarts": 3, "max_iter": 40
  })");
  const std::string state_path = temp_path("cfg_state.json");
  // --L on the command line overrides the config file value
  CHECK(cli_dispatch({"fit", "--data", data_path, "--config", config_path,
                      "--L", "6", "--seed", "2", "--out", state_path}) == 0);
  const LoadedState loaded = load_state(state_path);
  CHECK(std::get<FisanConfig>(loaded.config).L == 6);
  CHECK(std::get<FisanConfig>(loaded.config).T == 5);
  CHECK(loaded.state.L() == 6);
}

TEST_CASE("feature-table pipeline with filtering and probit mapping") {
  // synthetic 12-artist table shaped like a song-feature export: a duration
  // in milliseconds plus two scores already inside (0, 1)
  RngStream rng(95);
  GroupedDataset raw;
  raw.d = 3;
  std::vector<int> sizes = {120, 140, 110, 180, 130, 160, 150, 105, 190, 170,
                            50, 250};  // two groups fall outside [100, 200]
  for (int g = 0; g < 12; ++g) {
    MatrixXd block(sizes[g], 3);
    for (int i = 0; i < sizes[g]; ++i) {
      block(i, 0) = 120000.0 + 60000.0 * rng.uniform();  // duration ms
      block(i, 1) = 0.02 + 0.96 * rng.beta(2.0 + g % 3, 2.0);   // energy
      block(i, 2) = 0.02 + 0.96 * rng.beta(2.0, 3.0);           // speechiness
    }
    char name[16];
    std::snprintf(name, sizeof(name), "artist%02d", g);
    raw.group_keys.push_back(name);
    raw.groups.push_back(std::move(block));
  }
  const std::string raw_path = temp_path("songs.csv");
  save_grouped_csv(raw, raw_path);

  // ingestion -> size filter -> probit mapping (explicit unit bounds for the
  // score columns, inferred bounds for duration)
  const GroupedDataset loaded = load_grouped_csv(raw_path);
  const GroupedDataset kept = filter_groups(loaded, 100, 200);
  CHECK(kept.num_groups() == 10);
  double duration_lo = 1e18, duration_hi = -1e18;
  for (const auto& g : kept.groups) {
    duration_lo = std::min(duration_lo, g.col(0).minCoeff());
    duration_hi = std::max(duration_hi, g.col(0).maxCoeff());
  }
  const std::vector<ColumnBounds> bounds = {
      {duration_lo - 1e-6, duration_hi + 1e-6}, {0.0, 1.0}, {0.0, 1.0}};
  const GroupedDataset mapped = probit_preprocess(kept, bounds);
  const std::string mapped_path = temp_path("songs_mapped.csv");
  save_grouped_csv(mapped, mapped_path);

  // fit and summarize through the CLI on the mapped table
  const std::string state_path = temp_path("songs_state.json");
  CHECK(cli_dispatch({"fit", "--data", mapped_path, "--model", "fisan",
                      "--backend", "vi", "--L", "10", "--T", "8", "--seed",
                      "4", "--restarts", "4", "--max-iter", "100", "--out",
                      state_path}) == 0);
  CHECK(cli_dispatch({"summarize", "--data", mapped_path, "--state",
                      state_path, "--out-prefix", temp_path("songs")}) == 0);
  std::ifstream part(temp_path("songs") + "_distributional.csv");
  CHECK(part.good());
  std::string header;
  std::getline(part, header);
  CHECK(header == "unit,label");
  int rows = 0;
  std::string line;
  while (std::getline(part, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 10);
}

TEST_CASE("benchmark subcommand emits the replication table") {
  const std::string out = temp_path("bench.csv");
  CHECK(cli_dispatch({"benchmark", "--suite", "univariate", "--sizes", "15",
                      "--replications", "2", "--backend", "both", "--seed",
                      "6", "--restarts", "4", "--max-iter", "80",
                      "--iterations", "200", "--burn-in", "100", "--out",
                      out}) == 0);
  std::ifstream in(out);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "configuration,replication,backend,ari_distributional,"
        "ari_observational,kl_median,runtime_seconds,peak_state_bytes");
  int rows = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 4);  // 1 size x 2 replications x 2 backends
}
