// Apache License, Version 2.0, refer to LICENSE.txt
// The OpenMP kernels must reproduce the serial reference implementations
// exactly: parallel loops either treat disjoint rows or reduce fixed blocks
// in index order, so results are bitwise identical at any thread count.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "sanmix/cavi.hpp"
#include "sanmix/peppf.hpp"
#include "sanmix/prior.hpp"
#include "sanmix/simulate.hpp"
#include "sanmix/summaries.hpp"

using namespace sanmix;
using Eigen::MatrixXd;

TEST_CASE("cavi iterate and elbo match between serial and parallel") {
  RngStream data_rng(101);
  const auto [data, truth] = univariate_benchmark(20, data_rng);
  FisanConfig config;
  config.L = 10;
  config.T = 8;
  config.b = 0.05;
  config.kernel = KernelPrior::defaults(1);

  RngStream r1(102), r2(102);
  VariationalState serial =
      cavi_init(data, config, InitStrategy::kmeans_style, r1);
  VariationalState parallel =
      cavi_init(data, config, InitStrategy::kmeans_style, r2);
  for (int it = 0; it < 10; ++it) {
    cavi_iterate(serial, data, config, Exec::serial);
    cavi_iterate(parallel, data, config, Exec::parallel);
    CHECK(serial.xi == parallel.xi);
    CHECK(serial.rho == parallel.rho);
    CHECK(serial.p == parallel.p);
    CHECK(cavi_elbo(serial, data, config, Exec::serial) ==
          cavi_elbo(parallel, data, config, Exec::parallel));
  }
}

TEST_CASE("multivariate kernels match between serial and parallel") {
  RngStream data_rng(103);
  const auto [data, truth] = multivariate_benchmark(3, 15, data_rng);
  FisanConfig config;
  config.L = 8;
  config.T = 6;
  config.b = 0.05;
  config.kernel = KernelPrior::defaults(3);
  RngStream r1(104), r2(104);
  VariationalState serial =
      cavi_init(data, config, InitStrategy::kmeans_style, r1);
  VariationalState parallel =
      cavi_init(data, config, InitStrategy::kmeans_style, r2);
  for (int it = 0; it < 5; ++it) {
    cavi_iterate(serial, data, config, Exec::serial);
    cavi_iterate(parallel, data, config, Exec::parallel);
  }
  CHECK(serial.xi == parallel.xi);
  for (int l = 0; l < 8; ++l)
    CHECK(serial.kernels[l].D == parallel.kernels[l].D);
}

TEST_CASE("fit returns the same best state under both executions") {
  RngStream data_rng(105);
  const auto [data, truth] = univariate_benchmark(15, data_rng);
  FisanConfig config;
  config.L = 8;
  config.T = 6;
  config.b = 0.05;
  config.kernel = KernelPrior::defaults(1);
  FitOptions serial_options;
  serial_options.restarts = 4;
  serial_options.max_iter = 40;
  serial_options.exec = Exec::serial;
  FitOptions parallel_options = serial_options;
  parallel_options.exec = Exec::parallel;

  const FitResult a =
      cavi_fit(data, SanConfig(config), serial_options, RngStream(106));
  const FitResult b =
      cavi_fit(data, SanConfig(config), parallel_options, RngStream(106));
  CHECK(a.best_restart == b.best_restart);
  CHECK(a.best.rho == b.best.rho);
  CHECK(a.best.xi == b.best.xi);
  CHECK(a.traces == b.traces);
}

TEST_CASE("psm and density kernels match between serial and parallel") {
  RngStream data_rng(107);
  const auto [data, truth] = univariate_benchmark(10, data_rng);
  FisanConfig config;
  config.L = 8;
  config.T = 6;
  config.b = 0.1;
  config.kernel = KernelPrior::defaults(1);
  const ChainStore chain =
      gibbs_run(data, SanConfig(config), RunLength{200, 100, 1}, RngStream(108));

  CHECK(psm(chain, Level::observational, Exec::serial) ==
        psm(chain, Level::observational, Exec::parallel));
  CHECK(psm(chain, Level::distributional, Exec::serial) ==
        psm(chain, Level::distributional, Exec::parallel));

  const MatrixXd grid = make_grid_1d(-7.0, 7.0, 200);
  const DensityGrid serial = density_mcmc(chain, grid, 0, Exec::serial);
  const DensityGrid parallel = density_mcmc(chain, grid, 0, Exec::parallel);
  CHECK(serial.values == parallel.values);
}

TEST_CASE("monte-carlo estimators match between serial and parallel") {
  const PriorFamily family = make_fisan(1.0, 10, 0.2);
  const HyperPriorMap none;
  const McEstimate mc_serial =
      mc_correlation(family, none, 0.3, 10000, RngStream(109), Exec::serial);
  const McEstimate mc_parallel =
      mc_correlation(family, none, 0.3, 10000, RngStream(109), Exec::parallel);
  CHECK(mc_serial.estimate == mc_parallel.estimate);
  CHECK(mc_serial.std_error == mc_parallel.std_error);

  const TwoSampleCounts counts(Eigen::VectorXi::Ones(1),
                               Eigen::VectorXi::Ones(1));
  const McEstimate freq_serial = generative_peppf_frequency(
      family, counts, 20000, RngStream(110), Exec::serial);
  const McEstimate freq_parallel = generative_peppf_frequency(
      family, counts, 20000, RngStream(110), Exec::parallel);
  CHECK(freq_serial.estimate == freq_parallel.estimate);
}
