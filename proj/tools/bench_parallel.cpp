// Apache License, Version 2.0, refer to LICENSE.txt
// Timing comparison between the serial reference kernels and the OpenMP
// versions, over the hot paths: CAVI iterations, PSM accumulation, posterior
// density evaluation, and the Monte Carlo prior estimators.
#include <chrono>
#include <cstdio>

#include <omp.h>

#include "sanmix/cavi.hpp"
#include "sanmix/peppf.hpp"
#include "sanmix/prior.hpp"
#include "sanmix/simulate.hpp"
#include "sanmix/summaries.hpp"

using namespace sanmix;

namespace {

double seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       start)
      .count();
}

template <typename Fn>
double time_it(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return seconds(start);
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx\n",
              name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
  std::printf("threads available: %d\n\n", omp_get_max_threads());

  // CAVI iterations on the univariate benchmark at N_j = 500
  {
    RngStream data_rng(1);
    const auto [data, truth] = univariate_benchmark(500, data_rng);
    FisanConfig config;
    config.kernel = KernelPrior::defaults(1);
    RngStream r1(2), r2(2);
    VariationalState serial =
        cavi_init(data, config, InitStrategy::kmeans_style, r1);
    VariationalState parallel =
        cavi_init(data, config, InitStrategy::kmeans_style, r2);
    const double ts = time_it([&] {
      for (int i = 0; i < 50; ++i)
        cavi_iterate(serial, data, config, Exec::serial);
    });
    const double tp = time_it([&] {
      for (int i = 0; i < 50; ++i)
        cavi_iterate(parallel, data, config, Exec::parallel);
    });
    report("cavi iterate (50x)", ts, tp);
    if (serial.xi != parallel.xi) std::printf("  MISMATCH in xi!\n");
  }

  // PSM over a benchmark chain
  {
    RngStream data_rng(3);
    const auto [data, truth] = univariate_benchmark(50, data_rng);
    FisanConfig config;
    config.kernel = KernelPrior::defaults(1);
    const ChainStore chain = gibbs_run(data, SanConfig(config),
                                       RunLength{1500, 500, 1}, RngStream(4));
    Eigen::MatrixXd a, b;
    const double ts =
        time_it([&] { a = psm(chain, Level::observational, Exec::serial); });
    const double tp =
        time_it([&] { b = psm(chain, Level::observational, Exec::parallel); });
    report("psm (300 units x 1000)", ts, tp);
    if (a != b) std::printf("  MISMATCH in psm!\n");

    const Eigen::MatrixXd grid = make_grid_1d(-8.0, 8.0, 2000);
    DensityGrid fa, fb;
    const double ds =
        time_it([&] { fa = density_mcmc(chain, grid, 0, Exec::serial); });
    const double dp =
        time_it([&] { fb = density_mcmc(chain, grid, 0, Exec::parallel); });
    report("density_mcmc (2000 pts)", ds, dp);
    if (fa.values != fb.values) std::printf("  MISMATCH in density!\n");
  }

  // Monte Carlo prior correlation
  {
    HyperPriorMap hyper;
    hyper["alpha"] = HyperPrior::gamma(1.0, 1.0);
    const PriorFamily family = make_fisan(1.0, 25, 0.05);
    McEstimate a{}, b{};
    const double ts = time_it([&] {
      a = mc_correlation(family, hyper, 0.3, 100000, RngStream(5),
                         Exec::serial);
    });
    const double tp = time_it([&] {
      b = mc_correlation(family, hyper, 0.3, 100000, RngStream(5),
                         Exec::parallel);
    });
    report("mc_correlation (1e5)", ts, tp);
    if (a.estimate != b.estimate) std::printf("  MISMATCH in estimate!\n");
  }

  // multi-restart fit
  {
    RngStream data_rng(6);
    const auto [data, truth] = univariate_benchmark(100, data_rng);
    FisanConfig config;
    config.kernel = KernelPrior::defaults(1);
    FitOptions serial_options;
    serial_options.restarts = 12;
    serial_options.max_iter = 200;
    serial_options.exec = Exec::serial;
    FitOptions parallel_options = serial_options;
    parallel_options.exec = Exec::parallel;
    FitResult ra, rb;
    const double ts = time_it([&] {
      ra = cavi_fit(data, SanConfig(config), serial_options, RngStream(7));
    });
    const double tp = time_it([&] {
      rb = cavi_fit(data, SanConfig(config), parallel_options, RngStream(7));
    });
    report("cavi fit (12 restarts)", ts, tp);
    if (ra.best.rho != rb.best.rho) std::printf("  MISMATCH in fit!\n");
  }

  return 0;
}
