// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <string>
#include <variant>
#include <vector>

#include "sanmix/data.hpp"
#include "sanmix/rng.hpp"

namespace sanmix {

/// Prior on the distributional DP concentration: fixed or Gamma(shape, rate).
struct AlphaPrior {
  static AlphaPrior fixed(double value);
  static AlphaPrior gamma(double shape, double rate);
  bool is_fixed = false;
  double value = 1.0;  // fixed value
  double shape = 1.0;
  double rate = 1.0;
};

/// Conjugate normal-Wishart prior on the kernel atoms (mu, Lambda).  The
/// univariate normal-inverse-gamma prior maps onto the same family
/// (dof = 2 shape, scale = 1 / (2 scale)), so d = 1 runs through the same
/// machinery with identical posteriors.
struct KernelPrior {
  Eigen::VectorXd mu0;
  double kappa0 = 0.01;
  double dof = 0.0;          // Wishart degrees of freedom
  Eigen::MatrixXd scale;     // Wishart scale matrix
  Eigen::MatrixXd scale_inv;

  static KernelPrior normal_wishart(Eigen::VectorXd mu0, double kappa0,
                                    double dof, Eigen::MatrixXd scale);
  static KernelPrior normal_inv_gamma(double mu0, double kappa0, double shape,
                                      double scale);
  /// NIG(0, 0.01, 3, 2) for d = 1; NW(0, 0.01, d + 5, I) otherwise.
  static KernelPrior defaults(int d);
  int dim() const { return static_cast<int>(mu0.size()); }
};

struct FisanConfig {
  int L = 25;
  int T = 20;
  double b = 0.05;
  AlphaPrior alpha = AlphaPrior::gamma(1.0, 1.0);
  KernelPrior kernel;
  /// Throws on invariant violations; returns warnings (e.g. the sparsity
  /// condition b < zeta / 2 not holding).
  std::vector<std::string> validate() const;
};

struct FsanConfig {
  int K = 20;
  int L = 25;
  double a = 0.05;
  double b = 0.05;
  KernelPrior kernel;
  std::vector<std::string> validate() const;
};

using SanConfig = std::variant<FisanConfig, FsanConfig>;

int distributional_components(const SanConfig& config);  // T or K
int observational_components(const SanConfig& config);   // L
const KernelPrior& kernel_prior(const SanConfig& config);
bool is_fisan(const SanConfig& config);

enum class InitStrategy { random_responsibility, kmeans_style };

struct KernelPosterior {
  Eigen::VectorXd m;
  double t = 0.0;
  double c = 0.0;
  Eigen::MatrixXd D;
  // caches derived from (c, D)
  double log_det_d = 0.0;
  double e_log_det = 0.0;  // E[log |Lambda|]
  void refresh();
};

struct VariationalState {
  bool finite_pi = false;      // fSAN
  Eigen::MatrixXd rho;         // J x T responsibilities, rows sum to 1
  Eigen::MatrixXd xi;          // N x L responsibilities (group-major rows)
  Eigen::MatrixXd p;           // T x L observational Dirichlet parameters
  Eigen::VectorXd stick_a;     // T - 1 stick beta parameters (fiSAN)
  Eigen::VectorXd stick_b;
  double s1 = 0.0, s2 = 0.0;   // q(alpha) gamma parameters (fiSAN)
  bool alpha_fixed = false;
  double alpha_value = 0.0;    // fixed alpha, when alpha_fixed
  Eigen::VectorXd p_tilde;     // K distributional Dirichlet parameters (fSAN)
  std::vector<KernelPosterior> kernels;
  std::vector<double> elbo_trace;

  int T() const { return static_cast<int>(rho.cols()); }
  int L() const { return static_cast<int>(xi.cols()); }
  double e_alpha() const { return alpha_fixed ? alpha_value : s1 / s2; }
  double e_log_alpha() const;
};

VariationalState cavi_init(const GroupedDataset& data, const SanConfig& config,
                           InitStrategy strategy, RngStream& rng);

/// One full round of coordinate updates in the fixed order: S
/// responsibilities, M responsibilities, observational Dirichlets, sticks (or
/// distributional Dirichlet), kernels, concentration.
void cavi_iterate(VariationalState& state, const GroupedDataset& data,
                  const SanConfig& config, Exec exec = Exec::parallel);

double cavi_elbo(const VariationalState& state, const GroupedDataset& data,
                 const SanConfig& config, Exec exec = Exec::parallel);

struct FitOptions {
  double tol = 1e-4;
  int max_iter = 1000;
  int restarts = 1;
  InitStrategy init = InitStrategy::kmeans_style;
  Exec exec = Exec::parallel;
};

struct FitResult {
  VariationalState best;
  int best_restart = -1;
  std::vector<std::vector<double>> traces;  // per restart
};

/// Multi-restart fit; every restart iterates until the ELBO increment drops
/// below tol (or max_iter) and the state with the highest final ELBO wins,
/// ties broken by the lowest restart index.
FitResult cavi_fit(const GroupedDataset& data, const SanConfig& config,
                   const FitOptions& options, RngStream rng);

// Individual coordinate updates, exposed for white-box tests.
namespace cavi_detail {
void update_rho(VariationalState& state, const GroupedDataset& data,
                const SanConfig& config);
void update_xi(VariationalState& state, const GroupedDataset& data,
               const SanConfig& config, Exec exec);
void update_omega(VariationalState& state, const GroupedDataset& data,
                  const SanConfig& config);
void update_distributional(VariationalState& state, const SanConfig& config);
void update_kernels(VariationalState& state, const GroupedDataset& data,
                    const SanConfig& config, Exec exec);
void update_alpha(VariationalState& state, const SanConfig& config);
}  // namespace cavi_detail

}  // namespace sanmix
