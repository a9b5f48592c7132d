// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace sanmix {

/// Counter-based random stream.  A stream is identified by (seed, stream id);
/// identical identifiers reproduce identical draw sequences and distinct
/// stream ids give statistically independent sequences, so parallel tasks can
/// each own a split() of a parent stream without coordination.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  /// Derive an independent child stream; deterministic in (parent, substream).
  RngStream split(std::uint64_t substream) const;

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);

  double normal();
  double normal(double mean, double sd);

  /// Gamma(shape, rate) via Marsaglia-Tsang, boosted for shape < 1.
  double gamma(double shape, double rate);
  double beta(double a, double b);
  double chi_squared(double dof);

  Eigen::VectorXd dirichlet(const Eigen::VectorXd& concentration);

  /// Index draw proportional to nonnegative weights (need not be normalized).
  int categorical(const Eigen::VectorXd& weights);
  /// Index draw from unnormalized log weights (max-shifted).
  int categorical_from_log(const Eigen::VectorXd& log_weights);

  /// Draw from N(mean, cov) given the lower Cholesky factor of cov.
  Eigen::VectorXd mvn_from_cholesky(const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& cov_lower);

  /// Wishart(scale, dof) via the Bartlett decomposition.
  Eigen::MatrixXd wishart(const Eigen::MatrixXd& scale, double dof);

  struct NormalWishartDraw {
    Eigen::VectorXd mu;
    Eigen::MatrixXd lambda;  // precision
  };
  /// (mu, Lambda) ~ NW(mu0, kappa, dof, scale):
  /// Lambda ~ Wishart(scale, dof), mu | Lambda ~ N(mu0, (kappa Lambda)^{-1}).
  NormalWishartDraw normal_wishart(const Eigen::VectorXd& mu0, double kappa,
                                   double dof, const Eigen::MatrixXd& scale);

  struct NormalInvGammaDraw {
    double mu;
    double sigma2;
  };
  /// (mu, sigma2) ~ NIG(mu0, kappa, shape, scale):
  /// sigma2 ~ InvGamma(shape, scale), mu | sigma2 ~ N(mu0, sigma2 / kappa).
  NormalInvGammaDraw normal_inv_gamma(double mu0, double kappa, double shape,
                                      double scale);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace sanmix
