// Apache License, Version 2.0, refer to LICENSE.txt
#include "sanmix/prior.hpp"

#include <cmath>
#include <exception>
#include <vector>

namespace sanmix {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0))
    throw std::domain_error(std::string(name) + " must be positive");
}

void require_dim(int v, const char* name) {
  if (v < 1) throw std::domain_error(std::string(name) + " must be >= 1");
}

}  // namespace

PriorFamily make_fisan(double alpha, int L, double b) {
  require_positive(alpha, "alpha");
  require_positive(b, "b");
  require_dim(L, "L");
  return FisanPrior{alpha, L, b};
}

PriorFamily make_fsan(double a, int K, int L, double b) {
  require_positive(a, "a");
  require_positive(b, "b");
  require_dim(K, "K");
  require_dim(L, "L");
  return FsanPrior{a, K, L, b};
}

PriorFamily make_ndp(double alpha, double beta) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  return NdpPrior{alpha, beta};
}

PriorFamily make_cam(double alpha, double beta) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  return CamPrior{alpha, beta};
}

PriorFamily make_hhdp(double alpha, double beta, double beta0) {
  require_positive(alpha, "alpha");
  require_positive(beta, "beta");
  require_positive(beta0, "beta0");
  return HhdpPrior{alpha, beta, beta0};
}

std::string family_name(const PriorFamily& family) {
  struct Visitor {
    std::string operator()(const FisanPrior&) const { return "fisan"; }
    std::string operator()(const FsanPrior&) const { return "fsan"; }
    std::string operator()(const NdpPrior&) const { return "ndp"; }
    std::string operator()(const CamPrior&) const { return "cam"; }
    std::string operator()(const HhdpPrior&) const { return "hhdp"; }
  };
  return std::visit(Visitor{}, family);
}

double correlation(const PriorFamily& family) {
  struct Visitor {
    double operator()(const FisanPrior& f) const {
      return 1.0 - f.alpha * (f.L - 1) /
                       (f.L * (f.alpha + 1.0) * (f.b + 1.0));
    }
    double operator()(const FsanPrior& f) const {
      return 1.0 - f.a * (f.K - 1) * (f.L - 1) /
                       (f.L * (f.K * f.a + 1.0) * (f.b + 1.0));
    }
    double operator()(const NdpPrior& f) const { return 1.0 / (1.0 + f.alpha); }
    double operator()(const CamPrior& f) const {
      return 1.0 - (f.alpha / (1.0 + f.alpha)) * (f.beta / (1.0 + 2.0 * f.beta));
    }
    double operator()(const HhdpPrior& f) const {
      return 1.0 - f.alpha * f.beta0 /
                       ((f.alpha + 1.0) * (f.beta + f.beta0 + 1.0));
    }
  };
  return std::visit(Visitor{}, family);
}

CoclusterProbs cocluster_probs(const PriorFamily& family) {
  if (const auto* f = std::get_if<FisanPrior>(&family)) {
    const double distributional = 1.0 / (1.0 + f->alpha);
    const double observational =
        (f->L + f->alpha + f->L * (f->b + f->alpha * f->b)) /
        (f->L * (f->alpha + 1.0) * (f->L * f->b + 1.0));
    return {distributional, observational};
  }
  if (const auto* f = std::get_if<FsanPrior>(&family)) {
    const double distributional = (1.0 + f->a) / (1.0 + f->K * f->a);
    const double observational =
        (f->a * (f->L + f->K - 1) + f->L * (f->b + f->K * f->a * f->b + 1.0)) /
        (f->L * (f->K * f->a + 1.0) * (f->L * f->b + 1.0));
    return {distributional, observational};
  }
  throw CapabilityError("cocluster_probs: only available for SAN families");
}

HyperPrior HyperPrior::fixed(double v) {
  require_positive(v, "hyperprior value");
  HyperPrior h;
  h.is_fixed = true;
  h.value = v;
  return h;
}

HyperPrior HyperPrior::gamma(double shape, double rate) {
  require_positive(shape, "hyperprior shape");
  require_positive(rate, "hyperprior rate");
  HyperPrior h;
  h.is_fixed = false;
  h.value = shape;
  h.rate = rate;
  return h;
}

double HyperPrior::draw(RngStream& rng) const {
  return is_fixed ? value : rng.gamma(value, rate);
}

namespace {

constexpr double kStickResidualTol = 1e-8;
constexpr int kMaxSticks = 100000;

// Adaptive truncated stick-breaking: extend until the residual mass drops
// below kStickResidualTol.
std::vector<double> gem_weights(double concentration, RngStream& rng) {
  std::vector<double> weights;
  double residual = 1.0;
  while (residual > kStickResidualTol) {
    if (static_cast<int>(weights.size()) >= kMaxSticks)
      throw ResourceError(
          "stick-breaking truncation failed: residual mass above 1e-8 after " +
          std::to_string(kMaxSticks) + " sticks; increase truncation");
    const double v = rng.beta(1.0, concentration);
    weights.push_back(residual * v);
    residual *= (1.0 - v);
  }
  return weights;
}

int categorical_std(const std::vector<double>& w, RngStream& rng) {
  double total = 0.0;
  for (double x : w) total += x;
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (target <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

double dot_bernoulli(const std::vector<double>& w, const std::vector<int>& z) {
  double out = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (z[i]) out += w[i];
  return out;
}

std::vector<int> bernoulli_vec(std::size_t n, double h, RngStream& rng) {
  std::vector<int> z(n);
  for (auto& zi : z) zi = rng.uniform() < h ? 1 : 0;
  return z;
}

struct ResolvedParams {
  double alpha = 0.0, beta = 0.0, beta0 = 0.0, a = 0.0, b = 0.0;
  int K = 0, L = 0;
};

double resolve(const HyperPriorMap& hyperpriors, const std::string& key,
               double fallback, RngStream& rng) {
  auto it = hyperpriors.find(key);
  return it == hyperpriors.end() ? fallback : it->second.draw(rng);
}

ResolvedParams resolve_params(const PriorFamily& family,
                              const HyperPriorMap& hyperpriors,
                              RngStream& rng) {
  ResolvedParams p;
  if (const auto* f = std::get_if<FisanPrior>(&family)) {
    p.alpha = resolve(hyperpriors, "alpha", f->alpha, rng);
    p.b = resolve(hyperpriors, "b", f->b, rng);
    p.L = f->L;
  } else if (const auto* f = std::get_if<FsanPrior>(&family)) {
    p.a = resolve(hyperpriors, "a", f->a, rng);
    p.b = resolve(hyperpriors, "b", f->b, rng);
    p.K = f->K;
    p.L = f->L;
  } else if (const auto* f = std::get_if<NdpPrior>(&family)) {
    p.alpha = resolve(hyperpriors, "alpha", f->alpha, rng);
    p.beta = resolve(hyperpriors, "beta", f->beta, rng);
  } else if (const auto* f = std::get_if<CamPrior>(&family)) {
    p.alpha = resolve(hyperpriors, "alpha", f->alpha, rng);
    p.beta = resolve(hyperpriors, "beta", f->beta, rng);
  } else if (const auto* f = std::get_if<HhdpPrior>(&family)) {
    p.alpha = resolve(hyperpriors, "alpha", f->alpha, rng);
    p.beta = resolve(hyperpriors, "beta", f->beta, rng);
    p.beta0 = resolve(hyperpriors, "beta0", f->beta0, rng);
  }
  return p;
}

struct MeasurePair {
  double g1, g2;
};

// One pair (G_j(A), G_j'(A)) from the generative model, with the atom
// indicator draws z_l = 1{theta_l in A} shared wherever the atoms are shared.
MeasurePair simulate_pair(const PriorFamily& family, const ResolvedParams& p,
                          double h, RngStream& rng) {
  if (std::holds_alternative<FisanPrior>(family) ||
      std::holds_alternative<FsanPrior>(family)) {
    int s1, s2;
    if (std::holds_alternative<FisanPrior>(family)) {
      const std::vector<double> pi = gem_weights(p.alpha, rng);
      s1 = categorical_std(pi, rng);
      s2 = categorical_std(pi, rng);
    } else {
      const Eigen::VectorXd pi =
          rng.dirichlet(Eigen::VectorXd::Constant(p.K, p.a));
      s1 = rng.categorical(pi);
      s2 = rng.categorical(pi);
    }
    const std::vector<int> z = bernoulli_vec(p.L, h, rng);
    const Eigen::VectorXd conc = Eigen::VectorXd::Constant(p.L, p.b);
    const Eigen::VectorXd w1 = rng.dirichlet(conc);
    const Eigen::VectorXd w2 = s1 == s2 ? w1 : rng.dirichlet(conc);
    double g1 = 0.0, g2 = 0.0;
    for (int l = 0; l < p.L; ++l)
      if (z[l]) {
        g1 += w1[l];
        g2 += w2[l];
      }
    return {g1, g2};
  }

  if (std::holds_alternative<NdpPrior>(family)) {
    const std::vector<double> pi = gem_weights(p.alpha, rng);
    const int s1 = categorical_std(pi, rng);
    const int s2 = categorical_std(pi, rng);
    // Atoms are specific to each distributional atom, so distinct clusters
    // carry independent indicator draws.
    const std::vector<double> w1 = gem_weights(p.beta, rng);
    const std::vector<int> z1 = bernoulli_vec(w1.size(), h, rng);
    const double g1 = dot_bernoulli(w1, z1);
    if (s1 == s2) return {g1, g1};
    const std::vector<double> w2 = gem_weights(p.beta, rng);
    const std::vector<int> z2 = bernoulli_vec(w2.size(), h, rng);
    return {g1, dot_bernoulli(w2, z2)};
  }

  if (std::holds_alternative<CamPrior>(family)) {
    const std::vector<double> pi = gem_weights(p.alpha, rng);
    const int s1 = categorical_std(pi, rng);
    const int s2 = categorical_std(pi, rng);
    std::vector<double> w1 = gem_weights(p.beta, rng);
    std::vector<double> w2 = s1 == s2 ? w1 : gem_weights(p.beta, rng);
    const std::size_t n = std::max(w1.size(), w2.size());
    const std::vector<int> z = bernoulli_vec(n, h, rng);
    w1.resize(n, 0.0);
    w2.resize(n, 0.0);
    return {dot_bernoulli(w1, z), dot_bernoulli(w2, z)};
  }

  // HHDP: the distributional atoms draw their own sticks over atoms sampled
  // from a common DP(beta0, H) realization.
  const std::vector<double> pi = gem_weights(p.alpha, rng);
  const int s1 = categorical_std(pi, rng);
  const int s2 = categorical_std(pi, rng);
  const std::vector<double> g0 = gem_weights(p.beta0, rng);
  const std::vector<int> z = bernoulli_vec(g0.size(), h, rng);
  auto measure_value = [&]() {
    const std::vector<double> w = gem_weights(p.beta, rng);
    double g = 0.0;
    for (double wr : w) {
      const int m = categorical_std(g0, rng);
      if (z[m]) g += wr;
    }
    return g;
  };
  const double g1 = measure_value();
  return {g1, s1 == s2 ? g1 : measure_value()};
}

// Pearson correlation of inner_pairs simulated measure pairs at one
// hyperparameter draw.
double replicate_correlation(const PriorFamily& family,
                             const HyperPriorMap& hyperpriors, double h,
                             int inner_pairs, RngStream rng) {
  ResolvedParams p = resolve_params(family, hyperpriors, rng);
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < inner_pairs; ++i) {
    const MeasurePair mp = simulate_pair(family, p, h, rng);
    sx += mp.g1;
    sy += mp.g2;
    sxx += mp.g1 * mp.g1;
    syy += mp.g2 * mp.g2;
    sxy += mp.g1 * mp.g2;
  }
  const double n = inner_pairs;
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  const double cxy = sxy - sx * sy / n;
  if (!(vx > 0.0) || !(vy > 0.0))
    throw NumericalError("mc_correlation: degenerate replicate sample");
  return cxy / std::sqrt(vx * vy);
}

}  // namespace

McEstimate mc_correlation(const PriorFamily& family,
                          const HyperPriorMap& hyperpriors, double h,
                          long draws, RngStream rng, Exec exec) {
  if (!(h > 0.0 && h < 1.0))
    throw std::domain_error("mc_correlation: h must lie in (0, 1)");
  if (draws < 10000)
    throw std::domain_error("mc_correlation: need at least 1e4 draws");
  constexpr int kInnerPairs = 100;
  const long outer = draws / kInnerPairs;
  std::vector<double> corr(outer);

  if (exec == Exec::serial) {
    for (long o = 0; o < outer; ++o)
      corr[o] = replicate_correlation(family, hyperpriors, h, kInnerPairs,
                                      rng.split(o));
  } else {
    // Exceptions may not escape the parallel region; capture and rethrow.
    std::exception_ptr error;
#pragma omp parallel for schedule(static)
    for (long o = 0; o < outer; ++o) {
      try {
        corr[o] = replicate_correlation(family, hyperpriors, h, kInnerPairs,
                                        rng.split(o));
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  }

  double mean = 0.0;
  for (double c : corr) mean += c;
  mean /= static_cast<double>(outer);
  double var = 0.0;
  for (double c : corr) var += (c - mean) * (c - mean);
  var /= static_cast<double>(outer - 1);
  return {mean, std::sqrt(var / static_cast<double>(outer))};
}

}  // namespace sanmix
