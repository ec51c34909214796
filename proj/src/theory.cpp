#include "odflow/theory.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "odflow/errors.hpp"
#include "odflow/rng.hpp"

namespace odflow {

namespace {

constexpr std::uint64_t kTrialSalt = 0x74333173ULL;
constexpr std::uint64_t kDrawSalt = 0x74333273ULL;

// Compensated (Kahan) accumulator: trial sums must be order-stable and
// precise enough that fixed seeds give bit-identical reported means.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double value) {
    const double y = value - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
};

}  // namespace

void TheoremInputs::validate() const {
  if (e_f2 < 0.0 || e_fhat2 < 0.0 || e_sq_err < 0.0) {
    throw DomainError("second moments must be nonnegative");
  }
  const double bound = e_f2 + e_fhat2 + 2.0 * std::sqrt(e_f2 * e_fhat2);
  if (e_sq_err > bound * (1.0 + 1e-9) + 1e-12) {
    throw DomainError("E(f-fhat)^2 exceeds its Cauchy-Schwarz bound; moments inconsistent");
  }
}

void NoisyLinearSpec::validate() const {
  if (beta.empty()) throw DomainError("beta must have dimension >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0,1]");
  if (sigma1 < 0.0 || sigma2 < 0.0) throw DomainError("noise sigmas must be >= 0");
  if (!(sigma_x > 0.0)) throw DomainError("sigma_x must be > 0");
  if (n <= d() + 1) throw DomainError("need n > d + 1 samples");
  if (trials < 1) throw DomainError("trials must be >= 1");
}

void AdjustmentSpec::validate() const {
  if (!f || !fhat) throw DomainError("f and fhat must be callable");
  if (sigma1 < 0.0 || sigma2 < 0.0) throw DomainError("noise sigmas must be >= 0");
  if (p_grid.empty()) throw DomainError("p_grid must be nonempty");
  for (const double p : p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("thresholds must lie in [0,1]");
  }
  if (draws < 1) throw DomainError("draws must be >= 1");
}

ParamLossResult empirical_param_loss(const NoisyLinearSpec& spec) {
  spec.validate();
  const int d = spec.d();
  ParamLossResult result;
  KahanSum loss_sum;
  Eigen::MatrixXd design(spec.n, d);
  Eigen::VectorXd labels(spec.n);
  Eigen::VectorXd beta_true(d);
  for (int j = 0; j < d; ++j) beta_true(j) = spec.beta[static_cast<std::size_t>(j)];

  for (int trial = 0; trial < spec.trials; ++trial) {
    for (int attempt = 0;; ++attempt) {
      Rng rng(mix_seed(spec.seed, {kTrialSalt, static_cast<std::uint64_t>(trial),
                                   static_cast<std::uint64_t>(attempt)}));
      for (int i = 0; i < spec.n; ++i) {
        for (int j = 0; j < d; ++j) design(i, j) = spec.sigma_x * rng.normal();
        const bool informative = rng.uniform() < spec.p;
        if (informative) {
          labels(i) = design.row(i).dot(beta_true) + spec.sigma2 * rng.normal();
        } else {
          labels(i) = spec.sigma1 * rng.normal();
        }
      }
      const Eigen::MatrixXd gram = design.transpose() * design;
      const Eigen::VectorXd moment = design.transpose() * labels;
      const Eigen::VectorXd beta_hat = gram.ldlt().solve(moment);
      const double solve_residual = (gram * beta_hat - moment).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, moment.cwiseAbs().maxCoeff());
      if (!beta_hat.allFinite() || solve_residual > 1e-6 * scale) {
        ++result.resampled_trials;  // singular design: redraw the whole trial
        continue;
      }
      loss_sum.add((beta_hat - beta_true).squaredNorm());
      break;
    }
  }
  result.empirical = loss_sum.sum / static_cast<double>(spec.trials);
  return result;
}

double closed_form_param_loss(const NoisyLinearSpec& spec) {
  spec.validate();
  double beta_norm2 = 0.0;
  for (const double b : spec.beta) beta_norm2 += b * b;
  const double shrink = 1.0 - spec.p;
  const double c = static_cast<double>(spec.d()) / (spec.sigma_x * spec.sigma_x);
  return shrink * shrink * beta_norm2 +
         c * (spec.sigma1 * spec.sigma1 + spec.p * spec.sigma2 * spec.sigma2) /
             static_cast<double>(spec.n);
}

double closed_form_param_loss_linear_variant(const NoisyLinearSpec& spec) {
  spec.validate();
  double beta_norm2 = 0.0;
  for (const double b : spec.beta) beta_norm2 += b * b;
  const double c = static_cast<double>(spec.d()) / (spec.sigma_x * spec.sigma_x);
  return (1.0 - spec.p) * beta_norm2 +
         c * (spec.sigma1 * spec.sigma1 + spec.p * spec.sigma2 * spec.sigma2) /
             static_cast<double>(spec.n);
}

AdjustmentRiskResult empirical_adjustment_risk(const AdjustmentSpec& spec) {
  spec.validate();
  const std::size_t grid_size = spec.p_grid.size();
  std::vector<std::size_t> grid_order(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) grid_order[i] = i;
  std::stable_sort(grid_order.begin(), grid_order.end(), [&](std::size_t a, std::size_t b) {
    return spec.p_grid[a] < spec.p_grid[b];
  });
  std::vector<double> sorted_grid(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) sorted_grid[i] = spec.p_grid[grid_order[i]];

  // A draw adjusts at every threshold strictly below its p_i. Accumulate the
  // no-adjustment error for everyone plus a per-boundary correction bucket,
  // then build the risks with one suffix pass. This keeps the cost
  // O(draws + grid) instead of O(draws * grid).
  KahanSum base_error;  // Σ err_no over all draws
  std::vector<KahanSum> correction(grid_size + 1);  // bucket by boundary index
  KahanSum sum_f2;
  KahanSum sum_fhat2;
  KahanSum sum_sq_err;

  Rng rng(mix_seed(spec.seed, {kDrawSalt}));
  for (long long it = 0; it < spec.draws; ++it) {
    const double x = rng.normal();
    const double p_i = rng.uniform();
    const double eps1 = spec.sigma1 * rng.normal();
    const double eps2 = spec.sigma2 * rng.normal();
    const bool affected = rng.uniform() < p_i;
    const double effect_true = spec.f(x);
    const double effect_model = spec.fhat(x);
    const double truth = eps1 + (affected ? effect_true + eps2 : 0.0);

    const double err_no = truth * truth;
    const double diff = effect_model - truth;
    const double err_adj = diff * diff;
    base_error.add(err_no);
    // Thresholds sorted ascending: indices [0, boundary) satisfy P < p_i.
    const std::size_t boundary = static_cast<std::size_t>(
        std::lower_bound(sorted_grid.begin(), sorted_grid.end(), p_i) - sorted_grid.begin());
    correction[boundary].add(err_adj - err_no);

    sum_f2.add(effect_true * effect_true);
    sum_fhat2.add(effect_model * effect_model);
    sum_sq_err.add((effect_model - effect_true) * (effect_model - effect_true));
  }

  const double inv = 1.0 / static_cast<double>(spec.draws);
  AdjustmentRiskResult result;
  result.risks.assign(grid_size, 0.0);
  double suffix = 0.0;
  for (std::size_t j = grid_size; j-- > 0;) {
    suffix += correction[j + 1].sum;
    result.risks[grid_order[j]] = (base_error.sum + suffix) * inv;
  }
  result.moments.e_f2 = sum_f2.sum * inv;
  result.moments.e_fhat2 = sum_fhat2.sum * inv;
  result.moments.e_sq_err = sum_sq_err.sum * inv;
  return result;
}

double closed_form_adjustment_risk(const TheoremInputs& inputs, double threshold, double sigma1,
                                   double sigma2) {
  inputs.validate();
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw DomainError("threshold must lie in [0,1]");
  }
  const double quad = inputs.e_f2 + inputs.e_fhat2 - inputs.e_sq_err;
  const double constant =
      0.5 * (inputs.e_sq_err + inputs.e_fhat2) + sigma1 * sigma1 + 0.5 * sigma2 * sigma2;
  return 0.5 * threshold * threshold * quad - threshold * inputs.e_fhat2 + constant;
}

QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) {
    throw DomainError("quadratic fit needs >= 3 aligned points");
  }
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd target(n);
  for (int i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = x[static_cast<std::size_t>(i)];
    design(i, 2) = x[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    target(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd coef =
      (design.transpose() * design).ldlt().solve(design.transpose() * target);
  QuadraticFit fit;
  fit.a = coef(0);
  fit.b = coef(1);
  fit.c = coef(2);
  const double mean = target.mean();
  const double ss_total = (target.array() - mean).square().sum();
  const double ss_residual = (target - design * coef).squaredNorm();
  fit.r_squared = ss_total > 0.0 ? 1.0 - ss_residual / ss_total : 1.0;
  return fit;
}

}  // namespace odflow
