#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace odflow {

// Second moments that drive the adjustment-threshold formula: E f(x)²,
// E f̂(x)², and E (f̂(x)−f(x))² for the true effect f and fitted model f̂.
struct TheoremInputs {
  double e_f2 = 0.0;
  double e_fhat2 = 0.0;
  double e_sq_err = 0.0;

  void validate() const;  // nonnegative and Cauchy–Schwarz-consistent
};

// Noisy-sample linear regression experiment: each sample is informative with
// probability p (label β·x + ε₂) and pure noise ε₁ otherwise; the fitted β̂
// comes from plain least squares over all n samples.
struct NoisyLinearSpec {
  std::vector<double> beta;
  double p = 0.5;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  double sigma_x = 1.0;
  int n = 1000;
  int trials = 500;
  std::uint64_t seed = 0;

  int d() const { return static_cast<int>(beta.size()); }
  void validate() const;  // d >= 1, n > d+1, p in [0,1], sigmas >= 0, sigma_x > 0
};

struct ParamLossResult {
  double empirical = 0.0;   // mean over trials of |β − β̂|²
  int resampled_trials = 0;  // trials redrawn due to a singular design
};

// Monte Carlo mean parameter loss under the noisy-sample experiment.
ParamLossResult empirical_param_loss(const NoisyLinearSpec& spec);

// Closed-form prediction: (1−p)²·|β|² + (d/σ_x²)·(σ₁² + p·σ₂²)/n.
double closed_form_param_loss(const NoisyLinearSpec& spec);

// Alternative closed form with a linear (1−p) leading factor. The source
// material states both variants in different places; the quadratic one is
// correct and the Monte Carlo check discriminates. Kept so reports can plot
// the two candidates side by side.
double closed_form_param_loss_linear_variant(const NoisyLinearSpec& spec);

// Threshold-gated adjustment experiment: a cell is affected with probability
// p_i ~ U[0,1]; the strategy adjusts by f̂(x) whenever p_i exceeds the
// threshold P. Risk is the mean squared error of the adjustment against the
// realized effect contribution.
struct AdjustmentSpec {
  std::function<double(double)> f;     // true effect of x (x drawn standard normal)
  std::function<double(double)> fhat;  // model estimate of the effect
  double sigma1 = 1.0;                 // baseline (normal-model) noise
  double sigma2 = 1.0;                 // effect noise
  std::vector<double> p_grid;          // thresholds to evaluate, each in [0,1]
  long long draws = 100000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdjustmentRiskResult {
  std::vector<double> risks;  // aligned with p_grid
  TheoremInputs moments;      // moments estimated from the same draws
};

AdjustmentRiskResult empirical_adjustment_risk(const AdjustmentSpec& spec);

// Closed-form risk: ½P²(Ef² + Ef̂² − E(f̂−f)²) − P·Ef̂² + c with
// c = (E(f̂−f)² + Ef̂²)/2 + σ₁² + σ₂²/2.
double closed_form_adjustment_risk(const TheoremInputs& inputs, double threshold, double sigma1,
                                   double sigma2);

// Least-squares fit of a + b·x + c·x² to (x, y) pairs; returns (a, b, c) and
// the coefficient of determination. Used to check the risk curve's shape.
struct QuadraticFit {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double r_squared = 0.0;
};
QuadraticFit fit_quadratic(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace odflow
