#pragma once

#include <cstdint>
#include <vector>

#include "odflow/panel.hpp"

namespace odflow {

// Matching problem for one treated cell: donor units (comparable days at the
// same interval), their covariates and outcomes, and the pre-period outcome
// rows used to score candidate V matrices.
struct DonorSet {
  int n_donors = 0;
  int d = 0;  // covariate dimension
  int t = 0;  // pre-period length
  std::vector<double> donor_covariates;   // n_donors x d, row-major
  std::vector<double> donor_outcomes;     // n_donors
  std::vector<double> donor_pre;          // t x n_donors, row-major by time
  std::vector<double> target_covariates;  // d
  std::vector<double> target_pre;         // t

  void validate() const;  // shape + finiteness + n_donors >= 1, t >= 1
};

struct SynControlConfig {
  int t_pre = 2;                 // pre-period length (matching horizon)
  int inner_max_iter = 10000;    // weight-solver iteration cap
  double inner_tol = 1e-10;      // stop when the norm improves by less
  int outer_restarts = 3;        // random V restarts beyond the identity start
  bool standardize = true;       // z-score covariates over donors before matching

  void validate() const;
};

// Result of fitting weights (and, from optimize_v, the covariate metric V).
struct SyntheticFit {
  std::vector<double> weights;   // on the probability simplex
  std::vector<double> v_diag;    // positive, sums to d
  double inner_objective = 0.0;  // achieved V-norm of the covariate residual
  double outer_objective = 0.0;  // Euclidean pre-period prediction error
  double counterfactual = 0.0;   // weighted donor outcome
};

struct SolveWeightsResult {
  std::vector<double> weights;
  double objective = 0.0;  // achieved V-norm
  int iterations = 0;
};

// Euclidean projection onto the probability simplex (exact, sort-based).
std::vector<double> project_to_simplex(std::vector<double> values);

// Minimize the V-weighted norm of (target_covariates − Σ w_i · donor row i)
// over the probability simplex, by projected gradient descent with a
// Lipschitz step. Stops once the per-iteration improvement of the achieved
// norm falls below inner_tol, or after inner_max_iter iterations.
SolveWeightsResult solve_weights(const DonorSet& donors, const std::vector<double>& v_diag,
                                 const SynControlConfig& config = {});

// Choose diag(V) to minimize the Euclidean pre-period error of the induced
// weights (Nelder–Mead over log v, renormalized to sum d, restarted from the
// identity and outer_restarts seeded random points), then report the full fit.
// With standardize on, covariates are z-scored over donors first and v_diag /
// inner_objective are expressed in that standardized space.
SyntheticFit optimize_v(const DonorSet& donors, const SynControlConfig& config = {},
                        std::uint64_t seed = 0);

// Fit weights under a caller-supplied diag(V) (no V search), applying the same
// standardization convention as optimize_v: with standardize on, v_diag is
// interpreted in the donor set's own z-scored covariate space. Used to reuse a
// treated cell's optimized V across its placebo runs.
SyntheticFit fit_with_v(const DonorSet& donors, const std::vector<double>& v_diag,
                        const SynControlConfig& config = {});

// Weighted donor outcome; always inside [min donor outcome, max donor outcome].
double counterfactual(const DonorSet& donors, const SyntheticFit& fit);

// Days carrying no incident at all, ascending. These are the candidate donors.
std::vector<int> donor_days(const ODPanel& panel, const std::vector<IncidentRecord>& incidents);

// Assemble the matching problem for (od, target_day, interval) against the
// given donor days: covariates from covariates_at, outcomes at `interval`,
// pre-period rows from the t_pre intervals before it.
DonorSet build_donor_set(const ODPanel& panel, const std::vector<int>& donor_day_list, int od,
                         int target_day, int interval, int t_pre);

// Full synthetic-control estimate for one cell: donors are all non-incident
// days (excluding the target day), V is optimized, and the effect is
// observed − counterfactual. p_value is left NaN; the placebo test fills it.
CausalEffectEstimate estimate_effect(const ODPanel& panel,
                                     const std::vector<IncidentRecord>& incidents, int od, int day,
                                     int interval, const SynControlConfig& config = {});

}  // namespace odflow
