#include "odflow/syncontrol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "odflow/errors.hpp"
#include "odflow/rng.hpp"

namespace odflow {

namespace {

constexpr std::uint64_t kRestartSalt = 0x766f7074ULL;
constexpr std::uint64_t kEffectSalt = 0x65666665ULL;

void check_finite(const std::vector<double>& values, const char* what) {
  for (const double v : values) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + " must be finite");
  }
}

// Matching problem in solver space (covariates possibly standardized).
struct InnerProblem {
  int n = 0;
  int d = 0;
  std::vector<double> a;       // n x d donor covariates
  std::vector<double> target;  // d
  std::vector<double> gram;    // d x d, G = AᵀA (for the Lipschitz bound)

  void finish() {
    gram.assign(static_cast<std::size_t>(d) * static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < n; ++i) {
      const double* row = a.data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) {
        for (int k = j; k < d; ++k) {
          gram[static_cast<std::size_t>(j) * d + k] += row[j] * row[k];
        }
      }
    }
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < j; ++k) {
        gram[static_cast<std::size_t>(j) * d + k] = gram[static_cast<std::size_t>(k) * d + j];
      }
    }
  }

  // Achieved V-norm at w: sqrt(Σ_j v_j · residual_j²).
  double norm_at(const std::vector<double>& w, const double* v,
                 std::vector<double>& residual) const {
    residual.assign(target.begin(), target.end());
    for (int i = 0; i < n; ++i) {
      const double wi = w[static_cast<std::size_t>(i)];
      if (wi == 0.0) continue;
      const double* row = a.data() + static_cast<std::size_t>(i) * d;
      for (int j = 0; j < d; ++j) residual[static_cast<std::size_t>(j)] -= wi * row[j];
    }
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      acc += v[j] * residual[static_cast<std::size_t>(j)] * residual[static_cast<std::size_t>(j)];
    }
    return std::sqrt(std::max(0.0, acc));
  }
};

struct PgdScratch {
  std::vector<double> residual;
  std::vector<double> gradient;
  std::vector<double> trial;
  std::vector<double> sorted;
};

void project_simplex_inplace(std::vector<double>& w, std::vector<double>& sorted) {
  const std::size_t n = w.size();
  if (n == 1) {
    w[0] = 1.0;
    return;
  }
  sorted = w;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double cumulative = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    cumulative += sorted[j];
    const double candidate = (1.0 - cumulative) / static_cast<double>(j + 1);
    if (sorted[j] + candidate > 0.0) tau = candidate;
  }
  for (double& x : w) x = std::max(0.0, x + tau);
}

// Projected gradient descent on the simplex for the V-weighted quadratic.
// The step comes from a Gershgorin bound on the Hessian 2·A V Aᵀ (via the
// d x d matrix M_jk = sqrt(v_j v_k)·G_jk, which shares its nonzero spectrum),
// with halving backtracking as a safeguard.
SolveWeightsResult pgd_solve(const InnerProblem& prob, const double* v,
                             const SynControlConfig& cfg, const std::vector<double>* warm,
                             PgdScratch& scratch) {
  SolveWeightsResult result;
  std::vector<double>& w = result.weights;
  if (warm != nullptr && static_cast<int>(warm->size()) == prob.n) {
    w = *warm;
    project_simplex_inplace(w, scratch.sorted);
  } else {
    w.assign(static_cast<std::size_t>(prob.n), 1.0 / static_cast<double>(prob.n));
  }
  double norm = prob.norm_at(w, v, scratch.residual);
  if (prob.n == 1) {
    result.objective = norm;
    return result;
  }

  double lipschitz = 0.0;
  for (int j = 0; j < prob.d; ++j) {
    double row_sum = 0.0;
    for (int k = 0; k < prob.d; ++k) {
      row_sum += std::sqrt(v[j] * v[k]) *
                 std::abs(prob.gram[static_cast<std::size_t>(j) * prob.d + k]);
    }
    lipschitz = std::max(lipschitz, row_sum);
  }
  lipschitz *= 2.0;
  if (!(lipschitz > 0.0)) {
    // Zero objective landscape (all covariates zero under V): any w works.
    result.objective = norm;
    return result;
  }
  double step = 1.0 / lipschitz;

  int iterations = 0;
  while (iterations < cfg.inner_max_iter) {
    ++iterations;
    // Gradient: −2 Σ_j v_j r_j A_ij  (residual already cached in scratch).
    scratch.gradient.assign(static_cast<std::size_t>(prob.n), 0.0);
    for (int i = 0; i < prob.n; ++i) {
      const double* row = prob.a.data() + static_cast<std::size_t>(i) * prob.d;
      double g = 0.0;
      for (int j = 0; j < prob.d; ++j) {
        g -= 2.0 * v[j] * scratch.residual[static_cast<std::size_t>(j)] * row[j];
      }
      scratch.gradient[static_cast<std::size_t>(i)] = g;
    }
    double trial_norm = 0.0;
    double local_step = step;
    for (int halving = 0;; ++halving) {
      scratch.trial = w;
      for (int i = 0; i < prob.n; ++i) {
        scratch.trial[static_cast<std::size_t>(i)] -=
            local_step * scratch.gradient[static_cast<std::size_t>(i)];
      }
      project_simplex_inplace(scratch.trial, scratch.sorted);
      trial_norm = prob.norm_at(scratch.trial, v, scratch.residual);
      if (trial_norm <= norm || halving >= 60) break;
      local_step *= 0.5;
    }
    const double improvement = norm - trial_norm;
    if (trial_norm <= norm) {
      w.swap(scratch.trial);
      norm = trial_norm;
    }
    if (improvement < cfg.inner_tol) break;
  }
  // norm_at above may have been computed for a rejected trial; restore the
  // residual cache consistency by recomputing at the accepted point.
  result.objective = prob.norm_at(w, v, scratch.residual);
  result.iterations = iterations;
  return result;
}

struct OuterEvaluation {
  double outer = 0.0;
  double inner = 0.0;
  std::vector<double> weights;
};

// Shared state for one optimize_v call.
struct OuterProblem {
  InnerProblem inner;
  const DonorSet* donors = nullptr;
  const SynControlConfig* cfg = nullptr;
  PgdScratch scratch;

  OuterEvaluation evaluate(const std::vector<double>& v, const std::vector<double>* warm) {
    OuterEvaluation eval;
    SolveWeightsResult res = pgd_solve(inner, v.data(), *cfg, warm, scratch);
    eval.inner = res.objective;
    eval.weights = std::move(res.weights);
    double acc = 0.0;
    for (int tau = 0; tau < donors->t; ++tau) {
      const double* row = donors->donor_pre.data() + static_cast<std::size_t>(tau) * donors->n_donors;
      double fitted = 0.0;
      for (int i = 0; i < donors->n_donors; ++i) {
        fitted += eval.weights[static_cast<std::size_t>(i)] * row[i];
      }
      const double diff = fitted - donors->target_pre[static_cast<std::size_t>(tau)];
      acc += diff * diff;
    }
    eval.outer = std::sqrt(acc);
    return eval;
  }
};

// Set up the solver-space problem (standardizing covariates when configured).
void init_outer(OuterProblem& outer, const DonorSet& donors, const SynControlConfig& config) {
  outer.donors = &donors;
  outer.cfg = &config;
  outer.inner.n = donors.n_donors;
  outer.inner.d = donors.d;
  outer.inner.a = donors.donor_covariates;
  outer.inner.target = donors.target_covariates;
  if (config.standardize) {
    // z-score each covariate dimension over the donor pool; constant
    // dimensions keep divisor 1 so they do not explode.
    for (int j = 0; j < donors.d; ++j) {
      double mean = 0.0;
      for (int i = 0; i < donors.n_donors; ++i) {
        mean += donors.donor_covariates[static_cast<std::size_t>(i) * donors.d + j];
      }
      mean /= static_cast<double>(donors.n_donors);
      double var = 0.0;
      for (int i = 0; i < donors.n_donors; ++i) {
        const double diff =
            donors.donor_covariates[static_cast<std::size_t>(i) * donors.d + j] - mean;
        var += diff * diff;
      }
      var /= static_cast<double>(donors.n_donors);
      const double sd = std::sqrt(var);
      const double divisor = sd < 1e-12 ? 1.0 : sd;
      for (int i = 0; i < donors.n_donors; ++i) {
        auto& cell = outer.inner.a[static_cast<std::size_t>(i) * donors.d + j];
        cell = (cell - mean) / divisor;
      }
      auto& tgt = outer.inner.target[static_cast<std::size_t>(j)];
      tgt = (tgt - mean) / divisor;
    }
  }
  outer.inner.finish();
}

std::vector<double> v_from_log(const std::vector<double>& u) {
  std::vector<double> v(u.size());
  double total = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    v[j] = std::exp(std::clamp(u[j], -20.0, 20.0));
    total += v[j];
  }
  const double scale = static_cast<double>(u.size()) / total;
  for (double& x : v) x *= scale;
  return v;
}

}  // namespace

void DonorSet::validate() const {
  if (n_donors < 1) throw InsufficientDonorsError("donor set must contain at least one donor");
  if (d < 1) throw DomainError("donor set needs at least one covariate dimension");
  if (t < 1) throw DomainError("donor set needs a pre-period of at least one interval");
  if (donor_covariates.size() != static_cast<std::size_t>(n_donors) * static_cast<std::size_t>(d)) {
    throw ShapeError("donor_covariates must be n_donors x d");
  }
  if (donor_outcomes.size() != static_cast<std::size_t>(n_donors)) {
    throw ShapeError("donor_outcomes must have n_donors entries");
  }
  if (donor_pre.size() != static_cast<std::size_t>(t) * static_cast<std::size_t>(n_donors)) {
    throw ShapeError("donor_pre must be t x n_donors");
  }
  if (target_covariates.size() != static_cast<std::size_t>(d)) {
    throw ShapeError("target_covariates must have d entries");
  }
  if (target_pre.size() != static_cast<std::size_t>(t)) {
    throw ShapeError("target_pre must have t entries");
  }
  check_finite(donor_covariates, "donor covariates");
  check_finite(donor_outcomes, "donor outcomes");
  check_finite(donor_pre, "donor pre-period outcomes");
  check_finite(target_covariates, "target covariates");
  check_finite(target_pre, "target pre-period outcomes");
}

void SynControlConfig::validate() const {
  if (t_pre < 1) throw ConfigError("t_pre must be >= 1");
  if (inner_max_iter < 1) throw ConfigError("inner_max_iter must be >= 1");
  if (!(inner_tol > 0.0)) throw ConfigError("inner_tol must be > 0");
  if (outer_restarts < 0) throw ConfigError("outer_restarts must be >= 0");
}

std::vector<double> project_to_simplex(std::vector<double> values) {
  if (values.empty()) throw DomainError("cannot project an empty vector onto the simplex");
  check_finite(values, "projection input");
  std::vector<double> sorted;
  project_simplex_inplace(values, sorted);
  return values;
}

SolveWeightsResult solve_weights(const DonorSet& donors, const std::vector<double>& v_diag,
                                 const SynControlConfig& config) {
  donors.validate();
  config.validate();
  if (v_diag.size() != static_cast<std::size_t>(donors.d)) {
    throw ShapeError("v_diag must have d entries");
  }
  for (const double v : v_diag) {
    if (!std::isfinite(v) || !(v > 0.0)) throw DomainError("v_diag entries must be positive");
  }
  InnerProblem prob;
  prob.n = donors.n_donors;
  prob.d = donors.d;
  prob.a = donors.donor_covariates;
  prob.target = donors.target_covariates;
  prob.finish();
  PgdScratch scratch;
  return pgd_solve(prob, v_diag.data(), config, nullptr, scratch);
}

SyntheticFit optimize_v(const DonorSet& donors, const SynControlConfig& config,
                        std::uint64_t seed) {
  donors.validate();
  config.validate();

  OuterProblem outer;
  init_outer(outer, donors, config);

  const std::vector<double> identity_v(static_cast<std::size_t>(donors.d), 1.0);

  SyntheticFit fit;
  if (donors.d == 1) {
    // Normalization forces v = (1); nothing to search.
    OuterEvaluation eval = outer.evaluate(identity_v, nullptr);
    fit.v_diag = identity_v;
    fit.weights = std::move(eval.weights);
    fit.inner_objective = eval.inner;
    fit.outer_objective = eval.outer;
    fit.counterfactual = counterfactual(donors, fit);
    return fit;
  }

  // Track the best (outer, v, w) seen across every evaluation of every
  // restart; strict improvement keeps the earliest on ties (determinism).
  double best_outer = std::numeric_limits<double>::infinity();
  double best_inner = 0.0;
  std::vector<double> best_v;
  std::vector<double> best_w;
  auto consider = [&](const std::vector<double>& v, const OuterEvaluation& eval) {
    if (eval.outer < best_outer) {
      best_outer = eval.outer;
      best_inner = eval.inner;
      best_v = v;
      best_w = eval.weights;
    }
  };

  const int dim = donors.d;
  const int total_restarts = 1 + config.outer_restarts;
  constexpr int kMaxNmIterations = 120;
  for (int restart = 0; restart < total_restarts; ++restart) {
    Rng rng(mix_seed(seed, {kRestartSalt, static_cast<std::uint64_t>(restart)}));
    std::vector<double> origin(static_cast<std::size_t>(dim), 0.0);
    if (restart > 0) {
      for (double& u : origin) u = rng.uniform(-1.5, 1.5);
    }

    // Warm-start chain: each evaluation reuses the previous solution of this
    // restart, which is deterministic and much faster than cold starts.
    std::vector<double> warm;
    auto eval_log_point = [&](const std::vector<double>& u) {
      const std::vector<double> v = v_from_log(u);
      OuterEvaluation eval = outer.evaluate(v, warm.empty() ? nullptr : &warm);
      warm = eval.weights;
      consider(v, eval);
      return eval.outer;
    };

    struct Vertex {
      std::vector<double> u;
      double f = 0.0;
    };
    std::vector<Vertex> simplex;
    simplex.reserve(static_cast<std::size_t>(dim) + 1);
    simplex.push_back({origin, eval_log_point(origin)});
    for (int j = 0; j < dim; ++j) {
      std::vector<double> u = origin;
      u[static_cast<std::size_t>(j)] += 0.6;
      simplex.push_back({u, eval_log_point(u)});
    }

    for (int iter = 0; iter < kMaxNmIterations; ++iter) {
      std::stable_sort(simplex.begin(), simplex.end(),
                       [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
      const double spread = simplex.back().f - simplex.front().f;
      if (spread < 1e-12 * (1.0 + std::abs(simplex.front().f))) break;

      std::vector<double> centroid(static_cast<std::size_t>(dim), 0.0);
      for (int p = 0; p < dim; ++p) {
        for (int j = 0; j < dim; ++j) {
          centroid[static_cast<std::size_t>(j)] +=
              simplex[static_cast<std::size_t>(p)].u[static_cast<std::size_t>(j)];
        }
      }
      for (double& c : centroid) c /= static_cast<double>(dim);
      Vertex& worst = simplex.back();

      auto affine = [&](double coef) {
        std::vector<double> u(static_cast<std::size_t>(dim));
        for (int j = 0; j < dim; ++j) {
          u[static_cast<std::size_t>(j)] =
              centroid[static_cast<std::size_t>(j)] +
              coef * (centroid[static_cast<std::size_t>(j)] - worst.u[static_cast<std::size_t>(j)]);
        }
        return u;
      };

      std::vector<double> reflected = affine(1.0);
      const double f_reflected = eval_log_point(reflected);
      if (f_reflected < simplex.front().f) {
        std::vector<double> expanded = affine(2.0);
        const double f_expanded = eval_log_point(expanded);
        if (f_expanded < f_reflected) {
          worst = {std::move(expanded), f_expanded};
        } else {
          worst = {std::move(reflected), f_reflected};
        }
      } else if (f_reflected < simplex[simplex.size() - 2].f) {
        worst = {std::move(reflected), f_reflected};
      } else if (f_reflected < worst.f) {
        std::vector<double> contracted = affine(0.5);  // outside contraction
        const double f_contracted = eval_log_point(contracted);
        if (f_contracted <= f_reflected) {
          worst = {std::move(contracted), f_contracted};
        } else {
          worst = {std::move(reflected), f_reflected};
        }
      } else {
        std::vector<double> contracted = affine(-0.5);  // inside contraction
        const double f_contracted = eval_log_point(contracted);
        if (f_contracted < worst.f) {
          worst = {std::move(contracted), f_contracted};
        } else {
          for (std::size_t p = 1; p < simplex.size(); ++p) {
            for (int j = 0; j < dim; ++j) {
              simplex[p].u[static_cast<std::size_t>(j)] =
                  0.5 * (simplex[p].u[static_cast<std::size_t>(j)] +
                         simplex[0].u[static_cast<std::size_t>(j)]);
            }
            simplex[p].f = eval_log_point(simplex[p].u);
          }
        }
      }
    }
  }

  // Polish both the winner and the identity start, then keep whichever has
  // the smaller pre-period error: optimize_v may only improve on V = I.
  OuterEvaluation chosen = outer.evaluate(best_v, &best_w);
  OuterEvaluation at_identity = outer.evaluate(identity_v, nullptr);
  if (at_identity.outer < chosen.outer) {
    fit.v_diag = identity_v;
    fit.weights = std::move(at_identity.weights);
    fit.inner_objective = at_identity.inner;
    fit.outer_objective = at_identity.outer;
  } else {
    fit.v_diag = std::move(best_v);
    fit.weights = std::move(chosen.weights);
    fit.inner_objective = chosen.inner;
    fit.outer_objective = chosen.outer;
  }
  fit.counterfactual = counterfactual(donors, fit);
  return fit;
}

SyntheticFit fit_with_v(const DonorSet& donors, const std::vector<double>& v_diag,
                        const SynControlConfig& config) {
  donors.validate();
  config.validate();
  if (v_diag.size() != static_cast<std::size_t>(donors.d)) {
    throw ShapeError("v_diag must have d entries");
  }
  for (const double v : v_diag) {
    if (!std::isfinite(v) || !(v > 0.0)) throw DomainError("v_diag entries must be positive");
  }
  OuterProblem outer;
  init_outer(outer, donors, config);
  OuterEvaluation eval = outer.evaluate(v_diag, nullptr);
  SyntheticFit fit;
  fit.v_diag = v_diag;
  fit.weights = std::move(eval.weights);
  fit.inner_objective = eval.inner;
  fit.outer_objective = eval.outer;
  fit.counterfactual = counterfactual(donors, fit);
  return fit;
}

double counterfactual(const DonorSet& donors, const SyntheticFit& fit) {
  if (fit.weights.size() != static_cast<std::size_t>(donors.n_donors)) {
    throw ShapeError("fit weights do not match the donor count");
  }
  double value = 0.0;
  for (int i = 0; i < donors.n_donors; ++i) {
    value += fit.weights[static_cast<std::size_t>(i)] *
             donors.donor_outcomes[static_cast<std::size_t>(i)];
  }
  return value;
}

std::vector<int> donor_days(const ODPanel& panel, const std::vector<IncidentRecord>& incidents) {
  std::vector<bool> blocked(static_cast<std::size_t>(panel.n_days()), false);
  for (const IncidentRecord& inc : incidents) {
    if (inc.day_index < 0 || inc.day_index >= panel.n_days()) {
      throw LookupError("incident " + inc.incident_id + " references day " +
                        std::to_string(inc.day_index) + " outside the panel");
    }
    blocked[static_cast<std::size_t>(inc.day_index)] = true;
  }
  std::vector<int> days;
  for (int day = 0; day < panel.n_days(); ++day) {
    if (!blocked[static_cast<std::size_t>(day)]) days.push_back(day);
  }
  return days;
}

DonorSet build_donor_set(const ODPanel& panel, const std::vector<int>& donor_day_list, int od,
                         int target_day, int interval, int t_pre) {
  if (t_pre < 1) throw ConfigError("t_pre must be >= 1");
  if (interval < std::max(2, t_pre)) {
    throw InsufficientHistoryError("interval " + std::to_string(interval) +
                                   " lacks history: need max(2, t_pre) earlier intervals");
  }
  if (donor_day_list.empty()) {
    throw InsufficientDonorsError("no donor days available");
  }
  DonorSet donors;
  donors.n_donors = static_cast<int>(donor_day_list.size());
  donors.t = t_pre;

  const CovariateVector target_cov = covariates_at(panel, od, target_day, interval);
  donors.d = static_cast<int>(target_cov.values.size());
  donors.target_covariates = target_cov.values;
  donors.donor_covariates.reserve(static_cast<std::size_t>(donors.n_donors) * donors.d);
  donors.donor_outcomes.reserve(static_cast<std::size_t>(donors.n_donors));
  for (const int day : donor_day_list) {
    const CovariateVector cov = covariates_at(panel, od, day, interval);
    donors.donor_covariates.insert(donors.donor_covariates.end(), cov.values.begin(),
                                   cov.values.end());
    donors.donor_outcomes.push_back(panel.flow(od, day, interval));
  }
  donors.donor_pre.reserve(static_cast<std::size_t>(t_pre) * donors.n_donors);
  for (int tau = 0; tau < t_pre; ++tau) {
    const int k = interval - t_pre + tau;
    for (const int day : donor_day_list) {
      donors.donor_pre.push_back(panel.flow(od, day, k));
    }
    donors.target_pre.push_back(panel.flow(od, target_day, k));
  }
  donors.validate();
  return donors;
}

CausalEffectEstimate estimate_effect(const ODPanel& panel,
                                     const std::vector<IncidentRecord>& incidents, int od, int day,
                                     int interval, const SynControlConfig& config) {
  config.validate();
  std::vector<int> days = donor_days(panel, incidents);
  days.erase(std::remove(days.begin(), days.end(), day), days.end());
  if (days.empty()) {
    throw InsufficientDonorsError("no incident-free donor days for day " + std::to_string(day));
  }
  const DonorSet donors = build_donor_set(panel, days, od, day, interval, config.t_pre);
  const std::uint64_t seed =
      mix_seed(kEffectSalt, {static_cast<std::uint64_t>(od), static_cast<std::uint64_t>(day),
                             static_cast<std::uint64_t>(interval)});
  const SyntheticFit fit = optimize_v(donors, config, seed);
  CausalEffectEstimate estimate;
  estimate.od = od;
  estimate.day = day;
  estimate.interval = interval;
  estimate.observed = panel.flow(od, day, interval);
  estimate.counterfactual = fit.counterfactual;
  estimate.effect = estimate.observed - estimate.counterfactual;
  return estimate;
}

}  // namespace odflow
