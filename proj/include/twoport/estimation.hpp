#pragma once

// Synthetic homodyne data, the Gaussian log-likelihood and its score, the
// maximum-likelihood fit, and seeded Monte Carlo campaigns comparing the
// estimator spread with the Cramer-Rao bound.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "twoport/errors.hpp"
#include "twoport/fisher.hpp"
#include "twoport/linalg.hpp"
#include "twoport/model.hpp"
#include "twoport/nelder_mead.hpp"
#include "twoport/parallel.hpp"

namespace twoport {

struct GenerationConfig {
  NetworkParams params;
  HomodyneSettings settings;
  ProbeConfig probe;
};

struct SampleSet {
  std::vector<Vec2> outcomes;
  std::uint64_t seed = 0;
  std::optional<GenerationConfig> generation_config;

  int size() const { return static_cast<int>(outcomes.size()); }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for trial `index` of a campaign.
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x5851F42D4C957F2DULL));
}

/// m i.i.d. draws x = mu + L z with L the lower Cholesky factor of Sigma.
inline SampleSet sample_outcomes(const OutputStatistics& stats, int m, std::uint64_t seed) {
  if (m < 1) {
    throw InvalidArgument("sample size must be at least 1");
  }
  guarded_inverse(stats.covariance);
  const Mat2 chol = stats.covariance.llt().matrixL();

  std::mt19937_64 gen(splitmix64(seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  SampleSet set;
  set.seed = seed;
  set.outcomes.reserve(m);
  for (int i = 0; i < m; ++i) {
    const double z0 = normal(gen);
    const double z1 = normal(gen);
    set.outcomes.emplace_back(stats.mean + chol * Vec2(z0, z1));
  }
  return set;
}

inline SampleSet sample_outcomes(const GenerationConfig& config, int m, std::uint64_t seed) {
  SampleSet set =
      sample_outcomes(closed_form_stats(config.params, config.settings, config.probe), m, seed);
  set.generation_config = config;
  return set;
}

/// Sample mean and (biased, 1/M) scatter: all the likelihood depends on.
struct SufficientStatistics {
  int count = 0;
  Vec2 mean = Vec2::Zero();
  Mat2 scatter = Mat2::Zero();

  static SufficientStatistics of(const SampleSet& data) {
    SufficientStatistics s;
    s.count = data.size();
    if (s.count == 0) return s;
    for (const Vec2& x : data.outcomes) s.mean += x;
    s.mean /= s.count;
    for (const Vec2& x : data.outcomes) {
      const Vec2 d = x - s.mean;
      s.scatter += d * d.transpose();
    }
    s.scatter /= s.count;
    return s;
  }
};

/// Sum over samples of log p(x_m | candidate).
inline double log_likelihood(const NetworkParams& candidate, const SampleSet& data,
                             const HomodyneSettings& settings, const ProbeConfig& probe) {
  const OutputStatistics st = closed_form_stats(candidate, settings, probe);
  const Mat2 inv = guarded_inverse(st.covariance);
  const double norm = -std::log(kTwoPi) - 0.5 * std::log(det2(st.covariance));
  double total = 0.0;
  for (const Vec2& x : data.outcomes) {
    const Vec2 d = x - st.mean;
    total += norm - 0.5 * d.dot(inv * d);
  }
  return total;
}

/// Same value from sufficient statistics, O(1) in the sample size.
inline double log_likelihood(const NetworkParams& candidate, const SufficientStatistics& data,
                             const HomodyneSettings& settings, const ProbeConfig& probe) {
  const OutputStatistics st = closed_form_stats(candidate, settings, probe);
  const Mat2 inv = guarded_inverse(st.covariance);
  const Vec2 offset = data.mean - st.mean;
  const Mat2 second_moment = data.scatter + offset * offset.transpose();
  const double m = data.count;
  return -m * std::log(kTwoPi) - 0.5 * m * std::log(det2(st.covariance)) -
         0.5 * m * (inv * second_moment).trace();
}

/// Gradient of the log-likelihood,
///   M [ (d_i mu)^T S^{-1} (xbar - mu) + 1/2 Tr(S^{-1} d_i S S^{-1} (C - S)) ],
/// with C the second moment of the data about mu.
inline Vec4 score(const NetworkParams& candidate, const SufficientStatistics& data,
                  const HomodyneSettings& settings, const ProbeConfig& probe) {
  const OutputStatistics st = closed_form_stats(candidate, settings, probe);
  const StatsDerivatives d = stats_derivatives(candidate, settings, probe);
  const Mat2 inv = guarded_inverse(st.covariance);
  const Vec2 offset = data.mean - st.mean;
  const Mat2 excess = data.scatter + offset * offset.transpose() - st.covariance;
  const Vec2 w = inv * offset;
  const Mat2 v = inv * excess * inv;
  Vec4 g;
  for (int i = 0; i < 4; ++i) {
    g(i) = d.dmean[i].dot(w) + 0.5 * (d.dcov[i] * v).trace();
  }
  return data.count * g;
}

struct MleOptions {
  NelderMeadOptions simplex{};
  double score_tol_per_sample = 1e-6;  ///< converged when |score|_max < tol * M
  int max_polish_steps = 100;
  std::array<bool, 4> free{true, true, true, true};  ///< parameters being fitted
};

struct EstimationResult {
  NetworkParams estimate;
  double log_likelihood_at_optimum = -std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
  NetworkParams initial_point;
  double score_max_norm = std::numeric_limits<double>::infinity();
};

/// Local maximum-likelihood estimate near `init`.
///
/// A Nelder-Mead search on -l/M is followed by Fisher-scoring steps on the
/// analytic score with step halving. Candidates with a degenerate covariance
/// are rejected. Parameters whose `free` flag is false stay at `init`.
inline EstimationResult mle_fit(const SampleSet& data, const HomodyneSettings& settings,
                                const ProbeConfig& probe, const NetworkParams& init,
                                const MleOptions& opt = {}) {
  if (data.size() < 1) {
    throw InvalidArgument("cannot fit an empty sample set");
  }
  const SufficientStatistics suff = SufficientStatistics::of(data);
  const double m = suff.count;

  std::vector<int> slots;
  for (int i = 0; i < 4; ++i) {
    if (opt.free[i]) slots.push_back(i);
  }
  if (slots.empty()) {
    throw InvalidArgument("at least one parameter must be free");
  }
  const int dim = static_cast<int>(slots.size());
  const Vec4 base = init.as_vector();

  auto expand = [&](const Eigen::VectorXd& y) {
    Vec4 full = base;
    for (int j = 0; j < dim; ++j) full(slots[j]) = y(j);
    return NetworkParams::from_vector(full);
  };
  auto loglik = [&](const NetworkParams& p) {
    try {
      return log_likelihood(p, suff, settings, probe);
    } catch (const DegenerateCovariance&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd start(dim);
  for (int j = 0; j < dim; ++j) start(j) = base(slots[j]);
  const NelderMeadResult nm = nelder_mead(
      [&](const Eigen::VectorXd& y) { return -loglik(expand(y)) / m; }, start, opt.simplex);

  EstimationResult res;
  res.initial_point = init;
  res.iterations = nm.iterations;
  Eigen::VectorXd y = nm.x;
  double ll = loglik(expand(y));

  auto reduced_score = [&](const Eigen::VectorXd& at) {
    const Vec4 g = score(expand(at), suff, settings, probe);
    Eigen::VectorXd out(dim);
    for (int j = 0; j < dim; ++j) out(j) = g(slots[j]);
    return out;
  };

  if (std::isfinite(ll)) {
    Eigen::VectorXd g = reduced_score(y);
    for (int step = 0; step < opt.max_polish_steps; ++step) {
      if (g.lpNorm<Eigen::Infinity>() < opt.score_tol_per_sample * m) break;
      const Mat4 info = fisher_matrix(expand(y), settings, probe).total;
      Eigen::MatrixXd sub(dim, dim);
      for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) sub(a, b) = m * info(slots[a], slots[b]);
      }
      Eigen::VectorXd delta = sub.fullPivLu().solve(g);
      if (!delta.allFinite()) break;
      bool improved = false;
      for (int half = 0; half < 30; ++half) {
        const Eigen::VectorXd trial = y + delta;
        const double trial_ll = loglik(expand(trial));
        if (trial_ll >= ll) {
          y = trial;
          ll = trial_ll;
          improved = true;
          break;
        }
        delta *= 0.5;
      }
      if (!improved) break;
      g = reduced_score(y);
      ++res.iterations;
    }
    res.score_max_norm = g.lpNorm<Eigen::Infinity>();
  }

  res.estimate = expand(y);
  res.log_likelihood_at_optimum = ll;
  res.converged = std::isfinite(ll) && res.score_max_norm < opt.score_tol_per_sample * m &&
                  nm.iterations < opt.simplex.max_iterations;
  return res;
}

// ---------------------------------------------------------------------------
// Monte Carlo campaigns.

/// Fixed start offset of the local search, `magnitude` in every coordinate.
///
/// At the tuned point the likelihood has exactly flat directions on the
/// surface cos(theta1 + theta2 - 2 phi0) = 0, which sits (k1 + k2) / (2 N_s)
/// above the true phi0 when k1 + k2 > 0 (below otherwise). The phi0 component
/// points away from it; the remaining components alternate in sign.
inline Vec4 start_offset(double magnitude, const TuningConstants& k) {
  const double away = (k.k1 + k.k2) >= 0.0 ? -1.0 : 1.0;
  return magnitude * Vec4(away, -away, away, -away);
}

struct MonteCarloOptions {
  double init_perturbation = 0.05;  ///< magnitude of the start offset, see start_offset
  int threads = 1;
  double max_excluded_fraction = 0.05;
  std::optional<std::uint64_t> forced_trial_seed;  ///< same seed for every trial
  MleOptions mle{};
};

struct ParameterSummary {
  double std_dev = 0.0;
  double crb_std = 0.0;
  double normalized_ratio = 0.0;  ///< std_dev / crb_std
  double mean_estimate = 0.0;
  double bias_ratio = 0.0;        ///< mean_estimate / truth
};

struct MonteCarloSummary {
  int trials = 0;
  int converged = 0;
  int excluded = 0;
  bool valid = false;
  std::array<ParameterSummary, 4> per_parameter{};
  NetworkParams truth;
  TuningConstants k;
  ResourceSplit split;
  int repetitions = 0;
  std::uint64_t master_seed = 0;
};

/// Angle representative nearest `truth`: mod 2pi for the phases, mod pi/2 for
/// the mixing angle.
inline Vec4 unwrap_near(const Vec4& estimate, const Vec4& truth) {
  Vec4 out;
  for (int i = 0; i < 3; ++i) out(i) = wrap_near(estimate(i), truth(i), kTwoPi);
  out(3) = wrap_near(estimate(3), truth(3), 0.5 * kPi);
  return out;
}

/// One seeded trial: sample M outcomes at the tuned settings and fit.
inline EstimationResult run_trial(const OperatingPoint& op, const TuningConstants& k, int m,
                                  std::uint64_t seed, const MonteCarloOptions& opt) {
  const SampleSet data = sample_outcomes(GenerationConfig{op.params, op.settings, op.probe}, m, seed);
  const Vec4 init = op.params.as_vector() + start_offset(opt.init_perturbation, k);
  return mle_fit(data, op.settings, op.probe, NetworkParams::from_vector(init), opt.mle);
}

inline MonteCarloSummary monte_carlo(const NetworkParams& truth, const TuningConstants& k,
                                     const ResourceSplit& split, int m, int trials,
                                     std::uint64_t master_seed,
                                     const MonteCarloOptions& opt = {}) {
  if (trials < 2) {
    throw InvalidArgument("a Monte Carlo campaign needs at least 2 trials");
  }
  if (m < 1) {
    throw InvalidArgument("repetitions must be at least 1");
  }
  const OperatingPoint op = tuned_at_truth(truth, k, split);
  const CrbReport bound = crb(fisher_matrix(op), m);

  std::vector<EstimationResult> results(trials);
  parallel_for(trials, opt.threads, [&](int t) {
    const std::uint64_t seed =
        opt.forced_trial_seed ? *opt.forced_trial_seed : trial_seed(master_seed, t);
    results[t] = run_trial(op, k, m, seed, opt);
  });

  MonteCarloSummary sum;
  sum.trials = trials;
  sum.truth = truth;
  sum.k = k;
  sum.split = split;
  sum.repetitions = m;
  sum.master_seed = master_seed;

  // Reduction in trial-index order.
  const Vec4 t = truth.as_vector();
  Vec4 mean = Vec4::Zero();
  std::vector<Vec4> kept;
  kept.reserve(trials);
  for (const EstimationResult& r : results) {
    if (!r.converged) continue;
    kept.push_back(unwrap_near(r.estimate.as_vector(), t));
    mean += kept.back();
  }
  sum.converged = static_cast<int>(kept.size());
  sum.excluded = trials - sum.converged;
  sum.valid = sum.converged >= 2 && sum.excluded <= opt.max_excluded_fraction * trials;
  if (sum.converged == 0) return sum;
  mean /= sum.converged;

  Vec4 var = Vec4::Zero();
  for (const Vec4& e : kept) var += (e - mean).cwiseAbs2();
  if (sum.converged >= 2) {
    var /= (sum.converged - 1);
  } else {
    var.setConstant(std::numeric_limits<double>::quiet_NaN());
  }
  for (int i = 0; i < 4; ++i) {
    ParameterSummary& p = sum.per_parameter[i];
    p.std_dev = std::sqrt(var(i));
    p.crb_std = std::sqrt(bound.marginal_bounds(i));
    p.normalized_ratio = p.std_dev / p.crb_std;
    p.mean_estimate = mean(i);
    p.bias_ratio = mean(i) / t(i);
  }
  return sum;
}

}  // namespace twoport
