#pragma once

#include <string>
#include <vector>

#include "twoport/estimation.hpp"
#include "twoport/experiments/config.hpp"
#include "twoport/fisher.hpp"
#include "twoport/model.hpp"

namespace twoport::experiments {

/// Numeric result of one experiment, ready for CSV / SVG emission.
struct ResultTable {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> provenance;  ///< "key: value" lines, written as comments
  int x_column = 0;
  std::vector<int> series;         ///< columns plotted against x
  std::vector<int> group_columns;  ///< rows sharing these values form one polyline
  std::string y_label;
  int invalid_rows = 0;  ///< Monte Carlo rows that failed the validity check
};

namespace detail {

inline std::string k_label(const TuningConstants& k) {
  std::ostringstream s;
  s << "k1=" << k.k1 << " k2=" << k.k2 << " k3=" << k.k3;
  return s.str();
}

inline void refuse_singular(const std::vector<TuningConstants>& ks) {
  for (const TuningConstants& k : ks) {
    const SingularityReport rep = singularity_check(k);
    if (rep.kind != Singularity::kNone) {
      throw SingularConfiguration("tuning constants (" + k_label(k) + ") are " +
                                  to_string(rep.kind) + "; the Fisher matrix is not invertible");
    }
  }
}

inline ResultTable start_table(const ExperimentConfig& c) {
  ResultTable t;
  t.name = std::string(to_string(c.experiment));
  t.provenance.push_back("experiment: " + t.name);
  t.provenance.push_back("version: " + std::string(kVersion));
  t.provenance.push_back("master_seed: " + std::to_string(c.master_seed));
  t.provenance.push_back("config_hash: " + config_hash(c));
  t.provenance.push_back("config: " + canonical_text(c));
  return t;
}

inline const char* kPhiName[4] = {"phi0", "phi1", "phi2", "phi3"};

}  // namespace detail

/// N^2 Tr[F^{-1}] on the photon grid, one series per k tuple, next to its
/// asymptotic plateau Tr[F_coeff^{-1}].
inline ResultTable run_fim_scan(const ExperimentConfig& c) {
  detail::refuse_singular(c.k);
  ResultTable t = detail::start_table(c);
  t.columns.push_back("N");
  std::vector<double> plateau;
  for (std::size_t j = 0; j < c.k.size(); ++j) {
    t.provenance.push_back("series " + std::to_string(j) + ": " + detail::k_label(c.k[j]));
    t.columns.push_back("n2_trace_k" + std::to_string(j));
    t.columns.push_back("plateau_k" + std::to_string(j));
    t.series.push_back(static_cast<int>(1 + 2 * j));
    t.series.push_back(static_cast<int>(2 + 2 * j));
    const CoefficientMatrices cm = coefficient_total(c.k[j], c.beta, c.truth.phi1);
    plateau.push_back(cm.inverse_diagonal->sum());
  }
  t.y_label = "N^2 Tr[F^-1]";
  for (double n : c.n_grid) {
    std::vector<double> row{n};
    for (std::size_t j = 0; j < c.k.size(); ++j) {
      const OperatingPoint op = tuned_operating_point(c.truth, c.k[j], {n, c.beta});
      const CrbReport rep = crb(fisher_matrix(op), 1);
      row.push_back(n * n * rep.trace_bound);
      row.push_back(plateau[j]);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Per-parameter efficiency 1 / (N^2 [F^{-1}]_ii) with the matching plateaus.
inline ResultTable run_fim_diag(const ExperimentConfig& c) {
  detail::refuse_singular(c.k);
  ResultTable t = detail::start_table(c);
  t.columns.push_back("N");
  std::vector<Vec4> plateau;
  for (std::size_t j = 0; j < c.k.size(); ++j) {
    t.provenance.push_back("series " + std::to_string(j) + ": " + detail::k_label(c.k[j]));
    for (int i = 0; i < 4; ++i) {
      t.series.push_back(static_cast<int>(t.columns.size()));
      t.columns.push_back(std::string("eff_") + detail::kPhiName[i] + "_k" + std::to_string(j));
    }
    for (int i = 0; i < 4; ++i) {
      t.columns.push_back(std::string("plateau_") + detail::kPhiName[i] + "_k" +
                          std::to_string(j));
    }
    plateau.push_back(coefficient_total(c.k[j], c.beta, c.truth.phi1).inverse_diagonal->cwiseInverse());
  }
  t.y_label = "1 / (N^2 [F^-1]_ii)";
  for (double n : c.n_grid) {
    std::vector<double> row{n};
    for (std::size_t j = 0; j < c.k.size(); ++j) {
      const OperatingPoint op = tuned_operating_point(c.truth, c.k[j], {n, c.beta});
      const CrbReport rep = crb(fisher_matrix(op), 1);
      for (int i = 0; i < 4; ++i) row.push_back(1.0 / (n * n * rep.inverse(i, i)));
      for (int i = 0; i < 4; ++i) row.push_back(plateau[j](i));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace detail {

inline void append_mc_columns(ResultTable& t) {
  for (int i = 0; i < 4; ++i) {
    t.series.push_back(static_cast<int>(t.columns.size()));
    t.columns.push_back(std::string("ratio_") + kPhiName[i]);
  }
  for (int i = 0; i < 4; ++i) t.columns.push_back(std::string("bias_") + kPhiName[i]);
  t.columns.push_back("converged");
  t.columns.push_back("excluded");
  t.columns.push_back("valid");
}

inline void append_mc_values(std::vector<double>& row, const MonteCarloSummary& s) {
  for (int i = 0; i < 4; ++i) row.push_back(s.per_parameter[i].normalized_ratio);
  for (int i = 0; i < 4; ++i) row.push_back(s.per_parameter[i].bias_ratio);
  row.push_back(s.converged);
  row.push_back(s.excluded);
  row.push_back(s.valid ? 1.0 : 0.0);
}

inline MonteCarloOptions mc_options(const ExperimentConfig& c) {
  MonteCarloOptions opt;
  opt.threads = c.threads;
  return opt;
}

// Sweep entries share phi3 with the configured truth.
inline std::vector<NetworkParams> truths_of(const ExperimentConfig& c) {
  if (c.truth_sweep.empty()) return {c.truth};
  std::vector<NetworkParams> out;
  for (const auto& p : c.truth_sweep) out.push_back({p[0], p[1], p[2], c.truth.phi3});
  return out;
}

}  // namespace detail

/// Normalized MLE spread sigma_i / sqrt([F^{-1}]_ii / M) over the repetition
/// grid at fixed N, optionally for several true phase tuples. Each row draws
/// its own campaign seed from the master seed.
inline ResultTable run_mle_vs_m(const ExperimentConfig& c) {
  const TuningConstants k = c.k.front();
  detail::refuse_singular({k});
  ResultTable t = detail::start_table(c);
  t.provenance.push_back("tuning: " + detail::k_label(k));
  // Without a sweep the table keeps the plain M-first layout.
  const bool sweep = !c.truth_sweep.empty();
  if (sweep) {
    t.columns = {"truth", "phi0", "phi1", "phi2"};
    t.x_column = 4;
    t.group_columns = {0};
  }
  t.columns.push_back("M");
  detail::append_mc_columns(t);
  t.y_label = "sigma / CRB";
  const ResourceSplit split{c.n_photons, c.beta};
  const std::vector<NetworkParams> truths = detail::truths_of(c);
  std::uint64_t stream = 0;
  for (std::size_t ti = 0; ti < truths.size(); ++ti) {
    const NetworkParams& truth = truths[ti];
    for (int m : c.m_grid) {
      const MonteCarloSummary s = monte_carlo(truth, k, split, m, c.trials,
                                              trial_seed(c.master_seed, stream++),
                                              detail::mc_options(c));
      std::vector<double> row;
      if (sweep) row = {static_cast<double>(ti), truth.phi0, truth.phi1, truth.phi2};
      row.push_back(static_cast<double>(m));
      detail::append_mc_values(row, s);
      if (!s.valid) ++t.invalid_rows;
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

/// Same statistic over the photon grid at fixed M, optionally for several
/// true phase tuples.
inline ResultTable run_mle_vs_n(const ExperimentConfig& c) {
  const TuningConstants k = c.k.front();
  detail::refuse_singular({k});
  ResultTable t = detail::start_table(c);
  t.provenance.push_back("tuning: " + detail::k_label(k));
  t.columns = {"truth", "phi0", "phi1", "phi2", "N"};
  t.x_column = 4;
  t.group_columns = {0};
  detail::append_mc_columns(t);
  t.y_label = "sigma / CRB";

  const std::vector<NetworkParams> truths = detail::truths_of(c);
  std::uint64_t stream = 0;
  for (std::size_t ti = 0; ti < truths.size(); ++ti) {
    const NetworkParams& truth = truths[ti];
    for (double n : c.n_grid) {
      const MonteCarloSummary s =
          monte_carlo(truth, k, {n, c.beta}, c.repetitions, c.trials,
                      trial_seed(c.master_seed, stream++), detail::mc_options(c));
      std::vector<double> row{static_cast<double>(ti), truth.phi0, truth.phi1, truth.phi2, n};
      detail::append_mc_values(row, s);
      if (!s.valid) ++t.invalid_rows;
      t.rows.push_back(std::move(row));
    }
  }
  return t;
}

/// Closed-form determinant factor, smallest eigenvalue of the coefficient
/// matrix and locus classification over the (k1, k2, k3) grid.
inline ResultTable run_singularity_scan(const ExperimentConfig& c) {
  ResultTable t = detail::start_table(c);
  t.columns = {"k1", "k2", "k3", "det_factor", "min_eigenvalue", "class"};
  t.provenance.push_back("class codes: 0 nonsingular, 1 singular-antisymmetric, "
                         "2 singular-quadric, 3 singular-both");
  t.series = {4};
  t.group_columns = {1, 2};
  t.y_label = "min eigenvalue";
  for (double k3 : c.k3_grid) {
    for (double k2 : c.k2_grid) {
      for (double k1 : c.k1_grid) {
        const TuningConstants k{k1, k2, k3};
        const SingularityReport rep = singularity_check(k);
        const CoefficientMatrices cm = assemble_coefficients(k, c.beta, c.truth.phi1);
        t.rows.push_back({k1, k2, k3, rep.det_factor, smallest_eigenvalue(cm.f_total_coeff),
                          static_cast<double>(static_cast<int>(rep.kind))});
      }
    }
  }
  return t;
}

inline ResultTable run_experiment(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::kFimScan: return run_fim_scan(c);
    case Experiment::kFimDiag: return run_fim_diag(c);
    case Experiment::kMleVsM: return run_mle_vs_m(c);
    case Experiment::kMleVsN: return run_mle_vs_n(c);
    case Experiment::kSingularityScan: return run_singularity_scan(c);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace twoport::experiments
