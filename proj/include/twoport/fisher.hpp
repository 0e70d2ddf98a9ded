#pragma once

// Classical Fisher information of the two-port homodyne statistics, its
// leading-order coefficient matrices at the tuned working point, and
// Cramer-Rao bounds.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "twoport/errors.hpp"
#include "twoport/linalg.hpp"
#include "twoport/model.hpp"

namespace twoport {

/// Partial derivatives of (mu, Sigma) with respect to phi0..phi3.
struct StatsDerivatives {
  std::array<Vec2, 4> dmean;
  std::array<Mat2, 4> dcov;
};

struct FisherSplit {
  Mat4 total = Mat4::Zero();
  Mat4 sigma = Mat4::Zero();  ///< noise term, from d Sigma
  Mat4 mu = Mat4::Zero();     ///< signal term, from d mu
};

/// Analytic derivatives of closed_form_stats. The phi1 slot of dcov is zero
/// by construction: the covariance does not depend on phi1.
inline StatsDerivatives stats_derivatives(const NetworkParams& p, const HomodyneSettings& s,
                                          const ProbeConfig& config) {
  StatsDerivatives d;
  const double amp = std::sqrt(2.0) * config.alpha;
  const double c3 = std::cos(p.phi3);
  const double s3 = std::sin(p.phi3);

  // Phases of the four interference terms of the mean and their gradients
  // with respect to (phi0, phi1, phi2).
  const double a = s.theta1 - p.phi0 - 0.5 * (p.phi1 + p.phi2);
  const double b = s.theta1 - p.phi0 + 0.5 * (p.phi1 - p.phi2);
  const double c = s.theta2 - p.phi0 + 0.5 * (p.phi1 + p.phi2);
  const double e = s.theta2 - p.phi0 - 0.5 * (p.phi1 - p.phi2);
  constexpr std::array<double, 3> da{-1.0, -0.5, -0.5};
  constexpr std::array<double, 3> db{-1.0, 0.5, -0.5};
  constexpr std::array<double, 3> dc{-1.0, 0.5, 0.5};
  constexpr std::array<double, 3> de{-1.0, -0.5, 0.5};

  for (int i = 0; i < 3; ++i) {
    d.dmean[i](0) = amp * (-c3 * std::sin(a) * da[i] - s3 * std::sin(b) * db[i]);
    d.dmean[i](1) = amp * (-c3 * std::sin(c) * dc[i] + s3 * std::sin(e) * de[i]);
  }
  d.dmean[3](0) = amp * (-s3 * std::cos(a) + c3 * std::cos(b));
  d.dmean[3](1) = amp * (-s3 * std::cos(c) - c3 * std::cos(e));

  const double sh = std::sinh(2.0 * config.r);
  const double sin2 = std::sin(2.0 * p.phi3);
  const double cos2 = std::cos(2.0 * p.phi3);
  const double x = 2 * s.theta1 - 2 * p.phi0 - p.phi2;
  const double y = 2 * s.theta2 - 2 * p.phi0 + p.phi2;
  const double z = s.theta1 + s.theta2 - 2 * p.phi0;

  auto sym = [](double a11, double a12, double a22) {
    Mat2 m;
    m << a11, a12, a12, a22;
    return m;
  };
  d.dcov[0] = sym(-sin2 * sh * std::sin(x), -cos2 * sh * std::sin(z), sin2 * sh * std::sin(y));
  d.dcov[1] = Mat2::Zero();
  d.dcov[2] = sym(-0.5 * sin2 * sh * std::sin(x), 0.0, -0.5 * sin2 * sh * std::sin(y));
  d.dcov[3] = sym(-cos2 * sh * std::cos(x), sin2 * sh * std::cos(z), cos2 * sh * std::cos(y));
  return d;
}

/// Fisher matrix of a bivariate normal from its derivatives.
inline FisherSplit fisher_from(const OutputStatistics& stats, const StatsDerivatives& d) {
  const Mat2 inv = guarded_inverse(stats.covariance);
  std::array<Mat2, 4> w;
  std::array<Vec2, 4> v;
  for (int i = 0; i < 4; ++i) {
    w[i] = inv * d.dcov[i];
    v[i] = inv * d.dmean[i];
  }
  FisherSplit f;
  for (int i = 0; i < 4; ++i) {
    for (int j = i; j < 4; ++j) {
      f.sigma(i, j) = f.sigma(j, i) = 0.5 * (w[i] * w[j]).trace();
      f.mu(i, j) = f.mu(j, i) = d.dmean[i].dot(v[j]);
    }
  }
  f.total = f.sigma + f.mu;
  return f;
}

inline FisherSplit fisher_matrix(const NetworkParams& p, const HomodyneSettings& s,
                                 const ProbeConfig& config) {
  return fisher_from(closed_form_stats(p, s, config), stats_derivatives(p, s, config));
}

inline FisherSplit fisher_matrix(const OperatingPoint& op) {
  return fisher_matrix(op.params, op.settings, op.probe);
}

// ---------------------------------------------------------------------------
// Leading-order coefficient matrices.

enum class Singularity { kNone, kAntisymmetric, kQuadric, kBoth };

inline const char* to_string(Singularity s) {
  switch (s) {
    case Singularity::kNone: return "nonsingular";
    case Singularity::kAntisymmetric: return "singular-antisymmetric";
    case Singularity::kQuadric: return "singular-quadric";
    case Singularity::kBoth: return "singular-both";
  }
  return "unknown";
}

struct SingularityReport {
  double det_factor = 0.0;  ///< det of the (phi0, phi2, phi3) block of Lambda^2 F^Sigma
  Singularity kind = Singularity::kNone;
};

/// Raised when the leading-order coefficient matrix cannot be inverted.
class SingularCoefficients : public Error {
 public:
  SingularCoefficients(const std::string& what, SingularityReport report)
      : Error(what), report_(report) {}
  const SingularityReport& report() const { return report_; }

 private:
  SingularityReport report_;
};

struct CoefficientMatrices {
  double lambda = 0.0;
  double d1 = 0.0, d2 = 0.0, d3 = 0.0, d4 = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
  Mat4 f_sigma_coeff = Mat4::Zero();
  Mat4 f_mu_coeff = Mat4::Zero();
  Mat4 f_total_coeff = Mat4::Zero();
  std::optional<Vec4> inverse_diagonal;  ///< diag of f_total_coeff^{-1} when nonsingular
};

/// Lambda, D1, D3, D4, A, B, C in any floating-point type.
template <typename T>
struct SigmaTerms {
  T lambda, d1, d3, d4, a, b, c;
};

template <typename T>
T lambda_of(T k1, T k2, T k3) {
  const T k3s = k3 * k3;
  return (1 + 4 * k1 * k1) * (1 + 4 * k2 * k2) + 8 * (1 - 4 * k1 * k2) * k3s + 16 * k3s * k3s;
}

inline double lambda_of(const TuningConstants& k) { return lambda_of(k.k1, k.k2, k.k3); }

template <typename T>
SigmaTerms<T> sigma_terms(T k1, T k2, T k3) {
  const T k1s = k1 * k1, k2s = k2 * k2, k3s = k3 * k3;
  const T k3_4 = k3s * k3s, k3_6 = k3_4 * k3s;
  SigmaTerms<T> t;
  t.lambda = lambda_of(k1, k2, k3);
  t.d1 = 32 * (k2s + k1s * (1 + 16 * k2s * (1 + k1s + k2s)) + 2 * k3s -
               32 * k1 * k2 * (1 + k1s - k1 * k2 + k2s) * k3s +
               16 * (1 + k1s - 4 * k1 * k2 + k2s) * k3_4 + 32 * k3_6);
  t.d3 = 8 * (k2s + k1s * (1 + 16 * k2s * (1 + k1s + k2s)) -
              8 * (-1 + 4 * k1 * k2) * (k1s + k2s) * k3s + 16 * (k1s + k2s) * k3_4);
  t.d4 = 16 * ((1 + 4 * k1s) * (k1 + k2) * (k1 + k2) * (1 + 4 * k2s) -
               4 * (-1 + 2 * (k1s + 6 * k1 * k2 + 4 * k1s * k1 * k2 + k2s + 4 * k1 * k2s * k2)) * k3s +
               16 * (2 + k1s - 6 * k1 * k2 + k2s) * k3_4 + 64 * k3_6);
  const T minus = -1 + 4 * k1 * k2 - 4 * k3s;
  const T plus = 1 + 4 * k1 * k2 - 4 * k3s;
  t.a = -16 * (k1s - k2s) * minus * plus;
  t.b = 64 * (k1 + k2) * k3 * minus * plus;
  t.c = -16 * (k1 - k2) * k3 * (-1 - 2 * k2 + k1 * (-2 + 4 * k2) - 4 * k3s) *
        (-1 + 2 * k2 + k1 * (2 + 4 * k2) - 4 * k3s);
  return t;
}

/// Closed form of det of the (phi0, phi2, phi3) block of Lambda^2 F^Sigma.
template <typename T>
T det_factor(T k1, T k2, T k3) {
  const T sum = k1 + k2;
  const T quad = k1 * k2 - k3 * k3;
  const T lam = lambda_of(k1, k2, k3);
  return 16384 * sum * sum * quad * quad * lam * lam * lam;
}

/// Lambda, D1, D3, D4, A, B, C and F^Sigma = Lambda^{-2} [[D1,0,A,B],[0,0,0,0],
/// [A,0,D3,C],[B,0,C,D4]]. Leaves the mu-related fields at zero.
inline CoefficientMatrices coefficient_sigma(const TuningConstants& k) {
  const SigmaTerms<double> t = sigma_terms(k.k1, k.k2, k.k3);
  CoefficientMatrices cm;
  cm.lambda = t.lambda;
  cm.d1 = t.d1;
  cm.d3 = t.d3;
  cm.d4 = t.d4;
  cm.a = t.a;
  cm.b = t.b;
  cm.c = t.c;

  Mat4& m = cm.f_sigma_coeff;
  m.setZero();
  m(0, 0) = cm.d1;
  m(2, 2) = cm.d3;
  m(3, 3) = cm.d4;
  m(0, 2) = m(2, 0) = cm.a;
  m(0, 3) = m(3, 0) = cm.b;
  m(2, 3) = m(3, 2) = cm.c;
  m /= cm.lambda * cm.lambda;
  return cm;
}

struct MuCoefficient {
  double d2 = 0.0;
  Mat4 matrix = Mat4::Zero();  ///< (2/Lambda) diag(0, D2, 0, 0)
};

inline MuCoefficient coefficient_mu(const TuningConstants& k, double phi1) {
  const double k1 = k.k1, k2 = k.k2, k3 = k.k3;
  MuCoefficient out;
  out.d2 = 1 + 2 * k1 * k1 + 2 * k2 * k2 + 4 * k3 * k3 +
           2 * (k1 + k2) * ((k1 - k2) * std::cos(phi1) + 2 * k3 * std::sin(phi1));
  out.matrix(1, 1) = 2.0 * out.d2 / lambda_of(k);
  return out;
}

/// Closed-form determinant 16384 (k1+k2)^2 (k1 k2 - k3^2)^2 Lambda^3 and the
/// locus the tuning constants sit on, if any.
inline SingularityReport singularity_check(const TuningConstants& k) {
  const double k1 = k.k1, k2 = k.k2, k3 = k.k3;
  const double sum = k1 + k2;
  const double quad = k1 * k2 - k3 * k3;
  SingularityReport rep;
  rep.det_factor = det_factor(k1, k2, k3);

  const double scale = std::max({1.0, std::abs(k1), std::abs(k2), std::abs(k3)});
  constexpr double tol = 1e-12;
  const bool anti = std::abs(sum) <= tol * scale;
  const bool quadric = std::abs(quad) <= tol * scale * scale;
  if (anti && quadric) {
    rep.kind = Singularity::kBoth;
  } else if (anti) {
    rep.kind = Singularity::kAntisymmetric;
  } else if (quadric) {
    rep.kind = Singularity::kQuadric;
  }
  return rep;
}

/// Assembles all coefficient matrices without checking invertibility.
inline CoefficientMatrices assemble_coefficients(const TuningConstants& k, double beta,
                                                 double phi1) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw InvalidArgument("beta must lie in [0, 1]");
  }
  CoefficientMatrices cm = coefficient_sigma(k);
  const MuCoefficient mu = coefficient_mu(k, phi1);
  cm.d2 = mu.d2;
  cm.f_mu_coeff = mu.matrix;
  cm.f_total_coeff = beta * beta * cm.f_sigma_coeff + beta * (1.0 - beta) * cm.f_mu_coeff;
  return cm;
}

/// F = beta^2 F^Sigma + beta (1 - beta) F^mu.
/// Throws SingularCoefficients when the result cannot be inverted, either
/// because k sits on a singular locus or because beta(1-beta) = 0.
inline CoefficientMatrices coefficient_total(const TuningConstants& k, double beta, double phi1) {
  CoefficientMatrices cm = assemble_coefficients(k, beta, phi1);

  const SingularityReport rep = singularity_check(k);
  if (rep.kind != Singularity::kNone) {
    throw SingularCoefficients(std::string("coefficient matrix is ") + to_string(rep.kind), rep);
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw SingularCoefficients("coefficient matrix loses the phi1 row at beta(1-beta) = 0", rep);
  }
  cm.inverse_diagonal = cm.f_total_coeff.inverse().diagonal();
  return cm;
}

inline double smallest_eigenvalue(const Mat4& symmetric) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// Cramer-Rao bounds.

inline constexpr double kMaxFisherCondition = 1e12;

struct CrbReport {
  Vec4 marginal_bounds = Vec4::Zero();  ///< [F^{-1}]_ii / M
  double trace_bound = 0.0;             ///< Tr[F^{-1}] / M
  double condition_number = 0.0;
  int repetitions = 1;
  Mat4 inverse = Mat4::Zero();  ///< F^{-1} (single shot)
};

inline double condition_number(const Mat4& f) {
  Eigen::JacobiSVD<Mat4> svd(f);
  const Vec4 sv = svd.singularValues();
  return sv(3) > 0.0 ? sv(0) / sv(3) : std::numeric_limits<double>::infinity();
}

/// Marginal and scalar Cramer-Rao bounds for M repetitions.
///
/// F^{-1} is obtained from a fully pivoted LU solve. Matrices with condition
/// number above 1e12 are refused with the unidentifiable direction.
inline CrbReport crb(const Mat4& fisher, int repetitions) {
  if (repetitions < 1) {
    throw InvalidArgument("repetitions must be at least 1");
  }
  const Mat4 f = 0.5 * (fisher + fisher.transpose());
  Eigen::JacobiSVD<Mat4> svd(f, Eigen::ComputeFullV);
  const Vec4 sv = svd.singularValues();
  const double cond = sv(3) > 0.0 ? sv(0) / sv(3) : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxFisherCondition)) {
    const Vec4 dir = svd.matrixV().col(3);
    std::ostringstream msg;
    msg << "Fisher matrix is singular (condition " << cond
        << "); unidentifiable combination (phi0, phi1, phi2, phi3) = (" << dir(0) << ", "
        << dir(1) << ", " << dir(2) << ", " << dir(3) << ")";
    throw SingularFisher(msg.str(), dir, cond);
  }
  CrbReport rep;
  rep.repetitions = repetitions;
  rep.condition_number = cond;
  rep.inverse = f.fullPivLu().solve(Mat4::Identity());
  rep.marginal_bounds = rep.inverse.diagonal() / repetitions;
  rep.trace_bound = rep.inverse.trace() / repetitions;
  return rep;
}

inline CrbReport crb(const FisherSplit& fisher, int repetitions) {
  return crb(fisher.total, repetitions);
}

}  // namespace twoport
