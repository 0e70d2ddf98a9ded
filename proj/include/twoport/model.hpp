#pragma once

// Probe state, network unitary, phase-space propagation and the joint
// two-port homodyne statistics.
//
// Conventions used throughout the library:
//   * vacuum quadrature variance 1/2, x = (a + a^dag)/sqrt(2);
//   * internal phase-space ordering (x1, x2, p1, p2);
//   * the port-j detector measures x_theta = cos(theta) x_j - sin(theta) p_j.
// With these conventions the pipeline probe_state -> propagate ->
// homodyne_stats reproduces closed_form_stats exactly.

#include <array>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "twoport/errors.hpp"
#include "twoport/linalg.hpp"

namespace twoport {

/// Phase-space slots in the internal ordering.
enum Quadrature : int { kX1 = 0, kX2 = 1, kP1 = 2, kP2 = 3 };

/// The four real parameters of the two-channel network.
struct NetworkParams {
  double phi0 = 0.0;  ///< global phase
  double phi1 = 0.0;  ///< internal phase
  double phi2 = 0.0;  ///< internal phase
  double phi3 = 0.0;  ///< mode-mixing angle, nominally in [0, pi/2]

  double phi_tau() const { return 0.5 * (phi1 + phi2); }
  double phi_rho() const { return 0.5 * (phi1 - phi2); }
  double transmittance() const { return std::cos(phi3) * std::cos(phi3); }
  double reflectance() const { return std::sin(phi3) * std::sin(phi3); }

  bool in_domain() const { return phi3 >= 0.0 && phi3 <= 0.5 * kPi; }

  Vec4 as_vector() const { return {phi0, phi1, phi2, phi3}; }
  static NetworkParams from_vector(const Vec4& v) {
    return {v(0), v(1), v(2), v(3)};
  }

  bool operator==(const NetworkParams&) const = default;
};

/// Displaced two-mode squeezed probe: equal real displacement alpha on both
/// modes and real two-mode squeezing r.
struct ProbeConfig {
  double alpha = 0.0;
  double r = 0.0;

  double n_squeeze() const { return 2.0 * std::sinh(r) * std::sinh(r); }
  double n_coherent() const { return 2.0 * alpha * alpha; }
  double n_total() const { return n_squeeze() + n_coherent(); }

  bool operator==(const ProbeConfig&) const = default;
};

/// Total photon budget N and the fraction beta spent on squeezing.
struct ResourceSplit {
  double n_total = 0.0;
  double beta = 0.5;

  double n_squeeze() const { return beta * n_total; }
  double n_coherent() const { return (1.0 - beta) * n_total; }

  void validate() const {
    if (!(n_total >= 0.0) || !std::isfinite(n_total)) {
      throw InvalidArgument("photon number must be finite and non-negative");
    }
    if (!(beta > 0.0 && beta < 1.0)) {
      throw InvalidArgument("beta must lie strictly inside (0, 1)");
    }
  }

  /// Inverts N_s = 2 sinh^2 r and N_c = 2 alpha^2.
  ProbeConfig probe() const {
    validate();
    return {std::sqrt(n_coherent() / 2.0), std::asinh(std::sqrt(n_squeeze() / 2.0))};
  }
};

struct GaussianState {
  Vec4 displacement = Vec4::Zero();  ///< (x1, x2, p1, p2)
  Mat4 covariance = 0.5 * Mat4::Identity();
};

/// Local-oscillator phases of the two detectors. Raw values are kept.
struct HomodyneSettings {
  double theta1 = 0.0;
  double theta2 = 0.0;

  bool operator==(const HomodyneSettings&) const = default;
};

/// N-independent detuning constants of the tuned operating point.
struct TuningConstants {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;

  bool operator==(const TuningConstants&) const = default;
};

struct OutputStatistics {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = 0.5 * Mat2::Identity();
};

/// Angles of the minimum-variance quadratures of the two output modes.
inline double min_variance_angle1(const NetworkParams& p) { return p.phi0 + 0.5 * p.phi2; }
inline double min_variance_angle2(const NetworkParams& p) {
  return 0.5 * kPi + p.phi0 - 0.5 * p.phi2;
}

/// Network unitary acting on (a1, a2). det U = exp(-2 i phi0).
inline CMat2 build_unitary(const NetworkParams& p) {
  using namespace std::complex_literals;
  const std::complex<double> global = std::exp(-1.0i * p.phi0);
  const double c = std::cos(p.phi3);
  const double s = std::sin(p.phi3);
  const std::complex<double> t = std::exp(1.0i * p.phi_tau());
  const std::complex<double> rho = std::exp(1.0i * p.phi_rho());
  CMat2 u;
  u << global * std::conj(t) * c, global * rho * s,
      -global * std::conj(rho) * s, global * t * c;
  return u;
}

/// Canonical symplectic form in (x1, x2, p1, p2) ordering.
inline Mat4 symplectic_form() {
  Mat4 omega = Mat4::Zero();
  omega.topRightCorner<2, 2>() = Mat2::Identity();
  omega.bottomLeftCorner<2, 2>() = -Mat2::Identity();
  return omega;
}

inline double unitarity_residual(const CMat2& u) {
  return (u.adjoint() * u - CMat2::Identity()).cwiseAbs().maxCoeff();
}

/// Real orthogonal symplectic matrix of a passive two-mode transformation,
/// [[Re U, -Im U], [Im U, Re U]] in (x1, x2, p1, p2) ordering.
inline Mat4 symplectic_of(const CMat2& u) {
  const double residual = unitarity_residual(u);
  if (!(residual <= 1e-8)) {
    throw InvalidArgument("matrix is not unitary (residual " + std::to_string(residual) + ")");
  }
  Mat4 r;
  r.topLeftCorner<2, 2>() = u.real();
  r.topRightCorner<2, 2>() = -u.imag();
  r.bottomLeftCorner<2, 2>() = u.imag();
  r.bottomRightCorner<2, 2>() = u.real();
  return r;
}

/// Input state D1(alpha) D2(alpha) S12(r) |0,0>.
inline GaussianState probe_state(const ProbeConfig& config) {
  if (!(config.r >= 0.0)) {
    throw InvalidArgument("squeezing parameter must be non-negative");
  }
  GaussianState state;
  const double d = std::sqrt(2.0) * config.alpha;
  state.displacement << d, d, 0.0, 0.0;

  const double ch = 0.5 * std::cosh(2.0 * config.r);
  const double sh = 0.5 * std::sinh(2.0 * config.r);
  Mat4& g = state.covariance;
  g = ch * Mat4::Identity();
  g(kX1, kX2) = g(kX2, kX1) = -sh;
  g(kP1, kP2) = g(kP2, kP1) = sh;
  return state;
}

inline GaussianState propagate(const GaussianState& state, const Mat4& r) {
  GaussianState out;
  out.displacement = r * state.displacement;
  out.covariance = r * state.covariance * r.transpose();
  return out;
}

/// Dynamically sized entry point; rejects anything but a 4x4 matrix.
inline GaussianState propagate(const GaussianState& state, const Eigen::MatrixXd& r) {
  if (r.rows() != 4 || r.cols() != 4) {
    throw InvalidArgument("symplectic matrix must be 4x4, got " + std::to_string(r.rows()) +
                          "x" + std::to_string(r.cols()));
  }
  return propagate(state, Mat4(r));
}

/// 2x4 matrix selecting the theta-rotated quadrature of each output mode.
inline Eigen::Matrix<double, 2, 4> measurement_matrix(const HomodyneSettings& settings) {
  Eigen::Matrix<double, 2, 4> m = Eigen::Matrix<double, 2, 4>::Zero();
  m(0, kX1) = std::cos(settings.theta1);
  m(0, kP1) = -std::sin(settings.theta1);
  m(1, kX2) = std::cos(settings.theta2);
  m(1, kP2) = -std::sin(settings.theta2);
  return m;
}

inline OutputStatistics homodyne_stats(const GaussianState& state,
                                       const HomodyneSettings& settings) {
  const auto m = measurement_matrix(settings);
  OutputStatistics out;
  out.mean = m * state.displacement;
  out.covariance = m * state.covariance * m.transpose();
  return out;
}

/// Trigonometric closed form of the output mean and covariance.
///
/// The diagonal is evaluated in a cancellation-free arrangement
/// (cosh 2r - sinh 2r = e^{-2r}, 1 - sin 2phi3 cos x = 2 sin^2(phi3 - pi/4)
/// + 2 sin 2phi3 sin^2(x/2)) so that the O(1/N) variances at the tuned
/// operating point keep full relative precision.
inline OutputStatistics closed_form_stats(const NetworkParams& p, const HomodyneSettings& s,
                                          const ProbeConfig& config) {
  const double t1 = s.theta1;
  const double t2 = s.theta2;
  const double amp = std::sqrt(2.0) * config.alpha;
  const double c3 = std::cos(p.phi3);
  const double s3 = std::sin(p.phi3);

  OutputStatistics out;
  out.mean(0) = amp * (c3 * std::cos(0.5 * (2 * t1 - p.phi1 - 2 * p.phi0 - p.phi2)) +
                       s3 * std::cos(0.5 * (2 * t1 + p.phi1 - 2 * p.phi0 - p.phi2)));
  out.mean(1) = amp * (c3 * std::cos(0.5 * (2 * t2 + p.phi1 - 2 * p.phi0 + p.phi2)) -
                       s3 * std::cos(0.5 * (2 * t2 - p.phi1 - 2 * p.phi0 + p.phi2)));

  const double sh = std::sinh(2.0 * config.r);
  const double em = std::exp(-2.0 * config.r);
  const double sin2 = std::sin(2.0 * p.phi3);
  const double cos2 = std::cos(2.0 * p.phi3);
  const double off_balance = std::sin(p.phi3 - 0.25 * kPi);
  const double x = 2 * t1 - 2 * p.phi0 - p.phi2;
  const double y = 2 * t2 - 2 * p.phi0 + p.phi2;
  const double z = t1 + t2 - 2 * p.phi0;
  const double sx = std::sin(0.5 * x);
  const double cy = std::cos(0.5 * y);

  const double one_minus = 2.0 * off_balance * off_balance + 2.0 * sin2 * sx * sx;
  const double one_plus = 2.0 * off_balance * off_balance + 2.0 * sin2 * cy * cy;
  out.covariance(0, 0) = 0.5 * (em + sh * one_minus);
  out.covariance(1, 1) = 0.5 * (em + sh * one_plus);
  out.covariance(0, 1) = out.covariance(1, 0) = -0.5 * cos2 * sh * std::cos(z);
  return out;
}

/// Full symplectic pipeline: probe -> network -> two-port homodyne.
inline OutputStatistics pipeline_stats(const NetworkParams& p, const HomodyneSettings& s,
                                       const ProbeConfig& config) {
  return homodyne_stats(propagate(probe_state(config), symplectic_of(build_unitary(p))), s);
}

/// LO phases detuned from the minimum-variance quadratures by k_i / N_s.
inline HomodyneSettings tuned_settings(const NetworkParams& p, const TuningConstants& k,
                                       double n_squeeze) {
  if (!(n_squeeze > 0.0)) {
    throw InvalidArgument("tuned settings need a positive squeezing photon number");
  }
  return {min_variance_angle1(p) + k.k1 / n_squeeze, min_variance_angle2(p) + k.k2 / n_squeeze};
}

/// Everything needed to evaluate the model at the tuned working point.
struct OperatingPoint {
  NetworkParams params;
  HomodyneSettings settings;
  ProbeConfig probe;
};

/// Places phi3 at pi/4 + k3/N_s, keeps (phi0, phi1, phi2) from `phases`, and
/// tunes the LO phases.
inline OperatingPoint tuned_operating_point(const NetworkParams& phases, const TuningConstants& k,
                                            const ResourceSplit& split) {
  OperatingPoint op;
  op.probe = split.probe();
  const double ns = split.n_squeeze();
  op.params = phases;
  op.params.phi3 = 0.25 * kPi + k.k3 / ns;
  op.settings = tuned_settings(op.params, k, ns);
  return op;
}

/// Same as above, but leaves phi3 at the value carried by `truth`.
inline OperatingPoint tuned_at_truth(const NetworkParams& truth, const TuningConstants& k,
                                     const ResourceSplit& split) {
  OperatingPoint op;
  op.probe = split.probe();
  op.params = truth;
  op.settings = tuned_settings(truth, k, split.n_squeeze());
  return op;
}

/// log p(x | stats) of the bivariate normal.
inline double log_density(const Vec2& x, const OutputStatistics& stats) {
  const Mat2 inv = guarded_inverse(stats.covariance);
  const Vec2 dx = x - stats.mean;
  return -std::log(kTwoPi) - 0.5 * std::log(det2(stats.covariance)) -
         0.5 * dx.dot(inv * dx);
}

}  // namespace twoport
