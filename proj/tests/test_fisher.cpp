#include <catch_amalgamated.hpp>

#include <random>

#include "twoport/fisher.hpp"

using namespace twoport;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Point {
  NetworkParams p;
  HomodyneSettings s;
  ProbeConfig c;
};

Point random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> mix(0.1, 0.5 * kPi - 0.1);
  std::uniform_real_distribution<double> amp(0.2, 2.0);
  std::uniform_real_distribution<double> sq(0.1, 1.2);
  return {{ang(rng), ang(rng), ang(rng), mix(rng)}, {ang(rng), ang(rng)}, {amp(rng), sq(rng)}};
}

OutputStatistics shifted(const Point& pt, int i, double h) {
  Vec4 v = pt.p.as_vector();
  v(i) += h;
  return closed_form_stats(NetworkParams::from_vector(v), pt.s, pt.c);
}

// Fourth-order central difference of the statistics along parameter i.
std::pair<Vec2, Mat2> fd_derivative(const Point& pt, int i, double h) {
  const auto a = shifted(pt, i, h), b = shifted(pt, i, -h);
  const auto a2 = shifted(pt, i, 2 * h), b2 = shifted(pt, i, -2 * h);
  const Vec2 dm = (8 * (a.mean - b.mean) - (a2.mean - b2.mean)) / (12 * h);
  const Mat2 dc = (8 * (a.covariance - b.covariance) - (a2.covariance - b2.covariance)) / (12 * h);
  return {dm, dc};
}

// Gaussian Fisher matrix assembled from finite-difference derivatives and a
// general-purpose inverse.
Mat4 fd_fisher(const Point& pt) {
  const OutputStatistics st = closed_form_stats(pt.p, pt.s, pt.c);
  const Mat2 inv = st.covariance.inverse();
  std::array<Vec2, 4> dm;
  std::array<Mat2, 4> dc;
  for (int i = 0; i < 4; ++i) std::tie(dm[i], dc[i]) = fd_derivative(pt, i, 1e-4);
  Mat4 f;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      f(i, j) = dm[i].dot(inv * dm[j]) + 0.5 * (inv * dc[i] * inv * dc[j]).trace();
    }
  }
  return f;
}

TuningConstants random_k(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("analytic derivatives agree with finite differences") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int n = 0; n < 1000; ++n) {
    const Point pt = random_point(rng);
    const StatsDerivatives d = stats_derivatives(pt.p, pt.s, pt.c);
    double scale = 0.0;
    for (int i = 0; i < 4; ++i) {
      scale = std::max({scale, d.dmean[i].lpNorm<Eigen::Infinity>(), max_abs(d.dcov[i])});
    }
    for (int i = 0; i < 4; ++i) {
      const auto [fm, fc] = fd_derivative(pt, i, 1e-3);
      worst = std::max(worst, (d.dmean[i] - fm).lpNorm<Eigen::Infinity>() / scale);
      worst = std::max(worst, max_abs(d.dcov[i] - fc) / scale);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("finite-difference error shrinks at the expected order") {
  std::mt19937_64 rng(12);
  const Point pt = random_point(rng);
  const StatsDerivatives d = stats_derivatives(pt.p, pt.s, pt.c);
  const double e1 = (fd_derivative(pt, 3, 2e-2).second - d.dcov[3]).cwiseAbs().maxCoeff();
  const double e2 = (fd_derivative(pt, 3, 1e-2).second - d.dcov[3]).cwiseAbs().maxCoeff();
  // Fourth-order scheme: halving h divides the error by about 16.
  CHECK(e1 / e2 > 12.0);
  CHECK(e1 / e2 < 20.0);
}

TEST_CASE("phi1 never moves the covariance") {
  std::mt19937_64 rng(13);
  for (int n = 0; n < 1000; ++n) {
    const Point pt = random_point(rng);
    CHECK(stats_derivatives(pt.p, pt.s, pt.c).dcov[1].isZero(0.0));
    CHECK(max_abs(fd_derivative(pt, 1, 1e-3).second) < 1e-9);
  }
}

TEST_CASE("Fisher matrix matches a finite-difference assembly") {
  std::mt19937_64 rng(14);
  for (int n = 0; n < 200; ++n) {
    const Point pt = random_point(rng);
    const FisherSplit f = fisher_matrix(pt.p, pt.s, pt.c);
    const Mat4 oracle = fd_fisher(pt);
    CHECK(max_abs(f.total - oracle) < 1e-6 * std::max(1.0, max_abs(oracle)));
    CHECK(max_abs(f.total - f.total.transpose()) == 0.0);
    CHECK(smallest_eigenvalue(f.total) > -1e-10 * max_abs(f.total));
    CHECK(f.sigma.row(1).isZero(0.0));
    CHECK(f.sigma.col(1).isZero(0.0));
  }
}

TEST_CASE("without displacement the phi1 row is exactly zero") {
  const NetworkParams p{0.3, 0.8, 0.5, 0.25 * kPi};
  const ProbeConfig c{0.0, 1.3};
  const FisherSplit f = fisher_matrix(p, tuned_settings(p, {0.5, 0.5, 0.0}, c.n_squeeze()), c);
  CHECK(f.total.row(1).isZero(0.0));
  CHECK(f.total.col(1).isZero(0.0));
  CHECK(f.mu.isZero(0.0));
  CHECK_THROWS_AS(crb(f, 1), SingularFisher);
}

TEST_CASE("headline coefficient example") {
  const TuningConstants k{0.5, 0.5, 0.0};
  const CoefficientMatrices cm = coefficient_total(k, 0.5, 0.8);
  REQUIRE(cm.inverse_diagonal);
  const Vec4 expected(1.0, 4.0, 4.0, 1.0);
  CHECK(((*cm.inverse_diagonal) - expected).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(max_abs(cm.f_total_coeff - Vec4(1.0, 0.25, 0.25, 1.0).asDiagonal().toDenseMatrix()) < 1e-12);

  // Both parts of the split follow from beta = 1/2.
  CHECK(max_abs(cm.f_sigma_coeff - Vec4(4.0, 0.0, 1.0, 4.0).asDiagonal().toDenseMatrix()) < 1e-12);
  CHECK(max_abs(cm.f_mu_coeff - Vec4(0.0, 1.0, 0.0, 0.0).asDiagonal().toDenseMatrix()) < 1e-12);
  CHECK_THAT(cm.lambda, WithinRel(4.0, 1e-15));
}

TEST_CASE("D2 loses its phi1 dependence when k1 = k2 and k3 = 0") {
  const TuningConstants k{0.7, 0.7, 0.0};
  CHECK_THAT(coefficient_mu(k, 0.1).d2, WithinRel(coefficient_mu(k, 2.9).d2, 1e-15));
  const TuningConstants k2{0.7, 0.2, 0.3};
  CHECK(std::abs(coefficient_mu(k2, 0.1).d2 - coefficient_mu(k2, 2.9).d2) > 1e-3);
}

TEST_CASE("coefficient matrices are the large-N limit of the exact Fisher matrix") {
  std::mt19937_64 rng(15);
  const NetworkParams phases{0.3, 0.8, 0.5, 0.0};
  for (int n = 0; n < 20; ++n) {
    const TuningConstants k = random_k(rng);
    const double beta = 0.3 + 0.4 * std::uniform_real_distribution<double>()(rng);
    const CoefficientMatrices cm = assemble_coefficients(k, beta, phases.phi1);
    auto error_at = [&](double big_n) {
      const ResourceSplit split{big_n, beta};
      const OperatingPoint op = tuned_operating_point(phases, k, split);
      const FisherSplit f = fisher_matrix(op);
      const double ns = split.n_squeeze(), nc = split.n_coherent();
      const double es = max_abs(f.sigma / (ns * ns) - cm.f_sigma_coeff);
      const double em = std::abs(f.mu(1, 1) / (ns * nc) - cm.f_mu_coeff(1, 1));
      return std::max(es / max_abs(cm.f_sigma_coeff), em / cm.f_mu_coeff(1, 1));
    };
    const double e4 = error_at(1e4);
    const double e5 = error_at(1e5);
    CHECK(e5 < 1e-3);
    CHECK(e5 < 0.2 * e4);
  }
}

TEST_CASE("determinant factor matches the numeric block determinant") {
  // Near the loci the block determinant cancels heavily, so the numeric side
  // is evaluated in extended precision.
  using LD = long double;
  std::mt19937_64 rng(16);
  for (int n = 0; n < 500; ++n) {
    const TuningConstants k = random_k(rng);
    const SigmaTerms<LD> t = sigma_terms<LD>(k.k1, k.k2, k.k3);
    Eigen::Matrix<LD, 3, 3> block;
    block << t.d1, t.a, t.b, t.a, t.d3, t.c, t.b, t.c, t.d4;
    const LD numeric = block.determinant();
    const LD closed = det_factor<LD>(k.k1, k.k2, k.k3);
    CHECK(static_cast<double>(std::abs(numeric - closed) / std::abs(closed)) < 1e-9);
    CHECK_THAT(singularity_check(k).det_factor, WithinRel(static_cast<double>(closed), 1e-12));
  }
}

TEST_CASE("singularity classification") {
  CHECK(singularity_check({1.0, -1.0, 0.3}).kind == Singularity::kAntisymmetric);
  CHECK(singularity_check({1.0, 4.0, 2.0}).kind == Singularity::kQuadric);
  CHECK(singularity_check({0.0, 1.5, 0.0}).kind == Singularity::kQuadric);
  CHECK(singularity_check({0.0, 0.0, 0.0}).kind == Singularity::kBoth);
  CHECK(singularity_check({0.5, 0.5, 0.0}).kind == Singularity::kNone);
  CHECK(std::string(to_string(Singularity::kAntisymmetric)) == "singular-antisymmetric");

  CHECK_THROWS_AS(coefficient_total({1.0, -1.0, 0.3}, 0.5, 0.8), SingularCoefficients);
  try {
    coefficient_total({2.0, 0.5, 1.0}, 0.5, 0.8);
    FAIL("expected SingularCoefficients");
  } catch (const SingularCoefficients& e) {
    CHECK(e.report().kind == Singularity::kQuadric);
  }
  CHECK_THROWS_AS(coefficient_total({0.5, 0.5, 0.0}, 1.0, 0.8), SingularCoefficients);
  CHECK_THROWS_AS(coefficient_total({0.5, 0.5, 0.0}, 0.0, 0.8), SingularCoefficients);
}

TEST_CASE("smallest eigenvalue vanishes on the loci") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int n = 0; n < 200; ++n) {
    const double a = u(rng), b = u(rng);
    const TuningConstants anti{a, -a, b};
    CHECK(std::abs(smallest_eigenvalue(assemble_coefficients(anti, 0.5, 0.8).f_total_coeff)) < 1e-10);
    const double k1 = std::abs(a), k2 = std::abs(b) * (a < 0 ? 1 : 1);
    const TuningConstants quad{k1, k2, std::sqrt(k1 * k2)};
    CHECK(std::abs(smallest_eigenvalue(assemble_coefficients(quad, 0.5, 0.8).f_total_coeff)) < 1e-10);
  }
}

TEST_CASE("Cramer-Rao bounds of a diagonal Fisher matrix") {
  const Mat4 f = Vec4(1.0, 2.0, 4.0, 8.0).asDiagonal();
  const CrbReport rep = crb(f, 10);
  CHECK(rep.marginal_bounds.isApprox(Vec4(0.1, 0.05, 0.025, 0.0125), 1e-15));
  CHECK_THAT(rep.trace_bound, WithinRel(0.1875, 1e-15));
  CHECK_THAT(rep.condition_number, WithinRel(8.0, 1e-12));
  CHECK_THROWS_AS(crb(f, 0), InvalidArgument);
}

TEST_CASE("singular Fisher matrix is refused with its null direction") {
  Mat4 f = Vec4(1.0, 2.0, 0.0, 3.0).asDiagonal();
  try {
    crb(f, 5);
    FAIL("expected SingularFisher");
  } catch (const SingularFisher& e) {
    CHECK_THAT(std::abs(e.null_direction()(2)), WithinAbs(1.0, 1e-12));
  }
  f(2, 2) = 1e-13;
  CHECK_THROWS_AS(crb(f, 1), SingularFisher);
  f(2, 2) = 1e-11;
  CHECK_NOTHROW(crb(f, 1));
}

TEST_CASE("noise and signal terms scale as N_s^2 and N_s N_c") {
  const NetworkParams phases{0.3, 0.8, 0.5, 0.0};
  const TuningConstants k{0.5, 0.5, 0.0};
  std::vector<double> lx, ls, lm;
  for (double n : {1e2, 1e3, 1e4}) {
    const FisherSplit f = fisher_matrix(tuned_operating_point(phases, k, {n, 0.5}));
    lx.push_back(std::log(n));
    ls.push_back(std::log(f.sigma(0, 0)));
    lm.push_back(std::log(f.mu(1, 1)));
  }
  auto slope = [&](const std::vector<double>& y) {
    const double mx = (lx[0] + lx[1] + lx[2]) / 3, my = (y[0] + y[1] + y[2]) / 3;
    double sxy = 0, sxx = 0;
    for (int i = 0; i < 3; ++i) {
      sxy += (lx[i] - mx) * (y[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
  };
  CHECK_THAT(slope(ls), WithinAbs(2.0, 0.05));
  CHECK_THAT(slope(lm), WithinAbs(2.0, 0.05));
}

TEST_CASE("Heisenberg-normalized bound approaches the plateau") {
  const NetworkParams phases{0.3, 0.8, 0.5, 0.0};
  const TuningConstants k{0.5, 0.5, 0.0};
  auto residual = [&](double n) {
    const CrbReport rep = crb(fisher_matrix(tuned_operating_point(phases, k, {n, 0.5})), 1);
    return n * n * rep.trace_bound - 10.0;
  };
  CHECK(std::abs(residual(1e4)) < 0.2);
  const double ratio = residual(2000.0) / residual(4000.0);
  CHECK_THAT(ratio, WithinAbs(2.0, 0.1));
}
