#include "doctest.h"

#include <cmath>
#include <random>

#include "nlwave/cgo.hpp"
#include "nlwave/coeffs.hpp"
#include "nlwave/fit.hpp"

using namespace nlw;

namespace {

const cplx I(0.0, 1.0);

Vec<double> bump_gamma(const Grid& g) {
  const Bump b{Point(0.5, 0.5, 0.5), 0.35, 0.3};
  return sample<double>(g, [&](const Point& x) { return 1.0 + b(x, g.n()); });
}

// Random orthonormal (xi, eta) and a orthogonal to both.
struct Triple {
  Point a, xi, eta;
};

Triple random_triple(std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = nd(rng);
  const Eigen::HouseholderQR<Eigen::Matrix3d> qr(m);
  const Eigen::Matrix3d q = qr.householderQ();
  return {3.0 * nd(rng) * q.col(0), q.col(1), q.col(2)};
}

ZetaPair sweep_pair(double s) { return make_zeta_pair(Point(2, 0, 0), Point(0, 1, 0), Point(0, 0, 1), s); }

}  // namespace

TEST_CASE("zeta pair closed form") {
  const ZetaPair p = make_zeta_pair(Point(2, 0, 0), Point(0, 1, 0), Point(0, 0, 1), 1.0);
  CHECK(p.r == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(p.zeta1[0] - I) < 1e-15);
  CHECK(std::abs(p.zeta1[1] - I) < 1e-15);
  CHECK(std::abs(p.zeta1[2] - std::sqrt(2.0)) < 1e-15);
  CHECK(std::abs(dot(p.zeta1, p.zeta1)) < 1e-12);
  CHECK(std::abs(dot(p.zeta2, p.zeta2)) < 1e-12);
  const CPoint sum = p.zeta1 + p.zeta2;
  CHECK(sum == CPoint(2.0 * I, 0.0, 0.0));
}

TEST_CASE("zeta pair invariants on random triples") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Triple t = random_triple(rng);
    const double s = std::exp(std::uniform_real_distribution<double>(-1.0, 4.0)(rng));
    const ZetaPair p = make_zeta_pair(t.a, t.xi, t.eta, s);
    const double scale = std::max(1.0, p.zeta1.squaredNorm());
    CHECK(std::abs(dot(p.zeta1, p.zeta1)) <= 1e-12 * scale);
    CHECK(std::abs(dot(p.zeta2, p.zeta2)) <= 1e-12 * scale);
    CHECK((p.zeta1 + p.zeta2 - I * t.a.cast<cplx>()).norm() <= 1e-14 * std::max(1.0, s + t.a.norm()));
    CHECK(std::abs(dot(p.rho, p.rho)) < 1e-12);
    CHECK(p.rho.squaredNorm() == doctest::Approx(2.0));
  }
}

TEST_CASE("zeta over s tends to rho") {
  const Point a(2, 0, 0), xi(0, 1, 0), eta(0, 0, 1);
  std::vector<double> ss, total, real_part;
  for (double s : {4.0, 8.0, 16.0, 32.0, 64.0}) {
    const ZetaPair p = make_zeta_pair(a, xi, eta, s);
    ss.push_back(s);
    total.push_back((p.zeta1 / s - p.rho).norm());
    real_part.push_back((p.zeta1.real() / s - p.rho.real()).norm());
    CHECK((p.zeta2 / s + p.rho).norm() == doctest::Approx(total.back()));
  }
  // The r expansion gives 1/s^2 for the real part; the i a/(2s) shift is 1/s.
  CHECK(loglog_slope(ss, real_part) == doctest::Approx(-2.0).epsilon(0.02));
  CHECK(loglog_slope(ss, total) == doctest::Approx(-1.0).epsilon(0.02));
}

TEST_CASE("zeta pair rejects bad geometry") {
  auto kind = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Internal;
  };
  CHECK(kind([] { make_zeta_pair(Point(1, 1, 0), Point(0, 1, 0), Point(0, 0, 1), 1.0); }) == ErrorKind::Config);
  CHECK(kind([] { make_zeta_pair(Point(0, 0, 0), Point(0, 1, 0), Point(0, 0.5, 1), 1.0); }) == ErrorKind::Config);
  CHECK(kind([] { make_zeta_pair(Point(1, 0, 0), Point(0, 1, 0), Point(0, 0, 1), 0.0); }) == ErrorKind::Config);
  CHECK(kind([] { make_zeta_pair(Point(1, 0, 0), Point(0, 1, 0), Point(0, 0, 1), 1.0, 2); }) == ErrorKind::Config);
  const ZetaPair p2 = make_zeta_pair(Point::Zero(), Point(0, 1, 0), Point(1, 0, 0), 3.0, 2);
  CHECK(std::abs(dot(p2.zeta1, p2.zeta1)) < 1e-12);
  CHECK(kind([] { make_rho(CPoint(1.0, 1.0, 0.0)); }) == ErrorKind::Config);
  CHECK(kind([] { make_rho(CPoint(1.0, I, 1.0), 2); }) == ErrorKind::Config);
  CHECK(make_rho(CPoint(1.0, I, 0.0), 2).rho[1] == I);
}

TEST_CASE("discrete phase is grid harmonic and consistent") {
  const CPoint z = sweep_pair(8.0).zeta1;
  std::vector<double> hs, gaps;
  for (int dims : {17, 33, 65}) {
    const double h = 1.0 / (dims - 1);
    const CPoint p = discrete_phase(z, h, 3);
    CHECK(std::abs(discrete_symbol(p, h, 3)) <= 1e-10 * z.squaredNorm());
    CHECK((p.imag() - z.imag()).norm() < 1e-12);
    hs.push_back(h);
    gaps.push_back((p - z).norm());
  }
  CHECK(loglog_slope(hs, gaps) == doctest::Approx(2.0).epsilon(0.05));
  // Oblique real part: delta becomes complex but the symbol still vanishes.
  const CPoint oblique = make_zeta_pair(Point::Zero(), Point(0, 0, 1), Point(1, 1, 0).normalized(), 6.0).zeta1;
  CHECK(std::abs(discrete_symbol(discrete_phase(oblique, 1.0 / 16, 3), 1.0 / 16, 3)) < 1e-9);
}

TEST_CASE("box preconditioner inverts the constant-coefficient operator") {
  for (int n : {2, 3}) {
    const Grid g(n, 9);
    const Vec<double> gamma = Vec<double>::Constant(g.size(), 1.5);
    CPoint z = n == 2 ? CPoint(3.0, 3.0 * I, 0.0) : sweep_pair(3.0).zeta1;
    const CgoBox box(g, gamma, 0.0, discrete_phase(z, g.h(), n));
    CHECK(box.min_symbol() > 0.0);
    Vec<cplx> b = Vec<cplx>::Random(box.matrix().rows());
    CHECK((box.matrix() * box.precondition(b) - b).norm() <= 1e-12 * b.norm());
  }
}

TEST_CASE("flipping zeta transposes the conjugated operator") {
  const Grid g(3, 9);
  const Vec<double> gamma = bump_gamma(g);
  const CPoint p = discrete_phase(sweep_pair(4.0).zeta1, g.h(), 3);
  const CgoBox box(g, gamma, 2.0, p);
  const CgoBox flipped(g, gamma, 2.0, -p, -1, Point(-box.bloch()));
  const Eigen::SparseMatrix<cplx> diff = flipped.matrix() - Eigen::SparseMatrix<cplx>(box.matrix().transpose());
  CHECK(diff.norm() <= 1e-12 * box.matrix().norm());
  // The plain (unflipped) matrix is not symmetric once zeta is complex.
  const Eigen::SparseMatrix<cplx> asym = box.matrix() - Eigen::SparseMatrix<cplx>(box.matrix().transpose());
  CHECK(asym.norm() > 1e-3 * box.matrix().norm());
}

TEST_CASE("remainder sign: the u-level solve fixes -2 zeta.grad R") {
  const Grid g(3, 17);
  const Vec<double> gamma = bump_gamma(g);
  const CgoSolution sol = solve_remainder(g, gamma, 2.0, sweep_pair(2.0).zeta1);
  const double minus = schrodinger_defect(g, gamma, sol, -1.0);
  const double plus = schrodinger_defect(g, gamma, sol, +1.0);
  MESSAGE("defect minus " << minus << " plus " << plus);
  CHECK(minus < 0.05);
  CHECK(plus > 10.0 * minus);
}

TEST_CASE("constant gamma: constant q and tight residual") {
  const Grid g(3, 17);
  const Vec<double> gamma = Vec<double>::Constant(g.size(), 2.0);
  CgoSolution sol = solve_remainder(g, gamma, 2.0, sweep_pair(8.0).zeta1);
  CHECK(sol.residual <= 1e-8);
  CHECK(sol.m.maxCoeff() == doctest::Approx(1.0 / std::sqrt(2.0)));
  tau_derivative_remainder(g, gamma, sol);
  CHECK(sol.r_tau.size() == g.size());
  // u' = e^{phase.x} m R' must satisfy (tau^2 + K) u' = -2 tau u.
  CgoSolution plain = sol;
  plain.r.setZero();
  CgoSolution deriv = sol;
  deriv.r = sol.r_tau;
  const Vec<cplx> u = sol.field(g);
  const Vec<cplx> ud = deriv.field(g) - plain.field(g);  // e^{phase.x} m R'
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, gamma);
  const Vec<cplx> lhs = sol.tau * sol.tau * ud + k.cast<cplx>() * ud + 2.0 * sol.tau * u;
  double num = 0.0, den = 0.0;
  for (Index i : g.interior_nodes()) {
    const cplx e = std::exp(-dot(sol.phase, g.point(i).cast<cplx>()));
    num = std::max(num, std::abs(e * lhs[i]));
    den = std::max(den, std::abs(e * 2.0 * sol.tau * u[i]));
  }
  CHECK(num / den <= 1e-8);
}

TEST_CASE("remainders decay like 1/|zeta|") {
  const Grid g(3, 17);
  for (int variant = 0; variant < 2; ++variant) {
    const Vec<double> gamma = variant == 0 ? Vec<double>::Ones(g.size()) : bump_gamma(g);
    std::vector<double> mags, rs, rts;
    for (double s : {4.0, 8.0, 16.0, 32.0}) {
      const ZetaPair p = sweep_pair(s);
      CgoSolution sol = solve_remainder(g, gamma, 2.0, p.zeta1);
      tau_derivative_remainder(g, gamma, sol);
      CHECK(sol.residual <= 1e-6);
      mags.push_back(p.zeta1.norm());
      rs.push_back(sol.r_l2);
      rts.push_back(sol.r_tau_l2);
    }
    const double slope = loglog_slope(mags, rs);
    const double slope_tau = loglog_slope(mags, rts);
    MESSAGE("variant " << variant << " slope R " << slope << " slope R' " << slope_tau);
    CHECK(slope <= -0.8);
    CHECK(slope_tau <= -0.8);
  }
}

TEST_CASE("tau derivative matches centered differences") {
  const Grid g(3, 17);
  const Vec<double> gamma = bump_gamma(g);
  const CPoint z = sweep_pair(8.0).zeta1;
  const double tau = 2.0;
  CgoSolution base = solve_remainder(g, gamma, tau, z);
  tau_derivative_remainder(g, gamma, base);
  auto remainder_at = [&](double t) {
    const CgoBox box(g, gamma, t, base.phase, base.pad, base.bloch);
    const Vec<cplx> m = box.box_m().cast<cplx>();
    const Vec<cplx> mr = box.solve(-box.apply_periodic(m), 1e-12, 60, 2000);
    return box.to_omega((mr.array() / m.array()).matrix());
  };
  std::vector<double> deltas, errs;
  for (double d : {0.2, 0.1, 0.05}) {
    const Vec<cplx> fd = (remainder_at(tau + d) - remainder_at(tau - d)) / (2.0 * d);
    deltas.push_back(d);
    errs.push_back(l2_norm<cplx>(g, fd - base.r_tau) / base.r_tau_l2);
  }
  CHECK(errs.back() < 1e-3);
  CHECK(loglog_slope(deltas, errs) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("gradient determinant closed form for free exponentials") {
  for (int n : {2, 3}) {
    const Grid g(n, 33);
    const double r = 2.0;
    const auto rhos = default_rhos(n);
    std::vector<Vec<cplx>> fields;
    Mat<cplx> pm(n, n);
    for (int j = 0; j < n; ++j) {
      fields.push_back(sample<cplx>(g, [&](const Point& x) {
        cplx ph = 0.0;
        for (int d = 0; d < n; ++d) ph += r * rhos[j][d] * x[d];
        return std::exp(ph);
      }));
      for (int d = 0; d < n; ++d) pm(j, d) = rhos[j][d];
    }
    const Vec<cplx> det = gradient_determinant(g, fields);
    double worst = 0.0;
    for (Index i = 0; i < g.size(); ++i) {
      cplx ph = 0.0;
      for (int j = 0; j < n; ++j)
        for (int d = 0; d < n; ++d) ph += r * rhos[j][d] * g.point(i)[d];
      const cplx exact = std::pow(r, n) * std::exp(ph) * pm.determinant();
      worst = std::max(worst, std::abs(det[i] - exact) / std::abs(exact));
    }
    CHECK(std::abs(pm.determinant()) > 1.0);
    CHECK(worst < 2e-2);
  }
}

TEST_CASE("independent family on smooth gamma") {
  const Grid g(3, 17);
  const Vec<double> gamma = bump_gamma(g);
  std::vector<double> rs, mins;
  for (double r : {4.0, 8.0, 16.0}) {
    const FamilyReport rep = independent_family(g, gamma, 1.0, r);
    CHECK(rep.fraction_above == 1.0);
    CHECK(rep.min_normalized > 0.25);
    rs.push_back(r);
    mins.push_back(rep.min_scaled);
  }
  const double slope = loglog_slope(rs, mins);
  MESSAGE("min |det| scaling slope " << slope);
  CHECK(slope == doctest::Approx(3.0).epsilon(0.15));
  CHECK(find_r_min(g, gamma, 1.0, {0.25, 1.0, 4.0}) > 0.0);
  CHECK_THROWS_AS(independent_family(g, gamma, 1.0, 4.0, {}, 10.0), Error);
}

TEST_CASE("independent family in two dimensions") {
  const Grid g(2, 33);
  const Vec<double> gamma = bump_gamma(g);
  const FamilyReport rep = independent_family(g, gamma, 1.0, 6.0);
  CHECK(rep.v.size() == 2);
  CHECK(rep.fraction_above == 1.0);
  for (Index i = 0; i < g.size(); ++i) CHECK(std::abs(rep.det[i]) > 0.0);
  CHECK_THROWS_AS(independent_family(g, gamma, 1.0, 6.0, {CPoint(1.0, I, 0.0), CPoint(2.0 * I, -2.0, 0.0) / 2.0}),
                  Error);
}
