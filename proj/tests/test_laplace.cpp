#include "doctest.h"

#include <cmath>
#include <numbers>

#include "nlwave/fit.hpp"
#include "nlwave/laplace.hpp"

using namespace nlw;
using std::numbers::pi;

namespace {

template <class F>
Vec<double> boundary_profile(const Grid& g, F&& f) {
  Vec<double> out(static_cast<Index>(g.boundary_nodes().size()));
  for (size_t k = 0; k < g.boundary_nodes().size(); ++k) out[static_cast<Index>(k)] = f(g.point(g.boundary_nodes()[k]));
  return out;
}

double profile_f(const Point& x) { return std::pow(std::sin(pi * x[0]), 2) + 0.5 * std::pow(std::sin(pi * x[1]), 2); }
double profile_g(const Point& x) { return 1.0 + x[0] - 0.5 * x[1] * x[1]; }
double profile_w(const Point& x) { return std::cos(pi * x[1]) + x[0]; }

Recipe standard_recipe() {
  Recipe r;
  r.name = "laplace_standard";
  r.gamma_bump = Bump{Point(0.5, 0.5, 0.5), 0.35, 0.3};
  r.c.push_back({0, 0, 1, Bump{Point(0.5, 0.5, 0.5), 0.25, 0.5}});
  r.c.push_back({1, 1, 1, Bump{Point(0.45, 0.55, 0.5), 0.25, -0.3}});
  return r;
}

// Probe runs, u2^(-1) sources and their transforms on a small 2D grid.
struct Pipeline {
  Grid g = make_grid(2, 13);
  CoefficientSet cs;
  double dt = 0.0;
  int steps = 0;
  TimeSeries<double> uf, ug;
  IntegratedField field;
  Vec<cplx> w_data;

  explicit Pipeline(const Recipe& recipe, double horizon = 8.5) {
    cs = synth_coeffs(g, recipe);
    dt = 0.5 * max_stable_dt(g, cs.gamma);
    steps = static_cast<int>(std::ceil(horizon / dt));
    const ChiProfile chi = make_chi(3, 1.0, dt, steps);
    uf = solve_linear_u1<double>(g, cs.gamma, probe_trace<double>(boundary_profile(g, profile_f), chi.values, dt), dt,
                                 steps);
    ug = solve_linear_u1<double>(g, cs.gamma, probe_trace<double>(boundary_profile(g, profile_g), chi.values, dt), dt,
                                 steps);
    const SpectralOperator op(g, cs.gamma);
    const FluxOperator flux(g, cs);
    field = integrate_u2m1(op, flux, uf, ug, steps);
    w_data = boundary_profile(g, profile_w).cast<cplx>();
  }

  TauFields at(cplx tau) const {
    return transform_fields(uf, ug, field, solve_tau_elliptic(g, cs.gamma, tau, w_data), tau);
  }
};

const Pipeline& standard_pipeline() {
  static const Pipeline p(standard_recipe());
  return p;
}

}  // namespace

TEST_CASE("chi profile construction") {
  const ChiProfile one = make_chi(1, 1.0, 1e-2, 120);
  for (int m = 0; m <= 50; ++m) CHECK(one.values[m] == 1.0);
  for (int m = 90; m <= 120; ++m) CHECK(one.values[m] == 0.0);
  const ChiProfile three = make_chi(3, 1.0, 1e-2, 120);
  CHECK(three.values[0] == 0.0);
  CHECK(three.values[40] == doctest::Approx(0.08));
  CHECK_THROWS_AS(make_chi(3, 0.05, 1e-2, 20), Error);
  CHECK_THROWS_AS(make_chi(0, 1.0, 1e-2, 20), Error);
}

TEST_CASE("transform of e^{-t} matches 1/(tau+1)") {
  const double dt = 1e-3;
  const int steps = 12000;
  Mat<double> row(1, steps + 1);
  for (int m = 0; m <= steps; ++m) row(0, m) = std::exp(-m * dt);
  for (double tr : {2.0, 4.0, 8.0, 16.0, 32.0})
    for (double ti : {0.0, 0.2 * tr}) {
      const cplx tau(tr, ti);
      CAPTURE(tau);
      CHECK(std::abs(laplace_transform(row, dt, tau)[0] - 1.0 / (tau + 1.0)) <= 1e-6);
    }
}

TEST_CASE("transform basics") {
  const double dt = 1e-2;
  const int steps = 800;
  Mat<double> z = Mat<double>::Zero(3, steps + 1);
  CHECK(laplace_transform(z, dt, cplx(4.0, 0.0)).cwiseAbs().maxCoeff() == 0.0);
  Mat<double> one = Mat<double>::Ones(1, steps + 1);
  CHECK(std::abs(laplace_transform(one, dt, cplx(4.0, 0.5))[0] - 1.0 / cplx(4.0, 0.5)) <= 1e-12);
  Mat<double> a(2, steps + 1), b(2, steps + 1);
  for (int m = 0; m <= steps; ++m) {
    const double t = m * dt;
    a.col(m) << std::sin(3 * t), t * t;
    b.col(m) << std::cos(t), 1.0 / (1.0 + t);
  }
  const cplx tau(6.0, 1.0);
  const Vec<cplx> lin = laplace_transform(Mat<double>(2.0 * a - 3.0 * b), dt, tau);
  CHECK((lin - (2.0 * laplace_transform(a, dt, tau) - 3.0 * laplace_transform(b, dt, tau))).cwiseAbs().maxCoeff() <=
        1e-12);
  CHECK(std::abs(laplace_transform(a, dt, tau)[0] - 3.0 / (tau * tau + 9.0)) <= 1e-4);
  CHECK_THROWS_AS(laplace_transform(one, dt, cplx(1.0, 0.0)), Error);
}

TEST_CASE("sector membership") {
  CHECK(in_sector(cplx(4.0, 0.5)));
  CHECK_FALSE(in_sector(cplx(4.0, 1.5)));
  CHECK_FALSE(in_sector(cplx(0.5, 0.0)));
  const Grid g = make_grid(2, 5);
  CHECK_THROWS_AS(solve_tau_elliptic(g, Vec<double>::Ones(g.size()), cplx(0.5, 0.0),
                                     Vec<cplx>::Zero(static_cast<Index>(g.boundary_nodes().size()))),
                  Error);
}

TEST_CASE("chi transform approaches tau^-mu") {
  const double dt = 1e-4;
  const int steps = 10000;
  const ChiProfile chi = make_chi(3, 1.0, dt, steps);
  std::vector<double> taus{4, 8, 16, 32, 64}, dev;
  for (double t : taus) dev.push_back(std::abs(std::pow(t, 3) * chi_hat(chi, t) - 1.0));
  CAPTURE(dev[0]);
  CAPTURE(dev[4]);
  CHECK(loglog_slope(taus, dev) <= -0.9);
}

TEST_CASE("tau elliptic solves") {
  SUBCASE("zero data") {
    const Grid g = make_grid(2, 9);
    const Vec<cplx> v = solve_tau_elliptic(g, Vec<double>::Ones(g.size()), cplx(4.0, 0.0),
                                           Vec<cplx>::Zero(static_cast<Index>(g.boundary_nodes().size())));
    CHECK(v.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("exponential solution converges at second order") {
    const cplx tau(4.0, 0.5);
    std::vector<double> hs, errs;
    for (int dims : {17, 33, 65}) {
      const Grid g = make_grid(2, dims);
      auto exact = [&](const Point& x) { return std::exp(tau * x[0]); };
      Vec<cplx> bd(static_cast<Index>(g.boundary_nodes().size()));
      for (size_t k = 0; k < g.boundary_nodes().size(); ++k) bd[static_cast<Index>(k)] = exact(g.point(g.boundary_nodes()[k]));
      const TauSolver solver(g, Vec<double>::Ones(g.size()), tau);
      const Vec<cplx> v = solver.solve(bd);
      double e = 0.0;
      for (Index i = 0; i < g.size(); ++i) e = std::max(e, std::abs(v[i] - exact(g.point(i))));
      hs.push_back(g.h());
      errs.push_back(e / std::abs(std::exp(tau)));
    }
    CHECK(errs.back() < 1e-3);
    CHECK(loglog_slope(hs, errs) == doctest::Approx(2.0).epsilon(0.1));
  }
}

TEST_CASE("transform of the wave solution solves the tau equation") {
  const Grid g = make_grid(2, 17);
  const CoefficientSet cs = synth_coeffs(g, preset("smooth_gamma_bump"));
  const double dt = 0.5 * max_stable_dt(g, cs.gamma);
  const int steps = static_cast<int>(std::ceil(6.5 / dt));
  const ChiProfile chi = make_chi(3, 1.0, dt, steps);
  const Vec<double> ft = boundary_profile(g, profile_f);
  const TimeSeries<double> u = solve_linear_u1<double>(g, cs.gamma, probe_trace<double>(ft, chi.values, dt), dt, steps);
  for (double t : {4.0, 8.0}) {
    CAPTURE(t);
    const Vec<cplx> lhs = laplace_transform(u, t);
    const Vec<cplx> rhs = solve_tau_elliptic(g, cs.gamma, t, Vec<cplx>(chi_hat(chi, t) * ft.cast<cplx>()));
    CHECK(l2_norm<cplx>(g, Vec<cplx>(lhs - rhs)) <= 1e-2 * l2_norm<cplx>(g, rhs));
  }
}

TEST_CASE("integral identity: null cases, oracle and linearity") {
  const Pipeline& p = standard_pipeline();
  const TauFields f = p.at(8.0);
  const CoefficientSet zero = coefficient_difference(p.cs, p.cs);
  CHECK(integral_identity_eval(p.g, zero, f.uf, f.ug, f.w, {}) == cplx(0.0));

  const cplx v = integral_identity_eval(p.g, p.cs, f);
  CHECK(std::abs(v) > 0.0);
  const cplx o = identity_volume_oracle(p.g, p.cs, f.uf, f.ug, f.w, f.exact);
  CHECK(std::abs(v - o) <= 1e-10 * std::abs(v));

  CoefficientSet twice = p.cs;
  for (auto& c : twice.c)
    if (c.size()) c *= 2.0;
  std::array<Vec<cplx>, 4> twice_terms = f.exact;
  for (auto& t : twice_terms) t *= 2.0;
  CHECK(std::abs(integral_identity_eval(p.g, twice, f.uf, f.ug, f.w, twice_terms) - 2.0 * v) <= 1e-12 * std::abs(v));
}

TEST_CASE("identity vanishes for a swap-antisymmetric coefficient difference") {
  Recipe a = standard_recipe(), b = a;
  for (auto& cb : b.c) std::swap(cb.k, cb.l);
  const Grid g = make_grid(2, 13);
  const CoefficientSet ca = synth_coeffs(g, a), cb = synth_coeffs(g, b);
  const CoefficientSet diff = coefficient_difference(ca, cb);
  CoefficientSet pipeline_set = diff;
  pipeline_set.gamma = ca.gamma;
  Recipe none = a;
  none.c.clear();
  const Pipeline base(none);
  const SpectralOperator op(base.g, ca.gamma);
  const IntegratedField field = integrate_u2m1(op, FluxOperator(base.g, pipeline_set), base.uf, base.ug, base.steps);
  const TauFields f = transform_fields(base.uf, base.ug, field,
                                       solve_tau_elliptic(base.g, ca.gamma, 8.0, base.w_data), 8.0);
  const double scale = std::abs(integral_identity_eval(base.g, ca, base.at(8.0).uf, base.at(8.0).ug,
                                                       base.at(8.0).w, {}));
  CHECK(scale > 0.0);
  CHECK(std::abs(integral_identity_eval(base.g, diff, f)) <= 1e-6 * scale);
}

TEST_CASE("tau-domain equation for the transformed u2^(-1)") {
  const Pipeline& p = standard_pipeline();
  for (double t : {4.0, 8.0, 16.0}) {
    CAPTURE(t);
    CHECK(tau_domain_residual(p.g, p.cs.gamma, p.at(t)) <= 2e-2);
  }
}

TEST_CASE("post-lemma combination: product blocks against transformed dominant parts") {
  const Pipeline& p = standard_pipeline();
  for (double t : {4.0, 8.0, 16.0, 32.0}) {
    CAPTURE(t);
    const PostLemmaValue r = post_lemma_identity_eval(p.g, p.cs, p.at(t));
    CAPTURE(r.defect);
    CHECK(r.product_gap <= 5e-2);
    CHECK(r.stated_gap >= 0.5);
  }
}

TEST_CASE("I2 dominant part: single-mode closed form") {
  const Grid g = make_grid(2, 9);
  const SpectralOperator op(g, Vec<double>::Ones(g.size()));
  const double lambda = op.eigenvalues()[0];
  const Vec<double> mode = op.synthesize_full<double>(Mat<double>(Vec<double>::Unit(op.modes(), 0)));
  const double dt = 5e-3;
  const int steps = 1300;
  const Vec<double> zero = Vec<double>::Zero(g.size());
  const IntegratedField field = integrate_u2m1(op, dt, steps, [&](int sigma, int r) {
    return SourceTriple{zero, Vec<double>(std::exp(-(sigma + r) * dt) * mode), zero};
  });
  const std::vector<double> taus{4, 8, 16, 32};
  const DominanceReport rep = dominant_part_diag(g, field, taus);
  CHECK_FALSE(rep.degenerate);
  for (size_t k = 0; k < taus.size(); ++k) {
    const double expect = lambda / ((taus[k] + 1) * (taus[k] + 1) + lambda);
    CAPTURE(taus[k]);
    CHECK(rep.ratios[k] == doctest::Approx(expect).epsilon(1e-2));
  }
  CHECK(rep.slope < 0.0);
}

TEST_CASE("I2 dominant part with a delayed onset tends to a nonzero limit") {
  // u1^g vanishes on the support of c until the wave arrives; with onset r0
  // the ratio tends to |sin(r0 w)/w - r0| / r0 instead of zero.
  const Grid g = make_grid(2, 9);
  const SpectralOperator op(g, Vec<double>::Ones(g.size()));
  const double om = std::sqrt(op.eigenvalues()[0]);
  const Vec<double> mode = op.synthesize_full<double>(Mat<double>(Vec<double>::Unit(op.modes(), 0)));
  const double dt = 5e-3, r0 = 0.3;
  const int steps = 1300, onset = static_cast<int>(std::lround(r0 / dt));
  const Vec<double> zero = Vec<double>::Zero(g.size());
  const IntegratedField field = integrate_u2m1(op, dt, steps, [&](int sigma, int r) {
    const double q = r >= onset ? std::exp(-(sigma + r) * dt) : 0.0;
    return SourceTriple{zero, Vec<double>(q * mode), zero};
  });
  const DominanceReport rep = dominant_part_diag(g, field, {4, 8, 16, 32, 64});
  const double limit = std::abs(std::sin(r0 * om) / om - r0) / r0;
  CAPTURE(limit);
  CHECK(limit > 0.2);
  CHECK(rep.ratios.back() == doctest::Approx(limit).epsilon(0.05));
}

TEST_CASE("I2 dominant part on the standard recipe") {
  const Pipeline& p = standard_pipeline();
  const DominanceReport rep = dominant_part_diag(p.g, p.field, {4, 8, 16, 32});
  CHECK_FALSE(rep.degenerate);
  for (double r : rep.ratios) CHECK(std::isfinite(r));
  CHECK_THROWS_AS(dominant_part_diag(p.g, p.field, {4, 8, 16}), Error);
}

TEST_CASE("dominance report flags a vanishing dominant part") {
  Recipe r = standard_recipe();
  r.c.clear();
  const Pipeline p(r);
  CHECK(dominant_part_diag(p.g, p.field, {4, 8, 16, 32}).degenerate);
}

TEST_CASE("identity terms satisfy the mean-value property on a tau circle") {
  const Pipeline& p = standard_pipeline();
  const auto value = [&](cplx t) { return integral_identity_eval(p.g, p.cs, p.at(t)); };
  const auto volume = [&](cplx t) {
    const TauFields f = p.at(t);
    return integral_identity_eval(p.g, p.cs, f.uf, f.ug, f.w, {});
  };
  const auto i2 = [&](cplx t) {
    const TauFields f = p.at(t);
    return integrate<cplx>(p.g, Vec<cplx>(f.exact[1].cwiseProduct(f.w)));
  };
  CHECK(mean_value_defect(value, 8.0, 0.5) <= 1e-8);
  CHECK(mean_value_defect(volume, 8.0, 0.5) <= 1e-8);
  CHECK(mean_value_defect(i2, 8.0, 0.5) <= 1e-8);
}
