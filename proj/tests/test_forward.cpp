#include "doctest.h"

#include <cmath>
#include <numbers>

#include "nlwave/fit.hpp"
#include "nlwave/forward.hpp"

using namespace nlw;
using std::numbers::pi;

namespace {

double window4(double s) { return (s > 0 && s < 1) ? std::pow(std::sin(pi * s), 4) : 0.0; }

Vec<double> ramp(double dt, int steps, double t0) {
  Vec<double> chi(steps + 1);
  for (int m = 0; m <= steps; ++m) chi[m] = window4(m * dt / t0);
  return chi;
}

Vec<double> boundary_profile(const Grid& g) {
  Vec<double> f(static_cast<Index>(g.boundary_nodes().size()));
  for (size_t k = 0; k < g.boundary_nodes().size(); ++k) {
    const Point x = g.point(g.boundary_nodes()[k]);
    double v = 0.0;
    for (int a = 0; a < g.n(); ++a) v += std::pow(std::sin(pi * x[a]), 2) * (1.0 + 0.3 * a);
    f[static_cast<Index>(k)] = v;
  }
  return f;
}

struct Setup {
  Grid g;
  double dt;
  int steps;
  BoundaryTrace<double> f;
};

Setup standard(int n, int dims, double horizon, double t0) {
  Grid g = make_grid(n, dims);
  const double dt = 0.4 * g.h() / std::sqrt(1.3);
  const int steps = static_cast<int>(std::ceil(horizon / dt));
  BoundaryTrace<double> f = probe_trace<double>(boundary_profile(g), ramp(dt, steps, t0), dt);
  return {std::move(g), dt, steps, std::move(f)};
}

}  // namespace

TEST_CASE("zero data gives zero solutions") {
  Setup s = standard(2, 9, 0.5, 0.5);
  const CoefficientSet cs = synth_coeffs(s.g, preset("single_c_bump"));
  s.f.values.setZero();
  const Vec<double> z = Vec<double>::Zero(s.g.size());
  CHECK(solve_nonlinear(s.g, cs, s.f, z, z, s.dt, s.steps).frames.cwiseAbs().maxCoeff() == 0.0);
  const TimeSeries<double> u1 = solve_linear_u1<double>(s.g, cs.gamma, s.f, s.dt, s.steps);
  CHECK(u1.frames.cwiseAbs().maxCoeff() == 0.0);
  CHECK(solve_linear_u2<double>(s.g, cs, u1).frames.cwiseAbs().maxCoeff() == 0.0);
  CHECK(dn_trace<double>(s.g, cs, u1).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("u2 vanishes without quadratic coefficients") {
  const Setup s = standard(2, 9, 0.8, 0.5);
  const CoefficientSet cs = synth_coeffs(s.g, preset("smooth_gamma_bump"));
  const TimeSeries<double> u1 = solve_linear_u1<double>(s.g, cs.gamma, s.f, s.dt, s.steps);
  CHECK(u1.frames.cwiseAbs().maxCoeff() > 0.1);
  CHECK(solve_linear_u2<double>(s.g, cs, u1).frames.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("CFL violation is rejected") {
  const Setup s = standard(2, 9, 0.5, 0.5);
  const CoefficientSet cs = gamma_only(2, Vec<double>::Ones(s.g.size()));
  const Vec<double> z = Vec<double>::Zero(s.g.size());
  CHECK_THROWS_AS(solve_nonlinear(s.g, cs, s.f, z, z, s.g.h(), 4), Error);
  CHECK(max_stable_dt(s.g, Vec<double>::Constant(s.g.size(), 4.0)) == doctest::Approx(0.25 * s.g.h()));
}

TEST_CASE("nonlinear solver with c = 0 is bit-identical to the linear solver") {
  const Setup s = standard(2, 13, 1.0, 0.6);
  const CoefficientSet cs = synth_coeffs(s.g, preset("smooth_gamma_bump"));
  const Vec<double> z = Vec<double>::Zero(s.g.size());
  const TimeSeries<double> a = solve_nonlinear(s.g, cs, s.f, z, z, s.dt, s.steps);
  const TimeSeries<double> b = solve_linear_u1<double>(s.g, cs.gamma, s.f, s.dt, s.steps);
  CHECK((a.frames.array() == b.frames.array()).all());
}

TEST_CASE("plane wave converges at second order") {
  std::vector<double> hs, errs;
  for (int dims : {17, 33, 65}) {
    const Grid g = make_grid(2, dims);
    const double dt = 0.5 * g.h();
    const int steps = static_cast<int>(std::lround(1.2 / dt));
    BoundaryTrace<double> f;
    f.dt = dt;
    f.values.resize(static_cast<Index>(g.boundary_nodes().size()), steps + 1);
    for (int m = 0; m <= steps; ++m)
      for (size_t k = 0; k < g.boundary_nodes().size(); ++k)
        f.values(static_cast<Index>(k), m) = window4(m * dt - g.point(g.boundary_nodes()[k])[0]);
    const TimeSeries<double> u =
        solve_linear_u1<double>(g, Vec<double>::Ones(g.size()), f, dt, steps);
    double e = 0.0;
    for (Index i = 0; i < g.size(); ++i) e = std::max(e, std::abs(u.frames(i, steps) - window4(steps * dt - g.point(i)[0])));
    hs.push_back(g.h());
    errs.push_back(e);
  }
  CHECK(errs.back() < 1e-2);
  CHECK(loglog_slope(hs, errs) == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("discrete energy is conserved once forcing stops") {
  const Setup s = standard(2, 25, 2.5, 0.7);
  const CoefficientSet cs = synth_coeffs(s.g, preset("smooth_gamma_bump"));
  const TimeSeries<double> u = solve_linear_u1<double>(s.g, cs.gamma, s.f, s.dt, s.steps);
  const int start = static_cast<int>(std::ceil(0.7 / s.dt)) + 1;
  const double e0 = discrete_energy(s.g, cs.gamma, u, start);
  CHECK(e0 > 0.0);
  double drift = 0.0;
  for (int m = start; m < s.steps; ++m) drift = std::max(drift, std::abs(discrete_energy(s.g, cs.gamma, u, m) - e0));
  CHECK(drift / e0 <= 1e-3);
}

TEST_CASE("u2 is linear in c") {
  const Setup s = standard(2, 13, 1.0, 0.6);
  const CoefficientSet cs = synth_coeffs(s.g, preset("random_c_field", 3));
  CoefficientSet twice = cs;
  for (auto& f : twice.c)
    if (f.size()) f *= 2.0;
  const TimeSeries<double> u1 = solve_linear_u1<double>(s.g, cs.gamma, s.f, s.dt, s.steps);
  const Mat<double> a = solve_linear_u2<double>(s.g, cs, u1).frames;
  const Mat<double> b = solve_linear_u2<double>(s.g, twice, u1).frames;
  CHECK(a.cwiseAbs().maxCoeff() > 0.0);
  CHECK((b - 2.0 * a).cwiseAbs().maxCoeff() <= 1e-10 * b.cwiseAbs().maxCoeff());
}

TEST_CASE("static Neumann trace of a linear field") {
  const Grid g = make_grid(2, 9);
  const CoefficientSet cs = gamma_only(2, Vec<double>::Ones(g.size()));
  const Vec<double> u = sample<double>(g, [](const Point& x) { return x[0]; });
  const Vec<double> t = dn_frame<double>(g, cs, u);
  for (size_t e = 0; e < g.entries().size(); ++e) {
    const Face& f = g.faces()[g.entries()[e].face];
    if (f.axis == 0 && f.side == 1) CHECK(t[static_cast<Index>(e)] == doctest::Approx(1.0));
    if (f.axis == 1) CHECK(std::abs(t[static_cast<Index>(e)]) < 1e-12);
  }
}

TEST_CASE("small-amplitude solutions scale linearly") {
  const Setup s = standard(2, 13, 1.0, 0.6);
  const CoefficientSet cs = synth_coeffs(s.g, preset("single_c_bump"));
  const Vec<double> z = Vec<double>::Zero(s.g.size());
  std::vector<double> eps{1e-2, 5e-3, 2.5e-3}, norms;
  for (double e : eps) {
    BoundaryTrace<double> fe = s.f;
    fe.values *= e;
    norms.push_back(solve_nonlinear(s.g, cs, fe, z, z, s.dt, s.steps).frames.norm());
  }
  CHECK(loglog_slope(eps, norms) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("expansion is exact for linear problems") {
  const Setup s = standard(2, 13, 1.0, 0.6);
  const CoefficientSet cs = synth_coeffs(s.g, preset("smooth_gamma_bump"));
  const ExpansionReport r = expansion_residual(s.g, cs, s.f, s.dt, s.steps, {1e-2, 5e-3, 2.5e-3});
  const TimeSeries<double> u1 = solve_linear_u1<double>(s.g, cs.gamma, s.f, s.dt, s.steps);
  double u1_sup = 0.0;
  for (int m = 0; m <= s.steps; ++m) u1_sup = std::max(u1_sup, h1_norm<double>(s.g, Vec<double>(u1.frames.col(m))));
  for (size_t k = 0; k < r.epsilons.size(); ++k) CHECK(r.residual_norms[k] <= 1e-8 * r.epsilons[k] * u1_sup);
}

TEST_CASE("expansion residuals are third order in epsilon") {
  for (const char* recipe : {"single_c_bump", "random_c_field"}) {
    CAPTURE(recipe);
    const Setup s = standard(2, 17, 1.5, 0.8);
    const CoefficientSet cs = synth_coeffs(s.g, preset(recipe, 7));
    const ExpansionReport r = expansion_residual(s.g, cs, s.f, s.dt, s.steps, {1e-2, 5e-3, 2.5e-3});
    CHECK(r.fitted_slope >= 2.7);
    CHECK(r.dn_slope >= 2.7);
    const auto [lo, hi] = std::minmax_element(r.w_over_eps.begin(), r.w_over_eps.end());
    CHECK(*lo > 0.0);
    CHECK(*hi / *lo < 2.0);
  }
}

TEST_CASE("expansion with a cubic remainder") {
  const Setup s = standard(2, 17, 1.2, 0.8);
  Recipe rec = preset("single_c_bump");
  rec.remainder = Bump{Point(0.5, 0.5, 0.5), 0.25, 1.0};
  const CoefficientSet cs = synth_coeffs(s.g, rec);
  const ExpansionReport r = expansion_residual(s.g, cs, s.f, s.dt, s.steps, {1e-2, 5e-3, 2.5e-3});
  CHECK(r.fitted_slope >= 2.7);
  CHECK(r.dn_slope >= 2.7);
}

TEST_CASE("epsilon list validation and stability search") {
  const Setup s = standard(2, 9, 0.5, 0.4);
  const CoefficientSet cs = synth_coeffs(s.g, preset("single_c_bump"));
  CHECK_THROWS_AS(expansion_residual(s.g, cs, s.f, s.dt, s.steps, {1e-2, 5e-3}), Error);
  CHECK_THROWS_AS(expansion_residual(s.g, cs, s.f, s.dt, s.steps, {1e-2, 2e-2, 5e-3}), Error);
  const double e = stable_epsilon(s.g, cs, s.f, s.dt, s.steps, 1e3);
  CHECK(e > 0.0);
  CHECK(e <= 1e3);
}
