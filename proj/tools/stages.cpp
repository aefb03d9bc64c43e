#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "app.hpp"
#include "nlwave/asymptotics.hpp"
#include "nlwave/fit.hpp"
#include "nlwave/reconstruct.hpp"
#include "nlwave/spectral.hpp"

namespace nlw::app {

namespace {

using std::numbers::pi;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw config_error("config", path + ": " + what);
}

std::vector<double> numbers(const json& j) { return j.get<std::vector<double>>(); }

Point point(const json& j, const std::string& path) {
  require(j.size() <= 3, path, "at most 3 components");
  Point p = Point::Zero();
  for (size_t i = 0; i < j.size(); ++i) p[static_cast<Index>(i)] = j[i].get<double>();
  return p;
}

int dims_of(const json& c, const std::string& path, int lo = 5) {
  const int d = c.at("dims").get<int>();
  require(d >= lo, path + ".dims", "must be >= " + std::to_string(lo));
  return d;
}

int steps_for(double horizon, double dt, const std::string& path) {
  require(horizon > 0.0, path, "must be positive");
  return static_cast<int>(std::ceil(horizon / dt));
}

double window4(double s) { return (s > 0 && s < 1) ? std::pow(std::sin(pi * s), 4) : 0.0; }

Vec<double> ramp(double dt, int steps, double t0) {
  Vec<double> chi(steps + 1);
  for (int m = 0; m <= steps; ++m) chi[m] = window4(m * dt / t0);
  return chi;
}

template <class F>
Vec<double> boundary_values(const Grid& g, F&& f) {
  Vec<double> out(static_cast<Index>(g.boundary_nodes().size()));
  for (size_t k = 0; k < g.boundary_nodes().size(); ++k) out[static_cast<Index>(k)] = f(g.point(g.boundary_nodes()[k]));
  return out;
}

Vec<double> forward_profile(const Grid& g) {
  return boundary_values(g, [&](const Point& x) {
    double v = 0.0;
    for (int a = 0; a < g.n(); ++a) v += std::pow(std::sin(pi * x[a]), 2) * (1.0 + 0.3 * a);
    return v;
  });
}

Vec<double> shifted_profile(const Grid& g, double shift) {
  return boundary_values(g, [&](const Point& x) {
    double v = 0.0;
    for (int a = 0; a < g.n(); ++a) v += std::pow(std::sin(pi * x[a]), 2) * std::cos(shift * (a + 1) * x[(a + 1) % g.n()]);
    return v;
  });
}

const Bump kGammaBump{Point(0.5, 0.5, 0.5), 0.35, 0.3};

Recipe recipe_from(const json& c, std::uint64_t seed, const std::string& path) {
  const std::string name = c.at("recipe").get<std::string>();
  const std::vector<std::string> known{"constant_gamma", "smooth_gamma_bump", "single_c_bump", "random_c_field"};
  require(std::find(known.begin(), known.end(), name) != known.end(), path + ".recipe", "unknown recipe '" + name + "'");
  Recipe r = preset(name, seed);
  if (c.at("gamma_bump").get<bool>()) r.gamma_bump = kGammaBump;
  if (c.at("remainder").get<bool>()) r.remainder = Bump{Point(0.5, 0.5, 0.5), 0.25, 1.0};
  return r;
}

CBump cbump_from(const json& b, int n, const std::string& path) {
  CBump out;
  out.j = b.at("j").get<int>();
  out.k = b.at("k").get<int>();
  out.l = b.at("l").get<int>();
  for (int v : {out.j, out.k, out.l}) require(v >= 0 && v < n, path, "indices must lie in [0, " + std::to_string(n) + ")");
  out.bump = Bump{point(b.at("center"), path + ".center"), b.at("radius").get<double>(), b.at("amp").get<double>()};
  require(out.bump.radius > 0.0, path + ".radius", "must be positive");
  return out;
}

CoefficientSet single_bump_set(const Grid& g, const CBump& b, const Vec<double>& gamma) {
  Recipe r;
  r.name = "single_c_bump";
  r.c.push_back(b);
  CoefficientSet cs = synth_coeffs(g, r);
  cs.gamma = gamma;
  return cs;
}

std::string snapshot(const Context& ctx, StageResult& res, const std::string& name, const Grid& g, const auto& u,
                     const std::string& role) {
  if (ctx.out.empty()) return {};
  const std::filesystem::path dir = std::filesystem::path(ctx.out) / "snapshots";
  std::filesystem::create_directories(dir);
  const std::string stem = (dir / name).string();
  write_snapshot(stem, g, u, role);
  res.snapshots.push_back("snapshots/" + name);
  return stem;
}

void add(StageResult& res, const std::string& criterion, const std::string& metric, double value,
         const std::string& op, double bound) {
  res.checks.push_back(make_check(criterion, metric, value, op, bound));
  res.metrics[metric] = value;
}

double rel_l2(const Mat<double>& a, const Mat<double>& b) { return (a - b).norm() / b.norm(); }

template <class M>
double max_abs_diff(const M& a, const M& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  if (a.size() == 0) return 0.0;
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

Check make_check(const std::string& criterion, const std::string& metric, double value, const std::string& op,
                 double bound) {
  bool pass = false;
  if (op == "<=") pass = value <= bound;
  else if (op == "<") pass = value < bound;
  else if (op == ">=") pass = value >= bound;
  else if (op == ">") pass = value > bound;
  else if (op == "==") pass = value == bound;
  else throw Error(ErrorKind::Internal, "app", "unknown check operator " + op);
  return {criterion, metric, value, op, bound, pass};
}

bool StageResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

StageResult run_simulate(const json& cfg, const Context& ctx) {
  const json& c = cfg.at("simulate");
  StageResult res;
  res.stage = "simulate";
  const int n = c.at("n").get<int>();
  require(n == 2 || n == 3, "simulate.n", "must be 2 or 3");
  const Grid g = make_grid(n, dims_of(c, "simulate"));
  const CoefficientSet cs = synth_coeffs(g, recipe_from(c, cfg.at("seed").get<std::uint64_t>(), "simulate"));
  validate(g, cs);
  const double dt = c.at("dt_factor").get<double>() * max_stable_dt(g, cs.gamma);
  const int steps = steps_for(c.at("horizon").get<double>(), dt, "simulate.horizon");
  const double eps = c.at("epsilon").get<double>();
  require(eps > 0.0, "simulate.epsilon", "must be positive");
  const int shots = c.at("snapshots").get<int>();
  require(shots >= 1, "simulate.snapshots", "must be >= 1");

  BoundaryTrace<double> f = probe_trace<double>(forward_profile(g), ramp(dt, steps, c.at("ramp_t0").get<double>()), dt);
  f.values *= eps;
  const Vec<double> zero = Vec<double>::Zero(g.size());
  const TimeSeries<double> u = solve_nonlinear(g, cs, f, zero, zero, dt, steps);
  const BoundaryTrace<double> dn = dn_trace<double>(g, cs, u);

  Table tr{"simulate_trace", {"step", "t", "u_max", "dn_l2"}, {}};
  for (int m = 0; m <= steps; ++m) {
    const double dn_l2 = std::sqrt((dn.values.col(m).array().abs2() * g.entry_weights().array()).sum());
    tr.rows.push_back({m, m * dt, u.frames.col(m).cwiseAbs().maxCoeff(), dn_l2});
  }
  res.tables.push_back(std::move(tr));
  snapshot(ctx, res, "simulate_gamma", g, cs.gamma, "gamma");
  for (int k = 0; k < shots; ++k) {
    const int m = shots == 1 ? steps : static_cast<int>(std::lround(static_cast<double>(k) * steps / (shots - 1)));
    snapshot(ctx, res, "simulate_u_" + std::to_string(m), g, Vec<double>(u.frames.col(m)), "u");
  }
  res.metrics["dt"] = dt;
  res.metrics["steps"] = steps;
  res.metrics["u_max"] = u.frames.cwiseAbs().maxCoeff();
  res.metrics["dn_trace_l2"] = trace_norm<double>(g, dn.values, dt);
  add(res, "", "solution_finite", u.frames.allFinite() ? 1.0 : 0.0, "==", 1.0);
  return res;
}

StageResult run_expand(const json& cfg, const Context&) {
  const auto t0 = Clock::now();
  const json& c = cfg.at("expand");
  StageResult res;
  res.stage = "expand";
  const int n = c.at("n").get<int>();
  require(n == 2 || n == 3, "expand.n", "must be 2 or 3");
  const Grid g = make_grid(n, dims_of(c, "expand"));
  const CoefficientSet cs = synth_coeffs(g, recipe_from(c, cfg.at("seed").get<std::uint64_t>(), "expand"));
  validate(g, cs);
  const double dt = c.at("dt_factor").get<double>() * max_stable_dt(g, cs.gamma);
  const int steps = steps_for(c.at("horizon").get<double>(), dt, "expand.horizon");
  const BoundaryTrace<double> f =
      probe_trace<double>(forward_profile(g), ramp(dt, steps, c.at("ramp_t0").get<double>()), dt);
  const ExpansionReport r = expansion_residual(g, cs, f, dt, steps, numbers(c.at("epsilons")));
  const double eps0 = stable_epsilon(g, cs, f, dt, steps);

  Table t{"expand_residuals", {"epsilon", "residual_h1", "w_over_eps", "dn_residual"}, {}};
  for (size_t k = 0; k < r.epsilons.size(); ++k)
    t.rows.push_back({r.epsilons[k], r.residual_norms[k], r.w_over_eps[k], r.dn_residuals[k]});
  res.tables.push_back(std::move(t));
  res.metrics["stable_epsilon"] = eps0;
  res.metrics["dt"] = dt;
  res.metrics["steps"] = steps;
  const double min_slope = c.at("min_slope").get<double>();
  const double budget = c.at("max_seconds").get<double>();
  add(res, "1", "residual_slope", r.fitted_slope, ">=", min_slope);
  add(res, "2", "dn_residual_slope", r.dn_slope, ">=", min_slope);
  const double secs = seconds_since(t0);
  add(res, "1", "expansion_seconds", secs, "<=", budget);
  res.checks.push_back(make_check("2", "expansion_seconds", secs, "<=", budget));
  return res;
}

namespace {

struct SpectralFixture {
  Grid g;
  CoefficientSet cs;
  double dt;
  int steps;
  SpectralFixture(int dims, double horizon, double dt_factor, const std::string& path) : g(make_grid(2, dims)) {
    Recipe r = preset("single_c_bump");
    r.gamma_bump = kGammaBump;
    cs = synth_coeffs(g, r);
    require(dt_factor > 0.0 && dt_factor <= 1.0, path + ".dt_factor", "must lie in (0, 1]");
    dt = dt_factor * max_stable_dt(g, cs.gamma);
    steps = steps_for(horizon, dt, path + ".horizon");
  }
  BoundaryTrace<double> probe(double shift, double t0) const {
    return probe_trace<double>(shifted_profile(g, shift), ramp(dt, steps, t0), dt);
  }
};

IntegratedField u2m1_field(const SpectralFixture& fx) {
  const TimeSeries<double> uf = solve_linear_u1<double>(fx.g, fx.cs.gamma, fx.probe(1.0, 0.8), fx.dt, fx.steps);
  const TimeSeries<double> ug = solve_linear_u1<double>(fx.g, fx.cs.gamma, fx.probe(2.0, 0.6), fx.dt, fx.steps);
  const SpectralOperator op(fx.g, fx.cs.gamma);
  return integrate_u2m1(op, FluxOperator(fx.g, fx.cs), uf, ug, fx.steps);
}

}  // namespace

StageResult run_spectral(const json& cfg, const Context&) {
  const json& c = cfg.at("spectral");
  StageResult res;
  res.stage = "spectral-check";

  {
    const json& e = c.at("equivalence");
    const SpectralFixture fx(dims_of(e, "spectral.equivalence"), e.at("horizon").get<double>(),
                             e.at("dt_factor").get<double>(), "spectral.equivalence");
    const BoundaryTrace<double> f = fx.probe(1.0, 0.8);
    const SpectralOperator op(fx.g, fx.cs.gamma);
    const FluxOperator flux(fx.g, fx.cs);
    const TimeSeries<double> u1 = solve_linear_u1<double>(fx.g, fx.cs.gamma, f, fx.dt, fx.steps);
    const TimeSeries<double> stepped = solve_linear_u2<double>(fx.g, fx.cs, u1);
    Mat<double> src(fx.g.size(), fx.steps + 1);
    Vec<double> col;
    for (int m = 0; m <= fx.steps; ++m) {
      const Vec<double> u = u1.frames.col(m);
      flux.apply_bilinear<double>(u, u, col);
      src.col(m) = col;
    }
    const TimeSeries<double> spectral = repr_u2<double>(op, src, fx.dt);
    add(res, "", "u2_norm", stepped.frames.norm(), ">", 0.0);
    add(res, "3", "two_solver_rel_l2", rel_l2(spectral.frames, stepped.frames), "<=", e.at("tol").get<double>());
  }

  {
    const json& p = c.at("polarization");
    const SpectralFixture fx(dims_of(p, "spectral.polarization"), p.at("horizon").get<double>(), 1.0,
                             "spectral.polarization");
    const BoundaryTrace<double> f = fx.probe(1.0, 0.7), gt = fx.probe(2.0, 0.5);
    const SpectralOperator op(fx.g, fx.cs.gamma);
    const FluxOperator flux(fx.g, fx.cs);
    const TimeSeries<double> uf = solve_linear_u1<double>(fx.g, fx.cs.gamma, f, fx.dt, fx.steps);
    const TimeSeries<double> ug = solve_linear_u1<double>(fx.g, fx.cs.gamma, gt, fx.dt, fx.steps);
    const std::vector<double> delays = numbers(p.at("delays"));
    require(delays.size() >= 3, "spectral.polarization.delays", "need at least 3 delays");
    Table t{"spectral_polarization", {"delay_steps", "s", "rel_l2"}, {}};
    double worst = 0.0;
    for (size_t q = 0; q < delays.size(); ++q) {
      require(delays[q] >= 0.0 && delays[q] <= 1.0, "spectral.polarization.delays[" + std::to_string(q) + "]",
              "must lie in [0, 1]");
      const int k = static_cast<int>(std::lround(delays[q] * fx.steps));
      const PolarizedField pf = polarized_u2(op, flux, uf, ug, k);
      const PolarizedField po = polarization_oracle(op, flux, f, gt, k);
      const double e = rel_l2(pf.u2.frames, po.u2.frames);
      worst = std::max(worst, e);
      t.rows.push_back({k, pf.s, e});
    }
    res.tables.push_back(std::move(t));
    add(res, "4", "polarization_rel_l2", worst, "<=", p.at("tol").get<double>());
  }

  {
    const json& u = c.at("u2m1");
    const std::vector<double> factors = numbers(u.at("dt_factors"));
    require(factors.size() == 2 && factors[1] < factors[0], "spectral.u2m1.dt_factors",
            "need two decreasing factors");
    std::vector<double> residuals;
    Table t{"spectral_u2m1_residual", {"dt_factor", "residual"}, {}};
    for (double factor : factors) {
      const SpectralFixture fx(dims_of(u, "spectral.u2m1"), u.at("horizon").get<double>(), factor, "spectral.u2m1");
      residuals.push_back(u2m1_residual(SpectralOperator(fx.g, fx.cs.gamma), u2m1_field(fx)));
      t.rows.push_back({factor, residuals.back()});
    }
    res.tables.push_back(std::move(t));
    add(res, "5", "u2m1_residual", residuals[0], "<=", u.at("tol").get<double>());
    add(res, "5", "u2m1_residual_refinement_ratio", residuals[1] / residuals[0], "<", 1.0);

    const SpectralFixture fx(dims_of(u, "spectral.u2m1"), u.at("growth_horizon").get<double>(),
                             u.at("growth_dt_factor").get<double>(), "spectral.u2m1");
    const std::vector<double> gr = u2m1_growth(fx.g, u2m1_field(fx));
    Table gt{"spectral_u2m1_growth", {"s", "h1_over_s2"}, {}};
    for (size_t k = 0; k < gr.size(); ++k) gt.rows.push_back({static_cast<double>(k) * fx.dt, gr[k]});
    res.tables.push_back(std::move(gt));
    const auto half = gr.begin() + static_cast<long>(gr.size() / 2);
    const double early = *std::max_element(gr.begin(), half), late = *std::max_element(half, gr.end());
    res.metrics["growth_early_max"] = early;
    add(res, "5", "growth_late_over_early", late / early, "<=", 1.0);
  }
  return res;
}

namespace {

double profile_f(const Point& x) { return std::pow(std::sin(pi * x[0]), 2) + 0.5 * std::pow(std::sin(pi * x[1]), 2); }
double profile_g(const Point& x) { return 1.0 + x[0] - 0.5 * x[1] * x[1]; }
double profile_w(const Point& x) { return std::cos(pi * x[1]) + x[0]; }

Recipe identity_recipe() {
  Recipe r;
  r.name = "laplace_standard";
  r.gamma_bump = kGammaBump;
  r.c.push_back({0, 0, 1, Bump{Point(0.5, 0.5, 0.5), 0.25, 0.5}});
  r.c.push_back({1, 1, 1, Bump{Point(0.45, 0.55, 0.5), 0.25, -0.3}});
  return r;
}

}  // namespace

StageResult run_laplace(const json& cfg, const Context&) {
  const json& c = cfg.at("laplace");
  StageResult res;
  res.stage = "laplace-check";

  {
    const json& x = c.at("chi");
    const int mu = x.at("mu").get<int>(), steps = x.at("steps").get<int>();
    require(mu >= 1, "laplace.chi.mu", "must be >= 1");
    require(steps >= 10, "laplace.chi.steps", "must be >= 10");
    const ChiProfile chi = make_chi(mu, x.at("t0").get<double>(), x.at("dt").get<double>(), steps);
    const std::vector<double> taus = numbers(x.at("taus"));
    require(taus.size() >= 2, "laplace.chi.taus", "need at least 2 values");
    std::vector<double> dev;
    Table t{"laplace_chi", {"tau", "deviation"}, {}};
    for (double tau : taus) {
      dev.push_back(std::abs(std::pow(tau, mu) * chi_hat(chi, tau) - 1.0));
      t.rows.push_back({tau, dev.back()});
    }
    res.tables.push_back(std::move(t));
    add(res, "6", "chi_deviation_slope", loglog_slope(taus, dev), "<=", x.at("max_slope").get<double>());
  }

  const json& id = c.at("identity");
  const Grid g = make_grid(2, dims_of(id, "laplace.identity"));
  const CoefficientSet cs = synth_coeffs(g, identity_recipe());
  const double dt = id.at("dt_factor").get<double>() * max_stable_dt(g, cs.gamma);
  const int steps = steps_for(id.at("horizon").get<double>(), dt, "laplace.identity.horizon");
  const ChiProfile chi = make_chi(3, 1.0, dt, steps);
  const TimeSeries<double> uf =
      solve_linear_u1<double>(g, cs.gamma, probe_trace<double>(boundary_values(g, profile_f), chi.values, dt), dt, steps);
  const TimeSeries<double> ug =
      solve_linear_u1<double>(g, cs.gamma, probe_trace<double>(boundary_values(g, profile_g), chi.values, dt), dt, steps);
  const SpectralOperator op(g, cs.gamma);
  const IntegratedField field = integrate_u2m1(op, FluxOperator(g, cs), uf, ug, steps);
  const cplx tau = id.at("tau").get<double>();
  require_sector(tau, "laplace.identity.tau");
  const Vec<cplx> w = solve_tau_elliptic(g, cs.gamma, tau, boundary_values(g, profile_w).cast<cplx>());
  const TauFields tf = transform_fields(uf, ug, field, w, tau);
  const cplx value = integral_identity_eval(g, cs, tf);

  // Equal coefficient sets: the difference and its u2^(-1) sources are zero.
  CoefficientSet same = cs;
  for (auto& v : same.c) v.resize(0);
  const IntegratedField null_field = integrate_u2m1(op, FluxOperator(g, same), uf, ug, steps);
  const TauFields null_tf = transform_fields(uf, ug, null_field, w, tau);
  const cplx null_value = integral_identity_eval(g, coefficient_difference(cs, cs), null_tf);
  const cplx oracle = identity_volume_oracle(g, cs, tf.uf, tf.ug, tf.w, tf.exact);
  res.metrics["identity_value_abs"] = std::abs(value);
  add(res, "7", "null_identity_normalized", std::abs(null_value) / std::abs(value), "<=",
      id.at("null_tol").get<double>());
  add(res, "7", "volume_oracle_gap", std::abs(value - oracle) / std::abs(value), "<=",
      id.at("oracle_tol").get<double>());

  const json& d = c.at("dominance");
  const DominanceReport rep = dominant_part_diag(g, field, numbers(d.at("taus")));
  Table t{"laplace_dominance", {"tau", "ratio"}, {}};
  for (size_t k = 0; k < rep.taus.size(); ++k) t.rows.push_back({rep.taus[k], rep.ratios[k]});
  res.tables.push_back(std::move(t));
  add(res, "", "dominant_part_nonzero", rep.degenerate ? 0.0 : 1.0, "==", 1.0);
  add(res, "11", "dominance_ratio_slope", rep.slope, "<", d.at("max_slope").get<double>());
  return res;
}

StageResult run_cgo(const json& cfg, const Context&) {
  const json& c = cfg.at("cgo");
  StageResult res;
  res.stage = "cgo-check";
  const Grid g(3, dims_of(c, "cgo"));
  const Vec<double> gamma = sample<double>(g, [&](const Point& x) { return 1.0 + kGammaBump(x, 3); });
  const double tau = c.at("tau").get<double>();
  require(tau > 0.0, "cgo.tau", "must be positive");
  const Point a = point(c.at("a"), "cgo.a");
  const PanelFrame fr = panel_frame(a);
  auto pair = [&](double s) { return make_zeta_pair(a, fr.xi, fr.eta, s); };

  const std::vector<double> svals = numbers(c.at("s_values"));
  require(svals.size() >= 2, "cgo.s_values", "need at least 2 values");
  std::vector<double> mags, rs;
  double worst = 0.0;
  Table t{"cgo_remainder", {"s", "zeta_norm", "r_l2", "r_tau_l2", "residual", "iterations"}, {}};
  for (double s : svals) {
    const ZetaPair p = pair(s);
    CgoSolution sol = solve_remainder(g, gamma, tau, p.zeta1);
    tau_derivative_remainder(g, gamma, sol);
    worst = std::max(worst, sol.residual);
    mags.push_back(p.zeta1.norm());
    rs.push_back(sol.r_l2);
    t.rows.push_back({s, mags.back(), sol.r_l2, sol.r_tau_l2, sol.residual, sol.iterations});
  }
  res.tables.push_back(std::move(t));
  add(res, "8", "cgo_residual", worst, "<=", c.at("residual_tol").get<double>());
  add(res, "8", "remainder_decay_slope", loglog_slope(mags, rs), "<=", c.at("max_slope").get<double>());

  {
    CgoSolution base = solve_remainder(g, gamma, tau, pair(c.at("fd_s").get<double>()).zeta1);
    tau_derivative_remainder(g, gamma, base);
    auto remainder_at = [&](double tt) {
      const CgoBox box(g, gamma, tt, base.phase, base.pad, base.bloch);
      const Vec<cplx> m = box.box_m().cast<cplx>();
      const Vec<cplx> mr = box.solve(-box.apply_periodic(m), 1e-12, 60, 2000);
      return box.to_omega((mr.array() / m.array()).matrix());
    };
    const std::vector<double> deltas = numbers(c.at("fd_deltas"));
    require(deltas.size() >= 2, "cgo.fd_deltas", "need at least 2 values");
    std::vector<double> errs;
    Table ft{"cgo_tau_derivative", {"delta", "rel_error"}, {}};
    for (double dl : deltas) {
      require(dl > 0.0 && dl < tau, "cgo.fd_deltas", "must lie in (0, tau)");
      const Vec<cplx> fd = (remainder_at(tau + dl) - remainder_at(tau - dl)) / (2.0 * dl);
      errs.push_back(l2_norm<cplx>(g, fd - base.r_tau) / base.r_tau_l2);
      ft.rows.push_back({dl, errs.back()});
    }
    res.tables.push_back(std::move(ft));
    add(res, "8", "tau_derivative_order_gap", std::abs(loglog_slope(deltas, errs) - 2.0), "<=",
        c.at("fd_order_tol").get<double>());
  }

  {
    const json& f = c.at("family");
    const double ftau = f.at("tau").get<double>(), thr = f.at("threshold").get<double>();
    const double r = find_r_min(g, gamma, ftau, numbers(f.at("r_values")), thr);
    res.metrics["accepted_r"] = r;
    if (r > 0.0) {
      const FamilyReport rep = independent_family(g, gamma, ftau, r, {}, thr);
      add(res, "9", "min_abs_det", rep.det.cwiseAbs().minCoeff(), ">", 0.0);
      add(res, "9", "mask_fraction", 1.0 - rep.fraction_above, "==", 0.0);
      res.metrics["min_normalized_det"] = rep.min_normalized;
    } else {
      add(res, "9", "accepted_r", r, ">", 0.0);
    }
  }

  {
    const json& v = c.at("vanishing");
    const Grid gv(3, dims_of(v, "cgo.vanishing"));
    const Vec<double> ones = Vec<double>::Ones(gv.size());
    const cplx vt = v.at("tau").get<double>();
    const SymmetrizedCoefficients sc = symmetrize(synth_coeffs(gv, preset("single_c_bump")));
    const Vec<cplx> w = solve_tau_elliptic(
        gv, ones, vt, boundary_values(gv, [](const Point& x) { return std::cos(x[0]) + x[2]; }).cast<cplx>());
    const VanishingTerms vt_rep =
        vanishing_terms(gv, ones, sc, vt, point(v.at("a"), "cgo.vanishing.a"), numbers(v.at("s_values")), w);
    Table vtab{"cgo_vanishing_terms", {"s", "scaled", "main"}, {}};
    for (size_t k = 0; k < vt_rep.s.size(); ++k) vtab.rows.push_back({vt_rep.s[k], vt_rep.scaled[k], vt_rep.main[k]});
    res.tables.push_back(std::move(vtab));
    add(res, "11", "vanishing_terms_slope", vt_rep.slope, "<", 0.0);
  }
  return res;
}

StageResult run_asymptotic(const json& cfg, const Context&) {
  const json& c = cfg.at("asymptotic");
  StageResult res;
  res.stage = "asymptotic-check";
  const int n = c.at("n").get<int>();
  require(n == 2 || n == 3, "asymptotic.n", "must be 2 or 3");
  LayerOptions o;
  o.nt = c.at("nt").get<int>();
  o.normal = c.at("normal").get<int>();
  require(o.nt >= 4, "asymptotic.nt", "must be >= 4");
  const std::vector<double> taus = numbers(c.at("taus"));
  const Profile phi = [](const Point& y) { return 1.0 + 0.5 * std::cos(2.0 * pi * y[0]); };
  Table t{"asymptotic_errors", {"profile", "tau", "order", "error"}, {}};

  const double g0 = c.at("constant_gamma").get<double>();
  require(g0 > 0.0, "asymptotic.constant_gamma", "must be positive");
  const LayerStudy flat = layer_error_study(n, [g0](const Point&) { return g0; }, phi, taus, {0, 1}, o);
  double floor_err = 0.0;
  for (const auto& r : flat.rows) {
    floor_err = std::max(floor_err, r.error);
    t.rows.push_back({"constant", r.tau, r.order, r.error});
  }
  add(res, "10", "constant_gamma_error", floor_err, "<=", c.at("floor_tol").get<double>());

  const double slope = c.at("normal_slope").get<double>();
  const std::vector<double> amps = numbers(c.at("tangential_amplitudes"));
  require(!amps.empty(), "asymptotic.tangential_amplitudes", "need at least one value");
  for (size_t q = 0; q < amps.size(); ++q) {
    const double amp = amps[q];
    const Profile gamma = [=](const Point& y) { return 1.0 + slope * y[n - 1] + amp * std::sin(2.0 * pi * y[0]); };
    const LayerStudy st = layer_error_study(n, gamma, phi, taus, {0, 1}, o);
    const std::string tag = "variable_" + std::to_string(q);
    for (const auto& r : st.rows) t.rows.push_back({tag, r.tau, r.order, r.error});
    res.metrics[tag + "_slope_order0"] = st.slopes[0];
    res.metrics[tag + "_slope_order1"] = st.slopes[1];
    add(res, "10", tag + "_slope_gap", st.slopes[0] - st.slopes[1], ">=", c.at("slope_gap").get<double>());
  }
  res.tables.push_back(std::move(t));
  return res;
}

namespace {

std::vector<MeasureMode> modes_from(const json& c, const Context& ctx) {
  std::vector<std::string> names = ctx.modes;
  if (names.empty()) names = c.at("modes").get<std::vector<std::string>>();
  require(!names.empty(), "reconstruct.modes", "need at least one mode");
  std::vector<MeasureMode> out;
  for (const auto& nm : names) {
    require(nm == "oracle" || nm == "boundary", "reconstruct.modes", "unknown mode '" + nm + "'");
    const MeasureMode m = parse_mode(nm);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

// Bit-identity of forward data and recoveries for a truth and its k-l swap.
void symmetry_study(const json& c, const std::vector<MeasureMode>& modes, StageResult& res) {
  const json& y = c.at("symmetry");
  const Grid g(3, dims_of(y, "reconstruct.symmetry"));
  const Vec<double> gamma = Vec<double>::Ones(g.size());
  const CBump a = cbump_from(y.at("truth"), 3, "reconstruct.symmetry.truth");
  CBump b = a;
  std::swap(b.k, b.l);
  const CoefficientSet ca = single_bump_set(g, a, gamma), cb = single_bump_set(g, b, gamma);

  const double dt = 0.5 * max_stable_dt(g, gamma);
  const int steps = steps_for(y.at("horizon").get<double>(), dt, "reconstruct.symmetry.horizon");
  BoundaryTrace<double> f = probe_trace<double>(forward_profile(g), ramp(dt, steps, y.at("horizon").get<double>()), dt);
  f.values *= y.at("epsilon").get<double>();
  const Vec<double> zero = Vec<double>::Zero(g.size());
  const TimeSeries<double> ua = solve_nonlinear(g, ca, f, zero, zero, dt, steps);
  const TimeSeries<double> ub = solve_nonlinear(g, cb, f, zero, zero, dt, steps);
  add(res, "13", "swap_dn_trace_max_diff",
      max_abs_diff(dn_trace<double>(g, ca, ua).values, dn_trace<double>(g, cb, ub).values), "==", 0.0);

  PanelProblem p;
  p.grid = &g;
  p.gamma = gamma;
  p.truths = {symmetrize(ca), symmetrize(cb)};
  p.calibration = symmetrize(single_bump_set(g, cbump_from(c.at("calibration"), 3, "reconstruct.calibration"), gamma));
  p.opt.a_max = y.at("a_max").get<double>();
  p.opt.boundary_a_max = p.opt.a_max;
  p.opt.centers = {Point(0.5, 0.5, 0.5)};
  // a short a-grid: the stage spread is checked on the main panel only
  p.opt.spread_tol = INFINITY;
  for (const ReconstructionResult& r : reconstruct_pipeline(p, modes)) {
    const std::string tag = mode_name(r.mode);
    add(res, "13", "swap_panel_max_diff_" + tag, max_abs_diff(r.panel.data.col(0), r.panel.data.col(1)), "==", 0.0);
    double rec_diff = 0.0;
    for (size_t q = 0; q < r.recovered[0].s.size(); ++q)
      rec_diff = std::max(rec_diff, max_abs_diff(r.recovered[0].s[q], r.recovered[1].s[q]));
    add(res, "13", "swap_recovery_max_diff_" + tag, rec_diff, "==", 0.0);
  }
}

}  // namespace

StageResult run_reconstruct(const json& cfg, const Context& ctx) {
  const json& c = cfg.at("reconstruct");
  StageResult res;
  res.stage = "reconstruct";
  const std::vector<MeasureMode> modes = modes_from(c, ctx);
  symmetry_study(c, modes, res);
  const auto t0 = Clock::now();
  const Grid g(3, dims_of(c, "reconstruct", 8));
  PanelProblem p;
  p.grid = &g;
  p.gamma = Vec<double>::Ones(g.size());
  const json& truths = c.at("truths");
  require(!truths.empty(), "reconstruct.truths", "need at least one truth");
  for (size_t q = 0; q < truths.size(); ++q)
    p.truths.push_back(
        symmetrize(single_bump_set(g, cbump_from(truths[q], 3, "reconstruct.truths[" + std::to_string(q) + "]"), p.gamma)));
  p.calibration = symmetrize(single_bump_set(g, cbump_from(c.at("calibration"), 3, "reconstruct.calibration"), p.gamma));
  ReconstructOptions& o = p.opt;
  o.tau = c.at("tau").get<double>();
  o.s_values = numbers(c.at("s_values"));
  o.a_max = c.at("a_max").get<double>();
  o.boundary_s_values = numbers(c.at("boundary_s_values"));
  o.boundary_a_max = c.at("boundary_a_max").get<double>();
  o.spread_tol = c.at("spread_tol").get<double>();
  o.family_r = c.at("family_r").get<double>();
  o.centers = lattice_centers(numbers(c.at("basis_ticks")));
  o.basis_radius = c.at("basis_radius").get<double>();
  require(ctx.jobs >= 1, "jobs", "must be >= 1");
  o.jobs = ctx.jobs;

  const std::vector<ReconstructionResult> results = reconstruct_pipeline(p, modes);
  Table rec{"reconstruct_recovery",
            {"mode", "truth", "rel_l2", "sup", "panel_residual", "condition", "kappa0", "checked_spread", "seconds"},
            {}};
  Table spread{"reconstruct_panel_spread", {"mode", "a_index", "a_x", "a_y", "a_z", "row", "truth", "spread"}, {}};
  for (const ReconstructionResult& r : results) {
    const std::string tag = mode_name(r.mode);
    const double tol = c.at(tag + "_tol").get<double>();
    for (size_t k = 0; k < r.rel_l2.size(); ++k) {
      rec.rows.push_back({tag, k, r.rel_l2[k], r.sup[k], r.panel_residual[k], r.condition, r.kappa0, r.checked_spread,
                          r.seconds});
      add(res, "12", tag + "_rel_l2_truth" + std::to_string(k), r.rel_l2[k], "<=", tol);
      const CBump tb = cbump_from(truths[k], 3, "reconstruct.truths");
      const size_t slot = r.recovered[k].slot(tb.j, std::min(tb.k, tb.l), std::max(tb.k, tb.l));
      snapshot(ctx, res, "recovered_" + tag + "_truth" + std::to_string(k), g, r.recovered[k].s[slot], "recovered");
      if (r.mode == modes.front())
        snapshot(ctx, res, "truth" + std::to_string(k), g, p.truths[k].s[slot], "truth");
    }
    const FourierPanel& pn = r.panel;
    for (Index row = 0; row < pn.spread.rows(); ++row) {
      const size_t ia = static_cast<size_t>(row / pn.rows_per_a);
      for (Index k = 0; k < pn.spread.cols(); ++k)
        spread.rows.push_back({tag, ia, pn.a[ia][0], pn.a[ia][1], pn.a[ia][2], row, k, pn.spread(row, k)});
    }
    res.metrics[tag + "_kappa0"] = r.kappa0;
    res.metrics[tag + "_condition"] = r.condition;
    res.metrics[tag + "_checked_spread"] = r.checked_spread;
    res.metrics[tag + "_max_spread"] = r.max_spread;
    res.metrics[tag + "_rows"] = pn.rows();
    res.metrics[tag + "_polarization_defect"] = r.polarization_defect;
    res.metrics[tag + "_seconds"] = r.seconds;
  }
  res.tables.push_back(std::move(rec));
  res.tables.push_back(std::move(spread));
  add(res, "12", "reconstruct_seconds", seconds_since(t0), "<=", c.at("max_seconds").get<double>());
  return res;
}

}  // namespace nlw::app
