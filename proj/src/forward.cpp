#include "nlwave/forward.hpp"

#include <cmath>

#include "nlwave/fit.hpp"

namespace nlw {

FluxOperator::FluxOperator(const Grid& g, const CoefficientSet& cs) : g_(&g) {
  const int n = g.n();
  quadratic_ = cs.quadratic();
  cubic_ = cs.cubic;
  lo_.resize(static_cast<size_t>(n));
  gmid_.resize(static_cast<size_t>(n));
  cmid_.resize(static_cast<size_t>(n));
  rmid_.resize(static_cast<size_t>(n));
  for (int a = 0; a < n; ++a) {
    const Index st = g.stride(a);
    auto& lo = lo_[a];
    for (Index i = 0; i < g.size(); ++i) {
      if (g.multi(i)[a] == g.dims() - 1) continue;
      if (g.on_boundary(i) && g.on_boundary(i + st)) continue;
      lo.push_back(i);
    }
    const auto m = static_cast<Index>(lo.size());
    auto mids = [&](const Vec<double>& f) {
      Vec<double> out(m);
      for (Index e = 0; e < m; ++e) out[e] = midpoint(f, lo[static_cast<size_t>(e)], st);
      return out;
    };
    gmid_[a] = mids(cs.gamma);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        if (cs.has_c(a, k, l)) cmid_[a].push_back({k, l, mids(cs.c[cs.slot(a, k, l)])});
    if (cubic_) rmid_[a] = mids(cs.r);
  }
}

double max_stable_dt(const Grid& g, const Vec<double>& gamma, double cfl) {
  return cfl * g.h() / std::sqrt(gamma.maxCoeff());
}

void check_cfl(const Grid& g, const Vec<double>& gamma, double dt, double cfl) {
  if (!(dt > 0) || dt > max_stable_dt(g, gamma, cfl) * (1.0 + 1e-12))
    throw numerical_error("forward", "CFL violated: dt=" + std::to_string(dt) +
                                         " > " + std::to_string(max_stable_dt(g, gamma, cfl)));
}

TimeSeries<double> solve_nonlinear(const Grid& g, const CoefficientSet& cs, const BoundaryTrace<double>& f,
                                   const Vec<double>& phi0, const Vec<double>& phi1, double dt, int steps) {
  check_cfl(g, cs.gamma, dt);
  const FluxOperator op(g, cs);
  return leapfrog<double>(
      g, dt, steps, f.values, phi0, phi1,
      [&](int, const Vec<double>& u, Vec<double>& acc) {
        if (cs.cubic) {
          // Flux overflow is checked on nodal gradients where the remainder is active.
          const Mat<double> q = gradient<double>(g, u);
          for (Index i = 0; i < g.size(); ++i)
            if (cs.r[i] != 0.0 && q.row(i).norm() > cs.h_valid)
              throw numerical_error("forward", "|q| exceeds h_valid at node " + std::to_string(i));
        }
        op.apply<double>(u, acc);
      },
      "forward.nonlinear");
}

double discrete_energy(const Grid& g, const Vec<double>& gamma, const TimeSeries<double>& run, int m) {
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, gamma);
  const Vec<double> a = run.frames.col(m), b = run.frames.col(m + 1);
  double kin = 0.0;
  const Vec<double> kb = k * b;
  double pot = 0.0;
  for (Index i : g.interior_nodes()) {
    const double v = (b[i] - a[i]) / run.dt;
    kin += v * v;
    pot += kb[i] * a[i];
  }
  return (kin + pot) * std::pow(g.h(), g.n());
}

ExpansionReport expansion_residual(const Grid& g, const CoefficientSet& cs, const BoundaryTrace<double>& f, double dt,
                                   int steps, const std::vector<double>& epsilons) {
  if (epsilons.size() < 3) throw config_error("forward.expand", "need at least 3 epsilon values");
  for (size_t k = 1; k < epsilons.size(); ++k)
    if (!(epsilons[k] < epsilons[k - 1])) throw config_error("forward.expand", "epsilons must strictly decrease");

  const TimeSeries<double> u1 = solve_linear_u1<double>(g, cs.gamma, f, dt, steps);
  const TimeSeries<double> u2 = solve_linear_u2<double>(g, cs, u1);
  const CoefficientSet lin = gamma_only(g.n(), cs.gamma);
  const BoundaryTrace<double> g1 = dn_trace<double>(g, lin, u1);
  BoundaryTrace<double> g2 = dn_trace<double>(g, lin, u2);
  for (int m = 0; m <= steps; ++m) g2.values.col(m) += quadratic_normal_frame<double>(g, cs, Vec<double>(u1.frames.col(m)));

  ExpansionReport rep;
  rep.epsilons = epsilons;
  const Vec<double> z = Vec<double>::Zero(g.size());
  for (double eps : epsilons) {
    BoundaryTrace<double> fe = f;
    fe.values *= eps;
    const TimeSeries<double> u = solve_nonlinear(g, cs, fe, z, z, dt, steps);
    double sup = 0.0;
    for (int m = 0; m <= steps; ++m) {
      const Vec<double> r = u.frames.col(m) - eps * u1.frames.col(m) - eps * eps * u2.frames.col(m);
      sup = std::max(sup, h1_norm<double>(g, r));
    }
    rep.residual_norms.push_back(sup);
    rep.w_over_eps.push_back(sup / (eps * eps) / eps);
    const BoundaryTrace<double> lam = dn_trace<double>(g, cs, u);
    const Mat<double> dr = lam.values - eps * g1.values - eps * eps * g2.values;
    rep.dn_residuals.push_back(trace_norm<double>(g, dr, dt));
  }
  rep.fitted_slope = loglog_slope(rep.epsilons, rep.residual_norms);
  rep.dn_slope = loglog_slope(rep.epsilons, rep.dn_residuals);
  return rep;
}

double stable_epsilon(const Grid& g, const CoefficientSet& cs, const BoundaryTrace<double>& f, double dt, int steps,
                      double eps_start, int max_halvings) {
  const Vec<double> z = Vec<double>::Zero(g.size());
  double eps = eps_start;
  for (int k = 0; k <= max_halvings; ++k, eps *= 0.5) {
    BoundaryTrace<double> fe = f;
    fe.values *= eps;
    try {
      const TimeSeries<double> u = solve_nonlinear(g, cs, fe, z, z, dt, steps);
      const double amp = u.frames.cwiseAbs().maxCoeff();
      if (std::isfinite(amp)) return eps;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
    }
  }
  throw numerical_error("forward.expand", "no stable epsilon found");
}

}  // namespace nlw
