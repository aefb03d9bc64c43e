#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nlwave/coeffs.hpp"
#include "nlwave/mesh.hpp"

namespace nlw {

template <class S>
struct TimeSeries {
  double dt = 0.0;
  double t0 = 0.0;
  Mat<S> frames;  // one column per time level
  int steps() const { return static_cast<int>(frames.cols()) - 1; }
  auto frame(int m) const { return frames.col(m); }
};

// Dirichlet data live on unique boundary nodes (Grid::boundary_nodes order);
// Neumann-type traces on Grid::entries().
enum class TraceKind { Dirichlet, Entries };

template <class S>
struct BoundaryTrace {
  TraceKind kind = TraceKind::Dirichlet;
  double dt = 0.0;
  Mat<S> values;  // rows: boundary nodes or entries, columns: time levels
};

// f(t,x) = chi(t) ftilde(x) sampled on the time grid.
template <class S>
BoundaryTrace<S> probe_trace(const Vec<S>& ftilde, const Vec<double>& chi, double dt) {
  BoundaryTrace<S> b;
  b.dt = dt;
  b.values = ftilde * chi.transpose().template cast<S>();
  return b;
}

// div C(x, grad u) on the staggered layout: q along an axis is the one-sided
// difference at the link midpoint, transverse components average the nodal
// gradient, coefficients are midpoint averages. The gamma part reduces to the
// compact stencil -K.
class FluxOperator {
 public:
  FluxOperator(const Grid& g, const CoefficientSet& cs);

  const Grid& grid() const { return *g_; }
  bool nonlinear() const { return quadratic_ || cubic_; }

  // out = div C(grad u) at interior nodes, zero on the boundary.
  template <class S>
  void apply(const Vec<S>& u, Vec<S>& out) const;
  // out = div [sum_kl c^j_kl q_k(u) q_l(v)] (gamma and remainder excluded).
  template <class S>
  void apply_bilinear(const Vec<S>& u, const Vec<S>& v, Vec<S>& out) const;

 private:
  struct Term {
    int k, l;
    Vec<double> mid;
  };
  const Grid* g_;
  bool quadratic_ = false;
  bool cubic_ = false;
  std::vector<std::vector<Index>> lo_;  // per axis: link origins touching the interior
  std::vector<Vec<double>> gmid_;
  std::vector<std::vector<Term>> cmid_;
  std::vector<Vec<double>> rmid_;

  template <class S>
  S transverse(const Mat<S>& grad, Index i, Index st, int b) const {
    return 0.5 * (grad(i, b) + grad(i + st, b));
  }
};

template <class S>
void FluxOperator::apply(const Vec<S>& u, Vec<S>& out) const {
  const Grid& g = *g_;
  const double ih = 1.0 / g.h();
  out.setZero(g.size());
  Mat<S> grad;
  if (nonlinear()) grad = gradient<S>(g, u);
  const int n = g.n();
  for (int a = 0; a < n; ++a) {
    const Index st = g.stride(a);
    const auto& lo = lo_[a];
    for (size_t e = 0; e < lo.size(); ++e) {
      const Index i = lo[e];
      const S qa = (u[i + st] - u[i]) * ih;
      S flux = gmid_[a][static_cast<Index>(e)] * qa;
      if (nonlinear()) {
        S q[3];
        for (int b = 0; b < n; ++b) q[b] = (b == a) ? qa : transverse<S>(grad, i, st, b);
        for (const Term& t : cmid_[a]) flux += t.mid[static_cast<Index>(e)] * q[t.k] * q[t.l];
        if (cubic_) {
          S q2 = 0.0;
          for (int b = 0; b < n; ++b) q2 += q[b] * q[b];
          flux += rmid_[a][static_cast<Index>(e)] * q2 * qa;
        }
      }
      flux *= ih;
      out[i] += flux;
      out[i + st] -= flux;
    }
  }
  for (Index b : g.boundary_nodes()) out[b] = 0.0;
}

template <class S>
void FluxOperator::apply_bilinear(const Vec<S>& u, const Vec<S>& v, Vec<S>& out) const {
  const Grid& g = *g_;
  const double ih = 1.0 / g.h();
  out.setZero(g.size());
  if (!quadratic_) return;
  const Mat<S> gu = gradient<S>(g, u);
  const Mat<S> gv = gradient<S>(g, v);
  const int n = g.n();
  for (int a = 0; a < n; ++a) {
    if (cmid_[a].empty()) continue;
    const Index st = g.stride(a);
    const auto& lo = lo_[a];
    for (size_t e = 0; e < lo.size(); ++e) {
      const Index i = lo[e];
      S qu[3], qv[3];
      for (int b = 0; b < n; ++b) {
        qu[b] = (b == a) ? (u[i + st] - u[i]) * ih : transverse<S>(gu, i, st, b);
        qv[b] = (b == a) ? (v[i + st] - v[i]) * ih : transverse<S>(gv, i, st, b);
      }
      S flux = 0.0;
      for (const Term& t : cmid_[a]) flux += t.mid[static_cast<Index>(e)] * qu[t.k] * qv[t.l];
      flux *= ih;
      out[i] += flux;
      out[i + st] -= flux;
    }
  }
  for (Index b : g.boundary_nodes()) out[b] = 0.0;
}

double max_stable_dt(const Grid& g, const Vec<double>& gamma, double cfl = 0.5);
void check_cfl(const Grid& g, const Vec<double>& gamma, double dt, double cfl = 0.5);

// Explicit leapfrog u^{m+1} = 2u^m - u^{m-1} + dt^2 accel(m, u^m) with a
// second-order Taylor start. accel writes interior values only; boundary
// values come from bc (zero when bc is empty).
template <class S, class Accel>
TimeSeries<S> leapfrog(const Grid& g, double dt, int steps, const Mat<S>& bc, const Vec<S>& phi0, const Vec<S>& phi1,
                       Accel&& accel, const std::string& stage) {
  TimeSeries<S> ts;
  ts.dt = dt;
  ts.frames.resize(g.size(), steps + 1);
  const auto& bnodes = g.boundary_nodes();
  auto impose = [&](Vec<S>& u, int m) {
    for (size_t k = 0; k < bnodes.size(); ++k)
      u[bnodes[k]] = bc.size() ? bc(static_cast<Index>(k), m) : S(0.0);
  };
  Vec<S> prev = phi0, cur, acc(g.size());
  impose(prev, 0);
  ts.frames.col(0) = prev;
  if (steps == 0) return ts;
  accel(0, prev, acc);
  cur = prev + dt * phi1 + (0.5 * dt * dt) * acc;
  impose(cur, 1);
  ts.frames.col(1) = cur;
  Vec<S> next(g.size());
  for (int m = 1; m < steps; ++m) {
    accel(m, cur, acc);
    next = 2.0 * cur - prev + (dt * dt) * acc;
    impose(next, m + 1);
    if (!next.allFinite()) throw numerical_error(stage, "non-finite solution at step " + std::to_string(m + 1));
    ts.frames.col(m + 1) = next;
    prev.swap(cur);
    cur.swap(next);
  }
  return ts;
}

// Nonlinear IBVP.
TimeSeries<double> solve_nonlinear(const Grid& g, const CoefficientSet& cs, const BoundaryTrace<double>& f,
                                   const Vec<double>& phi0, const Vec<double>& phi1, double dt, int steps);

// Linear wave equation with Dirichlet data and optional initial data; same
// code path as the nonlinear solver with c = 0 and no remainder.
template <class S>
TimeSeries<S> solve_linear_u1(const Grid& g, const Vec<double>& gamma, const BoundaryTrace<S>& f, double dt, int steps,
                              const Vec<S>* phi0 = nullptr, const Vec<S>* phi1 = nullptr) {
  check_cfl(g, gamma, dt);
  const FluxOperator op(g, gamma_only(g.n(), gamma));
  const Vec<S> z = Vec<S>::Zero(g.size());
  return leapfrog<S>(
      g, dt, steps, f.values, phi0 ? *phi0 : z, phi1 ? *phi1 : z,
      [&](int, const Vec<S>& u, Vec<S>& acc) { op.apply<S>(u, acc); }, "forward.u1");
}

// Zero-data linear wave equation with a volumetric source sampled per level.
template <class S, class Source>
TimeSeries<S> solve_with_source(const Grid& g, const Vec<double>& gamma, double dt, int steps, Source&& source,
                                const std::string& stage) {
  check_cfl(g, gamma, dt);
  const FluxOperator op(g, gamma_only(g.n(), gamma));
  const Vec<S> z = Vec<S>::Zero(g.size());
  Vec<S> src(g.size());
  return leapfrog<S>(
      g, dt, steps, Mat<S>(), z, z,
      [&](int m, const Vec<S>& u, Vec<S>& acc) {
        op.apply<S>(u, acc);
        source(m, src);
        for (Index i : g.interior_nodes()) acc[i] += src[i];
      },
      stage);
}

// u2: zero data, source div P(x, grad u1).
template <class S>
TimeSeries<S> solve_linear_u2(const Grid& g, const CoefficientSet& cs, const TimeSeries<S>& u1) {
  const FluxOperator op(g, cs);
  return solve_with_source<S>(
      g, cs.gamma, u1.dt, u1.steps(),
      [&](int m, Vec<S>& src) {
        const Vec<S> u = u1.frames.col(m);
        op.apply_bilinear<S>(u, u, src);
      },
      "forward.u2");
}

// nu . C(x, grad u) per boundary entry, nodal one-sided gradient.
template <class S>
Vec<S> dn_frame(const Grid& g, const CoefficientSet& cs, const Vec<S>& u) {
  const Mat<S> grad = gradient<S>(g, u);
  const auto& es = g.entries();
  Vec<S> out(static_cast<Index>(es.size()));
  const int n = g.n();
  for (size_t e = 0; e < es.size(); ++e) {
    const Face& f = g.faces()[es[e].face];
    const Index i = es[e].node;
    const int j = f.axis;
    S v = cs.gamma[i] * grad(i, j);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        if (cs.has_c(j, k, l)) v += cs.c[cs.slot(j, k, l)][i] * grad(i, k) * grad(i, l);
    if (cs.cubic) {
      S q2 = 0.0;
      for (int b = 0; b < n; ++b) q2 += grad(i, b) * grad(i, b);
      v += cs.r[i] * q2 * grad(i, j);
    }
    out[static_cast<Index>(e)] = f.normal() * v;
  }
  return out;
}

template <class S>
BoundaryTrace<S> dn_trace(const Grid& g, const CoefficientSet& cs, const TimeSeries<S>& run) {
  BoundaryTrace<S> t;
  t.kind = TraceKind::Entries;
  t.dt = run.dt;
  t.values.resize(static_cast<Index>(g.entries().size()), run.frames.cols());
  for (Index m = 0; m < run.frames.cols(); ++m) t.values.col(m) = dn_frame<S>(g, cs, Vec<S>(run.frames.col(m)));
  return t;
}

// nu . P(x, grad u) per entry (second-order DN correction).
template <class S>
Vec<S> quadratic_normal_frame(const Grid& g, const CoefficientSet& cs, const Vec<S>& u) {
  const CoefficientSet p = [&] {
    CoefficientSet c = cs;
    c.gamma.setZero();
    c.cubic = false;
    return c;
  }();
  return dn_frame<S>(g, p, u);
}

// Staggered discrete energy between levels m and m+1; conserved by leapfrog
// once forcing stops.
double discrete_energy(const Grid& g, const Vec<double>& gamma, const TimeSeries<double>& run, int m);

struct ExpansionReport {
  std::vector<double> epsilons;
  std::vector<double> residual_norms;  // sup_t H1 of u - eps u1 - eps^2 u2
  std::vector<double> w_over_eps;      // ||w|| / eps, w = residual / eps^2
  std::vector<double> dn_residuals;    // L2(boundary x time) of Lambda(eps f) - eps g1 - eps^2 g2
  double fitted_slope = 0.0;
  double dn_slope = 0.0;
};

ExpansionReport expansion_residual(const Grid& g, const CoefficientSet& cs, const BoundaryTrace<double>& f, double dt,
                                   int steps, const std::vector<double>& epsilons);

// Largest eps = eps_start * 2^-k for which solve_nonlinear completes.
double stable_epsilon(const Grid& g, const CoefficientSet& cs, const BoundaryTrace<double>& f, double dt, int steps,
                      double eps_start = 1.0, int max_halvings = 30);

// L2 over boundary entries and time levels (trapezoid in both).
template <class S>
double trace_norm(const Grid& g, const Mat<S>& values, double dt) {
  double acc = 0.0;
  const Index m = values.cols();
  for (Index k = 0; k < m; ++k) {
    const double wt = (k == 0 || k == m - 1) ? 0.5 * dt : dt;
    acc += wt * (values.col(k).array().abs2() * g.entry_weights().array()).sum();
  }
  return std::sqrt(acc);
}

}  // namespace nlw
