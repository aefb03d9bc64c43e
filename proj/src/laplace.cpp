#include "nlwave/laplace.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nlwave/fit.hpp"

namespace nlw {

namespace {

// A(z) = int_0^1 e^{-zv} (1 - v) dv, B(z) = int_0^1 e^{-zv} v dv.
std::pair<cplx, cplx> panel_factors(cplx z) {
  if (std::abs(z) < 0.5) {
    cplx a = 0.0, b = 0.0, p = 1.0;
    double fact = 1.0;  // k!
    for (int k = 0; k < 24; ++k) {
      if (k > 0) {
        p *= -z;
        fact *= k;
      }
      a += p / (fact * (k + 1) * (k + 2));
      b += p / (fact * (k + 2));
    }
    return {a, b};
  }
  const cplx e = std::exp(-z);
  return {(z - 1.0 + e) / (z * z), (1.0 - e - z * e) / (z * z)};
}

double max_frame(const Mat<double>& frames) {
  return frames.size() ? frames.cwiseAbs().maxCoeff() : 0.0;
}

Vec<cplx> interior_only(const Grid& g, const Vec<cplx>& v) {
  Vec<cplx> out = Vec<cplx>::Zero(g.size());
  for (Index i : g.interior_nodes()) out[i] = v[i];
  return out;
}

}  // namespace

double chi_cutoff(double u) {
  if (u <= 0.5) return 1.0;
  if (u >= 0.9) return 0.0;
  return 0.5 * (1.0 + std::cos(std::numbers::pi * (u - 0.5) / 0.4));
}

ChiProfile make_chi(int mu, double t0, double dt, int steps) {
  if (mu < 1) throw config_error("laplace.chi", "mu must be >= 1");
  if (!(dt > 0)) throw config_error("laplace.chi", "dt must be positive");
  if (0.4 * t0 / dt < 8.0)
    throw config_error("laplace.chi", "T0 = " + std::to_string(t0) + " leaves fewer than 8 samples in the cutoff ramp");
  ChiProfile chi;
  chi.mu = mu;
  chi.t0 = t0;
  chi.dt = dt;
  chi.values.resize(steps + 1);
  const double fact = std::tgamma(static_cast<double>(mu));
  for (int m = 0; m <= steps; ++m) {
    const double t = m * dt;
    chi.values[m] = std::pow(t, mu - 1) / fact * chi_cutoff(t / t0);
  }
  return chi;
}

bool in_sector(cplx tau, double kappa) { return tau.real() >= 1.0 && std::abs(tau.imag()) < kappa * tau.real(); }

void require_sector(cplx tau, const std::string& stage, double kappa) {
  if (!in_sector(tau, kappa))
    throw config_error(stage, "tau = (" + std::to_string(tau.real()) + ", " + std::to_string(tau.imag()) +
                                  ") lies outside the sector");
}

Vec<cplx> laplace_weights(cplx tau, double dt, int steps, double t0) {
  Vec<cplx> w = Vec<cplx>::Zero(steps + 1);
  if (steps == 0) return w;
  const auto [a, b] = panel_factors(tau * dt);
  for (int m = 0; m < steps; ++m) {
    const cplx e = dt * std::exp(-tau * (t0 + m * dt));
    w[m] += e * a;
    w[m + 1] += e * b;
  }
  return w;
}

Vec<cplx> laplace_transform(const Mat<double>& frames, double dt, cplx tau, double t0, double tol) {
  const int steps = static_cast<int>(frames.cols()) - 1;
  if (steps < 1) throw config_error("laplace", "transform needs at least two time levels");
  const bool compact = (frames.col(steps).array() == 0.0).all();
  if (!compact) {
    const double tail = std::exp(-tau.real() * (t0 + steps * dt)) * max_frame(frames);
    if (tail > tol) {
      std::ostringstream msg;
      msg << "truncation budget unmet: tail " << tail << " > " << tol << "; lengthen the run or raise Re tau";
      throw numerical_error("laplace", msg.str());
    }
  }
  return frames.cast<cplx>() * laplace_weights(tau, dt, steps, t0);
}

cplx chi_hat(const ChiProfile& chi, cplx tau, double tol) {
  Mat<double> row = chi.values.transpose();
  return laplace_transform(row, chi.dt, tau, 0.0, tol)[0];
}

TauSolver::TauSolver(const Grid& g, const Vec<double>& gamma, cplx tau) : g_(&g), tau_(tau) {
  const StiffnessBlocks kb = stiffness_blocks(g, gamma);
  Eigen::SparseMatrix<cplx> id(kb.ii.rows(), kb.ii.cols());
  id.setIdentity();
  a_ = kb.ii.cast<cplx>() + (tau * tau) * id;
  ib_ = kb.ib.cast<cplx>();
  k_ = stiffness_matrix(g, gamma);
  lu_.compute(a_);
  if (lu_.info() != Eigen::Success) throw numerical_error("laplace.elliptic", "sparse factorization failed");
}

Vec<cplx> TauSolver::solve_source(const Vec<cplx>& rhs) const {
  const Vec<cplx> r = restrict_interior<cplx>(*g_, rhs);
  const Vec<cplx> x = lu_.solve(r);
  const double scale = r.cwiseAbs().maxCoeff();
  if (scale > 0 && (a_ * x - r).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw numerical_error("laplace.elliptic", "linear solve residual above 1e-10");
  return extend_zero<cplx>(*g_, x);
}

Vec<cplx> TauSolver::solve(const Vec<cplx>& dirichlet) const {
  const Vec<cplx> rhs = -(ib_ * dirichlet);
  const double scale = rhs.size() ? rhs.cwiseAbs().maxCoeff() : 0.0;
  Vec<cplx> x = Vec<cplx>::Zero(rhs.size());
  if (scale > 0) {
    x = lu_.solve(rhs);
    if ((a_ * x - rhs).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw numerical_error("laplace.elliptic", "linear solve residual above 1e-10");
  }
  return extend<cplx>(*g_, x, dirichlet);
}

double TauSolver::residual(const Vec<cplx>& v) const {
  const Vec<cplx> kv = k_.cast<cplx>() * v;
  double num = 0.0, den = 0.0;
  for (Index i : g_->interior_nodes()) {
    num = std::max(num, std::abs(tau_ * tau_ * v[i] + kv[i]));
    den = std::max({den, std::abs(tau_ * tau_ * v[i]), std::abs(kv[i])});
  }
  return den > 0 ? num / den : 0.0;
}

Vec<cplx> solve_tau_elliptic(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& dirichlet) {
  require_sector(tau, "laplace.elliptic");
  return TauSolver(g, gamma, tau).solve(dirichlet);
}

CoefficientSet coefficient_difference(const CoefficientSet& a, const CoefficientSet& b) {
  if (a.n != b.n || a.gamma.size() != b.gamma.size())
    throw config_error("laplace.identity", "coefficient sets live on different grids");
  CoefficientSet d = gamma_only(a.n, Vec<double>::Zero(a.gamma.size()));
  for (size_t s = 0; s < a.c.size(); ++s) {
    const bool ha = a.c[s].size() > 0, hb = b.c[s].size() > 0;
    if (ha && hb)
      d.c[s] = a.c[s] - b.c[s];
    else if (ha)
      d.c[s] = a.c[s];
    else if (hb)
      d.c[s] = -b.c[s];
  }
  return d;
}

cplx bilinear_block(const Grid& g, const CoefficientSet& c, const Vec<cplx>& a, const Vec<cplx>& b,
                    const Vec<cplx>& w) {
  const int n = g.n();
  const double h = g.h(), vol = std::pow(h, n);
  const Mat<cplx> ga = gradient<cplx>(g, a), gb = gradient<cplx>(g, b);
  cplx sum = 0.0;
  for (int j = 0; j < n; ++j) {
    bool any = false;
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) any = any || c.has_c(j, k, l);
    if (!any) continue;
    const Index st = g.stride(j);
    for (Index i = 0; i < g.size(); ++i) {
      if (g.multi(i)[j] == g.dims() - 1) continue;
      cplx qa[3], qb[3];
      for (int m = 0; m < n; ++m) {
        qa[m] = (m == j) ? (a[i + st] - a[i]) / h : 0.5 * (ga(i, m) + ga(i + st, m));
        qb[m] = (m == j) ? (b[i + st] - b[i]) / h : 0.5 * (gb(i, m) + gb(i + st, m));
      }
      cplx link = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
          if (!c.has_c(j, k, l)) continue;
          const double cm = midpoint(c.c[c.slot(j, k, l)], i, st);
          link += cm * (qa[k] * qb[l] + qb[k] * qa[l]);
        }
      sum += link * (w[i + st] - w[i]) / h;
    }
  }
  return -vol * sum;
}

TauFields transform_fields(const TimeSeries<double>& uf, const TimeSeries<double>& ug,
                           const IntegratedField& field, const Vec<cplx>& w, cplx tau, double tol) {
  TauFields f;
  f.tau = tau;
  f.w = w;
  f.uf = laplace_transform(uf, tau, tol);
  f.ug = laplace_transform(ug, tau, tol);
  f.uf_dot = laplace_transform(time_derivative(uf.frames, uf.dt), uf.dt, tau, uf.t0, tol);
  const Mat<double> dg = time_derivative(ug.frames, ug.dt);
  Mat<double> tg = ug.frames, t2dg = dg;
  for (Index m = 0; m < tg.cols(); ++m) {
    const double t = ug.t0 + m * ug.dt;
    tg.col(m) *= t;
    t2dg.col(m) *= t * t;
  }
  f.f_hat = laplace_transform(tg, ug.dt, tau, ug.t0, tol);
  f.g_hat = laplace_transform(t2dg, ug.dt, tau, ug.t0, tol);
  f.u2m1 = laplace_transform(field.u2m1, field.dt, tau, 0.0, tol);
  f.conv = laplace_transform(field.conv, field.dt, tau, 0.0, tol);
  for (int m = 0; m < 4; ++m) {
    f.exact[m] = laplace_transform(field.exact[m], field.dt, tau, 0.0, tol);
    f.approx[m] = laplace_transform(field.approx[m], field.dt, tau, 0.0, tol);
  }
  return f;
}

cplx integral_identity_eval(const Grid& g, const CoefficientSet& c, const Vec<cplx>& uf, const Vec<cplx>& ug,
                            const Vec<cplx>& w, const std::array<Vec<cplx>, 4>& terms) {
  cplx v = 2.0 * bilinear_block(g, c, uf, ug, w);
  for (const auto& t : terms)
    if (t.size()) v += integrate<cplx>(g, Vec<cplx>(t.cwiseProduct(w)));
  return v;
}

cplx integral_identity_eval(const Grid& g, const CoefficientSet& c, const TauFields& f) {
  return integral_identity_eval(g, c, f.uf, f.ug, f.w, f.exact);
}

cplx identity_volume_oracle(const Grid& g, const CoefficientSet& c, const Vec<cplx>& uf, const Vec<cplx>& ug,
                            const Vec<cplx>& w, const std::array<Vec<cplx>, 4>& terms) {
  CoefficientSet full = c;
  if (full.gamma.size() != g.size()) full.gamma = Vec<double>::Zero(g.size());
  const FluxOperator flux(g, full);
  Vec<cplx> ab, ba;
  flux.apply_bilinear<cplx>(uf, ug, ab);
  flux.apply_bilinear<cplx>(ug, uf, ba);
  Vec<cplx> integrand = 2.0 * (ab + ba);
  for (const auto& t : terms)
    if (t.size()) integrand += interior_only(g, t);
  Vec<cplx> weighted = integrand.cwiseProduct(w);
  return integrate<cplx>(g, weighted);
}

BlockWeights derived_weights() { return {0.0, 4.0, -2.0, 1.0}; }
BlockWeights stated_weights() { return {8.0, -4.0, -2.0, -1.0}; }

PostLemmaValue post_lemma_identity_eval(const Grid& g, const CoefficientSet& c, const TauFields& f) {
  const std::array<cplx, 4> blocks{bilinear_block(g, c, f.uf, f.ug, f.w), bilinear_block(g, c, f.uf_dot, f.f_hat, f.w),
                                   bilinear_block(g, c, f.uf_dot, f.f_hat, f.w),
                                   bilinear_block(g, c, f.uf_dot, f.g_hat, f.w)};
  PostLemmaValue r;
  const BlockWeights dw = derived_weights(), sw = stated_weights();
  r.value = r.stated = 0.0;
  for (int b = 0; b < 4; ++b) {
    r.value += dw[b] * blocks[b];
    r.stated += sw[b] * blocks[b];
  }
  r.exact = integral_identity_eval(g, c, f);
  r.dominant = integral_identity_eval(g, c, f.uf, f.ug, f.w, f.approx);
  const double scale = std::abs(r.dominant);
  if (scale > 0) {
    r.defect = std::abs(r.exact - r.dominant) / scale;
    r.product_gap = std::abs(r.value - r.dominant) / scale;
    r.stated_defect = std::abs(r.exact - r.stated) / scale;
    r.stated_gap = std::abs(r.stated - r.dominant) / scale;
  }
  return r;
}

DominanceReport dominant_part_diag(const Grid& g, const IntegratedField& field, const std::vector<double>& taus,
                                   int term, double tol) {
  if (taus.size() < 4) throw config_error("laplace.dominance", "tau sweep needs at least 4 points");
  if (term < 0 || term > 3) throw config_error("laplace.dominance", "term index must be 0..3");
  DominanceReport rep;
  rep.taus = taus;
  for (double t : taus) {
    require_sector(t, "laplace.dominance");
    const Vec<cplx> ex = laplace_transform(field.exact[term], field.dt, t, 0.0, tol);
    const Vec<cplx> ap = laplace_transform(field.approx[term], field.dt, t, 0.0, tol);
    const double den = l2_norm<cplx>(g, ap);
    if (!(den > 0)) {
      rep.degenerate = true;
      rep.ratios.push_back(0.0);
      continue;
    }
    rep.ratios.push_back(l2_norm<cplx>(g, Vec<cplx>(ex - ap)) / den);
  }
  if (!rep.degenerate) rep.slope = loglog_slope(rep.taus, rep.ratios);
  return rep;
}

double mean_value_defect(const std::function<cplx(cplx)>& f, cplx center, double radius, int points) {
  cplx mean = 0.0;
  for (int k = 0; k < points; ++k)
    mean += f(center + radius * std::polar(1.0, 2.0 * std::numbers::pi * k / points));
  mean /= static_cast<double>(points);
  const cplx f0 = f(center);
  return std::abs(f0 - mean) / std::abs(f0);
}

double tau_domain_residual(const Grid& g, const Vec<double>& gamma, const TauFields& f) {
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, gamma);
  Vec<cplx> rhs = f.conv;
  for (const auto& t : f.exact) rhs += t;
  const Vec<cplx> lhs = f.tau * f.tau * f.u2m1 + k.cast<cplx>() * f.u2m1;
  const double den = l2_norm<cplx>(g, interior_only(g, rhs));
  return den > 0 ? l2_norm<cplx>(g, interior_only(g, Vec<cplx>(lhs - rhs))) / den : 0.0;
}

}  // namespace nlw
