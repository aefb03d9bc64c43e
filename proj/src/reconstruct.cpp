#include "nlwave/reconstruct.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "nlwave/fit.hpp"

namespace nlw {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Runs body(i) for i in [0, count) on up to jobs threads. Every index writes
// its own slot, so results do not depend on scheduling; the first failing
// index (lowest i) is rethrown.
template <class Body>
void parallel_for(int count, int jobs, Body&& body) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  int failed_at = count;
  std::exception_ptr failure;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, count); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string sci(double v) {
  std::ostringstream o;
  o.precision(3);
  o << std::scientific << v;
  return o.str();
}

// Link origins per axis whose link touches an interior node.
std::vector<std::vector<Index>> interior_links(const Grid& g) {
  std::vector<std::vector<Index>> out(static_cast<size_t>(g.n()));
  for (int a = 0; a < g.n(); ++a) {
    const Index st = g.stride(a);
    for (Index i = 0; i < g.size(); ++i) {
      if (g.multi(i)[a] == g.dims() - 1) continue;
      if (g.on_boundary(i) && g.on_boundary(i + st)) continue;
      out[static_cast<size_t>(a)].push_back(i);
    }
  }
  return out;
}

// Link gradient: axis component is the link difference, transverse components
// average the nodal gradient at both ends (as in FluxOperator).
inline void link_q(const Vec<cplx>& u, const Mat<cplx>& grad, Index i, Index st, int axis, int n, double ih,
                   cplx* q) {
  for (int b = 0; b < n; ++b) q[b] = (b == axis) ? (u[i + st] - u[i]) * ih : 0.5 * (grad(i, b) + grad(i + st, b));
}

}  // namespace

std::vector<std::array<int, 2>> sym_pairs(int n) {
  std::vector<std::array<int, 2>> out;
  for (int k = 0; k < n; ++k)
    for (int l = k; l < n; ++l) out.push_back({k, l});
  return out;
}

Vec<cplx> phase_factor(const Grid& g, const CPoint& phase) {
  Vec<cplx> out(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    cplx ph = 0.0;
    for (int d = 0; d < g.n(); ++d) ph += phase[d] * x[d];
    out[i] = std::exp(ph);
  }
  return out;
}

Mat<cplx> phased_gradient(const Grid& g, const CPoint& phase, const Vec<cplx>& envelope) {
  const Mat<cplx> d = gradient<cplx>(g, envelope);
  const Vec<cplx> e = phase_factor(g, phase);
  Mat<cplx> out(g.size(), g.n());
  for (int a = 0; a < g.n(); ++a) out.col(a) = e.cwiseProduct(phase[a] * envelope + d.col(a));
  return out;
}

NodalKernel nodal_kernel(const Grid& g, const Mat<cplx>& df, const Mat<cplx>& dg, const Mat<cplx>& dw) {
  const int n = g.n();
  const auto pairs = sym_pairs(n);
  const Index np = static_cast<Index>(pairs.size());
  NodalKernel k;
  k.n = n;
  k.g.resize(g.size(), n * np);
  const Vec<double>& w = g.quadrature_weights();
  for (Index p = 0; p < np; ++p) {
    const int a = pairs[static_cast<size_t>(p)][0], b = pairs[static_cast<size_t>(p)][1];
    const double mult = (a == b) ? -2.0 : -4.0;
    const Vec<cplx> x =
        (mult * w.cast<cplx>().array() * (df.col(a).array() * dg.col(b).array() + df.col(b).array() * dg.col(a).array()))
            .matrix();
    for (int j = 0; j < n; ++j) k.g.col(j * np + p) = x.cwiseProduct(dw.col(j));
  }
  return k;
}

cplx apply_nodal_kernel(const NodalKernel& k, const SymmetrizedCoefficients& s) {
  const auto pairs = sym_pairs(k.n);
  const Index np = static_cast<Index>(pairs.size());
  cplx sum = 0.0;
  for (int j = 0; j < k.n; ++j)
    for (Index p = 0; p < np; ++p) {
      const Vec<double>& f = s.s[s.slot(j, pairs[static_cast<size_t>(p)][0], pairs[static_cast<size_t>(p)][1])];
      sum += (k.g.col(j * np + p).array() * f.cast<cplx>().array()).sum();
    }
  return sum;
}

cplx volume_form(const Grid& g, const SymmetrizedCoefficients& s, const Mat<cplx>& df, const Mat<cplx>& dg,
                 const Mat<cplx>& dw) {
  return apply_nodal_kernel(nodal_kernel(g, df, dg, dw), s);
}

MeasureMode parse_mode(const std::string& name) {
  if (name == "oracle") return MeasureMode::Oracle;
  if (name == "boundary") return MeasureMode::Boundary;
  throw config_error("reconstruct", "unknown mode '" + name + "' (oracle or boundary)");
}

std::string mode_name(MeasureMode mode) { return mode == MeasureMode::Oracle ? "oracle" : "boundary"; }

double tau_residual(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& w) {
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, gamma);
  const Vec<cplx> kw = k.cast<cplx>() * w;
  double num = 0.0, den = 0.0;
  for (Index i : g.interior_nodes()) {
    num = std::max(num, std::abs(tau * tau * w[i] + kw[i]));
    den = std::max({den, std::abs(tau * tau * w[i]), std::abs(kw[i])});
  }
  return den > 0 ? num / den : 0.0;
}

namespace {

void require_test_solution(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& w, double w_tol) {
  const double r = tau_residual(g, gamma, tau, w);
  if (!(r <= w_tol))
    throw numerical_error("reconstruct.measure", "test solution residual " + sci(r) + " above " + sci(w_tol));
}

}  // namespace

MeasurementFunctional boundary_measurement(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& u2m1,
                                           const Vec<cplx>& w, double w_tol, Conormal conormal) {
  require_test_solution(g, gamma, tau, w, w_tol);
  if (conormal == Conormal::Flux) {
    const StiffnessBlocks kb = stiffness_blocks(g, gamma);
    const Vec<cplx> kw = kb.ib.cast<cplx>() * restrict_boundary<cplx>(g, w);
    const cplx v = (restrict_interior<cplx>(g, u2m1).array() * kw.array()).sum() * std::pow(g.h(), g.n());
    return {tau, MeasureMode::Boundary, v};
  }
  const Vec<cplx> dn = dn_frame<cplx>(g, gamma_only(g.n(), gamma), u2m1);
  Vec<cplx> vals(dn.size());
  const auto& es = g.entries();
  for (size_t e = 0; e < es.size(); ++e) vals[static_cast<Index>(e)] = dn[static_cast<Index>(e)] * w[es[e].node];
  return {tau, MeasureMode::Boundary, boundary_integrate<cplx>(g, vals)};
}

MeasurementFunctional volume_measurement(const Grid& g, const Vec<double>& gamma, const SymmetrizedCoefficients& s,
                                         cplx tau, const Vec<cplx>& uf, const Vec<cplx>& ug, const Vec<cplx>& w,
                                         double w_tol) {
  require_test_solution(g, gamma, tau, w, w_tol);
  return {tau, MeasureMode::Oracle,
          -volume_form(g, s, gradient<cplx>(g, uf), gradient<cplx>(g, ug), gradient<cplx>(g, w))};
}

Mat<cplx> laplace_tails(const Mat<cplx>& frames, double dt, cplx tau) {
  const Index steps = frames.cols() - 1;
  const Vec<cplx> w1 = laplace_weights(tau, dt, 1, 0.0);
  Mat<cplx> tail = Mat<cplx>::Zero(frames.rows(), steps + 1);
  for (Index m = steps - 1; m >= 0; --m) {
    const cplx e = std::exp(-tau * (static_cast<double>(m) * dt));
    tail.col(m) = tail.col(m + 1) + (e * w1[0]) * frames.col(m) + (e * w1[1]) * frames.col(m + 1);
  }
  return tail;
}

ProbeRun probe_run(const Grid& g, const Vec<double>& gamma, const Vec<cplx>& ftilde, const Vec<double>& chi, double dt,
                   cplx tau, double tol) {
  const int steps = static_cast<int>(chi.size()) - 1;
  const double tail = std::exp(-tau.real() * steps * dt);
  if (tail > tol)
    throw numerical_error("reconstruct.probe", "truncation factor " + sci(tail) + " above " + sci(tol));
  const BoundaryTrace<cplx> f = probe_trace<cplx>(restrict_boundary<cplx>(g, ftilde), chi, dt);
  const TimeSeries<cplx> run = solve_linear_u1<cplx>(g, gamma, f, dt, steps);
  ProbeRun out;
  out.tail = laplace_tails(run.frames, dt, tau);
  out.hat = out.tail.col(0);
  return out;
}

Mat<cplx> adjoint_run(const Grid& g, const Vec<double>& gamma, const Vec<cplx>& w, double dt, int steps) {
  const StiffnessBlocks kb = stiffness_blocks(g, gamma);
  const Vec<cplx> b = kb.ib.cast<cplx>() * restrict_boundary<cplx>(g, w);
  const Vec<cplx> v0 = extend_zero<cplx>(g, b);
  const Vec<cplx> z = Vec<cplx>::Zero(g.size());
  BoundaryTrace<cplx> none;
  none.dt = dt;
  return solve_linear_u1<cplx>(g, gamma, none, dt, steps, &z, &v0).frames;
}

Vec<cplx> reversed_source_run(const Grid& g, const CoefficientSet& cs, const Vec<cplx>& uf, const Mat<cplx>& tail,
                              double dt) {
  const int steps = static_cast<int>(tail.cols()) - 1;
  const FluxOperator op(g, cs);
  Vec<cplx> ab, ba;
  const TimeSeries<cplx> run = solve_with_source<cplx>(
      g, cs.gamma, dt, steps,
      [&](int m, Vec<cplx>& src) {
        const Vec<cplx> t = tail.col(steps - m);
        op.apply_bilinear<cplx>(uf, t, ab);
        op.apply_bilinear<cplx>(t, uf, ba);
        src = 2.0 * (ab + ba);
      },
      "reconstruct.reversed");
  return run.frames.col(steps);
}

namespace {

// Kernels for every (uf, adjoint) combination with one shared tail series.
std::vector<std::vector<LinkKernel>> link_kernels(const Grid& g, const std::vector<const Vec<cplx>*>& ufs,
                                                  const Mat<cplx>& tail, const std::vector<const Mat<cplx>*>& adjoints,
                                                  double dt) {
  const int n = g.n();
  const double h = g.h(), ih = 1.0 / h, vol = std::pow(h, n);
  const auto pairs = sym_pairs(n);
  const int np = static_cast<int>(pairs.size());
  const auto links = interior_links(g);
  const int steps = static_cast<int>(tail.cols()) - 1;
  const size_t nu = ufs.size(), nw = adjoints.size();

  // Link gradients of each uf, fixed over p.
  std::vector<std::vector<Mat<cplx>>> qu(nu);
  for (size_t u = 0; u < nu; ++u) {
    const Mat<cplx> gu = gradient<cplx>(g, *ufs[u]);
    for (int a = 0; a < n; ++a) {
      const auto& lo = links[static_cast<size_t>(a)];
      Mat<cplx> q(static_cast<Index>(lo.size()), n);
      cplx tmp[3];
      for (size_t e = 0; e < lo.size(); ++e) {
        link_q(*ufs[u], gu, lo[e], g.stride(a), a, n, ih, tmp);
        for (int b = 0; b < n; ++b) q(static_cast<Index>(e), b) = tmp[b];
      }
      qu[u].push_back(std::move(q));
    }
  }

  std::vector<std::vector<LinkKernel>> out(nu, std::vector<LinkKernel>(nw));
  for (auto& row : out)
    for (auto& k : row) {
      k.n = n;
      k.links = links;
      for (int a = 0; a < n; ++a) k.h.push_back(Mat<cplx>::Zero(static_cast<Index>(links[static_cast<size_t>(a)].size()), np));
    }

  std::vector<cplx> x(static_cast<size_t>(np));
  for (int p = 1; p <= steps; ++p) {
    const double wp = (p == steps ? 0.5 : 1.0) * dt * 2.0 * vol * ih;
    const Vec<cplx> t = tail.col(p);
    const Mat<cplx> gt = gradient<cplx>(g, t);
    for (int a = 0; a < n; ++a) {
      const Index st = g.stride(a);
      const auto& lo = links[static_cast<size_t>(a)];
      for (size_t e = 0; e < lo.size(); ++e) {
        const Index i = lo[e];
        cplx qt[3];
        link_q(t, gt, i, st, a, n, ih, qt);
        for (size_t w = 0; w < nw; ++w) {
          const Mat<cplx>& W = *adjoints[w];
          const cplx dw = wp * (W(i, p) - W(i + st, p));
          if (dw == cplx(0.0)) continue;
          for (size_t u = 0; u < nu; ++u) {
            const Mat<cplx>& q = qu[u][static_cast<size_t>(a)];
            auto hrow = out[u][w].h[static_cast<size_t>(a)].row(static_cast<Index>(e));
            for (int pp = 0; pp < np; ++pp) {
              const int k = pairs[static_cast<size_t>(pp)][0], l = pairs[static_cast<size_t>(pp)][1];
              const cplx xs = q(static_cast<Index>(e), k) * qt[l] + q(static_cast<Index>(e), l) * qt[k];
              hrow[pp] += (k == l ? 1.0 : 2.0) * xs * dw;
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

LinkKernel link_kernel(const Grid& g, const Vec<cplx>& uf, const Mat<cplx>& tail, const Mat<cplx>& adjoint, double dt) {
  return link_kernels(g, {&uf}, tail, {&adjoint}, dt)[0][0];
}

cplx apply_link_kernel(const Grid& g, const LinkKernel& k, const SymmetrizedCoefficients& s) {
  const auto pairs = sym_pairs(k.n);
  cplx sum = 0.0;
  for (int a = 0; a < k.n; ++a) {
    const Index st = g.stride(a);
    const auto& lo = k.links[static_cast<size_t>(a)];
    for (size_t p = 0; p < pairs.size(); ++p) {
      const Vec<double>& f = s.s[s.slot(a, pairs[p][0], pairs[p][1])];
      for (size_t e = 0; e < lo.size(); ++e) {
        const double c = midpoint(f, lo[e], st);
        if (c != 0.0) sum += c * k.h[static_cast<size_t>(a)](static_cast<Index>(e), static_cast<Index>(p));
      }
    }
  }
  return sum;
}

Vec<double> richardson_weights(const std::vector<double>& s) {
  const size_t m = s.size();
  if (m == 0) throw config_error("reconstruct.richardson", "empty s sweep");
  Vec<double> w(static_cast<Index>(m));
  for (size_t i = 0; i < m; ++i) {
    double v = 1.0;
    const double xi = 1.0 / s[i];
    for (size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double xj = 1.0 / s[j];
      if (xi == xj) throw config_error("reconstruct.richardson", "repeated s value");
      v *= (0.0 - xj) / (xi - xj);
    }
    w[static_cast<Index>(i)] = v;
  }
  return w;
}

RichardsonResult richardson(const std::vector<double>& s, const std::vector<cplx>& values) {
  if (s.size() != values.size()) throw config_error("reconstruct.richardson", "s and values differ in length");
  std::vector<size_t> order(s.size());
  for (size_t i = 0; i < s.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return s[a] > s[b]; });
  RichardsonResult r;
  for (size_t k = 1; k <= s.size(); ++k) {
    std::vector<double> sub;
    for (size_t i = 0; i < k; ++i) sub.push_back(s[order[i]]);
    const Vec<double> w = richardson_weights(sub);
    cplx v = 0.0;
    for (size_t i = 0; i < k; ++i) v += w[static_cast<Index>(i)] * values[order[i]];
    r.stages.push_back(v);
  }
  r.value = r.stages.back();
  for (const cplx& st : r.stages) r.spread = std::max(r.spread, std::abs(st - r.value));
  return r;
}

PanelFrame panel_frame(const Point& a) {
  PanelFrame f;
  const double na = a.norm();
  if (na == 0.0) return f;
  const Point u = a / na;
  // Start from the coordinate axis least aligned with a.
  Index axis = 0;
  u.cwiseAbs().minCoeff(&axis);
  Point e = Point::Zero();
  e[axis] = 1.0;
  f.eta = (e - e.dot(u) * u).normalized();
  f.xi = u.cross(f.eta).normalized();
  return f;
}

std::vector<Point> half_a_grid(double a_max, double spacing) {
  if (!(spacing > 0)) throw config_error("reconstruct", "a spacing must be positive");
  const int m = static_cast<int>(std::floor(a_max / spacing + 1e-12));
  std::vector<Point> out;
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j)
      for (int k = -m; k <= m; ++k) {
        // Keep the lexicographically positive member of each +-pair.
        const bool positive = i > 0 || (i == 0 && (j > 0 || (j == 0 && k >= 0)));
        if (!positive) continue;
        const Point a = spacing * Point(i, j, k);
        if (a.norm() <= a_max + 1e-12) out.push_back(a);
      }
  return out;
}

Index BumpBasis::unknowns() const {
  return static_cast<Index>(centers.size()) * n * static_cast<Index>(sym_pairs(n).size());
}

std::vector<Point> lattice_centers(const std::vector<double>& ticks, int n) {
  std::vector<Point> out;
  for (double z : (n == 3 ? ticks : std::vector<double>{0.0}))
    for (double y : ticks)
      for (double x : ticks) out.emplace_back(x, y, z);
  return out;
}

BumpBasis make_basis(const Grid& g, const std::vector<Point>& centers, double radius) {
  if (centers.empty()) throw config_error("reconstruct.basis", "no basis centers");
  BumpBasis b;
  b.centers = centers;
  b.radius = radius;
  b.n = g.n();
  for (const Point& c : centers) {
    Bump bump;
    bump.center = c;
    bump.radius = radius;
    bump.amp = 1.0;
    b.fields.push_back(sample<double>(g, [&](const Point& x) { return bump(x, g.n()); }));
  }
  return b;
}

SymmetrizedCoefficients basis_synthesis(const Grid& g, const BumpBasis& basis, const Vec<double>& x) {
  const int n = basis.n;
  const auto pairs = sym_pairs(n);
  const Index np = static_cast<Index>(pairs.size());
  if (x.size() != basis.unknowns()) throw config_error("reconstruct.basis", "coefficient vector size mismatch");
  SymmetrizedCoefficients s = zero_symmetrized(n, g.size());
  for (size_t c = 0; c < basis.centers.size(); ++c)
    for (int j = 0; j < n; ++j)
      for (Index p = 0; p < np; ++p) {
        const double v = x[(static_cast<Index>(c) * n + j) * np + p];
        if (v == 0.0) continue;
        s.s[s.slot(j, pairs[static_cast<size_t>(p)][0], pairs[static_cast<size_t>(p)][1])] += v * basis.fields[c];
      }
  for (int j = 0; j < n; ++j)
    for (const auto& pr : pairs)
      if (pr[0] != pr[1]) s.s[s.slot(j, pr[1], pr[0])] = s.s[s.slot(j, pr[0], pr[1])];
  return s;
}

namespace {

// Sparse view of the basis: per center the nonzero nodes, and per axis the
// links with nonzero midpoint value.
struct BasisSupport {
  std::vector<std::vector<std::pair<Index, double>>> nodes;
  std::vector<std::vector<std::vector<std::pair<Index, double>>>> links;  // [axis][center]
};

BasisSupport basis_support(const Grid& g, const BumpBasis& basis) {
  BasisSupport s;
  const auto links = interior_links(g);
  for (const auto& f : basis.fields) {
    std::vector<std::pair<Index, double>> nz;
    for (Index i = 0; i < f.size(); ++i)
      if (f[i] != 0.0) nz.emplace_back(i, f[i]);
    s.nodes.push_back(std::move(nz));
  }
  s.links.resize(static_cast<size_t>(g.n()));
  for (int a = 0; a < g.n(); ++a) {
    const Index st = g.stride(a);
    const auto& lo = links[static_cast<size_t>(a)];
    for (const auto& f : basis.fields) {
      std::vector<std::pair<Index, double>> nz;
      for (size_t e = 0; e < lo.size(); ++e) {
        const double m = midpoint(f, lo[e], st);
        if (m != 0.0) nz.emplace_back(static_cast<Index>(e), m);
      }
      s.links[static_cast<size_t>(a)].push_back(std::move(nz));
    }
  }
  return s;
}

Vec<cplx> reduce_nodal(const NodalKernel& k, const BasisSupport& sup, Index unknowns) {
  const Index np = k.g.cols() / k.n;
  Vec<cplx> out = Vec<cplx>::Zero(unknowns);
  for (size_t c = 0; c < sup.nodes.size(); ++c)
    for (int j = 0; j < k.n; ++j)
      for (Index p = 0; p < np; ++p) {
        cplx acc = 0.0;
        for (const auto& [i, b] : sup.nodes[c]) acc += b * k.g(i, j * np + p);
        out[(static_cast<Index>(c) * k.n + j) * np + p] = acc;
      }
  return out;
}

Vec<cplx> reduce_links(const LinkKernel& k, const BasisSupport& sup, Index unknowns) {
  const Index np = k.h[0].cols();
  Vec<cplx> out = Vec<cplx>::Zero(unknowns);
  for (size_t c = 0; c < sup.nodes.size(); ++c)
    for (int j = 0; j < k.n; ++j)
      for (Index p = 0; p < np; ++p) {
        cplx acc = 0.0;
        for (const auto& [e, b] : sup.links[static_cast<size_t>(j)][c]) acc += b * k.h[static_cast<size_t>(j)](e, p);
        out[(static_cast<Index>(c) * k.n + j) * np + p] = acc;
      }
  return out;
}

// Raw per-(a, s) values before extrapolation, for one mode.
struct RawBlock {
  Mat<cplx> data;   // rows_per_a x truths
  Mat<cplx> model;  // rows_per_a x unknowns
  Vec<cplx> cal_data, cal_model;
};

struct TestField {
  Vec<cplx> w;     // real test solution as a complex vector
  Mat<cplx> dw;    // nodal gradient
  Vec<cplx> hat;   // boundary route: transform of its probe run
  Mat<cplx> adj;   // boundary route: adjoint run
};

}  // namespace

std::vector<FourierPanel> fourier_panels(const PanelProblem& prob, const BumpBasis& basis,
                                         const std::vector<MeasureMode>& modes) {
  const auto t_start = std::chrono::steady_clock::now();
  if (!prob.grid) throw config_error("reconstruct", "panel problem has no grid");
  const Grid& g = *prob.grid;
  const ReconstructOptions& opt = prob.opt;
  const int n = g.n();
  if (n != 3) throw config_error("reconstruct.panel", "Fourier panels need n = 3");
  if (modes.empty()) throw config_error("reconstruct.panel", "no measurement mode requested");
  if (std::find(modes.begin(), modes.end(), MeasureMode::Oracle) != modes.end() && opt.s_values.size() < 3)
    throw config_error("reconstruct.panel", "s sweep needs at least 3 values");
  require_sector(opt.tau, "reconstruct.panel");
  const cplx tau = opt.tau;
  const bool want_oracle = std::find(modes.begin(), modes.end(), MeasureMode::Oracle) != modes.end();
  const bool want_boundary = std::find(modes.begin(), modes.end(), MeasureMode::Boundary) != modes.end();
  const double oracle_a_max = opt.a_max > 0 ? opt.a_max : kPi / (2.0 * g.h());
  if (want_boundary && opt.boundary_s_values.empty()) throw config_error("reconstruct.panel", "empty boundary s sweep");
  // Union of the per-mode a-grids and s sweeps; each (a, s) is solved once.
  const double a_max_mode[2] = {oracle_a_max, opt.boundary_a_max};
  const std::vector<double>* s_mode[2] = {&opt.s_values, &opt.boundary_s_values};
  const bool want[2] = {want_oracle, want_boundary};
  const std::vector<Point> as =
      half_a_grid(std::max(want_oracle ? oracle_a_max : 0.0, want_boundary ? opt.boundary_a_max : 0.0), opt.a_spacing);
  std::vector<double> svals;
  for (int mi = 0; mi < 2; ++mi)
    if (want[mi]) svals.insert(svals.end(), s_mode[mi]->begin(), s_mode[mi]->end());
  std::sort(svals.begin(), svals.end());
  svals.erase(std::unique(svals.begin(), svals.end()), svals.end());
  const int ns = static_cast<int>(svals.size());
  auto uses_a = [&](int mi, const Point& a) { return want[mi] && a.norm() <= a_max_mode[mi] + 1e-12; };
  auto uses_s = [&](int mi, double s) {
    return want[mi] && std::find(s_mode[mi]->begin(), s_mode[mi]->end(), s) != s_mode[mi]->end();
  };
  const Index nu = basis.unknowns();
  const Index nt = static_cast<Index>(prob.truths.size());
  const BasisSupport sup = basis_support(g, basis);

  // Real test solutions: real parts of the independent family.
  const FamilyReport fam = independent_family(g, prob.gamma, tau, opt.family_r, {}, 0.25, opt.cgo);
  std::vector<TestField> tests;
  for (const CgoSolution& v : fam.v) {
    TestField t;
    const Vec<cplx> full = v.field(g);
    t.w = full.real().cast<cplx>();
    t.dw = phased_gradient(g, v.phase, v.envelope()).real().cast<cplx>();
    require_test_solution(g, prob.gamma, tau, t.w, opt.w_tol);
    tests.push_back(std::move(t));
  }
  const int nw = static_cast<int>(tests.size());
  const int rows_per_a = 2 * nw;

  // Time grid of the boundary route.
  double dt = 0.0;
  int steps = 0;
  Vec<double> chi;
  std::vector<CoefficientSet> truth_sets;
  CoefficientSet cal_set;
  if (want_boundary) {
    dt = max_stable_dt(g, prob.gamma, opt.cfl);
    const double horizon = 0.9 * opt.chi_t0 + std::log(1.0 / opt.trunc_tol) / tau.real();
    steps = static_cast<int>(std::ceil(horizon / dt));
    chi = make_chi(opt.chi_mu, opt.chi_t0, dt, steps).values;
    for (const auto& t : prob.truths) truth_sets.push_back(with_symmetric_c(gamma_only(n, prob.gamma), t));
    cal_set = with_symmetric_c(gamma_only(n, prob.gamma), prob.calibration);
    for (TestField& t : tests) {
      t.hat = probe_run(g, prob.gamma, t.w, chi, dt, tau, opt.trunc_tol).hat;
      t.adj = adjoint_run(g, prob.gamma, t.w, dt, steps);
    }
  }

  // raw[mode][a][s]
  const int na = static_cast<int>(as.size());
  std::vector<std::vector<std::vector<RawBlock>>> raw(
      2, std::vector<std::vector<RawBlock>>(static_cast<size_t>(na), std::vector<RawBlock>(static_cast<size_t>(ns))));
  const Vec<cplx> mc = prob.gamma.array().rsqrt().matrix().cast<cplx>();

  parallel_for(na, opt.jobs, [&](int ia) {
    const Point& a = as[static_cast<size_t>(ia)];
    const PanelFrame fr = panel_frame(a);
    for (int is = 0; is < ns; ++is) {
      const double s = svals[static_cast<size_t>(is)];
      const double norm = 1.0 / (s * s);
      const bool do_oracle = uses_a(0, a) && uses_s(0, s);
      const bool do_boundary = uses_a(1, a) && uses_s(1, s);
      if (!do_oracle && !do_boundary) continue;
      const ZetaPair zp = make_zeta_pair(a, fr.xi, fr.eta, s, n);
      const CgoSolution c1 = solve_remainder(g, prob.gamma, tau, zp.zeta1, opt.cgo);
      const CgoSolution c2 = solve_remainder(g, prob.gamma, tau, zp.zeta2, opt.cgo);

      if (do_oracle) {
        RawBlock& rb = raw[0][static_cast<size_t>(ia)][static_cast<size_t>(is)];
        rb.data.resize(rows_per_a, nt);
        rb.model.resize(rows_per_a, nu);
        rb.cal_data.resize(rows_per_a);
        rb.cal_model.resize(rows_per_a);
        const Mat<cplx> d1 = phased_gradient(g, c1.phase, c1.envelope());
        const Mat<cplx> d2 = phased_gradient(g, c2.phase, c2.envelope());
        const Mat<cplx> l1 = phased_gradient(g, c1.phase, mc);
        const Mat<cplx> l2 = phased_gradient(g, c2.phase, mc);
        for (int t = 0; t < nw; ++t)
          for (int type = 0; type < 2; ++type) {
            const int row = type * nw + t;
            const Mat<cplx>& dw = tests[static_cast<size_t>(t)].dw;
            const NodalKernel kd = type == 0 ? nodal_kernel(g, d1, d2, dw) : nodal_kernel(g, dw, d1, d2);
            const NodalKernel km = type == 0 ? nodal_kernel(g, l1, l2, dw) : nodal_kernel(g, dw, l1, l2);
            for (Index k = 0; k < nt; ++k)
              rb.data(row, k) = norm * apply_nodal_kernel(kd, prob.truths[static_cast<size_t>(k)]);
            rb.cal_data[row] = norm * apply_nodal_kernel(kd, prob.calibration);
            rb.model.row(row) = norm * reduce_nodal(km, sup, nu).transpose();
            rb.cal_model[row] = norm * apply_nodal_kernel(km, prob.calibration);
          }
      }

      if (do_boundary) {
        RawBlock& rb = raw[1][static_cast<size_t>(ia)][static_cast<size_t>(is)];
        rb.data.resize(rows_per_a, nt);
        rb.model.resize(rows_per_a, nu);
        rb.cal_data.resize(rows_per_a);
        rb.cal_model.resize(rows_per_a);
        const Vec<cplx> f1 = c1.field(g), f2 = c2.field(g);
        const ProbeRun p1 = probe_run(g, prob.gamma, f1, chi, dt, tau, opt.trunc_tol);
        const ProbeRun p2 = probe_run(g, prob.gamma, f2, chi, dt, tau, opt.trunc_tol);
        const Mat<cplx> w2 = adjoint_run(g, prob.gamma, f2, dt, steps);

        // Type A: (uf, T, W) = (p1, p2, test adjoints).
        std::vector<const Mat<cplx>*> adjs;
        for (const TestField& t : tests) adjs.push_back(&t.adj);
        const auto ka = link_kernels(g, {&p1.hat}, p2.tail, adjs, dt);
        // Type B: (uf, T, W) = (test transforms, p1, w2).
        std::vector<const Vec<cplx>*> ufs;
        for (const TestField& t : tests) ufs.push_back(&t.hat);
        const auto kb = link_kernels(g, ufs, p1.tail, {&w2}, dt);
        for (int t = 0; t < nw; ++t) {
          const LinkKernel& la = ka[0][static_cast<size_t>(t)];
          const LinkKernel& lb = kb[static_cast<size_t>(t)][0];
          rb.model.row(t) = norm * reduce_links(la, sup, nu).transpose();
          rb.model.row(nw + t) = norm * reduce_links(lb, sup, nu).transpose();
          rb.cal_model[t] = norm * apply_link_kernel(g, la, prob.calibration);
          rb.cal_model[nw + t] = norm * apply_link_kernel(g, lb, prob.calibration);
        }
        // Measured data through the reversed-source runs and the conormal trace.
        auto measure = [&](const CoefficientSet& cs, cplx* col, Index stride) {
          const Vec<cplx> ua = reversed_source_run(g, cs, p1.hat, p2.tail, dt);
          for (int t = 0; t < nw; ++t)
            col[t * stride] =
                norm * boundary_measurement(g, prob.gamma, tau, ua, tests[static_cast<size_t>(t)].w, opt.w_tol).value;
          for (int t = 0; t < nw; ++t) {
            const Vec<cplx> ub = reversed_source_run(g, cs, tests[static_cast<size_t>(t)].hat, p1.tail, dt);
            col[(nw + t) * stride] = norm * boundary_measurement(g, prob.gamma, tau, ub, f2, opt.w_tol).value;
          }
        };
        for (Index k = 0; k < nt; ++k) measure(truth_sets[static_cast<size_t>(k)], &rb.data(0, k), 1);
        measure(cal_set, rb.cal_data.data(), 1);
      }
    }
  });

  std::vector<FourierPanel> out;
  for (MeasureMode mode : modes) {
    const int mi = mode == MeasureMode::Oracle ? 0 : 1;
    std::vector<int> ia_used, is_used;
    for (int ia = 0; ia < na; ++ia)
      if (uses_a(mi, as[static_cast<size_t>(ia)])) ia_used.push_back(ia);
    for (int is = 0; is < ns; ++is)
      if (uses_s(mi, svals[static_cast<size_t>(is)])) is_used.push_back(is);
    FourierPanel panel;
    panel.mode = mode;
    panel.tau = tau;
    for (int ia : ia_used) panel.a.push_back(as[static_cast<size_t>(ia)]);
    for (int is : is_used) panel.s.push_back(svals[static_cast<size_t>(is)]);
    panel.rows_per_a = rows_per_a;
    const double s_min = *std::min_element(panel.s.begin(), panel.s.end());
    const Index rows = static_cast<Index>(ia_used.size()) * rows_per_a;
    panel.data.resize(rows, nt);
    panel.model = Mat<cplx>::Zero(rows, nu);
    panel.calibration_data.resize(rows);
    panel.calibration_model.resize(rows);
    panel.spread = Mat<double>::Zero(rows, nt);
    const Vec<double> rw = richardson_weights(panel.s);
    for (size_t q = 0; q < ia_used.size(); ++q) {
      const auto& blocks = raw[static_cast<size_t>(mi)][static_cast<size_t>(ia_used[q])];
      for (int r = 0; r < rows_per_a; ++r) {
        const Index row = static_cast<Index>(q) * rows_per_a + r;
        cplx cd = 0.0, cm = 0.0;
        for (size_t k = 0; k < is_used.size(); ++k) {
          const RawBlock& b = blocks[static_cast<size_t>(is_used[k])];
          const double wk = rw[static_cast<Index>(k)];
          panel.model.row(row) += wk * b.model.row(r);
          cd += wk * b.cal_data[r];
          cm += wk * b.cal_model[r];
        }
        panel.calibration_data[row] = cd;
        panel.calibration_model[row] = cm;
      }
    }
    // Stage spreads are measured against the panel-wide scale of each truth.
    for (Index k = 0; k < nt; ++k) {
      std::vector<double> spreads(static_cast<size_t>(rows));
      double scale = 0.0;
      for (size_t q = 0; q < ia_used.size(); ++q) {
        const auto& blocks = raw[static_cast<size_t>(mi)][static_cast<size_t>(ia_used[q])];
        for (int r = 0; r < rows_per_a; ++r) {
          const Index row = static_cast<Index>(q) * rows_per_a + r;
          std::vector<cplx> v;
          for (int is : is_used) v.push_back(blocks[static_cast<size_t>(is)].data(r, k));
          const RichardsonResult res = richardson(panel.s, v);
          panel.data(row, k) = res.value;
          spreads[static_cast<size_t>(row)] = res.spread;
          scale = std::max(scale, std::abs(res.value));
        }
      }
      for (Index row = 0; row < rows; ++row) {
        const double sp = scale > 0 ? spreads[static_cast<size_t>(row)] / scale : 0.0;
        panel.spread(row, k) = sp;
        panel.max_spread = std::max(panel.max_spread, sp);
        if (panel.a[static_cast<size_t>(row / rows_per_a)].norm() <= s_min)
          panel.checked_spread = std::max(panel.checked_spread, sp);
      }
    }
    if (mode == MeasureMode::Oracle && panel.checked_spread > opt.spread_tol)
      throw numerical_error("reconstruct.panel", "Richardson stages spread " + sci(panel.checked_spread) + " above " +
                                                     sci(opt.spread_tol));
    const cplx den = panel.calibration_model.squaredNorm();
    if (!(std::abs(den) > 0)) throw numerical_error("reconstruct.calibrate", "calibration truth gives a zero panel");
    const cplx kappa = panel.calibration_model.dot(panel.calibration_data) / den;
    panel.kappa0 = kappa.real();
    if (!(panel.kappa0 > 0))
      throw numerical_error("reconstruct.calibrate", "calibration constant " + sci(panel.kappa0) + " is not positive");
    panel.build_seconds = seconds_since(t_start);
    out.push_back(std::move(panel));
  }
  return out;
}

FourierPanel fourier_panel(const PanelProblem& prob, const BumpBasis& basis, MeasureMode mode) {
  return fourier_panels(prob, basis, {mode})[0];
}

Recovery recover(const Grid& g, const BumpBasis& basis, const FourierPanel& panel, Index truth) {
  const Index rows = panel.rows(), nu = panel.model.cols();
  if (truth < 0 || truth >= panel.data.cols()) throw config_error("reconstruct.solve", "truth index out of range");
  if (2 * rows < nu)
    throw config_error("reconstruct.solve", "panel has " + std::to_string(2 * rows) + " real equations for " +
                                                std::to_string(nu) + " unknowns; raise a_max");
  Mat<double> a(2 * rows, nu);
  Vec<double> b(2 * rows);
  for (Index r = 0; r < rows; ++r) {
    const double nrm = panel.model.row(r).norm() * panel.kappa0;
    const double inv = nrm > 0 ? 1.0 / nrm : 0.0;
    a.row(r) = (panel.kappa0 * inv) * panel.model.row(r).real();
    a.row(rows + r) = (panel.kappa0 * inv) * panel.model.row(r).imag();
    b[r] = inv * panel.data(r, truth).real();
    b[rows + r] = inv * panel.data(r, truth).imag();
  }
  Eigen::BDCSVD<Mat<double>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec<double>& sv = svd.singularValues();
  Recovery rec;
  rec.condition = sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  if (!(rec.condition < 1e10))
    throw numerical_error("reconstruct.solve", "panel system is rank deficient (condition " + sci(rec.condition) + ")");
  rec.x = svd.solve(b);
  const double bn = b.norm();
  rec.residual = bn > 0 ? (a * rec.x - b).norm() / bn : (a * rec.x).norm();
  rec.s = basis_synthesis(g, basis, rec.x);
  return rec;
}

VanishingTerms vanishing_terms(const Grid& g, const Vec<double>& gamma, const SymmetrizedCoefficients& c, cplx tau,
                               const Point& a, const std::vector<double>& s_values, const Vec<cplx>& w,
                               const CgoOptions& opt) {
  if (g.n() != 3) throw config_error("reconstruct.vanishing", "needs n = 3");
  if (s_values.size() < 3) throw config_error("reconstruct.vanishing", "s sweep needs at least 3 values");
  const PanelFrame fr = panel_frame(a);
  const Mat<cplx> dw = gradient<cplx>(g, w);
  VanishingTerms out;
  out.s = s_values;
  for (double s : s_values) {
    const ZetaPair zp = make_zeta_pair(a, fr.xi, fr.eta, s, 3);
    CgoSolution c1 = solve_remainder(g, gamma, tau, zp.zeta1, opt);
    CgoSolution c2 = solve_remainder(g, gamma, tau, zp.zeta2, opt);
    tau_derivative_remainder(g, gamma, c1, opt);
    tau_derivative_remainder(g, gamma, c2, opt);
    const Vec<cplx> e1 = (c1.m.cast<cplx>().array() * c1.r_tau.array()).matrix();
    const Vec<cplx> e2 = (c2.m.cast<cplx>().array() * c2.r_tau.array()).matrix();
    const cplx m1 = volume_form(g, c, phased_gradient(g, c1.phase, e1), phased_gradient(g, c2.phase, e2), dw);
    const cplx m0 = volume_form(g, c, phased_gradient(g, c1.phase, c1.envelope()),
                                phased_gradient(g, c2.phase, c2.envelope()), dw);
    out.scaled.push_back(std::abs(m1) / (s * s));
    out.main.push_back(std::abs(m0) / (s * s));
  }
  out.slope = loglog_slope(out.s, out.scaled);
  return out;
}

UnmixResult unmix_pointwise(const Grid& g, const Mat<cplx>& hw, const std::vector<Mat<cplx>>& dw, double cond_max,
                            double max_fraction) {
  const int n = g.n();
  if (static_cast<int>(dw.size()) != n || hw.cols() != n)
    throw config_error("reconstruct.unmix", "need n test solutions");
  UnmixResult out;
  out.h = Mat<cplx>::Zero(g.size(), n);
  for (Index i = 0; i < g.size(); ++i) {
    Mat<cplx> m(n, n);
    Vec<cplx> rhs(n);
    for (int t = 0; t < n; ++t) {
      rhs[t] = hw(i, t);
      for (int j = 0; j < n; ++j) m(t, j) = dw[static_cast<size_t>(t)](i, j);
    }
    const Eigen::JacobiSVD<Mat<cplx>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double cond = sv[n - 1] > 0 ? sv[0] / sv[n - 1] : INFINITY;
    if (!(cond <= cond_max)) {
      out.masked.push_back(i);
      continue;
    }
    out.h.row(i) = svd.solve(rhs).transpose();
  }
  out.mask_fraction = static_cast<double>(out.masked.size()) / static_cast<double>(g.size());
  if (out.mask_fraction > max_fraction)
    throw numerical_error("reconstruct.unmix", "masked fraction " + sci(out.mask_fraction) + " above " +
                                                   sci(max_fraction) + "; use a larger family r");
  return out;
}

Mat<cplx> h_fields(const SymmetrizedCoefficients& s, const Vec<double>& gamma, const CPoint& rho) {
  const int n = s.n;
  Mat<cplx> out = Mat<cplx>::Zero(gamma.size(), n);
  const Vec<cplx> m2 = gamma.cwiseInverse().cast<cplx>();
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        out.col(j) += (rho[k] * rho[l]) * s.s[s.slot(j, k, l)].cast<cplx>().cwiseProduct(m2);
  return out;
}

Mat<cplx> g_fields(const SymmetrizedCoefficients& s, const Vec<double>& gamma, const CPoint& rho) {
  const int n = s.n;
  Mat<cplx> out = Mat<cplx>::Zero(gamma.size(), n);
  const Vec<cplx> m2 = gamma.cwiseInverse().cast<cplx>();
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        out.col(k) += (rho[j] * rho[l]) * s.s[s.slot(j, k, l)].cast<cplx>().cwiseProduct(m2);
  return out;
}

std::vector<CPoint> stage1_rhos(int n) {
  std::vector<CPoint> out;
  for (const auto& p : sym_pairs(n)) {
    if (p[0] == p[1]) continue;
    CPoint r = CPoint::Zero();
    r[p[0]] = 1.0;
    r[p[1]] = cplx(0.0, 1.0);
    out.push_back(r);
  }
  return out;
}

SymmetrizedCoefficients polarization_unmix(const Grid& g, const Vec<double>& gamma, const PolarizationInput& in) {
  const int n = g.n();
  const auto pairs = sym_pairs(n);
  std::vector<std::array<int, 2>> off;
  for (const auto& p : pairs)
    if (p[0] != p[1]) off.push_back(p);
  if (in.stage1.size() != off.size()) throw config_error("reconstruct.polarize", "stage 1 needs one field per k < l");
  if (in.rhos.size() != in.stage2.size()) throw config_error("reconstruct.polarize", "stage 2 rhos and fields differ");
  const Index size = g.size();
  SymmetrizedCoefficients s = zero_symmetrized(n, size);

  // diff(j, l) = s^j_00 - s^j_ll from the pairs (0, l).
  std::vector<Vec<double>> diff(static_cast<size_t>(n * n), Vec<double>::Zero(size));
  for (size_t q = 0; q < off.size(); ++q) {
    const int k = off[q][0], l = off[q][1];
    const Mat<cplx>& h = in.stage1[q];
    for (int j = 0; j < n; ++j) {
      const Vec<double> v = (h.col(j).imag().array() * gamma.array() * 0.5).matrix();
      s.s[s.slot(j, k, l)] = v;
      s.s[s.slot(j, l, k)] = v;
      if (k == 0) diff[static_cast<size_t>(j * n + l)] = (h.col(j).real().array() * gamma.array()).matrix();
    }
  }

  // Stage 2: with s^j_kk = d^j - diff(j, k), each rho gives
  // sum_j rho_j d^j rho_k = g_k / m^2 - sum_{j, l != k} rho_j rho_l s^j_kl + sum_j rho_j rho_k diff(j, k).
  const Index eqs = static_cast<Index>(in.rhos.size()) * n * 2;
  if (eqs < n) throw config_error("reconstruct.polarize", "stage 2 needs more directions");
  for (Index i = 0; i < size; ++i) {
    Mat<double> a(eqs, n);
    Vec<double> b(eqs);
    Index row = 0;
    for (size_t r = 0; r < in.rhos.size(); ++r) {
      const CPoint& rho = in.rhos[r];
      for (int k = 0; k < n; ++k) {
        cplx rhs = in.stage2[r](i, k) * gamma[i];
        for (int j = 0; j < n; ++j) {
          for (int l = 0; l < n; ++l)
            if (l != k) rhs -= rho[j] * rho[l] * s.s[s.slot(j, k, l)][i];
          rhs += rho[j] * rho[k] * diff[static_cast<size_t>(j * n + k)][i];
        }
        for (int j = 0; j < n; ++j) {
          const cplx c = rho[j] * rho[k];
          a(row, j) = c.real();
          a(row + 1, j) = c.imag();
        }
        b[row] = rhs.real();
        b[row + 1] = rhs.imag();
        row += 2;
      }
    }
    const Eigen::JacobiSVD<Mat<double>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (!(sv[n - 1] > 1e-10 * sv[0])) throw numerical_error("reconstruct.polarize", "singular stage-2 system");
    const Vec<double> d = svd.solve(b);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) s.s[s.slot(j, k, k)][i] = d[j] - diff[static_cast<size_t>(j * n + k)][i];
  }
  return s;
}

std::vector<ReconstructionResult> reconstruct_pipeline(const PanelProblem& prob, const std::vector<MeasureMode>& modes) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& g = *prob.grid;
  const BumpBasis basis = make_basis(g, prob.opt.centers, prob.opt.basis_radius);
  std::vector<FourierPanel> panels = fourier_panels(prob, basis, modes);
  std::vector<ReconstructionResult> out;
  const double shared = seconds_since(t0);
  for (FourierPanel& panel : panels) {
    const auto t1 = std::chrono::steady_clock::now();
    ReconstructionResult res;
    res.mode = panel.mode;
    res.kappa0 = panel.kappa0;
    res.checked_spread = panel.checked_spread;
    res.max_spread = panel.max_spread;
    for (Index k = 0; k < static_cast<Index>(prob.truths.size()); ++k) {
      Recovery rec = recover(g, basis, panel, k);
      const SymmetrizedCoefficients& truth = prob.truths[static_cast<size_t>(k)];
      res.rel_l2.push_back(relative_l2(g, rec.s, truth));
      res.sup.push_back(sup_error(rec.s, truth));
      res.panel_residual.push_back(rec.residual);
      res.condition = rec.condition;

      // The pointwise algebra applied to the recovered tensor returns it.
      PolarizationInput pin;
      for (const CPoint& rho : stage1_rhos(g.n())) pin.stage1.push_back(h_fields(rec.s, prob.gamma, rho));
      pin.rhos = default_rhos(g.n());
      for (const CPoint& rho : pin.rhos) pin.stage2.push_back(g_fields(rec.s, prob.gamma, rho));
      const SymmetrizedCoefficients back = polarization_unmix(g, prob.gamma, pin);
      res.polarization_defect = std::max(res.polarization_defect, sup_error(back, rec.s));
      res.recovered.push_back(std::move(rec.s));
    }
    res.seconds = shared + seconds_since(t1);
    res.panel = std::move(panel);
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace nlw
