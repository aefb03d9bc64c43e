#include "nlwave/cgo.hpp"

#include <unsupported/Eigen/IterativeSolvers>

#include <algorithm>
#include <optional>
#include <cmath>
#include <sstream>

namespace nlw {

namespace {

constexpr double kPi = 3.14159265358979323846;

void require_unit(const Point& v, const char* name) {
  if (std::abs(v.norm() - 1.0) > 1e-12) throw config_error("cgo", std::string(name) + " must be a unit vector");
}

CPoint as_complex(const Point& v) { return v.cast<cplx>(); }

std::string sci(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// v viewed as an N^n array, x fastest; applies M along one axis.
void apply_along(Vec<cplx>& v, const Mat<cplx>& m, int axis, int len, int n) {
  const Index total = v.size();
  if (axis == 0) {
    Eigen::Map<Mat<cplx>> x(v.data(), len, total / len);
    x = (m * x).eval();
  } else if (axis == n - 1) {
    Eigen::Map<Mat<cplx>> x(v.data(), total / len, len);
    x = (x * m.transpose()).eval();
  } else {
    const Index slab = static_cast<Index>(len) * len;
    for (Index k = 0; k < total / slab; ++k) {
      Eigen::Map<Mat<cplx>> x(v.data() + k * slab, len, len);
      x = (x * m.transpose()).eval();
    }
  }
}

class BoxPreconditioner {
 public:
  using StorageIndex = int;
  BoxPreconditioner() = default;
  void attach(const CgoBox* box) { box_ = box; }
  template <class M>
  BoxPreconditioner& analyzePattern(const M&) { return *this; }
  template <class M>
  BoxPreconditioner& factorize(const M&) { return *this; }
  template <class M>
  BoxPreconditioner& compute(const M&) { return *this; }
  template <class Rhs>
  Vec<cplx> solve(const Rhs& b) const { return box_->precondition(Vec<cplx>(b)); }
  Eigen::ComputationInfo info() const { return Eigen::Success; }

 private:
  const CgoBox* box_ = nullptr;
};

}  // namespace

cplx dot(const CPoint& u, const CPoint& v) { return (u.array() * v.array()).sum(); }

ZetaPair make_zeta_pair(const Point& a, const Point& xi, const Point& eta, double s, int n) {
  if (n != 2 && n != 3) throw config_error("cgo", "dimension must be 2 or 3");
  if (!(s > 0)) throw config_error("cgo", "s must be positive");
  require_unit(xi, "xi");
  require_unit(eta, "eta");
  const double scale = std::max(1.0, a.norm());
  if (std::abs(a.dot(xi)) > 1e-12 * scale || std::abs(a.dot(eta)) > 1e-12 * scale || std::abs(xi.dot(eta)) > 1e-12)
    throw config_error("cgo", "a, xi, eta must be mutually orthogonal");
  if (n == 2) {
    if (a.norm() != 0.0) throw config_error("cgo", "n = 2 admits no orthogonal triple with a != 0");
    if (xi[2] != 0.0 || eta[2] != 0.0) throw config_error("cgo", "n = 2 directions must lie in the plane");
  }
  ZetaPair p;
  p.n = n;
  p.a = a;
  p.xi = xi;
  p.eta = eta;
  p.s = s;
  p.r = std::sqrt(a.squaredNorm() / 4.0 + s * s);
  const cplx i(0.0, 1.0);
  p.zeta1 = p.r * as_complex(eta) + i * as_complex(a / 2.0 + s * xi);
  p.zeta2 = -p.r * as_complex(eta) + i * as_complex(a / 2.0 - s * xi);
  p.rho = as_complex(eta) + i * as_complex(xi);
  return p;
}

RhoDirection make_rho(const CPoint& rho, int n) {
  if (n == 2 && rho[2] != cplx(0.0)) throw config_error("cgo", "n = 2 rho must have zero third component");
  if (std::abs(dot(rho, rho)) > 1e-12 || std::abs(rho.squaredNorm() - 2.0) > 1e-12)
    throw config_error("cgo", "rho must satisfy rho.rho = 0 and |rho|^2 = 2");
  return RhoDirection{rho};
}

cplx discrete_symbol(const CPoint& zeta, double h, int n) {
  cplx acc = 0.0;
  for (int d = 0; d < n; ++d) {
    const cplx sh = std::sinh(zeta[d] * (h / 2.0));
    acc += sh * sh;
  }
  return acc * (4.0 / (h * h));
}

CPoint discrete_phase(const CPoint& zeta, double h, int n) {
  Point re = zeta.real();
  if (n == 2) re[2] = 0.0;
  if (re.norm() == 0.0) {
    if (zeta.norm() == 0.0) return zeta;
    throw numerical_error("cgo", "discrete phase needs a nonzero real part");
  }
  const CPoint e = as_complex(re / re.norm());
  double scale = 0.0;
  for (int d = 0; d < n; ++d) scale += std::norm(std::sinh(zeta[d] * (h / 2.0)));
  scale = std::max(std::sqrt(scale), 1e-300);
  cplx delta = 0.0;
  for (int it = 0; it < 60; ++it) {
    cplx f = 0.0, df = 0.0;
    for (int d = 0; d < n; ++d) {
      const cplx z = (zeta[d] + delta * e[d]) * h;
      const cplx sh = std::sinh(z / 2.0);
      f += sh * sh;
      df += e[d] * (h / 2.0) * std::sinh(z);
    }
    if (std::abs(f) <= 1e-15 * scale) return zeta + delta * e;
    delta -= f / df;
  }
  throw numerical_error("cgo", "discrete phase iteration did not converge");
}

Vec<cplx> CgoSolution::envelope() const {
  return (m.cast<cplx>().array() * (1.0 + r.array())).matrix();
}

Vec<cplx> CgoSolution::field(const Grid& g) const {
  Vec<cplx> out = envelope();
  for (Index i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    cplx ph = 0.0;
    for (int d = 0; d < g.n(); ++d) ph += phase[d] * x[d];
    out[i] *= std::exp(ph);
  }
  return out;
}

CgoBox::CgoBox(const Grid& g, const Vec<double>& gamma, cplx tau, const CPoint& phase, int pad,
               const std::optional<Point>& bloch)
    : g_(&g), n_(g.n()), h_(g.h()), tau_(tau), phase_(phase) {
  if (gamma.size() != g.size()) throw config_error("cgo", "gamma size mismatch");
  pad_ = pad < 0 ? (g.dims() - 1) / 2 : pad;
  if (pad_ < 3) throw config_error("cgo", "box padding must be at least 3 nodes");
  per_ = g.dims() - 1 + 2 * pad_;
  size_ = 1;
  for (int d = 0; d < n_; ++d) size_ *= per_;

  double g0 = 0.0;
  for (Index i : g.boundary_nodes()) g0 += gamma[i];
  gamma0_ = g0 / static_cast<double>(g.boundary_nodes().size());

  // chi = 1 on Omega, raised cosine to 0 at distance `width` outside.
  const double width = 0.8 * pad_ * h_;
  auto ramp = [&](double dist) {
    if (dist <= 0.0) return 1.0;
    if (dist >= width) return 0.0;
    return 0.5 * (1.0 + std::cos(kPi * dist / width));
  };
  chi_.resize(size_);
  gamma_.resize(size_);
  for (Index b = 0; b < size_; ++b) {
    const auto c = box_multi(b);
    std::array<int, 3> o{0, 0, 0};
    double w = 1.0;
    for (int d = 0; d < n_; ++d) {
      const int rel = c[d] - pad_;
      o[d] = std::clamp(rel, 0, g.dims() - 1);
      const double x = rel * h_;
      w *= ramp(std::max({0.0, -x, x - 1.0}));
    }
    chi_[b] = w;
    gamma_[b] = gamma0_ + w * (gamma[g.index(o)] - gamma0_);
  }
  m_ = gamma_.array().rsqrt().matrix();

  // Per-axis symbol factors -4 sinh^2((phase_d + i k) h/2)/h^2 for Bloch
  // wavenumbers k = (2 pi j + theta_d)/(per h).
  auto factors = [&](int d, double theta) {
    Vec<cplx> f(per_);
    for (int j = 0; j < per_; ++j) {
      const int jj = j <= per_ / 2 ? j : j - per_;
      const double k = (2.0 * kPi * jj + theta) / (per_ * h_);
      const cplx sh = std::sinh((phase_[d] + cplx(0.0, k)) * (h_ / 2.0));
      f[j] = -4.0 * sh * sh / (h_ * h_);
    }
    return f;
  };
  auto min_symbol = [&](const Point& th) {
    std::array<Vec<cplx>, 3> f;
    for (int d = 0; d < n_; ++d) f[d] = factors(d, th[d]);
    double best = INFINITY;
    for (Index b = 0; b < size_; ++b) {
      const auto c = box_multi(b);
      cplx acc = 0.0;
      for (int d = 0; d < n_; ++d) acc += f[d][c[d]];
      best = std::min(best, std::abs(acc));
    }
    return gamma0_ * best;
  };
  if (bloch) {
    bloch_ = *bloch;
  } else {
    // Twist maximizing the distance of the symbol from zero.
    const double cand[4] = {0.0, 0.5 * kPi, kPi, 1.5 * kPi};
    double best = -1.0;
    const int combos = n_ == 2 ? 16 : 64;
    for (int c = 0; c < combos; ++c) {
      Point th = Point::Zero();
      for (int d = 0, rest = c; d < n_; ++d, rest /= 4) th[d] = cand[rest % 4];
      const double v = min_symbol(th);
      if (v > best + 1e-12 * std::abs(v)) {
        best = v;
        bloch_ = th;
      }
    }
  }
  min_symbol_ = min_symbol(bloch_);
  if (!(min_symbol_ > 0.0)) throw numerical_error("cgo", "singular box symbol");

  symbol_.resize(size_);
  {
    std::array<Vec<cplx>, 3> f;
    for (int d = 0; d < n_; ++d) f[d] = factors(d, bloch_[d]);
    for (Index b = 0; b < size_; ++b) {
      const auto c = box_multi(b);
      cplx acc = 0.0;
      for (int d = 0; d < n_; ++d) acc += f[d][c[d]];
      symbol_[b] = gamma0_ * acc;
    }
  }
  fwd_.assign(n_, Mat<cplx>());
  inv_.assign(n_, Mat<cplx>());
  for (int d = 0; d < n_; ++d) {
    Mat<cplx> f(per_, per_);
    for (int j = 0; j < per_; ++j) {
      const int jj = j <= per_ / 2 ? j : j - per_;
      const double k = (2.0 * kPi * jj + bloch_[d]) / (per_ * h_);
      for (int x = 0; x < per_; ++x) f(j, x) = std::exp(cplx(0.0, -k * x * h_)) / std::sqrt(double(per_));
    }
    fwd_[d] = f;
    inv_[d] = f.adjoint();
  }

  const double ih2 = 1.0 / (h_ * h_);
  const cplx t2 = tau * tau;
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<size_t>(size_) * (2 * n_ + 1));
  for (Index p = 0; p < size_; ++p) {
    const auto c = box_multi(p);
    cplx diag = t2 * chi_[p];
    for (int d = 0; d < n_; ++d) {
      const Index q_plus = neighbour(p, d, +1), q_minus = neighbour(p, d, -1);
      const double gp = 0.5 * (gamma_[p] + gamma_[q_plus]);
      const double gm = 0.5 * (gamma_[p] + gamma_[q_minus]);
      diag += (gp + gm) * ih2;
      cplx ep = std::exp(phase_[d] * h_), em = std::exp(-phase_[d] * h_);
      if (c[d] == per_ - 1) ep *= std::exp(cplx(0.0, bloch_[d]));
      if (c[d] == 0) em *= std::exp(cplx(0.0, -bloch_[d]));
      trip.emplace_back(p, q_plus, -gp * ih2 * ep);
      trip.emplace_back(p, q_minus, -gm * ih2 * em);
    }
    trip.emplace_back(p, p, diag);
  }
  a_.resize(size_, size_);
  a_.setFromTriplets(trip.begin(), trip.end());
  a_.makeCompressed();
}

std::array<int, 3> CgoBox::box_multi(Index b) const {
  std::array<int, 3> c{0, 0, 0};
  for (int d = 0; d < n_; ++d) {
    c[d] = static_cast<int>(b % per_);
    b /= per_;
  }
  return c;
}

Index CgoBox::neighbour(Index b, int axis, int step) const {
  Index st = 1;
  for (int d = 0; d < axis; ++d) st *= per_;
  const int c = static_cast<int>((b / st) % per_);
  const int next = (c + step + per_) % per_;
  return b + (next - c) * st;
}

Vec<cplx> CgoBox::precondition(const Vec<cplx>& b) const {
  Vec<cplx> y = b;
  for (int d = 0; d < n_; ++d) apply_along(y, fwd_[d], d, per_, n_);
  y.array() /= symbol_.array();
  for (int d = 0; d < n_; ++d) apply_along(y, inv_[d], d, per_, n_);
  return y;
}

Vec<cplx> CgoBox::solve(const Vec<cplx>& b, double tol, int restart, int max_iterations, int* iterations,
                        double* residual) const {
  Eigen::GMRES<Eigen::SparseMatrix<cplx>, BoxPreconditioner> gmres;
  gmres.preconditioner().attach(this);
  gmres.set_restart(restart);
  gmres.setMaxIterations(max_iterations);
  gmres.setTolerance(0.1 * tol);
  gmres.compute(a_);
  const double bn = b.norm();
  Vec<cplx> x = Vec<cplx>::Zero(b.size());
  double rel = bn > 0 ? 1.0 : 0.0;
  int its = 0;
  // Restarts from the current iterate until tol or until the true residual
  // stops improving (rounding floor of the convected operator).
  for (int round = 0; round < 6 && rel > tol; ++round) {
    x = gmres.solveWithGuess(b, x);
    its += static_cast<int>(gmres.iterations());
    const double next = (b - a_ * x).norm() / bn;
    const bool stalled = next > 0.5 * rel;
    rel = next;
    if (stalled && round > 0) break;
  }
  if (iterations) *iterations = its;
  if (residual) *residual = rel;
  if (!std::isfinite(rel) || rel > 1e-6)
    throw numerical_error("cgo", "box solve residual " + sci(rel) + " did not converge");
  return x;
}

Vec<cplx> CgoBox::apply_periodic(const Vec<cplx>& v) const {
  const double ih2 = 1.0 / (h_ * h_);
  Vec<cplx> out(size_);
  for (Index p = 0; p < size_; ++p) {
    cplx acc = tau_ * tau_ * chi_[p] * v[p];
    for (int d = 0; d < n_; ++d) {
      const Index qp = neighbour(p, d, +1), qm = neighbour(p, d, -1);
      const double gp = 0.5 * (gamma_[p] + gamma_[qp]);
      const double gm = 0.5 * (gamma_[p] + gamma_[qm]);
      acc += gp * ih2 * (v[p] - std::exp(phase_[d] * h_) * v[qp]);
      acc += gm * ih2 * (v[p] - std::exp(-phase_[d] * h_) * v[qm]);
    }
    out[p] = acc;
  }
  return out;
}

Vec<cplx> CgoBox::to_omega(const Vec<cplx>& box) const {
  Vec<cplx> out(g_->size());
  for (Index i = 0; i < g_->size(); ++i) {
    const auto o = g_->multi(i);
    Index p = 0, st = 1;
    for (int d = 0; d < n_; ++d) {
      p += (o[d] + pad_) * st;
      st *= per_;
    }
    out[i] = box[p];
  }
  return out;
}

namespace {

void fill_norms(const Grid& g, CgoSolution& sol) {
  sol.r_l2 = l2_norm<cplx>(g, sol.r);
  const double h1 = h1_norm<cplx>(g, sol.r);
  sol.grad_r_l2 = std::sqrt(std::max(0.0, h1 * h1 - sol.r_l2 * sol.r_l2));
}

CPoint pick_phase(const Grid& g, const CPoint& zeta, const CgoOptions& opt) {
  return opt.discrete ? discrete_phase(zeta, g.h(), g.n()) : zeta;
}

}  // namespace

CgoSolution solve_remainder(const Grid& g, const Vec<double>& gamma, cplx tau, const CPoint& zeta,
                            const CgoOptions& opt) {
  CgoSolution sol;
  sol.tau = tau;
  sol.zeta = zeta;
  sol.phase = pick_phase(g, zeta, opt);
  sol.m = gamma.array().rsqrt().matrix();
  const CgoBox box(g, gamma, tau, sol.phase, opt.pad);
  sol.pad = box.pad();
  sol.bloch = box.bloch();
  sol.min_symbol = box.min_symbol();
  const Vec<cplx> m = box.box_m().cast<cplx>();
  const Vec<cplx> b = -box.apply_periodic(m);
  sol.box_mr = box.solve(b, opt.tol, opt.restart, opt.max_iterations, &sol.iterations, &sol.box_residual);
  sol.r = box.to_omega((sol.box_mr.array() / m.array()).matrix());
  fill_norms(g, sol);
  sol.residual = cgo_residual(g, gamma, sol);
  if (!(sol.residual <= 1e-6))
    throw numerical_error("cgo", "assembled residual " + sci(sol.residual) + " above 1e-6");
  return sol;
}

void tau_derivative_remainder(const Grid& g, const Vec<double>& gamma, CgoSolution& sol, const CgoOptions& opt) {
  const CgoBox box(g, gamma, sol.tau, sol.phase, sol.pad, sol.bloch);
  const Vec<cplx> m = box.box_m().cast<cplx>();
  const Vec<cplx> b = -2.0 * sol.tau * (box.chi().cast<cplx>().array() * (m + sol.box_mr).array()).matrix();
  const Vec<cplx> mrt = box.solve(b, opt.tol, opt.restart, opt.max_iterations);
  sol.r_tau = box.to_omega((mrt.array() / m.array()).matrix());
  sol.r_tau_l2 = l2_norm<cplx>(g, sol.r_tau);
}

double cgo_residual(const Grid& g, const Vec<double>& gamma, const CgoSolution& sol) {
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, gamma);
  const Vec<cplx> u = sol.field(g);
  const Vec<cplx> ku = k.cast<cplx>() * u;
  double num = 0.0, den = 0.0;
  for (Index i : g.interior_nodes()) {
    const Point x = g.point(i);
    cplx ph = 0.0;
    for (int d = 0; d < g.n(); ++d) ph += sol.phase[d] * x[d];
    const cplx e = std::exp(-ph);
    const cplx a = e * sol.tau * sol.tau * u[i];
    const cplx c = e * ku[i];
    num = std::max(num, std::abs(a + c));
    den = std::max({den, std::abs(a), std::abs(c)});
  }
  return den > 0 ? num / den : 0.0;
}

double schrodinger_defect(const Grid& g, const Vec<double>& gamma, const CgoSolution& sol, double sign) {
  const int n = g.n();
  const double h = g.h();
  const Vec<double> sq = gamma.array().sqrt().matrix();
  const cplx p = discrete_symbol(sol.phase, h, n);
  double num = 0.0, qmax = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const auto o = g.multi(i);
    bool inside = true;
    for (int d = 0; d < n; ++d) inside = inside && o[d] >= 2 && o[d] <= g.dims() - 3;
    if (!inside) continue;
    cplx lap = 0.0, conv = 0.0;
    double lsq = 0.0;
    for (int d = 0; d < n; ++d) {
      const Index st = g.stride(d);
      lap += (sol.r[i + st] - 2.0 * sol.r[i] + sol.r[i - st]) / (h * h);
      lsq += (sq[i + st] - 2.0 * sq[i] + sq[i - st]) / (h * h);
      conv += sol.phase[d] * (sol.r[i + st] - sol.r[i - st]) / (2.0 * h);
    }
    const cplx q = sol.tau * sol.tau / gamma[i] + lsq / sq[i];
    const cplx one_r = 1.0 + sol.r[i];
    const cplx defect = -lap + sign * 2.0 * conv - p * one_r + q * one_r;
    num = std::max(num, std::abs(defect));
    qmax = std::max(qmax, std::abs(q));
  }
  return qmax > 0 ? num / qmax : num;
}

std::vector<CPoint> default_rhos(int n) {
  const cplx i(0.0, 1.0);
  if (n == 2) return {CPoint(1.0, i, 0.0), CPoint(1.0, -i, 0.0)};
  return {CPoint(1.0, i, 0.0), CPoint(0.0, 1.0, i), CPoint(i, 0.0, 1.0)};
}

Vec<cplx> gradient_determinant(const Grid& g, const std::vector<Vec<cplx>>& fields) {
  const int n = g.n();
  if (static_cast<int>(fields.size()) != n) throw config_error("cgo", "need n fields for the determinant");
  std::vector<Mat<cplx>> grads;
  for (const auto& f : fields) grads.push_back(gradient<cplx>(g, f));
  Vec<cplx> out(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    Mat<cplx> j(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) j(a, b) = grads[a](i, b);
    out[i] = j.determinant();
  }
  return out;
}

FamilyReport independent_family(const Grid& g, const Vec<double>& gamma, cplx tau, double r,
                                const std::vector<CPoint>& rhos_in, double threshold, const CgoOptions& opt) {
  const int n = g.n();
  const std::vector<CPoint> rhos = rhos_in.empty() ? default_rhos(n) : rhos_in;
  if (static_cast<int>(rhos.size()) != n) throw config_error("cgo", "need n directions rho");
  Mat<cplx> pm(n, n);
  for (int j = 0; j < n; ++j) {
    make_rho(rhos[j], n);
    for (int d = 0; d < n; ++d) pm(j, d) = rhos[j][d];
  }
  if (std::abs(pm.determinant()) < 1e-12) throw config_error("cgo", "directions rho are linearly dependent");

  FamilyReport rep;
  rep.r = r;
  rep.threshold = threshold;
  std::vector<Vec<cplx>> fields;
  Mat<cplx> phases(n, n);
  for (int j = 0; j < n; ++j) {
    rep.v.push_back(solve_remainder(g, gamma, tau, r * rhos[j], opt));
    fields.push_back(rep.v.back().field(g));
    for (int d = 0; d < n; ++d) phases(j, d) = rep.v.back().phase[d];
  }
  const double dphi = std::abs(phases.determinant());
  rep.det = gradient_determinant(g, fields);
  rep.normalized.resize(g.size());
  rep.min_normalized = INFINITY;
  rep.min_scaled = INFINITY;
  Index above = 0;
  for (Index i = 0; i < g.size(); ++i) {
    const Point x = g.point(i);
    cplx ph = 0.0;
    for (int j = 0; j < n; ++j)
      for (int d = 0; d < n; ++d) ph += phases(j, d) * x[d];
    const double env = std::abs(std::exp(ph));
    const double scaled = std::abs(rep.det[i]) / env;
    rep.normalized[i] = scaled / (std::pow(rep.v[0].m[i], n) * dphi);
    rep.min_scaled = std::min(rep.min_scaled, scaled);
    rep.min_normalized = std::min(rep.min_normalized, rep.normalized[i]);
    if (rep.normalized[i] >= threshold) ++above;
  }
  rep.fraction_above = static_cast<double>(above) / static_cast<double>(g.size());
  if (above != g.size())
    throw numerical_error("cgo", "gradient determinant below threshold at r = " + sci(r));
  return rep;
}

double find_r_min(const Grid& g, const Vec<double>& gamma, cplx tau, const std::vector<double>& rs, double threshold,
                  const CgoOptions& opt) {
  std::vector<double> sorted = rs;
  std::sort(sorted.begin(), sorted.end());
  for (double r : sorted) {
    try {
      independent_family(g, gamma, tau, r, {}, threshold, opt);
      return r;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numerical) throw;
    }
  }
  return -1.0;
}

}  // namespace nlw
