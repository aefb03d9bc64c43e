#include "nlwave/spectral.hpp"

#include <cmath>

#include "nlwave/quadrature.hpp"

namespace nlw {

SpectralOperator::SpectralOperator(const Grid& g, const Vec<double>& gamma, Index cap) : g_(&g), gamma_(gamma) {
  const auto ni = static_cast<Index>(g.interior_nodes().size());
  if (ni > cap)
    throw config_error("spectral", std::to_string(ni) + " interior nodes exceed the dense cap " + std::to_string(cap));
  b_ = Mat<double>(stiffness_blocks(g, gamma).ii);
  const double defect = (b_ - b_.transpose()).cwiseAbs().maxCoeff();
  if (defect > 1e-12 * b_.cwiseAbs().maxCoeff())
    throw Error(ErrorKind::Internal, "spectral", "stiffness block is not symmetric (defect " + std::to_string(defect) + ")");
  Eigen::SelfAdjointEigenSolver<Mat<double>> es(b_);
  if (es.info() != Eigen::Success) throw numerical_error("spectral", "eigendecomposition failed");
  lambda_ = es.eigenvalues();
  if (!(lambda_[0] > 0)) throw numerical_error("spectral", "non-positive eigenvalue");
  w_ = std::pow(g.h(), g.n());
  v_ = es.eigenvectors() / std::sqrt(w_);
}

double SpectralOperator::gram_defect() const {
  const Mat<double> gram = w_ * v_.transpose() * v_;
  return (gram - Mat<double>::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

double SpectralOperator::max_residual() const {
  const Mat<double> r = b_ * v_ - v_ * lambda_.asDiagonal();
  double worst = 0.0;
  for (Index i = 0; i < r.cols(); ++i) worst = std::max(worst, r.col(i).norm() / (lambda_[i] * v_.col(i).norm()));
  return worst;
}

Vec<double> spectral_symbol(const SpectralOperator& op, SpectralFn fn, double t) {
  const Eigen::ArrayXd lam = op.eigenvalues().array();
  const Eigen::ArrayXd om = lam.sqrt();
  switch (fn) {
    case SpectralFn::SinScaled:
      return ((om * t).sin() / om).matrix();
    case SpectralFn::Cos:
      return (om * t).cos().matrix();
    case SpectralFn::InvSqrt:
      return (1.0 / om).matrix();
    case SpectralFn::Sqrt:
      return om.matrix();
  }
  throw Error(ErrorKind::Internal, "spectral", "unknown function");
}

Mat<double> time_derivative(const Mat<double>& frames, double dt) {
  const Index nt = frames.cols();
  if (nt < 3) throw config_error("spectral", "time derivative needs at least 3 frames");
  Mat<double> d(frames.rows(), nt);
  const double inv = 0.5 / dt;
  d.col(0) = (-3.0 * frames.col(0) + 4.0 * frames.col(1) - frames.col(2)) * inv;
  d.col(nt - 1) = (3.0 * frames.col(nt - 1) - 4.0 * frames.col(nt - 2) + frames.col(nt - 3)) * inv;
  for (Index m = 1; m + 1 < nt; ++m) d.col(m) = (frames.col(m + 1) - frames.col(m - 1)) * inv;
  return d;
}

Vec<double> ExtendedTrace::at(int m) const {
  if (m < first() || m > last())
    throw config_error("spectral", "time index " + std::to_string(m) + " outside the extended trace window");
  return values.col(m + offset);
}

ExtendedTrace even_extension(const BoundaryTrace<double>& f) {
  const int steps = static_cast<int>(f.values.cols()) - 1;
  ExtendedTrace e;
  e.dt = f.dt;
  e.offset = steps;
  e.values.resize(f.values.rows(), 2 * steps + 1);
  for (int m = -steps; m <= steps; ++m) e.values.col(m + steps) = f.values.col(std::abs(m));
  return e;
}

ExtendedTrace delay(const ExtendedTrace& f, int steps) {
  ExtendedTrace d = f;
  d.offset -= steps;
  return d;
}

BoundaryTrace<double> forward_window(const ExtendedTrace& f, int steps) {
  BoundaryTrace<double> b;
  b.dt = f.dt;
  b.values.resize(f.values.rows(), steps + 1);
  for (int m = 0; m <= steps; ++m) b.values.col(m) = f.at(m);
  return b;
}

Vec<double> polarized_source(const FluxOperator& flux, const Vec<double>& a, const Vec<double>& b) {
  Vec<double> ab, ba;
  flux.apply_bilinear<double>(a, b, ab);
  flux.apply_bilinear<double>(b, a, ba);
  return 2.0 * (ab + ba);
}

PolarizedField polarized_u2(const SpectralOperator& op, const FluxOperator& flux, const TimeSeries<double>& uf,
                            const TimeSeries<double>& ug, int delay_steps) {
  const int steps = uf.steps();
  if (std::max(delay_steps, steps - delay_steps) > ug.steps() || delay_steps < 0)
    throw config_error("spectral.polarized", "u1^g run too short for the requested delay");
  Mat<double> src(op.grid().size(), steps + 1);
  for (int m = 0; m <= steps; ++m)
    src.col(m) = polarized_source(flux, Vec<double>(uf.frames.col(m)), Vec<double>(ug.frames.col(std::abs(delay_steps - m))));
  PolarizedField p;
  p.delay_steps = delay_steps;
  p.s = delay_steps * uf.dt;
  p.u2 = repr_u2<double>(op, src, uf.dt);
  return p;
}

PolarizedField polarization_oracle(const SpectralOperator& op, const FluxOperator& flux,
                                   const BoundaryTrace<double>& f, const BoundaryTrace<double>& g, int delay_steps) {
  const Grid& grid = op.grid();
  const int steps = static_cast<int>(f.values.cols()) - 1;
  const double dt = f.dt;
  if (g.values.cols() != f.values.cols()) throw config_error("spectral.oracle", "f and g traces differ in length");
  if (delay_steps < 0 || delay_steps > steps) throw config_error("spectral.oracle", "delay outside the time window");

  const TimeSeries<double> ug = solve_linear_u1<double>(grid, op.gamma(), g, dt, steps);
  const BoundaryTrace<double> yg = forward_window(delay(even_extension(g), delay_steps), steps);
  const FluxOperator lin(grid, gamma_only(grid.n(), op.gamma()));

  // Start values reproduce the even-extended, delayed g solution at t = 0 and t = dt.
  const Vec<double> w0 = ug.frames.col(delay_steps);
  const Vec<double> w1 = ug.frames.col(std::abs(1 - delay_steps));
  Vec<double> acc;
  lin.apply<double>(w0, acc);
  const Vec<double> v0 = (w1 - w0 - 0.5 * dt * dt * acc) / dt;

  Mat<double> diff = Mat<double>::Zero(grid.size(), steps + 1);
  for (double sign : {1.0, -1.0}) {
    BoundaryTrace<double> data = f;
    data.values += sign * yg.values;
    const Vec<double> p0 = sign * w0, p1 = sign * v0;
    const TimeSeries<double> u = solve_linear_u1<double>(grid, op.gamma(), data, dt, steps, &p0, &p1);
    Mat<double> src(grid.size(), steps + 1);
    Vec<double> col;
    for (int m = 0; m <= steps; ++m) {
      const Vec<double> um = u.frames.col(m);
      flux.apply_bilinear<double>(um, um, col);
      src.col(m) = col;
    }
    diff += sign * repr_u2<double>(op, src, dt).frames;
  }
  PolarizedField p;
  p.delay_steps = delay_steps;
  p.s = delay_steps * dt;
  p.u2.dt = dt;
  p.u2.frames = std::move(diff);
  return p;
}

namespace {

// Trapezoid sum over the columns 0..n of a modal block, column weights w.
Vec<double> trap(const Mat<double>& a, const Eigen::ArrayXd& colw) { return a * colw.matrix(); }

}  // namespace

IntegratedField integrate_u2m1(const SpectralOperator& op, double dt, int s_steps, const PairSource& src) {
  const Grid& g = op.grid();
  const Index nm = op.modes();
  const Eigen::ArrayXd om = op.eigenvalues().array().sqrt();
  Mat<double> u2m1 = Mat<double>::Zero(nm, s_steps + 1), conv = u2m1;
  std::array<Mat<double>, 4> ex, ap;
  for (int j = 0; j < 4; ++j) ex[j] = ap[j] = Mat<double>::Zero(nm, s_steps + 1);

  const auto ni = static_cast<Index>(g.interior_nodes().size());
  for (int n = 1; n <= s_steps; ++n) {
    Mat<double> fs(ni, n + 1), ff(ni, n + 1), ffg(ni, n + 1);
    for (int k = 0; k <= n; ++k) {
      const SourceTriple t = src(k, n - k);
      for (Index q = 0; q < ni; ++q) {
        const Index node = g.interior_nodes()[static_cast<size_t>(q)];
        fs(q, k) = t.s[node];
        ff(q, k) = t.s_f[node];
        ffg(q, k) = t.s_fg[node];
      }
    }
    const Mat<double> as = op.project<double>(fs), af = op.project<double>(ff), afg = op.project<double>(ffg);
    const Eigen::ArrayXd w = trapezoid_weights(n, dt).array();

    conv.col(n) = 2.0 * trap(as, w);
    ap[0].col(n) = -conv.col(n);
    Eigen::ArrayXd lag(n + 1);
    for (int k = 0; k <= n; ++k) lag[k] = (n - k) * dt;
    ap[1].col(n) = 4.0 * trap(af, w * lag);
    ap[2].col(n) = -2.0 * trap(af, w * lag);
    ap[3].col(n) = trap(afg, w * lag.square());

    // Single integrals in sigma with kernels of s - sigma.
    for (Index i = 0; i < nm; ++i) {
      const Eigen::ArrayXd c = (om[i] * lag).cos(), sn = (om[i] * lag).sin() / om[i];
      ex[0](i, n) = -2.0 * (as.row(i).array().transpose() * c * w).sum();
      ex[1](i, n) = 4.0 * (af.row(i).array().transpose() * sn * w).sum();
    }

    // Nested integrals int_0^s dt int_0^t K(t - sigma) a(sigma) dsigma; the
    // kernels split into products of functions of t and of sigma.
    Eigen::ArrayXd outer_u2(nm), outer3(nm), outer4(nm);
    outer_u2.setZero();
    outer3.setZero();
    outer4.setZero();
    Eigen::ArrayXd cs_s = Eigen::ArrayXd::Zero(nm), sn_s = cs_s, cs_f = cs_s, sn_f = cs_s, cs_fg = cs_s, sn_fg = cs_s;
    Eigen::ArrayXd first_s(nm), first_f(nm), first_fg(nm);
    for (int m = 0; m <= n; ++m) {
      const double t = m * dt;
      const Eigen::ArrayXd c = (om * t).cos(), sn = (om * t).sin();
      const Eigen::ArrayXd a_s = as.col(m).array(), a_f = af.col(m).array(), a_fg = afg.col(m).array();
      cs_s += c * a_s;
      sn_s += sn * a_s;
      cs_f += c * a_f;
      sn_f += sn * a_f;
      cs_fg += c * a_fg;
      sn_fg += sn * a_fg;
      if (m == 0) {
        first_s = a_s;
        first_f = a_f;
        first_fg = a_fg;
        continue;
      }
      // Trapezoid over sigma in [0, t]: endpoints halved (sin(0) = 0, cos(0) = 1).
      const Eigen::ArrayXd tc_s = dt * (cs_s - 0.5 * first_s - 0.5 * c * a_s), ts_s = dt * (sn_s - 0.5 * sn * a_s);
      const Eigen::ArrayXd tc_f = dt * (cs_f - 0.5 * first_f - 0.5 * c * a_f), ts_f = dt * (sn_f - 0.5 * sn * a_f);
      const Eigen::ArrayXd tc_fg = dt * (cs_fg - 0.5 * first_fg - 0.5 * c * a_fg), ts_fg = dt * (sn_fg - 0.5 * sn * a_fg);
      const double wt = (m == n) ? 0.5 * dt : dt;
      outer_u2 += wt * 2.0 * (sn * tc_s - c * ts_s) / om;
      outer3 += wt * (c * tc_f + sn * ts_f);
      outer4 += wt * (sn * tc_fg - c * ts_fg) / om;
    }
    u2m1.col(n) = outer_u2.matrix();
    ex[2].col(n) = -2.0 * outer3.matrix();
    ex[3].col(n) = 2.0 * outer4.matrix();
  }

  IntegratedField out;
  out.dt = dt;
  out.u2m1 = op.synthesize_full<double>(u2m1);
  out.conv = op.synthesize_full<double>(conv);
  for (int j = 0; j < 4; ++j) {
    out.exact[j] = op.synthesize_full<double>(ex[j]);
    out.approx[j] = op.synthesize_full<double>(ap[j]);
  }
  return out;
}

IntegratedField integrate_u2m1(const SpectralOperator& op, const FluxOperator& flux, const TimeSeries<double>& uf,
                               const TimeSeries<double>& ug, int s_steps) {
  if (s_steps > uf.steps() || s_steps > ug.steps()) throw config_error("spectral.u2m1", "s-grid exceeds the u1 runs");
  const Mat<double> dfr = time_derivative(uf.frames, uf.dt);
  const Mat<double> dgr = time_derivative(ug.frames, ug.dt);
  auto cross = [&](const Vec<double>& a, const Vec<double>& b) {
    Vec<double> ab, ba;
    flux.apply_bilinear<double>(a, b, ab);
    flux.apply_bilinear<double>(b, a, ba);
    return Vec<double>(ab + ba);
  };
  return integrate_u2m1(op, uf.dt, s_steps, [&](int sigma, int r) {
    const Vec<double> f = uf.frames.col(sigma), fd = dfr.col(sigma);
    const Vec<double> gg = ug.frames.col(r), gd = dgr.col(r);
    return SourceTriple{cross(f, gg), cross(fd, gg), cross(fd, gd)};
  });
}

double u2m1_residual(const SpectralOperator& op, const IntegratedField& field) {
  const Grid& g = op.grid();
  const Eigen::SparseMatrix<double> k = stiffness_matrix(g, op.gamma());
  const double dt = field.dt;
  const auto& w = g.quadrature_weights();
  double num = 0.0, den = 0.0;
  for (int n = 1; n + 1 < field.samples(); ++n) {
    Vec<double> rhs = field.conv.col(n);
    for (int j = 0; j < 4; ++j) rhs += field.exact[j].col(n);
    const Vec<double> lhs = (field.u2m1.col(n + 1) - 2.0 * field.u2m1.col(n) + field.u2m1.col(n - 1)) / (dt * dt) +
                            k * Vec<double>(field.u2m1.col(n));
    Vec<double> r = lhs - rhs;
    for (Index b : g.boundary_nodes()) r[b] = 0.0;
    num += (r.array().square() * w.array()).sum();
    den += (rhs.array().square() * w.array()).sum();
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

std::vector<double> u2m1_growth(const Grid& g, const IntegratedField& field) {
  std::vector<double> out(static_cast<size_t>(field.samples()), 0.0);
  for (int n = 1; n < field.samples(); ++n) {
    const double s = n * field.dt;
    out[static_cast<size_t>(n)] = h1_norm<double>(g, Vec<double>(field.u2m1.col(n))) / (s * s);
  }
  return out;
}

double sin_expansion_remainder(double lambda, double r, int nodes) {
  const auto [x, w] = gauss_legendre(nodes, 0.0, 1.0);
  const double om = std::sqrt(lambda);
  double acc = 0.0;
  for (Index q = 0; q < x.size(); ++q) acc += w[q] * (1.0 - x[q]) * om * std::sin(x[q] * r * om);
  return -r * r * acc;
}

}  // namespace nlw
