#pragma once

#include <array>
#include <functional>

#include "nlwave/forward.hpp"

namespace nlw {

// Dense eigendecomposition of the interior block of B = -div(gamma grad .)
// with Dirichlet conditions. Eigenvectors are orthonormal for the weighted
// inner product h^n sum_i u_i v_i.
class SpectralOperator {
 public:
  SpectralOperator(const Grid& g, const Vec<double>& gamma, Index cap = 4096);

  const Grid& grid() const { return *g_; }
  const Vec<double>& gamma() const { return gamma_; }
  Index modes() const { return lambda_.size(); }
  const Vec<double>& eigenvalues() const { return lambda_; }
  // Interior nodes x modes.
  const Mat<double>& eigenvectors() const { return v_; }
  double weight() const { return w_; }

  // Modal coefficients of interior vectors (columns).
  template <class S>
  Mat<S> project(const Mat<S>& interior) const {
    return w_ * (v_.transpose().template cast<S>() * interior);
  }
  template <class S>
  Mat<S> synthesize(const Mat<S>& coeffs) const {
    return v_.template cast<S>() * coeffs;
  }
  // Modal coefficients of full-grid frames (columns); boundary rows ignored.
  template <class S>
  Mat<S> project_full(const Mat<S>& frames) const;
  // Full-grid frames from modal coefficients, zero on the boundary.
  template <class S>
  Mat<S> synthesize_full(const Mat<S>& coeffs) const;

  // Gram defect max |V^T W V - I| and max_i |B v_i - lambda_i v_i| / lambda_i.
  double gram_defect() const;
  double max_residual() const;

 private:
  const Grid* g_;
  Vec<double> gamma_;
  Mat<double> b_;  // dense interior block
  Vec<double> lambda_;
  Mat<double> v_;
  double w_;
};

enum class SpectralFn {
  SinScaled,  // lambda^{-1/2} sin(t lambda^{1/2})
  Cos,        // cos(t lambda^{1/2})
  InvSqrt,    // lambda^{-1/2}
  Sqrt        // lambda^{1/2}
};

Vec<double> spectral_symbol(const SpectralOperator& op, SpectralFn fn, double t);

// fn(B; t) v for an interior vector v.
template <class S>
Vec<S> apply_function(const SpectralOperator& op, SpectralFn fn, double t, const Vec<S>& v) {
  const Vec<S> c = op.project<S>(v);
  const Vec<double> sym = spectral_symbol(op, fn, t);
  return op.synthesize<S>(Mat<S>(c.cwiseProduct(sym.template cast<S>())));
}

// Per-mode trapezoid Duhamel integral: column m of the result holds the modal
// coefficients of B^{-1/2} int_0^{t_m} sin((t_m - sigma) B^{1/2}) F(sigma) dsigma.
template <class S>
Mat<S> duhamel_modal(const Vec<double>& lambda, const Mat<S>& coeffs, double dt) {
  using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
  const Index nm = coeffs.rows(), nt = coeffs.cols();
  const Eigen::ArrayXd om = lambda.array().sqrt();
  Mat<S> out = Mat<S>::Zero(nm, nt);
  if (nt == 0) return out;
  Arr sum_c = Arr::Zero(nm), sum_s = Arr::Zero(nm);
  const Arr a0 = coeffs.col(0).array();
  for (Index m = 0; m < nt; ++m) {
    const Arr c = (om * (m * dt)).cos().template cast<S>(), s = (om * (m * dt)).sin().template cast<S>();
    const Arr a = coeffs.col(m).array();
    sum_c += c * a;
    sum_s += s * a;
    if (m == 0) continue;
    const Arr tc = dt * (sum_c - 0.5 * a0 - 0.5 * c * a);
    const Arr ts = dt * (sum_s - 0.5 * s * a);
    out.col(m) = ((s * tc - c * ts) / om.template cast<S>()).matrix();
  }
  return out;
}

// u(t) = B^{-1/2} int_0^t sin((t - sigma) B^{1/2}) F(sigma) dsigma with F given
// as full-grid frames (one column per time level).
template <class S>
TimeSeries<S> repr_u2(const SpectralOperator& op, const Mat<S>& source, double dt) {
  TimeSeries<S> ts;
  ts.dt = dt;
  ts.frames = op.synthesize_full<S>(duhamel_modal<S>(op.eigenvalues(), op.project_full<S>(source), dt));
  return ts;
}

// Time derivative of frames: centered inside, one-sided second order at both ends.
Mat<double> time_derivative(const Mat<double>& frames, double dt);

// Boundary trace on a symmetric time window: column c holds time (c - offset) dt.
struct ExtendedTrace {
  double dt = 0.0;
  int offset = 0;
  Mat<double> values;
  int first() const { return -offset; }
  int last() const { return static_cast<int>(values.cols()) - 1 - offset; }
  Vec<double> at(int m) const;
};

ExtendedTrace even_extension(const BoundaryTrace<double>& f);
// Y_s with s = steps * dt: (Y_s f)(t) = f(t - s).
ExtendedTrace delay(const ExtendedTrace& f, int steps);
// Samples at t = 0, dt, ..., steps * dt.
BoundaryTrace<double> forward_window(const ExtendedTrace& f, int steps);

// 2 div[c (grad a x grad b + grad b x grad a)] for full-grid frames a, b.
Vec<double> polarized_source(const FluxOperator& flux, const Vec<double>& a, const Vec<double>& b);

struct PolarizedField {
  int delay_steps = 0;
  double s = 0.0;
  TimeSeries<double> u2;
};

// u2(t; s) from the cross source with u1^g evaluated at |s - t| (even extension).
PolarizedField polarized_u2(const SpectralOperator& op, const FluxOperator& flux, const TimeSeries<double>& uf,
                            const TimeSeries<double>& ug, int delay_steps);

// u2^{f + Y_s g} - u2^{f - Y_s g} from two full linear runs started from the
// delayed, even-extended g solution.
PolarizedField polarization_oracle(const SpectralOperator& op, const FluxOperator& flux,
                                   const BoundaryTrace<double>& f, const BoundaryTrace<double>& g, int delay_steps);

// Sources of the u2^(-1) equation on the s-grid s_n = n dt. All fields are
// full-grid with one column per s sample.
struct IntegratedField {
  double dt = 0.0;
  Mat<double> u2m1;                 // int_0^s u2(t; s) dt
  Mat<double> conv;                 // 2 int_0^s S(sigma, s - sigma) dsigma
  std::array<Mat<double>, 4> exact;   // I_1 .. I_4
  std::array<Mat<double>, 4> approx;  // convolution-form approximations
  int samples() const { return static_cast<int>(u2m1.cols()); }
};

// S, S with (grad u^f)' and S with both (grad u^f)' and (grad u^g)' at
// (sigma, r) in steps; full-grid interior-supported vectors.
struct SourceTriple {
  Vec<double> s, s_f, s_fg;
};
using PairSource = std::function<SourceTriple(int sigma, int r)>;

IntegratedField integrate_u2m1(const SpectralOperator& op, double dt, int s_steps, const PairSource& src);
IntegratedField integrate_u2m1(const SpectralOperator& op, const FluxOperator& flux, const TimeSeries<double>& uf,
                               const TimeSeries<double>& ug, int s_steps);

// Relative discrete residual of d_s^2 u2m1 + B u2m1 - (conv + sum I_j) over
// interior s samples (weighted L2 in space and s).
double u2m1_residual(const SpectralOperator& op, const IntegratedField& field);

// ||u2m1(s)||_{H1} / s^2 per s sample (zero at s = 0).
std::vector<double> u2m1_growth(const Grid& g, const IntegratedField& field);

// Per-mode remainder of the first-order expansion of lambda^{-1/2} sin(r lambda^{1/2}):
// -r^2 int_0^1 (1 - theta) lambda^{1/2} sin(theta r lambda^{1/2}) dtheta, by
// Gauss-Legendre quadrature in theta.
double sin_expansion_remainder(double lambda, double r, int nodes = 24);

template <class S>
Mat<S> SpectralOperator::project_full(const Mat<S>& frames) const {
  Mat<S> inner(static_cast<Index>(g_->interior_nodes().size()), frames.cols());
  for (size_t k = 0; k < g_->interior_nodes().size(); ++k) inner.row(static_cast<Index>(k)) = frames.row(g_->interior_nodes()[k]);
  return project<S>(inner);
}

template <class S>
Mat<S> SpectralOperator::synthesize_full(const Mat<S>& coeffs) const {
  const Mat<S> inner = synthesize<S>(coeffs);
  Mat<S> out = Mat<S>::Zero(g_->size(), coeffs.cols());
  for (size_t k = 0; k < g_->interior_nodes().size(); ++k) out.row(g_->interior_nodes()[k]) = inner.row(static_cast<Index>(k));
  return out;
}

}  // namespace nlw
