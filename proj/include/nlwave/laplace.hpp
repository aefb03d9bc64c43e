#pragma once

#include <array>
#include <functional>
#include <vector>

#include "nlwave/spectral.hpp"

namespace nlw {

// chi(t) = t^{mu-1}/(mu-1)! psi(t/T0) on t_m = m dt. psi is 1 on [0, 1/2],
// a raised cosine on [1/2, 9/10] and 0 beyond.
struct ChiProfile {
  int mu = 3;
  double t0 = 1.0;
  double dt = 0.0;
  Vec<double> values;
};

double chi_cutoff(double u);
ChiProfile make_chi(int mu, double t0, double dt, int steps);

// Sector S = {tau_R >= 1, |tau_I| < kappa tau_R}.
bool in_sector(cplx tau, double kappa = 0.25);
void require_sector(cplx tau, const std::string& stage, double kappa = 0.25);

// Weights of the product trapezoid rule for int_0^T e^{-tau t} u(t) dt: u is
// replaced by its piecewise-linear interpolant and each panel is integrated
// exactly against the exponential. Samples at t0 + m dt, m = 0..steps.
Vec<cplx> laplace_weights(cplx tau, double dt, int steps, double t0 = 0.0);

// Transform of every row of frames (columns are time levels). Throws when
// e^{-tau_R T_max} max_m |frame_m|_inf exceeds tol, unless the last frame is
// identically zero (compactly supported series).
Vec<cplx> laplace_transform(const Mat<double>& frames, double dt, cplx tau, double t0 = 0.0, double tol = 1e-10);

template <class Series>
Vec<cplx> laplace_transform(const Series& series, cplx tau, double tol = 1e-10) {
  return laplace_transform(series.frames, series.dt, tau, series.t0, tol);
}
inline Vec<cplx> laplace_transform(const BoundaryTrace<double>& trace, cplx tau, double tol = 1e-10) {
  return laplace_transform(trace.values, trace.dt, tau, 0.0, tol);
}

cplx chi_hat(const ChiProfile& chi, cplx tau, double tol = 1e-10);

// Factorized tau^2 v - div(gamma grad v) = 0 with Dirichlet data given on
// Grid::boundary_nodes().
class TauSolver {
 public:
  TauSolver(const Grid& g, const Vec<double>& gamma, cplx tau);

  cplx tau() const { return tau_; }
  Vec<cplx> solve(const Vec<cplx>& dirichlet) const;
  // Interior solve of (tau^2 + K) u = rhs with zero Dirichlet data.
  Vec<cplx> solve_source(const Vec<cplx>& rhs) const;
  // max |tau^2 v + K v| / max(|tau^2 v|, |K v|) over interior nodes.
  double residual(const Vec<cplx>& v) const;

 private:
  const Grid* g_;
  cplx tau_;
  Eigen::SparseMatrix<cplx> a_;
  Eigen::SparseMatrix<cplx> ib_;
  Eigen::SparseMatrix<double> k_;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu_;
};

Vec<cplx> solve_tau_elliptic(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& dirichlet);

// c of a minus c of b; gamma and remainder are dropped.
CoefficientSet coefficient_difference(const CoefficientSet& a, const CoefficientSet& b);

// B(a, b) = -int sum_jkl c^j_kl (d_k a d_l b + d_k b d_l a) d_j w, evaluated on
// grid links: the j-derivative is the link difference, transverse derivatives
// average the nodal gradients at both ends, c is the link midpoint value.
cplx bilinear_block(const Grid& g, const CoefficientSet& c, const Vec<cplx>& a, const Vec<cplx>& b,
                    const Vec<cplx>& w);

// Transformed fields entering the identities at one tau.
struct TauFields {
  cplx tau;
  Vec<cplx> uf, ug, w;   // u1^f, u1^g, test solution
  Vec<cplx> uf_dot;      // L[d_t u1^f]
  Vec<cplx> f_hat;       // L[t u1^g]
  Vec<cplx> g_hat;       // L[t^2 d_t u1^g]
  Vec<cplx> u2m1, conv;  // L[u2^(-1)], L[conv]
  std::array<Vec<cplx>, 4> exact, approx;  // L[I_m], L[dominant part of I_m]
};

TauFields transform_fields(const TimeSeries<double>& uf, const TimeSeries<double>& ug,
                           const IntegratedField& field, const Vec<cplx>& w, cplx tau, double tol = 1e-10);

// -2 int c {d u^f d u^g + swap} . grad w + sum_m int I_m w.
cplx integral_identity_eval(const Grid& g, const CoefficientSet& c, const Vec<cplx>& uf, const Vec<cplx>& ug,
                            const Vec<cplx>& w, const std::array<Vec<cplx>, 4>& terms);
cplx integral_identity_eval(const Grid& g, const CoefficientSet& c, const TauFields& f);
// Same value through the divergence-form flux operator and nodal quadrature.
cplx identity_volume_oracle(const Grid& g, const CoefficientSet& c, const Vec<cplx>& uf, const Vec<cplx>& ug,
                            const Vec<cplx>& w, const std::array<Vec<cplx>, 4>& terms);

// Combination weights for the blocks B(u^f, u^g), B(u^f', F), B(u^f', F) and
// B(u^f', G). derived_weights follow from the corrected dominant parts;
// stated_weights are -8/+4/+2/+1 applied to the blocks -B.
using BlockWeights = std::array<double, 4>;
BlockWeights derived_weights();
BlockWeights stated_weights();

struct PostLemmaValue {
  cplx value;          // derived combination from product blocks
  cplx stated;         // -8/+4/+2/+1 combination
  cplx exact;          // integral_identity_eval
  cplx dominant;       // identity with transformed dominant parts in place of I_m
  double defect = 0.0;         // |exact - dominant| / |dominant|
  double product_gap = 0.0;    // |value - dominant| / |dominant|
  double stated_defect = 0.0;  // |exact - stated| / |dominant|
  double stated_gap = 0.0;     // |stated - dominant| / |dominant|
};

PostLemmaValue post_lemma_identity_eval(const Grid& g, const CoefficientSet& c, const TauFields& f);

// Relative size of I2 - I2,dom against I2,dom over a tau sweep.
struct DominanceReport {
  std::vector<double> taus;
  std::vector<double> ratios;
  double slope = 0.0;
  bool degenerate = false;
};

DominanceReport dominant_part_diag(const Grid& g, const IntegratedField& field, const std::vector<double>& taus,
                                   int term = 1, double tol = 1e-10);

// |f(c) - mean_k f(c + r e^{2 pi i k / points})| / |f(c)|.
double mean_value_defect(const std::function<cplx(cplx)>& f, cplx center, double radius, int points = 16);

// Relative L2 residual of tau^2 U + K U - (L[conv] + sum L[I_m]) for U = L[u2^(-1)].
double tau_domain_residual(const Grid& g, const Vec<double>& gamma, const TauFields& f);

}  // namespace nlw
