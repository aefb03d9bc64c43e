#pragma once

#include <array>
#include <string>
#include <vector>

#include "nlwave/cgo.hpp"
#include "nlwave/coeffs.hpp"
#include "nlwave/forward.hpp"
#include "nlwave/laplace.hpp"

namespace nlw {

// Symmetric index pairs (k, l), k <= l, in row-major order.
std::vector<std::array<int, 2>> sym_pairs(int n);

// Gradient of e^{phase.x} W as e^{phase.x} (phase W + grad W): the envelope is
// differentiated, never the exponential.
Mat<cplx> phased_gradient(const Grid& g, const CPoint& phase, const Vec<cplx>& envelope);
Vec<cplx> phase_factor(const Grid& g, const CPoint& phase);

// V[s](f, g, w) = -2 int sum_jkl s^j_kl (d_k f d_l g + d_l f d_k g) d_j w with
// nodal gradients and trapezoid weights.
cplx volume_form(const Grid& g, const SymmetrizedCoefficients& s, const Mat<cplx>& df, const Mat<cplx>& dg,
                 const Mat<cplx>& dw);

enum class MeasureMode { Oracle, Boundary };
MeasureMode parse_mode(const std::string& name);
std::string mode_name(MeasureMode mode);

struct MeasurementFunctional {
  cplx tau;
  MeasureMode mode = MeasureMode::Oracle;
  cplx value;
};

// max |tau^2 w + K w| / max(|tau^2 w|, |K w|) over interior nodes.
double tau_residual(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& w);

// Conormal data of a field with zero Dirichlet trace. Flux: the discrete
// Neumann data h^n (K U)_b of the stiffness operator. OneSided: gamma d_nu U per
// boundary entry with the nodal one-sided gradient and trapezoid surface weights.
enum class Conormal { Flux, OneSided };

// Boundary route: int_dOmega gamma d_nu U w from the conormal data of U.
MeasurementFunctional boundary_measurement(const Grid& g, const Vec<double>& gamma, cplx tau, const Vec<cplx>& u2m1,
                                           const Vec<cplx>& w, double w_tol = 1e-8,
                                           Conormal conormal = Conormal::Flux);
// Volume route with known coefficients: -V[s](u^f, u^g, w) from nodal fields,
// the same functional as the boundary route when u2m1 carries the source
// 2 div[s (grad u^f x grad u^g + swap)].
MeasurementFunctional volume_measurement(const Grid& g, const Vec<double>& gamma, const SymmetrizedCoefficients& s,
                                         cplx tau, const Vec<cplx>& uf, const Vec<cplx>& ug, const Vec<cplx>& w,
                                         double w_tol = 1e-8);

// Time-domain pieces of the boundary route. A probe run is the linear wave
// solution with Dirichlet data chi(t) ftilde.
struct ProbeRun {
  Vec<cplx> hat;   // Laplace transform at tau
  Mat<cplx> tail;  // column m: T(t_m) = int_{t_m}^inf e^{-tau v} u(v) dv
};
ProbeRun probe_run(const Grid& g, const Vec<double>& gamma, const Vec<cplx>& ftilde, const Vec<double>& chi, double dt,
                   cplx tau, double tol = 1e-10);

// Tails of the product-trapezoid Laplace integral, truncated at the last level.
Mat<cplx> laplace_tails(const Mat<cplx>& frames, double dt, cplx tau);

// W(p) = B^{-1/2} sin(p B^{1/2}) K_ib w_b by leapfrog (zero displacement,
// initial velocity K_ib w_b).
Mat<cplx> adjoint_run(const Grid& g, const Vec<double>& gamma, const Vec<cplx>& w, double dt, int steps);

// U = int_0^P B^{-1/2} sin(p B^{1/2}) Z(p) dp with Z(p) = 2 div[c (grad uf x
// grad T(p) + swap)], computed as the final state of the run y'' + B y = Z(P - t).
// Equals the transform of u2^(-1) up to truncation.
Vec<cplx> reversed_source_run(const Grid& g, const CoefficientSet& cs, const Vec<cplx>& uf, const Mat<cplx>& tail,
                              double dt);

// Link kernel of the exact linear model: for every axis j and link e,
// H^j_kl(e) = sum_p w_p (q_k(uf) q_l(T_p) + q_l(uf) q_k(T_p)) (W_p(i) - W_p(i+e_j)) / h,
// so that -h^n ... sum_e c^j_kl,mid H^j_kl(e) reproduces the boundary functional.
struct LinkKernel {
  int n = 3;
  std::vector<std::vector<Index>> links;  // per axis: link origins
  std::vector<Mat<cplx>> h;               // per axis: links x sym_pairs
};
LinkKernel link_kernel(const Grid& g, const Vec<cplx>& uf, const Mat<cplx>& tail, const Mat<cplx>& adjoint, double dt);
// Value of the linear model at coefficients s.
cplx apply_link_kernel(const Grid& g, const LinkKernel& k, const SymmetrizedCoefficients& s);

// Nodal kernel: V[s](f, g, w) = sum_nodes sum_j sum_(k<=l) s^j_kl G^j_kl.
struct NodalKernel {
  int n = 3;
  Mat<cplx> g;  // nodes x (n * pairs), column j * pairs + p
};
NodalKernel nodal_kernel(const Grid& g, const Mat<cplx>& df, const Mat<cplx>& dg, const Mat<cplx>& dw);
cplx apply_nodal_kernel(const NodalKernel& k, const SymmetrizedCoefficients& s);

// Polynomial extrapolation to 1/s = 0 through every sample; stage k uses the
// k largest s values.
struct RichardsonResult {
  cplx value;
  std::vector<cplx> stages;
  double spread = 0.0;  // max_k |stage_k - value|, absolute
};
Vec<double> richardson_weights(const std::vector<double>& s);
RichardsonResult richardson(const std::vector<double>& s, const std::vector<cplx>& values);

// Orthonormal eta, xi with eta, xi orthogonal to a; a = 0 gives (e_x, e_y).
struct PanelFrame {
  Point eta = Point::UnitX();
  Point xi = Point::UnitY();
};
PanelFrame panel_frame(const Point& a);

// a = spacing m, m integer, |a| <= a_max, one of each +-a pair (the partner is
// the conjugate panel for real test fields).
std::vector<Point> half_a_grid(double a_max, double spacing);

// Raised-cosine basis for the unknown s^j_kl: unknown index
// (center * n + j) * pairs + p.
struct BumpBasis {
  std::vector<Point> centers;
  double radius = 0.25;
  std::vector<Vec<double>> fields;
  int n = 3;
  Index unknowns() const;
};
BumpBasis make_basis(const Grid& g, const std::vector<Point>& centers, double radius);
std::vector<Point> lattice_centers(const std::vector<double>& ticks, int n = 3);
SymmetrizedCoefficients basis_synthesis(const Grid& g, const BumpBasis& basis, const Vec<double>& x);

struct ReconstructOptions {
  cplx tau = 1.0;
  std::vector<double> s_values{8.0, 16.0, 32.0};
  double a_max = -1.0;        // <= 0: pi / (2h)
  double a_spacing = 6.283185307179586;
  double family_r = 3.0;
  std::vector<Point> centers = lattice_centers({0.3, 0.5, 0.7});
  double basis_radius = 0.25;
  double spread_tol = 0.1;    // Richardson stage spread on rows with |a| <= min s
  CgoOptions cgo;
  // boundary route: its model is the exact discrete linear map, so one s
  // suffices and a shorter a-grid keeps the time stepping affordable
  std::vector<double> boundary_s_values{8.0};
  double boundary_a_max = 19.0;
  double cfl = 0.5;
  int chi_mu = 3;
  double chi_t0 = 1.0;
  double trunc_tol = 1e-10;
  double w_tol = 1e-8;
  int jobs = 1;
};

// Panels for one measurement mode, each on its own a-grid and s sweep. Rows
// come in blocks per a: for each test
// field w_t (real part of a family member), type A uses (u^f, u^g, w)
// = (CGO zeta1, CGO zeta2, w_t) and type B uses (w_t, CGO zeta1, CGO zeta2).
struct FourierPanel {
  MeasureMode mode = MeasureMode::Oracle;
  cplx tau;
  std::vector<Point> a;
  std::vector<double> s;
  int rows_per_a = 0;
  double kappa0 = 1.0;
  // rows x truths: Richardson limits of M(s)/s^2
  Mat<cplx> data;
  Mat<cplx> model;      // rows x unknowns, same extrapolation, before kappa0
  Vec<cplx> calibration_data, calibration_model;
  Mat<double> spread;   // rows x truths, relative to the a-block scale
  double checked_spread = 0.0;  // max spread over checked rows and truths
  double max_spread = 0.0;      // over all rows, diagnostic
  double build_seconds = 0.0;
  Index rows() const { return data.rows(); }
};

struct PanelProblem {
  const Grid* grid = nullptr;
  Vec<double> gamma;
  std::vector<SymmetrizedCoefficients> truths;
  SymmetrizedCoefficients calibration;
  ReconstructOptions opt;
};

// CGO pairs are solved once per (a, s) and shared by every requested mode.
std::vector<FourierPanel> fourier_panels(const PanelProblem& prob, const BumpBasis& basis,
                                         const std::vector<MeasureMode>& modes);
FourierPanel fourier_panel(const PanelProblem& prob, const BumpBasis& basis, MeasureMode mode);

// Least-squares recovery from a panel for one truth column.
struct Recovery {
  SymmetrizedCoefficients s;
  Vec<double> x;
  double residual = 0.0;  // relative panel residual after the fit
  double condition = 0.0;
};
Recovery recover(const Grid& g, const BumpBasis& basis, const FourierPanel& panel, Index truth);

// M1-type block of the decaying terms: V[s](u1', u2', w) / s^2 with
// u' = e^{phase.x} m R', R' = dR/dtau, over an s sweep at fixed a.
struct VanishingTerms {
  std::vector<double> s;
  std::vector<double> scaled;  // |M1| / s^2
  std::vector<double> main;    // |M| / s^2
  double slope = 0.0;
};
VanishingTerms vanishing_terms(const Grid& g, const Vec<double>& gamma, const SymmetrizedCoefficients& c, cplx tau,
                               const Point& a, const std::vector<double>& s_values, const Vec<cplx>& w,
                               const CgoOptions& opt = {});

// Pointwise solve of H_i = sum_j h_j d_j w_i with matrix (d_j w_i). Nodes where
// the matrix condition number exceeds cond_max are masked (h = 0).
struct UnmixResult {
  Mat<cplx> h;  // nodes x n
  std::vector<Index> masked;
  double mask_fraction = 0.0;
};
UnmixResult unmix_pointwise(const Grid& g, const Mat<cplx>& hw, const std::vector<Mat<cplx>>& dw,
                            double cond_max = 1e6, double max_fraction = 0.01);

// h_j = sum_kl rho_k rho_l s^j_kl m^2 and g_k = sum_jl rho_j rho_l s^j_kl m^2.
Mat<cplx> h_fields(const SymmetrizedCoefficients& s, const Vec<double>& gamma, const CPoint& rho);
Mat<cplx> g_fields(const SymmetrizedCoefficients& s, const Vec<double>& gamma, const CPoint& rho);

// Stage 1: for every k < l, h under rho = e_k + i e_l gives s_kk - s_ll and
// 2 s_kl. Stage 2: the g fields for the given rhos pin the diagonal.
struct PolarizationInput {
  std::vector<Mat<cplx>> stage1;  // one per sym pair k < l, row-major
  std::vector<CPoint> rhos;
  std::vector<Mat<cplx>> stage2;  // one per rho
};
std::vector<CPoint> stage1_rhos(int n);
SymmetrizedCoefficients polarization_unmix(const Grid& g, const Vec<double>& gamma, const PolarizationInput& in);

struct ReconstructionResult {
  MeasureMode mode = MeasureMode::Oracle;
  std::vector<SymmetrizedCoefficients> recovered;
  std::vector<double> rel_l2, sup, panel_residual;
  double kappa0 = 1.0;
  double checked_spread = 0.0, max_spread = 0.0;
  double condition = 0.0;
  double polarization_defect = 0.0;  // max over truths of sup |unmix(h(s)) - s|
  double seconds = 0.0;
  FourierPanel panel;
};

std::vector<ReconstructionResult> reconstruct_pipeline(const PanelProblem& prob, const std::vector<MeasureMode>& modes);

}  // namespace nlw
