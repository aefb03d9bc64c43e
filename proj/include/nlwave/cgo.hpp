#pragma once

#include <array>
#include <optional>
#include <vector>

#include "nlwave/mesh.hpp"

namespace nlw {

using CPoint = Eigen::Vector3cd;

// zeta1 = r eta + i(a/2 + s xi), zeta2 = -r eta + i(a/2 - s xi), r = sqrt(|a|^2/4 + s^2).
struct ZetaPair {
  int n = 3;
  Point a = Point::Zero();
  Point xi = Point::Zero();
  Point eta = Point::Zero();
  double s = 0.0;
  double r = 0.0;
  CPoint zeta1 = CPoint::Zero();
  CPoint zeta2 = CPoint::Zero();
  CPoint rho = CPoint::Zero();  // eta + i xi
};

// n = 3 needs a, xi, eta mutually orthogonal; n = 2 only accepts a = 0.
ZetaPair make_zeta_pair(const Point& a, const Point& xi, const Point& eta, double s, int n = 3);

cplx dot(const CPoint& u, const CPoint& v);  // bilinear, no conjugation

// rho in V: rho.rho = 0 and |rho|^2 = 2.
struct RhoDirection {
  CPoint rho = CPoint::Zero();
};
RhoDirection make_rho(const CPoint& rho, int n = 3);

// Symbol of the 2n+1 point Laplacian on e^{zeta.x}: sum_d 4 sinh^2(zeta_d h/2)/h^2.
cplx discrete_symbol(const CPoint& zeta, double h, int n);

// zeta + delta e, e = Re zeta/|Re zeta|, with delta chosen so that the discrete
// symbol vanishes. e^{phase.x} is then exactly harmonic for the grid Laplacian.
CPoint discrete_phase(const CPoint& zeta, double h, int n);

struct CgoOptions {
  int pad = -1;          // box nodes added on each side; -1 gives a factor-2 box
  double tol = 1e-10;    // relative residual of the box solve
  int restart = 60;
  int max_iterations = 2000;
  bool discrete = true;  // use discrete_phase(zeta) as the exponential phase
};

// u = e^{phase.x} m (1 + R), m = gamma^{-1/2}, on the grid of Omega.
struct CgoSolution {
  cplx tau;
  CPoint zeta = CPoint::Zero();
  CPoint phase = CPoint::Zero();
  Vec<double> m;
  Vec<cplx> r;
  Vec<cplx> r_tau;       // dR/dtau, empty until requested
  Vec<cplx> box_mr;      // m R on the box
  int pad = 0;
  Point bloch = Point::Zero();
  double min_symbol = 0.0;
  double residual = 0.0; // assembled u, see cgo_residual
  double box_residual = 0.0;
  double r_l2 = 0.0, grad_r_l2 = 0.0;
  double r_tau_l2 = 0.0;
  int iterations = 0;

  // m (1 + R)
  Vec<cplx> envelope() const;
  // e^{phase.x} m (1 + R); large when Re phase is.
  Vec<cplx> field(const Grid& g) const;
};

// Conjugated u-level operator e^{-phase.x} (tau^2 chi - div gamma_e grad) e^{phase.x}
// on a Bloch-periodic box of period 2(dims-1) h for the default padding.
// chi is 1 on Omega and falls to 0 inside the padding, gamma_e equals gamma on
// Omega and relaxes to the mean boundary value, so q is compactly supported
// in the box and the operator is unchanged on Omega. The Bloch twist keeps the
// constant-coefficient symbol away from zero.
class CgoBox {
 public:
  CgoBox(const Grid& g, const Vec<double>& gamma, cplx tau, const CPoint& phase, int pad = -1,
         const std::optional<Point>& bloch = std::nullopt);

  int pad() const { return pad_; }
  int period() const { return per_; }
  const Point& bloch() const { return bloch_; }
  // min |symbol| of the constant-coefficient operator over the Bloch lattice
  double min_symbol() const { return min_symbol_; }
  const Eigen::SparseMatrix<cplx>& matrix() const { return a_; }
  const Vec<double>& box_m() const { return m_; }
  const Vec<double>& chi() const { return chi_; }

  // A x = b by GMRES with the constant-coefficient preconditioner; throws when
  // the true relative residual stays above 1e-6.
  Vec<cplx> solve(const Vec<cplx>& b, double tol, int restart, int max_iterations, int* iterations = nullptr,
                  double* residual = nullptr) const;
  // Exact inverse of the gamma0, tau = 0 operator, diagonal in the Bloch basis.
  Vec<cplx> precondition(const Vec<cplx>& b) const;
  // A on a periodic (untwisted) field, e.g. m.
  Vec<cplx> apply_periodic(const Vec<cplx>& v) const;
  Vec<cplx> to_omega(const Vec<cplx>& box) const;

 private:
  const Grid* g_;
  int n_, pad_ = 0, per_ = 0;
  Index size_ = 0;
  double h_;
  cplx tau_;
  CPoint phase_;
  double gamma0_ = 1.0;
  Point bloch_ = Point::Zero();
  double min_symbol_ = 0.0;
  Vec<double> gamma_, m_, chi_;
  Vec<cplx> symbol_;
  Eigen::SparseMatrix<cplx> a_;
  std::vector<Mat<cplx>> fwd_, inv_;

  std::array<int, 3> box_multi(Index b) const;
  Index neighbour(Index b, int axis, int step) const;
};

CgoSolution solve_remainder(const Grid& g, const Vec<double>& gamma, cplx tau, const CPoint& zeta,
                            const CgoOptions& opt = {});

// Fills sol.r_tau from A phi' = -2 tau chi m (1 + R), phi' = m R' (zeta held fixed).
void tau_derivative_remainder(const Grid& g, const Vec<double>& gamma, CgoSolution& sol, const CgoOptions& opt = {});

// max |e^{-phase.x}(tau^2 u + K u)| / max(|e^{-phase.x} tau^2 u|, |e^{-phase.x} K u|)
// over interior nodes, K from stiffness_matrix on Omega.
double cgo_residual(const Grid& g, const Vec<double>& gamma, const CgoSolution& sol);

// Schrodinger-form defect of R: -Delta R + sign 2 phase.grad R - p_h(phase)(1+R) + q(1+R),
// q = tau^2/gamma + Delta(sqrt gamma)/sqrt gamma, by centered differences on
// nodes two cells away from the boundary, relative to max |q|.
double schrodinger_defect(const Grid& g, const Vec<double>& gamma, const CgoSolution& sol, double sign);

// Default independent directions: Re rho^j along coordinate axes.
std::vector<CPoint> default_rhos(int n);

struct FamilyReport {
  double r = 0.0;
  std::vector<CgoSolution> v;
  Vec<cplx> det;          // det(d v_j / d x_i)
  Vec<double> normalized; // |det| / (|e^{sum phase_j.x}| m^n |det Phi|), Phi rows phase_j
  double min_normalized = 0.0;
  double min_scaled = 0.0;  // min |det| / |e^{sum phase_j.x}|
  double threshold = 0.0;
  double fraction_above = 0.0;
};

// det(grad v_1, ..., grad v_n) at every node.
Vec<cplx> gradient_determinant(const Grid& g, const std::vector<Vec<cplx>>& fields);

// v_j = m e^{r rho^j.x}(1 + R_j). Throws when the normalized determinant falls
// below threshold anywhere.
FamilyReport independent_family(const Grid& g, const Vec<double>& gamma, cplx tau, double r,
                                const std::vector<CPoint>& rhos = {}, double threshold = 0.25,
                                const CgoOptions& opt = {});

// Smallest r in the sweep whose family passes the threshold, -1 if none.
double find_r_min(const Grid& g, const Vec<double>& gamma, cplx tau, const std::vector<double>& rs,
                  double threshold = 0.25, const CgoOptions& opt = {});

}  // namespace nlw
