#pragma once

#include <functional>
#include <vector>

#include "nlwave/mesh.hpp"

namespace nlw {

// Flat-face layer geometry: y = (y', y_n), y' periodic with period 1 on nt
// nodes per tangential axis (axes 0..n-2), y_n = x_{n-1} >= 0 the inward normal.
using Profile = std::function<double(const Point&)>;

// gamma, d_n gamma and the tangential gradient at the face nodes.
struct FaceTrace {
  int n = 2;
  int nt = 0;
  Vec<double> gamma, dn_gamma;
  Mat<double> dt_gamma;  // one column per tangential axis
};

FaceTrace face_trace(const Profile& gamma, int n, int nt);

enum class SymbolConvention { Derived, Stated };

struct BoundarySymbolData {
  cplx lambda, e0, e1, f1, f2;
};

// lambda = sqrt(|eta'|^2 + tau^2/gamma), f1 = e0/(2 lambda) - e1/(4 lambda^2),
// f2 = -e1/(4 lambda). Derived: e0 = (-lambda d_n gamma + i eta'.grad' gamma)/gamma,
// e1 = (d_n gamma^{-1}) tau^2 + 2 i eta'.grad' lambda. Stated: e0 = i(lambda d_n gamma
// + eta'.grad' gamma)/gamma, e1 = -(d_n gamma^{-1}) tau^2 + 2 eta'.D' lambda.
BoundarySymbolData boundary_symbols(double gamma, double dn_gamma, const Point& dt_gamma, const Point& eta, cplx tau,
                                    int n, SymbolConvention conv = SymbolConvention::Derived);

struct LayerGrid {
  int n = 2;
  int nt = 64;     // tangential nodes per axis
  int normal = 800;  // normal cells
  double depth = 1.0;
  double ht() const { return 1.0 / nt; }
  double hn() const { return depth / normal; }
  Index face_size() const;
  Index size() const { return face_size() * (normal + 1); }
  Point point(Index node) const;  // tangential index fastest, then normal
};

struct LayerSolution {
  LayerGrid grid;
  cplx tau;
  int order = 0;
  Vec<cplx> values;
};

// v^(N) = sum_eta' e^{i y'.eta'} [a0 + a_{-1} 1_{N>=1}] phi_hat(eta'), a0 = e^{-lambda y_n},
// a_{-1} = (f1 y_n + f2 y_n^2) e^{-lambda y_n}; discrete Fourier basis of the face.
LayerSolution assemble_vN(const LayerGrid& grid, const FaceTrace& face, const Vec<double>& phi, int order, cplx tau,
                          SymbolConvention conv = SymbolConvention::Derived);

// tau^2 v - div(gamma grad v) = 0 on the layer grid, v = phi on y_n = 0, v = 0 on
// y_n = depth, periodic in y'; midpoint gamma on links.
Vec<cplx> direct_layer_solve(const LayerGrid& grid, const Profile& gamma, const Vec<double>& phi, cplx tau);

Vec<double> face_samples(const LayerGrid& grid, const Profile& phi);

struct LayerErrorRow {
  double tau = 0.0;
  int order = 0;
  double error = 0.0;
};

struct LayerStudy {
  std::vector<LayerErrorRow> rows;
  std::vector<double> slopes;  // one per order, log-log in tau
};

struct LayerOptions {
  int nt = 64;
  int normal = 1200;
  double depth_factor = 12.0;  // depth = depth_factor sqrt(gamma_max) / tau
  double slab_factor = 8.0;    // error slab y_n <= slab_factor sqrt(gamma_max) / tau
  SymbolConvention conv = SymbolConvention::Derived;
};

// Relative L2 error of v^(N) against the direct solve on the near-face slab.
// Rejects (tau / sqrt(gamma_min)) hn > 1.
LayerStudy layer_error_study(int n, const Profile& gamma, const Profile& phi, const std::vector<double>& taus,
                             const std::vector<int>& orders, const LayerOptions& opt = {});

}  // namespace nlw
