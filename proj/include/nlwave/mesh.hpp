#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "nlwave/error.hpp"

namespace nlw {

using Index = Eigen::Index;
using cplx = std::complex<double>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
using Point = Eigen::Vector3d;

template <class S>
inline constexpr bool is_complex_v = !std::is_same_v<S, double>;

struct Face {
  int axis;
  int side;  // 0 at x_axis = 0, 1 at x_axis = 1
  double normal() const { return side == 0 ? -1.0 : 1.0; }
  std::vector<Index> nodes;
  Vec<double> weights;  // trapezoid surface weights
};

// One Neumann-type sample: a boundary node seen from one face. Corner and
// edge nodes appear once per face they touch.
struct BoundaryEntry {
  int face;
  Index node;
};

// Tensor grid on [0,1]^n, x-fastest node ordering.
class Grid {
 public:
  Grid(int n, int dims);

  int n() const { return n_; }
  int dims() const { return dims_; }
  double h() const { return h_; }
  Index size() const { return size_; }
  Index stride(int axis) const { return stride_[axis]; }

  std::array<int, 3> multi(Index node) const;
  Index index(const std::array<int, 3>& ijk) const;
  double coord(Index node, int axis) const { return multi(node)[axis] * h_; }
  Point point(Index node) const;

  bool on_boundary(Index node) const { return interior_of_[node] < 0; }
  const std::vector<Index>& boundary_nodes() const { return boundary_; }
  const std::vector<Index>& interior_nodes() const { return interior_; }
  // Interior position of a node, -1 on the boundary.
  Index interior_index(Index node) const { return interior_of_[node]; }
  Index boundary_index(Index node) const { return boundary_of_[node]; }

  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<BoundaryEntry>& entries() const { return entries_; }
  const Vec<double>& quadrature_weights() const { return weights_; }
  // Surface weight per boundary entry.
  const Vec<double>& entry_weights() const { return entry_weights_; }

 private:
  int n_;
  int dims_;
  double h_;
  Index size_;
  std::array<Index, 3> stride_{};
  std::vector<Index> boundary_;
  std::vector<Index> interior_;
  std::vector<Index> interior_of_;
  std::vector<Index> boundary_of_;
  std::vector<Face> faces_;
  std::vector<BoundaryEntry> entries_;
  Vec<double> weights_;
  Vec<double> entry_weights_;
};

Grid make_grid(int n, int dims);

// Nodal field from a function of position.
template <class S, class F>
Vec<S> sample(const Grid& g, F&& f) {
  Vec<S> out(g.size());
  for (Index i = 0; i < g.size(); ++i) out[i] = f(g.point(i));
  return out;
}

// Derivative along one axis: centered inside, one-sided second order at the ends.
template <class S>
Vec<S> axis_derivative(const Grid& g, const Vec<S>& u, int axis) {
  const Index st = g.stride(axis);
  const int d = g.dims();
  const double inv2h = 0.5 / g.h();
  Vec<S> out(g.size());
  for (Index i = 0; i < g.size(); ++i) {
    const int p = g.multi(i)[axis];
    if (p == 0)
      out[i] = (-3.0 * u[i] + 4.0 * u[i + st] - u[i + 2 * st]) * inv2h;
    else if (p == d - 1)
      out[i] = (3.0 * u[i] - 4.0 * u[i - st] + u[i - 2 * st]) * inv2h;
    else
      out[i] = (u[i + st] - u[i - st]) * inv2h;
  }
  return out;
}

// Columns are components.
template <class S>
Mat<S> gradient(const Grid& g, const Vec<S>& u) {
  Mat<S> out(g.size(), g.n());
  for (int a = 0; a < g.n(); ++a) out.col(a) = axis_derivative<S>(g, u, a);
  return out;
}

// Nodal divergence of F, or of gamma*F when gamma is given.
template <class S>
Vec<S> divergence(const Grid& g, const Mat<S>& flux, const Vec<double>* gamma = nullptr) {
  Vec<S> out = Vec<S>::Zero(g.size());
  for (int a = 0; a < g.n(); ++a) {
    Vec<S> comp = flux.col(a);
    if (gamma) comp = comp.cwiseProduct(gamma->template cast<S>());
    out += axis_derivative<S>(g, comp, a);
  }
  return out;
}

template <class S>
S integrate(const Grid& g, const Vec<S>& u) {
  return (u.array() * g.quadrature_weights().array().template cast<S>()).sum();
}

// Values indexed like Grid::entries().
template <class S>
S boundary_integrate(const Grid& g, const Vec<S>& values) {
  return (values.array() * g.entry_weights().array().template cast<S>()).sum();
}

template <class S>
Vec<S> normal_trace(const Grid& g, const Mat<S>& flux) {
  const auto& es = g.entries();
  Vec<S> out(static_cast<Index>(es.size()));
  for (size_t e = 0; e < es.size(); ++e) {
    const Face& f = g.faces()[es[e].face];
    out[static_cast<Index>(e)] = f.normal() * flux(es[e].node, f.axis);
  }
  return out;
}

// Midpoint coefficient between node i and its +axis neighbour.
inline double midpoint(const Vec<double>& c, Index i, Index st) { return 0.5 * (c[i] + c[i + st]); }

// Sparse K with (K u)_i = -div(gamma grad u)_i on interior rows, compact
// stencil with midpoint gamma; boundary rows are empty.
Eigen::SparseMatrix<double> stiffness_matrix(const Grid& g, const Vec<double>& gamma);

// Interior-restricted blocks of the stiffness matrix.
struct StiffnessBlocks {
  Eigen::SparseMatrix<double> ii;  // interior x interior
  Eigen::SparseMatrix<double> ib;  // interior x boundary (boundary_index order)
};
StiffnessBlocks stiffness_blocks(const Grid& g, const Vec<double>& gamma);

template <class S>
Vec<S> restrict_interior(const Grid& g, const Vec<S>& u) {
  Vec<S> out(static_cast<Index>(g.interior_nodes().size()));
  for (size_t k = 0; k < g.interior_nodes().size(); ++k) out[static_cast<Index>(k)] = u[g.interior_nodes()[k]];
  return out;
}

template <class S>
Vec<S> restrict_boundary(const Grid& g, const Vec<S>& u) {
  Vec<S> out(static_cast<Index>(g.boundary_nodes().size()));
  for (size_t k = 0; k < g.boundary_nodes().size(); ++k) out[static_cast<Index>(k)] = u[g.boundary_nodes()[k]];
  return out;
}

template <class S>
Vec<S> extend(const Grid& g, const Vec<S>& interior, const Vec<S>& boundary) {
  Vec<S> out(g.size());
  for (size_t k = 0; k < g.interior_nodes().size(); ++k) out[g.interior_nodes()[k]] = interior[static_cast<Index>(k)];
  for (size_t k = 0; k < g.boundary_nodes().size(); ++k) out[g.boundary_nodes()[k]] = boundary[static_cast<Index>(k)];
  return out;
}

template <class S>
Vec<S> extend_zero(const Grid& g, const Vec<S>& interior) {
  return extend<S>(g, interior, Vec<S>::Zero(static_cast<Index>(g.boundary_nodes().size())));
}

// Discrete L2 and H1 norms with trapezoid weights.
template <class S>
double l2_norm(const Grid& g, const Vec<S>& u) {
  return std::sqrt((u.array().abs2() * g.quadrature_weights().array()).sum());
}

template <class S>
double h1_norm(const Grid& g, const Vec<S>& u) {
  double acc = (u.array().abs2() * g.quadrature_weights().array()).sum();
  const Mat<S> du = gradient<S>(g, u);
  for (int a = 0; a < g.n(); ++a) acc += (du.col(a).array().abs2() * g.quadrature_weights().array()).sum();
  return std::sqrt(acc);
}

// Snapshot: <stem>.bin holds little-endian f64 (re,im interleaved when
// complex), <stem>.json the header.
void write_snapshot(const std::string& stem, const Grid& g, const Vec<double>& u, const std::string& role);
void write_snapshot(const std::string& stem, const Grid& g, const Vec<cplx>& u, const std::string& role);

struct Snapshot {
  int n = 0;
  int dims = 0;
  double h = 0;
  bool complex = false;
  std::string role;
  Vec<cplx> values;
};
Snapshot read_snapshot(const std::string& stem);

}  // namespace nlw
