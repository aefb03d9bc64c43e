#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nlwave/mesh.hpp"

namespace nlw {

// Product of raised-cosine windows, supported in the cube |x_a - c_a| < radius.
struct Bump {
  Point center = Point(0.5, 0.5, 0.5);
  double radius = 0.25;
  double amp = 1.0;
  double operator()(const Point& x, int n) const;
};

struct CBump {
  int j = 0, k = 0, l = 0;
  Bump bump;
};

struct CoefficientSet {
  int n = 2;
  Vec<double> gamma;
  std::vector<Vec<double>> c;  // n^3 slots, index (j*n+k)*n+l; empty slot means zero
  bool cubic = false;
  Vec<double> r;  // cubic remainder weight when cubic
  double h_valid = 1.0;

  size_t slot(int j, int k, int l) const { return static_cast<size_t>((j * n + k) * n + l); }
  bool has_c(int j, int k, int l) const { return c[slot(j, k, l)].size() > 0; }
  bool quadratic() const;
  bool nonlinear() const { return quadratic() || cubic; }
};

CoefficientSet gamma_only(int n, const Vec<double>& gamma);

struct SymmetrizedCoefficients {
  int n = 2;
  std::vector<Vec<double>> s;  // same slot layout; s_kl^j == s_lk^j
  size_t slot(int j, int k, int l) const { return static_cast<size_t>((j * n + k) * n + l); }
};

struct Recipe {
  std::string name = "constant_gamma";
  double gamma0 = 1.0;
  std::optional<Bump> gamma_bump;
  std::vector<CBump> c;
  std::optional<Bump> remainder;
  std::uint64_t seed = 0;
  int random_count = 3;
  double h_valid = 1.0;
  double gamma_min = 0.25;
};

// Named presets: constant_gamma, smooth_gamma_bump, single_c_bump, random_c_field.
Recipe preset(const std::string& name, std::uint64_t seed = 0);
CoefficientSet synth_coeffs(const Grid& g, const Recipe& recipe);
void validate(const Grid& g, const CoefficientSet& cs, double gamma_min = 0.25);

// Pointwise C(x,q) = gamma q + P(x,q) + R(x,q); q has one row per node.
Mat<double> eval_flux(const CoefficientSet& cs, const Mat<double>& q);

SymmetrizedCoefficients symmetrize(const CoefficientSet& cs);
CoefficientSet with_symmetric_c(const CoefficientSet& cs, const SymmetrizedCoefficients& s);
SymmetrizedCoefficients zero_symmetrized(int n, Index size);

// Relative L2 difference over all slots, trapezoid weights.
double relative_l2(const Grid& g, const SymmetrizedCoefficients& got, const SymmetrizedCoefficients& truth);
double sup_error(const SymmetrizedCoefficients& got, const SymmetrizedCoefficients& truth);

}  // namespace nlw
