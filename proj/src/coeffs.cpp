#include "nlwave/coeffs.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace nlw {

double Bump::operator()(const Point& x, int n) const {
  double v = amp;
  for (int a = 0; a < n; ++a) {
    const double t = std::abs(x[a] - center[a]) / radius;
    if (t >= 1.0) return 0.0;
    v *= 0.5 * (1.0 + std::cos(std::numbers::pi * t));
  }
  return v;
}

bool CoefficientSet::quadratic() const {
  for (const auto& f : c)
    if (f.size() > 0) return true;
  return false;
}

CoefficientSet gamma_only(int n, const Vec<double>& gamma) {
  CoefficientSet cs;
  cs.n = n;
  cs.gamma = gamma;
  cs.c.assign(static_cast<size_t>(n * n * n), Vec<double>());
  return cs;
}

Recipe preset(const std::string& name, std::uint64_t seed) {
  Recipe r;
  r.name = name;
  r.seed = seed;
  if (name == "constant_gamma") return r;
  if (name == "smooth_gamma_bump") {
    r.gamma_bump = Bump{Point(0.5, 0.5, 0.5), 0.35, 0.3};
    return r;
  }
  if (name == "single_c_bump") {
    r.c.push_back({0, 0, 1, Bump{Point(0.5, 0.5, 0.5), 0.25, 0.5}});
    return r;
  }
  if (name == "random_c_field") {
    r.gamma_bump = Bump{Point(0.5, 0.5, 0.5), 0.35, 0.3};
    return r;
  }
  throw config_error("coeffs", "unknown recipe '" + name + "'");
}

CoefficientSet synth_coeffs(const Grid& g, const Recipe& recipe) {
  const int n = g.n();
  CoefficientSet cs = gamma_only(n, Vec<double>::Constant(g.size(), recipe.gamma0));
  cs.h_valid = recipe.h_valid;
  if (recipe.gamma_bump) cs.gamma += sample<double>(g, [&](const Point& x) { return (*recipe.gamma_bump)(x, n); });

  std::vector<CBump> bumps = recipe.c;
  if (recipe.name == "random_c_field") {
    std::mt19937_64 rng(recipe.seed);
    std::uniform_int_distribution<int> axis(0, n - 1);
    std::uniform_real_distribution<double> centre(0.4, 0.6), amp(-0.5, 0.5);
    for (int b = 0; b < recipe.random_count; ++b) {
      CBump cb;
      cb.j = axis(rng);
      cb.k = axis(rng);
      cb.l = axis(rng);
      for (int a = 0; a < 3; ++a) cb.bump.center[a] = a < n ? centre(rng) : 0.0;
      cb.bump.radius = 0.25;
      cb.bump.amp = amp(rng);
      bumps.push_back(cb);
    }
  }
  for (const auto& cb : bumps) {
    if (cb.j < 0 || cb.k < 0 || cb.l < 0 || cb.j >= n || cb.k >= n || cb.l >= n)
      throw config_error("coeffs", "c index out of range");
    auto& slot = cs.c[cs.slot(cb.j, cb.k, cb.l)];
    const Vec<double> f = sample<double>(g, [&](const Point& x) { return cb.bump(x, n); });
    slot = slot.size() ? Vec<double>(slot + f) : f;
  }
  if (recipe.remainder) {
    cs.cubic = true;
    cs.r = sample<double>(g, [&](const Point& x) { return (*recipe.remainder)(x, n); });
  }
  validate(g, cs, recipe.gamma_min);
  return cs;
}

void validate(const Grid& g, const CoefficientSet& cs, double gamma_min) {
  if (cs.gamma.size() != g.size()) throw config_error("coeffs", "gamma size mismatch");
  if (cs.gamma.minCoeff() < gamma_min) throw config_error("coeffs", "gamma below gamma_min");
  if (!(cs.h_valid > 0)) throw config_error("coeffs", "h_valid must be positive");
  auto near_boundary = [&](Index i) {
    const auto p = g.multi(i);
    for (int a = 0; a < g.n(); ++a)
      if (p[a] < 2 || p[a] > g.dims() - 3) return true;
    return false;
  };
  auto check_support = [&](const Vec<double>& f, const char* what) {
    for (Index i = 0; i < g.size(); ++i)
      if (near_boundary(i) && f[i] != 0.0)
        throw config_error("coeffs", std::string(what) + " does not vanish within 2 nodes of the boundary");
  };
  for (const auto& f : cs.c)
    if (f.size()) check_support(f, "c");
  if (cs.cubic) check_support(cs.r, "remainder weight");
}

Mat<double> eval_flux(const CoefficientSet& cs, const Mat<double>& q) {
  const int n = cs.n;
  Mat<double> out(q.rows(), n);
  for (Index i = 0; i < q.rows(); ++i) {
    const double q2 = q.row(i).squaredNorm();
    if (cs.cubic && cs.r[i] != 0.0 && std::sqrt(q2) > cs.h_valid)
      throw numerical_error("coeffs", "|q| exceeds h_valid at node " + std::to_string(i));
    for (int j = 0; j < n; ++j) {
      double v = cs.gamma[i] * q(i, j);
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          if (cs.has_c(j, k, l)) v += cs.c[cs.slot(j, k, l)][i] * q(i, k) * q(i, l);
      if (cs.cubic) v += cs.r[i] * q2 * q(i, j);
      out(i, j) = v;
    }
  }
  return out;
}

SymmetrizedCoefficients zero_symmetrized(int n, Index size) {
  SymmetrizedCoefficients s;
  s.n = n;
  s.s.assign(static_cast<size_t>(n * n * n), Vec<double>::Zero(size));
  return s;
}

SymmetrizedCoefficients symmetrize(const CoefficientSet& cs) {
  const int n = cs.n;
  SymmetrizedCoefficients s = zero_symmetrized(n, cs.gamma.size());
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        auto& dst = s.s[s.slot(j, k, l)];
        if (cs.has_c(j, k, l)) dst += 0.5 * cs.c[cs.slot(j, k, l)];
        if (cs.has_c(j, l, k)) dst += 0.5 * cs.c[cs.slot(j, l, k)];
      }
  return s;
}

CoefficientSet with_symmetric_c(const CoefficientSet& cs, const SymmetrizedCoefficients& s) {
  CoefficientSet out = cs;
  for (size_t k = 0; k < s.s.size(); ++k)
    out.c[k] = s.s[k].cwiseAbs().maxCoeff() > 0.0 ? s.s[k] : Vec<double>();
  return out;
}

double relative_l2(const Grid& g, const SymmetrizedCoefficients& got, const SymmetrizedCoefficients& truth) {
  double num = 0.0, den = 0.0;
  const auto& w = g.quadrature_weights();
  for (size_t k = 0; k < truth.s.size(); ++k) {
    num += ((got.s[k] - truth.s[k]).array().square() * w.array()).sum();
    den += (truth.s[k].array().square() * w.array()).sum();
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

double sup_error(const SymmetrizedCoefficients& got, const SymmetrizedCoefficients& truth) {
  double e = 0.0;
  for (size_t k = 0; k < truth.s.size(); ++k) e = std::max(e, (got.s[k] - truth.s[k]).cwiseAbs().maxCoeff());
  return e;
}

}  // namespace nlw
