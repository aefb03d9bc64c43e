#include "nlwave/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nlwave/fit.hpp"

namespace nlw {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Tangential multi-index of a face node, axes 0..n-2.
std::array<int, 3> face_multi(Index t, int nt, int n) {
  std::array<int, 3> out{0, 0, 0};
  for (int d = 0; d + 1 < n; ++d) {
    out[d] = static_cast<int>(t % nt);
    t /= nt;
  }
  return out;
}

int wavenumber(int k, int nt) { return k <= nt / 2 ? k : k - nt; }

}  // namespace

Index LayerGrid::face_size() const {
  Index out = 1;
  for (int d = 0; d + 1 < n; ++d) out *= nt;
  return out;
}

Point LayerGrid::point(Index node) const {
  const Index fs = face_size();
  const auto t = face_multi(node % fs, nt, n);
  Point y = Point::Zero();
  for (int d = 0; d + 1 < n; ++d) y[d] = t[d] * ht();
  y[n - 1] = static_cast<double>(node / fs) * hn();
  return y;
}

FaceTrace face_trace(const Profile& gamma, int n, int nt) {
  LayerGrid lg;
  lg.n = n;
  lg.nt = nt;
  const Index fs = lg.face_size();
  FaceTrace out;
  out.n = n;
  out.nt = nt;
  out.gamma.resize(fs);
  out.dn_gamma.resize(fs);
  out.dt_gamma.resize(fs, std::max(1, n - 1));
  const double step = 1e-5;
  for (Index t = 0; t < fs; ++t) {
    const Point y = lg.point(t);
    out.gamma[t] = gamma(y);
    Point e = Point::Zero();
    e[n - 1] = step;
    // One-sided fourth order: the profile may be undefined for y_n < 0.
    out.dn_gamma[t] =
        (-25.0 * gamma(y) + 48.0 * gamma(y + e) - 36.0 * gamma(y + 2 * e) + 16.0 * gamma(y + 3 * e) - 3.0 * gamma(y + 4 * e)) /
        (12.0 * step);
    for (int d = 0; d + 1 < n; ++d) {
      Point f = Point::Zero();
      f[d] = step;
      out.dt_gamma(t, d) = (gamma(y + f) - gamma(y - f)) / (2.0 * step);
    }
  }
  return out;
}

BoundarySymbolData boundary_symbols(double gamma, double dn_gamma, const Point& dt_gamma, const Point& eta, cplx tau,
                                    int n, SymbolConvention conv) {
  const cplx i(0.0, 1.0);
  double eta2 = 0.0, eta_dg = 0.0;
  for (int d = 0; d + 1 < n; ++d) {
    eta2 += eta[d] * eta[d];
    eta_dg += eta[d] * dt_gamma[d];
  }
  BoundarySymbolData s;
  s.lambda = std::sqrt(eta2 + tau * tau / gamma);
  const double dn_inv = -dn_gamma / (gamma * gamma);
  // grad' lambda = -tau^2 grad' gamma / (2 lambda gamma^2)
  const cplx eta_dlambda = -tau * tau * eta_dg / (2.0 * s.lambda * gamma * gamma);
  if (conv == SymbolConvention::Derived) {
    s.e0 = (-s.lambda * dn_gamma + i * eta_dg) / gamma;
    s.e1 = dn_inv * tau * tau + 2.0 * i * eta_dlambda;
  } else {
    s.e0 = i * (s.lambda * dn_gamma + eta_dg) / gamma;
    s.e1 = -dn_inv * tau * tau + 2.0 * (-i) * eta_dlambda;
  }
  s.f1 = s.e0 / (2.0 * s.lambda) - s.e1 / (4.0 * s.lambda * s.lambda);
  s.f2 = -s.e1 / (4.0 * s.lambda);
  return s;
}

Vec<double> face_samples(const LayerGrid& grid, const Profile& phi) {
  Vec<double> out(grid.face_size());
  for (Index t = 0; t < out.size(); ++t) out[t] = phi(grid.point(t));
  return out;
}

LayerSolution assemble_vN(const LayerGrid& grid, const FaceTrace& face, const Vec<double>& phi, int order, cplx tau,
                          SymbolConvention conv) {
  if (order != 0 && order != 1) throw config_error("asymptotics", "order must be 0 or 1");
  if (face.nt != grid.nt || face.n != grid.n) throw config_error("asymptotics", "face trace does not match grid");
  const int n = grid.n, nt = grid.nt;
  const Index fs = grid.face_size();
  if (phi.size() != fs) throw config_error("asymptotics", "phi size mismatch");

  // phi_hat(k) = nt^{-(n-1)} sum_t phi(t) e^{-i eta_k . y'_t}
  Mat<cplx> f1d(nt, nt);
  for (int k = 0; k < nt; ++k)
    for (int j = 0; j < nt; ++j) f1d(k, j) = std::exp(cplx(0.0, -2.0 * kPi * wavenumber(k, nt) * j / nt)) / double(nt);
  Vec<cplx> hat = phi.cast<cplx>();
  if (n == 2) {
    hat = f1d * hat;
  } else {
    Eigen::Map<Mat<cplx>> x(hat.data(), nt, nt);
    x = (f1d * x * f1d.transpose()).eval();
  }

  LayerSolution out;
  out.grid = grid;
  out.tau = tau;
  out.order = order;
  out.values = Vec<cplx>::Zero(grid.size());
  for (Index t = 0; t < fs; ++t) {
    const auto ty = face_multi(t, nt, n);
    Point dg = Point::Zero();
    for (int d = 0; d + 1 < n; ++d) dg[d] = face.dt_gamma(t, d);
    for (Index k = 0; k < fs; ++k) {
      if (hat[k] == cplx(0.0)) continue;
      const auto km = face_multi(k, nt, n);
      Point eta = Point::Zero();
      double phase = 0.0;
      for (int d = 0; d + 1 < n; ++d) {
        eta[d] = 2.0 * kPi * wavenumber(km[d], nt);
        phase += eta[d] * ty[d] * grid.ht();
      }
      const BoundarySymbolData s = boundary_symbols(face.gamma[t], face.dn_gamma[t], dg, eta, tau, n, conv);
      const cplx base = std::exp(cplx(0.0, phase)) * hat[k];
      for (int i = 0; i <= grid.normal; ++i) {
        const double y = i * grid.hn();
        cplx a = std::exp(-s.lambda * y);
        if (order == 1) a *= 1.0 + s.f1 * y + s.f2 * y * y;
        out.values[t + fs * i] += base * a;
      }
    }
  }
  return out;
}

Vec<cplx> direct_layer_solve(const LayerGrid& grid, const Profile& gamma, const Vec<double>& phi, cplx tau) {
  const int n = grid.n, nt = grid.nt;
  const Index fs = grid.face_size();
  const int m = grid.normal;
  Vec<double> gv(grid.size());
  for (Index p = 0; p < grid.size(); ++p) gv[p] = gamma(grid.point(p));
  const Index unknowns = fs * (m - 1);
  auto unknown = [&](Index node) { return node - fs; };  // rows i = 1..m-1
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(static_cast<size_t>(unknowns) * (2 * n + 1));
  Vec<cplx> rhs = Vec<cplx>::Zero(unknowns);
  const double iht2 = 1.0 / (grid.ht() * grid.ht()), ihn2 = 1.0 / (grid.hn() * grid.hn());
  for (int i = 1; i < m; ++i)
    for (Index t = 0; t < fs; ++t) {
      const Index p = t + fs * i;
      const Index row = unknown(p);
      cplx diag = tau * tau;
      const auto tm = face_multi(t, nt, n);
      Index st = 1;
      for (int d = 0; d + 1 < n; ++d) {
        for (int step : {-1, 1}) {
          const int c = (tm[d] + step + nt) % nt;
          const Index q = p + (c - tm[d]) * st;
          const double gl = 0.5 * (gv[p] + gv[q]);
          diag += gl * iht2;
          trip.emplace_back(row, unknown(q), -gl * iht2);
        }
        st *= nt;
      }
      for (int step : {-1, 1}) {
        const Index q = p + step * fs;
        const double gl = 0.5 * (gv[p] + gv[q]);
        diag += gl * ihn2;
        const int iq = i + step;
        if (iq == 0)
          rhs[row] += gl * ihn2 * phi[t];
        else if (iq < m)
          trip.emplace_back(row, unknown(q), -gl * ihn2);
      }
      trip.emplace_back(row, row, diag);
    }
  Eigen::SparseMatrix<cplx> a(unknowns, unknowns);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw numerical_error("asymptotics", "layer factorization failed");
  const Vec<cplx> x = lu.solve(rhs);
  Vec<cplx> out = Vec<cplx>::Zero(grid.size());
  out.head(fs) = phi.cast<cplx>();
  out.segment(fs, unknowns) = x;
  return out;
}

LayerStudy layer_error_study(int n, const Profile& gamma, const Profile& phi, const std::vector<double>& taus,
                             const std::vector<int>& orders, const LayerOptions& opt) {
  LayerStudy out;
  for (double tau : taus) {
    LayerGrid grid;
    grid.n = n;
    grid.nt = opt.nt;
    grid.normal = opt.normal;
    const FaceTrace face = face_trace(gamma, n, opt.nt);
    const double gmax = face.gamma.maxCoeff();
    grid.depth = opt.depth_factor * std::sqrt(gmax) / tau;
    const Vec<double> ph = face_samples(grid, phi);
    const double lambda0 = tau / std::sqrt(face.gamma.minCoeff());
    if (lambda0 * grid.hn() > 1.0) {
      std::ostringstream msg;
      msg << "layer under-resolved: lambda h = " << lambda0 * grid.hn() << " at tau = " << tau;
      throw config_error("asymptotics", msg.str());
    }
    const Vec<cplx> direct = direct_layer_solve(grid, gamma, ph, tau);
    const double slab = opt.slab_factor * std::sqrt(gmax) / tau;
    auto slab_norm = [&](const Vec<cplx>& v) {
      double acc = 0.0;
      for (Index p = 0; p < grid.size(); ++p)
        if (grid.point(p)[n - 1] <= slab) acc += std::norm(v[p]);
      return std::sqrt(acc);
    };
    const double ref = slab_norm(direct);
    for (int order : orders) {
      const LayerSolution v = assemble_vN(grid, face, ph, order, tau, opt.conv);
      out.rows.push_back({tau, order, slab_norm(v.values - direct) / ref});
    }
  }
  for (int order : orders) {
    std::vector<double> ts, es;
    for (const auto& r : out.rows)
      if (r.order == order) {
        ts.push_back(r.tau);
        es.push_back(r.error);
      }
    out.slopes.push_back(ts.size() >= 2 ? loglog_slope(ts, es) : 0.0);
  }
  return out;
}

}  // namespace nlw
