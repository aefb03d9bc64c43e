#include "doctest.h"

#include <cmath>

#include "nlwave/asymptotics.hpp"

using namespace nlw;

namespace {

constexpr double kPi = 3.14159265358979323846;

Profile constant(double c) {
  return [c](const Point&) { return c; };
}

Profile normal_profile = [](const Point& y) { return 1.0 + 0.5 * y[1]; };
Profile mixed_profile = [](const Point& y) { return 1.0 + 0.5 * y[1] + 0.1 * std::sin(2.0 * kPi * y[0]); };
Profile phi_profile = [](const Point& y) { return 1.0 + 0.5 * std::cos(2.0 * kPi * y[0]); };

// max |tau^2 v - gamma Delta_h v| / (tau^2 max |v|) over interior nodes of a 2D layer grid.
double layer_residual(const LayerGrid& g, const Vec<cplx>& v, double gamma, double tau) {
  const int nt = g.nt;
  const double ht2 = g.ht() * g.ht(), hn2 = g.hn() * g.hn();
  double worst = 0.0;
  for (int i = 1; i < g.normal; ++i)
    for (int t = 0; t < nt; ++t) {
      auto at = [&](int tt, int ii) { return v[((tt + nt) % nt) + static_cast<Index>(nt) * ii]; };
      const cplx lap = (at(t + 1, i) - 2.0 * at(t, i) + at(t - 1, i)) / ht2 +
                       (at(t, i + 1) - 2.0 * at(t, i) + at(t, i - 1)) / hn2;
      worst = std::max(worst, std::abs(tau * tau * at(t, i) - gamma * lap));
    }
  return worst / (tau * tau * v.cwiseAbs().maxCoeff());
}

template <class F>
bool throws_config(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == ErrorKind::Config;
  }
  return false;
}

}  // namespace

TEST_CASE("lambda for constant gamma and zero frequency") {
  const auto s = boundary_symbols(2.0, 0.0, Point::Zero(), Point::Zero(), 6.0, 2);
  CHECK(std::abs(s.lambda - 6.0 / std::sqrt(2.0)) < 1e-14);
  CHECK(std::abs(s.e0) == 0.0);
  CHECK(std::abs(s.e1) == 0.0);
  CHECK(std::abs(s.f1) == 0.0);
  CHECK(std::abs(s.f2) == 0.0);
}

TEST_CASE("lambda with tangential frequency") {
  const auto s = boundary_symbols(1.0, 0.0, Point::Zero(), Point(2.0 * kPi, 0.0, 0.0), 10.0, 3);
  CHECK(std::abs(s.lambda - std::sqrt(4.0 * kPi * kPi + 100.0)) < 1e-12);
}

TEST_CASE("lambda keeps positive real part for complex tau") {
  for (double ti : {-2.0, 0.0, 2.0}) {
    const auto s = boundary_symbols(1.3, 0.4, Point(0.2, 0.0, 0.0), Point(4.0, 0.0, 0.0), cplx(8.0, ti), 2);
    CHECK(s.lambda.real() > 0.0);
  }
}

TEST_CASE("constant gamma trace has vanishing symbol corrections") {
  const FaceTrace face = face_trace(constant(1.7), 3, 8);
  CHECK(face.dn_gamma.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(face.dt_gamma.cwiseAbs().maxCoeff() < 1e-9);
  for (double eta : {0.0, 2.0 * kPi, 6.0 * kPi}) {
    const auto s = boundary_symbols(face.gamma[0], face.dn_gamma[0], Point::Zero(), Point(eta, -eta, 0.0), 12.0, 3);
    CHECK(std::abs(s.f1) < 1e-9);
    CHECK(std::abs(s.f2) < 1e-9);
  }
}

TEST_CASE("linear normal profile matches hand substitution") {
  // gamma = 1 + c y_n, eta' = 0: substituting e^{-tau y}(1 + f1 y + f2 y^2) into
  // gamma v'' + c v' - tau^2 v and cancelling the O(tau) terms gives
  // f2 = c tau / 4, f1 = -c / 4; e1 = d_n(gamma^{-1}) tau^2 = -c tau^2.
  const double c = 0.5, tau = 10.0;
  const FaceTrace face = face_trace([c](const Point& y) { return 1.0 + c * y[1]; }, 2, 4);
  CHECK(std::abs(face.dn_gamma[0] - c) < 1e-8);
  const auto s = boundary_symbols(face.gamma[0], face.dn_gamma[0], Point::Zero(), Point::Zero(), tau, 2);
  CHECK(std::abs(s.e1 - cplx(-c * tau * tau)) < 1e-5);
  CHECK(std::abs(s.e0 - cplx(-c * tau)) < 1e-6);
  CHECK(std::abs(s.f1 - cplx(-c / 4.0)) < 1e-8);
  CHECK(std::abs(s.f2 - cplx(c * tau / 4.0)) < 1e-7);

  // The opposite sign on the tau^2 term breaks the O(tau) cancellation.
  const auto st = boundary_symbols(face.gamma[0], face.dn_gamma[0], Point::Zero(), Point::Zero(), tau, 2,
                                   SymbolConvention::Stated);
  CHECK(std::abs(st.f2 - cplx(c * tau / 4.0)) > 1.0);
}

TEST_CASE("zero boundary data gives the zero field") {
  LayerGrid g;
  g.nt = 16;
  g.normal = 40;
  g.depth = 0.5;
  const FaceTrace face = face_trace(mixed_profile, 2, g.nt);
  const Vec<double> phi = Vec<double>::Zero(g.face_size());
  for (int order : {0, 1}) CHECK(assemble_vN(g, face, phi, order, 16.0).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assembled field reproduces boundary data") {
  for (int n : {2, 3}) {
    LayerGrid g;
    g.n = n;
    g.nt = 16;
    g.normal = 20;
    g.depth = 0.5;
    const Profile gamma = [](const Point& y) { return 1.0 + 0.3 * y[0] * (1.0 - y[0]) + 0.4 * y[2] + 0.5 * y[1]; };
    const FaceTrace face = face_trace(gamma, n, g.nt);
    const Profile phi = [](const Point& y) { return std::cos(2.0 * kPi * y[0]) + 0.3 * std::sin(4.0 * kPi * y[1]) + 0.1; };
    const Vec<double> ph = face_samples(g, phi);
    for (int order : {0, 1}) {
      const LayerSolution v = assemble_vN(g, face, ph, order, 20.0);
      CHECK((v.values.head(g.face_size()) - ph.cast<cplx>()).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("constant gamma single mode solves the discrete equation to O(h^2)") {
  const double gamma = 1.5, tau = 12.0;
  const Profile phi = [](const Point& y) { return std::cos(2.0 * kPi * y[0]); };
  std::vector<double> hs, res;
  for (int k : {1, 2, 4}) {
    LayerGrid g;
    g.nt = 16 * k;
    g.normal = 60 * k;
    g.depth = 1.0;
    const FaceTrace face = face_trace(constant(gamma), 2, g.nt);
    const LayerSolution v = assemble_vN(g, face, face_samples(g, phi), 0, tau);
    hs.push_back(g.hn());
    res.push_back(layer_residual(g, v.values, gamma, tau));
  }
  CHECK(res[0] < 1e-2);
  CHECK(std::log(res[0] / res[2]) / std::log(hs[0] / hs[2]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("order checks") {
  LayerGrid g;
  g.nt = 8;
  g.normal = 10;
  const FaceTrace face = face_trace(constant(1.0), 2, 8);
  CHECK(throws_config([&] { assemble_vN(g, face, Vec<double>::Ones(8), 2, 10.0); }));
  CHECK(throws_config([&] { assemble_vN(g, face, Vec<double>::Ones(7), 0, 10.0); }));
  LayerOptions o;
  o.normal = 5;
  CHECK(throws_config([&] { layer_error_study(2, constant(1.0), phi_profile, {64.0}, {0}, o); }));
}

TEST_CASE("constant gamma errors sit at the discretization floor") {
  LayerOptions o;
  o.nt = 32;
  const LayerStudy st = layer_error_study(2, constant(1.5), phi_profile, {8, 16, 32, 64}, {0, 1}, o);
  for (const auto& r : st.rows) CHECK(r.error < 2e-4);
  for (std::size_t k = 0; k < st.rows.size(); k += 2)
    CHECK(std::abs(st.rows[k + 1].error - st.rows[k].error) < 1e-12);
}

TEST_CASE("first-order correction gains an order in tau") {
  LayerOptions o;
  o.nt = 32;
  for (const Profile& gamma : {normal_profile, mixed_profile}) {
    const LayerStudy st = layer_error_study(2, gamma, phi_profile, {8, 16, 32, 64}, {0, 1}, o);
    MESSAGE("slopes N=0 " << st.slopes[0] << " N=1 " << st.slopes[1]);
    CHECK(st.slopes[0] == doctest::Approx(-1.0).epsilon(0.15));
    CHECK(st.slopes[1] <= st.slopes[0] - 0.7);
    for (std::size_t k = 0; k < st.rows.size(); k += 2) CHECK(st.rows[k + 1].error < st.rows[k].error);
  }
}

TEST_CASE("stated sign convention does not improve on order zero") {
  LayerOptions o;
  o.nt = 32;
  o.conv = SymbolConvention::Stated;
  const LayerStudy st = layer_error_study(2, normal_profile, phi_profile, {8, 16, 32, 64}, {0, 1}, o);
  CHECK(st.slopes[1] > st.slopes[0] - 0.7);
  for (std::size_t k = 0; k < st.rows.size(); k += 2) CHECK(st.rows[k + 1].error > st.rows[k].error);
}

TEST_CASE("h refinement saturates at the asymptotic error") {
  std::vector<double> e1, floor0;
  for (int k : {1, 2, 4}) {
    LayerOptions o;
    o.nt = 16 * k;
    o.normal = 300 * k;
    e1.push_back(layer_error_study(2, mixed_profile, phi_profile, {16}, {1}, o).rows[0].error);
    floor0.push_back(layer_error_study(2, constant(1.5), phi_profile, {16}, {1}, o).rows[0].error);
  }
  MESSAGE("N=1 " << e1[0] << " " << e1[1] << " " << e1[2] << " floor " << floor0[0] << " " << floor0[2]);
  CHECK(std::abs(e1[2] - e1[1]) < 0.02 * e1[2]);
  CHECK(std::abs(e1[1] - e1[0]) < 0.05 * e1[2]);
  CHECK(floor0[2] < 0.3 * floor0[0]);
  CHECK(e1[2] > 20.0 * floor0[2]);
}
