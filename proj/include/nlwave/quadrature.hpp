#pragma once

#include <Eigen/Dense>

#include <utility>

namespace nlw {

// Gauss-Legendre nodes and weights on [a, b] (Golub-Welsch).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n, double a = -1.0, double b = 1.0) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    j(k, k - 1) = j(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  const Eigen::VectorXd x = es.eigenvalues();
  const Eigen::VectorXd w = 2.0 * es.eigenvectors().row(0).transpose().array().square();
  const double half = 0.5 * (b - a), mid = 0.5 * (b + a);
  return {(mid + half * x.array()).matrix(), (half * w.array()).matrix()};
}

// Trapezoid weights dt * (1/2, 1, ..., 1, 1/2) for n+1 samples.
inline Eigen::VectorXd trapezoid_weights(int n, double dt) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n + 1, dt);
  if (n == 0) return Eigen::VectorXd::Zero(1);
  w[0] = w[n] = 0.5 * dt;
  return w;
}

}  // namespace nlw
