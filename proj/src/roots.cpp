#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>

#include "resprob/solvers.hpp"

namespace resprob {

namespace {

// Parlett and Reinsch diagonal balancing, restricted to powers of two so the
// eigenvalues are not perturbed. Companion matrices of chains with a tiny
// a_0 have entries spanning many orders of magnitude; without balancing the
// QR iteration loses most of its accuracy.
void balance_matrix(Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::MatrixXd offdiag = m;
  offdiag.diagonal().setZero();

  const double gamma = 0.9;
  bool changed;
  do {
    changed = false;
    for (int i = 0; i < n; ++i) {
      const double row_norm = offdiag.row(i).lpNorm<1>();
      const double col_norm = offdiag.col(i).lpNorm<1>();
      if (row_norm == 0.0 || col_norm == 0.0) continue;

      int exponent = 0;
      std::frexp(row_norm / col_norm, &exponent);
      exponent /= 2;
      if (exponent == 0) continue;

      const double scaled =
          row_norm * std::ldexp(1.0, -exponent) + col_norm * std::ldexp(1.0, exponent);
      if (scaled < gamma * (row_norm + col_norm)) {
        changed = true;
        m.row(i) *= std::ldexp(1.0, -exponent);
        m.col(i) *= std::ldexp(1.0, exponent);
        offdiag.row(i) *= std::ldexp(1.0, -exponent);
        offdiag.col(i) *= std::ldexp(1.0, exponent);
        offdiag.diagonal().setZero();
      }
    }
  } while (changed);
}

std::complex<double> horner(const std::vector<double>& coeffs,
                            std::complex<double> x) {
  std::complex<double> acc(coeffs[0], 0.0);
  for (std::size_t i = 1; i < coeffs.size(); ++i) acc = acc * x + coeffs[i];
  return acc;
}

std::complex<double> horner_derivative(const std::vector<double>& coeffs,
                                       std::complex<double> x) {
  const std::size_t deg = coeffs.size() - 1;
  std::complex<double> acc(coeffs[0] * static_cast<double>(deg), 0.0);
  for (std::size_t i = 1; i < deg; ++i)
    acc = acc * x + coeffs[i] * static_cast<double>(deg - i);
  return acc;
}

// One guarded Newton step. Roots outside the unit circle are polished on the
// reversed polynomial at 1/z, where Horner evaluation cannot overflow.
std::complex<double> polish_root(const std::vector<double>& coeffs,
                                 const std::vector<double>& reversed,
                                 std::complex<double> z) {
  const bool outside = std::abs(z) > 1.0;
  const std::vector<double>& p = outside ? reversed : coeffs;
  const std::complex<double> x = outside ? 1.0 / z : z;

  const std::complex<double> fx = horner(p, x);
  const std::complex<double> dfx = horner_derivative(p, x);
  if (dfx == std::complex<double>(0.0, 0.0)) return z;
  const std::complex<double> x1 = x - fx / dfx;
  if (!std::isfinite(x1.real()) || !std::isfinite(x1.imag())) return z;
  if (std::abs(horner(p, x1)) >= std::abs(fx)) return z;
  return outside ? 1.0 / x1 : x1;
}

}  // namespace

std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& monic) {
  const int deg = static_cast<int>(monic.size()) - 1;
  if (deg < 1) return {};
  if (monic[0] != 1.0) throw std::invalid_argument("polynomial must be monic");

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int j = 0; j < deg; ++j) companion(0, j) = -monic[static_cast<std::size_t>(j + 1)];
  balance_matrix(companion);

  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success)
    throw NumericalError("companion eigenvalue iteration failed");

  std::vector<double> reversed(monic.rbegin(), monic.rend());
  std::vector<std::complex<double>> roots(static_cast<std::size_t>(deg));
  for (int i = 0; i < deg; ++i)
    roots[static_cast<std::size_t>(i)] = polish_root(monic, reversed, es.eigenvalues()(i));
  return roots;
}

std::vector<double> char_poly(const ChainCoefficients& chain) {
  const int h = chain.h();
  const int n = chain.n();
  std::vector<double> c(static_cast<std::size_t>(n + 1), 0.0);
  c[0] = 1.0;
  double w = gamma(chain, h - 1, 1.0);
  for (int j = h + 1; j <= n; ++j) w += chain.alpha(j);
  for (int j = 1; j <= n; ++j)
    if (j != h) c[static_cast<std::size_t>(j)] = chain.alpha(j);
  c[static_cast<std::size_t>(h)] -= w;
  return c;
}

PolynomialRoots char_roots(const ChainCoefficients& chain) {
  std::vector<double> c = char_poly(chain);
  // Synthetic division by (lambda - 1); the remainder is P(1) = 0 by
  // construction and is discarded.
  std::vector<double> q(c.size() - 1);
  q[0] = c[0];
  for (std::size_t i = 1; i < q.size(); ++i) q[i] = c[i] + q[i - 1];
  return PolynomialRoots{polynomial_roots(q), true};
}

}  // namespace resprob
