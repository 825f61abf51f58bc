#include "resprob/solvers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>

namespace resprob {

using cplx = std::complex<double>;

std::string to_token(SolverKind kind) {
  switch (kind) {
    case SolverKind::Analytic: return "analytic";
    case SolverKind::Companion: return "companion";
    case SolverKind::CyclicReduction: return "cyclic-reduction";
  }
  return "?";
}

SolverKind solver_from_token(const std::string& token) {
  if (token == "analytic") return SolverKind::Analytic;
  if (token == "companion") return SolverKind::Companion;
  if (token == "cyclic-reduction") return SolverKind::CyclicReduction;
  throw ConfigError("unknown solver '" + token +
                    "' (expected analytic, companion or cyclic-reduction)");
}

// ---------------------------------------------------------------------------
// SteadyState

SteadyState SteadyState::positive(SolverKind method, bool conservative,
                                  double pi0, std::vector<double> boundary,
                                  ChainCoefficients recursion_chain) {
  SteadyState s;
  s.classification_ = Recurrence::PositiveRecurrent;
  s.method_ = method;
  s.conservative_ = conservative;
  s.pi0_ = pi0;
  s.boundary_ = std::move(boundary);
  s.params_ = recursion_chain.params();
  s.chain_ = std::make_shared<const ChainCoefficients>(std::move(recursion_chain));
  return s;
}

SteadyState SteadyState::zero(SolverKind method, ChainCoefficients chain) {
  SteadyState s;
  s.classification_ = Recurrence::TransientOrNull;
  s.method_ = method;
  s.conservative_ = method == SolverKind::Analytic;
  s.pi0_ = 0.0;
  s.boundary_.assign(static_cast<std::size_t>(std::max(0, chain.h() - 1)), 0.0);
  s.params_ = chain.params();
  s.chain_ = std::make_shared<const ChainCoefficients>(std::move(chain));
  return s;
}

SteadyState SteadyState::certain(SolverKind method, const ReservationParams& params) {
  SteadyState s;
  s.classification_ = Recurrence::PositiveRecurrent;
  s.method_ = method;
  s.conservative_ = method == SolverKind::Analytic;
  s.always_meets_ = true;
  s.pi0_ = 1.0;
  s.params_ = params;
  return s;
}

SteadyState SteadyState::divergent(SolverKind method, const ReservationParams& params) {
  SteadyState s;
  s.classification_ = Recurrence::TransientOrNull;
  s.method_ = method;
  s.conservative_ = method == SolverKind::Analytic;
  s.pi0_ = 0.0;
  s.params_ = params;
  return s;
}

std::vector<double> SteadyState::tail(int count) const {
  if (count <= 0) return {};
  std::vector<double> out(static_cast<std::size_t>(count), 0.0);
  if (!chain_ || classification_ == Recurrence::TransientOrNull) return out;

  const ChainCoefficients& ch = *chain_;
  const int h = ch.h();
  const int n = ch.n();
  std::vector<double> pi(static_cast<std::size_t>(h + count), 0.0);
  pi[0] = pi0_;
  for (int j = 1; j < h; ++j) pi[static_cast<std::size_t>(j)] = boundary_[static_cast<std::size_t>(j - 1)];

  double w = gamma(ch, h - 1, 1.0);
  for (int j = h + 1; j <= n; ++j) w += ch.alpha(j);

  // pi^(H) balances the collapse column; later entries extend the recursion.
  {
    double acc = 0.0;
    for (int j = h + 1; j <= n; ++j) acc += ch.alpha(j);
    acc *= pi[0];
    for (int j = 1; j <= h - 1; ++j)
      acc -= gamma(ch, j, 1.0) * pi[static_cast<std::size_t>(h - j)];
    pi[static_cast<std::size_t>(h)] = acc;
  }
  int tiny_run = (std::abs(pi[static_cast<std::size_t>(h)]) < 1e-15) ? 1 : 0;
  for (int l = 1; l < count; ++l) {
    const int idx = h + l;
    if (tiny_run > n) break;  // decayed below noise; the rest stays at zero
    double acc = w * pi[static_cast<std::size_t>(l)];
    const int j_hi = std::min(n, l + h);
    for (int j = 1; j <= j_hi; ++j) {
      if (j == h) continue;
      acc -= ch.alpha(j) * pi[static_cast<std::size_t>(l + h - j)];
    }
    if (std::abs(acc) > 1.0 + 1e-6)
      throw NumericalError(
          "tail recursion diverged; for deadlines beyond the period use a "
          "coarser delta or the analytic bound");
    pi[static_cast<std::size_t>(idx)] = acc;
    tiny_run = (std::abs(acc) < 1e-15) ? tiny_run + 1 : 0;
  }
  for (int l = 0; l < count; ++l)
    out[static_cast<std::size_t>(l)] = std::max(0.0, pi[static_cast<std::size_t>(h + l)]);
  return out;
}

double SteadyState::deadline_probability(usec_t deadline) const {
  const usec_t ts = params_.server_period;
  const usec_t n_periods = params_.periods_per_job();
  if (ts <= 0) throw std::invalid_argument("state has no reservation parameters");
  if (deadline % ts != 0 || deadline / ts < n_periods)
    throw ModelError("deadline below model resolution");
  if (always_meets_) return 1.0;
  if (!chain_ || classification_ == Recurrence::TransientOrNull) return 0.0;

  const usec_t ell = deadline / ts;
  // State j means a backlog of N*Q^s + j*delta, served within
  // ceil((N*Q^s + j*delta)/Q^s) server periods.
  const usec_t j_max = (ell - n_periods) * params_.budget / params_.delta;
  double sum = pi0_;
  const int h = chain_->h();
  for (int j = 1; j < h && j <= j_max; ++j)
    sum += boundary_[static_cast<std::size_t>(j - 1)];
  if (j_max >= h) {
    // The recursion freezes once the tail has decayed below noise; the cap
    // bounds memory for extreme deadlines and can only lower the bound.
    const usec_t count = std::min<usec_t>(j_max - h + 1, 2'000'000);
    const auto t = tail(static_cast<int>(count));
    for (double v : t) sum += v;
  }
  return std::min(sum, 1.0);
}

// ---------------------------------------------------------------------------
// Analytic bound

SteadyState analytic_bound(const ChainCoefficients& chain) {
  ChainCoefficients lumped = lump(chain);
  // With H = 1 the drift is exactly 1 - sum_j (j-1) a'_j / a'_0, the
  // closed-form steady state of the lumped chain.
  const double unclamped = drift(lumped);
  if (unclamped <= 0.0) return SteadyState::zero(SolverKind::Analytic, std::move(lumped));
  return SteadyState::positive(SolverKind::Analytic, /*conservative=*/true,
                               std::min(unclamped, 1.0), {}, std::move(lumped));
}

// ---------------------------------------------------------------------------
// Companion method

namespace {

struct RootPartition {
  std::vector<cplx> stable;    // |beta| < 1: the decaying modes
  std::vector<cplx> unstable;  // everything else except the deflated root at 1
};

// Only strictly stable modes are summable, so any root with |beta| >= 1 is
// excluded from the product and contributes a boundary equation instead.
// Lattice-supported chains (step sizes sharing a divisor) place roots exactly
// on the unit circle even when positive recurrent; they belong to the
// excluded set. A root indistinguishable from +1 itself would mean the
// structural root is not simple.
RootPartition partition_roots(const std::vector<cplx>& roots) {
  RootPartition p;
  for (const cplx& z : roots) {
    if (std::abs(z - cplx(1.0, 0.0)) <= 1e-9)
      throw NumericalError("repeated eigenvalues violate the simple-roots assumption");
    if (std::abs(z) < 1.0 - 1e-9)
      p.stable.push_back(z);
    else
      p.unstable.push_back(z);
  }
  return p;
}

void check_simple_roots(const std::vector<cplx>& roots) {
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j)
      if (std::abs(roots[i] - roots[j]) <= 1e-9)
        throw NumericalError("repeated eigenvalues violate the simple-roots assumption");
}

// Product of (1 - beta) over a conjugate-closed root set, with power-of-two
// rescaling so long partial products cannot overflow.
cplx one_minus_product(const std::vector<cplx>& roots) {
  cplx prod(1.0, 0.0);
  int exponent = 0;
  for (const cplx& z : roots) {
    prod *= (cplx(1.0, 0.0) - z);
    const double mag = std::abs(prod);
    if (mag > 1e100 || (mag > 0.0 && mag < 1e-100)) {
      int e = 0;
      std::frexp(mag, &e);
      prod = cplx(std::ldexp(prod.real(), -e), std::ldexp(prod.imag(), -e));
      exponent += e;
    }
  }
  prod = cplx(std::ldexp(prod.real(), exponent), std::ldexp(prod.imag(), exponent));
  if (!std::isfinite(prod.real()) || !std::isfinite(prod.imag()))
    throw NumericalError("root product overflowed");
  return prod;
}

// Row of the boundary system for one excluded root: coefficient of pi^(k) is
// sum_{q=0}^{H-1-k} gamma(q, beta), scaled by beta^-(H-1) so every term stays
// bounded. Evaluated as prefix sums of ghat(q) = gamma(q, beta)/beta^q.
std::vector<cplx> boundary_row(const ChainCoefficients& chain, cplx beta) {
  const int h = chain.h();
  const cplx binv = 1.0 / beta;
  std::vector<cplx> prefix(static_cast<std::size_t>(h));
  cplx bp(1.0, 0.0), ghat(0.0, 0.0);
  cplx pw = std::pow(binv, h - 1);
  cplx acc(0.0, 0.0);
  for (int q = 0; q < h; ++q) {
    ghat += chain.alpha(q) * bp;
    bp *= binv;
    acc += ghat * pw;
    pw *= beta;
    prefix[static_cast<std::size_t>(q)] = acc;
  }
  std::vector<cplx> row(static_cast<std::size_t>(h));
  for (int k = 0; k < h; ++k) row[static_cast<std::size_t>(k)] = prefix[static_cast<std::size_t>(h - 1 - k)];
  return row;
}

// Boundary system: one balance row for beta = 1 with right-hand side D_1 and
// the rows of the excluded roots with right-hand side 0. Complex roots come
// in exact conjugate pairs, so each pair contributes its real and imaginary
// parts as two real rows; the solution is real by construction.
std::vector<double> solve_boundary_system(const ChainCoefficients& chain,
                                          const std::vector<cplx>& unstable,
                                          double d1) {
  const int h = chain.h();
  Eigen::MatrixXd m(h, h);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(h);

  {  // beta = 1 row: coefficients are double prefix sums of alpha.
    double gamma1 = 0.0, acc = 0.0;
    std::vector<double> prefix(static_cast<std::size_t>(h));
    for (int q = 0; q < h; ++q) {
      gamma1 += chain.alpha(q);
      acc += gamma1;
      prefix[static_cast<std::size_t>(q)] = acc;
    }
    for (int k = 0; k < h; ++k) m(0, k) = prefix[static_cast<std::size_t>(h - 1 - k)];
    rhs(0) = d1;
  }

  int r = 1;
  for (const cplx& beta : unstable) {
    if (beta.imag() < 0.0) continue;  // handled with its conjugate
    if (r >= h) throw NumericalError("root partition inconsistent");
    const std::vector<cplx> row = boundary_row(chain, beta);
    if (beta.imag() == 0.0) {
      for (int k = 0; k < h; ++k) m(r, k) = row[static_cast<std::size_t>(k)].real();
      ++r;
    } else {
      if (r + 1 >= h) throw NumericalError("root partition inconsistent");
      for (int k = 0; k < h; ++k) {
        m(r, k) = row[static_cast<std::size_t>(k)].real();
        m(r + 1, k) = row[static_cast<std::size_t>(k)].imag();
      }
      r += 2;
    }
  }
  if (r != h) throw NumericalError("root partition inconsistent");

  // Row equilibration before the LU solve.
  for (int row_i = 0; row_i < h; ++row_i) {
    double s = std::abs(rhs(row_i));
    for (int k = 0; k < h; ++k) s = std::max(s, std::abs(m(row_i, k)));
    if (s > 0.0) {
      m.row(row_i) /= s;
      rhs(row_i) /= s;
    }
  }
  const Eigen::VectorXd x = m.partialPivLu().solve(rhs);
  if (!x.allFinite()) throw NumericalError("boundary system is singular");
  return std::vector<double>(x.data(), x.data() + h);
}

}  // namespace

SteadyState companion_solve(const ChainCoefficients& chain) {
  if (classify(chain) == Recurrence::TransientOrNull)
    return SteadyState::zero(SolverKind::Companion, chain);

  const PolynomialRoots pr = char_roots(chain);
  check_simple_roots(pr.roots);
  const RootPartition part = partition_roots(pr.roots);
  const int h = chain.h();
  if (static_cast<int>(part.unstable.size()) != h - 1)
    throw NumericalError("root partition inconsistent");

  // The stable-root product equals D_1 over the excluded-root product; the
  // latter evaluation is far better conditioned when the stable roots crowd
  // the unit circle, so it is the one we trust.
  const double d1 = drift(chain);
  const cplx excluded = one_minus_product(part.unstable);
  const cplx pi0c = cplx(d1, 0.0) / excluded;
  if (std::abs(pi0c.imag()) > 1e-9 * std::max(1.0, std::abs(pi0c.real())))
    throw NumericalError("root product has a nonzero imaginary part");
  const double pi0 = pi0c.real();
  if (!(pi0 > 0.0) || pi0 > 1.0 + 1e-9)
    throw NumericalError("root partition inconsistent");

  std::vector<double> boundary;
  double pi0_system;
  if (h == 1) {
    pi0_system = d1;  // gamma(0,1) pi^(0) = D_1
  } else {
    std::vector<double> x = solve_boundary_system(chain, part.unstable, d1);
    pi0_system = x[0];
    boundary.assign(x.begin() + 1, x.end());
    // Components whose true value is near zero come back with the absolute
    // noise of the solve, which grows with the system size (observed around
    // 1e-5 at H = 1200); clamp those, but treat anything beyond the noise
    // scale as a failure. Gross failures also trip the pi^(0) cross-check
    // below.
    const double noise_floor = 2e-8 * static_cast<double>(h);
    for (double& v : boundary) {
      if (v < -noise_floor) throw NumericalError("negative boundary probability");
      v = std::max(v, 0.0);
    }
  }
  if (std::abs(pi0_system - pi0) > 1e-8)
    throw NumericalError("boundary system disagrees with the stable-root product");

  return SteadyState::positive(SolverKind::Companion, /*conservative=*/false,
                               pi0, std::move(boundary), chain);
}

// ---------------------------------------------------------------------------
// Matrix-geometric method

namespace {

double spectral_radius_estimate(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n);
  double lambda = 0.0;
  for (int it = 0; it < 60; ++it) {
    Eigen::VectorXd w = m * v;
    const double nw = w.norm();
    if (nw == 0.0) return 0.0;
    lambda = nw / v.norm();
    v = w / nw;
  }
  return lambda;
}

}  // namespace

Eigen::MatrixXd rate_matrix(const QbdpBlocks& blk) {
  const int f = blk.f;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(f, f);

  // Logarithmic-reduction doubling for the first-passage matrix G, then
  // R = A_up (I - A_same - A_up G)^-1.
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(eye - blk.a1);
  Eigen::MatrixXd up = lu.solve(blk.a2);
  Eigen::MatrixXd down = lu.solve(blk.a0);
  Eigen::MatrixXd g = down;
  Eigen::MatrixXd t = up;

  bool converged = false;
  for (int iter = 0; iter < 64; ++iter) {
    if ((1.0 - g.rowwise().sum().array()).abs().maxCoeff() < 1e-13) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd mix = up * down + down * up;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu2(eye - mix);
    const Eigen::MatrixXd up2 = lu2.solve(up * up);
    const Eigen::MatrixXd down2 = lu2.solve(down * down);
    g += t * down2;
    t *= up2;
    up = up2;
    down = down2;
  }
  if (!converged)
    throw NumericalError("matrix-geometric iteration failed to converge");

  Eigen::MatrixXd m = eye - blk.a1 - blk.a2 * g;
  return m.transpose().partialPivLu().solve(blk.a2.transpose()).transpose();
}

Eigen::MatrixXd rate_matrix_fixed_point(const QbdpBlocks& blk, double tol,
                                        int max_iter) {
  const int f = blk.f;
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(f, f);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = blk.a2 + r * blk.a1 + r * r * blk.a0;
    const double diff = (next - r).cwiseAbs().maxCoeff();
    r.swap(next);
    if (diff < tol) return r;
  }
  throw NumericalError("matrix-geometric iteration failed to converge");
}

SteadyState matrix_geometric_solve(const QbdpBlocks& blk,
                                   const ChainCoefficients& chain) {
  if (classify(chain) != Recurrence::PositiveRecurrent)
    throw std::invalid_argument(
        "matrix-geometric solver requires a positive-recurrent chain");
  const int f = blk.f;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(f, f);

  const Eigen::MatrixXd r = rate_matrix(blk);
  const double residual =
      (r - (blk.a2 + r * blk.a1 + r * r * blk.a0)).cwiseAbs().maxCoeff();
  if (residual >= 1e-12)
    throw NumericalError("matrix-geometric solution residual above 1e-12");
  if (spectral_radius_estimate(r) >= 1.0 - 1e-9)
    throw NumericalError("not positive recurrent");

  // Boundary levels: stack the level-0 and level-1 balance equations with the
  // normalization row and solve the (overdetermined) system by least squares.
  //   pi_0 (C - I) + pi_1 A_down = 0
  //   pi_0 A_up + pi_1 (A_same + R A_down - I) = 0
  //   pi_0 1 + pi_1 (I - R)^-1 1 = 1
  Eigen::MatrixXd sys(2 * f + 1, 2 * f);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * f + 1);
  sys.block(0, 0, f, f) = (blk.c - eye).transpose();
  sys.block(0, f, f, f) = blk.a0.transpose();
  sys.block(f, 0, f, f) = blk.a2.transpose();
  sys.block(f, f, f, f) = (blk.a1 + r * blk.a0 - eye).transpose();
  const Eigen::VectorXd level_mass =
      (eye - r).partialPivLu().solve(Eigen::VectorXd::Ones(f));
  sys.row(2 * f).head(f).setOnes();
  sys.row(2 * f).tail(f) = level_mass.transpose();
  rhs(2 * f) = 1.0;

  const Eigen::VectorXd sol = sys.colPivHouseholderQr().solve(rhs);
  if ((sys * sol - rhs).cwiseAbs().maxCoeff() > 1e-9)
    throw NumericalError("boundary equations are inconsistent");

  Eigen::VectorXd pi0v = sol.head(f);
  for (int i = 0; i < f; ++i) {
    if (pi0v(i) < -1e-9) throw NumericalError("negative boundary probability");
    pi0v(i) = std::max(pi0v(i), 0.0);
  }

  const int h = chain.h();
  std::vector<double> boundary(static_cast<std::size_t>(h - 1));
  for (int j = 1; j < h; ++j) boundary[static_cast<std::size_t>(j - 1)] = pi0v(j);
  return SteadyState::positive(SolverKind::CyclicReduction, /*conservative=*/false,
                               pi0v(0), std::move(boundary), chain);
}

// ---------------------------------------------------------------------------
// Pipeline

AnalysisResult solve_reservation(const Pmf& raw, const ReservationParams& params,
                                 SolverKind kind, usec_t deadline) {
  const auto t0 = std::chrono::steady_clock::now();
  params.validate();
  AnalysisResult out;
  out.solver = kind;
  out.deadline = deadline;

  const Pmf resampled = resample(raw, params.delta);
  const BuildResult built = try_build_chain(resampled, params);
  out.chain_kind = built.kind;
  switch (built.kind) {
    case ChainKind::AlwaysMeets:
      out.state = SteadyState::certain(kind, params);
      break;
    case ChainKind::Divergent:
      out.state = SteadyState::divergent(kind, params);
      break;
    case ChainKind::Chain: {
      const ChainCoefficients& chain = built.chain();
      switch (kind) {
        case SolverKind::Analytic:
          out.state = analytic_bound(chain);
          break;
        case SolverKind::Companion:
          out.state = companion_solve(chain);
          break;
        case SolverKind::CyclicReduction:
          if (classify(chain) == Recurrence::TransientOrNull)
            out.state = SteadyState::zero(kind, chain);
          else
            out.state = matrix_geometric_solve(blocks(chain), chain);
          break;
      }
      break;
    }
  }
  out.deadline_probability = out.state.deadline_probability(deadline);
  out.runtime_us = std::chrono::duration_cast<std::chrono::microseconds>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return out;
}

}  // namespace resprob
