#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "resprob/chain.hpp"

namespace resprob {

enum class SolverKind { Analytic, Companion, CyclicReduction };

std::string to_token(SolverKind kind);
SolverKind solver_from_token(const std::string& token);

// Steady state of the backlog chain. pi0 is the long-run probability of
// finishing within N server periods; boundary holds pi^(1)..pi^(H-1) of the
// chain the tail recursion runs on (the lumped chain for the analytic
// method). Immutable; tail extension recomputes per call.
class SteadyState {
 public:
  Recurrence classification() const { return classification_; }
  SolverKind method() const { return method_; }
  bool conservative() const { return conservative_; }
  bool always_meets() const { return always_meets_; }
  double pi0() const { return pi0_; }
  const std::vector<double>& boundary() const { return boundary_; }
  const ChainCoefficients* recursion_chain() const { return chain_.get(); }

  // pi^(H)..pi^(H+count-1), extended deterministically from the boundary.
  std::vector<double> tail(int count) const;

  // Lower bound on Pr{response time <= deadline}; deadline must be a
  // multiple of the server period and at least N server periods.
  double deadline_probability(usec_t deadline) const;

  static SteadyState positive(SolverKind method, bool conservative, double pi0,
                              std::vector<double> boundary,
                              ChainCoefficients recursion_chain);
  static SteadyState zero(SolverKind method, ChainCoefficients chain);
  static SteadyState certain(SolverKind method, const ReservationParams& params);
  static SteadyState divergent(SolverKind method, const ReservationParams& params);

  SteadyState() = default;

 private:
  Recurrence classification_ = Recurrence::TransientOrNull;
  SolverKind method_ = SolverKind::Analytic;
  bool conservative_ = false;
  bool always_meets_ = false;
  double pi0_ = 0.0;
  std::vector<double> boundary_;
  std::shared_ptr<const ChainCoefficients> chain_;  // null for degenerate states
  ReservationParams params_;
};

// Monic characteristic polynomial of the chain's companion form, descending
// powers: out[0] = 1 multiplies lambda^n. Lambda = 1 is always a root.
std::vector<double> char_poly(const ChainCoefficients& chain);

struct PolynomialRoots {
  std::vector<std::complex<double>> roots;  // the n-1 roots besides lambda = 1
  bool unit_root_removed = true;
};

// Roots after deflating the structural root at 1: companion-matrix
// eigenvalues (balanced) plus one Newton polish per root.
PolynomialRoots char_roots(const ChainCoefficients& chain);

// Roots of an arbitrary monic polynomial given in descending coefficients.
std::vector<std::complex<double>> polynomial_roots(const std::vector<double>& monic);

// Closed-form conservative bound, computed on the lumped chain.
SteadyState analytic_bound(const ChainCoefficients& chain);

// Exact steady state of the resampled chain from the product of the stable
// characteristic roots; boundary probabilities from the linear system driven
// by the unstable roots.
SteadyState companion_solve(const ChainCoefficients& chain);

// Exact steady state via the minimal solution R of the level recursion
// R = A_up + R A_same + R^2 A_down, with the boundary levels solved against
// C and the normalization folded through (I - R)^-1.
SteadyState matrix_geometric_solve(const QbdpBlocks& blk,
                                   const ChainCoefficients& chain);

// R by logarithmic-reduction doubling (the production engine) and by plain
// fixed-point iteration (slow verification mode).
Eigen::MatrixXd rate_matrix(const QbdpBlocks& blk);
Eigen::MatrixXd rate_matrix_fixed_point(const QbdpBlocks& blk,
                                        double tol = 1e-12,
                                        int max_iter = 100000);

// Full pipeline: resample -> build chain -> solve -> deadline probability.
struct AnalysisResult {
  SolverKind solver = SolverKind::Analytic;
  SteadyState state;
  ChainKind chain_kind = ChainKind::Chain;
  usec_t deadline = 0;
  double deadline_probability = 0.0;
  std::int64_t runtime_us = 0;
};

AnalysisResult solve_reservation(const Pmf& raw, const ReservationParams& params,
                                 SolverKind kind, usec_t deadline);

}  // namespace resprob
