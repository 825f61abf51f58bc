#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "resprob/pmf.hpp"
#include "resprob/types.hpp"

namespace resprob {

// Reservation parameters of one task: it may execute for `budget` us inside
// every window of `server_period` us, and the task period is an exact
// multiple of the server period.
struct ReservationParams {
  usec_t task_period = 0;    // T
  usec_t server_period = 0;  // T^s
  usec_t budget = 0;         // Q^s
  usec_t delta = 1;          // resampling granularity, divides Q^s

  usec_t periods_per_job() const { return task_period / server_period; }  // N
  double bandwidth() const {
    return static_cast<double>(budget) / static_cast<double>(server_period);
  }
  usec_t supply_per_job() const { return periods_per_job() * budget; }  // N*Q^s

  // Throws std::invalid_argument naming the violated rule.
  void validate() const;
};

enum class Recurrence { PositiveRecurrent, TransientOrNull };

// Scalar coefficients of the collapsed backlog chain. Row i >= H of the
// transition matrix reads a_0..a_n starting at column i-H; rows i < H land in
// state 0 with probability b_{H-i} and continue with a_{H-i+1}..a_n.
// Everything is expressed in delta units: a_j is the resampled mass at
// execution time (w_units - H + j)*delta.
class ChainCoefficients {
 public:
  ChainCoefficients(std::vector<double> a, int h, usec_t w_units,
                    ReservationParams params);

  // For synthetic chains in tests and experiments: only the row masses and
  // the maximum leftward step are prescribed; params are fabricated to match.
  static ChainCoefficients synthetic(std::vector<double> a, int h);

  const std::vector<double>& a() const { return a_; }
  double a(int j) const { return (j < 0 || j > n_) ? 0.0 : a_[static_cast<std::size_t>(j)]; }
  double alpha(int j) const { return a(j) / a_[0]; }
  // b_k for k = 1..H: probability of collapsing to state 0 from boundary row H-k.
  double b(int k) const { return b_[static_cast<std::size_t>(k - 1)]; }
  const std::vector<double>& b_all() const { return b_; }

  int h() const { return h_; }
  int n() const { return n_; }
  usec_t w_units() const { return w_units_; }
  const ReservationParams& params() const { return params_; }

  std::string to_json() const;

 private:
  std::vector<double> a_;  // a_0..a_n
  std::vector<double> b_;  // b_1..b_H (prefix sums of a)
  int h_ = 0;
  int n_ = 0;
  usec_t w_units_ = 0;
  ReservationParams params_;
};

enum class ChainKind {
  Chain,        // proper chain built
  AlwaysMeets,  // c_max <= N*Q^s: every job finishes within N server periods
  Divergent,    // c_min >= N*Q^s: the backlog can never shrink
};

struct BuildResult {
  ChainKind kind;
  std::optional<ChainCoefficients> coeffs;

  // Accessor for callers that require a proper chain.
  const ChainCoefficients& chain() const;
};

// The pmf must already sit on the delta grid of params (resample first).
BuildResult try_build_chain(const Pmf& resampled, const ReservationParams& params);

// Same, but degenerate cases are errors ("divergent reservation: minimum
// demand exceeds supply" / always-meets).
ChainCoefficients build_chain(const Pmf& resampled, const ReservationParams& params);

// gamma(k, l) = sum_{j=0..k} alpha_j l^(k-j), 0 <= k <= n.
double gamma(const ChainCoefficients& chain, int k, double l);

// Mean downward drift D_1 = sum_{j<H} (H-j) a_j / a_0 - sum_{j>H} (j-H) a_j / a_0.
// Positive iff the chain is positive recurrent.
double drift(const ChainCoefficients& chain);

Recurrence classify(const ChainCoefficients& chain);

// Repeating blocks of the block-tridiagonal form. A0 steps one level down,
// A1 stays, A2 steps one level up; C is the boundary level (contains the
// collapse column). Levels are F consecutive states, F = max{n-H, H}.
struct QbdpBlocks {
  int f = 0;
  Eigen::MatrixXd a0, a1, a2, c;
};

QbdpBlocks blocks(const ChainCoefficients& chain);

// Conservative transform: all leftward transitions are rerouted to the state
// immediately to the left. The lumped chain has H = 1 and its steady state
// stochastically dominates the original's, so probabilities computed on it
// are lower bounds.
ChainCoefficients lump(const ChainCoefficients& chain);

}  // namespace resprob
