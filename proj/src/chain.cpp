#include "resprob/chain.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace resprob {

void ReservationParams::validate() const {
  if (task_period <= 0 || server_period <= 0)
    throw std::invalid_argument("period and server_period must be positive");
  if (task_period % server_period != 0)
    throw std::invalid_argument("server_period must divide period");
  if (budget <= 0 || budget > server_period)
    throw std::invalid_argument("budget must satisfy 0 < budget <= server_period");
  if (delta < 1) throw std::invalid_argument("delta must be >= 1");
  if (budget % delta != 0)
    throw std::invalid_argument("delta must divide budget");
}

ChainCoefficients::ChainCoefficients(std::vector<double> a, int h,
                                     usec_t w_units, ReservationParams params)
    : a_(std::move(a)), h_(h), w_units_(w_units), params_(params) {
  n_ = static_cast<int>(a_.size()) - 1;
  if (h_ < 1 || h_ > n_) throw std::invalid_argument("chain requires 1 <= H <= n");
  if (!(a_[0] > 0.0) || !(a_[static_cast<std::size_t>(n_)] > 0.0))
    throw std::invalid_argument("a_0 and a_n must be positive");
  const double total = std::accumulate(a_.begin(), a_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("row masses must sum to 1");
  // b_k = a_0 + ... + a_k: collapsing from boundary row H-k absorbs all the
  // leftward mass of a recursive row.
  b_.resize(static_cast<std::size_t>(h_));
  double acc = a_[0];
  for (int k = 1; k <= h_; ++k) {
    acc += a_[static_cast<std::size_t>(k)];
    b_[static_cast<std::size_t>(k - 1)] = acc;
  }
}

ChainCoefficients ChainCoefficients::synthetic(std::vector<double> a, int h) {
  const double total = std::accumulate(a.begin(), a.end(), 0.0);
  if (total <= 0.0) throw std::invalid_argument("row masses must have positive sum");
  for (double& v : a) v /= total;
  const usec_t w = h;  // smallest w compatible with H when mass starts at 0
  ReservationParams params;
  params.delta = 1;
  params.budget = w;
  params.server_period = w;
  params.task_period = w;
  return ChainCoefficients(std::move(a), h, w, params);
}

const ChainCoefficients& BuildResult::chain() const {
  switch (kind) {
    case ChainKind::Chain:
      return *coeffs;
    case ChainKind::AlwaysMeets:
      throw ModelError("no chain: task always meets its deadline");
    case ChainKind::Divergent:
    default:
      throw ModelError("divergent reservation: minimum demand exceeds supply");
  }
}

BuildResult try_build_chain(const Pmf& resampled, const ReservationParams& params) {
  params.validate();
  const usec_t delta = params.delta;
  // Every nonzero mass must sit on the delta grid.
  const bool whole_grid_aligned = resampled.min_value() % delta == 0 &&
                                  resampled.granularity() % delta == 0;
  if (!whole_grid_aligned) {
    for (std::size_t i = 0; i < resampled.grid_size(); ++i)
      if (resampled.masses()[i] > 0.0 && resampled.value_at(i) % delta != 0)
        throw std::invalid_argument("pmf is not aligned to the delta grid; resample first");
  }
  const usec_t w = params.supply_per_job() / delta;
  const usec_t m_min = resampled.min_value() / delta;
  const usec_t m_max = resampled.max_value() / delta;
  if (m_max <= w) return BuildResult{ChainKind::AlwaysMeets, std::nullopt};
  if (m_min >= w) return BuildResult{ChainKind::Divergent, std::nullopt};

  const int h = static_cast<int>(w - m_min);
  const int n = static_cast<int>(m_max - m_min);
  std::vector<double> a(static_cast<std::size_t>(n + 1), 0.0);
  for (int j = 0; j <= n; ++j)
    a[static_cast<std::size_t>(j)] = resampled.mass_at((m_min + j) * delta);
  return BuildResult{ChainKind::Chain,
                     ChainCoefficients(std::move(a), h, w, params)};
}

ChainCoefficients build_chain(const Pmf& resampled, const ReservationParams& params) {
  return try_build_chain(resampled, params).chain();
}

std::string ChainCoefficients::to_json() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"W_units\":" << w_units_ << ",\"H\":" << h_ << ",\"n\":" << n_ << ",\"a\":[";
  for (int j = 0; j <= n_; ++j) out << (j ? "," : "") << a_[static_cast<std::size_t>(j)];
  out << "],\"b\":[";
  for (int k = 1; k <= h_; ++k) out << (k > 1 ? "," : "") << b(k);
  const double d1 = drift(*this);
  out << "],\"classification\":\""
      << (d1 > 0.0 ? "positive-recurrent" : "transient-or-null")
      << "\",\"D1\":" << d1 << "}";
  return out.str();
}

double gamma(const ChainCoefficients& chain, int k, double l) {
  if (k < 0 || k > chain.n())
    throw std::invalid_argument("gamma requires 0 <= k <= n");
  // Horner form of sum_j alpha_j l^(k-j).
  double acc = chain.alpha(0);
  for (int j = 1; j <= k; ++j) acc = acc * l + chain.alpha(j);
  return acc;
}

double drift(const ChainCoefficients& chain) {
  // Weighted step balance divided by a_0; algebraically equal to
  // sum_{j<H} gamma(j,1) - sum_{j>H} (j-H) alpha_j but better conditioned
  // when a_0 is tiny.
  double down = 0.0, up = 0.0;
  const int h = chain.h();
  for (int j = 0; j < h; ++j) down += static_cast<double>(h - j) * chain.a(j);
  for (int j = h + 1; j <= chain.n(); ++j) up += static_cast<double>(j - h) * chain.a(j);
  return (down - up) / chain.a(0);
}

Recurrence classify(const ChainCoefficients& chain) {
  return drift(chain) > 0.0 ? Recurrence::PositiveRecurrent
                            : Recurrence::TransientOrNull;
}

QbdpBlocks blocks(const ChainCoefficients& chain) {
  const int h = chain.h();
  const int n = chain.n();
  const int f = std::max(n - h, h);
  QbdpBlocks out;
  out.f = f;
  out.a0 = Eigen::MatrixXd::Zero(f, f);
  out.a1 = Eigen::MatrixXd::Zero(f, f);
  out.a2 = Eigen::MatrixXd::Zero(f, f);
  out.c = Eigen::MatrixXd::Zero(f, f);
  for (int i = 0; i < f; ++i) {
    for (int j = 0; j < f; ++j) {
      out.a0(i, j) = chain.a(h - f + j - i);
      out.a1(i, j) = chain.a(h + j - i);
      out.a2(i, j) = chain.a(h + f + j - i);
      if (j == 0) {
        if (i < h)
          out.c(i, j) = chain.b(h - i);
        else
          out.c(i, j) = chain.a(h - i);  // a_0 when i == h, else 0
      } else {
        out.c(i, j) = chain.a(h + j - i);
      }
    }
  }
  return out;
}

ChainCoefficients lump(const ChainCoefficients& chain) {
  const int h = chain.h();
  const int n = chain.n();
  const int n_out = n - h + 1;
  std::vector<double> a(static_cast<std::size_t>(n_out + 1), 0.0);
  double left = 0.0;
  for (int j = 0; j < h; ++j) left += chain.a(j);
  a[0] = left;
  for (int k = 1; k <= n_out; ++k) a[static_cast<std::size_t>(k)] = chain.a(h - 1 + k);
  return ChainCoefficients(std::move(a), 1, chain.w_units(), chain.params());
}

}  // namespace resprob
