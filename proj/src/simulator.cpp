#include "resprob/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace resprob {

namespace {

// Deterministic uniform in [0,1): the standard distribution adapters are
// implementation-defined, the raw engine output is not.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

class PmfSampler {
 public:
  explicit PmfSampler(const Pmf& pmf) : pmf_(pmf), cum_(pmf.masses()) {
    for (std::size_t i = 1; i < cum_.size(); ++i) cum_[i] += cum_[i - 1];
    cum_.back() = 1.0;
  }

  usec_t operator()(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
    const std::size_t idx =
        std::min(static_cast<std::size_t>(it - cum_.begin()), cum_.size() - 1);
    return pmf_.value_at(idx);
  }

 private:
  const Pmf& pmf_;
  std::vector<double> cum_;
};

}  // namespace

SimulationResult simulate(const Pmf& pmf, const ReservationParams& params,
                          std::int64_t jobs, std::int64_t warmup,
                          std::uint64_t seed) {
  if (params.task_period <= 0 || params.server_period <= 0 ||
      params.task_period % params.server_period != 0)
    throw std::invalid_argument("server_period must divide period");
  if (params.budget <= 0 || params.budget > params.server_period)
    throw std::invalid_argument("budget must satisfy 0 < budget <= server_period");
  if (warmup < 0 || jobs <= warmup)
    throw std::invalid_argument("jobs must exceed warmup");

  const usec_t supply = params.supply_per_job();  // N*Q^s per task period
  std::mt19937_64 rng(seed);
  PmfSampler sample(pmf);

  SimulationResult out;
  out.jobs_simulated = jobs;
  out.warmup_discarded = warmup;
  out.seed = seed;

  const std::int64_t measured = jobs - warmup;
  std::int64_t met = 0;

  // Batch means alongside the plain binomial count: the response bounds of
  // consecutive jobs are serially correlated, so the binomial interval alone
  // is optimistic.
  constexpr int kBatches = 20;
  const std::int64_t batch_len = measured / kBatches;
  std::vector<double> batch_mean;
  std::int64_t batch_met = 0, batch_count = 0;

  usec_t backlog = 0;  // v_0 = c_0 falls out of the zero start
  for (std::int64_t k = 0; k < jobs; ++k) {
    backlog = std::max<usec_t>(0, backlog - supply) + sample(rng);
    const std::int64_t delay_periods =
        (backlog + params.budget - 1) / params.budget;  // ceil(v/Q^s)
    if (k < warmup) continue;
    const bool meets = backlog <= supply;
    met += meets ? 1 : 0;
    ++out.delay_histogram[delay_periods];
    if (batch_len > 0 && static_cast<std::size_t>(batch_mean.size()) < kBatches) {
      batch_met += meets ? 1 : 0;
      if (++batch_count == batch_len) {
        batch_mean.push_back(static_cast<double>(batch_met) /
                             static_cast<double>(batch_len));
        batch_met = 0;
        batch_count = 0;
      }
    }
  }

  const double m = static_cast<double>(measured);
  const double p = static_cast<double>(met) / m;
  out.p_meet_hat = p;

  const double hw_binomial = 2.575829 * std::sqrt(std::max(0.0, p * (1.0 - p)) / m);
  double hw_batch = 0.0;
  if (batch_mean.size() == kBatches) {
    double mean = 0.0;
    for (double b : batch_mean) mean += b;
    mean /= kBatches;
    double var = 0.0;
    for (double b : batch_mean) var += (b - mean) * (b - mean);
    var /= (kBatches - 1);
    // two-sided 99% Student t, 19 degrees of freedom
    hw_batch = 2.860935 * std::sqrt(var / kBatches);
  }
  out.ci99_halfwidth = std::max(hw_binomial, hw_batch);
  return out;
}

}  // namespace resprob
