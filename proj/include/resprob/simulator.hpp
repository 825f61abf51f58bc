#pragma once

#include <cstdint>
#include <map>

#include "resprob/chain.hpp"
#include "resprob/pmf.hpp"

namespace resprob {

// Monte Carlo estimate of the deadline-satisfaction probability, obtained by
// running the backlog recursion directly on sampled execution times.
struct SimulationResult {
  std::int64_t jobs_simulated = 0;
  std::int64_t warmup_discarded = 0;
  double p_meet_hat = 0.0;
  double ci99_halfwidth = 0.0;
  // response-time bound in server periods -> number of post-warmup jobs
  std::map<std::int64_t, std::int64_t> delay_histogram;
  std::uint64_t seed = 0;
};

// Simulates `jobs` jobs; the first `warmup` are discarded from the
// statistics. The pmf is used raw (no resampling): the simulation is the
// ground truth the resampled solvers must lower-bound. Deterministic for a
// fixed seed.
SimulationResult simulate(const Pmf& pmf, const ReservationParams& params,
                          std::int64_t jobs, std::int64_t warmup,
                          std::uint64_t seed);

}  // namespace resprob
