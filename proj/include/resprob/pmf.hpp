#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "resprob/types.hpp"

namespace resprob {

// Discrete distribution of a job's execution time on an integer microsecond
// grid. Masses are stored on a regular grid of spacing granularity() starting
// at min_value(); the first and last stored entries are strictly positive and
// the total mass is renormalized to 1 at construction.
class Pmf {
 public:
  // Unit mass at zero; placeholder so aggregates stay default-constructible.
  Pmf() : origin_(0), granularity_(1), mass_{1.0} {}

  // masses[i] is the probability of the value origin + i*granularity.
  Pmf(usec_t origin, std::vector<double> masses, usec_t granularity = 1);

  static Pmf from_trace(std::span<const usec_t> samples);
  static Pmf from_beta(double alpha, double beta, usec_t support_max,
                       usec_t grid);
  static Pmf load(std::istream& in, const std::string& origin_name = "<pmf>");
  static Pmf load_file(const std::string& path);

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;

  usec_t min_value() const { return origin_; }  // c_min
  usec_t max_value() const {
    return origin_ + static_cast<usec_t>(mass_.size() - 1) * granularity_;
  }
  usec_t granularity() const { return granularity_; }
  std::size_t grid_size() const { return mass_.size(); }
  const std::vector<double>& masses() const { return mass_; }

  usec_t value_at(std::size_t i) const {
    return origin_ + static_cast<usec_t>(i) * granularity_;
  }
  // Mass at an arbitrary value; zero off the storage grid.
  double mass_at(usec_t value) const;

  double mean() const;

  // Drops masses below the threshold and renormalizes. threshold <= 0 is a
  // no-op. Never silently applied: callers opt in (CLI option).
  Pmf truncated_below(double threshold) const;

 private:
  usec_t origin_;
  usec_t granularity_;
  std::vector<double> mass_;
};

// Cumulative view of a Pmf, queryable at any value. Owns its prefix sums, so
// it stays valid independently of the source Pmf.
class CdfView {
 public:
  explicit CdfView(const Pmf& pmf);
  // F(c): total mass at values <= c.
  double operator()(usec_t c) const;

 private:
  usec_t origin_;
  usec_t granularity_;
  std::vector<double> cum_;
};

double cdf(const Pmf& pmf, usec_t c);

// Moves every mass upward to the next multiple of delta. The result has first
// order stochastic dominance over the input, which makes any analysis on the
// resampled distribution a conservative one.
Pmf resample(const Pmf& pmf, usec_t delta);

// First order stochastic dominance a >= b: CDF_a(x) <= CDF_b(x) for all x.
bool dominates(const Pmf& a, const Pmf& b);

}  // namespace resprob
