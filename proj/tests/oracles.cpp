#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace resprob::testing {

std::vector<std::vector<double>> dense_rows(const ChainCoefficients& chain,
                                            int rows, int cols) {
  const int h = chain.h();
  std::vector<std::vector<double>> p(static_cast<std::size_t>(rows),
                                     std::vector<double>(static_cast<std::size_t>(cols), 0.0));
  for (int i = 0; i < rows; ++i) {
    if (i < h)
      p[i][0] = chain.b(h - i);
    else
      p[i][0] = chain.a(h - i);
    for (int j = 1; j < cols; ++j) p[i][static_cast<std::size_t>(j)] = chain.a(h + j - i);
  }
  return p;
}

std::vector<std::vector<double>> dense_rows_from_pmf(const Pmf& resampled,
                                                     const ReservationParams& params,
                                                     int rows, int cols) {
  const usec_t delta = params.delta;
  const usec_t w = params.supply_per_job() / delta;
  std::vector<std::vector<double>> p(static_cast<std::size_t>(rows),
                                     std::vector<double>(static_cast<std::size_t>(cols), 0.0));
  for (int i = 0; i < rows; ++i) {
    // From state i the pending backlog carried into the next job is i*delta
    // (zero from the collapsed state), so demand m*delta lands in state
    // max(0, i + m - W).
    for (std::size_t idx = 0; idx < resampled.grid_size(); ++idx) {
      const double mass = resampled.masses()[idx];
      if (mass == 0.0) continue;
      const usec_t m = resampled.value_at(idx) / delta;
      const usec_t j = std::max<usec_t>(0, i + m - w);
      if (j < static_cast<usec_t>(cols)) p[i][static_cast<std::size_t>(j)] += mass;
    }
  }
  return p;
}

PowerIterationResult stationary_power_iteration(const ChainCoefficients& chain,
                                                int states, long max_iter,
                                                double tol) {
  const int h = chain.h();
  const int n = chain.n();
  std::vector<double> x(static_cast<std::size_t>(states), 0.0);
  std::vector<double> next(static_cast<std::size_t>(states), 0.0);
  x[0] = 1.0;

  PowerIterationResult out;
  for (long it = 1; it <= max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < states; ++i) {
      const double xi = x[static_cast<std::size_t>(i)];
      if (xi == 0.0) continue;
      for (int j = 0; j <= n; ++j) {
        const double mass = chain.a(j);
        if (mass == 0.0) continue;
        int target = std::max(0, i - h + j);
        if (target >= states) target = states - 1;  // reflect the truncation
        next[static_cast<std::size_t>(target)] += xi * mass;
      }
    }
    double residual = 0.0;
    for (int i = 0; i < states; ++i)
      residual = std::max(residual,
                          std::abs(next[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)]));
    x.swap(next);
    out.iterations = static_cast<int>(it);
    out.residual = residual;
    if (residual < tol) break;
  }
  double total = 0.0;
  for (double v : x) total += v;
  for (double& v : x) v /= total;
  out.pi = std::move(x);
  return out;
}

ChainCoefficients random_chain(std::mt19937_64& rng, int max_h, int max_n,
                               bool positive_recurrent) {
  std::uniform_int_distribution<int> pick_h(1, max_h);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const int h = pick_h(rng);
    std::uniform_int_distribution<int> pick_n(h + 1, std::max(h + 1, max_n));
    const int n = pick_n(rng);
    std::vector<double> a(static_cast<std::size_t>(n + 1), 0.0);
    for (int j = 0; j <= n; ++j) {
      if (j != 0 && j != n && unit(rng) < 0.3) continue;  // interior gaps allowed
      a[static_cast<std::size_t>(j)] = 0.05 + unit(rng);
    }
    ChainCoefficients chain = ChainCoefficients::synthetic(std::move(a), h);
    const double d = drift(chain);
    if (positive_recurrent ? d > 0.05 : d <= 0.0) return chain;
  }
  throw std::runtime_error("random_chain failed to hit the requested drift sign");
}

Pmf random_pmf(std::mt19937_64& rng, usec_t max_value, int max_points) {
  std::uniform_int_distribution<usec_t> pick_value(1, max_value);
  std::uniform_int_distribution<int> pick_count(1, max_points);
  std::uniform_real_distribution<double> unit(0.01, 1.0);
  const int count = pick_count(rng);
  std::vector<double> mass(static_cast<std::size_t>(max_value + 1), 0.0);
  for (int i = 0; i < count; ++i) mass[static_cast<std::size_t>(pick_value(rng))] += unit(rng);
  return Pmf(0, std::move(mass), 1);
}

}  // namespace resprob::testing
