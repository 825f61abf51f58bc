#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "resprob/pmf.hpp"

using namespace resprob;

TEST_CASE("pmf from trace counts frequencies") {
  const std::vector<usec_t> samples{10, 10, 30, 10};
  const Pmf p = Pmf::from_trace(samples);
  CHECK(p.min_value() == 10);
  CHECK(p.max_value() == 30);
  CHECK(p.mass_at(10) == doctest::Approx(0.75));
  CHECK(p.mass_at(30) == doctest::Approx(0.25));
  CHECK(p.mass_at(20) == 0.0);
  CHECK(p.granularity() == 1);
}

TEST_CASE("pmf from single sample") {
  const std::vector<usec_t> samples{5};
  const Pmf p = Pmf::from_trace(samples);
  CHECK(p.min_value() == 5);
  CHECK(p.mass_at(5) == doctest::Approx(1.0));
}

TEST_CASE("empty trace is rejected") {
  CHECK_THROWS_WITH_AS(Pmf::from_trace({}), "empty trace", std::invalid_argument);
}

TEST_CASE("trace ingestion recovers the generating distribution") {
  // Law of large numbers against the generating pmf.
  std::mt19937_64 rng(42);
  std::vector<usec_t> samples;
  samples.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    samples.push_back(u < 0.75 ? 10 : 30);
  }
  const Pmf p = Pmf::from_trace(samples);
  CHECK(std::abs(p.mass_at(10) - 0.75) < 0.02);
  CHECK(std::abs(p.mass_at(30) - 0.25) < 0.02);
}

TEST_CASE("uniform beta splits the support evenly") {
  const Pmf p = Pmf::from_beta(1.0, 1.0, 100, 50);
  CHECK(p.mass_at(50) == doctest::Approx(0.5));
  CHECK(p.mass_at(100) == doctest::Approx(0.5));
  CHECK(p.granularity() == 50);
}

TEST_CASE("beta(2,7) discretization matches the continuous moments") {
  const Pmf p = Pmf::from_beta(2.0, 7.0, 99500, 1);
  // Mean: support * alpha/(alpha+beta).
  CHECK(std::abs(p.mean() - 99500.0 * 2.0 / 9.0) <= 2.0);
  // Mode by argmax scan: support * (alpha-1)/(alpha+beta-2).
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < p.grid_size(); ++i)
    if (p.masses()[i] > p.masses()[argmax]) argmax = i;
  CHECK(std::abs(static_cast<double>(p.value_at(argmax)) - 99500.0 / 7.0) <= 2.0);
}

TEST_CASE("beta rejects bad shapes") {
  CHECK_THROWS_AS(Pmf::from_beta(0.0, 7.0, 1000, 1), std::invalid_argument);
  CHECK_THROWS_AS(Pmf::from_beta(2.0, -1.0, 1000, 1), std::invalid_argument);
  CHECK_THROWS_AS(Pmf::from_beta(2.0, 7.0, 1000, 3), std::invalid_argument);
}

TEST_CASE("cdf point queries") {
  const Pmf p(10, {0.75, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0.25});
  CHECK(cdf(p, 10) == doctest::Approx(0.75));
  CHECK(cdf(p, 9) == 0.0);
  CHECK(cdf(p, 1000) == doctest::Approx(1.0));
  CHECK(cdf(p, p.max_value()) == doctest::Approx(1.0));
}

TEST_CASE("cdf is nondecreasing") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 20; ++round) {
    const Pmf p = testing::random_pmf(rng);
    const CdfView f(p);
    double prev = 0.0;
    for (usec_t c = p.min_value() - 1; c <= p.max_value() + 1; ++c) {
      const double cur = f(c);
      CHECK(cur >= prev - 1e-15);
      prev = cur;
    }
    CHECK(f(p.max_value()) == doctest::Approx(1.0));
  }
}

TEST_CASE("resample moves mass to the next multiple") {
  const Pmf p = Pmf::from_trace(std::vector<usec_t>{10, 10, 30, 10});
  const Pmf r = resample(p, 20);
  CHECK(r.granularity() == 20);
  CHECK(r.mass_at(20) == doctest::Approx(0.75));
  CHECK(r.mass_at(40) == doctest::Approx(0.25));
}

TEST_CASE("resample with delta 1 is the identity on the unit grid") {
  std::mt19937_64 rng(11);
  const Pmf p = testing::random_pmf(rng);
  const Pmf r = resample(p, 1);
  REQUIRE(r.grid_size() == p.grid_size());
  for (std::size_t i = 0; i < p.grid_size(); ++i)
    CHECK(r.masses()[i] == doctest::Approx(p.masses()[i]).epsilon(1e-14));
}

TEST_CASE("resample aggregates buckets") {
  std::vector<double> mass(31, 0.0);
  mass[10] = 0.5;
  mass[15] = 0.3;
  mass[30] = 0.2;
  const Pmf p(0, std::move(mass), 1);
  const Pmf r = resample(p, 15);
  CHECK(r.mass_at(15) == doctest::Approx(0.8));
  CHECK(r.mass_at(30) == doctest::Approx(0.2));
}

TEST_CASE("resampling dominates the original and preserves mass") {
  std::mt19937_64 rng(3);
  for (int round = 0; round < 100; ++round) {
    const Pmf p = testing::random_pmf(rng);
    for (usec_t delta : {2, 5, 10}) {
      const Pmf r = resample(p, delta);
      CHECK(dominates(r, p));
      double total = 0.0;
      for (double m : r.masses()) total += m;
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("coarser resampling is more conservative (nested deltas)") {
  std::mt19937_64 rng(5);
  for (int round = 0; round < 50; ++round) {
    const Pmf p = testing::random_pmf(rng);
    CHECK(dominates(resample(p, 10), resample(p, 5)));
    CHECK(dominates(resample(p, 6), resample(p, 2)));
    CHECK(dominates(resample(p, 4), resample(p, 2)));
  }
}

TEST_CASE("dominance of point masses") {
  const Pmf ten(10, {1.0});
  const Pmf twenty(20, {1.0});
  CHECK_FALSE(dominates(ten, twenty));
  CHECK(dominates(twenty, ten));
  CHECK(dominates(ten, ten));
}

TEST_CASE("pmf file round trip") {
  const Pmf p = Pmf::from_trace(std::vector<usec_t>{10, 10, 30, 10});
  std::ostringstream out;
  p.save(out);
  std::istringstream in(out.str());
  const Pmf q = Pmf::load(in);
  CHECK(q.min_value() == p.min_value());
  CHECK(q.mass_at(10) == doctest::Approx(0.75));
  CHECK(q.mass_at(30) == doctest::Approx(0.25));
}

TEST_CASE("pmf load renormalizes small deviations and rejects large ones") {
  {
    std::istringstream in("# comment\n10 0.7500001\n30 0.25\n");
    const Pmf p = Pmf::load(in);
    double total = 0.0;
    for (double m : p.masses()) total += m;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    std::istringstream in("10 0.80\n30 0.25\n");
    CHECK_THROWS_AS(Pmf::load(in), ConfigError);
  }
  {
    std::istringstream in("30 0.75\n10 0.25\n");  // not increasing
    CHECK_THROWS_AS(Pmf::load(in), ConfigError);
  }
}

TEST_CASE("truncation is explicit and renormalizes") {
  std::vector<double> mass{0.5, 1e-16, 0.0, 0.5 - 1e-16};
  const Pmf p(10, std::move(mass), 1);
  CHECK(p.mass_at(11) > 0.0);  // kept by default
  const Pmf t = p.truncated_below(1e-12);
  CHECK(t.mass_at(11) == 0.0);
  double total = 0.0;
  for (double m : t.masses()) total += m;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}
