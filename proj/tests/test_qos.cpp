#include <doctest.h>

#include <cmath>

#include "resprob/qos.hpp"

using namespace resprob;

namespace {

// u = {10: .75, 30: .25} on a reservation with T = 20, T^s = 10: at budget
// 10 and delta 10 the chain is the geometric one with pi0 = 2/3.
TaskSpec two_point_task() {
  TaskSpec t;
  t.name = "twopoint";
  t.period = 20;
  t.deadline = 20;
  t.server_period = 10;
  t.pmf = Pmf(10, {0.75, 0.0, 0.25}, 10);
  t.delta_analytic = DeltaPolicy::fixed(10);
  t.delta_numeric = DeltaPolicy::fixed(10);
  t.quality = QualityModel{40.0, 9.0};
  return t;
}

TaskSpec beta_task(const std::string& name, double alpha, double beta,
                   double slope, double intercept, double floor) {
  TaskSpec t;
  t.name = name;
  t.period = 30000;
  t.deadline = 30000;
  t.server_period = 10000;
  t.pmf = Pmf::from_beta(alpha, beta, 30000, 10);
  t.quality = QualityModel{intercept, slope};
  t.quality_floor = floor;
  return t;
}

}  // namespace

TEST_CASE("evaluate_task maps probability through the quality line") {
  const TaskSpec t = two_point_task();
  const TaskEvaluation e = evaluate_task(t, 10, SolverKind::Companion);
  CHECK(e.p_meet == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(e.quality == doctest::Approx(40.0 - 9.0 / 3.0).epsilon(1e-9));  // 37
}

TEST_CASE("always-meets budgets give the intercept quality") {
  TaskSpec t = two_point_task();
  // Q = 10 is the largest budget; c_max = 30 > N Q = 20, so pick a bigger
  // server to reach the always-meets region.
  t.server_period = 20;
  t.period = 40;
  t.deadline = 40;
  const TaskEvaluation e = evaluate_task(t, 20, SolverKind::Analytic);
  CHECK(e.p_meet == 1.0);
  CHECK(e.quality == doctest::Approx(40.0));
}

TEST_CASE("zero slope fixes the quality at the intercept") {
  TaskSpec t = two_point_task();
  t.quality = QualityModel{17.0, 0.0};
  const TaskEvaluation e = evaluate_task(t, 10, SolverKind::Analytic);
  CHECK(e.quality == doctest::Approx(17.0));
}

TEST_CASE("min_budget searches the envelope") {
  TaskSpec t = two_point_task();
  t.server_period = 30;
  t.period = 30;
  t.deadline = 30;
  t.delta_analytic = DeltaPolicy::fixed(5);
  t.delta_numeric = DeltaPolicy::fixed(5);

  SUBCASE("any budget satisfies a zero target") {
    const auto q = min_budget(t, 0.0, SolverKind::Companion, 5);
    REQUIRE(q.has_value());
    CHECK(*q == 5);
  }
  SUBCASE("probability one needs the always-meets threshold") {
    // c_max = 30, N = 1: the smallest grid budget with N Q >= 30.
    const auto q = min_budget(t, 1.0, SolverKind::Companion, 5);
    REQUIRE(q.has_value());
    CHECK(*q == 30);
  }
  SUBCASE("infeasible when even the full server period falls short") {
    TaskSpec hard = two_point_task();  // c_max 30 > N Q = 2 * 10
    const auto q = min_budget(hard, 1.0, SolverKind::Companion, 10);
    CHECK_FALSE(q.has_value());
  }
  SUBCASE("returned budget really reaches the target") {
    for (double target : {0.3, 0.6, 0.9, 0.99}) {
      const auto q = min_budget(t, target, SolverKind::Companion, 5);
      REQUIRE(q.has_value());
      CHECK(evaluate_task(t, *q, SolverKind::Companion).p_meet >= target);
      if (*q > 5)
        CHECK(evaluate_task(t, *q - 5, SolverKind::Companion).p_meet < target);
    }
  }
}

TEST_CASE("min_budget brackets the reference bandwidth table") {
  // Target 0.95 sits between the 45% and 50% bandwidth rows of the synthetic
  // beta workload, so the minimal budget lands in (22500, 25000].
  TaskSpec t;
  t.name = "beta27";
  t.period = t.deadline = 100000;
  t.server_period = 50000;
  t.pmf = Pmf::from_beta(2.0, 7.0, 99500, 1);
  t.delta_numeric = DeltaPolicy::fixed(500);
  const auto q = min_budget(t, 0.95, SolverKind::Companion, 2500);
  REQUIRE(q.has_value());
  const double bandwidth = static_cast<double>(*q) / 50000.0;
  CHECK(bandwidth > 0.45);
  CHECK(bandwidth <= 0.50);
}

TEST_CASE("single unconstrained task takes the whole bandwidth it can use") {
  TaskSpec t = beta_task("solo", 2.0, 4.0, 10.0, 40.0,
                         -std::numeric_limits<double>::infinity());
  const Allocation a = optimize(std::vector<TaskSpec>{t}, 1.0, SolverKind::Analytic, 1000);
  REQUIRE(a.feasible);
  REQUIRE(a.tasks.size() == 1);
  CHECK(a.tasks[0].budget == 10000);  // N Q = 30000 >= c_max: always meets
  CHECK(a.objective_value == doctest::Approx(40.0));
}

TEST_CASE("two identical tasks split the bandwidth symmetrically") {
  const TaskSpec t1 = beta_task("a", 2.0, 7.0, 8.9, 40.0, 0.0);
  TaskSpec t2 = t1;
  t2.name = "b";
  const Allocation a =
      optimize(std::vector<TaskSpec>{t1, t2}, 0.9, SolverKind::Analytic, 1000);
  REQUIRE(a.feasible);
  CHECK(std::abs(static_cast<double>(a.tasks[0].budget) -
                 static_cast<double>(a.tasks[1].budget)) <= 1000.0);
  CHECK(a.total_bandwidth <= 0.9 + 1e-12);
}

TEST_CASE("infeasible floors are reported with the binding constraint") {
  TaskSpec t1 = beta_task("greedy", 2.0, 2.0, 50.0, 40.0, 39.99);
  TaskSpec t2 = beta_task("hungry", 2.0, 2.0, 50.0, 40.0, 39.99);
  const Allocation a =
      optimize(std::vector<TaskSpec>{t1, t2}, 0.5, SolverKind::Analytic, 1000);
  CHECK_FALSE(a.feasible);
  CHECK_FALSE(a.binding_constraint.empty());
}

TEST_CASE("optimize matches the exhaustive grid search") {
  const TaskSpec t1 = beta_task("slow", 2.0, 7.0, 8.9, 40.0, 20.0);
  const TaskSpec t2 = beta_task("fast", 2.0, 4.0, 42.051, 42.0, 20.0);
  const std::vector<TaskSpec> tasks{t1, t2};
  const double b_total = 0.95;
  const usec_t resolution = 1000;

  const Allocation a = optimize(tasks, b_total, SolverKind::Analytic, resolution);
  REQUIRE(a.feasible);

  // Exhaustive oracle over the same budget grid and the same evaluations.
  double best = -1e300;
  for (usec_t q1 = resolution; q1 <= t1.server_period; q1 += resolution) {
    const TaskEvaluation e1 = evaluate_task(t1, q1, SolverKind::Analytic);
    const double f1 = e1.quality;
    for (usec_t q2 = resolution; q2 <= t2.server_period; q2 += resolution) {
      const double bw = static_cast<double>(q1) / t1.server_period +
                        static_cast<double>(q2) / t2.server_period;
      if (bw > b_total + 1e-12) break;
      const TaskEvaluation e2 = evaluate_task(t2, q2, SolverKind::Analytic);
      if (f1 < t1.quality_floor || e2.quality < t2.quality_floor) continue;
      best = std::max(best, std::min(f1, e2.quality));
    }
  }
  CHECK(a.objective_value >= best - 1e-3 - 1e-9);
  CHECK(a.objective_value <= best + 1e-9);
  CHECK(a.total_bandwidth <= b_total + 1e-12);
}

TEST_CASE("three-task optimization matches the grid search") {
  const TaskSpec t1 = beta_task("a", 2.0, 7.0, 8.9, 40.0, 10.0);
  const TaskSpec t2 = beta_task("b", 2.0, 4.0, 42.051, 42.0, 10.0);
  const TaskSpec t3 = beta_task("c", 3.0, 3.0, 15.0, 41.0, 10.0);
  const std::vector<TaskSpec> tasks{t1, t2, t3};
  const double b_total = 0.9;
  const usec_t resolution = 1000;

  const Allocation a = optimize(tasks, b_total, SolverKind::Analytic, resolution);
  REQUIRE(a.feasible);

  std::vector<std::vector<double>> q(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (usec_t b = resolution; b <= tasks[i].server_period; b += resolution)
      q[i].push_back(evaluate_task(tasks[i], b, SolverKind::Analytic).quality);
  const double grid = static_cast<double>(resolution) / tasks[0].server_period;
  double best = -1e300;
  for (std::size_t i = 0; i < q[0].size(); ++i) {
    if (q[0][i] < t1.quality_floor) continue;
    for (std::size_t j = 0; j < q[1].size(); ++j) {
      if (q[1][j] < t2.quality_floor) continue;
      if (grid * static_cast<double>(i + j + 3) > b_total + 1e-12) break;
      for (std::size_t k = 0; k < q[2].size(); ++k) {
        if (grid * static_cast<double>(i + j + k + 3) > b_total + 1e-12) break;
        if (q[2][k] < t3.quality_floor) continue;
        best = std::max(best, std::min({q[0][i], q[1][j], q[2][k]}));
      }
    }
  }
  CHECK(a.objective_value >= best - 1e-3 - 1e-9);
  CHECK(a.objective_value <= best + 1e-9);
  CHECK(a.total_bandwidth <= b_total + 1e-12);
}

TEST_CASE("equalization tendency of the max-min objective") {
  const TaskSpec t1 = beta_task("x", 2.0, 5.0, 20.0, 40.0,
                                -std::numeric_limits<double>::infinity());
  TaskSpec t2 = beta_task("y", 2.0, 5.0, 20.0, 40.0,
                          -std::numeric_limits<double>::infinity());
  const Allocation a =
      optimize(std::vector<TaskSpec>{t1, t2}, 0.8, SolverKind::Analytic, 500);
  REQUIRE(a.feasible);
  // Neither task is floored, so at the optimum the qualities differ by at
  // most one resolution step's worth of quality change.
  const double step_effect =
      std::abs(evaluate_task(t1, a.tasks[0].budget, SolverKind::Analytic).quality -
               evaluate_task(t1, std::max<usec_t>(500, a.tasks[0].budget - 500),
                             SolverKind::Analytic)
                   .quality) +
      std::abs(evaluate_task(t2, a.tasks[1].budget, SolverKind::Analytic).quality -
               evaluate_task(t2, std::max<usec_t>(500, a.tasks[1].budget - 500),
                             SolverKind::Analytic)
                   .quality);
  CHECK(std::abs(a.tasks[0].quality - a.tasks[1].quality) <= step_effect + 1e-6);
}
