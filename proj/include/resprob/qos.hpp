#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "resprob/pmf.hpp"
#include "resprob/solvers.hpp"

namespace resprob {

// Affine quality model: quality = intercept - slope * Pr{deadline miss}.
struct QualityModel {
  double intercept = 0.0;
  double slope = 0.0;  // must be >= 0
};

// How the resampling granularity is derived from a candidate budget.
struct DeltaPolicy {
  enum class Kind { HalfBudget, Fixed };
  Kind kind = Kind::HalfBudget;
  usec_t fixed_us = 0;

  static DeltaPolicy half_budget() { return DeltaPolicy{Kind::HalfBudget, 0}; }
  static DeltaPolicy fixed(usec_t delta) { return DeltaPolicy{Kind::Fixed, delta}; }

  usec_t resolve(usec_t budget) const;
};

struct TaskSpec {
  std::string name;
  usec_t period = 0;         // T
  usec_t deadline = 0;       // D, defaults to T
  usec_t server_period = 0;  // T^s, divides T
  Pmf pmf;
  // Default granularities follow the tool configuration that works well in
  // practice: half-budget for the bound, a fine fixed grid for the numeric
  // solvers.
  DeltaPolicy delta_analytic = DeltaPolicy::half_budget();
  DeltaPolicy delta_numeric = DeltaPolicy::fixed(50);
  QualityModel quality;
  double quality_floor = -std::numeric_limits<double>::infinity();

  const DeltaPolicy& delta_policy(SolverKind kind) const {
    return kind == SolverKind::Analytic ? delta_analytic : delta_numeric;
  }
};

struct TaskEvaluation {
  double p_meet = 0.0;
  double quality = 0.0;
};

// resample -> chain -> solve -> deadline probability at the task's deadline,
// then map through the quality model.
TaskEvaluation evaluate_task(const TaskSpec& task, usec_t budget, SolverKind solver);

// Memoized probability-vs-budget curve on the resolution grid. min_budget
// searches the nondecreasing envelope of the raw curve, so the occasional
// dip of the analytic bound cannot mis-bracket the search.
class BudgetCurve {
 public:
  BudgetCurve(const TaskSpec& task, SolverKind solver, usec_t resolution);

  // Smallest grid budget whose envelope probability reaches target_p, or
  // nullopt when even the full server period falls short.
  std::optional<usec_t> min_budget(double target_p);
  double p_at(usec_t budget);

  usec_t resolution() const { return resolution_; }
  usec_t max_budget() const;

 private:
  double raw(std::size_t idx);

  const TaskSpec& task_;
  SolverKind solver_;
  usec_t resolution_;
  std::vector<double> cache_;
  std::vector<bool> known_;
  bool monotone_raw_;  // numeric solvers: larger budget never hurts
};

std::optional<usec_t> min_budget(const TaskSpec& task, double target_p,
                                 SolverKind solver, usec_t resolution);

struct TaskAllocation {
  std::string name;
  usec_t budget = 0;
  double bandwidth = 0.0;
  double p_meet = 0.0;
  double quality = 0.0;
};

struct Allocation {
  std::vector<TaskAllocation> tasks;
  double total_bandwidth = 0.0;
  double objective_value = 0.0;  // min over tasks of the achieved quality
  bool feasible = false;
  std::string binding_constraint;  // set when infeasible
};

// Maximizes the minimum per-task quality over budget assignments subject to
// sum of bandwidths <= b_total and the per-task quality floors. Bisection on
// the common quality level, to a grid of 1e-3 quality units.
Allocation optimize(std::span<const TaskSpec> tasks, double b_total,
                    SolverKind solver, usec_t resolution);

}  // namespace resprob
