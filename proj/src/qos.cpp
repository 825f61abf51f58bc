#include "resprob/qos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace resprob {

usec_t DeltaPolicy::resolve(usec_t budget) const {
  switch (kind) {
    case Kind::HalfBudget:
      if (budget < 2 || budget % 2 != 0)
        throw std::invalid_argument("half-budget delta requires an even budget");
      return budget / 2;
    case Kind::Fixed:
      if (fixed_us < 1 || budget % fixed_us != 0)
        throw std::invalid_argument("delta must divide budget");
      return fixed_us;
  }
  throw std::logic_error("unreachable");
}

TaskEvaluation evaluate_task(const TaskSpec& task, usec_t budget, SolverKind solver) {
  ReservationParams params;
  params.task_period = task.period;
  params.server_period = task.server_period;
  params.budget = budget;
  params.delta = task.delta_policy(solver).resolve(budget);
  const usec_t deadline = task.deadline == 0 ? task.period : task.deadline;
  const AnalysisResult res = solve_reservation(task.pmf, params, solver, deadline);
  const double p = res.deadline_probability;
  return TaskEvaluation{p, task.quality.intercept - task.quality.slope * (1.0 - p)};
}

BudgetCurve::BudgetCurve(const TaskSpec& task, SolverKind solver, usec_t resolution)
    : task_(task), solver_(solver), resolution_(resolution) {
  if (resolution < 1 || resolution > task.server_period)
    throw std::invalid_argument("budget resolution must lie in [1, server_period]");
  const std::size_t grid = static_cast<std::size_t>(task.server_period / resolution);
  cache_.assign(grid, 0.0);
  known_.assign(grid, false);
  // Larger budgets can only shrink the backlog pathwise, so the exact
  // solvers give a nondecreasing curve; only the lumped bound may dip.
  monotone_raw_ = solver != SolverKind::Analytic;
}

usec_t BudgetCurve::max_budget() const {
  return static_cast<usec_t>(cache_.size()) * resolution_;
}

double BudgetCurve::raw(std::size_t idx) {
  if (!known_[idx]) {
    cache_[idx] =
        evaluate_task(task_, static_cast<usec_t>(idx + 1) * resolution_, solver_).p_meet;
    known_[idx] = true;
  }
  return cache_[idx];
}

double BudgetCurve::p_at(usec_t budget) {
  if (budget < resolution_ || budget % resolution_ != 0 || budget > max_budget())
    throw std::invalid_argument("budget must be a grid multiple of the resolution");
  return raw(static_cast<std::size_t>(budget / resolution_) - 1);
}

std::optional<usec_t> BudgetCurve::min_budget(double target_p) {
  const std::size_t grid = cache_.size();
  if (monotone_raw_) {
    std::size_t lo = 0, hi = grid;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      if (raw(mid) >= target_p)
        hi = mid;
      else
        lo = mid + 1;
    }
    if (lo == grid) return std::nullopt;
    return static_cast<usec_t>(lo + 1) * resolution_;
  }
  // Running-max envelope of the full grid: the first index where the
  // envelope reaches the target is also the first raw crossing.
  double envelope = 0.0;
  for (std::size_t i = 0; i < grid; ++i) {
    envelope = std::max(envelope, raw(i));
    if (envelope >= target_p) return static_cast<usec_t>(i + 1) * resolution_;
  }
  return std::nullopt;
}

std::optional<usec_t> min_budget(const TaskSpec& task, double target_p,
                                 SolverKind solver, usec_t resolution) {
  if (target_p < 0.0 || target_p > 1.0)
    throw std::invalid_argument("target probability must lie in [0, 1]");
  BudgetCurve curve(task, solver, resolution);
  return curve.min_budget(target_p);
}

namespace {

// Probability the task needs so its quality reaches max(level, floor);
// nullopt when that quality is unreachable even with no misses.
std::optional<double> probability_needed(const TaskSpec& task, double level) {
  const double target_q = std::max(level, task.quality_floor);
  if (task.quality.slope <= 0.0) {
    if (task.quality.intercept >= target_q - 1e-12) return 0.0;
    return std::nullopt;
  }
  const double pmiss = (task.quality.intercept - target_q) / task.quality.slope;
  if (pmiss < -1e-12) return std::nullopt;
  return std::clamp(1.0 - pmiss, 0.0, 1.0);
}

struct Probe {
  bool ok = false;
  std::vector<usec_t> budgets;
  double bandwidth = 0.0;
  std::string blocker;
};

}  // namespace

Allocation optimize(std::span<const TaskSpec> tasks, double b_total,
                    SolverKind solver, usec_t resolution) {
  if (tasks.empty()) throw std::invalid_argument("optimize needs at least one task");
  if (!(b_total > 0.0) || b_total > 1.0)
    throw std::invalid_argument("total bandwidth must lie in (0, 1]");

  std::vector<BudgetCurve> curves;
  curves.reserve(tasks.size());
  for (const TaskSpec& t : tasks) curves.emplace_back(t, solver, resolution);

  auto probe = [&](double level) {
    Probe pr;
    pr.ok = true;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto needed = probability_needed(tasks[i], level);
      if (!needed) {
        pr.ok = false;
        pr.blocker = "task '" + tasks[i].name + "' cannot reach the required quality";
        return pr;
      }
      const auto budget = curves[i].min_budget(*needed);
      if (!budget) {
        pr.ok = false;
        pr.blocker = "task '" + tasks[i].name + "' cannot reach probability " +
                     std::to_string(*needed) + " with a full server period";
        return pr;
      }
      pr.budgets.push_back(*budget);
      pr.bandwidth += static_cast<double>(*budget) /
                      static_cast<double>(tasks[i].server_period);
    }
    if (pr.bandwidth > b_total + 1e-12) {
      pr.ok = false;
      pr.blocker = "total bandwidth " + std::to_string(pr.bandwidth) + " exceeds " +
                   std::to_string(b_total);
    }
    return pr;
  };

  // Quality floors first: if they cannot be met, nothing else matters.
  constexpr double kMinusInf = -std::numeric_limits<double>::infinity();
  Probe best = probe(kMinusInf);
  if (!best.ok) {
    Allocation out;
    out.feasible = false;
    out.binding_constraint = best.blocker;
    return out;
  }

  // Bisection on the common quality level, to a 1e-3 quality grid.
  double lo = tasks[0].quality.intercept - tasks[0].quality.slope;
  double hi = tasks[0].quality.intercept;
  for (const TaskSpec& t : tasks) {
    lo = std::min(lo, t.quality.intercept - t.quality.slope);
    hi = std::min(hi, t.quality.intercept);
  }
  hi += 1e-3;
  for (int iter = 0; iter < 40 && hi - lo > 1e-3; ++iter) {
    const double mid = 0.5 * (lo + hi);
    Probe pr = probe(mid);
    if (pr.ok) {
      lo = mid;
      best = std::move(pr);
    } else {
      hi = mid;
    }
  }

  std::vector<usec_t> budgets = best.budgets;
  double bandwidth = best.bandwidth;

  auto quality_at = [&](std::size_t i, usec_t q) {
    const double p = curves[i].p_at(q);
    return tasks[i].quality.intercept - tasks[i].quality.slope * (1.0 - p);
  };

  // Hand any leftover bandwidth to the steepest-slope task that can still
  // take a step (ties go to the smaller budget); a step that would lower
  // that task's quality (a dip of the bound) is skipped.
  while (true) {
    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (tasks[a].quality.slope != tasks[b].quality.slope)
        return tasks[a].quality.slope > tasks[b].quality.slope;
      if (budgets[a] != budgets[b]) return budgets[a] < budgets[b];
      return a < b;
    });
    bool bumped = false;
    for (std::size_t i : order) {
      const usec_t next = budgets[i] + resolution;
      if (next > curves[i].max_budget()) continue;
      const double extra = static_cast<double>(resolution) /
                           static_cast<double>(tasks[i].server_period);
      if (bandwidth + extra > b_total + 1e-12) continue;
      if (quality_at(i, next) + 1e-12 < quality_at(i, budgets[i])) continue;
      budgets[i] = next;
      bandwidth += extra;
      bumped = true;
      break;
    }
    if (!bumped) break;
  }

  Allocation out;
  out.feasible = true;
  out.total_bandwidth = bandwidth;
  out.objective_value = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    TaskAllocation ta;
    ta.name = tasks[i].name;
    ta.budget = budgets[i];
    ta.bandwidth = static_cast<double>(budgets[i]) /
                   static_cast<double>(tasks[i].server_period);
    ta.p_meet = curves[i].p_at(budgets[i]);
    ta.quality = tasks[i].quality.intercept - tasks[i].quality.slope * (1.0 - ta.p_meet);
    out.objective_value = std::min(out.objective_value, ta.quality);
    out.tasks.push_back(std::move(ta));
  }
  return out;
}

}  // namespace resprob
