#include "resprob/report.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "resprob/simulator.hpp"

namespace resprob {

namespace {

using nlohmann::ordered_json;

int thread_count() {
  const char* env = std::getenv("RESPROB_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return std::max(1, n);
}

// Runs fn(0..count-1) over the configured worker count; results must be
// written into pre-sized slots so the output order stays deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const int threads = std::min<int>(thread_count(), static_cast<int>(count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < count;
           i += static_cast<std::size_t>(threads)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string classification_token(Recurrence r) {
  return r == Recurrence::PositiveRecurrent ? "positive-recurrent" : "transient-or-null";
}

std::string chain_kind_token(ChainKind k) {
  switch (k) {
    case ChainKind::Chain: return "chain";
    case ChainKind::AlwaysMeets: return "always-meets";
    case ChainKind::Divergent: return "divergent";
  }
  return "?";
}

ordered_json dump_config(const RunConfig& cfg, RunMode mode) {
  ordered_json j;
  j["mode"] = to_token(mode);
  j["solver"] = to_token(cfg.solver);
  j["b_total"] = cfg.b_total;
  j["budget_resolution_us"] = cfg.budget_resolution;
  j["exact_delta_us"] = cfg.exact_delta;
  j["jobs"] = cfg.jobs;
  j["warmup"] = cfg.warmup_or_default();
  j["seed"] = cfg.seed;
  ordered_json tasks = ordered_json::array();
  for (const auto& t : cfg.tasks) {
    ordered_json tj;
    tj["name"] = t.name;
    tj["period_us"] = t.period;
    tj["server_period_us"] = t.server_period;
    tj["deadline_us"] = t.deadline == 0 ? t.period : t.deadline;
    if (t.budget) tj["budget_us"] = *t.budget;
    if (t.budget_sweep)
      tj["budget_sweep_us"] = {t.budget_sweep->lo, t.budget_sweep->hi, t.budget_sweep->step};
    if (t.delta_divisors) tj["delta_divisors"] = *t.delta_divisors;
    switch (t.pmf.kind) {
      case PmfSource::Kind::Beta:
        tj["pmf"] = {{"kind", "beta"}, {"alpha", t.pmf.alpha}, {"beta", t.pmf.beta},
                     {"support_max_us", t.pmf.support_max}, {"grid_us", t.pmf.grid}};
        break;
      case PmfSource::Kind::File:
        tj["pmf"] = {{"kind", "file"}, {"path", t.pmf.path}};
        break;
      case PmfSource::Kind::Trace:
        tj["pmf"] = {{"kind", "trace"}, {"path", t.pmf.path}};
        break;
    }
    if (t.delta) {
      tj["delta"] = t.delta->kind == DeltaPolicy::Kind::HalfBudget
                        ? ordered_json("half-budget")
                        : ordered_json(t.delta->fixed_us);
    }
    if (t.solver) tj["solver"] = to_token(*t.solver);
    tj["quality_intercept"] = t.quality.intercept;
    tj["quality_slope"] = t.quality.slope;
    if (std::isfinite(t.quality_floor)) tj["quality_floor"] = t.quality_floor;
    if (t.truncate_below > 0.0) tj["truncate_below"] = t.truncate_below;
    tasks.push_back(tj);
  }
  j["tasks"] = tasks;
  return j;
}

struct SweepPoint {
  std::size_t task_index = 0;
  usec_t budget = 0;
  usec_t delta = 0;
  SolverKind solver = SolverKind::Companion;
};

// One analyze row per (task, budget, delta) combination, ordered by task,
// then budget, then divisor as configured.
std::vector<SweepPoint> expand_sweep(const RunConfig& cfg) {
  std::vector<SweepPoint> points;
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
    const TaskConfig& t = cfg.tasks[i];
    const SolverKind solver = t.solver ? *t.solver : cfg.solver;
    std::vector<usec_t> budgets;
    if (t.budget_sweep) {
      for (usec_t q = t.budget_sweep->lo; q <= t.budget_sweep->hi; q += t.budget_sweep->step)
        budgets.push_back(q);
    }
    if (t.budget) budgets.push_back(*t.budget);
    for (usec_t q : budgets) {
      if (t.delta_divisors) {
        for (usec_t k : *t.delta_divisors) {
          if (q % k != 0) continue;  // only exact sub-multiples of the budget
          points.push_back({i, q, q / k, solver});
        }
      } else {
        const DeltaPolicy policy =
            t.delta ? *t.delta
                    : (solver == SolverKind::Analytic ? DeltaPolicy::half_budget()
                                                      : DeltaPolicy::fixed(50));
        points.push_back({i, q, policy.resolve(q), solver});
      }
    }
  }
  return points;
}

std::string render_analyze_text(const ordered_json& rows) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "task" << std::setw(18) << "solver"
      << std::right << std::setw(12) << "budget_us" << std::setw(10) << "delta_us"
      << std::setw(8) << "bw" << std::setw(12) << "pi0" << std::setw(14)
      << "deadline_prob" << std::setw(12) << "runtime_us" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(14) << r["task"].get<std::string>()
        << std::setw(18) << r["method"].get<std::string>() << std::right
        << std::setw(12) << r["budget_us"].get<usec_t>() << std::setw(10)
        << r["delta_us"].get<usec_t>() << std::setw(8) << std::fixed
        << std::setprecision(3) << r["bandwidth"].get<double>() << std::setw(12)
        << std::setprecision(6) << r["pi0"].get<double>() << std::setw(14)
        << r["deadline_prob_requested"].get<double>() << std::setw(12)
        << r["runtime_us"].get<std::int64_t>() << '\n';
    out.unsetf(std::ios::fixed);
  }
  return out.str();
}

RunOutput run_analyze(const RunConfig& cfg, const std::string& config_dir,
                      bool dump_chains) {
  const std::vector<SweepPoint> points = expand_sweep(cfg);
  std::vector<Pmf> pmfs;
  pmfs.reserve(cfg.tasks.size());
  for (const auto& t : cfg.tasks) pmfs.push_back(load_pmf(t, config_dir));

  std::vector<ordered_json> rows(points.size());
  std::vector<std::string> dumps(points.size());
  parallel_for(points.size(), [&](std::size_t idx) {
    const SweepPoint& pt = points[idx];
    const TaskConfig& t = cfg.tasks[pt.task_index];
    ReservationParams params;
    params.task_period = t.period;
    params.server_period = t.server_period;
    params.budget = pt.budget;
    params.delta = pt.delta;
    const usec_t deadline = t.deadline == 0 ? t.period : t.deadline;
    const AnalysisResult res = [&] {
      try {
        return solve_reservation(pmfs[pt.task_index], params, pt.solver, deadline);
      } catch (const std::exception& e) {
        throw NumericalError("task '" + t.name + "' (" + to_token(pt.solver) +
                             ", budget " + std::to_string(pt.budget) + " us, delta " +
                             std::to_string(pt.delta) + " us): " + e.what());
      }
    }();

    ordered_json row;
    row["task"] = t.name;
    row["method"] = to_token(pt.solver);
    row["budget_us"] = pt.budget;
    row["delta_us"] = pt.delta;
    row["bandwidth"] = params.bandwidth();
    row["chain_kind"] = chain_kind_token(res.chain_kind);
    row["classification"] = classification_token(res.state.classification());
    row["pi0"] = res.state.pi0();
    row["boundary"] = res.state.boundary();
    row["deadline_us"] = deadline;
    row["deadline_prob_requested"] = res.deadline_probability;
    row["conservative"] = res.state.conservative();
    row["runtime_us"] = res.runtime_us;
    rows[idx] = std::move(row);

    if (dump_chains && res.chain_kind == ChainKind::Chain) {
      const Pmf resampled = resample(pmfs[pt.task_index], params.delta);
      std::ostringstream d;
      d << "{\"task\":\"" << t.name << "\",\"budget_us\":" << pt.budget
        << ",\"delta_us\":" << pt.delta << ",\"chain\":"
        << try_build_chain(resampled, params).chain().to_json() << "}";
      dumps[idx] = d.str();
    }
  });

  RunOutput out;
  out.report["format_version"] = 1;
  out.report["mode"] = "analyze";
  out.report["config"] = dump_config(cfg, RunMode::Analyze);
  out.report["results"] = rows;

  std::ostringstream csv;
  csv << "task,solver,budget_us,delta_us,bandwidth,classification,pi0,"
         "deadline_prob,conservative,runtime_us\n";
  csv << std::setprecision(12);
  for (const auto& r : rows) {
    csv << r["task"].get<std::string>() << ',' << r["method"].get<std::string>()
        << ',' << r["budget_us"].get<usec_t>() << ',' << r["delta_us"].get<usec_t>()
        << ',' << r["bandwidth"].get<double>() << ','
        << r["classification"].get<std::string>() << ',' << r["pi0"].get<double>()
        << ',' << r["deadline_prob_requested"].get<double>() << ','
        << (r["conservative"].get<bool>() ? 1 : 0) << ','
        << r["runtime_us"].get<std::int64_t>() << '\n';
  }
  out.csv = csv.str();
  out.text = render_analyze_text(out.report["results"]);
  if (dump_chains) {
    std::ostringstream d;
    for (const auto& s : dumps)
      if (!s.empty()) d << s << '\n';
    out.chain_dump = d.str();
  }
  return out;
}

RunOutput run_simulate(const RunConfig& cfg, const std::string& config_dir) {
  std::vector<ordered_json> rows(cfg.tasks.size());
  std::ostringstream csv;
  csv << "task,delay_in_server_periods,count\n";
  for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
    const TaskConfig& t = cfg.tasks[i];
    ReservationParams params;
    params.task_period = t.period;
    params.server_period = t.server_period;
    params.budget = *t.budget;
    params.delta = 1;
    const Pmf pmf = load_pmf(t, config_dir);
    const SimulationResult sim =
        simulate(pmf, params, cfg.jobs, cfg.warmup_or_default(), cfg.seed);

    ordered_json row;
    row["task"] = t.name;
    row["jobs_simulated"] = sim.jobs_simulated;
    row["warmup_discarded"] = sim.warmup_discarded;
    row["p_meet_hat"] = sim.p_meet_hat;
    row["ci99_halfwidth"] = sim.ci99_halfwidth;
    row["seed"] = sim.seed;
    ordered_json hist = ordered_json::object();
    for (const auto& [periods, count] : sim.delay_histogram) {
      hist[std::to_string(periods)] = count;
      csv << t.name << ',' << periods << ',' << count << '\n';
    }
    row["delay_histogram"] = hist;
    rows[i] = std::move(row);
  }

  RunOutput out;
  // No timings here: simulate reports must be byte-identical across runs for
  // a fixed seed.
  out.report["format_version"] = 1;
  out.report["mode"] = "simulate";
  out.report["config"] = dump_config(cfg, RunMode::Simulate);
  out.report["results"] = rows;
  out.csv = csv.str();

  std::ostringstream text;
  text << std::left << std::setw(14) << "task" << std::right << std::setw(12)
       << "jobs" << std::setw(12) << "p_meet" << std::setw(14) << "ci99" << '\n';
  for (const auto& r : out.report["results"]) {
    text << std::left << std::setw(14) << r["task"].get<std::string>()
         << std::right << std::setw(12) << r["jobs_simulated"].get<std::int64_t>()
         << std::setw(12) << std::fixed << std::setprecision(6)
         << r["p_meet_hat"].get<double>() << std::setw(14) << std::setprecision(7)
         << r["ci99_halfwidth"].get<double>() << '\n';
    text.unsetf(std::ios::fixed);
  }
  out.text = text.str();
  return out;
}

RunOutput run_optimize(const RunConfig& cfg, const std::string& config_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<TaskSpec> specs;
  specs.reserve(cfg.tasks.size());
  for (const auto& t : cfg.tasks) specs.push_back(make_task_spec(t, config_dir));

  const Allocation alloc = optimize(specs, cfg.b_total, cfg.solver, cfg.budget_resolution);
  const std::int64_t elapsed_us = std::chrono::duration_cast<std::chrono::microseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count();

  RunOutput out;
  out.exit_code = alloc.feasible ? 0 : 2;
  out.report["format_version"] = 1;
  out.report["mode"] = "optimize";
  out.report["config"] = dump_config(cfg, RunMode::Optimize);
  ordered_json aj;
  aj["feasible"] = alloc.feasible;
  if (!alloc.feasible) aj["binding_constraint"] = alloc.binding_constraint;
  aj["objective_value"] = alloc.objective_value;
  aj["total_bandwidth"] = alloc.total_bandwidth;

  std::ostringstream csv;
  csv << "task,opt_budget_us,estim_prob,exact_prob,quality\n" << std::setprecision(12);
  std::ostringstream text;
  text << "objective " << std::fixed << std::setprecision(4) << alloc.objective_value
       << "  total bandwidth " << alloc.total_bandwidth << "  ("
       << (alloc.feasible ? "feasible" : ("infeasible: " + alloc.binding_constraint))
       << ")\n";
  text.unsetf(std::ios::fixed);
  text << std::left << std::setw(14) << "task" << std::right << std::setw(16)
       << "opt_budget_us" << std::setw(14) << "estim_prob" << std::setw(14)
       << "exact_prob" << std::setw(10) << "quality" << '\n';

  ordered_json tasks = ordered_json::array();
  for (std::size_t i = 0; i < alloc.tasks.size(); ++i) {
    const TaskAllocation& ta = alloc.tasks[i];
    // The estimate comes from the configured (possibly conservative) solver;
    // the reference value re-evaluates the same budget on the finest
    // affordable grid with the numeric solver.
    double exact_p = ta.p_meet;
    if (alloc.feasible) {
      try {
        TaskSpec ref = specs[i];
        ref.delta_numeric = DeltaPolicy::fixed(cfg.exact_delta);
        exact_p = evaluate_task(ref, ta.budget, SolverKind::CyclicReduction).p_meet;
      } catch (const std::exception&) {
        // Reference column only; keep the solver's own estimate.
      }
    }
    ordered_json tj;
    tj["task"] = ta.name;
    tj["opt_budget_us"] = ta.budget;
    tj["bandwidth"] = ta.bandwidth;
    tj["estim_prob"] = ta.p_meet;
    tj["exact_prob"] = exact_p;
    tj["quality"] = ta.quality;
    tasks.push_back(tj);
    csv << ta.name << ',' << ta.budget << ',' << ta.p_meet << ',' << exact_p << ','
        << ta.quality << '\n';
    text << std::left << std::setw(14) << ta.name << std::right << std::setw(16)
         << ta.budget << std::setw(14) << std::fixed << std::setprecision(6)
         << ta.p_meet << std::setw(14) << exact_p << std::setw(10)
         << std::setprecision(3) << ta.quality << '\n';
    text.unsetf(std::ios::fixed);
  }
  aj["tasks"] = tasks;
  out.report["allocation"] = aj;
  out.report["runtime_us"] = elapsed_us;
  out.csv = csv.str();
  out.text = text.str();
  return out;
}

}  // namespace

RunOutput run(const RunConfig& cfg, RunMode mode, const std::string& config_dir,
              bool dump_chains) {
  validate_for_mode(cfg, mode);
  RunOutput out;
  switch (mode) {
    case RunMode::Analyze: out = run_analyze(cfg, config_dir, dump_chains); break;
    case RunMode::Simulate: out = run_simulate(cfg, config_dir); break;
    case RunMode::Optimize: out = run_optimize(cfg, config_dir); break;
  }
  if (cfg.verbosity >= 1)
    out.text = "resolved config: " + out.report["config"].dump() + "\n" + out.text;
  return out;
}

}  // namespace resprob
