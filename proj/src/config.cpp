#include "resprob/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace resprob {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

struct Diag {
  const std::string& file;
  int line;
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(file + ":" + std::to_string(line) + ": " + msg);
  }
};

std::int64_t parse_int(const std::string& v, const Diag& d, const std::string& key) {
  std::int64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
    d.fail("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& v, const Diag& d, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(out)) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    d.fail("key '" + key + "': expected a number, got '" + v + "'");
  }
}

PmfSource parse_pmf_source(const std::string& v, const Diag& d) {
  const auto parts = split(v, ':');
  PmfSource src;
  if (parts[0] == "beta") {
    if (parts.size() != 4 && parts.size() != 5)
      d.fail("pmf: expected beta:<alpha>:<beta>:<support_max_us>[:<grid_us>]");
    src.kind = PmfSource::Kind::Beta;
    src.alpha = parse_real(parts[1], d, "pmf");
    src.beta = parse_real(parts[2], d, "pmf");
    src.support_max = parse_int(parts[3], d, "pmf");
    src.grid = parts.size() == 5 ? parse_int(parts[4], d, "pmf") : 1;
    if (src.alpha <= 0.0 || src.beta <= 0.0) d.fail("pmf: beta shape parameters must be positive");
    if (src.support_max <= 0 || src.grid < 1 || src.support_max % src.grid != 0)
      d.fail("pmf: grid must be >= 1 and divide support_max");
  } else if (parts[0] == "file" || parts[0] == "trace") {
    if (parts.size() != 2 || parts[1].empty())
      d.fail("pmf: expected " + parts[0] + ":<path>");
    src.kind = parts[0] == "file" ? PmfSource::Kind::File : PmfSource::Kind::Trace;
    src.path = parts[1];
  } else {
    d.fail("pmf: unknown source '" + parts[0] + "' (expected beta, file or trace)");
  }
  return src;
}

}  // namespace

std::string to_token(RunMode mode) {
  switch (mode) {
    case RunMode::Analyze: return "analyze";
    case RunMode::Simulate: return "simulate";
    case RunMode::Optimize: return "optimize";
  }
  return "?";
}

RunConfig parse_config(const std::string& text, const std::string& filename) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool version_seen = false;
  enum class Section { None, Global, Task } section = Section::None;
  TaskConfig* task = nullptr;

  while (std::getline(in, raw)) {
    ++line_no;
    const Diag d{filename, line_no};
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (!version_seen) {
      // The version marker must be the first meaningful line.
      if (line != "version = 1" && line != "version=1")
        d.fail("config must start with 'version = 1'");
      version_seen = true;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') d.fail("malformed section header");
      const std::string header = trim(line.substr(1, line.size() - 2));
      if (header == "global") {
        section = Section::Global;
        task = nullptr;
      } else if (header.rfind("task", 0) == 0) {
        const std::string name = trim(header.substr(4));
        if (name.empty()) d.fail("task section needs a name: [task <name>]");
        for (const auto& t : cfg.tasks)
          if (t.name == name) d.fail("duplicate task name '" + name + "'");
        cfg.tasks.emplace_back();
        task = &cfg.tasks.back();
        task->name = name;
        task->line = line_no;
        section = Section::Task;
      } else {
        d.fail("unknown section '" + header + "'");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) d.fail("expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) d.fail("expected 'key = value'");

    if (section == Section::Global || section == Section::None) {
      if (key == "mode") {
        if (value == "analyze") cfg.mode = RunMode::Analyze;
        else if (value == "simulate") cfg.mode = RunMode::Simulate;
        else if (value == "optimize") cfg.mode = RunMode::Optimize;
        else d.fail("mode must be analyze, simulate or optimize");
      } else if (key == "solver") {
        try { cfg.solver = solver_from_token(value); }
        catch (const ConfigError& e) { d.fail(e.what()); }
      } else if (key == "b_total") {
        cfg.b_total = parse_real(value, d, key);
        if (cfg.b_total <= 0.0 || cfg.b_total > 1.0)
          d.fail("b_total must lie in (0, 1]");
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(value, d, key));
      } else if (key == "jobs") {
        cfg.jobs = parse_int(value, d, key);
        if (cfg.jobs < 1) d.fail("jobs must be positive");
      } else if (key == "warmup") {
        cfg.warmup = parse_int(value, d, key);
        if (*cfg.warmup < 0) d.fail("warmup must be >= 0");
      } else if (key == "budget_resolution_us") {
        cfg.budget_resolution = parse_int(value, d, key);
        if (cfg.budget_resolution < 1) d.fail("budget_resolution_us must be >= 1");
      } else if (key == "exact_delta_us") {
        cfg.exact_delta = parse_int(value, d, key);
        if (cfg.exact_delta < 1) d.fail("exact_delta_us must be >= 1");
      } else if (key == "out") {
        cfg.out_path = value;
      } else if (key == "csv") {
        cfg.csv_path = value;
      } else if (key == "verbosity") {
        cfg.verbosity = static_cast<int>(parse_int(value, d, key));
      } else {
        d.fail("unknown key '" + key + "' in [global]");
      }
      continue;
    }

    // Task section.
    if (key == "period_us") {
      task->period = parse_int(value, d, key);
    } else if (key == "server_period_us") {
      task->server_period = parse_int(value, d, key);
    } else if (key == "deadline_us") {
      task->deadline = parse_int(value, d, key);
    } else if (key == "budget_us") {
      task->budget = parse_int(value, d, key);
    } else if (key == "budget_sweep_us") {
      const auto parts = split(value, ':');
      if (parts.size() != 3) d.fail("budget_sweep_us: expected <lo>:<hi>:<step>");
      BudgetSweep sw;
      sw.lo = parse_int(parts[0], d, key);
      sw.hi = parse_int(parts[1], d, key);
      sw.step = parse_int(parts[2], d, key);
      if (sw.lo < 1 || sw.hi < sw.lo || sw.step < 1)
        d.fail("budget_sweep_us: need 1 <= lo <= hi and step >= 1");
      task->budget_sweep = sw;
    } else if (key == "delta_divisors") {
      std::vector<usec_t> ks;
      if (value.find(':') != std::string::npos) {
        const auto parts = split(value, ':');
        if (parts.size() != 2) d.fail("delta_divisors: expected <lo>:<hi> or a comma list");
        const usec_t lo = parse_int(parts[0], d, key), hi = parse_int(parts[1], d, key);
        if (lo < 1 || hi < lo) d.fail("delta_divisors: need 1 <= lo <= hi");
        for (usec_t k = lo; k <= hi; ++k) ks.push_back(k);
      } else {
        for (const auto& p : split(value, ',')) {
          const usec_t k = parse_int(trim(p), d, key);
          if (k < 1) d.fail("delta_divisors must be >= 1");
          ks.push_back(k);
        }
      }
      task->delta_divisors = ks;
    } else if (key == "pmf") {
      task->pmf = parse_pmf_source(value, d);
    } else if (key == "delta") {
      if (value == "half-budget") {
        task->delta = DeltaPolicy::half_budget();
      } else {
        const usec_t us = parse_int(value, d, key);
        if (us < 1) d.fail("delta must be >= 1 us or 'half-budget'");
        task->delta = DeltaPolicy::fixed(us);
      }
    } else if (key == "solver") {
      try { task->solver = solver_from_token(value); }
      catch (const ConfigError& e) { d.fail(e.what()); }
    } else if (key == "quality_intercept") {
      task->quality.intercept = parse_real(value, d, key);
    } else if (key == "quality_slope") {
      task->quality.slope = parse_real(value, d, key);
      if (task->quality.slope < 0.0) d.fail("quality_slope must be >= 0");
    } else if (key == "quality_floor") {
      task->quality_floor = parse_real(value, d, key);
    } else if (key == "truncate_below") {
      task->truncate_below = parse_real(value, d, key);
      if (task->truncate_below < 0.0) d.fail("truncate_below must be >= 0");
    } else {
      d.fail("unknown key '" + key + "' in [task " + task->name + "]");
    }
  }

  if (!version_seen) throw ConfigError(filename + ": config must start with 'version = 1'");
  if (cfg.tasks.empty()) throw ConfigError(filename + ": at least one [task <name>] section is required");

  // Mode-independent structural checks, with the task's section line.
  for (const auto& t : cfg.tasks) {
    const Diag d{filename, t.line};
    if (t.period <= 0) d.fail("task '" + t.name + "': period_us is required and positive");
    if (t.server_period <= 0)
      d.fail("task '" + t.name + "': server_period_us is required and positive");
    if (t.period % t.server_period != 0)
      d.fail("task '" + t.name + "': server_period must divide period");
    const usec_t deadline = t.deadline == 0 ? t.period : t.deadline;
    if (deadline % t.server_period != 0 || deadline < t.period)
      d.fail("task '" + t.name +
             "': deadline must be a multiple of server_period and at least the period");
    if (t.budget) {
      if (*t.budget <= 0 || *t.budget > t.server_period)
        d.fail("task '" + t.name + "': budget must satisfy 0 < budget <= server_period");
      if (t.delta && t.delta->kind == DeltaPolicy::Kind::Fixed &&
          *t.budget % t.delta->fixed_us != 0)
        d.fail("task '" + t.name + "': delta must divide budget");
    }
    if (t.budget_sweep && t.budget_sweep->hi > t.server_period)
      d.fail("task '" + t.name + "': budget sweep exceeds server_period");
  }

  // Referenced files must resolve now, not when the run reaches them.
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(filename).parent_path();
  for (const auto& t : cfg.tasks) {
    if (t.pmf.kind == PmfSource::Kind::File || t.pmf.kind == PmfSource::Kind::Trace) {
      const fs::path p = dir / t.pmf.path;
      if (!fs::exists(p))
        throw ConfigError(filename + ": task '" + t.name +
                          "': pmf path not found: " + p.string());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

void validate_for_mode(const RunConfig& config, RunMode mode) {
  for (const auto& t : config.tasks) {
    switch (mode) {
      case RunMode::Analyze:
        if (!t.budget && !t.budget_sweep)
          throw ConfigError("task '" + t.name +
                            "': analyze mode needs budget_us or budget_sweep_us");
        if (t.delta_divisors && !t.budget)
          throw ConfigError("task '" + t.name +
                            "': delta_divisors requires a fixed budget_us");
        break;
      case RunMode::Simulate:
        if (!t.budget)
          throw ConfigError("task '" + t.name + "': simulate mode needs budget_us");
        break;
      case RunMode::Optimize:
        if (t.quality.slope < 0.0)
          throw ConfigError("task '" + t.name + "': quality_slope must be >= 0");
        if (config.exact_delta > 0 &&
            config.budget_resolution % config.exact_delta != 0)
          throw ConfigError("exact_delta_us must divide budget_resolution_us");
        break;
    }
  }
  if (mode == RunMode::Simulate && config.jobs <= config.warmup_or_default())
    throw ConfigError("jobs must exceed warmup");
}

Pmf load_pmf(const TaskConfig& task, const std::string& config_dir) {
  namespace fs = std::filesystem;
  Pmf pmf = [&] {
    switch (task.pmf.kind) {
      case PmfSource::Kind::Beta:
        return Pmf::from_beta(task.pmf.alpha, task.pmf.beta, task.pmf.support_max,
                              task.pmf.grid);
      case PmfSource::Kind::File: {
        const fs::path p = fs::path(config_dir) / task.pmf.path;
        return Pmf::load_file(p.string());
      }
      case PmfSource::Kind::Trace:
      default: {
        const fs::path p = fs::path(config_dir) / task.pmf.path;
        std::ifstream in(p);
        if (!in) throw ConfigError("cannot open trace file: " + p.string());
        std::vector<usec_t> samples;
        double v;
        while (in >> v) samples.push_back(static_cast<usec_t>(std::llround(v)));
        return Pmf::from_trace(samples);
      }
    }
  }();
  return pmf.truncated_below(task.truncate_below);
}

TaskSpec make_task_spec(const TaskConfig& task, const std::string& config_dir) {
  TaskSpec spec;
  spec.name = task.name;
  spec.period = task.period;
  spec.deadline = task.deadline == 0 ? task.period : task.deadline;
  spec.server_period = task.server_period;
  spec.pmf = load_pmf(task, config_dir);
  if (task.delta) {
    spec.delta_analytic = *task.delta;
    spec.delta_numeric = *task.delta;
  }
  spec.quality = task.quality;
  spec.quality_floor = task.quality_floor;
  return spec;
}

}  // namespace resprob
