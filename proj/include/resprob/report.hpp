#pragma once

#include <string>

#include <json.hpp>

#include "resprob/config.hpp"

namespace resprob {

struct RunOutput {
  int exit_code = 0;             // 0 ok, 2 infeasible optimization
  nlohmann::ordered_json report;  // primary machine-readable result
  std::string text;              // aligned human-readable table
  std::string csv;               // sweep/histogram export (may be empty)
  std::string chain_dump;        // per-evaluation chain JSON (analyze only)
};

// Executes the configured run. config_dir anchors relative paths; mode must
// already be reconciled between config and CLI. Thread count is read from
// RESPROB_THREADS (default 1).
RunOutput run(const RunConfig& config, RunMode mode, const std::string& config_dir,
              bool dump_chains = false);

}  // namespace resprob
