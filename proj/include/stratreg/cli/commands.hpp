#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "stratreg/cli/config.hpp"

namespace stratreg::cli {

struct RunContext {
  GameConfig config;
  std::filesystem::path out = ".";
  std::uint64_t seed = 1;
  int jobs = 1;
  bool normalize = false;
  bool svg = false;
  std::string config_hash;  // written into every CSV
};

/// 16 hex digits of FNV-1a over the config text and the output-affecting flags.
std::string config_hash(const std::string& text, std::uint64_t seed, bool normalize);

// Each command writes its files into ctx.out and returns the process exit
// code (0, or 3 when a solve did not converge). Errors propagate as exceptions.
int cmd_equilibrium(const RunContext& ctx);
int cmd_design(const RunContext& ctx);
int cmd_sweep(const RunContext& ctx);
int cmd_poa(const RunContext& ctx);
int cmd_ols(const RunContext& ctx);
int cmd_equivalence(const RunContext& ctx);
int cmd_simulate(const RunContext& ctx);

/// Dispatch by subcommand name.
int run_command(const std::string& name, const RunContext& ctx);

/// 2 config error, 3 non-convergence, 4 model precondition violation.
int exit_code_for(const Error& e);

}  // namespace stratreg::cli
