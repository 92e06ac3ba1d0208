#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "stratreg/cli/commands.hpp"
#include "stratreg/cli/csv.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw stratreg::Error(stratreg::ErrorCode::Config, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equilibrium solver and experiment driver for strategic regression games"};
  app.set_version_flag("--version", std::string("stratreg ") + stratreg::cli::kToolVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool normalize = false;
  bool svg = false;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"equilibrium", "Solve for the equilibrium precision profile"},
      {"design", "Compute the optimal design"},
      {"sweep", "Estimation cost across population sizes"},
      {"poa", "Price of anarchy against its bound"},
      {"ols", "OLS aggregator experiments"},
      {"equivalence", "Complete-information equivalence check"},
      {"simulate", "Monte Carlo check of the GLS estimator"},
  };
  app.add_option("--config,-c", config_path, "Config file")->required();
  app.add_option("--out,-o", out, "Output directory (default: [run] out, else .)");
  app.add_option("--seed", seed, "RNG seed (default: [run] seed, else 1)");
  app.add_option("--jobs,-j", jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--normalize", normalize, "Add a normalized cost column to sweep output");
  app.add_flag("--svg", svg, "Also write SVG figures");
  // Global flags are accepted before or after the subcommand.
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    stratreg::cli::RunContext ctx;
    std::string text;
    try {
      text = read_file(config_path);
      ctx.config = stratreg::cli::parse_config(text);
    } catch (const stratreg::Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    ctx.seed = seed ? *seed : ctx.config.seed.value_or(1);
    ctx.out = !out.empty() ? out : ctx.config.out_dir.value_or(".");
    ctx.jobs = jobs;
    ctx.normalize = normalize;
    ctx.svg = svg;
    ctx.config_hash = stratreg::cli::config_hash(text, ctx.seed, normalize);
    return stratreg::cli::run_command(command, ctx);
  } catch (const stratreg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return stratreg::cli::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
