#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wavecorr/cli_app.hpp"

namespace {

using namespace wavecorr;

struct PipelineCommand {
  explicit PipelineCommand(CLI::App* sub) : app(sub) {}
  CLI::App* app;
  std::string config_path;
  std::map<std::string, std::string> overrides;
};

void add_config_flags(PipelineCommand& cmd) {
  cmd.app->add_option("--config", cmd.config_path, "key = value config file (default: $WAVECORR_CONFIG)");
  for (const auto& key : config_keys()) {
    const std::string name = key.name;
    cmd.app->add_option_function<std::string>(
        "--" + name, [&cmd, name](const std::string& v) { cmd.overrides[name] = v; }, key.help);
  }
}

RunConfig resolve_config(const PipelineCommand& cmd) {
  std::string path = cmd.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar)) path = env;
  }
  RunConfig c = path.empty() ? RunConfig{} : load_config(path);
  for (const auto& [key, value] : cmd.overrides) apply_setting(c, key, value);
  c.validate();
  return c;
}

void print_files(const CommandResult& r) {
  for (const auto& f : r.files) std::cout << f.string() << '\n';
  for (const auto& w : r.warnings) std::cerr << "WARNING NonConvergence: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scale-by-scale wavelet correlation analysis of intraday prices"};
  app.require_subcommand(1);

  PipelineCommand panel{app.add_subcommand("panel", "yearly and monthly wavelet correlation panels")};
  PipelineCommand benchmarks{app.add_subcommand("benchmarks", "DCC-GARCH and realized correlation benchmarks")};
  PipelineCommand breaks{app.add_subcommand("breaks", "supF break test and split-sample cointegration")};
  for (auto* cmd : {&panel, &benchmarks, &breaks}) add_config_flags(*cmd);

  auto* gen = app.add_subcommand("gen", "simulate a market scenario into tick files and truth.json");
  std::string scenario_path;
  std::string gen_output = "scenario";
  gen->add_option("scenario", scenario_path, "scenario file")->required();
  gen->add_option("--output_dir", gen_output, "output directory");

  auto* nulltab = app.add_subcommand("nulltab", "tabulate the supF null distribution");
  double trim = 0.15;
  std::uint64_t seed = kSupFNullSeed;
  std::size_t paths = 100000;
  std::size_t grid = 1000;
  std::string table_output;
  nulltab->add_option("--trim", trim, "trimming fraction");
  nulltab->add_option("--seed", seed, "simulation seed");
  nulltab->add_option("--paths", paths, "Brownian bridge paths");
  nulltab->add_option("--grid", grid, "grid points per path");
  nulltab->add_option("--output", table_output, "output file (default supf_null_trim<trim>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_line(ErrorCode::Usage, e.what()) << '\n';
    return 2;
  }

  try {
    if (gen->parsed()) {
      print_files(cmd_gen(scenario_path, gen_output));
      return 0;
    }
    if (nulltab->parsed()) {
      if (table_output.empty()) table_output = supf_table_filename(trim);
      print_files(cmd_nulltab(trim, seed, paths, grid, table_output));
      return 0;
    }
    for (auto* cmd : {&panel, &benchmarks, &breaks}) {
      if (!cmd->app->parsed()) continue;
      const RunConfig c = resolve_config(*cmd);
      const std::string name = cmd->app->get_name();
      CommandResult r = name == "panel" ? cmd_panel(c) : name == "benchmarks" ? cmd_benchmarks(c) : cmd_breaks(c);
      const int status = finish_command(c, r, name);
      print_files(r);
      return status;
    }
  } catch (const Error& e) {
    std::cerr << error_line(e.code(), e.what()) << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << error_line(ErrorCode::IoError, e.what()) << '\n';
    return 3;
  }
  return 2;
}
