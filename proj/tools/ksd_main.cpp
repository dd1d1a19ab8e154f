#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <iostream>

#include "ksd/config.hpp"
#include "ksd/errors.hpp"
#include "ksd/experiment.hpp"

namespace {

int run(ksd::Command command, const std::string& config_path, const ksd::RunOptions& options) {
  const ksd::Config config = ksd::Config::load(config_path);
  const ksd::RunResult result = ksd::run_experiment(config, command, options);
  for (const auto& c : result.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
  std::cout << "wrote " << result.files.size() << " files to " << options.out.string() << '\n';
  return ksd::exit_code(result);
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("ksd"));

  CLI::App app{"Dissipation bounds from dynamical entropy: experiment harness"};
  app.require_subcommand(0, 1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out = "out";
  unsigned threads = 1;
  bool quiet = false;
  bool print_schema = false;
  app.add_flag("--schema", print_schema, "print the config schema as a markdown table and exit");

  struct Sub {
    ksd::Command command;
    const char* help;
  };
  const Sub subs[] = {
      {ksd::Command::kRun, "full pipeline: h, ensemble, bound, work"},
      {ksd::Command::kKse, "symbolic Kolmogorov-Sinai entropy"},
      {ksd::Command::kLyapunov, "Lyapunov spectrum and Pesin entropy"},
      {ksd::Command::kWork, "work, dissipated work, Jarzynski and relative entropy"},
      {ksd::Command::kBound, "dissipation bound per partition"},
      {ksd::Command::kOracle, "exact discrete-system property sweep"},
  };
  std::vector<std::pair<CLI::App*, ksd::Command>> commands;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(ksd::command_name(s.command), s.help);
    sub->add_option("--config", config_path, "config file (key = value text or JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "output directory")->capture_default_str();
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--quiet", quiet, "only warnings on stderr");
    commands.emplace_back(sub, s.command);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  if (print_schema) {
    std::cout << ksd::schema_markdown();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 2;
  }

  try {
    for (const auto& [sub, command] : commands) {
      if (!sub->parsed()) continue;
      if (quiet) spdlog::set_level(spdlog::level::warn);
      ksd::RunOptions options;
      options.out = out;
      options.threads = threads;
      if (sub->count("--seed") > 0) options.seed = seed;
      return run(command, config_path, options);
    }
  } catch (const ksd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ksd::EstimatorRefusal& e) {
    std::cerr << "estimator refused: " << e.what() << '\n';
    return 3;
  } catch (const ksd::InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return 4;
  } catch (const ksd::DomainError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
