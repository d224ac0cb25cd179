#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "sentinel/config.hpp"
#include "sentinel/errors.hpp"
#include "sentinel/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool strict_paper = false;
};

sentinel::PipelineConfig resolve(const Flags& flags) {
  sentinel::PipelineConfig config = flags.config.empty() ? sentinel::PipelineConfig{} : sentinel::load_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (!flags.out.empty()) config.paths.out_dir = flags.out;
  if (flags.strict_paper) config.apply_strict_paper();
  return config;
}

int run(const std::string& command, const Flags& flags) {
  const auto config = resolve(flags);
  if (command == "pipeline") {
    sentinel::run_pipeline(config, std::cerr);
  } else if (command == "synth") {
    sentinel::run_synth(config, std::cerr);
  } else {
    sentinel::run_stage(command, config, std::cerr);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversation classifier and author scorer for chat corpora"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Flags flags;
  app.add_option("--config", flags.config, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "override [run] seed");
  app.add_option("--out", flags.out, "override paths.out_dir");
  app.add_flag("--strict-paper", flags.strict_paper, "disable LSTM biases and SCD masking");

  std::vector<std::string> commands = sentinel::pipeline_stages();
  commands.push_back("pipeline");
  commands.push_back("synth");
  for (const auto& name : commands) {
    std::string help = name == "pipeline" ? "run every stage from preprocess through identify"
                       : name == "synth"  ? "write synthetic train and test corpora"
                                          : "run the " + name + " stage";
    app.add_subcommand(name, help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, flags);
  } catch (const sentinel::UsageError& e) {
    std::cerr << "sentinel: " << e.what() << '\n';
    return kExitUsage;
  } catch (const sentinel::DataError& e) {
    std::cerr << "sentinel: " << e.what() << '\n';
    return kExitData;
  } catch (const sentinel::NumericError& e) {
    std::cerr << "sentinel: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "sentinel: " << e.what() << '\n';
    return kExitData;
  }
}
