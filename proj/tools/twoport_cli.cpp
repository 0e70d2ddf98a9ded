// Experiment runner: twoport_cli <experiment> --config <path> [--seed <u64>]
//   [--out <dir>] [--trials <n>] [--threads <n>] [--quiet]
//
// Exit codes: 0 ok, 2 configuration, 3 singular Fisher / tuning, 4 Monte Carlo
// validity, 5 I/O.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twoport/twoport.hpp"

namespace tx = twoport::experiments;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kSingular = 3, kMonteCarlo = 4, kIo = 5 };

int fail(int code, const char* kind, std::string message) {
  for (char& ch : message) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  std::cerr << "twoport_cli: error: kind=" << kind << " exit=" << code << " message=" << message
            << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phase estimation experiments for a lossless two-port network"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> trials;
  std::optional<int> threads;
  bool quiet = false;

  app.add_option("experiment", experiment,
                 "fim-scan | fim-diag | mle-vs-m | mle-vs-n | singularity-scan")
      ->required();
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--seed", seed, "master seed (overrides the configuration)");
  app.add_option("--out", out_dir, "output directory (overrides the configuration)");
  app.add_option("--trials", trials, "Monte Carlo trials per point");
  app.add_option("--threads", threads, "worker threads for Monte Carlo trials");
  app.add_flag("--quiet", quiet, "suppress the summary on stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kConfig, "config", e.what());
  }

  try {
    tx::ExperimentConfig config = tx::load_config(config_path);
    config.experiment = tx::parse_experiment(experiment);
    if (seed) config.master_seed = *seed;
    if (out_dir) config.output_dir = *out_dir;
    if (trials) config.trials = *trials;
    if (threads) config.threads = *threads;
    tx::validate(config);

    const tx::ResultTable table = tx::run_experiment(config);
    const tx::ArtifactPaths paths = tx::emit_artifacts(table, config.output_dir);
    if (!quiet) {
      std::cout << table.name << ": " << table.rows.size() << " rows, config "
                << tx::config_hash(config) << ", seed " << config.master_seed << '\n'
                << "  " << paths.csv.string() << '\n'
                << "  " << paths.svg.string() << '\n';
    }
    if (table.invalid_rows > 0) {
      return fail(kMonteCarlo, "mc-validity",
                  std::to_string(table.invalid_rows) +
                      " Monte Carlo point(s) exceeded the excluded-trial limit; see the valid column");
    }
  } catch (const tx::ConfigError& e) {
    return fail(kConfig, "config", e.what());
  } catch (const twoport::InvalidArgument& e) {
    return fail(kConfig, "config", e.what());
  } catch (const tx::SingularConfiguration& e) {
    return fail(kSingular, "singular", e.what());
  } catch (const twoport::SingularCoefficients& e) {
    return fail(kSingular, "singular", e.what());
  } catch (const twoport::SingularFisher& e) {
    return fail(kSingular, "singular", e.what());
  } catch (const twoport::DegenerateCovariance& e) {
    return fail(kSingular, "singular", e.what());
  } catch (const tx::IoError& e) {
    return fail(kIo, "io", e.what());
  } catch (const std::exception& e) {
    return fail(kIo, "internal", e.what());
  }
  return kOk;
}
