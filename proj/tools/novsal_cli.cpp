// novsal: command-line front end for data generation, training, calibration,
// scoring and the E0-E3 experiments.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "novsal/error.hpp"
#include "novsal/pipeline.hpp"

namespace {

using novsal::ExitCode;

int code(ExitCode c) { return static_cast<int>(c); }

novsal::RunConfig build_config(const std::string& config_file,
                               const std::vector<std::string>& overrides) {
  novsal::RunConfig config = config_file.empty() ? novsal::RunConfig{} : novsal::load_config(config_file);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw novsal::UsageError("override '" + kv + "' is not of the form key=value");
    }
    novsal::apply_setting(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return config;
}

void print_report(const novsal::ScoreReport& r) {
  std::cout << r.name << ": auc " << r.auc << ", mean target " << r.mean_target << ", mean novel "
            << r.mean_novel << ", flagged target " << r.flagged_target << ", flagged novel "
            << r.flagged_novel << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Novelty detection from VisualBackProp saliency masks and autoencoders"};
  app.require_subcommand(1);

  std::string config_file;
  std::vector<std::string> overrides;
  std::string report_dir;

  const std::vector<std::pair<std::string, std::string>> verbs = {
      {"gen-data", "generate the synthetic target/novel worlds (unless manifests are configured)"},
      {"train-cnn", "train the steering CNN on the training split"},
      {"export-vbp", "write one VBP mask PGM per manifest image"},
      {"train-ae", "train the autoencoder on raw images or exported masks"},
      {"calibrate", "fit the novelty threshold on the calibration set"},
      {"score", "score held-out target and novel images, write reports and histograms"},
      {"experiment", "run experiment E0, E1, E2 or E3"},
      {"report", "tabulate every *_summary.json under a directory"},
  };
  for (const auto& [name, help] : verbs) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_file, "config file (key = value lines)");
    if (name == "report") {
      sub->add_option("dir", report_dir, "directory to scan (default: out_dir)");
    }
    sub->add_option("-s,--set", overrides, "override a config key (key=value), repeatable");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : code(ExitCode::Usage);
  }

  const std::string verb = app.get_subcommands().front()->get_name();
  try {
    novsal::RunConfig config = build_config(config_file, overrides);
    if (verb == "report") {
      std::cout << novsal::cmd_report(report_dir.empty() ? config.out_dir : std::filesystem::path(report_dir));
      return 0;
    }
    std::filesystem::create_directories(config.out_dir);
    novsal::Workbench bench(config);
    if (verb == "gen-data") {
      novsal::cmd_gen_data(bench);
    } else if (verb == "train-cnn") {
      novsal::cmd_train_cnn(bench);
    } else if (verb == "export-vbp") {
      const std::size_t failed = novsal::cmd_export_vbp(bench);
      if (failed > 0) {
        std::cerr << "export-vbp: " << failed << " image(s) failed; see run.log\n";
        return code(ExitCode::Data);
      }
    } else if (verb == "train-ae") {
      novsal::cmd_train_ae(bench);
    } else if (verb == "calibrate") {
      const auto t = novsal::cmd_calibrate(bench);
      std::cout << novsal::to_string(t.orientation) << ' ' << t.cutoff << '\n';
    } else if (verb == "score") {
      print_report(novsal::cmd_score(bench));
    } else if (verb == "experiment") {
      const auto result = novsal::cmd_experiment(bench);
      for (const auto& [key, value] : result.metrics) std::cout << key << ' ' << value << '\n';
    }
    return 0;
  } catch (const novsal::Error& e) {
    std::cerr << "novsal " << verb << ": " << e.what() << '\n';
    return code(e.code());
  } catch (const std::invalid_argument& e) {
    std::cerr << "novsal " << verb << ": " << e.what() << '\n';
    return code(ExitCode::Data);
  } catch (const std::exception& e) {
    std::cerr << "novsal " << verb << ": " << e.what() << '\n';
    return code(ExitCode::Data);
  }
}
