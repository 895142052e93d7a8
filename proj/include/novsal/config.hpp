#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "novsal/nn.hpp"

namespace novsal {

enum class Preprocess { Raw, Vbp };

std::string to_string(Preprocess p);
Preprocess parse_preprocess(const std::string& text);

/// Where the detector threshold is fitted.
enum class CalibrationSet { Train, Heldout };

std::string to_string(CalibrationSet c);

/// Everything a pipeline command or experiment needs. Loaded from a
/// line-oriented `key = value` file; '#' starts a comment.
struct RunConfig {
  std::filesystem::path out_dir = "out";

  // Datasets. Empty manifests mean "generate synthetic worlds into out_dir".
  std::filesystem::path target_manifest;
  std::filesystem::path novel_manifest;
  char target_world = 'A';
  char novel_world = 'B';
  std::uint64_t target_world_seed = 1;
  std::uint64_t novel_world_seed = 2;
  std::size_t target_count = 2000;
  std::size_t novel_count = 200;
  std::size_t eval_count = 200;  // per class
  double train_fraction = 0.8;
  std::uint64_t split_seed = 11;

  // Models and artifacts (relative paths resolve against out_dir).
  std::filesystem::path cnn_weights = "cnn.nvsm";
  std::filesystem::path ae_weights = "ae.nvsm";
  std::filesystem::path threshold_file = "threshold.txt";
  std::filesystem::path input_dir;  // images for export-vbp / score (manifest directory)
  std::filesystem::path mask_dir = "masks";

  // Steering CNN.
  std::size_t cnn_epochs = 30;
  double cnn_learning_rate = 1e-3;
  std::uint64_t cnn_seed = 7;
  bool random_labels = false;

  // Autoencoder.
  LossKind loss = LossKind::Ssim;
  Preprocess preprocess = Preprocess::Vbp;
  std::size_t ae_epochs = 200;
  double ae_learning_rate = 1e-3;
  std::uint64_t ae_seed = 3;
  std::size_t batch = 32;

  // Detector.
  double percentile = 0.99;
  CalibrationSet calibration = CalibrationSet::Train;

  // Experiments.
  std::string experiment;
  std::vector<double> noise_sigmas = {0.05, 0.1, 0.2};
  std::uint64_t noise_seed = 5;
  double edge_band_halfwidth = 2.0;

  /// Resolves `p` against out_dir unless it is absolute or empty.
  std::filesystem::path in_out(const std::filesystem::path& p) const;

  TrainConfig cnn_train_config() const;
  TrainConfig ae_train_config() const;
};

/// Applies one `key = value` setting. Unknown keys and malformed values throw UsageError.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses a config file on top of the defaults.
RunConfig load_config(const std::filesystem::path& path);

/// Parses `key = value` lines from text (used by load_config).
void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin);

/// All keys with their current values, one per line, loadable by load_config.
std::string config_to_text(const RunConfig& config);

}  // namespace novsal
