#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "novsal/autoencoder.hpp"
#include "novsal/cnn.hpp"
#include "novsal/config.hpp"
#include "novsal/detector.hpp"
#include "novsal/image.hpp"
#include "novsal/synth.hpp"

namespace novsal {

/// Rank-based separation: probability that a novel sample scores as more novel
/// than a target sample, ties counted one half.
double separation_auc(const std::vector<double>& target, const std::vector<double>& novel,
                      Orientation orientation);

/// 50 fixed bins: [0,1] for SSIM similarities, [0, max score] for MSE. Values
/// outside the range are clamped into the first or last bin.
struct Histogram {
  std::vector<double> edges;  // 51 edges
  std::vector<std::size_t> target;
  std::vector<std::size_t> novel;
};

Histogram make_histogram(const std::vector<double>& target, const std::vector<double>& novel,
                         LossKind loss, std::size_t bins = 50);
/// `bin_low,bin_high,count_target,count_novel`.
void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);

/// Orientation of the per-image score for a loss kind: MSE high-is-novel,
/// SSIM similarity low-is-novel.
Orientation score_orientation(LossKind loss);

/// Per-image detector score: MSE for MSE models, SSIM similarity for SSIM models.
double detector_score(const AeModel& ae, const ImageBuf& input, LossKind loss);

/// Images with their provenance.
struct LabeledSet {
  std::vector<std::string> paths;
  std::vector<ImageBuf> images;
  std::vector<double> angles;
  std::vector<SceneParams> scene_params;  // empty unless the data came from the synthetic generator
  std::optional<WorldSpec> world;

  std::size_t size() const noexcept { return images.size(); }
  LabeledSet take(std::size_t n) const;
  LabeledSet subset(const std::vector<std::size_t>& indices) const;
};

/// Loads a manifest plus, when present next to it, synthetic scenes.csv/world.txt.
/// Images of another size are resized to 60x160.
LabeledSet load_labeled_set(const std::filesystem::path& manifest_csv);

/// Same train/test assignment as split_dataset on the set's manifest.
std::pair<LabeledSet, LabeledSet> split_set(const LabeledSet& set, const SplitSpec& spec);

/// Seeded sample of min(n, size) items, in sampled order.
LabeledSet sample_set(const LabeledSet& set, std::size_t n, std::uint64_t seed);

/// Display/file name of a configuration, e.g. "vbp+ssim".
std::string config_name(Preprocess mode, LossKind loss);

struct ScoredImage {
  std::string path;
  std::string set;  // "target" or "novel"
  double score = 0.0;
  bool novel = false;
};

/// One configuration's detector evaluation.
struct ScoreReport {
  std::string name;  // e.g. "vbp+ssim"
  Preprocess preprocess = Preprocess::Vbp;
  LossKind loss = LossKind::Ssim;
  NoveltyThreshold threshold;
  std::vector<double> calibration_scores;
  std::vector<ScoredImage> rows;
  double mean_target = 0.0;
  double mean_novel = 0.0;
  double auc = 0.5;
  double flagged_target = 0.0;
  double flagged_novel = 0.0;
  double flagged_calibration = 0.0;
  std::vector<std::string> artifacts;

  std::vector<double> scores(const std::string& set) const;
};

/// Builds a ScoreReport from a fitted threshold and calibration, target and novel scores.
ScoreReport evaluate_scores(std::string name, Preprocess preprocess, LossKind loss,
                            const NoveltyThreshold& threshold,
                            const std::vector<double>& calibration,
                            const std::vector<std::string>& target_paths,
                            const std::vector<double>& target_scores,
                            const std::vector<std::string>& novel_paths,
                            const std::vector<double>& novel_scores);

/// Writes <stem>.jsonl (one object per image), <stem>_histogram.csv,
/// <stem>_threshold.txt and <stem>_summary.json into `dir`, recording them in
/// report.artifacts.
void write_score_report(const std::filesystem::path& dir, const std::string& stem,
                        ScoreReport& report, const std::string& experiment);

/// Appends timestamped lines to <out_dir>/run.log and echoes the message (without
/// timestamp) to stderr.
class RunLog {
 public:
  explicit RunLog(const std::filesystem::path& out_dir, bool echo = true);
  void operator()(const std::string& message) const;

 private:
  std::filesystem::path path_;
  bool echo_;
};

/// Lazily computed and cached artifacts shared by commands and experiments in
/// one process: datasets, splits, CNNs, masks and autoencoders.
class Workbench {
 public:
  explicit Workbench(RunConfig config, bool echo_log = true);
  ~Workbench();
  Workbench(const Workbench&) = delete;
  Workbench& operator=(const Workbench&) = delete;

  const RunConfig& config() const noexcept { return config_; }
  const RunLog& log() const noexcept { return log_; }

  /// Path of the target/novel manifest, generating synthetic worlds if none is configured.
  std::filesystem::path target_manifest();
  std::filesystem::path novel_manifest();

  const LabeledSet& target_train();
  const LabeledSet& target_heldout();
  /// First eval_count images of the held-out split.
  const LabeledSet& target_eval();
  /// eval_count images sampled from the novel manifest.
  const LabeledSet& novel_eval();

  /// Trains (or returns the cached) steering CNN on the training split.
  const CnnTrainResult& cnn(bool random_labels = false);

  /// Raw images or VBP masks (computed with the real-label CNN) of a set.
  const std::vector<ImageBuf>& preprocessed(const LabeledSet& set, Preprocess mode);

  /// Preprocesses arbitrary images (no caching).
  std::vector<ImageBuf> preprocess(const std::vector<ImageBuf>& images, Preprocess mode);

  /// Trains (or returns the cached) autoencoder for a preprocessing/loss pair.
  const AeTrainResult<float>& autoencoder(Preprocess mode, LossKind loss);

  /// Scores of a set under a configuration.
  std::vector<double> scores(const LabeledSet& set, Preprocess mode, LossKind loss);
  std::vector<double> scores(const std::vector<ImageBuf>& preprocessed_images, Preprocess mode,
                             LossKind loss);

  /// Calibration scores (training or held-out split per config).
  std::vector<double> calibration_scores(Preprocess mode, LossKind loss);

 private:
  struct Cache;
  RunConfig config_;
  RunLog log_;
  std::unique_ptr<Cache> cache_;
};

/// Summary of an experiment: named scalar results plus per-configuration reports.
struct ExperimentResult {
  std::string id;
  std::map<std::string, double> metrics;
  std::vector<ScoreReport> reports;
  std::vector<std::string> artifacts;
};

// CLI commands. Outputs go under config.out_dir; fatal problems throw
// novsal::Error. cmd_export_vbp returns the number of images that failed.
void cmd_gen_data(Workbench& bench);
void cmd_train_cnn(Workbench& bench);
std::size_t cmd_export_vbp(Workbench& bench);
void cmd_train_ae(Workbench& bench);
NoveltyThreshold cmd_calibrate(Workbench& bench);
ScoreReport cmd_score(Workbench& bench);
ScoreReport cmd_calibrate_and_score(Workbench& bench);

// Experiments (E0 random-label control, E1 reconstructions, E2 dataset
// comparison, E3 noise detection). Results are also written under
// <out_dir>/<id>/.
ExperimentResult run_e0(Workbench& bench);
ExperimentResult run_e1(Workbench& bench);
ExperimentResult run_e2(Workbench& bench);
ExperimentResult run_e3(Workbench& bench);
ExperimentResult cmd_experiment(Workbench& bench);

/// Pooled edge concentration: mean mask value on the lane-edge band divided by
/// the mean elsewhere.
double edge_concentration(const std::vector<ImageBuf>& masks, const std::vector<SceneParams>& params,
                          const WorldSpec& world, double half_width);

/// Human-readable table of every *_summary.json under `dir`.
std::string cmd_report(const std::filesystem::path& dir);

}  // namespace novsal
