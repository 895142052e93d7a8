#include "novsal/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "novsal/error.hpp"
#include "novsal/rng.hpp"
#include "novsal/vbp.hpp"

namespace novsal {

namespace fs = std::filesystem;
using nlohmann::json;

double separation_auc(const std::vector<double>& target, const std::vector<double>& novel,
                      Orientation orientation) {
  if (target.empty() || novel.empty()) {
    throw std::invalid_argument("separation_auc: both score sets must be non-empty");
  }
  // Mann-Whitney U with midranks; "more novel" means larger after orienting.
  const double sign = orientation == Orientation::HighIsNovel ? 1.0 : -1.0;
  std::vector<std::pair<double, bool>> all;
  all.reserve(target.size() + novel.size());
  for (double v : target) all.emplace_back(sign * v, false);
  for (double v : novel) all.emplace_back(sign * v, true);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double novel_rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].second) novel_rank_sum += midrank;
    }
    i = j;
  }
  const double n1 = static_cast<double>(novel.size());
  const double n0 = static_cast<double>(target.size());
  return (novel_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

Histogram make_histogram(const std::vector<double>& target, const std::vector<double>& novel,
                         LossKind loss, std::size_t bins) {
  if (bins == 0) throw std::invalid_argument("make_histogram: bins must be >= 1");
  double hi = 1.0;
  if (loss == LossKind::Mse) {
    hi = 0.0;
    for (double v : target) hi = std::max(hi, v);
    for (double v : novel) hi = std::max(hi, v);
    if (!(hi > 0.0)) hi = 1.0;
  }
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.edges[i] = hi * static_cast<double>(i) / static_cast<double>(bins);
  }
  const auto fill = [&](const std::vector<double>& values, std::vector<std::size_t>& counts) {
    counts.assign(bins, 0);
    for (double v : values) {
      const double pos = std::floor(v / hi * static_cast<double>(bins));
      const auto b = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(bins - 1)));
      ++counts[b];
    }
  };
  fill(target, h.target);
  fill(novel, h.novel);
  return h;
}

void write_histogram_csv(const fs::path& path, const Histogram& h) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << "bin_low,bin_high,count_target,count_novel\n";
  char line[160];
  for (std::size_t i = 0; i < h.target.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g,%.17g,%zu,%zu\n", h.edges[i], h.edges[i + 1],
                  h.target[i], h.novel[i]);
    out << line;
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Orientation score_orientation(LossKind loss) {
  return loss == LossKind::Mse ? Orientation::HighIsNovel : Orientation::LowIsNovel;
}

double detector_score(const AeModel& ae, const ImageBuf& input, LossKind loss) {
  const ImageBuf recon = ae_reconstruct(ae, input);
  return loss == LossKind::Mse ? mse(input, recon) : ssim_mean(input, recon);
}

std::string config_name(Preprocess mode, LossKind loss) {
  return to_string(mode) + "+" + to_string(loss);
}

// ---------------------------------------------------------------------------
// Labeled sets

LabeledSet LabeledSet::subset(const std::vector<std::size_t>& indices) const {
  LabeledSet out;
  out.world = world;
  for (std::size_t i : indices) {
    out.paths.push_back(paths.at(i));
    out.images.push_back(images.at(i));
    out.angles.push_back(angles.at(i));
    if (!scene_params.empty()) out.scene_params.push_back(scene_params.at(i));
  }
  return out;
}

LabeledSet LabeledSet::take(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

LabeledSet load_labeled_set(const fs::path& manifest_csv) {
  const DatasetManifest manifest = read_manifest(manifest_csv);
  validate_manifest(manifest);
  LabeledSet set;
  for (const auto& rec : manifest.records) {
    ImageBuf img = read_gray_image(manifest.resolve(rec));
    if (img.height() != kSceneHeight || img.width() != kSceneWidth) {
      img = resize_bilinear(img, kSceneHeight, kSceneWidth);
    }
    set.paths.push_back(manifest.resolve(rec).lexically_normal().generic_string());
    set.images.push_back(std::move(img));
    set.angles.push_back(rec.angle_rad);
  }
  const fs::path dir = manifest_csv.parent_path();
  if (fs::exists(dir / "scenes.csv") && fs::exists(dir / "world.txt")) {
    auto params = read_scene_params(dir / "scenes.csv");
    if (params.size() == set.size()) {
      set.scene_params = std::move(params);
      set.world = read_world_spec(dir / "world.txt");
    }
  }
  return set;
}

std::pair<LabeledSet, LabeledSet> split_set(const LabeledSet& set, const SplitSpec& spec) {
  const auto [train, test] = split_indices(set.size(), spec);
  return {set.subset(train), set.subset(test)};
}

LabeledSet sample_set(const LabeledSet& set, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(seed));
  rng.shuffle(order);
  order.resize(std::min(n, order.size()));
  return set.subset(order);
}

// ---------------------------------------------------------------------------
// Reports

std::vector<double> ScoreReport::scores(const std::string& set) const {
  std::vector<double> out;
  for (const auto& row : rows) {
    if (row.set == set) out.push_back(row.score);
  }
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

void write_history_csv(const fs::path& path, const std::vector<double>& history) {
  std::string text = "epoch,loss\n";
  char line[64];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(line, sizeof line, "%zu,%.17g\n", e + 1, history[e]);
    text += line;
  }
  write_text(path, text);
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

}  // namespace

ScoreReport evaluate_scores(std::string name, Preprocess preprocess, LossKind loss,
                            const NoveltyThreshold& threshold,
                            const std::vector<double>& calibration,
                            const std::vector<std::string>& target_paths,
                            const std::vector<double>& target_scores,
                            const std::vector<std::string>& novel_paths,
                            const std::vector<double>& novel_scores) {
  if (target_paths.size() != target_scores.size() || novel_paths.size() != novel_scores.size()) {
    throw std::invalid_argument("evaluate_scores: path and score counts differ");
  }
  ScoreReport r;
  r.name = std::move(name);
  r.preprocess = preprocess;
  r.loss = loss;
  r.threshold = threshold;
  r.calibration_scores = calibration;
  for (std::size_t i = 0; i < target_scores.size(); ++i) {
    r.rows.push_back({target_paths[i], "target", target_scores[i],
                      classify(target_scores[i], threshold).novel});
  }
  for (std::size_t i = 0; i < novel_scores.size(); ++i) {
    r.rows.push_back(
        {novel_paths[i], "novel", novel_scores[i], classify(novel_scores[i], threshold).novel});
  }
  r.mean_target = mean_of(target_scores);
  r.mean_novel = mean_of(novel_scores);
  r.auc = separation_auc(target_scores, novel_scores, threshold.orientation);
  r.flagged_target = flagged_fraction(target_scores, threshold);
  r.flagged_novel = flagged_fraction(novel_scores, threshold);
  r.flagged_calibration = calibration.empty() ? 0.0 : flagged_fraction(calibration, threshold);
  return r;
}

void write_score_report(const fs::path& dir, const std::string& stem, ScoreReport& report,
                        const std::string& experiment) {
  fs::create_directories(dir);
  const std::string score_name = report.loss == LossKind::Mse ? "mse" : "ssim";

  std::string lines;
  for (const auto& row : report.rows) {
    json j;
    j["experiment"] = experiment;
    j["config"] = report.name;
    j["path"] = row.path;
    j["set"] = row.set;
    j["preprocess"] = to_string(report.preprocess);
    j["loss"] = to_string(report.loss);
    j["score_kind"] = score_name;
    j["score"] = row.score;
    j["novel"] = row.novel;
    lines += j.dump() + "\n";
  }
  write_text(dir / (stem + ".jsonl"), lines);

  const auto h = make_histogram(report.scores("target"), report.scores("novel"), report.loss);
  write_histogram_csv(dir / (stem + "_histogram.csv"), h);
  write_threshold(dir / (stem + "_threshold.txt"), report.threshold);

  report.artifacts = {stem + ".jsonl", stem + "_histogram.csv", stem + "_threshold.txt",
                      stem + "_summary.json"};
  json s;
  s["experiment"] = experiment;
  s["config"] = report.name;
  s["preprocess"] = to_string(report.preprocess);
  s["loss"] = to_string(report.loss);
  s["score_kind"] = score_name;
  s["n_target"] = report.scores("target").size();
  s["n_novel"] = report.scores("novel").size();
  s["n_calibration"] = report.calibration_scores.size();
  s["mean_target"] = report.mean_target;
  s["mean_novel"] = report.mean_novel;
  s["auc"] = report.auc;
  s["threshold"] = {{"cutoff", report.threshold.cutoff},
                    {"orientation", to_string(report.threshold.orientation)},
                    {"percentile", report.threshold.percentile}};
  s["flagged_target"] = report.flagged_target;
  s["flagged_novel"] = report.flagged_novel;
  s["flagged_calibration"] = report.flagged_calibration;
  s["artifacts"] = report.artifacts;
  write_text(dir / (stem + "_summary.json"), s.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Logging

RunLog::RunLog(const fs::path& out_dir, bool echo) : path_(out_dir / "run.log"), echo_(echo) {}

void RunLog::operator()(const std::string& message) const {
  if (echo_) std::cerr << message << '\n';
  std::error_code ec;
  fs::create_directories(path_.parent_path(), ec);
  std::ofstream out(path_, std::ios::app);
  if (!out) return;  // logging is best effort
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
  out << '[' << stamp << "] " << message << '\n';
}

// ---------------------------------------------------------------------------
// Workbench

struct Workbench::Cache {
  std::optional<fs::path> target_manifest, novel_manifest;
  std::optional<LabeledSet> target_all, target_train, target_heldout, target_eval, novel_eval;
  std::optional<CnnTrainResult> cnn_real, cnn_random;
  std::map<const LabeledSet*, std::vector<ImageBuf>> masks;
  std::map<std::pair<int, int>, AeTrainResult<float>> aes;
};

Workbench::Workbench(RunConfig config, bool echo_log)
    : config_(std::move(config)), log_(config_.out_dir, echo_log), cache_(std::make_unique<Cache>()) {}

Workbench::~Workbench() = default;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path ensure_world(const RunConfig& config, const RunLog& log, char id, std::uint64_t seed,
                      std::size_t count) {
  const WorldSpec spec = world_by_id(id, seed);
  const fs::path dir = config.out_dir / "data" /
                       (std::string("world_") + id + "_s" + std::to_string(seed) + "_n" +
                        std::to_string(count));
  const fs::path manifest = dir / "manifest.csv";
  if (!fs::exists(manifest)) {
    log("generating world " + std::string(1, id) + " (" + std::to_string(count) + " scenes) in " +
        dir.string());
    gen_dataset(spec, count, dir);
  }
  return manifest;
}

fs::path existing(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw DataError(std::string(what) + " not found: " + p.string());
  return p;
}

}  // namespace

fs::path Workbench::target_manifest() {
  if (!cache_->target_manifest) {
    cache_->target_manifest =
        config_.target_manifest.empty()
            ? ensure_world(config_, log_, config_.target_world, config_.target_world_seed,
                           config_.target_count)
            : existing(config_.target_manifest, "target manifest");
  }
  return *cache_->target_manifest;
}

fs::path Workbench::novel_manifest() {
  if (!cache_->novel_manifest) {
    cache_->novel_manifest =
        config_.novel_manifest.empty()
            ? ensure_world(config_, log_, config_.novel_world, config_.novel_world_seed,
                           config_.novel_count)
            : existing(config_.novel_manifest, "novel manifest");
  }
  return *cache_->novel_manifest;
}

const LabeledSet& Workbench::target_train() {
  if (!cache_->target_train) {
    if (!cache_->target_all) cache_->target_all = load_labeled_set(target_manifest());
    auto [train, heldout] =
        split_set(*cache_->target_all, {config_.train_fraction, config_.split_seed});
    cache_->target_train = std::move(train);
    cache_->target_heldout = std::move(heldout);
  }
  return *cache_->target_train;
}

const LabeledSet& Workbench::target_heldout() {
  target_train();
  return *cache_->target_heldout;
}

const LabeledSet& Workbench::target_eval() {
  if (!cache_->target_eval) cache_->target_eval = target_heldout().take(config_.eval_count);
  return *cache_->target_eval;
}

const LabeledSet& Workbench::novel_eval() {
  if (!cache_->novel_eval) {
    cache_->novel_eval = sample_set(load_labeled_set(novel_manifest()), config_.eval_count,
                                    mix_seed(config_.split_seed, 0x6e6f76656cULL));
  }
  return *cache_->novel_eval;
}

const CnnTrainResult& Workbench::cnn(bool random_labels) {
  auto& slot = random_labels ? cache_->cnn_random : cache_->cnn_real;
  if (!slot) {
    const LabeledSet& train = target_train();
    const auto t0 = Clock::now();
    CnnModel init(default_cnn_architecture(kSceneHeight, kSceneWidth), config_.cnn_seed);
    slot = random_labels ? cnn_train_random_labels(std::move(init), train.images,
                                                   config_.cnn_train_config())
                         : cnn_train(std::move(init), train.images, train.angles,
                                     config_.cnn_train_config());
    log_(std::string(random_labels ? "random-label" : "steering") + " CNN trained on " +
         std::to_string(train.size()) + " images in " + fmt("%.1f s", seconds_since(t0)) +
         ", final loss " + fmt("%.6g", slot->loss_history.back()));
  }
  return *slot;
}

std::vector<ImageBuf> Workbench::preprocess(const std::vector<ImageBuf>& images, Preprocess mode) {
  if (mode == Preprocess::Raw) return images;
  return vbp_batch(cnn(false).model, images);
}

const std::vector<ImageBuf>& Workbench::preprocessed(const LabeledSet& set, Preprocess mode) {
  if (mode == Preprocess::Raw) return set.images;
  auto it = cache_->masks.find(&set);
  if (it == cache_->masks.end()) it = cache_->masks.emplace(&set, preprocess(set.images, mode)).first;
  return it->second;
}

const AeTrainResult<float>& Workbench::autoencoder(Preprocess mode, LossKind loss) {
  const auto key = std::make_pair(static_cast<int>(mode), static_cast<int>(loss));
  auto it = cache_->aes.find(key);
  if (it == cache_->aes.end()) {
    const auto& images = preprocessed(target_train(), mode);
    TrainConfig tc = config_.ae_train_config();
    tc.loss = loss;
    const auto t0 = Clock::now();
    AeModel init(default_ae_dims(images.front().size()), config_.ae_seed);
    auto result = ae_train(std::move(init), images, tc);
    log_("autoencoder " + config_name(mode, loss) + " trained (" + std::to_string(tc.epochs) +
         " epochs) in " + fmt("%.1f s", seconds_since(t0)) + ", final loss " +
         fmt("%.6g", result.loss_history.back()));
    it = cache_->aes.emplace(key, std::move(result)).first;
  }
  return it->second;
}

std::vector<double> Workbench::scores(const std::vector<ImageBuf>& images, Preprocess mode,
                                      LossKind loss) {
  const AeModel& ae = autoencoder(mode, loss).model;
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(detector_score(ae, img, loss));
  return out;
}

std::vector<double> Workbench::scores(const LabeledSet& set, Preprocess mode, LossKind loss) {
  return scores(preprocessed(set, mode), mode, loss);
}

std::vector<double> Workbench::calibration_scores(Preprocess mode, LossKind loss) {
  if (config_.calibration == CalibrationSet::Train) return scores(target_train(), mode, loss);
  // Held-out calibration uses the held-out images not reserved for evaluation.
  const LabeledSet& heldout = target_heldout();
  if (heldout.size() <= config_.eval_count) {
    throw DataError("held-out calibration needs more than eval_count held-out images");
  }
  std::vector<ImageBuf> rest(heldout.images.begin() + static_cast<std::ptrdiff_t>(config_.eval_count),
                             heldout.images.end());
  return scores(preprocess(rest, mode), mode, loss);
}

// ---------------------------------------------------------------------------
// CLI commands

namespace {

fs::path mask_subdir(const RunConfig& c, const std::string& which) {
  return c.in_out(c.mask_dir) / which;
}

// Target or novel set in the configured preprocessing: raw images, or the
// masks written by export-vbp.
LabeledSet source_set(Workbench& bench, const std::string& which) {
  const RunConfig& c = bench.config();
  if (c.preprocess == Preprocess::Raw) {
    return load_labeled_set(which == "target" ? bench.target_manifest() : bench.novel_manifest());
  }
  const fs::path manifest = mask_subdir(c, which) / "manifest.csv";
  if (!fs::exists(manifest)) {
    throw DataError("no VBP masks at " + manifest.string() + " (run export-vbp first)");
  }
  return load_labeled_set(manifest);
}

struct CliSets {
  LabeledSet train, heldout, target_eval, novel_eval;
};

CliSets cli_sets(Workbench& bench, bool need_novel) {
  const RunConfig& c = bench.config();
  CliSets s;
  std::tie(s.train, s.heldout) = split_set(source_set(bench, "target"), {c.train_fraction, c.split_seed});
  s.target_eval = s.heldout.take(c.eval_count);
  if (need_novel) {
    s.novel_eval = sample_set(source_set(bench, "novel"), c.eval_count,
                              mix_seed(c.split_seed, 0x6e6f76656cULL));
  }
  return s;
}

std::vector<double> score_images(const AeModel& ae, const std::vector<ImageBuf>& images,
                                 LossKind loss) {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(detector_score(ae, img, loss));
  return out;
}

std::vector<double> cli_calibration_scores(const RunConfig& c, const AeModel& ae, const CliSets& s) {
  if (c.calibration == CalibrationSet::Train) return score_images(ae, s.train.images, c.loss);
  if (s.heldout.size() <= c.eval_count) {
    throw DataError("held-out calibration needs more than eval_count held-out images");
  }
  const std::vector<ImageBuf> rest(s.heldout.images.begin() + static_cast<std::ptrdiff_t>(c.eval_count),
                                   s.heldout.images.end());
  return score_images(ae, rest, c.loss);
}

}  // namespace

void cmd_gen_data(Workbench& bench) {
  bench.log()("target manifest: " + bench.target_manifest().string());
  bench.log()("novel manifest: " + bench.novel_manifest().string());
}

void cmd_train_cnn(Workbench& bench) {
  const RunConfig& c = bench.config();
  const CnnTrainResult& result = bench.cnn(c.random_labels);
  const fs::path weights = c.in_out(c.cnn_weights);
  fs::create_directories(weights.parent_path());
  save_cnn(weights, result.model);
  write_history_csv(sibling(weights, "_history.csv"), result.loss_history);
  const LabeledSet& heldout = bench.target_heldout();
  bench.log()("held-out angle MSE " +
              fmt("%.6g", cnn_angle_mse(result.model, heldout.images, heldout.angles)) +
              "; weights written to " + weights.string());
}

std::size_t cmd_export_vbp(Workbench& bench) {
  const RunConfig& c = bench.config();
  const CnnModel model = load_cnn(c.in_out(c.cnn_weights));
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (!c.input_dir.empty()) {
    jobs.emplace_back(existing(c.input_dir / "manifest.csv", "input manifest"),
                      c.in_out(c.mask_dir) / c.input_dir.filename());
  } else {
    jobs.emplace_back(bench.target_manifest(), mask_subdir(c, "target"));
    jobs.emplace_back(bench.novel_manifest(), mask_subdir(c, "novel"));
  }
  std::size_t failures = 0;
  for (const auto& [manifest_path, out_dir] : jobs) {
    const DatasetManifest manifest = read_manifest(manifest_path);
    validate_manifest(manifest);
    fs::create_directories(out_dir);
    DatasetManifest masks{{}, out_dir};
    for (const auto& rec : manifest.records) {
      try {
        ImageBuf img = read_gray_image(manifest.resolve(rec));
        if (img.height() != model.input_height() || img.width() != model.input_width()) {
          img = resize_bilinear(img, model.input_height(), model.input_width());
        }
        const fs::path name = fs::path(rec.path).replace_extension(".pgm");
        fs::create_directories((out_dir / name).parent_path());
        write_pgm(out_dir / name, vbp_mask(model, img));
        masks.records.push_back({name.generic_string(), rec.angle_rad});
      } catch (const std::exception& e) {
        ++failures;
        bench.log()("export-vbp: " + manifest.resolve(rec).string() + ": " + e.what());
      }
    }
    write_manifest(out_dir / "manifest.csv", masks);
    // Keep synthetic geometry next to the masks when every image succeeded.
    const fs::path src_dir = manifest_path.parent_path();
    if (masks.size() == manifest.size()) {
      for (const char* side : {"scenes.csv", "world.txt"}) {
        if (fs::exists(src_dir / side)) {
          fs::copy_file(src_dir / side, out_dir / side, fs::copy_options::overwrite_existing);
        }
      }
    }
    bench.log()("export-vbp: " + std::to_string(masks.size()) + "/" +
                std::to_string(manifest.size()) + " masks written to " + out_dir.string());
  }
  return failures;
}

void cmd_train_ae(Workbench& bench) {
  const RunConfig& c = bench.config();
  const CliSets sets = cli_sets(bench, false);
  const auto t0 = Clock::now();
  AeModel init(default_ae_dims(sets.train.images.front().size()), c.ae_seed);
  const auto result = ae_train(std::move(init), sets.train.images, c.ae_train_config());
  const fs::path weights = c.in_out(c.ae_weights);
  fs::create_directories(weights.parent_path());
  save_ae(weights, result.model);
  write_history_csv(sibling(weights, "_history.csv"), result.loss_history);
  bench.log()("autoencoder " + config_name(c.preprocess, c.loss) + " trained on " +
              std::to_string(sets.train.size()) + " images in " +
              fmt("%.1f s", seconds_since(t0)) + "; weights written to " + weights.string());
}

NoveltyThreshold cmd_calibrate(Workbench& bench) {
  const RunConfig& c = bench.config();
  const AeModel ae = load_ae(c.in_out(c.ae_weights));
  const CliSets sets = cli_sets(bench, false);
  const auto t = fit_threshold(cli_calibration_scores(c, ae, sets), c.percentile,
                               score_orientation(c.loss));
  const fs::path out = c.in_out(c.threshold_file);
  fs::create_directories(out.parent_path());
  write_threshold(out, t);
  bench.log()("threshold " + fmt("%.17g", t.cutoff) + " (" + to_string(t.orientation) +
              ") written to " + out.string());
  return t;
}

ScoreReport cmd_score(Workbench& bench) {
  const RunConfig& c = bench.config();
  const AeModel ae = load_ae(c.in_out(c.ae_weights));
  const NoveltyThreshold t = read_threshold(c.in_out(c.threshold_file));
  if (t.orientation != score_orientation(c.loss)) {
    throw UsageError("threshold orientation " + to_string(t.orientation) +
                     " does not match loss " + to_string(c.loss));
  }
  const CliSets sets = cli_sets(bench, true);
  ScoreReport report = evaluate_scores(
      config_name(c.preprocess, c.loss), c.preprocess, c.loss, t, cli_calibration_scores(c, ae, sets),
      sets.target_eval.paths, score_images(ae, sets.target_eval.images, c.loss),
      sets.novel_eval.paths, score_images(ae, sets.novel_eval.images, c.loss));
  write_score_report(c.out_dir, "score", report, c.experiment);
  bench.log()("score: AUC " + fmt("%.4f", report.auc) + ", novel flagged " +
              fmt("%.3f", report.flagged_novel) + ", target flagged " +
              fmt("%.3f", report.flagged_target));
  return report;
}

ScoreReport cmd_calibrate_and_score(Workbench& bench) {
  cmd_calibrate(bench);
  return cmd_score(bench);
}

std::string cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 13 &&
        name.compare(name.size() - 13, 13, "_summary.json") == 0) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-10s %-5s %12s %12s %8s %8s %8s\n", "experiment",
                "config", "score", "mean_target", "mean_novel", "auc", "flag_tgt", "flag_nov");
  out << line;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      in >> j;
      std::snprintf(line, sizeof line, "%-10s %-10s %-5s %12.6g %12.6g %8.4f %8.3f %8.3f\n",
                    j.value("experiment", std::string("-")).c_str(),
                    j.at("config").get<std::string>().c_str(),
                    j.at("score_kind").get<std::string>().c_str(), j.at("mean_target").get<double>(),
                    j.at("mean_novel").get<double>(), j.at("auc").get<double>(),
                    j.at("flagged_target").get<double>(), j.at("flagged_novel").get<double>());
    } catch (const json::exception& e) {
      throw DataError("malformed summary " + f.string() + ": " + e.what());
    }
    out << line;
  }
  return out.str();
}

}  // namespace novsal
