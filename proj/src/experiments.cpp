// Experiment recipes E0-E3 on top of the Workbench caches.

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "novsal/corruption.hpp"
#include "novsal/error.hpp"
#include "novsal/pipeline.hpp"
#include "novsal/rng.hpp"
#include "novsal/vbp.hpp"

namespace novsal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct AeConfig {
  Preprocess mode;
  LossKind loss;
};

// Prior-work baseline first, then the two VBP variants.
constexpr AeConfig kConfigs[] = {
    {Preprocess::Raw, LossKind::Mse},
    {Preprocess::Vbp, LossKind::Mse},
    {Preprocess::Vbp, LossKind::Ssim},
};

std::string file_stem(Preprocess mode, LossKind loss) {
  return to_string(mode) + "_" + to_string(loss);
}

std::string sigma_tag(double sigma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sigma%g", sigma);
  return buf;
}

void write_summary(const fs::path& dir, ExperimentResult& result) {
  json j;
  j["experiment"] = result.id;
  j["metrics"] = result.metrics;
  json configs = json::array();
  for (const auto& r : result.reports) {
    configs.push_back({{"config", r.name},
                       {"auc", r.auc},
                       {"mean_target", r.mean_target},
                       {"mean_novel", r.mean_novel},
                       {"flagged_target", r.flagged_target},
                       {"flagged_novel", r.flagged_novel}});
  }
  j["reports"] = configs;
  result.artifacts.push_back("experiment.json");
  j["artifacts"] = result.artifacts;
  std::ofstream out(dir / "experiment.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + (dir / "experiment.json").string());
}

fs::path experiment_dir(Workbench& bench, const std::string& id) {
  const fs::path dir = bench.config().out_dir / id;
  fs::create_directories(dir);
  return dir;
}

void add_report_artifacts(ExperimentResult& result, const ScoreReport& r) {
  result.artifacts.insert(result.artifacts.end(), r.artifacts.begin(), r.artifacts.end());
}

ScoreReport evaluate_config(Workbench& bench, Preprocess mode, LossKind loss,
                            const std::vector<std::string>& target_paths,
                            const std::vector<double>& target_scores,
                            const std::vector<std::string>& novel_paths,
                            const std::vector<double>& novel_scores) {
  const auto calibration = bench.calibration_scores(mode, loss);
  const auto threshold =
      fit_threshold(calibration, bench.config().percentile, score_orientation(loss));
  return evaluate_scores(config_name(mode, loss), mode, loss, threshold, calibration, target_paths,
                         target_scores, novel_paths, novel_scores);
}

}  // namespace

double edge_concentration(const std::vector<ImageBuf>& masks, const std::vector<SceneParams>& params,
                          const WorldSpec& world, double half_width) {
  if (masks.size() != params.size() || masks.empty()) {
    throw std::invalid_argument("edge_concentration: need one scene geometry per mask");
  }
  double on = 0.0, off = 0.0;
  std::size_t n_on = 0, n_off = 0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const ImageBuf band = edge_band(world, params[i], half_width);
    if (!band.same_dims(masks[i])) throw std::invalid_argument("edge_concentration: mask size");
    for (std::size_t k = 0; k < band.size(); ++k) {
      if (band[k] > 0.5) {
        on += masks[i][k];
        ++n_on;
      } else {
        off += masks[i][k];
        ++n_off;
      }
    }
  }
  if (n_on == 0 || n_off == 0) throw std::invalid_argument("edge_concentration: degenerate band");
  off /= static_cast<double>(n_off);
  on /= static_cast<double>(n_on);
  return off > 0.0 ? on / off : (on > 0.0 ? INFINITY : 1.0);
}

ExperimentResult run_e0(Workbench& bench) {
  ExperimentResult result{"E0", {}, {}, {}};
  const fs::path dir = experiment_dir(bench, "E0");
  const RunConfig& c = bench.config();
  const LabeledSet& eval = bench.target_eval();
  if (eval.scene_params.empty() || !eval.world) {
    throw DataError("E0 needs synthetic scene geometry (scenes.csv/world.txt next to the manifest)");
  }

  const CnnModel init(default_cnn_architecture(kSceneHeight, kSceneWidth), c.cnn_seed);
  const auto& real = bench.cnn(false);
  const auto& random = bench.cnn(true);
  const auto m_init = vbp_batch(init, eval.images);
  const auto m_real = vbp_batch(real.model, eval.images);
  const auto m_random = vbp_batch(random.model, eval.images);

  const double hw = c.edge_band_halfwidth;
  auto& m = result.metrics;
  m["edge_ratio_init"] = edge_concentration(m_init, eval.scene_params, *eval.world, hw);
  m["edge_ratio_real"] = edge_concentration(m_real, eval.scene_params, *eval.world, hw);
  m["edge_ratio_random"] = edge_concentration(m_random, eval.scene_params, *eval.world, hw);
  m["edge_ratio_real_over_random"] = m["edge_ratio_real"] / m["edge_ratio_random"];
  m["heldout_angle_mse_real"] = cnn_angle_mse(real.model, eval.images, eval.angles);
  m["heldout_angle_mse_random"] = cnn_angle_mse(random.model, eval.images, eval.angles);
  m["random_label_first_epoch_loss"] = random.loss_history.front();
  m["random_label_final_loss"] = random.loss_history.back();

  save_cnn(dir / "cnn_real.nvsm", real.model);
  save_cnn(dir / "cnn_random.nvsm", random.model);
  result.artifacts = {"cnn_real.nvsm", "cnn_random.nvsm"};
  for (std::size_t i = 0; i < std::min<std::size_t>(4, eval.size()); ++i) {
    char name[64];
    const std::pair<const char*, const ImageBuf*> items[] = {
        {"input", &eval.images[i]}, {"real", &m_real[i]}, {"random", &m_random[i]}};
    for (const auto& [tag, img] : items) {
      std::snprintf(name, sizeof name, "sample%zu_%s.pgm", i, tag);
      write_pgm(dir / name, *img);
      result.artifacts.push_back(name);
    }
  }
  write_summary(dir, result);
  return result;
}

ExperimentResult run_e1(Workbench& bench) {
  ExperimentResult result{"E1", {}, {}, {}};
  const fs::path dir = experiment_dir(bench, "E1");
  const std::pair<const char*, const LabeledSet*> sets[] = {{"target", &bench.target_eval()},
                                                           {"novel", &bench.novel_eval()}};
  for (const auto& cfg : kConfigs) {
    const AeModel& ae = bench.autoencoder(cfg.mode, cfg.loss).model;
    const std::string stem = file_stem(cfg.mode, cfg.loss);
    for (const auto& [set_name, set] : sets) {
      const auto& inputs = bench.preprocessed(*set, cfg.mode);
      double ssim_sum = 0.0, mse_sum = 0.0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const ImageBuf recon = ae_reconstruct(ae, inputs[i]);
        ssim_sum += ssim_mean(inputs[i], recon);
        mse_sum += mse(inputs[i], recon);
        if (i < 4) {
          char name[96];
          std::snprintf(name, sizeof name, "%s_%s%zu_input.pgm", stem.c_str(), set_name, i);
          write_pgm(dir / name, inputs[i]);
          result.artifacts.push_back(name);
          std::snprintf(name, sizeof name, "%s_%s%zu_recon.pgm", stem.c_str(), set_name, i);
          write_pgm(dir / name, recon);
          result.artifacts.push_back(name);
        }
      }
      const double n = static_cast<double>(inputs.size());
      result.metrics["mean_ssim_" + std::string(set_name) + "_" + stem] = ssim_sum / n;
      result.metrics["mean_mse_" + std::string(set_name) + "_" + stem] = mse_sum / n;
    }
  }
  write_summary(dir, result);
  return result;
}

ExperimentResult run_e2(Workbench& bench) {
  ExperimentResult result{"E2", {}, {}, {}};
  const fs::path dir = experiment_dir(bench, "E2");
  const LabeledSet& target = bench.target_eval();
  const LabeledSet& novel = bench.novel_eval();
  for (const auto& cfg : kConfigs) {
    ScoreReport r = evaluate_config(bench, cfg.mode, cfg.loss, target.paths,
                                    bench.scores(target, cfg.mode, cfg.loss), novel.paths,
                                    bench.scores(novel, cfg.mode, cfg.loss));
    const std::string stem = file_stem(cfg.mode, cfg.loss);
    write_score_report(dir, stem, r, "E2");
    add_report_artifacts(result, r);
    result.metrics["auc_" + stem] = r.auc;
    result.metrics["mean_target_" + stem] = r.mean_target;
    result.metrics["mean_novel_" + stem] = r.mean_novel;
    result.metrics["flagged_target_" + stem] = r.flagged_target;
    result.metrics["flagged_novel_" + stem] = r.flagged_novel;
    result.metrics["flagged_calibration_" + stem] = r.flagged_calibration;
    result.reports.push_back(std::move(r));
  }
  result.metrics["ssim_gap"] =
      result.metrics["mean_target_vbp_ssim"] - result.metrics["mean_novel_vbp_ssim"];
  write_summary(dir, result);
  return result;
}

ExperimentResult run_e3(Workbench& bench) {
  ExperimentResult result{"E3", {}, {}, {}};
  const fs::path dir = experiment_dir(bench, "E3");
  const RunConfig& c = bench.config();
  const LabeledSet& clean = bench.target_eval();
  const LabeledSet& novel = bench.novel_eval();

  // E2 separations of the same models, for the "smaller separation" comparison.
  for (const auto& cfg : kConfigs) {
    result.metrics["e2_auc_" + file_stem(cfg.mode, cfg.loss)] =
        separation_auc(bench.scores(clean, cfg.mode, cfg.loss),
                       bench.scores(novel, cfg.mode, cfg.loss), score_orientation(cfg.loss));
  }

  for (double sigma : c.noise_sigmas) {
    std::vector<ImageBuf> noisy;
    std::vector<std::string> noisy_paths;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      noisy.push_back(add_gaussian_noise(clean.images[i], sigma, mix_seed(c.noise_seed, i)));
      noisy_paths.push_back(clean.paths[i] + "#noise=" + sigma_tag(sigma).substr(5));
    }
    std::vector<ImageBuf> noisy_masks;
    for (const auto& cfg : kConfigs) {
      const std::vector<ImageBuf>* inputs = &noisy;
      if (cfg.mode == Preprocess::Vbp) {
        if (noisy_masks.empty()) noisy_masks = bench.preprocess(noisy, Preprocess::Vbp);
        inputs = &noisy_masks;
      }
      ScoreReport r = evaluate_config(bench, cfg.mode, cfg.loss, clean.paths,
                                      bench.scores(clean, cfg.mode, cfg.loss), noisy_paths,
                                      bench.scores(*inputs, cfg.mode, cfg.loss));
      const std::string stem = sigma_tag(sigma) + "_" + file_stem(cfg.mode, cfg.loss);
      write_score_report(dir, stem, r, "E3");
      add_report_artifacts(result, r);
      result.metrics["auc_" + stem] = r.auc;
      result.metrics["flagged_novel_" + stem] = r.flagged_novel;
      result.reports.push_back(std::move(r));
    }
  }
  write_summary(dir, result);
  return result;
}

ExperimentResult cmd_experiment(Workbench& bench) {
  const std::string& id = bench.config().experiment;
  if (id == "E0") return run_e0(bench);
  if (id == "E1") return run_e1(bench);
  if (id == "E2") return run_e2(bench);
  if (id == "E3") return run_e3(bench);
  throw UsageError("experiment: set 'experiment' to E0, E1, E2 or E3");
}

}  // namespace novsal
