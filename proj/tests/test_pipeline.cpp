#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "novsal/config.hpp"
#include "novsal/error.hpp"
#include "novsal/pipeline.hpp"
#include "novsal/rng.hpp"

using namespace novsal;
namespace fs = std::filesystem;

namespace {

// Pair counting: P(novel more novel than target), ties one half.
double brute_auc(const std::vector<double>& t, const std::vector<double>& n, Orientation o) {
  double wins = 0.0;
  for (double a : n) {
    for (double b : t) {
      const bool more = o == Orientation::HighIsNovel ? a > b : a < b;
      wins += more ? 1.0 : (a == b ? 0.5 : 0.0);
    }
  }
  return wins / double(t.size() * n.size());
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

RunConfig tiny_config(const fs::path& out) {
  RunConfig c;
  c.out_dir = out;
  c.target_count = 40;
  c.novel_count = 16;
  c.eval_count = 5;
  c.cnn_epochs = 1;
  c.ae_epochs = 1;
  c.batch = 16;
  return c;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(NOVSAL_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("auc equals pairwise counting") {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> t(1 + rng.below(30)), n(1 + rng.below(30));
    // coarse values force ties
    for (auto& v : t) v = double(rng.below(8)) / 8.0;
    for (auto& v : n) v = double(rng.below(8)) / 8.0;
    for (auto o : {Orientation::HighIsNovel, Orientation::LowIsNovel}) {
      CHECK(separation_auc(t, n, o) == doctest::Approx(brute_auc(t, n, o)).epsilon(1e-12));
    }
  }
  CHECK(separation_auc({0.1, 0.2}, {0.8, 0.9}, Orientation::HighIsNovel) == 1.0);
  CHECK(separation_auc({0.1, 0.2}, {0.8, 0.9}, Orientation::LowIsNovel) == 0.0);
  CHECK(separation_auc({0.5}, {0.5}, Orientation::HighIsNovel) == 0.5);
  CHECK_THROWS_AS(separation_auc({}, {1.0}, Orientation::HighIsNovel), std::invalid_argument);
}

TEST_CASE("histograms") {
  const std::vector<double> t{0.0, 0.5, 0.99, 1.0, 1.5}, n{-0.2, 0.3};
  const auto h = make_histogram(t, n, LossKind::Ssim);
  REQUIRE(h.edges.size() == 51);
  CHECK(h.edges.front() == 0.0);
  CHECK(h.edges.back() == 1.0);
  std::size_t st = 0, sn = 0;
  for (auto v : h.target) st += v;
  for (auto v : h.novel) sn += v;
  CHECK(st == t.size());
  CHECK(sn == n.size());
  CHECK(h.target.back() == 3);  // 0.99, 1.0 and the clamped 1.5
  CHECK(h.novel.front() == 1);  // clamped -0.2

  const auto m = make_histogram({0.01, 0.02}, {0.04}, LossKind::Mse, 4);
  CHECK(m.edges.back() == 0.04);
  CHECK(m.novel.back() == 1);

  testutil::TempDir dir("hist");
  write_histogram_csv(dir / "h.csv", h);
  CHECK(count_lines(dir / "h.csv") == 51);
  CHECK(testutil::slurp(dir / "h.csv").rfind("bin_low,bin_high,count_target,count_novel\n", 0) == 0);
}

TEST_CASE("score orientation and names") {
  CHECK(score_orientation(LossKind::Mse) == Orientation::HighIsNovel);
  CHECK(score_orientation(LossKind::Ssim) == Orientation::LowIsNovel);
  CHECK(config_name(Preprocess::Vbp, LossKind::Ssim) == "vbp+ssim");
  CHECK(config_name(Preprocess::Raw, LossKind::Mse) == "raw+mse");
}

TEST_CASE("config parsing") {
  RunConfig c;
  apply_config_text(c, "# comment\nloss = mse  # trailing\npreprocess=raw\nnoise_sigmas = 0.1, 0.3\n", "t");
  CHECK(c.loss == LossKind::Mse);
  CHECK(c.preprocess == Preprocess::Raw);
  CHECK(c.noise_sigmas == std::vector<double>{0.1, 0.3});
  CHECK_THROWS_AS(apply_config_text(c, "colour = red\n", "t"), UsageError);
  CHECK_THROWS_AS(apply_config_text(c, "no equals sign\n", "t"), UsageError);
  CHECK_THROWS_AS(apply_setting(c, "percentile", "1.5"), UsageError);
  CHECK(c.percentile == 0.99);  // rejected values leave the config untouched
  CHECK_THROWS_AS(apply_setting(c, "batch", "-3"), UsageError);
  CHECK_THROWS_AS(apply_setting(c, "experiment", "E9"), UsageError);

  c.ae_learning_rate = 0.1 + 0.2;
  c.out_dir = "some/where";
  RunConfig back;
  apply_config_text(back, config_to_text(c), "round trip");
  CHECK(config_to_text(back) == config_to_text(c));
  CHECK(back.ae_learning_rate == c.ae_learning_rate);

  CHECK(c.in_out("x.nvsm") == fs::path("some/where/x.nvsm"));
  CHECK(c.in_out("/abs/x.nvsm") == fs::path("/abs/x.nvsm"));

  for (const char* name : {"E0", "E1", "E2", "E3"}) {
    const auto cfg = load_config(fs::path(NOVSAL_SOURCE_DIR) / "configs" / (std::string(name) + ".conf"));
    CHECK(cfg.experiment == name);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/x.conf"), UsageError);
}

TEST_CASE("labeled set helpers") {
  testutil::TempDir dir("sets");
  gen_dataset(world_a(1), 12, dir / "a");
  const auto set = load_labeled_set(dir / "a" / "manifest.csv");
  REQUIRE(set.size() == 12);
  REQUIRE(set.world.has_value());
  CHECK(set.world->id == 'A');
  CHECK(set.scene_params.size() == 12);
  CHECK(set.take(3).size() == 3);
  CHECK(set.take(30).size() == 12);
  const auto sub = set.subset({4, 1});
  CHECK(sub.paths[0] == set.paths[4]);
  CHECK(sub.angles[1] == set.angles[1]);

  const auto [train, test] = split_set(set, {0.75, 3});
  const auto [mtrain, mtest] = split_dataset(read_manifest(dir / "a" / "manifest.csv"), {0.75, 3});
  REQUIRE(train.size() == mtrain.size());
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(fs::path(train.paths[i]).filename() == mtrain.records[i].path);

  const auto s1 = sample_set(set, 5, 9), s2 = sample_set(set, 5, 9);
  CHECK(s1.paths == s2.paths);
  CHECK(sample_set(set, 50, 9).size() == 12);
}

TEST_CASE("score report files") {
  testutil::TempDir dir("report");
  const auto t = fit_threshold({0.9, 0.95, 0.97}, 0.99, Orientation::LowIsNovel);
  auto r = evaluate_scores("vbp+ssim", Preprocess::Vbp, LossKind::Ssim, t, {0.9, 0.95, 0.97},
                           {"t1", "t2"}, {0.96, 0.95}, {"n1", "n2", "n3"}, {0.2, 0.91, 0.3});
  CHECK(r.auc == 1.0);
  CHECK(r.flagged_target == 0.0);
  CHECK(r.flagged_novel == doctest::Approx(2.0 / 3.0));  // 0.91 is above the 0.9 cutoff
  CHECK(r.mean_novel == doctest::Approx((0.2 + 0.91 + 0.3) / 3));
  write_score_report(dir.path(), "vbp_ssim", r, "E2");
  CHECK(count_lines(dir / "vbp_ssim.jsonl") == 5);
  std::ifstream in(dir / "vbp_ssim.jsonl");
  std::string first;
  std::getline(in, first);
  const auto j = nlohmann::json::parse(first);
  CHECK(j["set"] == "target");
  CHECK(j["score_kind"] == "ssim");
  CHECK(j["novel"] == false);
  CHECK(fs::exists(dir / "vbp_ssim_histogram.csv"));
  CHECK(read_threshold(dir / "vbp_ssim_threshold.txt") == t);
  const auto table = cmd_report(dir.path());
  CHECK(table.find("vbp+ssim") != std::string::npos);
  CHECK_THROWS_AS(cmd_report(dir / "missing"), DataError);
}

TEST_CASE("edge concentration of a band-shaped mask") {
  const WorldSpec w = world_a(1);
  const SceneParams p{0.002, 0.1};
  const ImageBuf band = edge_band(w, p, 2.0);
  ImageBuf mask = band;
  for (auto& v : mask.data()) v = v > 0 ? 0.9 : 0.1;
  CHECK(edge_concentration({mask}, {p}, w, 2.0) == doctest::Approx(9.0));
  CHECK(edge_concentration({ImageBuf(60, 160, 0.5)}, {p}, w, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("small end-to-end experiment run is reproducible") {
  testutil::TempDir dir("e2_small");
  RunConfig c = tiny_config(dir / "run");
  c.experiment = "E2";
  ExperimentResult a;
  {
    Workbench bench(c, false);
    a = cmd_experiment(bench);
  }
  REQUIRE(a.reports.size() == 3);
  for (const auto& r : a.reports) {
    CHECK(r.rows.size() == 10);
    CHECK(r.auc >= 0.0);
    CHECK(r.auc <= 1.0);
    CHECK(r.flagged_calibration <= 1.0 - c.percentile + 1e-12);
  }
  CHECK(a.metrics.count("auc_vbp_ssim") == 1);
  CHECK(fs::exists(dir / "run" / "E2" / "experiment.json"));
  REQUIRE(count_lines(dir / "run" / "E2" / "vbp_ssim.jsonl") == 10);

  RunConfig c2 = c;
  c2.out_dir = dir / "run2";
  Workbench bench2(c2, false);
  const auto b = cmd_experiment(bench2);
  CHECK(b.metrics == a.metrics);
  for (std::size_t i = 0; i < a.reports.size(); ++i) {
    CHECK(b.reports[i].scores("target") == a.reports[i].scores("target"));
    CHECK(b.reports[i].scores("novel") == a.reports[i].scores("novel"));
  }
}

TEST_CASE("command line chain and exit codes") {
  testutil::TempDir dir("cli");
  const fs::path out = dir / "out";
  const fs::path log = dir / "cli.log";
  const std::string common = "-s out_dir=" + out.string() +
                             " -s target_count=40 -s novel_count=16 -s eval_count=5"
                             " -s cnn_epochs=1 -s ae_epochs=1 -s batch=16";
  REQUIRE(run_cli("gen-data " + common, log) == 0);
  REQUIRE(run_cli("train-cnn " + common, log) == 0);
  CHECK(fs::exists(out / "cnn.nvsm"));
  CHECK(count_lines(out / "cnn_history.csv") == 2);
  REQUIRE(run_cli("export-vbp " + common, log) == 0);
  CHECK(count_lines(out / "masks" / "target" / "manifest.csv") == 41);
  CHECK(fs::exists(out / "masks" / "novel" / "world.txt"));
  REQUIRE(run_cli("train-ae " + common, log) == 0);
  REQUIRE(run_cli("calibrate " + common, log) == 0);
  const auto t = read_threshold(out / "threshold.txt");
  CHECK(t.orientation == Orientation::LowIsNovel);
  REQUIRE(run_cli("score " + common, log) == 0);
  CHECK(count_lines(out / "score.jsonl") == 10);
  const std::string first_scores = testutil::slurp(out / "score.jsonl");
  REQUIRE(run_cli("score " + common, log) == 0);
  CHECK(testutil::slurp(out / "score.jsonl") == first_scores);
  CHECK(run_cli("report " + out.string(), log) == 0);

  // usage: unknown verb, unknown key, malformed override
  CHECK(run_cli("frobnicate", log) == 1);
  CHECK(run_cli("score -s colour=red", log) == 1);
  CHECK(run_cli("score -s loss", log) == 1);
  // orientation mismatch is a usage error
  CHECK(run_cli("score " + common + " -s loss=mse", log) == 1);
  // data: missing weights, missing report dir, missing masks
  CHECK(run_cli("calibrate -s out_dir=" + (dir / "empty").string(), log) == 2);
  CHECK(run_cli("report " + (dir / "nowhere").string(), log) == 2);
  CHECK(run_cli("train-ae " + common + " -s mask_dir=nomasks", log) == 2);
  // a corrupt image makes export-vbp report a data failure
  std::ofstream(out / "data" / "world_A_s1_n40" / "scene_00002.pgm", std::ios::binary) << "P5\n1";
  CHECK(run_cli("export-vbp " + common + " -s mask_dir=masks2", log) == 2);
  CHECK(count_lines(out / "masks2" / "target" / "manifest.csv") == 40);
  CHECK_FALSE(fs::exists(out / "masks2" / "target" / "scenes.csv"));
}

}  // TEST_SUITE
