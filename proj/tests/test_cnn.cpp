#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "novsal/cnn.hpp"
#include "novsal/error.hpp"
#include "novsal/synth.hpp"

using namespace novsal;
using testutil::random_image;
using testutil::TempDir;

namespace {

CnnArchitecture tiny_arch(std::size_t h = 6, std::size_t w = 8) {
  CnnArchitecture a;
  a.input_height = h;
  a.input_width = w;
  a.conv = {{1, 2, 3, 1}, {2, 2, 3, 1}};
  a.dense_hidden = {4};
  return a;
}

// Randomize biases too so no unit sits exactly at a ReLU kink by construction.
void jitter_biases(CnnModel& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : m.conv()) {
    for (auto& b : l.biases) b = rng.uniform(-0.1, 0.1);
  }
  for (auto& l : m.dense()) {
    for (auto& b : l.biases) b = rng.uniform(-0.1, 0.1);
  }
}

// Independent forward pass: explicit 6-deep convolution loops, then dense layers.
double oracle_forward(const CnnModel& m, const ImageBuf& img, std::vector<std::vector<double>>* maps) {
  std::vector<double> cur(img.data());
  std::size_t ch = 1, h = img.height(), w = img.width();
  for (const auto& layer : m.conv()) {
    const auto& s = layer.spec;
    const std::size_t oh = (h - s.kernel) / s.stride + 1, ow = (w - s.kernel) / s.stride + 1;
    std::vector<double> out(s.out_channels * oh * ow);
    for (std::size_t o = 0; o < s.out_channels; ++o) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = layer.biases[o];
          for (std::size_t i = 0; i < ch; ++i) {
            for (std::size_t ky = 0; ky < s.kernel; ++ky) {
              for (std::size_t kx = 0; kx < s.kernel; ++kx) {
                acc += layer.weights[((o * ch + i) * s.kernel + ky) * s.kernel + kx] *
                       cur[(i * h + y * s.stride + ky) * w + x * s.stride + kx];
              }
            }
          }
          out[(o * oh + y) * ow + x] = std::max(acc, 0.0);
        }
      }
    }
    if (maps) maps->push_back(out);
    cur = out;
    ch = s.out_channels;
    h = oh;
    w = ow;
  }
  for (std::size_t l = 0; l < m.dense().size(); ++l) {
    const auto& d = m.dense()[l];
    std::vector<double> out(d.out);
    for (std::size_t o = 0; o < d.out; ++o) {
      double acc = d.biases[o];
      for (std::size_t i = 0; i < d.in; ++i) acc += d.weights[o * d.in + i] * cur[i];
      out[o] = l + 1 < m.dense().size() ? std::max(acc, 0.0) : acc;
    }
    cur = out;
  }
  return cur[0];
}

double batch_loss(const CnnModel& m, const std::vector<ImageBuf>& imgs, const std::vector<double>& t) {
  double acc = 0;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const double d = cnn_forward(m, imgs[i]).angle - t[i];
    acc += d * d;
  }
  return acc / double(imgs.size());
}

}  // namespace

TEST_SUITE("cnn") {

TEST_CASE("default architecture geometry") {
  const CnnModel m(default_cnn_architecture(), 1);
  CHECK(m.conv().size() == 3);
  CHECK(m.conv_output_dims(0) == std::pair<std::size_t, std::size_t>{28, 78});
  CHECK(m.conv_output_dims(1) == std::pair<std::size_t, std::size_t>{12, 37});
  CHECK(m.conv_output_dims(2) == std::pair<std::size_t, std::size_t>{5, 18});
  CHECK(m.flattened_size() == 16 * 5 * 18);
  REQUIRE(m.dense().size() == 3);
  CHECK(m.dense()[0].out == 64);
  CHECK(m.dense()[1].out == 16);
  CHECK(m.dense()[2].out == 1);
  for (const auto& l : m.conv()) {
    for (double b : l.biases) CHECK(b == 0.0);
    const double limit = std::sqrt(6.0 / double(l.spec.kernel * l.spec.kernel * (l.spec.in_channels + l.spec.out_channels)));
    for (double v : l.weights) CHECK(std::abs(v) <= limit);
  }
}

TEST_CASE("zero model outputs zero") {
  CnnModel m(tiny_arch(), 2);
  for (auto& p : m.parameters()) std::fill(p.begin(), p.end(), 0.0);
  const auto out = cnn_forward(m, random_image(6, 8, 3), true);
  CHECK(out.angle == 0.0);
  REQUIRE(out.trace);
  for (const auto& fm : out.trace->conv_maps) {
    for (double v : fm.data) CHECK(v == 0.0);
  }
}

TEST_CASE("delta kernel reproduces the valid-cropped input") {
  CnnArchitecture a;
  a.input_height = 7;
  a.input_width = 9;
  a.conv = {{1, 1, 3, 1}};
  a.dense_hidden = {};
  CnnModel m(a, 4);
  auto& k = m.conv()[0].weights;
  std::fill(k.begin(), k.end(), 0.0);
  k[4] = 1.0;
  const auto img = random_image(7, 9, 5);
  const auto out = cnn_forward(m, img, true);
  const auto& fm = out.trace->conv_maps[0];
  REQUIRE(fm.height == 5);
  REQUIRE(fm.width == 7);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 7; ++c) CHECK(fm.at(0, r, c) == img.at(r + 1, c + 1));
  }
  CHECK_FALSE(cnn_forward(m, img, false).trace.has_value());
}

TEST_CASE("forward pass matches the naive convolution oracle") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    CnnArchitecture a = tiny_arch();
    a.conv = {{1, 3, 3, 1}, {3, 2, 3, 2}};
    a.input_height = 9;
    a.input_width = 11;
    CnnModel m(a, seed);
    jitter_biases(m, seed);
    const auto img = random_image(9, 11, seed + 100);
    std::vector<std::vector<double>> maps;
    const double expect = oracle_forward(m, img, &maps);
    const auto out = cnn_forward(m, img, true);
    CHECK(out.angle == doctest::Approx(expect).epsilon(1e-12));
    REQUIRE(out.trace->conv_maps.size() == maps.size());
    for (std::size_t l = 0; l < maps.size(); ++l) {
      REQUIRE(out.trace->conv_maps[l].data.size() == maps[l].size());
      for (std::size_t k = 0; k < maps[l].size(); ++k) {
        CHECK(std::abs(out.trace->conv_maps[l].data[k] - maps[l][k]) <= 1e-6);
        CHECK(out.trace->conv_maps[l].data[k] >= 0.0);
      }
    }
  }
  // Default architecture on a real scene, same oracle.
  const CnnModel big(default_cnn_architecture(), 3);
  const auto scene = gen_scene(world_a(1), 0.002, 0.1, 0).image;
  CHECK(cnn_forward(big, scene).angle == doctest::Approx(oracle_forward(big, scene, nullptr)).epsilon(1e-10));
}

TEST_CASE("input geometry is checked") {
  const CnnModel m(tiny_arch(), 1);
  CHECK_THROWS_AS(cnn_forward(m, ImageBuf(6, 9)), std::invalid_argument);
  CnnArchitecture even = tiny_arch();
  even.conv[0].kernel = 2;
  CHECK_THROWS_AS(CnnModel(even, 1), std::invalid_argument);
  CnnArchitecture big_kernel = tiny_arch(3, 3);
  CHECK_THROWS_AS(CnnModel(big_kernel, 1), std::invalid_argument);
}

TEST_CASE("parameter gradients match central differences") {
  CnnModel m(tiny_arch(), 21);
  jitter_biases(m, 21);
  REQUIRE(m.parameter_count() <= 500);
  std::vector<ImageBuf> imgs;
  std::vector<double> t;
  for (int i = 0; i < 3; ++i) {
    imgs.push_back(random_image(6, 8, 30 + i));
    t.push_back(0.2 * i - 0.2);
  }
  CnnGradients g(m);
  const double loss = cnn_loss_and_grad(m, imgs, t, g);
  CHECK(loss == doctest::Approx(batch_loss(m, imgs, t)).epsilon(1e-12));

  const double h = 1e-4;
  double worst = 0;
  auto params = m.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t k = 0; k < params[p].size(); ++k) {
      const double saved = params[p][k];
      params[p][k] = saved + h;
      const double up = batch_loss(m, imgs, t);
      params[p][k] = saved - h;
      const double down = batch_loss(m, imgs, t);
      params[p][k] = saved;
      const double fd = (up - down) / (2 * h);
      const double an = g.tensors[p][k];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}));
    }
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("training") {
  TrainConfig cfg;
  cfg.batch = 16;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;
  CnnArchitecture a = tiny_arch(10, 12);

  SUBCASE("constant labels reach the constant predictor") {
    std::vector<ImageBuf> imgs;
    for (int i = 0; i < 32; ++i) imgs.push_back(random_image(10, 12, 40 + i));
    const std::vector<double> labels(imgs.size(), 0.3);
    cfg.epochs = 150;
    const auto r = cnn_train(CnnModel(a, 5), imgs, labels, cfg);
    CHECK(r.loss_history.size() == 150);
    CHECK(cnn_angle_mse(r.model, imgs, labels) <= 1e-3);
  }
  SUBCASE("a single sample is fitted within 500 steps") {
    const std::vector<ImageBuf> imgs{random_image(10, 12, 50)};
    const std::vector<double> labels{-0.25};
    cfg.epochs = 500;  // one step per epoch
    cfg.learning_rate = 1e-3;
    const auto r = cnn_train(CnnModel(a, 6), imgs, labels, cfg);
    CHECK(cnn_angle_mse(r.model, imgs, labels) <= 1e-6);
  }
  SUBCASE("fixed seed is bit reproducible, other seeds differ") {
    std::vector<ImageBuf> imgs;
    std::vector<double> labels;
    for (int i = 0; i < 20; ++i) {
      imgs.push_back(random_image(10, 12, 60 + i));
      labels.push_back(0.01 * i);
    }
    cfg.epochs = 5;
    const auto r1 = cnn_train(CnnModel(a, 7), imgs, labels, cfg);
    const auto r2 = cnn_train(CnnModel(a, 7), imgs, labels, cfg);
    CHECK(r1.model == r2.model);
    CHECK(r1.loss_history == r2.loss_history);
    cfg.seed = 5;
    CHECK_FALSE(cnn_train(CnnModel(a, 7), imgs, labels, cfg).model == r1.model);
  }
  SUBCASE("bad input") {
    cfg.epochs = 1;
    CHECK_THROWS_AS(cnn_train(CnnModel(a, 1), {}, {}, cfg), std::invalid_argument);
    CHECK_THROWS_AS(cnn_train(CnnModel(a, 1), {random_image(10, 12, 1)}, {0.1, 0.2}, cfg),
                    std::invalid_argument);
    // squared error of these labels overflows to inf
    cfg.epochs = 2;
    std::vector<ImageBuf> imgs;
    std::vector<double> labels;
    for (int i = 0; i < 8; ++i) {
      imgs.push_back(random_image(10, 12, 70 + i));
      labels.push_back(1e200 * (i % 2 ? 1 : -1));
    }
    CHECK_THROWS_AS(cnn_train(CnnModel(a, 1), imgs, labels, cfg), NumericalError);
  }
}

TEST_CASE("random-label training") {
  const auto labels = random_angles(20000, 3);
  double mean = 0, var = 0;
  for (double v : labels) {
    CHECK(v >= -0.5);
    CHECK(v <= 0.5);
    mean += v;
  }
  mean /= double(labels.size());
  for (double v : labels) var += (v - mean) * (v - mean);
  var /= double(labels.size());
  CHECK(std::abs(mean) <= 0.01);
  CHECK(var == doctest::Approx(1.0 / 12).epsilon(0.03));
  CHECK(random_angles(10, 3) == random_angles(10, 3));
  CHECK(random_angles(10, 3) != random_angles(10, 4));

  // Labels are redrawn every epoch, so nothing in the image predicts them and
  // the loss stays at the label variance however long training runs.
  const WorldSpec world = world_a(5);
  std::vector<ImageBuf> imgs;
  for (const auto& s : gen_scenes(world, 256)) imgs.push_back(s.image);
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.seed = 9;
  const auto r = cnn_train_random_labels(CnnModel(default_cnn_architecture(), 1), imgs, cfg);
  REQUIRE(r.loss_history.size() == 12);
  for (double l : r.loss_history) CHECK(l == doctest::Approx(1.0 / 12).epsilon(0.25));
  cfg.seed = 10;
  const auto other = cnn_train_random_labels(CnnModel(default_cnn_architecture(), 1), imgs, cfg);
  CHECK_FALSE(other.model == r.model);
}

TEST_CASE("weights round trip through NVSM") {
  TempDir dir("cnn_weights");
  CnnModel m(default_cnn_architecture(), 8);
  // Stored as f32: round the doubles first so the round trip is exact.
  for (auto& p : m.parameters()) {
    for (auto& v : p) v = double(float(v));
  }
  jitter_biases(m, 8);
  for (auto& p : m.parameters()) {
    for (auto& v : p) v = double(float(v));
  }
  save_cnn(dir / "m.nvsm", m);
  const auto back = load_cnn(dir / "m.nvsm");
  CHECK(back == m);
  save_cnn(dir / "again.nvsm", back);
  CHECK(testutil::slurp(dir / "again.nvsm") == testutil::slurp(dir / "m.nvsm"));
  CHECK(testutil::slurp(dir / "m.nvsm").substr(0, 4) == "NVSM");
  CHECK_THROWS_AS(load_cnn(dir / "m.nvsm", 20, 20), DataError);
}

}  // TEST_SUITE
