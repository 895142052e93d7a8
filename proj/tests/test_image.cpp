#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "novsal/error.hpp"
#include "novsal/image.hpp"

using namespace novsal;
using testutil::random_image;
using testutil::TempDir;

namespace {

RgbImage solid_rgb(std::size_t h, std::size_t w, double r, double g, double b) {
  RgbImage img{h, w, {}};
  for (std::size_t k = 0; k < h * w; ++k) {
    img.data.push_back(r);
    img.data.push_back(g);
    img.data.push_back(b);
  }
  return img;
}

DatasetManifest numbered_manifest(std::size_t n) {
  DatasetManifest m;
  for (std::size_t i = 0; i < n; ++i) m.records.push_back({"img" + std::to_string(i) + ".pgm", 0.01 * double(i)});
  return m;
}

}  // namespace

TEST_SUITE("image") {

TEST_CASE("grayscale of solid colors") {
  const auto black = to_grayscale(solid_rgb(3, 4, 0, 0, 0));
  const auto white = to_grayscale(solid_rgb(3, 4, 1, 1, 1));
  const auto red = to_grayscale(solid_rgb(3, 4, 1, 0, 0));
  CHECK(black.height() == 3);
  CHECK(black.width() == 4);
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(black[k] == 0.0);
    CHECK(white[k] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(red[k] == doctest::Approx(0.299).epsilon(1e-15));
  }
}

TEST_CASE("grayscale stays between channel min and max") {
  Rng rng(3);
  RgbImage img{8, 9, {}};
  for (std::size_t k = 0; k < 3 * 72; ++k) img.data.push_back(rng.uniform());
  const auto g = to_grayscale(img);
  for (std::size_t k = 0; k < 72; ++k) {
    const double* px = &img.data[3 * k];
    CHECK(g[k] >= std::min({px[0], px[1], px[2]}) - 1e-15);
    CHECK(g[k] <= std::max({px[0], px[1], px[2]}) + 1e-15);
  }
}

TEST_CASE("bilinear resize") {
  SUBCASE("constant stays constant") {
    const ImageBuf c(5, 7, 0.37);
    for (auto [h, w] : {std::pair{1, 1}, {3, 11}, {9, 2}, {60, 160}}) {
      const auto r = resize_bilinear(c, h, w);
      REQUIRE(r.height() == std::size_t(h));
      REQUIRE(r.width() == std::size_t(w));
      for (std::size_t k = 0; k < r.size(); ++k) CHECK(r[k] == doctest::Approx(0.37).epsilon(1e-15));
    }
  }
  SUBCASE("identity is bit exact") {
    const auto img = random_image(6, 9, 1);
    CHECK(resize_bilinear(img, 6, 9) == img);
  }
  SUBCASE("2x2 to 2x3 midpoint") {
    const ImageBuf img(2, 2, std::vector<double>{0, 1, 0, 1});
    const auto r = resize_bilinear(img, 2, 3);
    CHECK(r.at(0, 1) == doctest::Approx(0.5));
    CHECK(r.at(1, 1) == doctest::Approx(0.5));
    CHECK(r.at(0, 0) == 0.0);
    CHECK(r.at(0, 2) == 1.0);
  }
  SUBCASE("output within input range") {
    const auto img = random_image(7, 5, 2, 0.2, 0.6);
    const auto r = resize_bilinear(img, 23, 17);
    const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    for (double v : r.data()) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
    }
  }
  SUBCASE("matches a hand-coded corner-aligned sampler") {
    const auto img = random_image(4, 6, 9);
    const std::size_t oh = 7, ow = 3;
    const auto r = resize_bilinear(img, oh, ow);
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double sy = double(i) * 3.0 / 6.0, sx = double(j) * 5.0 / 2.0;
        const auto y0 = std::size_t(std::floor(sy)), x0 = std::size_t(std::floor(sx));
        const std::size_t y1 = std::min<std::size_t>(y0 + 1, 3), x1 = std::min<std::size_t>(x0 + 1, 5);
        const double fy = sy - double(y0), fx = sx - double(x0);
        const double top = img.at(y0, x0) * (1 - fx) + img.at(y0, x1) * fx;
        const double bot = img.at(y1, x0) * (1 - fx) + img.at(y1, x1) * fx;
        CHECK(r.at(i, j) == doctest::Approx(top * (1 - fy) + bot * fy).epsilon(1e-12));
      }
    }
  }
  SUBCASE("zero dimensions rejected") {
    CHECK_THROWS_AS(resize_bilinear(ImageBuf(), 2, 2), std::invalid_argument);
    CHECK_THROWS_AS(resize_bilinear(ImageBuf(2, 2), 0, 2), std::invalid_argument);
  }
}

TEST_CASE("intensity encoding") {
  CHECK(encode_intensity(0.0) == 0);
  CHECK(encode_intensity(1.0) == 255);
  CHECK(encode_intensity(0.5) == 128);  // floor(127.5 + 0.5)
  CHECK(encode_intensity(0.3) == 77);   // floor(76.5 + 0.5)
  for (int b = 0; b < 256; ++b) CHECK(encode_intensity(decode_intensity(std::uint8_t(b))) == b);
}

TEST_CASE("PGM and PPM round trips") {
  TempDir dir("pgm");
  ImageBuf img(3, 5);
  for (std::size_t k = 0; k < img.size(); ++k) img[k] = double(k * 17 % 256) / 255.0;
  write_pgm(dir / "a.pgm", img);
  const auto back = read_pgm(dir / "a.pgm");
  CHECK(back == img);
  const std::string bytes = testutil::slurp(dir / "a.pgm");
  CHECK(bytes.rfind("P5\n5 3\n255\n", 0) == 0);
  CHECK(bytes.size() == 11 + 15);
  write_pgm(dir / "b.pgm", back);
  CHECK(testutil::slurp(dir / "b.pgm") == bytes);

  RgbImage rgb{2, 3, {}};
  for (std::size_t k = 0; k < 18; ++k) rgb.data.push_back(double(k * 13) / 255.0);
  write_ppm(dir / "c.ppm", rgb);
  const auto rgb_back = read_ppm(dir / "c.ppm");
  CHECK(rgb_back.height == 2);
  CHECK(rgb_back.width == 3);
  CHECK(rgb_back.data == rgb.data);
  CHECK(read_gray_image(dir / "c.ppm") == to_grayscale(rgb));
}

TEST_CASE("malformed images are data errors") {
  TempDir dir("badpgm");
  std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n255\nabc";
  std::ofstream(dir / "magic.pgm", std::ios::binary) << "P2\n1 1\n255\n7";
  CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), DataError);
  CHECK_THROWS_AS(read_pgm(dir / "magic.pgm"), DataError);
  CHECK_THROWS_AS(read_pgm(dir / "missing.pgm"), DataError);
}

TEST_CASE("manifest round trip and validation") {
  TempDir dir("manifest");
  DatasetManifest m;
  m.records = {{"a.pgm", 0.1}, {"sub/b,c.pgm", -0.30000000000000004}, {"d.pgm", 1e-300}};
  write_manifest(dir / "m.csv", m);
  const auto back = read_manifest(dir / "m.csv");
  CHECK(back.records == m.records);
  CHECK(back.base_dir == dir.path());
  CHECK(testutil::slurp(dir / "m.csv").rfind("path,angle_rad\n", 0) == 0);

  DatasetManifest dup;
  dup.records = {{"a.pgm", 0.0}, {"a.pgm", 0.1}};
  CHECK_THROWS_AS(validate_manifest(dup), DataError);
  DatasetManifest nan;
  nan.records = {{"a.pgm", std::nan("")}};
  CHECK_THROWS_AS(validate_manifest(nan), DataError);
  DatasetManifest empty_path;
  empty_path.records = {{"", 0.0}};
  CHECK_THROWS_AS(validate_manifest(empty_path), DataError);
}

TEST_CASE("split sizes and partition") {
  CHECK(split_dataset(numbered_manifest(10), {0.8, 1}).first.size() == 8);
  CHECK(split_dataset(numbered_manifest(10), {0.8, 1}).second.size() == 2);
  CHECK(split_dataset(numbered_manifest(5), {0.8, 1}).first.size() == 4);
  CHECK(split_dataset(numbered_manifest(5), {0.8, 1}).second.size() == 1);

  const auto m = numbered_manifest(97);
  const auto [train, test] = split_dataset(m, {0.8, 42});
  const auto [train2, test2] = split_dataset(m, {0.8, 42});
  CHECK(train.records == train2.records);
  CHECK(test.records == test2.records);
  std::set<std::string> seen;
  for (const auto& r : train.records) seen.insert(r.path);
  for (const auto& r : test.records) seen.insert(r.path);
  CHECK(seen.size() == 97);
  CHECK(train.size() + test.size() == 97);
  CHECK(split_dataset(m, {0.8, 43}).first.records != train.records);

  CHECK_THROWS_AS(split_dataset(DatasetManifest{}, {0.8, 1}), std::invalid_argument);
  CHECK_THROWS_AS(split_dataset(m, {1.0, 1}), std::invalid_argument);
}

TEST_CASE("minibatches") {
  const auto sizes = [](std::size_t n, std::size_t b) {
    std::vector<std::size_t> s;
    for (const auto& batch : epoch_batches(n, b, 5, 0)) s.push_back(batch.size());
    return s;
  };
  CHECK(sizes(100, 32) == std::vector<std::size_t>{32, 32, 32, 4});
  CHECK(sizes(32, 32) == std::vector<std::size_t>{32});
  CHECK(epoch_batches(50, 8, 1, 3) == epoch_batches(50, 8, 1, 3));
  CHECK(epoch_batches(50, 8, 1, 3) != epoch_batches(50, 8, 1, 4));

  std::vector<ImageBuf> imgs;
  for (int i = 0; i < 10; ++i) imgs.emplace_back(1, 1, i / 10.0);
  const auto batches = minibatches(imgs, 4, 9, 0);
  REQUIRE(batches.size() == 3);
  std::multiset<double> values;
  for (const auto& b : batches) {
    for (const auto& img : b) values.insert(img[0]);
  }
  CHECK(values.size() == 10);
  CHECK(std::set<double>(values.begin(), values.end()).size() == 10);
  CHECK_THROWS_AS(epoch_batches(10, 0, 1, 0), std::invalid_argument);
}

}  // TEST_SUITE
