#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "novsal/detector.hpp"
#include "novsal/error.hpp"
#include "novsal/rng.hpp"

using namespace novsal;

namespace {

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

}  // namespace

TEST_SUITE("detector") {

TEST_CASE("empirical cdf") {
  const EmpiricalCdf cdf({3.0, 1.0, 2.0, 2.0});
  CHECK(cdf.sorted() == std::vector<double>{1, 2, 2, 3});
  CHECK(cdf.order_statistic(1) == 1.0);
  CHECK(cdf.order_statistic(4) == 3.0);
  CHECK(cdf(0.5) == 0.0);
  CHECK(cdf(2.0) == 0.75);
  CHECK(cdf(3.0) == 1.0);
  CHECK_THROWS_AS(cdf.order_statistic(0), std::out_of_range);
  CHECK_THROWS_AS(cdf.order_statistic(5), std::out_of_range);
  CHECK_THROWS_AS(EmpiricalCdf({}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalCdf({1.0, INFINITY}), std::invalid_argument);
}

TEST_CASE("99th percentile of 1..100 is 99") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  const auto t = fit_threshold(v, 0.99, Orientation::HighIsNovel);
  CHECK(t.cutoff == 99.0);
  CHECK(t.percentile == 0.99);
  CHECK(classify(100.0, t).novel);
  CHECK_FALSE(classify(99.0, t).novel);  // equal is not novel
  CHECK(flagged_fraction(v, t) == 0.01);
}

TEST_CASE("low-is-novel uses the mirrored rank") {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i / 100.0);
  const auto t = fit_threshold(v, 0.99, Orientation::LowIsNovel);
  CHECK(t.cutoff == 0.02);
  CHECK(classify(0.01, t).novel);
  CHECK_FALSE(classify(0.02, t).novel);
  CHECK(flagged_fraction(v, t) == 0.01);
}

TEST_CASE("ties and small calibration sets") {
  const std::vector<double> same(50, 0.3);
  for (auto o : {Orientation::HighIsNovel, Orientation::LowIsNovel}) {
    const auto t = fit_threshold(same, 0.99, o);
    CHECK(t.cutoff == 0.3);
    CHECK(flagged_fraction(same, t) == 0.0);
  }
  // N = 1: the only value is the cutoff.
  CHECK(fit_threshold({0.7}, 0.99, Orientation::HighIsNovel).cutoff == 0.7);
  CHECK(fit_threshold({0.7}, 0.99, Orientation::LowIsNovel).cutoff == 0.7);
  // ceil(0.5 * 3) = 2.
  CHECK(fit_threshold({5, 1, 3}, 0.5, Orientation::HighIsNovel).cutoff == 3.0);
  CHECK(fit_threshold({5, 1, 3}, 0.5, Orientation::LowIsNovel).cutoff == 3.0);
  CHECK_THROWS_AS(fit_threshold({1, 2}, 1.0, Orientation::HighIsNovel), std::invalid_argument);
  CHECK_THROWS_AS(fit_threshold({1, 2}, 0.0, Orientation::HighIsNovel), std::invalid_argument);
  CHECK_THROWS_AS(fit_threshold({}, 0.5, Orientation::HighIsNovel), std::invalid_argument);
  CHECK_THROWS_AS(classify(std::nan(""), NoveltyThreshold{}), std::invalid_argument);
}

TEST_CASE("calibration flag rate is at most 1 - p") {
  Rng rng(1);
  for (std::size_t n : {1u, 7u, 99u, 100u, 101u, 250u, 1600u}) {
    for (double p : {0.5, 0.9, 0.95, 0.99}) {
      auto v = random_scores(rng, n);
      for (auto o : {Orientation::HighIsNovel, Orientation::LowIsNovel}) {
        const auto t = fit_threshold(v, p, o);
        CHECK(flagged_fraction(v, t) <= 1.0 - p + 1e-12);
        // and no more than one extra value is left unflagged
        CHECK(flagged_fraction(v, t) >= 1.0 - p - 1.0 / double(n) - 1e-12);
      }
    }
  }
}

TEST_CASE("raising the percentile never flags more") {
  Rng rng(2);
  const auto v = random_scores(rng, 300);
  const auto probe = random_scores(rng, 500);
  double prev_high = 1.0, prev_low = 1.0;
  for (double p = 0.5; p < 0.999; p += 0.01) {
    const double fh = flagged_fraction(probe, fit_threshold(v, p, Orientation::HighIsNovel));
    const double fl = flagged_fraction(probe, fit_threshold(v, p, Orientation::LowIsNovel));
    CHECK(fh <= prev_high);
    CHECK(fl <= prev_low);
    prev_high = fh;
    prev_low = fl;
  }
}

TEST_CASE("orientations are dual under negation") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = random_scores(rng, 1 + rng.below(400));
    std::vector<double> neg(v.size());
    std::transform(v.begin(), v.end(), neg.begin(), [](double x) { return -x; });
    const double p = rng.uniform(0.5, 0.999);
    const auto high = fit_threshold(v, p, Orientation::HighIsNovel);
    const auto low = fit_threshold(neg, p, Orientation::LowIsNovel);
    CHECK(low.cutoff == -high.cutoff);
    for (std::size_t k = 0; k < v.size(); ++k) CHECK(classify(v[k], high).novel == classify(neg[k], low).novel);
  }
}

TEST_CASE("threshold record round trip") {
  testutil::TempDir dir("threshold");
  const NoveltyThreshold t{0.123456789012345678, Orientation::LowIsNovel, 0.99};
  write_threshold(dir / "t.txt", t);
  CHECK(read_threshold(dir / "t.txt") == t);
  const NoveltyThreshold h{1e-7, Orientation::HighIsNovel, 0.95};
  write_threshold(dir / "h.txt", h);
  CHECK(read_threshold(dir / "h.txt") == h);

  CHECK(parse_orientation(to_string(Orientation::HighIsNovel)) == Orientation::HighIsNovel);
  CHECK(parse_orientation(to_string(Orientation::LowIsNovel)) == Orientation::LowIsNovel);
  CHECK_THROWS_AS(parse_orientation("sideways"), DataError);

  std::ofstream(dir / "short.txt") << "high_is_novel\n0.99\n";
  CHECK_THROWS_AS(read_threshold(dir / "short.txt"), DataError);
  std::ofstream(dir / "junk.txt") << to_string(Orientation::HighIsNovel) << "\n0.99\nabc\n";
  CHECK_THROWS_AS(read_threshold(dir / "junk.txt"), DataError);
  CHECK_THROWS_AS(read_threshold(dir / "none.txt"), DataError);
}

}  // TEST_SUITE
