#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace novsal {

/// Which tail of the score distribution counts as novel.
enum class Orientation {
  HighIsNovel,  // losses such as MSE
  LowIsNovel,   // similarities such as SSIM
};

std::string to_string(Orientation o);
Orientation parse_orientation(const std::string& text);

/// Sorted calibration scores.
class EmpiricalCdf {
 public:
  explicit EmpiricalCdf(std::vector<double> values);

  std::size_t size() const noexcept { return sorted_.size(); }
  const std::vector<double>& sorted() const noexcept { return sorted_; }
  /// 1-indexed ascending order statistic.
  double order_statistic(std::size_t rank) const;
  /// Fraction of calibration values <= v.
  double operator()(double v) const;

 private:
  std::vector<double> sorted_;
};

struct NoveltyThreshold {
  double cutoff = 0.0;
  Orientation orientation = Orientation::HighIsNovel;
  double percentile = 0.99;

  bool operator==(const NoveltyThreshold&) const = default;
};

struct NoveltyVerdict {
  double score = 0.0;
  bool novel = false;
  NoveltyThreshold threshold;
};

/// Order statistic at rank ceil(p N) for high-is-novel and at rank
/// N + 1 - ceil(p N) for low-is-novel, so both flag the same fraction.
NoveltyThreshold fit_threshold(const std::vector<double>& scores, double percentile,
                               Orientation orientation);

/// Strict comparison: a score equal to the cutoff is not novel.
NoveltyVerdict classify(double score, const NoveltyThreshold& t);

/// Fraction of `scores` classified novel.
double flagged_fraction(const std::vector<double>& scores, const NoveltyThreshold& t);

/// Three lines: orientation, percentile, cutoff.
void write_threshold(const std::filesystem::path& path, const NoveltyThreshold& t);
NoveltyThreshold read_threshold(const std::filesystem::path& path);

}  // namespace novsal
