#include "novsal/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "novsal/error.hpp"

namespace novsal {

std::string to_string(Orientation o) {
  return o == Orientation::HighIsNovel ? "high-is-novel" : "low-is-novel";
}

Orientation parse_orientation(const std::string& text) {
  if (text == "high-is-novel") return Orientation::HighIsNovel;
  if (text == "low-is-novel") return Orientation::LowIsNovel;
  throw DataError("unknown orientation '" + text + "'");
}

EmpiricalCdf::EmpiricalCdf(std::vector<double> values) : sorted_(std::move(values)) {
  if (sorted_.empty()) throw std::invalid_argument("EmpiricalCdf: no values");
  for (double v : sorted_) {
    if (!std::isfinite(v)) throw std::invalid_argument("EmpiricalCdf: non-finite value");
  }
  std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::order_statistic(std::size_t rank) const {
  if (rank < 1 || rank > sorted_.size()) throw std::out_of_range("EmpiricalCdf: rank out of range");
  return sorted_[rank - 1];
}

double EmpiricalCdf::operator()(double v) const {
  const auto it = std::upper_bound(sorted_.begin(), sorted_.end(), v);
  return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

NoveltyThreshold fit_threshold(const std::vector<double>& scores, double percentile,
                               Orientation orientation) {
  if (!(percentile > 0.0 && percentile < 1.0)) {
    throw std::invalid_argument("fit_threshold: percentile must be in (0,1)");
  }
  const EmpiricalCdf cdf(scores);
  const std::size_t n = cdf.size();
  // Guard against p*N landing a hair above an integer through rounding.
  const double scaled = percentile * static_cast<double>(n);
  auto rank = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  NoveltyThreshold t;
  t.orientation = orientation;
  t.percentile = percentile;
  t.cutoff = orientation == Orientation::HighIsNovel ? cdf.order_statistic(rank)
                                                     : cdf.order_statistic(n + 1 - rank);
  return t;
}

NoveltyVerdict classify(double score, const NoveltyThreshold& t) {
  if (!std::isfinite(score)) throw std::invalid_argument("classify: non-finite score");
  const bool novel =
      t.orientation == Orientation::HighIsNovel ? score > t.cutoff : score < t.cutoff;
  return {score, novel, t};
}

double flagged_fraction(const std::vector<double>& scores, const NoveltyThreshold& t) {
  if (scores.empty()) return 0.0;
  std::size_t flagged = 0;
  for (double s : scores) flagged += classify(s, t).novel ? 1 : 0;
  return static_cast<double>(flagged) / static_cast<double>(scores.size());
}

void write_threshold(const std::filesystem::path& path, const NoveltyThreshold& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  char buf[64];
  out << to_string(t.orientation) << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", t.percentile);
  out << buf << '\n';
  std::snprintf(buf, sizeof buf, "%.17g", t.cutoff);
  out << buf << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

NoveltyThreshold read_threshold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open threshold record: " + path.string());
  std::string orientation, percentile, cutoff;
  if (!std::getline(in, orientation) || !std::getline(in, percentile) || !std::getline(in, cutoff)) {
    throw DataError("threshold record must have three lines: " + path.string());
  }
  NoveltyThreshold t;
  t.orientation = parse_orientation(orientation);
  try {
    t.percentile = std::stod(percentile);
    t.cutoff = std::stod(cutoff);
  } catch (const std::logic_error&) {
    throw DataError("malformed number in threshold record: " + path.string());
  }
  if (!(t.percentile > 0.0 && t.percentile < 1.0) || !std::isfinite(t.cutoff)) {
    throw DataError("threshold record out of range: " + path.string());
  }
  return t;
}

}  // namespace novsal
