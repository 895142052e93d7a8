#include "novsal/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "novsal/error.hpp"
#include "novsal/metrics.hpp"
#include "novsal/rng.hpp"

namespace novsal {

ImageBuf add_gaussian_noise(const ImageBuf& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  ImageBuf out = img;
  if (sigma == 0.0) return out;
  Rng rng(seed);
  for (auto& v : out.data()) v = std::clamp(v + sigma * rng.normal(), 0.0, 1.0);
  return out;
}

ImageBuf adjust_brightness(const ImageBuf& img, double delta) {
  if (!(std::abs(delta) <= 1.0)) throw std::invalid_argument("adjust_brightness: |delta| must be <= 1");
  ImageBuf out = img;
  for (auto& v : out.data()) v = std::clamp(v + delta, 0.0, 1.0);
  return out;
}

ImageBuf apply_corruption(const ImageBuf& img, const CorruptionSpec& spec) {
  return spec.kind == CorruptionKind::GaussianNoise ? add_gaussian_noise(img, spec.amount, spec.seed)
                                                    : adjust_brightness(img, spec.amount);
}

MatchedCorruption match_mse(const ImageBuf& img, double target_mse, CorruptionKind kind,
                            std::uint64_t seed) {
  if (!(target_mse >= 0.0) || !std::isfinite(target_mse)) {
    throw std::invalid_argument("match_mse: target must be finite and >= 0");
  }
  const auto probe = [&](double p) {
    MatchedCorruption m;
    m.parameter = p;
    m.image = apply_corruption(img, {kind, p, seed});
    m.achieved_mse = mse(img, m.image);
    return m;
  };

  if (target_mse == 0.0) return probe(0.0);

  MatchedCorruption hi = probe(1.0);
  if (hi.achieved_mse < target_mse * 0.98) {
    throw DataError("match_mse: target " + std::to_string(target_mse) +
                    " exceeds the maximum achievable MSE " + std::to_string(hi.achieved_mse));
  }
  double lo_p = 0.0, hi_p = 1.0;
  MatchedCorruption best = hi;
  for (int iter = 0; iter < 40; ++iter) {
    const double mid = 0.5 * (lo_p + hi_p);
    MatchedCorruption m = probe(mid);
    if (std::abs(m.achieved_mse - target_mse) < std::abs(best.achieved_mse - target_mse)) {
      best = m;
    }
    if (m.achieved_mse < target_mse) {
      lo_p = mid;
    } else {
      hi_p = mid;
    }
  }
  if (std::abs(best.achieved_mse - target_mse) > 0.02 * target_mse) {
    throw DataError("match_mse: bisection settled at MSE " + std::to_string(best.achieved_mse) +
                    ", outside 2% of target " + std::to_string(target_mse));
  }
  return best;
}

}  // namespace novsal
