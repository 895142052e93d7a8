#pragma once

#include <cstdint>

#include "novsal/image.hpp"

namespace novsal {

enum class CorruptionKind { GaussianNoise, Brightness };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::GaussianNoise;
  double amount = 0.0;     // sigma for noise, delta for brightness
  std::uint64_t seed = 0;  // noise only
};

/// clamp(v + n, 0, 1) with n ~ N(0, sigma^2), drawn in row-major pixel order.
ImageBuf add_gaussian_noise(const ImageBuf& img, double sigma, std::uint64_t seed);

/// clamp(v + delta, 0, 1).
ImageBuf adjust_brightness(const ImageBuf& img, double delta);

ImageBuf apply_corruption(const ImageBuf& img, const CorruptionSpec& spec);

struct MatchedCorruption {
  ImageBuf image;
  double achieved_mse = 0.0;
  double parameter = 0.0;  // sigma or delta found by bisection
};

/// Bisection on sigma or delta over [0,1] (40 iterations) for a corruption whose
/// MSE against `img` is within 2% of `target_mse`. Throws DataError naming the
/// maximum achievable MSE when the target is out of reach.
MatchedCorruption match_mse(const ImageBuf& img, double target_mse, CorruptionKind kind,
                            std::uint64_t seed);

}  // namespace novsal
