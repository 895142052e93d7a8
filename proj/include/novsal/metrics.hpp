#pragma once

#include <cstddef>
#include <vector>

#include "novsal/image.hpp"

namespace novsal {

/// Window geometry and stabilizers for SSIM. Defaults use dynamic range L = 1:
/// c1 = (0.01 L)^2, c2 = (0.03 L)^2.
struct SsimParams {
  std::size_t window = 11;
  double c1 = 1e-4;
  double c2 = 9e-4;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  bool unit_exponents() const noexcept { return alpha == 1.0 && beta == 1.0 && gamma == 1.0; }
  void validate() const;
};

/// First and second moments over one aligned window pair (population estimates).
struct WindowStats {
  double mu_x = 0.0;
  double mu_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double cov_xy = 0.0;
};

/// Luminance, contrast and structure terms.
struct SsimComponents {
  double luminance = 1.0;
  double contrast = 1.0;
  double structure = 1.0;
};

struct SsimMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> scores;  // row-major, one per window position
};

/// Pixel-wise mean squared error.
double mse(const ImageBuf& x, const ImageBuf& y);

/// d mse / d y, row-major.
std::vector<double> mse_grad_wrt_y(const ImageBuf& x, const ImageBuf& y);

/// Statistics of the window whose top-left corner is (top, left), computed directly.
WindowStats window_stats(const ImageBuf& x, const ImageBuf& y, std::size_t top, std::size_t left,
                         std::size_t window);

// The structure term uses c3 = c2/2 so that I*C*S collapses to the single
// fraction computed by ssim_reduced when all exponents are 1.
SsimComponents ssim_components(const WindowStats& stats, const SsimParams& params);

/// I^alpha * C^beta * S^gamma.
double ssim_combine(const SsimComponents& comp, const SsimParams& params);

/// (2 mx my + c1)(2 sxy + c2) / ((mx^2 + my^2 + c1)(sx^2 + sy^2 + c2)).
double ssim_reduced(const WindowStats& stats, const SsimParams& params);

/// Stride-1, valid, uniformly weighted sliding windows.
SsimMap ssim_map(const ImageBuf& x, const ImageBuf& y, const SsimParams& params = {});

/// Mean of ssim_map scores.
double ssim_mean(const ImageBuf& x, const ImageBuf& y, const SsimParams& params = {});

/// Analytic gradient of ssim_mean(x, y) with respect to every pixel of y.
/// Requires unit exponents.
std::vector<double> ssim_grad_wrt_y(const ImageBuf& x, const ImageBuf& y,
                                    const SsimParams& params = {});

/// ssim_mean and its gradient in one pass.
double ssim_mean_and_grad(const ImageBuf& x, const ImageBuf& y, const SsimParams& params,
                          std::vector<double>& grad);

}  // namespace novsal
