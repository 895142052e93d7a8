#include "novsal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace novsal {

void SsimParams::validate() const {
  if (window < 3 || window % 2 == 0) {
    throw std::invalid_argument("SsimParams: window must be odd and >= 3");
  }
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("SsimParams: c1, c2 must be > 0");
}

namespace {

void require_same_dims(const ImageBuf& x, const ImageBuf& y, const char* who) {
  if (!x.same_dims(y)) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch (" +
                                std::to_string(x.height()) + "x" + std::to_string(x.width()) +
                                " vs " + std::to_string(y.height()) + "x" +
                                std::to_string(y.width()) + ")");
  }
}

void require_window_fits(const ImageBuf& x, const ImageBuf& y, const SsimParams& params,
                         const char* who) {
  params.validate();
  require_same_dims(x, y, who);
  if (x.height() < params.window || x.width() < params.window) {
    throw std::invalid_argument(std::string(who) + ": image smaller than the " +
                                std::to_string(params.window) + "px window");
  }
}

// Per-window sums of x, y, x^2, y^2 and xy via separable running box sums of width `w`.
struct WindowSums {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> sx, sy, sxx, syy, sxy;
};

// Valid box sum along one line: out[i] = in[i] + ... + in[i+w-1].
void box_line(const double* in, std::size_t len, std::size_t stride, std::size_t w, double* out,
              std::size_t out_stride) {
  double acc = 0.0;
  for (std::size_t k = 0; k < w; ++k) acc += in[k * stride];
  out[0] = acc;
  for (std::size_t i = 1; i + w <= len; ++i) {
    acc += in[(i + w - 1) * stride] - in[(i - 1) * stride];
    out[i * out_stride] = acc;
  }
}

// Transpose of box_line: out[j] = sum of in[i] over every window i covering j.
void scatter_line(const double* in, std::size_t n_in, std::size_t stride, std::size_t w,
                  double* out, std::size_t out_stride) {
  const std::size_t len = n_in + w - 1;
  double acc = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    if (j < n_in) acc += in[j * stride];
    if (j >= w) acc -= in[(j - w) * stride];
    out[j * out_stride] = acc;
  }
}

void box_valid(const std::vector<double>& img, std::size_t h, std::size_t wd, std::size_t w,
               std::vector<double>& tmp, std::vector<double>& out) {
  const std::size_t rows = h - w + 1, cols = wd - w + 1;
  tmp.resize(h * cols);
  for (std::size_t r = 0; r < h; ++r) box_line(img.data() + r * wd, wd, 1, w, tmp.data() + r * cols, 1);
  out.resize(rows * cols);
  for (std::size_t c = 0; c < cols; ++c) box_line(tmp.data() + c, h, cols, w, out.data() + c, cols);
}

WindowSums window_sums(const ImageBuf& x, const ImageBuf& y, std::size_t w) {
  const std::size_t h = x.height(), wd = x.width();
  WindowSums s;
  s.rows = h - w + 1;
  s.cols = wd - w + 1;
  std::vector<double> tmp, prod(x.size());
  box_valid(x.data(), h, wd, w, tmp, s.sx);
  box_valid(y.data(), h, wd, w, tmp, s.sy);
  for (std::size_t k = 0; k < x.size(); ++k) prod[k] = x[k] * x[k];
  box_valid(prod, h, wd, w, tmp, s.sxx);
  for (std::size_t k = 0; k < x.size(); ++k) prod[k] = y[k] * y[k];
  box_valid(prod, h, wd, w, tmp, s.syy);
  for (std::size_t k = 0; k < x.size(); ++k) prod[k] = x[k] * y[k];
  box_valid(prod, h, wd, w, tmp, s.sxy);
  return s;
}

WindowStats stats_at(const WindowSums& s, std::size_t i, double inv_n) {
  WindowStats st;
  st.mu_x = s.sx[i] * inv_n;
  st.mu_y = s.sy[i] * inv_n;
  st.var_x = s.sxx[i] * inv_n - st.mu_x * st.mu_x;
  st.var_y = s.syy[i] * inv_n - st.mu_y * st.mu_y;
  st.cov_xy = s.sxy[i] * inv_n - st.mu_x * st.mu_y;
  return st;
}

// Sum of a window-grid map over all windows covering each pixel (transpose of
// the valid box filter).
std::vector<double> scatter_windows(const std::vector<double>& m, std::size_t rows,
                                    std::size_t cols, std::size_t w, std::size_t h,
                                    std::size_t wd) {
  std::vector<double> v(h * cols);
  for (std::size_t c = 0; c < cols; ++c) scatter_line(m.data() + c, rows, cols, w, v.data() + c, cols);
  std::vector<double> out(h * wd);
  for (std::size_t r = 0; r < h; ++r) scatter_line(v.data() + r * cols, cols, 1, w, out.data() + r * wd, 1);
  return out;
}

}  // namespace

double mse(const ImageBuf& x, const ImageBuf& y) {
  require_same_dims(x, y, "mse");
  if (x.empty()) throw std::invalid_argument("mse: empty images");
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

std::vector<double> mse_grad_wrt_y(const ImageBuf& x, const ImageBuf& y) {
  require_same_dims(x, y, "mse_grad_wrt_y");
  std::vector<double> g(x.size());
  const double scale = 2.0 / static_cast<double>(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) g[k] = scale * (y[k] - x[k]);
  return g;
}

WindowStats window_stats(const ImageBuf& x, const ImageBuf& y, std::size_t top, std::size_t left,
                         std::size_t window) {
  require_same_dims(x, y, "window_stats");
  if (top + window > x.height() || left + window > x.width()) {
    throw std::invalid_argument("window_stats: window exceeds image bounds");
  }
  const double n = static_cast<double>(window * window);
  WindowStats st;
  for (std::size_t r = top; r < top + window; ++r) {
    for (std::size_t c = left; c < left + window; ++c) {
      st.mu_x += x.at(r, c);
      st.mu_y += y.at(r, c);
    }
  }
  st.mu_x /= n;
  st.mu_y /= n;
  for (std::size_t r = top; r < top + window; ++r) {
    for (std::size_t c = left; c < left + window; ++c) {
      const double dx = x.at(r, c) - st.mu_x, dy = y.at(r, c) - st.mu_y;
      st.var_x += dx * dx;
      st.var_y += dy * dy;
      st.cov_xy += dx * dy;
    }
  }
  st.var_x /= n;
  st.var_y /= n;
  st.cov_xy /= n;
  return st;
}

SsimComponents ssim_components(const WindowStats& st, const SsimParams& params) {
  const double sd_x = std::sqrt(std::max(st.var_x, 0.0));
  const double sd_y = std::sqrt(std::max(st.var_y, 0.0));
  const double c3 = params.c2 / 2.0;
  SsimComponents comp;
  comp.luminance = (2.0 * st.mu_x * st.mu_y + params.c1) /
                   (st.mu_x * st.mu_x + st.mu_y * st.mu_y + params.c1);
  comp.contrast = (2.0 * sd_x * sd_y + params.c2) / (st.var_x + st.var_y + params.c2);
  comp.structure = (st.cov_xy + c3) / (sd_x * sd_y + c3);
  return comp;
}

double ssim_combine(const SsimComponents& comp, const SsimParams& params) {
  if (params.unit_exponents()) return comp.luminance * comp.contrast * comp.structure;
  return std::pow(comp.luminance, params.alpha) * std::pow(comp.contrast, params.beta) *
         std::pow(comp.structure, params.gamma);
}

double ssim_reduced(const WindowStats& st, const SsimParams& params) {
  const double num = (2.0 * st.mu_x * st.mu_y + params.c1) * (2.0 * st.cov_xy + params.c2);
  const double den = (st.mu_x * st.mu_x + st.mu_y * st.mu_y + params.c1) *
                     (st.var_x + st.var_y + params.c2);
  return num / den;
}

SsimMap ssim_map(const ImageBuf& x, const ImageBuf& y, const SsimParams& params) {
  require_window_fits(x, y, params, "ssim_map");
  const WindowSums sums = window_sums(x, y, params.window);
  const double inv_n = 1.0 / static_cast<double>(params.window * params.window);
  SsimMap map{sums.rows, sums.cols, std::vector<double>(sums.rows * sums.cols)};
  const bool unit = params.unit_exponents();
  for (std::size_t i = 0; i < map.scores.size(); ++i) {
    const WindowStats st = stats_at(sums, i, inv_n);
    map.scores[i] =
        unit ? ssim_reduced(st, params) : ssim_combine(ssim_components(st, params), params);
  }
  return map;
}

double ssim_mean(const ImageBuf& x, const ImageBuf& y, const SsimParams& params) {
  const SsimMap map = ssim_map(x, y, params);
  return std::accumulate(map.scores.begin(), map.scores.end(), 0.0) /
         static_cast<double>(map.scores.size());
}

double ssim_mean_and_grad(const ImageBuf& x, const ImageBuf& y, const SsimParams& params,
                          std::vector<double>& grad) {
  require_window_fits(x, y, params, "ssim_grad_wrt_y");
  if (!params.unit_exponents()) {
    throw std::invalid_argument("ssim_grad_wrt_y: only alpha = beta = gamma = 1 is supported");
  }
  const WindowSums sums = window_sums(x, y, params.window);
  const std::size_t n_windows = sums.rows * sums.cols;
  const double inv_n = 1.0 / static_cast<double>(params.window * params.window);

  // Each window contributes (a + b*y_k + g*x_k) / n to d score / d y_k.
  std::vector<double> coef_a(n_windows), coef_b(n_windows), coef_g(n_windows);
  double total = 0.0;
  for (std::size_t i = 0; i < n_windows; ++i) {
    const WindowStats st = stats_at(sums, i, inv_n);
    const double a1 = 2.0 * st.mu_x * st.mu_y + params.c1;
    const double a2 = 2.0 * st.cov_xy + params.c2;
    const double b1 = st.mu_x * st.mu_x + st.mu_y * st.mu_y + params.c1;
    const double b2 = st.var_x + st.var_y + params.c2;
    const double s = a1 * a2 / (b1 * b2);
    total += s;

    const double d_mu = 2.0 * st.mu_x * a2 / (b1 * b2) - 2.0 * st.mu_y * s / b1;
    const double d_var = -s / b2;
    const double d_cov = 2.0 * a1 / (b1 * b2);
    coef_a[i] = d_mu - 2.0 * st.mu_y * d_var - st.mu_x * d_cov;
    coef_b[i] = 2.0 * d_var;
    coef_g[i] = d_cov;
  }

  const std::size_t h = x.height(), wd = x.width();
  const auto sa = scatter_windows(coef_a, sums.rows, sums.cols, params.window, h, wd);
  const auto sb = scatter_windows(coef_b, sums.rows, sums.cols, params.window, h, wd);
  const auto sg = scatter_windows(coef_g, sums.rows, sums.cols, params.window, h, wd);

  const double scale = inv_n / static_cast<double>(n_windows);
  grad.resize(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    grad[k] = scale * (sa[k] + sb[k] * y[k] + sg[k] * x[k]);
  }
  return total / static_cast<double>(n_windows);
}

std::vector<double> ssim_grad_wrt_y(const ImageBuf& x, const ImageBuf& y,
                                    const SsimParams& params) {
  std::vector<double> grad;
  ssim_mean_and_grad(x, y, params, grad);
  return grad;
}

}  // namespace novsal
