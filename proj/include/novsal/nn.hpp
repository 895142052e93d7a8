#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "novsal/rng.hpp"

namespace novsal {

enum class LossKind { Mse, Ssim };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Minibatch training settings shared by the steering CNN and the autoencoder.
struct TrainConfig {
  std::size_t batch = 32;
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Mse;  // autoencoder only

  void validate() const;
};

/// Glorot-uniform fill: U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))).
template <class T>
void glorot_uniform(std::span<T> w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : w) v = static_cast<T>(rng.uniform(-limit, limit));
}

/// Adam over an ordered list of parameter tensors.
template <class T>
class Adam {
 public:
  struct Settings {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  explicit Adam(Settings s) : s_(s) {}

  void step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t_));
    const double step = s_.learning_rate * std::sqrt(bc2) / bc1;
    const double eps_hat = s_.epsilon * std::sqrt(bc2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      T* __restrict p = params[i].data();
      const T* __restrict g = grads[i].data();
      double* __restrict m = m_[i].data();
      double* __restrict v = v_[i].data();
      for (std::size_t k = 0; k < params[i].size(); ++k) {
        const double gk = static_cast<double>(g[k]);
        m[k] = s_.beta1 * m[k] + (1.0 - s_.beta1) * gk;
        v[k] = s_.beta2 * v[k] + (1.0 - s_.beta2) * gk * gk;
        p[k] = static_cast<T>(static_cast<double>(p[k]) - step * m[k] / (std::sqrt(v[k]) + eps_hat));
      }
    }
  }

  std::uint64_t steps() const noexcept { return t_; }

 private:
  Settings s_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

// "NVSM" weights file: magic, u32 version (1), u32 layer count, then per layer
// a u32 kind tag, its u32 dimension header, f32 weights and f32 biases. All
// little-endian.
struct LayerRecord {
  enum class Kind : std::uint32_t { Conv = 0, Dense = 1 };

  Kind kind = Kind::Dense;
  std::vector<std::uint32_t> dims;  // conv: in, out, kernel, stride; dense: in, out
  std::vector<float> weights;       // conv: [out][in][kh][kw]; dense: [out][in]
  std::vector<float> biases;

  std::size_t expected_weight_count() const;
  std::size_t expected_bias_count() const;
  bool operator==(const LayerRecord&) const = default;
};

void write_weights(const std::filesystem::path& path, const std::vector<LayerRecord>& layers);
std::vector<LayerRecord> read_weights(const std::filesystem::path& path);

/// Throws NumericalError naming `what` if any value is non-finite.
void require_finite(std::span<const double> values, const std::string& what);

}  // namespace novsal
