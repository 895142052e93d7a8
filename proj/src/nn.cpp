#include "novsal/nn.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "novsal/error.hpp"

namespace novsal {

std::string to_string(LossKind kind) { return kind == LossKind::Mse ? "mse" : "ssim"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "mse" || text == "MSE") return LossKind::Mse;
  if (text == "ssim" || text == "SSIM") return LossKind::Ssim;
  throw UsageError("unknown loss kind '" + text + "' (expected mse or ssim)");
}

void TrainConfig::validate() const {
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be > 0");
}

std::size_t LayerRecord::expected_weight_count() const {
  if (kind == Kind::Conv) {
    if (dims.size() != 4) return 0;
    return std::size_t{dims[0]} * dims[1] * dims[2] * dims[2];
  }
  if (dims.size() != 2) return 0;
  return std::size_t{dims[0]} * dims[1];
}

std::size_t LayerRecord::expected_bias_count() const {
  if (kind == Kind::Conv) return dims.size() == 4 ? dims[1] : 0;
  return dims.size() == 2 ? dims[1] : 0;
}

namespace {

constexpr char kMagic[4] = {'N', 'V', 'S', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw DataError("truncated weights file: " + path.string());
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

float get_f32(std::istream& in, const std::filesystem::path& path) {
  return std::bit_cast<float>(get_u32(in, path));
}

}  // namespace

void write_weights(const std::filesystem::path& path, const std::vector<LayerRecord>& layers) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& layer : layers) {
    if (layer.weights.size() != layer.expected_weight_count() ||
        layer.biases.size() != layer.expected_bias_count()) {
      throw std::invalid_argument("write_weights: layer tensor sizes do not match its header");
    }
    put_u32(out, static_cast<std::uint32_t>(layer.kind));
    for (auto d : layer.dims) put_u32(out, d);
    for (float w : layer.weights) put_f32(out, w);
    for (float b : layer.biases) put_f32(out, b);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<LayerRecord> read_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open weights file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || !std::equal(magic, magic + 4, kMagic)) {
    throw DataError("not an NVSM weights file: " + path.string());
  }
  const std::uint32_t version = get_u32(in, path);
  if (version != kVersion) {
    throw DataError("unsupported NVSM version " + std::to_string(version) + ": " + path.string());
  }
  const std::uint32_t count = get_u32(in, path);
  std::vector<LayerRecord> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    LayerRecord layer;
    const std::uint32_t tag = get_u32(in, path);
    if (tag > 1) throw DataError("unknown layer kind tag " + std::to_string(tag));
    layer.kind = static_cast<LayerRecord::Kind>(tag);
    layer.dims.resize(layer.kind == LayerRecord::Kind::Conv ? 4 : 2);
    for (auto& d : layer.dims) d = get_u32(in, path);
    layer.weights.resize(layer.expected_weight_count());
    layer.biases.resize(layer.expected_bias_count());
    for (auto& w : layer.weights) w = get_f32(in, path);
    for (auto& b : layer.biases) b = get_f32(in, path);
    layers.push_back(std::move(layer));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("trailing bytes after last layer: " + path.string());
  }
  return layers;
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in " + what);
  }
}

}  // namespace novsal
