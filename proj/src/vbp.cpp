#include "novsal/vbp.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace novsal {

ImageBuf channel_mean(const FeatureMaps& maps) {
  if (maps.channels == 0) throw std::invalid_argument("channel_mean: no channels");
  ImageBuf out(maps.height, maps.width);
  const std::size_t plane = maps.height * maps.width;
  for (std::size_t ch = 0; ch < maps.channels; ++ch) {
    for (std::size_t k = 0; k < plane; ++k) out[k] += maps.data[ch * plane + k];
  }
  const double inv = 1.0 / static_cast<double>(maps.channels);
  for (auto& v : out.data()) v *= inv;
  return out;
}

ImageBuf ones_deconv(const ImageBuf& m, std::size_t kernel, std::size_t stride,
                     std::size_t target_h, std::size_t target_w) {
  const std::size_t full_h = (m.height() - 1) * stride + kernel;
  const std::size_t full_w = (m.width() - 1) * stride + kernel;
  ImageBuf full(full_h, full_w);
  for (std::size_t r = 0; r < m.height(); ++r) {
    for (std::size_t c = 0; c < m.width(); ++c) {
      const double v = m.at(r, c);
      for (std::size_t ky = 0; ky < kernel; ++ky) {
        for (std::size_t kx = 0; kx < kernel; ++kx) full.at(r * stride + ky, c * stride + kx) += v;
      }
    }
  }
  if (full_h == target_h && full_w == target_w) return full;

  const std::size_t crop_top = full_h > target_h ? (full_h - target_h) / 2 : 0;
  const std::size_t crop_left = full_w > target_w ? (full_w - target_w) / 2 : 0;
  ImageBuf out(target_h, target_w);
  for (std::size_t r = 0; r < target_h && r + crop_top < full_h; ++r) {
    for (std::size_t c = 0; c < target_w && c + crop_left < full_w; ++c) {
      out.at(r, c) = full.at(r + crop_top, c + crop_left);
    }
  }
  return out;
}

ImageBuf vbp_raw(const ForwardTrace& trace, const CnnModel& model) {
  const auto& layers = model.conv();
  if (layers.empty()) throw std::invalid_argument("vbp: model has no conv layers");
  if (trace.conv_maps.size() != layers.size() || trace.input_height != model.input_height() ||
      trace.input_width != model.input_width()) {
    throw std::invalid_argument("vbp: trace does not belong to this model");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto [h, w] = model.conv_output_dims(l);
    const auto& fm = trace.conv_maps[l];
    if (fm.channels != layers[l].spec.out_channels || fm.height != h || fm.width != w ||
        fm.data.size() != fm.channels * h * w) {
      throw std::invalid_argument("vbp: feature map " + std::to_string(l) +
                                  " does not match the model geometry");
    }
  }

  ImageBuf m = channel_mean(trace.conv_maps.back());
  for (std::size_t l = layers.size() - 1; l >= 1; --l) {
    const ImageBuf shallower = channel_mean(trace.conv_maps[l - 1]);
    m = ones_deconv(m, layers[l].spec.kernel, layers[l].spec.stride, shallower.height(),
                    shallower.width());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] *= shallower[k];
  }
  return ones_deconv(m, layers[0].spec.kernel, layers[0].spec.stride, trace.input_height,
                     trace.input_width);
}

ImageBuf minmax_normalize(const ImageBuf& m) {
  if (m.empty()) return m;
  const auto [lo_it, hi_it] = std::minmax_element(m.data().begin(), m.data().end());
  const double lo = *lo_it, hi = *hi_it;
  ImageBuf out(m.height(), m.width());
  if (!(hi > lo)) return out;
  const double range = hi - lo;
  for (std::size_t k = 0; k < m.size(); ++k) out[k] = (m[k] - lo) / range;
  return out;
}

SaliencyMask vbp_mask(const ForwardTrace& trace, const CnnModel& model) {
  return minmax_normalize(vbp_raw(trace, model));
}

SaliencyMask vbp_mask(const CnnModel& model, const ImageBuf& img) {
  const CnnOutput out = cnn_forward(model, img, true);
  return vbp_mask(*out.trace, model);
}

std::vector<SaliencyMask> vbp_batch(const CnnModel& model, const std::vector<ImageBuf>& images) {
  std::vector<SaliencyMask> masks;
  masks.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      masks.push_back(vbp_mask(model, images[i]));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("vbp_batch: image " + std::to_string(i) + ": " + e.what());
    }
  }
  return masks;
}

}  // namespace novsal
