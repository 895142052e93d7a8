#include "novsal/cnn.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "novsal/error.hpp"
#include "novsal/rng.hpp"

namespace novsal {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapVec = Eigen::Map<Eigen::VectorXd>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;

// Unfolds the receptive fields of one conv layer: rows are (in_ch, kh, kw),
// columns are output positions.
void im2col(const FeatureMaps& in, const ConvLayerSpec& spec, std::size_t out_h,
            std::size_t out_w, RowMat& cols) {
  const std::size_t k = spec.kernel;
  cols.resize(static_cast<Eigen::Index>(in.channels * k * k),
              static_cast<Eigen::Index>(out_h * out_w));
  for (std::size_t ch = 0; ch < in.channels; ++ch) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols.data() + ((ch * k + ky) * k + kx) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const double* src = in.data.data() + (ch * in.height + oy * spec.stride + ky) * in.width + kx;
          for (std::size_t ox = 0; ox < out_w; ++ox) row[oy * out_w + ox] = src[ox * spec.stride];
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates column gradients back onto the input planes.
void col2im(const RowMat& cols, const ConvLayerSpec& spec, std::size_t out_h, std::size_t out_w,
            FeatureMaps& grad_in) {
  const std::size_t k = spec.kernel;
  for (std::size_t ch = 0; ch < grad_in.channels; ++ch) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols.data() + ((ch * k + ky) * k + kx) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          double* dst = grad_in.data.data() +
                        (ch * grad_in.height + oy * spec.stride + ky) * grad_in.width + kx;
          for (std::size_t ox = 0; ox < out_w; ++ox) dst[ox * spec.stride] += row[oy * out_w + ox];
        }
      }
    }
  }
}

FeatureMaps as_feature_maps(const ImageBuf& img) {
  return FeatureMaps{1, img.height(), img.width(), img.data()};
}

// Activations retained for backpropagation.
struct Activations {
  std::vector<FeatureMaps> conv_out;  // post-ReLU
  std::vector<RowMat> conv_cols;      // im2col of each conv input
  std::vector<Eigen::VectorXd> dense_out;  // post-activation (last is linear)
};

double forward_impl(const CnnModel& model, const ImageBuf& img, Activations* acts,
                    ForwardTrace* trace) {
  FeatureMaps current = as_feature_maps(img);
  RowMat cols;
  for (std::size_t l = 0; l < model.conv().size(); ++l) {
    const ConvLayer& layer = model.conv()[l];
    const auto [oh, ow] = model.conv_output_dims(l);
    im2col(current, layer.spec, oh, ow, cols);
    FeatureMaps out{layer.spec.out_channels, oh, ow,
                    std::vector<double>(layer.spec.out_channels * oh * ow)};
    ConstMapMat w(layer.weights.data(), static_cast<Eigen::Index>(layer.spec.out_channels),
                  cols.rows());
    MapMat o(out.data.data(), static_cast<Eigen::Index>(layer.spec.out_channels), cols.cols());
    o.noalias() = w * cols;
    for (Eigen::Index ch = 0; ch < o.rows(); ++ch) {
      const double b = layer.biases[static_cast<std::size_t>(ch)];
      o.row(ch) = (o.row(ch).array() + b).cwiseMax(0.0);
    }
    if (acts) acts->conv_cols.push_back(std::move(cols));
    current = std::move(out);
    if (acts) acts->conv_out.push_back(current);
    if (trace) trace->conv_maps.push_back(current);
    cols = RowMat();
  }

  Eigen::VectorXd x = ConstMapVec(current.data.data(), static_cast<Eigen::Index>(current.data.size()));
  for (std::size_t l = 0; l < model.dense().size(); ++l) {
    const DenseLayer& layer = model.dense()[l];
    ConstMapMat w(layer.weights.data(), static_cast<Eigen::Index>(layer.out),
                  static_cast<Eigen::Index>(layer.in));
    Eigen::VectorXd y = w * x + ConstMapVec(layer.biases.data(), static_cast<Eigen::Index>(layer.out));
    if (l + 1 < model.dense().size()) y = y.cwiseMax(0.0);
    x = std::move(y);
    if (acts) acts->dense_out.push_back(x);
  }
  return x(0);
}

void require_input_dims(const CnnModel& model, const ImageBuf& img) {
  if (img.height() != model.input_height() || img.width() != model.input_width()) {
    throw std::invalid_argument("cnn: input is " + std::to_string(img.height()) + "x" +
                                std::to_string(img.width()) + ", model expects " +
                                std::to_string(model.input_height()) + "x" +
                                std::to_string(model.input_width()));
  }
}

}  // namespace

CnnArchitecture default_cnn_architecture(std::size_t input_height, std::size_t input_width) {
  CnnArchitecture arch;
  arch.input_height = input_height;
  arch.input_width = input_width;
  arch.conv = {{1, 8, 5, 2}, {8, 12, 5, 2}, {12, 16, 3, 2}};
  arch.dense_hidden = {64, 16};
  return arch;
}

CnnModel::CnnModel(const CnnArchitecture& arch, std::uint64_t seed)
    : input_height_(arch.input_height), input_width_(arch.input_width) {
  Rng rng(mix_seed(seed));
  for (const auto& spec : arch.conv) {
    if (spec.kernel % 2 == 0 || spec.stride < 1) {
      throw std::invalid_argument("ConvLayerSpec: kernel must be odd and stride >= 1");
    }
    ConvLayer layer{spec, std::vector<double>(spec.out_channels * spec.in_channels * spec.kernel * spec.kernel),
                    std::vector<double>(spec.out_channels, 0.0)};
    const std::size_t area = spec.kernel * spec.kernel;
    glorot_uniform<double>(layer.weights, spec.in_channels * area, spec.out_channels * area, rng);
    conv_.push_back(std::move(layer));
  }
  std::size_t in = 0;
  {
    std::size_t h = input_height_, w = input_width_, ch = 1;
    for (const auto& spec : arch.conv) {
      if (!spec.fits(h) || !spec.fits(w)) throw std::invalid_argument("CnnModel: input too small");
      h = spec.output_dim(h);
      w = spec.output_dim(w);
      ch = spec.out_channels;
    }
    in = h * w * ch;
  }
  std::vector<std::size_t> widths = arch.dense_hidden;
  widths.push_back(1);
  for (std::size_t out : widths) {
    DenseLayer layer{in, out, std::vector<double>(in * out), std::vector<double>(out, 0.0)};
    glorot_uniform<double>(layer.weights, in, out, rng);
    dense_.push_back(std::move(layer));
    in = out;
  }
  validate();
}

std::pair<std::size_t, std::size_t> CnnModel::conv_output_dims(std::size_t l) const {
  std::size_t h = input_height_, w = input_width_;
  for (std::size_t i = 0; i <= l; ++i) {
    h = conv_[i].spec.output_dim(h);
    w = conv_[i].spec.output_dim(w);
  }
  return {h, w};
}

std::size_t CnnModel::flattened_size() const {
  if (conv_.empty()) return input_height_ * input_width_;
  const auto [h, w] = conv_output_dims(conv_.size() - 1);
  return h * w * conv_.back().spec.out_channels;
}

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.size();
  return n;
}

void CnnModel::validate() const {
  if (dense_.empty() || dense_.back().out != 1) {
    throw std::invalid_argument("CnnModel: must end in a single-output dense layer");
  }
  std::size_t h = input_height_, w = input_width_, ch = 1;
  for (const auto& layer : conv_) {
    const auto& s = layer.spec;
    if (s.in_channels != ch) throw std::invalid_argument("CnnModel: conv channel mismatch");
    if (s.kernel % 2 == 0 || s.stride < 1) {
      throw std::invalid_argument("CnnModel: kernel must be odd and stride >= 1");
    }
    if (!s.fits(h) || !s.fits(w)) throw std::invalid_argument("CnnModel: conv kernel exceeds input");
    if (layer.weights.size() != s.out_channels * s.in_channels * s.kernel * s.kernel ||
        layer.biases.size() != s.out_channels) {
      throw std::invalid_argument("CnnModel: conv tensor size mismatch");
    }
    h = s.output_dim(h);
    w = s.output_dim(w);
    ch = s.out_channels;
  }
  std::size_t in = h * w * ch;
  for (const auto& layer : dense_) {
    if (layer.in != in || layer.weights.size() != layer.in * layer.out ||
        layer.biases.size() != layer.out) {
      throw std::invalid_argument("CnnModel: dense layer shape mismatch");
    }
    in = layer.out;
  }
}

std::vector<std::span<double>> CnnModel::parameters() {
  std::vector<std::span<double>> p;
  for (auto& l : conv_) {
    p.emplace_back(l.weights);
    p.emplace_back(l.biases);
  }
  for (auto& l : dense_) {
    p.emplace_back(l.weights);
    p.emplace_back(l.biases);
  }
  return p;
}

std::vector<std::span<const double>> CnnModel::parameters() const {
  std::vector<std::span<const double>> p;
  for (const auto& l : conv_) {
    p.emplace_back(l.weights);
    p.emplace_back(l.biases);
  }
  for (const auto& l : dense_) {
    p.emplace_back(l.weights);
    p.emplace_back(l.biases);
  }
  return p;
}

std::vector<LayerRecord> CnnModel::to_records() const {
  std::vector<LayerRecord> records;
  for (const auto& l : conv_) {
    LayerRecord r;
    r.kind = LayerRecord::Kind::Conv;
    r.dims = {static_cast<std::uint32_t>(l.spec.in_channels),
              static_cast<std::uint32_t>(l.spec.out_channels),
              static_cast<std::uint32_t>(l.spec.kernel), static_cast<std::uint32_t>(l.spec.stride)};
    r.weights.assign(l.weights.begin(), l.weights.end());
    r.biases.assign(l.biases.begin(), l.biases.end());
    records.push_back(std::move(r));
  }
  for (const auto& l : dense_) {
    LayerRecord r;
    r.kind = LayerRecord::Kind::Dense;
    r.dims = {static_cast<std::uint32_t>(l.in), static_cast<std::uint32_t>(l.out)};
    r.weights.assign(l.weights.begin(), l.weights.end());
    r.biases.assign(l.biases.begin(), l.biases.end());
    records.push_back(std::move(r));
  }
  return records;
}

CnnModel CnnModel::from_records(const std::vector<LayerRecord>& records, std::size_t input_height,
                                std::size_t input_width) {
  CnnModel m;
  m.input_height_ = input_height;
  m.input_width_ = input_width;
  bool seen_dense = false;
  for (const auto& r : records) {
    if (r.kind == LayerRecord::Kind::Conv) {
      if (seen_dense) throw DataError("CNN weights: conv layer after dense layer");
      ConvLayer l;
      l.spec = {r.dims[0], r.dims[1], r.dims[2], r.dims[3]};
      l.weights.assign(r.weights.begin(), r.weights.end());
      l.biases.assign(r.biases.begin(), r.biases.end());
      m.conv_.push_back(std::move(l));
    } else {
      seen_dense = true;
      DenseLayer l{r.dims[0], r.dims[1], {}, {}};
      l.weights.assign(r.weights.begin(), r.weights.end());
      l.biases.assign(r.biases.begin(), r.biases.end());
      m.dense_.push_back(std::move(l));
    }
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("CNN weights do not fit the input geometry: ") + e.what());
  }
  return m;
}

bool CnnModel::operator==(const CnnModel& other) const {
  if (input_height_ != other.input_height_ || input_width_ != other.input_width_) return false;
  const auto a = parameters(), b = other.parameters();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::equal(a[i].begin(), a[i].end(), b[i].begin(), b[i].end())) return false;
  }
  return true;
}

CnnOutput cnn_forward(const CnnModel& model, const ImageBuf& img, bool keep_trace) {
  require_input_dims(model, img);
  CnnOutput out;
  if (keep_trace) {
    ForwardTrace trace{img.height(), img.width(), {}};
    out.angle = forward_impl(model, img, nullptr, &trace);
    out.trace = std::move(trace);
  } else {
    out.angle = forward_impl(model, img, nullptr, nullptr);
  }
  return out;
}

CnnGradients::CnnGradients(const CnnModel& model) {
  for (const auto& p : model.parameters()) tensors.emplace_back(p.size(), 0.0);
}

void CnnGradients::zero() {
  for (auto& t : tensors) std::fill(t.begin(), t.end(), 0.0);
}

std::vector<std::span<const double>> CnnGradients::views() const {
  std::vector<std::span<const double>> v;
  for (const auto& t : tensors) v.emplace_back(t);
  return v;
}

double cnn_loss_and_grad(const CnnModel& model, std::span<const ImageBuf> images,
                         std::span<const double> targets, CnnGradients& grads) {
  if (images.empty() || images.size() != targets.size()) {
    throw std::invalid_argument("cnn_loss_and_grad: need equally many (nonzero) images and targets");
  }
  grads.zero();
  const std::size_t n_conv = model.conv().size();
  const std::size_t n_dense = model.dense().size();
  const double inv_b = 1.0 / static_cast<double>(images.size());
  double loss = 0.0;

  for (std::size_t i = 0; i < images.size(); ++i) {
    require_input_dims(model, images[i]);
    Activations acts;
    const double pred = forward_impl(model, images[i], &acts, nullptr);
    const double err = pred - targets[i];
    loss += err * err;

    // Dense stack, output first.
    Eigen::VectorXd delta(1);
    delta(0) = 2.0 * err * inv_b;
    for (std::size_t l = n_dense; l-- > 0;) {
      const DenseLayer& layer = model.dense()[l];
      const FeatureMaps* flat_src = (l == 0 && n_conv > 0) ? &acts.conv_out.back() : nullptr;
      Eigen::VectorXd input;
      if (l > 0) {
        input = acts.dense_out[l - 1];
      } else if (flat_src) {
        input = ConstMapVec(flat_src->data.data(), static_cast<Eigen::Index>(flat_src->data.size()));
      } else {
        input = ConstMapVec(images[i].data().data(), static_cast<Eigen::Index>(images[i].size()));
      }
      auto& gw = grads.tensors[2 * (n_conv + l)];
      auto& gb = grads.tensors[2 * (n_conv + l) + 1];
      MapMat(gw.data(), static_cast<Eigen::Index>(layer.out), static_cast<Eigen::Index>(layer.in))
          .noalias() += delta * input.transpose();
      MapVec(gb.data(), static_cast<Eigen::Index>(layer.out)) += delta;

      ConstMapMat w(layer.weights.data(), static_cast<Eigen::Index>(layer.out),
                    static_cast<Eigen::Index>(layer.in));
      Eigen::VectorXd back = w.transpose() * delta;
      // ReLU of whatever produced `input` (hidden dense or last conv).
      back = (input.array() > 0.0).select(back, 0.0);
      delta = std::move(back);
    }

    // Conv stack, deepest first. `delta` is d loss / d post-ReLU output of conv l.
    for (std::size_t l = n_conv; l-- > 0;) {
      const ConvLayer& layer = model.conv()[l];
      const FeatureMaps& out = acts.conv_out[l];
      const Eigen::Index oc = static_cast<Eigen::Index>(layer.spec.out_channels);
      const Eigen::Index positions = static_cast<Eigen::Index>(out.height * out.width);
      // delta already carries the ReLU mask for this layer's output.
      ConstMapMat d_out(delta.data(), oc, positions);
      const RowMat& cols = acts.conv_cols[l];
      auto& gw = grads.tensors[2 * l];
      auto& gb = grads.tensors[2 * l + 1];
      MapMat(gw.data(), oc, cols.rows()).noalias() += d_out * cols.transpose();
      // Aligned temporary: see the bias reduction in autoencoder.cpp.
      const Eigen::VectorXd bias_grad = d_out.rowwise().sum();
      MapVec(gb.data(), oc) += bias_grad;
      if (l == 0) break;

      ConstMapMat w(layer.weights.data(), oc, cols.rows());
      RowMat d_cols = w.transpose() * d_out;
      const FeatureMaps& in = acts.conv_out[l - 1];
      FeatureMaps d_in{in.channels, in.height, in.width, std::vector<double>(in.data.size(), 0.0)};
      col2im(d_cols, layer.spec, out.height, out.width, d_in);
      for (std::size_t k = 0; k < d_in.data.size(); ++k) {
        if (!(in.data[k] > 0.0)) d_in.data[k] = 0.0;
      }
      delta = ConstMapVec(d_in.data.data(), static_cast<Eigen::Index>(d_in.data.size()));
    }
  }
  return loss * inv_b;
}

namespace {

// Shared minibatch Adam loop; `labels(epoch)` supplies the targets for one epoch.
CnnTrainResult train_loop(CnnModel model, const std::vector<ImageBuf>& images,
                          const std::function<const std::vector<double>&(std::size_t)>& labels,
                          const TrainConfig& config) {
  Adam<double> adam({config.learning_rate});
  CnnGradients grads(model);
  CnnTrainResult result;
  std::vector<ImageBuf> batch_images;
  std::vector<double> batch_targets;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<double>& angles = labels(epoch);
    double epoch_loss = 0.0;
    for (const auto& idx : epoch_batches(images.size(), config.batch, config.seed, epoch)) {
      batch_images.clear();
      batch_targets.clear();
      for (std::size_t i : idx) {
        batch_images.push_back(images[i]);
        batch_targets.push_back(angles[i]);
      }
      const double loss = cnn_loss_and_grad(model, batch_images, batch_targets, grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("cnn_train: non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(idx.size());
      adam.step(model.parameters(), grads.views());
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(images.size()));
  }
  for (const auto& p : model.parameters()) require_finite(p, "trained CNN parameters");
  result.model = std::move(model);
  return result;
}

void check_training_set(const CnnModel& model, const std::vector<ImageBuf>& images,
                        const TrainConfig& config) {
  config.validate();
  if (images.empty()) throw std::invalid_argument("cnn_train: empty training set");
  model.validate();
  for (const auto& img : images) require_input_dims(model, img);
}

}  // namespace

CnnTrainResult cnn_train(CnnModel model, const std::vector<ImageBuf>& images,
                         const std::vector<double>& angles, const TrainConfig& config) {
  check_training_set(model, images, config);
  if (images.size() != angles.size()) {
    throw std::invalid_argument("cnn_train: image and angle counts differ");
  }
  return train_loop(std::move(model), images, [&](std::size_t) -> const std::vector<double>& { return angles; },
                    config);
}

std::vector<double> random_angles(std::size_t n, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x72616e646f6dULL));
  std::vector<double> out(n);
  for (auto& a : out) a = rng.uniform(-0.5, 0.5);
  return out;
}

CnnTrainResult cnn_train_random_labels(CnnModel model, const std::vector<ImageBuf>& images,
                                       const TrainConfig& config) {
  check_training_set(model, images, config);
  std::vector<double> angles;
  return train_loop(
      std::move(model), images,
      [&](std::size_t epoch) -> const std::vector<double>& {
        angles = random_angles(images.size(), mix_seed(config.seed, epoch));
        return angles;
      },
      config);
}

double cnn_angle_mse(const CnnModel& model, const std::vector<ImageBuf>& images,
                     const std::vector<double>& angles) {
  if (images.empty() || images.size() != angles.size()) {
    throw std::invalid_argument("cnn_angle_mse: need equally many (nonzero) images and angles");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const double e = cnn_forward(model, images[i]).angle - angles[i];
    acc += e * e;
  }
  return acc / static_cast<double>(images.size());
}

void save_cnn(const std::filesystem::path& path, const CnnModel& model) {
  write_weights(path, model.to_records());
}

CnnModel load_cnn(const std::filesystem::path& path, std::size_t input_height,
                  std::size_t input_width) {
  return CnnModel::from_records(read_weights(path), input_height, input_width);
}

}  // namespace novsal
