#include "novsal/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "novsal/error.hpp"
#include "novsal/rng.hpp"

namespace novsal {

std::vector<std::size_t> default_ae_dims(std::size_t pixels) { return {pixels, 64, 16, 64, pixels}; }

template <class T>
BasicAutoencoder<T>::BasicAutoencoder(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("autoencoder: need at least two widths");
  if (dims.front() != dims.back()) {
    throw std::invalid_argument("autoencoder: output width must equal input width");
  }
  Rng rng(mix_seed(seed));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw std::invalid_argument("autoencoder: zero width");
    Layer layer{dims[l], dims[l + 1], std::vector<T>(dims[l] * dims[l + 1]),
                std::vector<T>(dims[l + 1], T(0))};
    glorot_uniform<T>(layer.weights, layer.in, layer.out, rng);
    layers_.push_back(std::move(layer));
  }
}

template <class T>
std::vector<std::size_t> BasicAutoencoder<T>::dims() const {
  std::vector<std::size_t> d;
  if (layers_.empty()) return d;
  d.push_back(layers_.front().in);
  for (const auto& l : layers_) d.push_back(l.out);
  return d;
}

template <class T>
std::size_t BasicAutoencoder<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.biases.size();
  return n;
}

template <class T>
void BasicAutoencoder<T>::validate() const {
  if (layers_.empty()) throw std::invalid_argument("autoencoder: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weights.size() != layer.in * layer.out || layer.biases.size() != layer.out) {
      throw std::invalid_argument("autoencoder: tensor size mismatch in layer " + std::to_string(l));
    }
    if (l > 0 && layers_[l - 1].out != layer.in) {
      throw std::invalid_argument("autoencoder: layer widths do not chain");
    }
  }
  if (input_size() != output_size()) {
    throw std::invalid_argument("autoencoder: output width must equal input width");
  }
}

template <class T>
std::vector<std::span<T>> BasicAutoencoder<T>::parameters() {
  std::vector<std::span<T>> p;
  for (auto& l : layers_) {
    p.emplace_back(l.weights);
    p.emplace_back(l.biases);
  }
  return p;
}

template <class T>
std::vector<std::span<const T>> BasicAutoencoder<T>::parameters() const {
  std::vector<std::span<const T>> p;
  for (const auto& l : layers_) {
    p.emplace_back(l.weights);
    p.emplace_back(l.biases);
  }
  return p;
}

namespace {

template <class T>
using RowMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
using VecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;

}  // namespace

template <class T>
typename BasicAutoencoder<T>::Matrix BasicAutoencoder<T>::forward(
    const Matrix& input, std::vector<Matrix>* activations) const {
  if (static_cast<std::size_t>(input.rows()) != input_size()) {
    throw std::invalid_argument("autoencoder: input has " + std::to_string(input.rows()) +
                                " features, model expects " + std::to_string(input_size()));
  }
  if (activations) {
    activations->clear();
    activations->push_back(input);
  }
  Matrix x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    RowMap<T> w(layer.weights.data(), static_cast<Eigen::Index>(layer.out),
                static_cast<Eigen::Index>(layer.in));
    VecMap<T> b(layer.biases.data(), static_cast<Eigen::Index>(layer.out));
    Matrix z;
    z.noalias() = w * (l == 0 ? input : x);
    z.colwise() += b;
    if (l + 1 < layers_.size()) {
      x = z.cwiseMax(T(0));
    } else {
      x = (T(1) + (-z.array()).exp()).inverse().matrix();  // vectorized sigmoid
    }
    if (activations) activations->push_back(x);
  }
  return x;
}

template <class T>
std::vector<LayerRecord> BasicAutoencoder<T>::to_records() const {
  std::vector<LayerRecord> records;
  for (const auto& l : layers_) {
    LayerRecord r;
    r.kind = LayerRecord::Kind::Dense;
    r.dims = {static_cast<std::uint32_t>(l.in), static_cast<std::uint32_t>(l.out)};
    r.weights.assign(l.weights.begin(), l.weights.end());
    r.biases.assign(l.biases.begin(), l.biases.end());
    records.push_back(std::move(r));
  }
  return records;
}

template <class T>
BasicAutoencoder<T> BasicAutoencoder<T>::from_records(const std::vector<LayerRecord>& records) {
  BasicAutoencoder<T> m;
  for (const auto& r : records) {
    if (r.kind != LayerRecord::Kind::Dense) {
      throw DataError("autoencoder weights may only contain dense layers");
    }
    Layer l{r.dims[0], r.dims[1], {}, {}};
    l.weights.assign(r.weights.begin(), r.weights.end());
    l.biases.assign(r.biases.begin(), r.biases.end());
    m.layers_.push_back(std::move(l));
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("invalid autoencoder weights: ") + e.what());
  }
  return m;
}

template <class T>
bool BasicAutoencoder<T>::operator==(const BasicAutoencoder& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.in != b.in || a.out != b.out || a.weights != b.weights || a.biases != b.biases) {
      return false;
    }
  }
  return true;
}

template class BasicAutoencoder<float>;
template class BasicAutoencoder<double>;

namespace {

template <class T>
typename BasicAutoencoder<T>::Matrix to_columns(std::span<const ImageBuf> images,
                                                std::size_t features) {
  typename BasicAutoencoder<T>::Matrix m(static_cast<Eigen::Index>(features),
                                         static_cast<Eigen::Index>(images.size()));
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != features) {
      throw std::invalid_argument("autoencoder: image " + std::to_string(i) + " has " +
                                  std::to_string(images[i].size()) + " pixels, model expects " +
                                  std::to_string(features));
    }
    for (std::size_t k = 0; k < features; ++k) {
      m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = static_cast<T>(images[i][k]);
    }
  }
  return m;
}

template <class T>
ImageBuf column_image(const typename BasicAutoencoder<T>::Matrix& m, Eigen::Index col,
                      std::size_t height, std::size_t width) {
  ImageBuf img(height, width);
  for (std::size_t k = 0; k < img.size(); ++k) {
    img[k] = static_cast<double>(m(static_cast<Eigen::Index>(k), col));
  }
  return img;
}

}  // namespace

template <class T>
ImageBuf ae_reconstruct(const BasicAutoencoder<T>& model, const ImageBuf& img) {
  const std::span<const ImageBuf> one(&img, 1);
  const auto out = model.forward(to_columns<T>(one, model.input_size()));
  return column_image<T>(out, 0, img.height(), img.width());
}

double reconstruction_loss(const ImageBuf& input, const ImageBuf& recon, LossKind kind,
                           const SsimParams& params) {
  return kind == LossKind::Mse ? mse(input, recon) : 1.0 - ssim_mean(input, recon, params);
}

template <class T>
double ae_loss(const BasicAutoencoder<T>& model, const ImageBuf& img, LossKind kind,
               const SsimParams& params) {
  return reconstruction_loss(img, ae_reconstruct(model, img), kind, params);
}

template <class T>
double ae_loss_and_grad(const BasicAutoencoder<T>& model, std::span<const ImageBuf> batch,
                        LossKind kind, const SsimParams& params,
                        std::vector<std::vector<T>>& grads) {
  using Matrix = typename BasicAutoencoder<T>::Matrix;
  if (batch.empty()) throw std::invalid_argument("ae_loss_and_grad: empty batch");
  const std::size_t features = model.input_size();
  std::vector<Matrix> acts;
  const Matrix out = model.forward(to_columns<T>(batch, features), &acts);

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Matrix delta(out.rows(), out.cols());
  std::vector<double> g;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const ImageBuf recon = column_image<T>(out, col, batch[i].height(), batch[i].width());
    if (kind == LossKind::Mse) {
      loss += mse(batch[i], recon);
      g = mse_grad_wrt_y(batch[i], recon);
    } else {
      loss += 1.0 - ssim_mean_and_grad(batch[i], recon, params, g);
      for (auto& v : g) v = -v;
    }
    // Through the sigmoid: dy/dz = y (1 - y).
    for (std::size_t k = 0; k < features; ++k) {
      const double y = recon[k];
      delta(static_cast<Eigen::Index>(k), col) = static_cast<T>(g[k] * inv_b * y * (1.0 - y));
    }
  }

  const auto& layers = model.layers();
  grads.resize(2 * layers.size());
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const Matrix& input = acts[l];
    auto& gw = grads[2 * l];
    auto& gb = grads[2 * l + 1];
    gw.resize(layer.weights.size());
    gb.resize(layer.biases.size());
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        gw.data(), static_cast<Eigen::Index>(layer.out), static_cast<Eigen::Index>(layer.in))
        .noalias() = delta * input.transpose();
    // Reduce into an Eigen-owned (aligned) vector: writing the reduction
    // straight into gb lets Eigen peel a heap-alignment-dependent head with a
    // different summation order, breaking bitwise reproducibility.
    const Eigen::Matrix<T, Eigen::Dynamic, 1> bias_grad = delta.rowwise().sum();
    std::copy(bias_grad.data(), bias_grad.data() + bias_grad.size(), gb.begin());
    if (l == 0) break;
    RowMap<T> w(layer.weights.data(), static_cast<Eigen::Index>(layer.out),
                static_cast<Eigen::Index>(layer.in));
    Matrix back = w.transpose() * delta;
    delta = (input.array() > T(0)).select(back, T(0));
  }
  return loss * inv_b;
}

template <class T>
AeTrainResult<T> ae_train(BasicAutoencoder<T> model, const std::vector<ImageBuf>& images,
                          const TrainConfig& config, const SsimParams& params) {
  config.validate();
  model.validate();
  if (images.empty()) throw std::invalid_argument("ae_train: empty training set");
  for (const auto& img : images) {
    if (!img.same_dims(images.front())) {
      throw std::invalid_argument("ae_train: images must share one geometry");
    }
  }
  if (images.front().size() != model.input_size()) {
    throw std::invalid_argument("ae_train: image size does not match the model input");
  }

  Adam<T> adam({config.learning_rate});
  std::vector<std::vector<T>> grads;
  std::vector<ImageBuf> batch;
  AeTrainResult<T> result;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (const auto& idx : epoch_batches(images.size(), config.batch, config.seed, epoch)) {
      batch.clear();
      for (std::size_t i : idx) batch.push_back(images[i]);
      const double loss = ae_loss_and_grad(model, std::span<const ImageBuf>(batch), config.loss,
                                           params, grads);
      if (!std::isfinite(loss)) {
        throw NumericalError("ae_train: non-finite " + to_string(config.loss) +
                             " loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss * static_cast<double>(idx.size());
      std::vector<std::span<const T>> views(grads.begin(), grads.end());
      adam.step(model.parameters(), views);
    }
    result.loss_history.push_back(epoch_loss / static_cast<double>(images.size()));
  }
  for (const auto& p : model.parameters()) {
    for (T v : p) {
      if (!std::isfinite(static_cast<double>(v))) {
        throw NumericalError("ae_train: non-finite parameter after training");
      }
    }
  }
  result.model = std::move(model);
  return result;
}

void save_ae(const std::filesystem::path& path, const AeModel& model) {
  write_weights(path, model.to_records());
}

AeModel load_ae(const std::filesystem::path& path) {
  return AeModel::from_records(read_weights(path));
}

#define NOVSAL_INSTANTIATE_AE(T)                                                               \
  template ImageBuf ae_reconstruct<T>(const BasicAutoencoder<T>&, const ImageBuf&);            \
  template double ae_loss<T>(const BasicAutoencoder<T>&, const ImageBuf&, LossKind,            \
                             const SsimParams&);                                               \
  template double ae_loss_and_grad<T>(const BasicAutoencoder<T>&, std::span<const ImageBuf>,   \
                                      LossKind, const SsimParams&,                             \
                                      std::vector<std::vector<T>>&);                           \
  template AeTrainResult<T> ae_train<T>(BasicAutoencoder<T>, const std::vector<ImageBuf>&,     \
                                        const TrainConfig&, const SsimParams&);

NOVSAL_INSTANTIATE_AE(float)
NOVSAL_INSTANTIATE_AE(double)

#undef NOVSAL_INSTANTIATE_AE

}  // namespace novsal
