#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "novsal/image.hpp"
#include "novsal/metrics.hpp"
#include "novsal/nn.hpp"

namespace novsal {

/// Layer widths of the default autoencoder over 60x160 inputs.
std::vector<std::size_t> default_ae_dims(std::size_t pixels = 9600);

/// Fully connected autoencoder: ReLU hidden layers, sigmoid output.
///
/// The scalar type is a template parameter so the same code serves the
/// float production model and double-precision instances used for gradient
/// checking.
template <class T>
class BasicAutoencoder {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<T> weights;  // [out][in]
    std::vector<T> biases;
  };

  BasicAutoencoder() = default;
  /// `dims` lists every width from input to output, e.g. {9600, 64, 16, 64, 9600}.
  BasicAutoencoder(const std::vector<std::size_t>& dims, std::uint64_t seed);

  std::size_t input_size() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_size() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::vector<std::size_t> dims() const;
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t parameter_count() const;

  void validate() const;

  std::vector<std::span<T>> parameters();
  std::vector<std::span<const T>> parameters() const;

  /// Column-per-sample forward pass. `activations` (optional) receives the
  /// input followed by every layer's post-activation output.
  Matrix forward(const Matrix& input, std::vector<Matrix>* activations = nullptr) const;

  std::vector<LayerRecord> to_records() const;
  static BasicAutoencoder from_records(const std::vector<LayerRecord>& records);

  bool operator==(const BasicAutoencoder& other) const;

 private:
  std::vector<Layer> layers_;
};

using AeModel = BasicAutoencoder<float>;

/// Reconstruction with the input's dimensions; values strictly inside (0,1).
template <class T>
ImageBuf ae_reconstruct(const BasicAutoencoder<T>& model, const ImageBuf& img);

/// MSE: mse(input, recon). SSIM: 1 - ssim_mean(input, recon).
double reconstruction_loss(const ImageBuf& input, const ImageBuf& recon, LossKind kind,
                           const SsimParams& params = {});

template <class T>
double ae_loss(const BasicAutoencoder<T>& model, const ImageBuf& img, LossKind kind,
               const SsimParams& params = {});

/// Mean per-image loss over the batch and its gradient for every parameter
/// (laid out like parameters()).
template <class T>
double ae_loss_and_grad(const BasicAutoencoder<T>& model, std::span<const ImageBuf> batch,
                        LossKind kind, const SsimParams& params,
                        std::vector<std::vector<T>>& grads);

template <class T>
struct AeTrainResult {
  BasicAutoencoder<T> model;
  std::vector<double> loss_history;  // mean per-image training loss per epoch
};

/// Minibatch Adam on the mean per-image loss. Throws NumericalError on a
/// non-finite loss.
template <class T>
AeTrainResult<T> ae_train(BasicAutoencoder<T> model, const std::vector<ImageBuf>& images,
                          const TrainConfig& config, const SsimParams& params = {});

void save_ae(const std::filesystem::path& path, const AeModel& model);
AeModel load_ae(const std::filesystem::path& path);

extern template class BasicAutoencoder<float>;
extern template class BasicAutoencoder<double>;

}  // namespace novsal
