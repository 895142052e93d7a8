#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "novsal/image.hpp"
#include "novsal/nn.hpp"

namespace novsal {

/// One valid-padding convolution followed by ReLU.
struct ConvLayerSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;

  /// Output side length for an input side length, valid padding.
  std::size_t output_dim(std::size_t in) const { return (in - kernel) / stride + 1; }
  bool fits(std::size_t in) const { return in >= kernel; }
};

struct ConvLayer {
  ConvLayerSpec spec;
  std::vector<double> weights;  // [out][in][kh][kw]
  std::vector<double> biases;   // [out]
};

/// Fully connected layer, weights [out][in] row-major.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> biases;
};

/// Stack of channel planes, [channel][row][col].
struct FeatureMaps {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  double at(std::size_t ch, std::size_t r, std::size_t c) const {
    return data[(ch * height + r) * width + c];
  }
};

/// Post-activation feature maps of every conv layer from one forward pass.
struct ForwardTrace {
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::vector<FeatureMaps> conv_maps;
};

struct CnnArchitecture {
  std::size_t input_height = 60;
  std::size_t input_width = 160;
  std::vector<ConvLayerSpec> conv;
  std::vector<std::size_t> dense_hidden;  // the final 1-unit linear output is implicit
};

/// conv 1->8 (5x5/2), 8->12 (5x5/2), 12->16 (3x3/2), dense 64, 16, 1.
CnnArchitecture default_cnn_architecture(std::size_t input_height = 60,
                                         std::size_t input_width = 160);

/// Steering regressor: ReLU convs, ReLU hidden dense layers, linear scalar output.
class CnnModel {
 public:
  CnnModel() = default;
  /// Glorot-uniform weights, zero biases.
  CnnModel(const CnnArchitecture& arch, std::uint64_t seed);

  std::size_t input_height() const noexcept { return input_height_; }
  std::size_t input_width() const noexcept { return input_width_; }
  std::vector<ConvLayer>& conv() noexcept { return conv_; }
  const std::vector<ConvLayer>& conv() const noexcept { return conv_; }
  std::vector<DenseLayer>& dense() noexcept { return dense_; }
  const std::vector<DenseLayer>& dense() const noexcept { return dense_; }

  /// (height, width) of conv layer `l`'s output.
  std::pair<std::size_t, std::size_t> conv_output_dims(std::size_t l) const;
  std::size_t flattened_size() const;
  std::size_t parameter_count() const;

  /// Throws std::invalid_argument if layer shapes do not chain.
  void validate() const;

  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

  std::vector<LayerRecord> to_records() const;
  static CnnModel from_records(const std::vector<LayerRecord>& records, std::size_t input_height,
                               std::size_t input_width);

  bool operator==(const CnnModel& other) const;

 private:
  std::size_t input_height_ = 0;
  std::size_t input_width_ = 0;
  std::vector<ConvLayer> conv_;
  std::vector<DenseLayer> dense_;
};

struct CnnOutput {
  double angle = 0.0;
  std::optional<ForwardTrace> trace;
};

CnnOutput cnn_forward(const CnnModel& model, const ImageBuf& img, bool keep_trace = false);

/// Parameter gradients laid out like CnnModel::parameters().
struct CnnGradients {
  std::vector<std::vector<double>> tensors;

  explicit CnnGradients(const CnnModel& model);
  void zero();
  std::vector<std::span<const double>> views() const;
};

/// Mean over the batch of (prediction - target)^2; accumulates its gradient into `grads`
/// (which is zeroed first).
double cnn_loss_and_grad(const CnnModel& model, std::span<const ImageBuf> images,
                         std::span<const double> targets, CnnGradients& grads);

struct CnnTrainResult {
  CnnModel model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

/// Minibatch Adam on the angle MSE. Throws NumericalError on a non-finite loss.
CnnTrainResult cnn_train(CnnModel model, const std::vector<ImageBuf>& images,
                         const std::vector<double>& angles, const TrainConfig& config);

/// Seeded uniform labels in [-0.5, 0.5] rad.
std::vector<double> random_angles(std::size_t n, std::uint64_t seed);

/// Like cnn_train, but every epoch draws fresh labels
/// random_angles(images.size(), mix_seed(config.seed, epoch)): the label noise is
/// irreducible, so the loss floor is the label variance (1/12) rather than
/// whatever the network can memorize.
CnnTrainResult cnn_train_random_labels(CnnModel model, const std::vector<ImageBuf>& images,
                                       const TrainConfig& config);

/// Mean squared angle error of the model over a labelled set.
double cnn_angle_mse(const CnnModel& model, const std::vector<ImageBuf>& images,
                     const std::vector<double>& angles);

void save_cnn(const std::filesystem::path& path, const CnnModel& model);
CnnModel load_cnn(const std::filesystem::path& path, std::size_t input_height = 60,
                  std::size_t input_width = 160);

}  // namespace novsal
