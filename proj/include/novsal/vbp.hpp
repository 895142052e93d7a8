#pragma once

#include <vector>

#include "novsal/cnn.hpp"
#include "novsal/image.hpp"

namespace novsal {

/// Input-resolution saliency map in [0,1].
using SaliencyMask = ImageBuf;

/// Arithmetic mean over channels of one feature-map stack.
ImageBuf channel_mean(const FeatureMaps& maps);

/// Transposed convolution of `m` with an all-ones kernel of the given size and
/// stride, then fitted to (target_h, target_w): the result is anchored at the
/// top-left (matching the forward valid geometry) and zero-padded where the
/// forward pass dropped trailing rows or columns; if it is larger than the
/// target it is center-cropped, top/left taking the smaller half of the excess.
ImageBuf ones_deconv(const ImageBuf& m, std::size_t kernel, std::size_t stride,
                     std::size_t target_h, std::size_t target_w);

/// Pre-normalization VisualBackProp map at input resolution.
ImageBuf vbp_raw(const ForwardTrace& trace, const CnnModel& model);

/// Min-max normalization; all zeros when the map is constant.
ImageBuf minmax_normalize(const ImageBuf& m);

/// VisualBackProp: channel-averaged feature maps, combined deepest-first by
/// ones-kernel deconvolution and pointwise products, normalized to [0,1].
SaliencyMask vbp_mask(const ForwardTrace& trace, const CnnModel& model);

/// Forward pass plus vbp_mask.
SaliencyMask vbp_mask(const CnnModel& model, const ImageBuf& img);

/// Order-preserving map of vbp_mask; errors name the failing index.
std::vector<SaliencyMask> vbp_batch(const CnnModel& model, const std::vector<ImageBuf>& images);

}  // namespace novsal
