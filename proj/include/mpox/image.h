// Copyright 2026 The MpoxMamba Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// 8-bit RGB images: PNG/JPEG decoding, PNG encoding, resizing to network
// input tensors and heatmap overlays.

#ifndef MPOX_IMAGE_H_
#define MPOX_IMAGE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mpox/tensor.h"

namespace mpox {

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major

  Image() = default;
  Image(std::size_t w, std::size_t h)
      : width(w), height(h), rgb(w * h * 3, 0) {}
};

// Format is sniffed from the leading bytes. Grey and alpha inputs are
// converted to RGB. Throws DataError naming the file.
Image decode_image(const std::string& path);

void write_png(const Image& image, const std::string& path);

// Bilinear resize of an RGB image.
Image resize_bilinear(const Image& image, std::size_t width,
                      std::size_t height);

// [3, size, size] in [0, 1], bilinear resized.
Tensor<float> image_to_tensor(const Image& image, std::size_t size);

// Inverse of image_to_tensor for a [3, H, W] tensor (values clamped).
Image tensor_to_image(const Tensor<float>& chw);

// Jet-coloured heatmap [H, W] in [0, 1], alpha-blended over `base` of the
// same size: out = (1 - alpha) * base + alpha * colour.
Image overlay_heatmap(const Image& base, const Tensor<float>& heatmap,
                      double alpha = 0.4);

}  // namespace mpox

#endif  // MPOX_IMAGE_H_
