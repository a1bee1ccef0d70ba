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

#include "mpox/image.h"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mpox {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

Image decode_png(const std::vector<unsigned char>& bytes,
                 const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw DataError("cannot decode PNG " + path + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out(img.width, img.height);
  if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path + ": " + img.message);
  }
  return out;
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_fail(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Returns false and fills `message` on failure. No objects with
// destructors live between setjmp and the libjpeg calls.
bool decode_jpeg_raw(const std::vector<unsigned char>& bytes, Image& out,
                     char* message) {
  jpeg_decompress_struct cinfo;
  JpegError err;
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_fail;
  if (setjmp(err.jump)) {
    std::strcpy(message, err.message);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  out.width = cinfo.output_width;
  out.height = cinfo.output_height;
  out.rgb.assign(out.width * out.height * 3, 0);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.rgb.data() + cinfo.output_scanline * out.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

}  // namespace

Image decode_image(const std::string& path) {
  const std::vector<unsigned char> bytes = read_file(path);
  static const unsigned char kPng[4] = {0x89, 'P', 'N', 'G'};
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kPng, 4) == 0) {
    return decode_png(bytes, path);
  }
  if (bytes.size() >= 2 && bytes[0] == 0xFF && bytes[1] == 0xD8) {
    Image out;
    char message[JMSG_LENGTH_MAX] = {0};
    if (!decode_jpeg_raw(bytes, out, message)) {
      throw DataError("cannot decode JPEG " + path + ": " + message);
    }
    return out;
  }
  throw DataError("unrecognised image format: " + path);
}

void write_png(const Image& image, const std::string& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.rgb.data(), 0,
                               nullptr)) {
    throw DataError("cannot write PNG " + path + ": " + img.message);
  }
}

Image resize_bilinear(const Image& image, std::size_t width,
                      std::size_t height) {
  if (image.width == 0 || image.height == 0 || width == 0 || height == 0) {
    throw DimensionError("resize of an empty image");
  }
  Image out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (std::size_t y = 0; y < height; ++y) {
    const double fy =
        std::clamp((y + 0.5) * sy - 0.5, 0.0, double(image.height - 1));
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < width; ++x) {
      const double fx =
          std::clamp((x + 0.5) * sx - 0.5, 0.0, double(image.width - 1));
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (std::size_t c = 0; c < 3; ++c) {
        auto px = [&](std::size_t yy, std::size_t xx) {
          return static_cast<double>(image.rgb[(yy * image.width + xx) * 3 + c]);
        };
        const double v = (px(y0, x0) * (1 - wx) + px(y0, x1) * wx) * (1 - wy) +
                         (px(y1, x0) * (1 - wx) + px(y1, x1) * wx) * wy;
        out.rgb[(y * width + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(v + 0.5, 0.0, 255.0));
      }
    }
  }
  return out;
}

Tensor<float> image_to_tensor(const Image& image, std::size_t size) {
  const Image r = (image.width == size && image.height == size)
                      ? image
                      : resize_bilinear(image, size, size);
  Tensor<float> t({3, size, size});
  for (std::size_t i = 0; i < size * size; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      t[c * size * size + i] = r.rgb[i * 3 + c] / 255.0f;
    }
  }
  return t;
}

Image tensor_to_image(const Tensor<float>& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) {
    throw DimensionError("tensor_to_image expects [3,H,W], got " +
                         shape_str(chw.shape()));
  }
  const std::size_t h = chw.dim(1), w = chw.dim(2);
  Image out(w, h);
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const float v = std::clamp(chw[c * h * w + i], 0.0f, 1.0f);
      out.rgb[i * 3 + c] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
    }
  }
  return out;
}

Image overlay_heatmap(const Image& base, const Tensor<float>& heatmap,
                      double alpha) {
  if (heatmap.rank() != 2 || heatmap.dim(0) != base.height ||
      heatmap.dim(1) != base.width) {
    throw DimensionError("heatmap " + shape_str(heatmap.shape()) +
                         " does not match image " + std::to_string(base.height) +
                         "x" + std::to_string(base.width));
  }
  Image out = base;
  for (std::size_t i = 0; i < base.width * base.height; ++i) {
    const double v = std::clamp<double>(heatmap[i], 0.0, 1.0);
    // Piecewise-linear jet: blue -> cyan -> yellow -> red.
    const double rgb[3] = {std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0),
                           std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0),
                           std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0)};
    for (std::size_t c = 0; c < 3; ++c) {
      const double b = base.rgb[i * 3 + c];
      out.rgb[i * 3 + c] = static_cast<std::uint8_t>(
          std::clamp((1.0 - alpha) * b + alpha * 255.0 * rgb[c] + 0.5, 0.0,
                     255.0));
    }
  }
  return out;
}

}  // namespace mpox
