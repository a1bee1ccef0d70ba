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

#include "mpox/data.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>

#include "mpox/random.h"

namespace mpox {

namespace fs = std::filesystem;

std::vector<int> SampleSource::labels() const {
  std::vector<int> out(size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = label(i);
  return out;
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

DatasetIndex index_dataset(const std::string& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw DataError("dataset root is not a directory: " + root);
  }
  DatasetIndex index;
  index.root = root;
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) classes.push_back(e.path());
  }
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) {
    throw DataError("dataset root has no class folders: " + root);
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const std::string name = classes[c].filename().string();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(classes[c])) {
      if (e.is_regular_file() && is_image_file(e.path())) {
        files.push_back(e.path());
      }
    }
    if (files.empty()) {
      throw DataError("class folder has no PNG/JPEG images: " +
                      classes[c].string());
    }
    std::sort(files.begin(), files.end());
    index.class_names.push_back(name);
    for (const auto& f : files) {
      index.entries.push_back(
          {fs::relative(f, root).generic_string(), static_cast<int>(c), name});
    }
  }
  return index;
}

FolderDataset::FolderDataset(const std::string& root, std::size_t image_size)
    : index_(index_dataset(root)), size_(image_size) {
  images_.reserve(index_.entries.size());
  for (const auto& e : index_.entries) {
    const Image img = decode_image((fs::path(root) / e.path).string());
    images_.push_back(resize_bilinear(img, size_, size_));
  }
}

Tensor<float> FolderDataset::image(std::size_t i) const {
  return image_to_tensor(images_.at(i), size_);
}

SyntheticDataset::SyntheticDataset(std::size_t count, std::size_t image_size,
                                   std::size_t num_classes,
                                   std::uint64_t seed)
    : size_(image_size) {
  if (num_classes < 2 || count < num_classes || image_size == 0) {
    throw ConfigError("synthetic dataset needs >= 2 classes, at least one "
                      "image per class and a positive size");
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    names_.push_back("class" + std::to_string(c));
  }
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t c = i % num_classes;
    labels_.push_back(static_cast<int>(c));
    // Class colour walks around the hue circle; stripes alternate between
    // horizontal and vertical and get finer with the class index.
    const double hue = 2.0 * std::numbers::pi * c / num_classes;
    const double mean[3] = {0.5 + 0.25 * std::cos(hue),
                            0.5 + 0.25 * std::cos(hue + 2.0944),
                            0.5 + 0.25 * std::cos(hue + 4.1888)};
    const double freq = 2.0 * std::numbers::pi * (2.0 + 3.0 * c) / image_size;
    const bool vertical = c % 2 == 1;
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double gain = rng.uniform(0.9, 1.1);
    Tensor<float> t({3, image_size, image_size});
    for (std::size_t y = 0; y < image_size; ++y) {
      for (std::size_t x = 0; x < image_size; ++x) {
        const double pos = vertical ? double(x) : double(y);
        const double stripe = 0.15 * std::sin(freq * pos + phase);
        for (std::size_t ch = 0; ch < 3; ++ch) {
          const double v =
              gain * mean[ch] + stripe + rng.normal(0.0, 0.05);
          t[(ch * image_size + y) * image_size + x] =
              static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    images_.push_back(std::move(t));
  }
}

std::vector<std::vector<std::size_t>> kfold_split(const std::vector<int>& labels,
                                                  std::size_t k,
                                                  std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i]].push_back(i);
  }
  for (const auto& [label, idx] : by_class) {
    if (idx.size() < k) {
      throw ConfigError("class " + std::to_string(label) + " has " +
                        std::to_string(idx.size()) + " samples, fewer than k=" +
                        std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t counter = 0;
  for (auto& [label, idx] : by_class) {
    rng.shuffle(idx);
    for (std::size_t i : idx) folds[counter++ % k].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

}  // namespace mpox
