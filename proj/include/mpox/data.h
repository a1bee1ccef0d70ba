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

// Sample sources (class-per-folder datasets and a synthetic generator) and
// stratified k-fold partitioning.

#ifndef MPOX_DATA_H_
#define MPOX_DATA_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mpox/image.h"
#include "mpox/tensor.h"

namespace mpox {

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t i) const = 0;
  // [3, image_size, image_size] in [0, 1].
  virtual Tensor<float> image(std::size_t i) const = 0;
  virtual std::size_t image_size() const = 0;
  virtual const std::vector<std::string>& class_names() const = 0;
  std::size_t num_classes() const { return class_names().size(); }
  std::vector<int> labels() const;
};

struct DatasetEntry {
  std::string path;  // relative to the root
  int label = 0;
  std::string class_name;
};

struct DatasetIndex {
  std::string root;
  std::vector<DatasetEntry> entries;
  std::vector<std::string> class_names;  // sorted; index == label
};

// <root>/<class>/*.png|jpg|jpeg, everything sorted by name. Throws
// DataError for a missing/empty root or an empty class folder.
DatasetIndex index_dataset(const std::string& root);

// Decodes and resizes every entry up front (kept as 8-bit RGB).
class FolderDataset : public SampleSource {
 public:
  FolderDataset(const std::string& root, std::size_t image_size);

  std::size_t size() const override { return images_.size(); }
  int label(std::size_t i) const override { return index_.entries.at(i).label; }
  Tensor<float> image(std::size_t i) const override;
  std::size_t image_size() const override { return size_; }
  const std::vector<std::string>& class_names() const override {
    return index_.class_names;
  }
  const DatasetIndex& index() const { return index_; }

 private:
  DatasetIndex index_;
  std::size_t size_;
  std::vector<Image> images_;
};

// Seeded images whose classes differ in colour and texture statistics:
// class c has its own mean colour and stripe frequency/orientation, plus
// per-image brightness jitter, random phase and pixel noise. Labels are
// balanced and interleaved.
class SyntheticDataset : public SampleSource {
 public:
  SyntheticDataset(std::size_t count, std::size_t image_size,
                   std::size_t num_classes, std::uint64_t seed);

  std::size_t size() const override { return labels_.size(); }
  int label(std::size_t i) const override { return labels_.at(i); }
  Tensor<float> image(std::size_t i) const override { return images_.at(i); }
  std::size_t image_size() const override { return size_; }
  const std::vector<std::string>& class_names() const override {
    return names_;
  }

 private:
  std::size_t size_;
  std::vector<int> labels_;
  std::vector<Tensor<float>> images_;
  std::vector<std::string> names_;
};

// Stratified split: each class is shuffled with `seed`, then samples are
// dealt round-robin with one counter running across classes (classes in
// label order). Fold index lists are sorted. Throws ConfigError if a class
// has fewer than k samples.
std::vector<std::vector<std::size_t>> kfold_split(const std::vector<int>& labels,
                                                  std::size_t k,
                                                  std::uint64_t seed);

}  // namespace mpox

#endif  // MPOX_DATA_H_
