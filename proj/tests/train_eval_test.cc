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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "mpox/data.h"
#include "mpox/image.h"
#include "mpox/metrics.h"
#include "mpox/optim.h"
#include "mpox/random.h"
#include "mpox/train.h"

namespace mpox {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mpox_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<int> labels_with_counts(const std::vector<std::size_t>& counts) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    labels.insert(labels.end(), counts[c], static_cast<int>(c));
  }
  return labels;
}

std::vector<std::size_t> fold_sizes(
    const std::vector<std::vector<std::size_t>>& folds) {
  std::vector<std::size_t> s;
  for (const auto& f : folds) s.push_back(f.size());
  return s;
}

TEST(KFold, EvenSplit) {
  const auto folds = kfold_split(labels_with_counts({5, 5}), 5, 1);
  EXPECT_EQ(fold_sizes(folds), (std::vector<std::size_t>{2, 2, 2, 2, 2}));
}

TEST(KFold, BinaryDatasetSizes) {
  const auto labels = labels_with_counts({102, 126});
  const auto folds = kfold_split(labels, 5, 42);
  EXPECT_EQ(fold_sizes(folds), (std::vector<std::size_t>{46, 46, 46, 45, 45}));
}

TEST(KFold, DisjointExhaustiveStratified) {
  const auto labels = labels_with_counts({279, 91, 107, 293});
  const auto folds = kfold_split(labels, 5, 3);
  std::set<std::size_t> seen;
  for (const auto& f : folds) {
    for (std::size_t i : f) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_EQ(seen.size(), labels.size());
  const auto sizes = fold_sizes(folds);
  EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) -
                *std::min_element(sizes.begin(), sizes.end()),
            1u);
  for (int c = 0; c < 4; ++c) {
    std::vector<std::size_t> per;
    for (const auto& f : folds) {
      per.push_back(std::count_if(f.begin(), f.end(),
                                  [&](std::size_t i) { return labels[i] == c; }));
    }
    EXPECT_LE(*std::max_element(per.begin(), per.end()) -
                  *std::min_element(per.begin(), per.end()),
              1u);
  }
}

TEST(KFold, DeterministicPerSeed) {
  const auto labels = labels_with_counts({12, 9});
  EXPECT_EQ(kfold_split(labels, 5, 7), kfold_split(labels, 5, 7));
  EXPECT_NE(kfold_split(labels, 5, 7), kfold_split(labels, 5, 8));
}

TEST(KFold, SmallClassRejected) {
  EXPECT_THROW(kfold_split(labels_with_counts({10, 4}), 5, 1), ConfigError);
}

TEST(Metrics, PerfectDiagonal) {
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 50;
  cm.at(1, 1) = 50;
  const Metrics m = evaluate_metrics(cm);
  EXPECT_EQ(m.oa, 1.0);
  EXPECT_EQ(m.sensitivity(), 1.0);
  EXPECT_EQ(m.specificity(), 1.0);
}

TEST(Metrics, HandComputedBinary) {
  // Positive class 0: TP 8, FN 2, FP 1, TN 9.
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 8;
  cm.at(0, 1) = 2;
  cm.at(1, 0) = 1;
  cm.at(1, 1) = 9;
  const Metrics m = evaluate_metrics(cm);
  EXPECT_EQ(m.sensitivity(), 0.8);
  EXPECT_EQ(m.specificity(), 0.9);
  EXPECT_EQ(m.oa, 0.85);
}

TEST(Metrics, MacroAveragesOneVsRest) {
  ConfusionMatrix cm(4);
  const int table[4][4] = {
      {10, 2, 0, 1}, {1, 7, 2, 0}, {0, 3, 9, 1}, {2, 0, 1, 12}};
  for (int t = 0; t < 4; ++t) {
    for (int p = 0; p < 4; ++p) cm.at(t, p) = table[t][p];
  }
  const Metrics m = evaluate_metrics(cm);
  double se = 0.0, sp = 0.0;
  const double total = cm.total();
  for (int c = 0; c < 4; ++c) {
    double row = 0, col = 0;
    for (int k = 0; k < 4; ++k) {
      row += table[c][k];
      col += table[k][c];
    }
    const double tp = table[c][c];
    se += tp / row;
    sp += (total - row - col + tp) / (total - row);
  }
  EXPECT_NEAR(m.sensitivity(), se / 4, 1e-15);
  EXPECT_NEAR(m.specificity(), sp / 4, 1e-15);
}

TEST(Metrics, OaIsLabelWeightedRecall) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    ConfusionMatrix cm(k);
    for (std::size_t t = 0; t < k; ++t) {
      for (std::size_t p = 0; p < k; ++p) cm.at(t, p) = 1 + rng.below(20);
    }
    const Metrics m = evaluate_metrics(cm);
    double weighted = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t row = 0;
      for (std::size_t p = 0; p < k; ++p) row += cm.at(c, p);
      weighted += m.se[c] * row;
    }
    EXPECT_NEAR(m.oa, weighted / cm.total(), 1e-12);
  }
}

TEST(Metrics, AbsentClassAndEmpty) {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 4;
  cm.at(1, 2) = 1;
  cm.at(1, 1) = 3;
  const Metrics m = evaluate_metrics(cm);
  EXPECT_TRUE(std::isnan(m.se[2]));
  EXPECT_NEAR(m.se_macro, (1.0 + 0.75) / 2, 1e-15);
  EXPECT_THROW(evaluate_metrics(ConfusionMatrix(2)), DomainError);
}

TEST(AdamW, DecoupledDecayOnly) {
  Tensor<double> w({1}, 1.0);
  AdamState<double> st;
  adamw_step(w, Tensor<double>({1}, 0.0), st, AdamWOptions{}, 1);
  EXPECT_NEAR(w[0], 1.0 - 1e-8, 1e-16);
}

TEST(AdamW, FirstStepMagnitude) {
  Tensor<double> w({1}, 0.0);
  AdamState<double> st;
  AdamWOptions opt;
  opt.weight_decay = 0.0;
  adamw_step(w, Tensor<double>({1}, 1.0), st, opt, 1);
  EXPECT_NEAR(w[0], -1e-4 / (1.0 + 1e-8), 1e-18);
}

TEST(AdamW, NoGradientNoDecayNoChange) {
  Tensor<double> w({3}, {0.3, -2.0, 5.0});
  const Tensor<double> before = w;
  AdamState<double> st;
  AdamWOptions opt;
  opt.weight_decay = 0.0;
  for (std::size_t t = 1; t <= 3; ++t) {
    adamw_step(w, Tensor<double>({3}, 0.0), st, opt, t);
  }
  EXPECT_EQ(w.storage(), before.storage());
}

TEST(AdamW, MatchesAdamFormula) {
  AdamWOptions opt;
  opt.weight_decay = 0.0;
  opt.lr = 0.01;
  Tensor<double> w({1}, 0.5);
  AdamState<double> st;
  double ref = 0.5, m = 0.0, v = 0.0;
  const double grads[] = {0.3, -1.2, 0.7, 0.05};
  for (std::size_t t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    adamw_step(w, Tensor<double>({1}, g), st, opt, t);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    EXPECT_NEAR(w[0], ref, 1e-15);
  }
}

TEST(AdamW, NonFiniteGradientNamesParameter) {
  Tensor<double> w({1}, 0.0);
  AdamState<double> st;
  try {
    adamw_step(w, Tensor<double>({1}, std::nan("")), st, AdamWOptions{}, 1,
               "stage2.block0.fuse.conv.weight");
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("stage2.block0.fuse.conv.weight"),
              std::string::npos);
  }
}

void write_solid(const fs::path& path, std::uint8_t r) {
  Image img(5, 4);
  for (std::size_t i = 0; i < img.rgb.size(); i += 3) img.rgb[i] = r;
  write_png(img, path.string());
}

TEST(Dataset, IndexesClassFolders) {
  const fs::path root = fresh_dir("index");
  fs::create_directories(root / "others");
  fs::create_directories(root / "mpox");
  for (int i = 0; i < 3; ++i) {
    write_solid(root / "mpox" / ("m" + std::to_string(i) + ".png"), 200);
  }
  for (int i = 0; i < 4; ++i) {
    write_solid(root / "others" / ("o" + std::to_string(i) + ".png"), 20);
  }
  fs::copy_file(fs::path(MPOX_TEST_DATA) / "red_4x3.jpg",
                root / "others" / "x.jpg");
  const DatasetIndex idx = index_dataset(root.string());
  EXPECT_EQ(idx.class_names, (std::vector<std::string>{"mpox", "others"}));
  ASSERT_EQ(idx.entries.size(), 8u);
  EXPECT_EQ(idx.entries.front().path, "mpox/m0.png");
  EXPECT_EQ(idx.entries.back().label, 1);
  FolderDataset data(root.string(), 16);
  EXPECT_EQ(data.size(), 8u);
  EXPECT_EQ(data.image(0).shape(), (Shape{3, 16, 16}));
  EXPECT_NEAR(data.image(0)[0], 200.0f / 255.0f, 1e-6f);
  fs::remove_all(root);
}

TEST(Dataset, Errors) {
  const fs::path root = fresh_dir("errors");
  EXPECT_THROW(index_dataset(root.string()), DataError);
  EXPECT_THROW(index_dataset((root / "missing").string()), DataError);
  fs::create_directories(root / "a");
  fs::create_directories(root / "b");
  write_solid(root / "a" / "x.png", 1);
  EXPECT_THROW(index_dataset(root.string()), DataError);
  write_solid(root / "b" / "y.png", 1);
  fs::copy_file(fs::path(MPOX_TEST_DATA) / "garbage.png", root / "b" / "z.png");
  try {
    FolderDataset data(root.string(), 16);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("z.png"), std::string::npos);
  }
  fs::remove_all(root);
}

TEST(Image, DecodesFixtures) {
  const fs::path dir(MPOX_TEST_DATA);
  const Image jpg = decode_image((dir / "red_4x3.jpg").string());
  EXPECT_EQ(jpg.width, 4u);
  EXPECT_EQ(jpg.height, 3u);
  EXPECT_GT(jpg.rgb[0], 240);
  EXPECT_LT(jpg.rgb[1], 15);
  const Image grey = decode_image((dir / "grey_2x2.png").string());
  ASSERT_EQ(grey.rgb.size(), 12u);
  EXPECT_EQ(grey.rgb[3], 64);
  EXPECT_EQ(grey.rgb[4], 64);
  const Image rgba = decode_image((dir / "rgba_3x1.png").string());
  EXPECT_EQ(rgba.rgb, (std::vector<std::uint8_t>{10, 20, 30, 10, 20, 30, 10, 20, 30}));
  EXPECT_THROW(decode_image((dir / "garbage.png").string()), DataError);
}

TEST(Image, PngRoundTripAndOverlay) {
  const fs::path dir = fresh_dir("png");
  Image img(3, 2);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = std::uint8_t(i * 13);
  write_png(img, (dir / "a.png").string());
  EXPECT_EQ(decode_image((dir / "a.png").string()).rgb, img.rgb);
  const Image over = overlay_heatmap(img, Tensor<float>({2, 3}, 0.0f), 0.4);
  EXPECT_EQ(over.width, 3u);
  EXPECT_EQ(over.height, 2u);
  // Jet at 0 is dark blue: red and green shrink to 60 %.
  EXPECT_EQ(over.rgb[3], static_cast<std::uint8_t>(std::lround(0.6 * img.rgb[3])));
  fs::remove_all(dir);
}

TEST(Image, TensorConversion) {
  Image img(2, 2);
  img.rgb = {255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255};
  const Tensor<float> t = image_to_tensor(img, 2);
  EXPECT_EQ(t.shape(), (Shape{3, 2, 2}));
  EXPECT_EQ(t.at(0, 0, 0), 1.0f);
  EXPECT_EQ(t.at(1, 0, 1), 1.0f);
  EXPECT_EQ(t.at(2, 1, 0), 1.0f);
  EXPECT_EQ(tensor_to_image(t).rgb, img.rgb);
}

TrainOptions quick_options() {
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch = 8;
  opt.folds = 2;
  opt.optim.lr = 1e-3;
  opt.seed = 4;
  return opt;
}

ModelConfig tiny_model() {
  ModelConfig cfg = ModelConfig{}.scaled(8);
  cfg.input_size = 32;
  return cfg;
}

TEST(Train, HistoryLengthAndDeterminism) {
  SyntheticDataset data(24, 32, 2, 3);
  std::vector<std::size_t> idx(24);
  for (std::size_t i = 0; i < 24; ++i) idx[i] = i;
  const TrainOptions opt = quick_options();
  Model<float> a(tiny_model(), 1), b(tiny_model(), 1);
  const auto ha = train_model(a, data, idx, nullptr, opt);
  const auto hb = train_model(b, data, idx, nullptr, opt);
  ASSERT_EQ(ha.size(), opt.epochs);
  for (std::size_t e = 0; e < ha.size(); ++e) {
    EXPECT_EQ(ha[e].epoch, e + 1);
    EXPECT_EQ(ha[e].train_loss, hb[e].train_loss);
  }
}

TEST(Train, CrossValidationOutputs) {
  SyntheticDataset data(20, 32, 2, 5);
  const fs::path dir = fresh_dir("cv");
  std::size_t calls = 0;
  const auto results = cross_validate(tiny_model(), data, quick_options(),
                                      dir.string(),
                                      [&](const EpochRecord&) { ++calls; });
  ASSERT_EQ(results.size(), 2u);
  EXPECT_EQ(calls, 6u);
  EXPECT_EQ(results[1].history.back().fold, 1u);
  for (const char* f : {"fold0.ckpt", "fold1.ckpt", "fold0_history.json",
                        "fold1_history.json", "metrics.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream csv(dir / "metrics.csv");
  std::string header, line, last;
  std::getline(csv, header);
  EXPECT_EQ(header, "fold,epoch,split,oa,se_macro,sp_macro,loss");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) last = line, ++rows;
  }
  EXPECT_EQ(rows, 2u * 3u * 2u + 1u);
  EXPECT_EQ(last.rfind("mean,", 0), 0u);
  std::ifstream js(dir / "fold0_history.json");
  const auto doc = nlohmann::json::parse(js);
  EXPECT_EQ(doc.at("epochs").size(), 3u);

  // Same seed, same checkpoint bytes.
  const fs::path dir2 = fresh_dir("cv2");
  cross_validate(tiny_model(), data, quick_options(), dir2.string());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(slurp(dir / "fold0.ckpt"), slurp(dir2 / "fold0.ckpt"));
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(Train, ClassCountMismatch) {
  SyntheticDataset data(12, 32, 3, 1);
  EXPECT_THROW(cross_validate(tiny_model(), data, quick_options(), ""),
               ConfigError);
}

}  // namespace
}  // namespace mpox
