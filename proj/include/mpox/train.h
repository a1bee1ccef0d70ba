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

// Supervised training, evaluation and k-fold cross-validation in single
// precision.

#ifndef MPOX_TRAIN_H_
#define MPOX_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mpox/data.h"
#include "mpox/metrics.h"
#include "mpox/model.h"
#include "mpox/optim.h"

namespace mpox {

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch = 16;
  std::size_t folds = 5;
  AdamWOptions optim;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t fold = 0;   // set by cross_validate
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  Metrics train;  // from the training-mode predictions of the epoch
  bool has_val = false;
  double val_loss = 0.0;
  Metrics val;
};

struct EvalResult {
  double loss = 0.0;
  ConfusionMatrix cm{1};
  Metrics metrics;
};

// Optional per-epoch callback, e.g. for progress output.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Builds [B, 3, S, S] from the listed samples.
Tensor<float> make_batch(const SampleSource& src,
                         const std::vector<std::size_t>& idx,
                         std::size_t begin, std::size_t count);

// Infer-mode BN, no tape.
EvalResult evaluate(Model<float>& model, const SampleSource& src,
                    const std::vector<std::size_t>& idx, std::size_t batch);

// Trains in place; batches are reshuffled each epoch from `opt.seed`.
std::vector<EpochRecord> train_model(Model<float>& model,
                                     const SampleSource& src,
                                     const std::vector<std::size_t>& train_idx,
                                     const std::vector<std::size_t>* val_idx,
                                     const TrainOptions& opt,
                                     const EpochCallback& on_epoch = {});

struct FoldResult {
  std::size_t fold = 0;
  std::vector<EpochRecord> history;
  EvalResult final_val;
};

// For each fold: a fresh model (seed derived from opt.seed and the fold),
// trained on the other folds and evaluated on the held-out one. When
// `out_dir` is non-empty it receives fold<k>.ckpt, fold<k>_history.json and
// metrics.csv.
std::vector<FoldResult> cross_validate(const ModelConfig& cfg,
                                       const SampleSource& src,
                                       const TrainOptions& opt,
                                       const std::string& out_dir,
                                       const EpochCallback& on_epoch = {});

// "fold,epoch,split,oa,se_macro,sp_macro,loss" rows plus a final "mean" row
// over the folds' last-epoch validation metrics.
void write_metrics_csv(const std::vector<FoldResult>& folds,
                       const std::string& path);

std::string history_json(const FoldResult& fold);

}  // namespace mpox

#endif  // MPOX_TRAIN_H_
