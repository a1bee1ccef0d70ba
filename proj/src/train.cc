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

#include "mpox/train.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mpox/checkpoint.h"
#include "mpox/random.h"

namespace mpox {

namespace {

int argmax_row(const Tensor<float>& logits, std::size_t row) {
  const std::size_t k = logits.dim(1);
  const float* p = logits.raw() + row * k;
  return static_cast<int>(std::max_element(p, p + k) - p);
}

std::vector<int> batch_labels(const SampleSource& src,
                              const std::vector<std::size_t>& idx,
                              std::size_t begin, std::size_t count) {
  std::vector<int> out;
  for (std::size_t i = begin; i < begin + count; ++i) {
    out.push_back(src.label(idx[i]));
  }
  return out;
}

}  // namespace

Tensor<float> make_batch(const SampleSource& src,
                         const std::vector<std::size_t>& idx,
                         std::size_t begin, std::size_t count) {
  const std::size_t s = src.image_size();
  const std::size_t plane = 3 * s * s;
  Tensor<float> batch({count, 3, s, s});
  for (std::size_t i = 0; i < count; ++i) {
    const Tensor<float> img = src.image(idx.at(begin + i));
    std::copy_n(img.raw(), plane, batch.raw() + i * plane);
  }
  return batch;
}

EvalResult evaluate(Model<float>& model, const SampleSource& src,
                    const std::vector<std::size_t>& idx, std::size_t batch) {
  if (idx.empty()) throw DomainError("evaluate on an empty index list");
  NoGradGuard guard;
  EvalResult r;
  r.cm = ConfusionMatrix(src.num_classes());
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < idx.size(); b += batch) {
    const std::size_t n = std::min(batch, idx.size() - b);
    const std::vector<int> y = batch_labels(src, idx, b, n);
    const Var<float> logits =
        model.forward(Var<float>(make_batch(src, idx, b, n)), false);
    loss_sum += ops::cross_entropy(logits, y).value()[0] * n;
    for (std::size_t i = 0; i < n; ++i) {
      r.cm.add(y[i], argmax_row(logits.value(), i));
    }
  }
  r.loss = loss_sum / idx.size();
  r.metrics = evaluate_metrics(r.cm);
  return r;
}

std::vector<EpochRecord> train_model(Model<float>& model,
                                     const SampleSource& src,
                                     const std::vector<std::size_t>& train_idx,
                                     const std::vector<std::size_t>* val_idx,
                                     const TrainOptions& opt,
                                     const EpochCallback& on_epoch) {
  if (src.num_classes() != model.config().num_classes) {
    throw ConfigError("dataset has " + std::to_string(src.num_classes()) +
                      " classes, model expects " +
                      std::to_string(model.config().num_classes));
  }
  if (train_idx.empty() || opt.batch == 0 || opt.epochs == 0) {
    throw ConfigError("training needs samples, batch >= 1 and epochs >= 1");
  }
  AdamW<float> optim(model.parameters().params, opt.optim);
  Rng rng(opt.seed);
  std::vector<std::size_t> order = train_idx;
  std::vector<EpochRecord> history;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    ConfusionMatrix cm(src.num_classes());
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += opt.batch) {
      const std::size_t n = std::min(opt.batch, order.size() - b);
      const std::vector<int> y = batch_labels(src, order, b, n);
      optim.zero_grad();
      const Var<float> logits =
          model.forward(Var<float>(make_batch(src, order, b, n)), true);
      const Var<float> loss = ops::cross_entropy(logits, y);
      const float lv = loss.value()[0];
      if (!std::isfinite(lv)) {
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch));
      }
      loss.backward();
      optim.step();
      loss_sum += static_cast<double>(lv) * n;
      for (std::size_t i = 0; i < n; ++i) {
        cm.add(y[i], argmax_row(logits.value(), i));
      }
    }
    optim.zero_grad();
    rec.train_loss = loss_sum / order.size();
    rec.train = evaluate_metrics(cm);
    if (val_idx && !val_idx->empty()) {
      const EvalResult v = evaluate(model, src, *val_idx, opt.batch);
      rec.has_val = true;
      rec.val_loss = v.loss;
      rec.val = v.metrics;
    }
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

std::vector<FoldResult> cross_validate(const ModelConfig& cfg,
                                       const SampleSource& src,
                                       const TrainOptions& opt,
                                       const std::string& out_dir,
                                       const EpochCallback& on_epoch) {
  const auto folds = kfold_split(src.labels(), opt.folds, opt.seed);
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  std::vector<FoldResult> results;
  Rng seeds(opt.seed);
  for (std::size_t k = 0; k < folds.size(); ++k) {
    std::vector<std::size_t> train_idx;
    for (std::size_t j = 0; j < folds.size(); ++j) {
      if (j != k) {
        train_idx.insert(train_idx.end(), folds[j].begin(), folds[j].end());
      }
    }
    const std::uint64_t model_seed = seeds.next_u64();
    TrainOptions fold_opt = opt;
    fold_opt.seed = seeds.next_u64();
    Model<float> model(cfg, model_seed);
    FoldResult r;
    r.fold = k;
    EpochCallback tagged;
    if (on_epoch) {
      tagged = [&on_epoch, k](const EpochRecord& e) {
        EpochRecord rec = e;
        rec.fold = k;
        on_epoch(rec);
      };
    }
    r.history = train_model(model, src, train_idx, &folds[k], fold_opt,
                            tagged);
    for (auto& e : r.history) e.fold = k;
    r.final_val = evaluate(model, src, folds[k], opt.batch);
    if (!out_dir.empty()) {
      const std::filesystem::path dir(out_dir);
      save_checkpoint(model, (dir / ("fold" + std::to_string(k) + ".ckpt"))
                                 .string());
      std::ofstream js(dir / ("fold" + std::to_string(k) + "_history.json"));
      js << history_json(r) << '\n';
    }
    results.push_back(std::move(r));
  }
  if (!out_dir.empty()) {
    write_metrics_csv(results,
                      (std::filesystem::path(out_dir) / "metrics.csv").string());
  }
  return results;
}

void write_metrics_csv(const std::vector<FoldResult>& folds,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(6);
  out << "fold,epoch,split,oa,se_macro,sp_macro,loss\n";
  for (const auto& f : folds) {
    for (const auto& e : f.history) {
      out << f.fold << ',' << e.epoch << ",train," << e.train.oa << ','
          << e.train.se_macro << ',' << e.train.sp_macro << ',' << e.train_loss
          << '\n';
      if (e.has_val) {
        out << f.fold << ',' << e.epoch << ",val," << e.val.oa << ','
            << e.val.se_macro << ',' << e.val.sp_macro << ',' << e.val_loss
            << '\n';
      }
    }
  }
  double oa = 0, se = 0, sp = 0, loss = 0;
  for (const auto& f : folds) {
    oa += f.final_val.metrics.oa;
    se += f.final_val.metrics.se_macro;
    sp += f.final_val.metrics.sp_macro;
    loss += f.final_val.loss;
  }
  const double n = folds.empty() ? 1.0 : static_cast<double>(folds.size());
  out << "mean,,val," << oa / n << ',' << se / n << ',' << sp / n << ','
      << loss / n << '\n';
}

std::string history_json(const FoldResult& fold) {
  using nlohmann::json;
  auto metrics = [](const Metrics& m) {
    return json{{"oa", m.oa},
                {"se_macro", m.se_macro},
                {"sp_macro", m.sp_macro},
                {"se", m.se},
                {"sp", m.sp}};
  };
  json epochs = json::array();
  for (const auto& e : fold.history) {
    json rec{{"epoch", e.epoch},
             {"train_loss", e.train_loss},
             {"train", metrics(e.train)}};
    if (e.has_val) {
      rec["val_loss"] = e.val_loss;
      rec["val"] = metrics(e.val);
    }
    epochs.push_back(std::move(rec));
  }
  const ConfusionMatrix& cm = fold.final_val.cm;
  json matrix = json::array();
  for (std::size_t t = 0; t < cm.num_classes(); ++t) {
    json row = json::array();
    for (std::size_t p = 0; p < cm.num_classes(); ++p) row.push_back(cm.at(t, p));
    matrix.push_back(std::move(row));
  }
  return json{{"fold", fold.fold},
              {"epochs", std::move(epochs)},
              {"confusion_matrix", std::move(matrix)}}
      .dump(2);
}

}  // namespace mpox
