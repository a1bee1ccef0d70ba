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

#include "mpox/metrics.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mpox/errors.h"

namespace mpox {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw ConfigError("confusion matrix with no classes");
}

void ConfusionMatrix::add(int truth, int predicted) {
  const auto k = static_cast<int>(k_);
  if (truth < 0 || truth >= k || predicted < 0 || predicted >= k) {
    throw DomainError("confusion matrix label outside [0, " +
                      std::to_string(k_) + ")");
  }
  ++counts_[static_cast<std::size_t>(truth) * k_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

Metrics evaluate_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw DomainError("metrics of an empty confusion matrix");
  const std::size_t k = cm.num_classes();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Metrics m;
  std::size_t trace = 0;
  for (std::size_t c = 0; c < k; ++c) trace += cm.at(c, c);
  m.oa = static_cast<double>(trace) / total;

  double se_sum = 0.0, sp_sum = 0.0;
  std::size_t se_n = 0, sp_n = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::size_t tp = cm.at(c, c);
    const std::size_t fn = row - tp;
    const std::size_t fp = col - tp;
    const std::size_t tn = total - tp - fn - fp;
    const double se = tp + fn ? static_cast<double>(tp) / (tp + fn) : nan;
    const double sp = tn + fp ? static_cast<double>(tn) / (tn + fp) : nan;
    m.se.push_back(se);
    m.sp.push_back(sp);
    if (!std::isnan(se)) {
      se_sum += se;
      ++se_n;
    }
    if (!std::isnan(sp)) {
      sp_sum += sp;
      ++sp_n;
    }
  }
  m.se_macro = se_n ? se_sum / se_n : nan;
  m.sp_macro = sp_n ? sp_sum / sp_n : nan;
  return m;
}

}  // namespace mpox
