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

#ifndef MPOX_METRICS_H_
#define MPOX_METRICS_H_

#include <cstddef>
#include <vector>

namespace mpox {

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(int truth, int predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth * k_ + predicted];
  }
  std::size_t& at(std::size_t truth, std::size_t predicted) {
    return counts_[truth * k_ + predicted];
  }
  std::size_t num_classes() const { return k_; }
  std::size_t total() const;

 private:
  std::size_t k_;
  std::vector<std::size_t> counts_;
};

// Fractions in [0, 1]. Per-class values are one-vs-rest; an undefined ratio
// (no positives or no negatives for that class) is NaN and left out of the
// macro average.
struct Metrics {
  double oa = 0.0;
  std::vector<double> se;
  std::vector<double> sp;
  double se_macro = 0.0;
  double sp_macro = 0.0;

  // Binary problems report class 0 as the positive class; multi-class
  // problems report the macro averages.
  double sensitivity() const { return se.size() == 2 ? se[0] : se_macro; }
  double specificity() const { return sp.size() == 2 ? sp[0] : sp_macro; }
};

// Throws DomainError on an empty matrix.
Metrics evaluate_metrics(const ConfusionMatrix& cm);

}  // namespace mpox

#endif  // MPOX_METRICS_H_
