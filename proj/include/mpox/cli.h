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

// Command-line front end. Exit codes: 0 success, 1 usage or configuration
// error, 2 data error (dataset, image, checkpoint), 3 numeric failure.

#ifndef MPOX_CLI_H_
#define MPOX_CLI_H_

#include <cstdint>
#include <ostream>
#include <string>

#include "mpox/model.h"
#include "mpox/train.h"

namespace mpox {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

// Everything a run can be configured with. Keys:
//   model.*                                  see ModelConfig
//   train.epochs train.batch train.folds
//   train.lr train.beta1 train.beta2 train.eps train.weight_decay
//   run.seed
//   data.root
struct RunConfig {
  ModelConfig model;
  TrainOptions train;
  std::uint64_t seed = 0;
  std::string data_root;

  // Unknown keys raise ConfigError.
  void apply(KeyValues kv);
};

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace mpox

#endif  // MPOX_CLI_H_
