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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "mpox/checkpoint.h"
#include "mpox/cli.h"
#include "mpox/config.h"
#include "mpox/image.h"

namespace mpox {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "mpox");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mpox_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

double number_after(const std::string& text, const std::string& label) {
  const auto pos = text.find(label);
  if (pos == std::string::npos) return NAN;
  return std::stod(text.substr(pos + label.size()));
}

const char* kTinyConfig =
    "# small model for fast checks\n"
    "model.input_size = 32\n"
    "model.stem_channels = 4\n"
    "model.widths = 8,16,32\n"
    "model.head_channels = 64\n"
    "run.seed = 3\n"
    "train.epochs = 1\n"
    "train.batch = 8\n"
    "train.folds = 2\n";

TEST(KeyValuesParse, Grammar) {
  std::istringstream in(
      "# comment\n\n  model.groups = 3  \nrun.seed=7 # trailing\n");
  const KeyValues kv = parse_key_values(in, "test");
  EXPECT_EQ(kv.at("model.groups"), "3");
  EXPECT_EQ(kv.at("run.seed"), "7");
  std::istringstream dup("a=1\na=2\n");
  EXPECT_THROW(parse_key_values(dup, "dup"), ConfigError);
  std::istringstream bad("no equals sign\n");
  EXPECT_THROW(parse_key_values(bad, "bad"), ConfigError);
  EXPECT_THROW(parse_size("k", "-1"), ConfigError);
  EXPECT_THROW(parse_size("k", "4x"), ConfigError);
  EXPECT_EQ(parse_size_list("k", "1, 2,3"), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_TRUE(parse_bool("k", "true"));
  EXPECT_THROW(parse_bool("k", "maybe"), ConfigError);
}

TEST(RunConfigApply, DefaultsAndUnknownKeys) {
  RunConfig rc;
  EXPECT_EQ(rc.train.epochs, 100u);
  EXPECT_EQ(rc.train.batch, 16u);
  EXPECT_EQ(rc.train.optim.lr, 1e-4);
  rc.apply({{"train.lr", "0.001"}, {"model.groups", "2"}, {"run.seed", "9"}});
  EXPECT_EQ(rc.train.optim.lr, 0.001);
  EXPECT_EQ(rc.model.groups, 2u);
  EXPECT_EQ(rc.seed, 9u);
  EXPECT_THROW(rc.apply({{"train.learning_rate", "1"}}), ConfigError);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"summary", "--groups", "7"}).code, kExitUsage);
  EXPECT_EQ(run({"summary", "--ablation", "huge"}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"bench", "--op", "conv"}).code, kExitUsage);
  EXPECT_EQ(run({"bench", "--lengths", "32"}).code, kExitUsage);
}

TEST(Cli, SummaryBudget) {
  const Result r = run({"summary"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("512x14x14"), std::string::npos);
  EXPECT_NEAR(number_after(r.out, "params: ") / 1e6, 0.77, 0.077);
  EXPECT_NEAR(number_after(r.out, "MACs: ") / 1e9, 0.53, 0.53 * 0.15);
  const Result basic = run({"summary", "--ablation", "basic"});
  EXPECT_NEAR(number_after(basic.out, "params: ") / 1e6, 0.34, 0.34 * 0.15);
}

TEST(Cli, GroupSweepIsMonotone) {
  double previous = INFINITY;
  for (const char* g : {"1", "2", "3", "4"}) {
    const Result r = run({"summary", "--groups", g});
    ASSERT_EQ(r.code, kExitOk) << r.err;
    const double p = number_after(r.out, "params: ");
    EXPECT_LT(p, previous) << g;
    previous = p;
  }
}

TEST(Cli, BadConfig) {
  const fs::path dir = fresh_dir("badcfg");
  write_text(dir / "a.cfg", "model.groups = 2\nmodel.colour = red\n");
  const Result r = run({"summary", "--config", (dir / "a.cfg").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("model.colour"), std::string::npos);
  EXPECT_EQ(run({"summary", "--config", (dir / "none.cfg").string()}).code,
            kExitUsage);
  fs::remove_all(dir);
}

TEST(Cli, BenchRowsAndRatio) {
  const Result r = run({"bench", "--op", "scan", "--lengths", "64,128,256"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    if (std::regex_search(line, std::regex("^(64|128|256) "))) ++rows;
  }
  EXPECT_EQ(rows, 3u);
  EXPECT_NE(r.out.find("warm-up"), std::string::npos);
}

TEST(Cli, TrainEvalInfer) {
  const fs::path dir = fresh_dir("flow");
  write_text(dir / "tiny.cfg", kTinyConfig);
  const std::string cfg = (dir / "tiny.cfg").string();
  const Result t = run({"train", "--config", cfg, "--data", "synthetic:16",
                        "--out", (dir / "run").string()});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_TRUE(fs::exists(dir / "run" / "metrics.csv"));
  const std::string ckpt = (dir / "run" / "fold0.ckpt").string();

  const Result e = run({"eval", "--config", cfg, "--data", "synthetic:16",
                        "--checkpoint", ckpt});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_NE(e.out.find("OA: "), std::string::npos);

  Image img(40, 30);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = i % 251;
  const std::string png = (dir / "lesion.png").string();
  write_png(img, png);
  const Result a = run({"infer", png, "--checkpoint", ckpt});
  const Result b = run({"infer", png, "--checkpoint", ckpt, "--cam", "--out",
                        (dir / "cam.png").string()});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(a.out, b.out.substr(0, a.out.size()));
  const auto pos = a.out.find("probabilities:");
  std::istringstream probs(a.out.substr(pos + 14));
  double p = 0.0, total = 0.0;
  while (probs >> p) total += p;
  EXPECT_NEAR(total, 1.0, 1e-6);
  const Image cam = decode_image((dir / "cam.png").string());
  EXPECT_EQ(cam.width, 40u);
  EXPECT_EQ(cam.height, 30u);
  fs::remove_all(dir);
}

TEST(Cli, DataErrors) {
  const fs::path dir = fresh_dir("dataerr");
  write_text(dir / "tiny.cfg", kTinyConfig);
  const std::string cfg = (dir / "tiny.cfg").string();
  EXPECT_EQ(run({"train", "--config", cfg, "--data",
                 (dir / "missing").string()})
                .code,
            kExitData);
  write_text(dir / "bad.ckpt", "MPXQ garbage");
  write_text(dir / "bad.png", "not a png");
  const Result r = run({"infer", (dir / "bad.png").string(), "--checkpoint",
                        (dir / "bad.ckpt").string()});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("magic"), std::string::npos) << r.err;
  fs::remove_all(dir);
}

}  // namespace
}  // namespace mpox
