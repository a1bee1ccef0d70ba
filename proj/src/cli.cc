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

#include "mpox/cli.h"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "mpox/checkpoint.h"
#include "mpox/diagnostics.h"
#include "mpox/image.h"

namespace mpox {

void RunConfig::apply(KeyValues kv) {
  model.apply(kv);
  auto take = [&kv](const std::string& key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto size_key = [&](const std::string& key, std::size_t& field) {
    if (const auto* v = take(key)) field = parse_size(key, *v), kv.erase(key);
  };
  auto real_key = [&](const std::string& key, double& field) {
    if (const auto* v = take(key)) field = parse_double(key, *v), kv.erase(key);
  };
  size_key("train.epochs", train.epochs);
  size_key("train.batch", train.batch);
  size_key("train.folds", train.folds);
  real_key("train.lr", train.optim.lr);
  real_key("train.beta1", train.optim.beta1);
  real_key("train.beta2", train.optim.beta2);
  real_key("train.eps", train.optim.eps);
  real_key("train.weight_decay", train.optim.weight_decay);
  if (const auto* v = take("run.seed")) {
    seed = parse_u64("run.seed", *v);
    kv.erase("run.seed");
  }
  if (const auto* v = take("data.root")) {
    data_root = *v;
    kv.erase("data.root");
  }
  if (!kv.empty()) {
    throw ConfigError("unknown config key '" + kv.begin()->first + "'");
  }
}

namespace {

struct Flags {
  std::string config;
  std::string data;
  std::string checkpoint;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string ablation;
  std::size_t groups = 0;
  bool cam = false;
  std::string lengths = "1024,2048,4096";
  std::string op = "scan";
  std::string out;
  std::string image;
};

RunConfig resolve(const Flags& f) {
  RunConfig rc;
  if (!f.config.empty()) rc.apply(read_key_values(f.config));
  if (f.seed_set) rc.seed = f.seed;
  if (!f.ablation.empty()) rc.model = apply_ablation(rc.model, f.ablation);
  if (f.groups) rc.model.groups = f.groups;
  if (!f.data.empty()) rc.data_root = f.data;
  rc.train.seed = rc.seed;
  rc.model.validate();
  return rc;
}

std::string human(double v, const char* unit) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v << ' ' << unit;
  return os.str();
}

// "synthetic:<count>" selects the seeded generator, anything else is a
// class-per-folder root.
std::unique_ptr<SampleSource> open_data(const RunConfig& rc) {
  if (rc.data_root.empty()) throw ConfigError("--data is required");
  const std::string prefix = "synthetic:";
  if (rc.data_root.rfind(prefix, 0) == 0) {
    const std::size_t n =
        parse_size("--data", rc.data_root.substr(prefix.size()));
    return std::make_unique<SyntheticDataset>(
        n, rc.model.input_size, std::max<std::size_t>(2, rc.model.num_classes),
        rc.seed);
  }
  return std::make_unique<FolderDataset>(rc.data_root, rc.model.input_size);
}

int cmd_summary(const Flags& f, std::ostream& out) {
  const RunConfig rc = resolve(f);
  Model<float> model(rc.model, rc.seed);
  const ModelProfile prof = profile_model(rc.model);
  out << std::left << std::setw(20) << "layer" << std::setw(16) << "output"
      << std::right << std::setw(12) << "params" << std::setw(16) << "MACs"
      << '\n';
  for (const auto& l : prof.layers) {
    std::string shape;
    for (std::size_t i = 0; i < l.output.size(); ++i) {
      shape += (i ? "x" : "") + std::to_string(l.output[i]);
    }
    out << std::left << std::setw(20) << l.name << std::setw(16) << shape
        << std::right << std::setw(12) << l.params << std::setw(16) << l.macs
        << '\n';
  }
  const std::size_t params = count_params(model);
  const FlopCount fc = count_flops(model);
  out << "params: " << params << " (" << human(params / 1e6, "M") << ")\n"
      << "MACs: " << fc.macs << " (" << human(fc.macs / 1e9, "G") << ")\n"
      << "FLOPs: " << fc.flops << " (" << human(fc.flops / 1e9, "G")
      << ", 2 x MACs)\n";
  return kExitOk;
}

void print_metrics(const Metrics& m, std::ostream& out) {
  out << std::fixed << std::setprecision(4) << "OA: " << m.oa
      << "\nSe: " << m.sensitivity() << "\nSp: " << m.specificity()
      << "\nSe_macro: " << m.se_macro << "\nSp_macro: " << m.sp_macro << '\n';
  out.unsetf(std::ios::floatfield);
}

int cmd_train(const Flags& f, std::ostream& out) {
  RunConfig rc = resolve(f);
  const auto data = open_data(rc);
  rc.model.num_classes = data->num_classes();
  const std::string dir = f.out.empty() ? "runs" : f.out;
  auto progress = [&](const EpochRecord& e) {
    out << "fold " << e.fold << " epoch " << e.epoch << '/'
        << rc.train.epochs << " train_loss " << e.train_loss << " train_oa "
        << e.train.oa;
    if (e.has_val) out << " val_loss " << e.val_loss << " val_oa " << e.val.oa;
    out << '\n';
  };
  const auto results = cross_validate(rc.model, *data, rc.train, dir, progress);
  double oa = 0.0;
  for (const auto& r : results) oa += r.final_val.metrics.oa;
  out << "mean held-out OA: " << oa / results.size() << "\nwrote " << dir
      << '\n';
  return kExitOk;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  RunConfig rc = resolve(f);
  Model<float> model = load_checkpoint<float>(f.checkpoint);
  rc.model = model.config();
  const auto data = open_data(rc);
  if (data->num_classes() != rc.model.num_classes) {
    throw ConfigError("dataset has " + std::to_string(data->num_classes()) +
                      " classes, checkpoint expects " +
                      std::to_string(rc.model.num_classes));
  }
  std::vector<std::size_t> idx(data->size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const EvalResult r = evaluate(model, *data, idx, rc.train.batch);
  out << "samples: " << idx.size() << "\nloss: " << r.loss << '\n';
  print_metrics(r.metrics, out);
  out << "confusion matrix (rows = truth):\n";
  for (std::size_t t = 0; t < r.cm.num_classes(); ++t) {
    for (std::size_t p = 0; p < r.cm.num_classes(); ++p) {
      out << (p ? " " : "") << r.cm.at(t, p);
    }
    out << '\n';
  }
  return kExitOk;
}

int cmd_infer(const Flags& f, std::ostream& out) {
  if (f.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (f.image.empty()) throw ConfigError("an image path is required");
  Model<float> model = load_checkpoint<float>(f.checkpoint);
  const Image img = decode_image(f.image);
  const Tensor<float> x = image_to_tensor(img, model.config().input_size);
  Tensor<float> probs;
  {
    NoGradGuard guard;
    const Shape s{1, 3, x.dim(1), x.dim(2)};
    probs = ops::softmax_lastdim(model.forward(Var<float>(x.reshaped(s)), false))
                .value();
  }
  if (!probs.all_finite()) throw NumericError("non-finite class scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.numel(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  out << "predicted: " << best << "\nprobabilities:";
  out << std::setprecision(6);
  for (std::size_t i = 0; i < probs.numel(); ++i) out << ' ' << probs[i];
  out << '\n';
  if (f.cam) {
    const Tensor<float> heat = grad_cam(model, x, static_cast<int>(best));
    const Tensor<float> up = upsample_bilinear(heat, img.height, img.width);
    std::string path = f.out;
    if (path.empty()) {
      std::filesystem::path p(f.image);
      path = (p.parent_path() / (p.stem().string() + "_cam.png")).string();
    }
    write_png(overlay_heatmap(img, up, 0.4), path);
    out << "cam: " << path << '\n';
  }
  return kExitOk;
}

int cmd_bench(const Flags& f, std::ostream& out) {
  if (f.op != "scan") throw ConfigError("unknown bench op '" + f.op + "'");
  const auto lengths = parse_size_list("--lengths", f.lengths);
  const std::size_t channels = 64, state = 16, repeats = 5;
  const auto rows = bench_scan(lengths, f.seed, channels, state, repeats);
  out << "op=scan channels=" << channels << " state=" << state
      << " repeats=" << repeats << " (median; one warm-up run excluded)\n";
  out << std::left << std::setw(10) << "length" << std::setw(14) << "median_ms"
      << "ratio\n";
  for (const auto& r : rows) {
    std::ostringstream ms, ratio;
    ms << std::fixed << std::setprecision(3) << r.median_seconds * 1e3;
    if (r.has_ratio) {
      ratio << std::fixed << std::setprecision(3) << r.ratio;
    } else {
      ratio << '-';
    }
    out << std::left << std::setw(10) << r.length << std::setw(14) << ms.str()
        << ratio.str() << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  auto rows = op_gradient_suite(f.seed);
  rows.push_back(model_gradient_check(f.seed));
  bool ok = true;
  for (const auto& r : rows) {
    out << std::left << std::setw(28) << r.name << std::right
        << std::scientific << std::setprecision(3) << std::setw(12)
        << r.report.max_rel_error << std::setw(7) << r.report.checked << "  "
        << (r.report.passed ? "PASS" : "FAIL") << '\n';
    ok = ok && r.report.passed;
  }
  out.unsetf(std::ios::floatfield);
  return ok ? kExitOk : kExitNumeric;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Lightweight Mamba-CNN skin lesion classifier"};
  app.require_subcommand(1);
  Flags f;
  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "key=value config file");
    sub->add_option("--seed", f.seed, "master seed")
        ->each([&f](const std::string&) { f.seed_set = true; });
    sub->add_option("--ablation", f.ablation, "model variant")
        ->check(CLI::IsMember({"basic", "vm", "vm-fusion", "g2", "g3", "g4"}));
    sub->add_option("--groups", f.groups, "VM groups per block")
        ->check(CLI::Range(1, 4));
  };
  CLI::App* summary = app.add_subcommand("summary", "shapes, params, FLOPs");
  common(summary);
  CLI::App* train = app.add_subcommand("train", "k-fold training");
  common(train);
  train->add_option("--data", f.data, "dataset root or synthetic:<count>");
  train->add_option("--out", f.out, "output directory (default runs)");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  common(eval);
  eval->add_option("--data", f.data, "dataset root or synthetic:<count>");
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  CLI::App* infer = app.add_subcommand("infer", "classify one image");
  infer->add_option("image", f.image, "PNG or JPEG image")->required();
  infer->add_option("--checkpoint", f.checkpoint, "checkpoint file");
  infer->add_flag("--cam", f.cam, "write a Grad-CAM overlay PNG");
  infer->add_option("--out", f.out, "overlay path (default <image>_cam.png)");
  CLI::App* bench = app.add_subcommand("bench", "scan timing");
  bench->add_option("--op", f.op, "operation (scan)");
  bench->add_option("--lengths", f.lengths, "comma separated lengths");
  bench->add_option("--seed", f.seed, "input seed");
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "gradient checks");
  gradcheck->add_option("--seed", f.seed, "input seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (summary->parsed()) return cmd_summary(f, out);
    if (train->parsed()) return cmd_train(f, out);
    if (eval->parsed()) return cmd_eval(f, out);
    if (infer->parsed()) return cmd_infer(f, out);
    if (bench->parsed()) return cmd_bench(f, out);
    if (gradcheck->parsed()) return cmd_gradcheck(f, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mpox
