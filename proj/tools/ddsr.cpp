#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddsr/checkpoint.hpp"
#include "ddsr/data.hpp"
#include "ddsr/manifest.hpp"
#include "ddsr/metrics.hpp"
#include "ddsr/model.hpp"
#include "ddsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace ddsr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitSpec = 3;
constexpr int kExitDiverged = 4;

KeyValues load_config_with_overrides(const std::string& path,
                                     const std::vector<std::string>& overrides) {
  KeyValues kv = path.empty() ? KeyValues{} : KeyValues::parse_file(path);
  if (const char* env_seed = std::getenv("DDSR_SEED")) {
    kv.set("seed", env_seed);
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ShapeError("--set expects key=value, got '" + ov + "'");
    }
    kv.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  return kv;
}

DatasetSpec dataset_spec_from(const KeyValues& kv) {
  DatasetSpec spec;
  spec.name = kv.get("name", "dataset");
  spec.patch = kv.get_int("patch", spec.patch);
  spec.stride = kv.get_int("stride", spec.patch);
  spec.scale = kv.get_int("scale", spec.scale);
  spec.group = kv.get_int("group", spec.group);
  spec.pad_to = kv.get_int("pad_to", 0);
  spec.crop = kv.get_int("crop", 0);
  spec.test_origin = {kv.get_int("test_origin_row", 0), kv.get_int("test_origin_col", 0)};
  spec.val_fraction = kv.get_double("val_fraction", spec.val_fraction);
  spec.seed = kv.get_uint("seed", 0);
  spec.validate();
  return spec;
}

TrainConfig train_config_from(const KeyValues& kv, const DatasetSpec& data_spec) {
  TrainConfig cfg;
  cfg.lr = kv.get_double("lr", cfg.lr);
  cfg.batch = kv.get_int("batch", cfg.batch);
  cfg.max_epochs = kv.get_int("max_epochs", cfg.max_epochs);
  cfg.patience = kv.get_int("patience", cfg.patience);
  cfg.seed = kv.get_uint("seed", 0);
  cfg.delta = kv.get_double("delta", cfg.delta);
  cfg.min_improvement = kv.get_double("min_improvement", cfg.min_improvement);
  cfg.weights.rec = kv.get_double("lambda_rec", cfg.weights.rec);
  cfg.weights.spatial = kv.get_double("lambda_spatial", cfg.weights.spatial);
  cfg.weights.low = kv.get_double("lambda_low", cfg.weights.low);
  cfg.weights.high = kv.get_double("lambda_high", cfg.weights.high);
  cfg.model.hidden = kv.get_int("hidden", cfg.model.hidden);
  cfg.model.use_spatial_net = kv.get_bool("use_spatial_net", true);
  cfg.model.use_wavelet_net = kv.get_bool("use_wavelet_net", true);
  cfg.model.share_high_branch = kv.get_bool("share_high_branch", true);
  cfg.model.scale = data_spec.scale;
  cfg.model.channels = data_spec.group;
  return cfg;
}

void apply_ablation(const std::string& flag, TrainConfig& cfg, Index full_bands) {
  if (flag.empty() || flag == "none") return;
  if (flag == "no-spatial") {
    cfg.model.use_spatial_net = false;
  } else if (flag == "no-wavelet") {
    cfg.model.use_wavelet_net = false;
  } else if (flag == "no-shared-branch") {
    cfg.model.share_high_branch = false;
  } else if (flag == "no-grouping") {
    cfg.model.channels = full_bands;
  } else if (flag == "no-hybrid-loss") {
    cfg.weights = LossWeights{1.0, 0.0, 0.0, 0.0};
  } else {
    throw ShapeError("unknown --ablation flag '" + flag +
                     "' (expected no-spatial, no-wavelet, no-shared-branch, no-grouping, "
                     "no-hybrid-loss)");
  }
}

void write_resolved_config(const TrainConfig& cfg, Index group, Index scale,
                           const fs::path& path) {
  KeyValues kv;
  kv.set_double("lr", cfg.lr);
  kv.set_int("batch", cfg.batch);
  kv.set_int("max_epochs", cfg.max_epochs);
  kv.set_int("patience", cfg.patience);
  kv.set_uint("seed", cfg.seed);
  kv.set_double("delta", cfg.delta);
  kv.set_double("min_improvement", cfg.min_improvement);
  kv.set_double("lambda_rec", cfg.weights.rec);
  kv.set_double("lambda_spatial", cfg.weights.spatial);
  kv.set_double("lambda_low", cfg.weights.low);
  kv.set_double("lambda_high", cfg.weights.high);
  kv.set_int("hidden", cfg.model.hidden);
  kv.set_int("channels", cfg.model.channels);
  kv.set_int("group", group);
  kv.set_int("scale", scale);
  kv.set_bool("use_spatial_net", cfg.model.use_spatial_net);
  kv.set_bool("use_wavelet_net", cfg.model.use_wavelet_net);
  kv.set_bool("share_high_branch", cfg.model.share_high_branch);
  kv.write_file(path);
}

int cmd_prepare(const std::string& input, const std::string& config, const std::string& out,
                const std::vector<std::string>& overrides) {
  const KeyValues kv = load_config_with_overrides(config, overrides);
  const DatasetSpec spec = dataset_spec_from(kv);
  const HyperCube raw = load_cube(input);
  const PreparedDataset data = prepare_dataset(raw, spec);
  write_prepared(data, out);
  std::printf("prepared %zu train / %zu val / %zu test patches -> %s\n", data.train.size(),
              data.val.size(), data.test.size(), out.c_str());
  return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& config, const std::string& out,
              const std::string& ablation, const std::vector<std::string>& overrides) {
  const PreparedDataset data = load_prepared(data_dir);
  const KeyValues kv = load_config_with_overrides(config, overrides);
  TrainConfig cfg = train_config_from(kv, data.spec);
  apply_ablation(ablation, cfg, data.test[0].hr.bands);

  const Index group = cfg.model.channels;
  const TrainData td = make_train_data(data, group);
  fs::create_directories(out);
  write_resolved_config(cfg, group, cfg.model.scale, fs::path(out) / "config_resolved.txt");

  std::ofstream log(fs::path(out) / "train_log.txt", std::ios::binary);
  if (!log) throw IoError("cannot write train log");
  TrainResult result = train(cfg, td, &log);
  save_checkpoint(result.params, fs::path(out) / "checkpoint.ddsr");
  std::fprintf(stderr, "trained %zu epochs (best %lld, val %.8f) in %.1fs\n",
               result.log.epochs.size(), static_cast<long long>(result.log.best_epoch),
               result.log.best_val, result.log.wall_seconds);
  std::printf("checkpoint: %s\n", (fs::path(out) / "checkpoint.ddsr").string().c_str());
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir) {
  const PreparedDataset data = load_prepared(data_dir);
  DDSRNetParams<float> params = load_checkpoint(checkpoint, data.spec.scale);
  EvalResult result = evaluate(params, data.test[0], params.config.channels);
  std::fputs(metrics_block(result.model).c_str(), stdout);
  std::printf("%s\n", metrics_line(result.model).c_str());
  std::printf("%s\n", metrics_line(result.bicubic, "METRICS_BICUBIC").c_str());
  return kExitOk;
}

int cmd_sr(const std::string& checkpoint, const std::string& input, Index scale,
           const std::string& out) {
  DDSRNetParams<float> params = load_checkpoint(checkpoint, scale);
  HyperCube lr = load_cube(input);
  const Index group = params.config.channels;
  const Index padded = ((lr.bands + group - 1) / group) * group;
  pad_bands(lr, padded);

  const auto groups = group_bands(lr, group);
  const Index n = static_cast<Index>(groups.size());
  Tensor<float> x(n, group, lr.height, lr.width);
  const Index stride = group * lr.height * lr.width;
  for (Index g = 0; g < n; ++g) {
    std::copy(groups[static_cast<std::size_t>(g)].values.begin(),
              groups[static_cast<std::size_t>(g)].values.end(), x.data() + g * stride);
  }
  const ForwardOutputs<float> fwd = ddsrnet_infer(x, params);
  std::vector<HyperCube> sr_groups;
  for (Index g = 0; g < n; ++g) sr_groups.push_back(tensor_to_cube(fwd.sr, g));
  HyperCube sr = ungroup_bands(sr_groups, lr.original_bands);
  for (float& v : sr.values) v = std::clamp(v, 0.0f, 1.0f);
  sr.name = lr.name + "_sr";
  save_cube(sr, out);
  std::printf("wrote %lldx%lldx%lld cube -> %s\n", static_cast<long long>(sr.bands),
              static_cast<long long>(sr.height), static_cast<long long>(sr.width), out.c_str());
  return kExitOk;
}

int cmd_ablate(const std::string& data_dir, const std::string& config, const std::string& out,
               const std::vector<std::string>& overrides) {
  const PreparedDataset data = load_prepared(data_dir);
  const KeyValues kv = load_config_with_overrides(config, overrides);
  const TrainConfig base = train_config_from(kv, data.spec);
  const auto rows = run_ablation(base, data, &std::cerr);
  fs::create_directories(out);
  std::ofstream table(fs::path(out) / "ablation_table.txt", std::ios::binary);
  if (!table) throw IoError("cannot write ablation table");
  for (const AblationRow& row : rows) {
    const std::string line = format_ablation_row(row);
    table << line << '\n';
    std::printf("%s\n", line.c_str());
  }
  return kExitOk;
}

int cmd_info(const std::string& input) {
  std::ifstream is(input, std::ios::binary);
  if (!is) throw IoError("cannot open: " + input);
  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  is.close();
  const std::string tag(magic, 4);
  if (tag == "HSR1") {
    const HyperCube cube = load_cube(input);
    float lo = cube.values.empty() ? 0.0f : cube.values[0], hi = lo;
    for (float v : cube.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    std::printf("HSR1 cube: %s\nbands: %lld (original %lld)\nheight: %lld\nwidth: %lld\n"
                "value range: [%g, %g]\n",
                input.c_str(), static_cast<long long>(cube.bands),
                static_cast<long long>(cube.original_bands), static_cast<long long>(cube.height),
                static_cast<long long>(cube.width), lo, hi);
    return kExitOk;
  }
  if (tag == "DDSR") {
    const auto entries = read_checkpoint(input);
    Index total = 0;
    std::printf("DDSR checkpoint: %s\n", input.c_str());
    for (const auto& e : entries) {
      std::printf("  %-24s %s\n", e.name.c_str(), shape_str(e.value.shape()).c_str());
      total += e.value.size();
    }
    std::printf("parameters: %lld\n", static_cast<long long>(total));
    return kExitOk;
  }
  throw IoError("unrecognized file format (expected HSR1 cube or DDSR checkpoint): " + input);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DDSRNet: dual-domain hyperspectral single-image super-resolution"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::string input, config, out, data_dir, checkpoint, ablation;
  std::vector<std::string> overrides;
  Index scale = 2;

  auto* prepare = app.add_subcommand("prepare", "Patch, degrade and split a hyperspectral cube");
  prepare->add_option("--input", input, "input cube (HSR1)")->required();
  prepare->add_option("--config", config, "dataset manifest (key=value)")->required();
  prepare->add_option("--out", out, "output directory")->required();
  prepare->add_option("--set", overrides, "override config keys (key=value)");

  auto* train = app.add_subcommand("train", "Train DDSRNet on a prepared dataset");
  train->add_option("--data", data_dir, "prepared dataset directory")->required();
  train->add_option("--config", config, "training config (key=value)");
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--ablation", ablation,
                    "variant: no-spatial|no-wavelet|no-shared-branch|no-grouping|no-hybrid-loss");
  train->add_option("--set", overrides, "override config keys (key=value)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test patch");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "prepared dataset directory")->required();

  auto* sr = app.add_subcommand("sr", "Super-resolve a low-resolution cube");
  sr->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  sr->add_option("--input", input, "LR cube (HSR1, normalized to [0,1])")->required();
  sr->add_option("--scale", scale, "upscaling factor")->required();
  sr->add_option("--out", out, "output cube path")->required();

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate all ablation variants");
  ablate->add_option("--data", data_dir, "prepared dataset directory")->required();
  ablate->add_option("--config", config, "training config (key=value)");
  ablate->add_option("--out", out, "output directory")->required();
  ablate->add_option("--set", overrides, "override config keys (key=value)");

  auto* info = app.add_subcommand("info", "Describe an HSR1 cube or DDSR checkpoint");
  info->add_option("--input", input, "file to inspect")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed()) return cmd_prepare(input, config, out, overrides);
    if (train->parsed()) return cmd_train(data_dir, config, out, ablation, overrides);
    if (eval->parsed()) return cmd_eval(checkpoint, data_dir);
    if (sr->parsed()) return cmd_sr(checkpoint, input, scale, out);
    if (ablate->parsed()) return cmd_ablate(data_dir, config, out, overrides);
    if (info->parsed()) return cmd_info(input);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSpec;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}
