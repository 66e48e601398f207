#include "ddsr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "ddsr/adam.hpp"
#include "ddsr/graph.hpp"
#include "ddsr/rng.hpp"

namespace ddsr {

std::string format_epoch_line(Index epoch, const EpochStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "EPOCH %lld train=%.8f rec=%.8f spatial=%.8f low=%.8f high=%.8f val=%.8f best=%s",
                static_cast<long long>(epoch), s.train, s.rec, s.spatial, s.low, s.high, s.val,
                s.best ? "true" : "false");
  return buf;
}

TrainData make_train_data(const PreparedDataset& data, Index group) {
  TrainData out;
  auto expand = [group](const std::vector<PatchPair>& patches, std::vector<Example>& dst) {
    for (const PatchPair& p : patches) {
      const auto hr_groups = group_bands(p.hr, group);
      const auto lr_groups = group_bands(p.lr, group);
      for (std::size_t g = 0; g < hr_groups.size(); ++g) {
        dst.push_back({cube_to_tensor(lr_groups[g]), cube_to_tensor(hr_groups[g])});
      }
    }
  };
  expand(data.train, out.train);
  expand(data.val, out.val);
  return out;
}

namespace {

Tensor<float> stack_examples(const std::vector<Example>& examples,
                             const std::vector<std::size_t>& order, std::size_t begin,
                             std::size_t end, bool lr) {
  const Tensor<float>& first = lr ? examples[order[begin]].lr : examples[order[begin]].hr;
  Tensor<float> out(static_cast<Index>(end - begin), first.channels(), first.height(),
                    first.width());
  const Index stride = first.channels() * first.height() * first.width();
  for (std::size_t k = begin; k < end; ++k) {
    const Tensor<float>& src = lr ? examples[order[k]].lr : examples[order[k]].hr;
    if (src.size() != stride) throw ShapeError("train: examples have inconsistent shapes");
    std::copy(src.data(), src.data() + stride, out.data() + static_cast<Index>(k - begin) * stride);
  }
  return out;
}

double validation_loss(DDSRNetParams<float>& params, const std::vector<Example>& val,
                       const LossWeights& weights, float delta) {
  double sum = 0.0;
  for (const Example& ex : val) {
    Graph<float> g;
    auto fwd = ddsrnet_forward(g, g.input(ex.lr), params);
    auto loss = hybrid_loss(g, fwd, ex.hr, weights, delta);
    sum += static_cast<double>(loss.parts.total);
  }
  return sum / static_cast<double>(val.size());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainData& data, std::ostream* log_stream) {
  cfg.validate();
  if (data.train.empty() || data.val.empty()) {
    throw ShapeError("train: train and val splits must be non-empty");
  }
  const auto t0 = std::chrono::steady_clock::now();

  DDSRNetParams<float> params = init_params<float>(cfg.model, cfg.seed);
  auto param_ptrs = params.all();
  AdamState<float> adam = make_adam(param_ptrs, static_cast<float>(cfg.lr));
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  const float delta = static_cast<float>(cfg.delta);

  TrainResult result;
  EarlyStopping stopper(cfg.min_improvement, cfg.patience);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (Index epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochStats stats;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(cfg.batch), ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
      Tensor<float> lr_batch = stack_examples(data.train, order, begin, end, true);
      Tensor<float> hr_batch = stack_examples(data.train, order, begin, end, false);

      Graph<float> g;
      auto fwd = ddsrnet_forward(g, g.input(std::move(lr_batch)), params);
      auto loss = hybrid_loss(g, fwd, hr_batch, cfg.weights, delta);
      if (!std::isfinite(static_cast<double>(loss.parts.total))) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) +
                              " batch " + std::to_string(batch_index));
      }
      params.zero_grad();
      g.backward(loss.total);
      adam_step(param_ptrs, adam);

      const double n = static_cast<double>(end - begin);
      stats.train += n * loss.parts.total;
      stats.rec += n * loss.parts.rec;
      stats.spatial += n * loss.parts.spatial;
      stats.low += n * loss.parts.low;
      stats.high += n * loss.parts.high;
    }
    const double n_train = static_cast<double>(order.size());
    stats.train /= n_train;
    stats.rec /= n_train;
    stats.spatial /= n_train;
    stats.low /= n_train;
    stats.high /= n_train;

    stats.val = validation_loss(params, data.val, cfg.weights, delta);
    if (!std::isfinite(stats.val)) {
      throw DivergenceError("train: non-finite validation loss at epoch " +
                            std::to_string(epoch));
    }
    stats.best = stopper.observe(epoch, stats.val);
    if (stats.best) {
      result.params = params;
      result.log.best_epoch = epoch;
      result.log.best_val = stats.val;
    }
    result.log.epochs.push_back(stats);
    if (log_stream != nullptr) *log_stream << format_epoch_line(epoch, stats) << '\n';
    if (stopper.should_stop(epoch)) break;
  }

  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

void clamp_unit(HyperCube& cube) {
  for (float& v : cube.values) v = std::clamp(v, 0.0f, 1.0f);
}

HyperCube strip_padding(const HyperCube& cube) {
  if (cube.original_bands == cube.bands) return cube;
  HyperCube out(cube.original_bands, cube.height, cube.width, cube.name);
  std::copy(cube.values.begin(),
            cube.values.begin() + cube.original_bands * cube.height * cube.width,
            out.values.begin());
  return out;
}

}  // namespace

EvalResult evaluate(DDSRNetParams<float>& params, const PatchPair& test, Index group) {
  const ModelConfig& cfg = params.config;
  if (cfg.channels != group) {
    throw ShapeError("evaluate: checkpoint expects " + std::to_string(cfg.channels) +
                     " channels per group but dataset groups are " + std::to_string(group));
  }
  if (test.lr.bands % group != 0) {
    throw ShapeError("evaluate: test patch has " + std::to_string(test.lr.bands) +
                     " bands, not divisible by group " + std::to_string(group));
  }
  if (test.hr.height != test.lr.height * cfg.scale || test.hr.width != test.lr.width * cfg.scale) {
    throw ShapeError("evaluate: HR/LR shapes inconsistent with scale " +
                     std::to_string(cfg.scale));
  }

  // one forward pass with the groups stacked along the batch axis
  const auto lr_groups = group_bands(test.lr, group);
  const Index n = static_cast<Index>(lr_groups.size());
  Tensor<float> x(n, group, test.lr.height, test.lr.width);
  const Index stride = group * test.lr.height * test.lr.width;
  for (Index g = 0; g < n; ++g) {
    std::copy(lr_groups[static_cast<std::size_t>(g)].values.begin(),
              lr_groups[static_cast<std::size_t>(g)].values.end(), x.data() + g * stride);
  }
  const ForwardOutputs<float> out = ddsrnet_infer(x, params);

  std::vector<HyperCube> sr_groups;
  sr_groups.reserve(static_cast<std::size_t>(n));
  for (Index g = 0; g < n; ++g) sr_groups.push_back(tensor_to_cube(out.sr, g));
  HyperCube prediction = ungroup_bands(sr_groups, test.hr.original_bands);
  clamp_unit(prediction);

  HyperCube reference = strip_padding(test.hr);

  HyperCube bicubic = strip_padding(resample_bicubic(test.lr, test.hr.height, test.hr.width));
  clamp_unit(bicubic);

  EvalResult result;
  result.model = compute_metrics(prediction, reference);
  result.bicubic = compute_metrics(bicubic, reference);
  result.prediction = std::move(prediction);
  return result;
}

std::string format_ablation_row(const AblationRow& row) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "ABLATION %-32s mpsnr=%.6f sam=%.6f params=%lld",
                row.name.c_str(), row.report.mpsnr, row.report.sam,
                static_cast<long long>(row.param_count));
  return buf;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const PreparedDataset& data,
                                      std::ostream* progress) {
  base.validate();
  if (data.test.empty()) throw ShapeError("run_ablation: dataset has no test patch");

  struct Variant {
    const char* name;
    void (*apply)(TrainConfig&);
    bool regroup;
  };
  const Variant variants[] = {
      {"without_spatial_net", [](TrainConfig& c) { c.model.use_spatial_net = false; }, false},
      {"without_wavelet_net", [](TrainConfig& c) { c.model.use_wavelet_net = false; }, false},
      {"without_shared_wavelet_branch",
       [](TrainConfig& c) { c.model.share_high_branch = false; }, false},
      {"without_band_grouping", [](TrainConfig&) {}, true},
      {"without_hybrid_loss",
       [](TrainConfig& c) {
         c.weights = LossWeights{1.0, 0.0, 0.0, 0.0};
       },
       false},
      {"ddsrnet_full", [](TrainConfig&) {}, false},
  };

  std::vector<AblationRow> rows;
  for (const Variant& v : variants) {
    TrainConfig cfg = base;
    v.apply(cfg);
    const Index group = v.regroup ? data.test[0].hr.bands : data.spec.group;
    cfg.model.channels = group;
    const TrainData td = make_train_data(data, group);
    TrainResult tr = train(cfg, td, nullptr);
    AblationRow row;
    row.name = v.name;
    row.param_count = param_count(tr.params);
    row.report = evaluate(tr.params, data.test[0], group).model;
    if (progress != nullptr) *progress << format_ablation_row(row) << '\n';
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ddsr
