#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddsr/data.hpp"
#include "ddsr/loss.hpp"
#include "ddsr/metrics.hpp"
#include "ddsr/model.hpp"
#include "ddsr/tensor.hpp"

namespace ddsr {

struct TrainConfig {
  double lr = 1e-4;
  Index batch = 4;
  Index max_epochs = 6000;
  Index patience = 200;
  std::uint64_t seed = 0;
  double delta = 1.0;
  double min_improvement = 1e-7;
  LossWeights weights;
  ModelConfig model;

  void validate() const {
    if (batch < 1) throw ShapeError("TrainConfig: batch must be >= 1");
    if (max_epochs < 1) throw ShapeError("TrainConfig: max_epochs must be >= 1");
    if (patience >= max_epochs) throw ShapeError("TrainConfig: patience must be < max_epochs");
    if (patience < 0) throw ShapeError("TrainConfig: patience must be >= 0");
    if (!(lr > 0.0)) throw ShapeError("TrainConfig: lr must be positive");
    if (!(delta > 0.0)) throw ShapeError("TrainConfig: delta must be positive");
    weights.validate();
    model.validate();
  }
};

// Improvement = validation loss decreasing by at least min_delta below the
// best seen so far; training stops once `patience` epochs pass without one.
class EarlyStopping {
 public:
  EarlyStopping(double min_delta, Index patience) : min_delta_(min_delta), patience_(patience) {}

  bool observe(Index epoch, double val) {
    if (val < best_ - min_delta_) {
      best_ = val;
      best_epoch_ = epoch;
      return true;
    }
    return false;
  }

  bool should_stop(Index epoch) const { return epoch - best_epoch_ >= patience_; }
  double best() const { return best_; }
  Index best_epoch() const { return best_epoch_; }

 private:
  double min_delta_;
  Index patience_;
  double best_ = std::numeric_limits<double>::infinity();
  Index best_epoch_ = 0;
};

struct EpochStats {
  double train = 0.0;
  double rec = 0.0;
  double spatial = 0.0;
  double low = 0.0;
  double high = 0.0;
  double val = 0.0;
  bool best = false;
};

struct TrainLog {
  std::vector<EpochStats> epochs;
  Index best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  double wall_seconds = 0.0;  // console diagnostics only, never persisted
};

std::string format_epoch_line(Index epoch, const EpochStats& s);

// One training example: a single band group of one patch.
struct Example {
  Tensor<float> lr;
  Tensor<float> hr;
};

struct TrainData {
  std::vector<Example> train;
  std::vector<Example> val;
};

TrainData make_train_data(const PreparedDataset& data, Index group);

struct TrainResult {
  DDSRNetParams<float> params;  // parameters from the best validation epoch
  TrainLog log;
};

TrainResult train(const TrainConfig& cfg, const TrainData& data,
                  std::ostream* log_stream = nullptr);

struct EvalResult {
  MetricReport model;
  MetricReport bicubic;
  HyperCube prediction;  // padded bands stripped, clamped to [0,1]
};

// Runs the model per band group over the test patch, reassembles the cube,
// strips padded bands and compares against the reference on the normalized
// scale (data_range 1).
EvalResult evaluate(DDSRNetParams<float>& params, const PatchPair& test, Index group);

struct AblationRow {
  std::string name;
  MetricReport report;
  Index param_count = 0;
};

// Trains and evaluates the five component-removed variants plus the full
// model under identical seeds.
std::vector<AblationRow> run_ablation(const TrainConfig& base, const PreparedDataset& data,
                                      std::ostream* progress = nullptr);

std::string format_ablation_row(const AblationRow& row);

}  // namespace ddsr
