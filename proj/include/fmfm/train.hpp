#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fmfm/dataset.hpp"
#include "fmfm/model.hpp"
#include "fmfm/schema.hpp"

namespace fmfm {

enum class OptimizerKind { kSGD, kAdam, kAdagrad };

std::string_view to_string(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 0.01;
  double l2_lambda = 1e-6;
  std::uint32_t epochs = 10;
  std::uint32_t batch_size = 1024;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double init_scale = 0.01;
  std::uint64_t seed = 0;

  void validate() const;

  // Flat key=value text, '#' comments allowed. Unknown keys are rejected.
  static TrainConfig parse(std::istream& in, TrainConfig base);
  static TrainConfig parse(std::istream& in);
  static TrainConfig load(const std::string& path, TrainConfig base);
  static TrainConfig load(const std::string& path);
  std::string serialize() const;
};

inline TrainConfig TrainConfig::parse(std::istream& in) { return parse(in, TrainConfig{}); }
inline TrainConfig TrainConfig::load(const std::string& path) { return load(path, TrainConfig{}); }

struct EpochStats {
  double train_logloss = 0.0;
  double valid_auc = 0.5;
  double valid_logloss = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double wall_seconds = 0.0;

  void write_csv(std::ostream& out) const;
};

// Random-normal embeddings (sigma = init_scale); field-pair matrices start at
// the identity (Full: ones on the leading diagonal of the D_k x D_l
// rectangle); linear terms and bias zero.
FmModel init_model(const ModelShape& shape, const TrainConfig& config);
FmModel init_model(const FieldSchema& schema, Variant variant,
                   const std::vector<std::uint32_t>& dims, const TrainConfig& config);

// Mean logistic loss over the batch plus l2 * ||theta||^2 (bias excluded).
double loss(const FmModel& model, std::span<const Instance> batch, double l2);
double loss(const FmModel& model, const Dataset& data, double l2);

// Exact gradient of loss(); shaped like the model.
FmModel gradients(const FmModel& model, std::span<const Instance> batch, double l2);

// Minibatch optimizer state. Rows of embeddings and per-feature linear
// weights are updated only when the batch touches them.
class Optimizer {
 public:
  Optimizer(const FmModel& model, const TrainConfig& config);

  // One minibatch step: accumulates the batch gradient, adds the penalty on
  // the touched parameters, and updates them. Returns the batch's mean data
  // loss before the update.
  double step(FmModel& model, std::span<const Instance> batch);

  std::uint64_t steps() const { return step_; }

  void write(std::ostream& out) const;
  void read(std::istream& in);

 private:
  void update(double& param, double grad, double& s1, double& s2, double lr_t) const;

  TrainConfig config_;
  std::uint64_t step_ = 0;
  FmModel grad_;
  FmModel first_;
  FmModel second_;
  std::vector<std::vector<std::uint32_t>> touched_;
};

struct TrainResult {
  FmModel model;       // best validation epoch
  TrainReport report;
  FmModel last_model;  // final epoch, pairs with the optimizer state for resuming
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

// Trains for config.epochs epochs, shuffling with config.seed, and returns
// the parameters of the epoch with the best validation AUC.
TrainResult fit(FmModel model, const DatasetSplit& split, const TrainConfig& config,
                const EpochCallback& on_epoch = {});
// Continues from existing optimizer state (e.g. a loaded checkpoint); the
// optimizer is left in its final state.
TrainResult fit(FmModel model, Optimizer& optimizer, const DatasetSplit& split,
                const TrainConfig& config, const EpochCallback& on_epoch = {});

// Checkpoint: model bytes followed by an "fmfm-optstate v1" appendix.
void save_checkpoint(const std::string& path, const FmModel& model, const Optimizer& optimizer);
std::pair<FmModel, Optimizer> load_checkpoint(const std::string& path, const TrainConfig& config);

}  // namespace fmfm
