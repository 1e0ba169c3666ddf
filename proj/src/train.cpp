#include "fmfm/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "fmfm/analysis.hpp"
#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"
#include "kernels.hpp"

namespace fmfm {

namespace {

constexpr std::string_view kOptKind = "fmfm-optstate";
constexpr std::string_view kOptVersion = "v1";

// log(1 + exp(-margin)) without overflow.
double softplus_neg(double margin) {
  return std::max(-margin, 0.0) + std::log1p(std::exp(-std::abs(margin)));
}

double stable_sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// dLoss/dlogit for one instance.
double loss_slope(double logit, int label) { return -label * stable_sigmoid(-label * logit); }

double squared_norm(const FmModel& model) {
  double total = 0.0;
  for (const auto& b : model.blocks()) {
    if (b.kind == BlockKind::kBias) continue;
    for (double v : b.values) total += v * v;
  }
  return total;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used == value.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kBadFormat, "config " + key + ": bad number '" + value + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(value, &used);
    if (used == value.size() && value.front() != '-') return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kBadFormat, "config " + key + ": bad integer '" + value + "'");
}

}  // namespace

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSGD: return "sgd";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kAdagrad: return "adagrad";
  }
  return "?";
}

OptimizerKind parse_optimizer(std::string_view name) {
  for (auto k : {OptimizerKind::kSGD, OptimizerKind::kAdam, OptimizerKind::kAdagrad}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be >= 0");
  if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) fail("l2_lambda must be >= 0");
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) fail("init_scale must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail("epsilon must be positive");
}

TrainConfig TrainConfig::parse(std::istream& in, TrainConfig cfg) {
  std::string line;
  while (std::getline(in, line)) {
    const auto body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::kBadFormat, "config line needs key=value");
    const auto key = trim(std::string_view(body).substr(0, eq));
    const auto value = trim(std::string_view(body).substr(eq + 1));
    if (key == "learning_rate") cfg.learning_rate = parse_double(key, value);
    else if (key == "l2_lambda") cfg.l2_lambda = parse_double(key, value);
    else if (key == "epochs") cfg.epochs = static_cast<std::uint32_t>(parse_uint(key, value));
    else if (key == "batch_size") cfg.batch_size = static_cast<std::uint32_t>(parse_uint(key, value));
    else if (key == "optimizer") cfg.optimizer = parse_optimizer(value);
    else if (key == "beta1") cfg.beta1 = parse_double(key, value);
    else if (key == "beta2") cfg.beta2 = parse_double(key, value);
    else if (key == "epsilon") cfg.epsilon = parse_double(key, value);
    else if (key == "init_scale") cfg.init_scale = parse_double(key, value);
    else if (key == "seed") cfg.seed = parse_uint(key, value);
    else throw Error(ErrorCode::kBadFormat, "unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::load(const std::string& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse(in, base);
}

std::string TrainConfig::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "learning_rate=" << learning_rate << "\nl2_lambda=" << l2_lambda << "\nepochs=" << epochs
      << "\nbatch_size=" << batch_size << "\noptimizer=" << to_string(optimizer)
      << "\nbeta1=" << beta1 << "\nbeta2=" << beta2 << "\nepsilon=" << epsilon
      << "\ninit_scale=" << init_scale << "\nseed=" << seed << '\n';
  return std::move(out).str();
}

void TrainReport::write_csv(std::ostream& out) const {
  out.precision(10);
  out << "epoch,train_logloss,valid_auc,valid_logloss,best\n";
  for (std::size_t e = 0; e < epochs.size(); ++e) {
    out << e << ',' << epochs[e].train_logloss << ',' << epochs[e].valid_auc << ','
        << epochs[e].valid_logloss << ',' << (e == best_epoch ? 1 : 0) << '\n';
  }
}

FmModel init_model(const ModelShape& shape, const TrainConfig& config) {
  config.validate();
  FmModel model(shape);
  std::mt19937_64 rng(config.seed);
  if (config.init_scale > 0.0) {
    std::normal_distribution<double> normal(0.0, config.init_scale);
    for (std::size_t f = 0; f < model.field_count(); ++f) {
      for (auto& v : model.embeddings(f).values) v = normal(rng);
    }
  }
  for (auto& pm : model.pairs()) {
    switch (pm.kind) {
      case MatrixKind::kIdentity: break;
      case MatrixKind::kScalar: pm.payload[0] = 1.0; break;
      case MatrixKind::kDiagonal: std::fill(pm.payload.begin(), pm.payload.end(), 1.0); break;
      case MatrixKind::kFull:
        std::fill(pm.payload.begin(), pm.payload.end(), 0.0);
        for (std::uint32_t i = 0; i < std::min(pm.rows, pm.cols); ++i) {
          pm.payload[std::size_t{i} * pm.cols + i] = 1.0;
        }
        break;
    }
  }
  return model;
}

FmModel init_model(const FieldSchema& schema, Variant variant,
                   const std::vector<std::uint32_t>& dims, const TrainConfig& config) {
  return init_model(ModelShape::make(variant, schema.feature_counts(), dims, schema.hash()), config);
}

double loss(const FmModel& model, std::span<const Instance> batch, double l2) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "loss needs a nonempty batch");
  double total = 0.0;
  for (const auto& inst : batch) {
    check_instance(model, inst);
    total += softplus_neg(inst.label * detail::logit(model, inst));
  }
  return total / static_cast<double>(batch.size()) + l2 * squared_norm(model);
}

double loss(const FmModel& model, const Dataset& data, double l2) {
  std::vector<Instance> batch;
  batch.reserve(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) batch.push_back(data[r]);
  return loss(model, batch, l2);
}

FmModel gradients(const FmModel& model, std::span<const Instance> batch, double l2) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyInput, "gradients need a nonempty batch");
  FmModel grad(model.shape());
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& inst : batch) {
    check_instance(model, inst);
    detail::accumulate_gradient(model, inst, scale * loss_slope(detail::logit(model, inst), inst.label),
                                grad);
  }
  const auto params = model.blocks();
  auto grads = grad.blocks();
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].kind == BlockKind::kBias) continue;
    for (std::size_t i = 0; i < params[b].values.size(); ++i) {
      grads[b].values[i] += 2.0 * l2 * params[b].values[i];
    }
  }
  return grad;
}

Optimizer::Optimizer(const FmModel& model, const TrainConfig& config)
    : config_(config), grad_(model.shape()), touched_(model.field_count()) {
  config_.validate();
  if (config_.optimizer != OptimizerKind::kSGD) first_ = FmModel(model.shape());
  if (config_.optimizer == OptimizerKind::kAdam) second_ = FmModel(model.shape());
}

void Optimizer::update(double& param, double grad, double& s1, double& s2, double lr_t) const {
  switch (config_.optimizer) {
    case OptimizerKind::kSGD:
      param -= lr_t * grad;
      break;
    case OptimizerKind::kAdagrad:
      s1 += grad * grad;
      param -= lr_t * grad / (std::sqrt(s1) + config_.epsilon);
      break;
    case OptimizerKind::kAdam:
      s1 = config_.beta1 * s1 + (1.0 - config_.beta1) * grad;
      s2 = config_.beta2 * s2 + (1.0 - config_.beta2) * grad * grad;
      param -= lr_t * s1 / (std::sqrt(s2) + config_.epsilon);
      break;
  }
}

double Optimizer::step(FmModel& model, std::span<const Instance> batch) {
  if (batch.empty()) return 0.0;
  if (!(model.shape() == grad_.shape())) {
    throw Error(ErrorCode::kSchemaMismatch, "optimizer state does not match the model shape");
  }
  const auto n = model.field_count();
  for (std::size_t f = 0; f < n; ++f) touched_[f].clear();
  for (const auto& inst : batch) {
    for (std::size_t f = 0; f < n; ++f) touched_[f].push_back(inst.features[f]);
  }
  for (auto& rows : touched_) {
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  }

  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& inst : batch) {
    const double z = detail::logit(model, inst);
    total += softplus_neg(inst.label * z);
    detail::accumulate_gradient(model, inst, scale * loss_slope(z, inst.label), grad_);
  }
  const double mean_loss = total * scale;
  if (!std::isfinite(mean_loss)) {
    throw Error(ErrorCode::kDiverged, "training loss became non-finite at step " +
                                          std::to_string(step_) +
                                          "; the learning rate is probably too high");
  }

  ++step_;
  double lr_t = config_.learning_rate;
  if (config_.optimizer == OptimizerKind::kAdam) {
    const double t = static_cast<double>(step_);
    lr_t *= std::sqrt(1.0 - std::pow(config_.beta2, t)) / (1.0 - std::pow(config_.beta1, t));
  }

  auto params = model.blocks();
  auto grads = grad_.blocks();
  std::vector<ParamBlock> s1;
  std::vector<ParamBlock> s2;
  if (config_.optimizer != OptimizerKind::kSGD) s1 = first_.blocks();
  if (config_.optimizer == OptimizerKind::kAdam) s2 = second_.blocks();
  double unused = 0.0;

  auto apply = [&](std::size_t b, std::size_t begin, std::size_t end) {
    const double l2 = params[b].kind == BlockKind::kBias ? 0.0 : 2.0 * config_.l2_lambda;
    auto& p = params[b].values;
    auto& g = grads[b].values;
    for (std::size_t i = begin; i < end; ++i) {
      double dummy1 = 0.0;
      double& a = s1.empty() ? dummy1 : s1[b].values[i];
      double& c = s2.empty() ? unused : s2[b].values[i];
      update(p[i], g[i] + l2 * p[i], a, c, lr_t);
      g[i] = 0.0;
    }
  };

  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& blk = params[b];
    if (blk.row_sparse) {
      for (auto row : touched_[blk.field]) {
        apply(b, std::size_t{row} * blk.width, std::size_t{row + 1} * blk.width);
      }
    } else {
      apply(b, 0, blk.values.size());
    }
  }
  return mean_loss;
}

void Optimizer::write(std::ostream& out) const {
  io::write_magic(out, std::string(kOptKind) + " " + std::string(kOptVersion));
  io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(config_.optimizer));
  io::write_pod<std::uint64_t>(out, step_);
  for (const auto* state : {&first_, &second_}) {
    if (state->field_count() == 0) continue;
    for (const auto& b : state->blocks()) io::write_array<double>(out, b.values);
  }
}

void Optimizer::read(std::istream& in) {
  io::expect_magic(in, kOptKind, kOptVersion);
  const auto kind = io::read_pod<std::uint8_t>(in);
  if (kind != static_cast<std::uint8_t>(config_.optimizer)) {
    throw Error(ErrorCode::kInvalidArgument, "checkpoint was written by a different optimizer");
  }
  step_ = io::read_pod<std::uint64_t>(in);
  for (auto* state : {&first_, &second_}) {
    if (state->field_count() == 0) continue;
    for (auto& b : state->blocks()) io::read_array<double>(in, b.values);
  }
}

TrainResult fit(FmModel model, const DatasetSplit& split, const TrainConfig& config,
                const EpochCallback& on_epoch) {
  Optimizer optimizer(model, config);
  return fit(std::move(model), optimizer, split, config, on_epoch);
}

TrainResult fit(FmModel model, Optimizer& optimizer, const DatasetSplit& split,
                const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (split.train.empty()) throw Error(ErrorCode::kEmptyInput, "training set is empty");
  split.train.validate(model.shape().feature_counts);
  split.validation.validate(model.shape().feature_counts);

  const auto start = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  const auto labels = split.validation.labels();
  const bool can_validate =
      std::any_of(labels.begin(), labels.end(), [](auto y) { return y > 0; }) &&
      std::any_of(labels.begin(), labels.end(), [](auto y) { return y < 0; });

  TrainResult result{model, {}, {}};
  double best_auc = -std::numeric_limits<double>::infinity();
  std::vector<Instance> batch;
  batch.reserve(config.batch_size);

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t pos = 0; pos < order.size(); pos += config.batch_size) {
      batch.clear();
      const auto end = std::min(order.size(), pos + config.batch_size);
      for (std::size_t i = pos; i < end; ++i) batch.push_back(split.train[order[i]]);
      total += optimizer.step(model, batch) * static_cast<double>(batch.size());
    }
    EpochStats stats;
    stats.train_logloss = total / static_cast<double>(order.size());
    if (can_validate) {
      const auto m = evaluate(model, split.validation);
      stats.valid_auc = m.auc;
      stats.valid_logloss = m.logloss;
    } else {
      stats.valid_auc = std::numeric_limits<double>::quiet_NaN();
      stats.valid_logloss = std::numeric_limits<double>::quiet_NaN();
    }
    result.report.epochs.push_back(stats);
    // Without a usable validation set the last epoch wins.
    if (!can_validate || stats.valid_auc > best_auc) {
      best_auc = stats.valid_auc;
      result.report.best_epoch = epoch;
      result.model = model;
    }
    if (on_epoch) on_epoch(epoch, stats);
  }
  result.last_model = std::move(model);
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

void save_checkpoint(const std::string& path, const FmModel& model, const Optimizer& optimizer) {
  std::ostringstream out(std::ios::binary);
  const auto bytes = model.serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  optimizer.write(out);
  io::write_file(path, out.str());
}

std::pair<FmModel, Optimizer> load_checkpoint(const std::string& path, const TrainConfig& config) {
  std::istringstream in(io::read_file(path), std::ios::binary);
  auto model = FmModel::read(in);
  Optimizer optimizer(model, config);
  optimizer.read(in);
  return {std::move(model), std::move(optimizer)};
}

}  // namespace fmfm
