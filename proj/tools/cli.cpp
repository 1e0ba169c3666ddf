#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "fmfm/analysis.hpp"
#include "fmfm/binary_io.hpp"
#include "fmfm/cache.hpp"
#include "fmfm/error.hpp"
#include "fmfm/ingest.hpp"
#include "fmfm/reduce.hpp"
#include "fmfm/synth.hpp"
#include "fmfm/train.hpp"

namespace fmfm::cli {

namespace {

using json = nlohmann::ordered_json;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return in;
}

std::string split_path(const std::string& prefix, std::string_view part) {
  return prefix + "." + std::string(part) + ".bin";
}

void check_schema(std::uint64_t expected, std::uint64_t actual, std::string_view what) {
  if (expected != actual) {
    throw Error(ErrorCode::kSchemaMismatch, std::string(what) + " was built for schema " +
                                                io::hex64(actual) + ", not " + io::hex64(expected));
  }
}

std::vector<std::uint32_t> parse_uint_list(const std::string& text) {
  std::vector<std::uint32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidArgument, "bad integer list entry '" + item + "'");
    }
  }
  return out;
}

// Holds either a full model or a cache for evaluate/predict.
struct Scorer {
  std::optional<FmModel> model;
  std::optional<AnyCachedModel> cache;

  static Scorer open(const std::string& model_path, const std::string& cache_path) {
    Scorer s;
    if (!model_path.empty()) s.model = FmModel::load(model_path);
    if (!cache_path.empty()) s.cache = AnyCachedModel::load(cache_path);
    if (s.model.has_value() == s.cache.has_value()) {
      throw Error(ErrorCode::kInvalidArgument, "give exactly one of --model or --cache");
    }
    return s;
  }

  std::uint64_t schema_hash() const {
    return model ? model->shape().schema_hash : cache->schema_hash();
  }

  std::vector<double> logits(const Dataset& data, unsigned threads) const {
    if (model) {
      data.validate(model->shape().feature_counts);
      return score_all(*model, data, threads);
    }
    return cache->score_all(data);
  }
};

struct Common {
  std::string schema_path;
  unsigned threads = 1;
  bool deterministic = false;
  bool as_json = false;

  unsigned effective_threads() const { return deterministic ? 1u : std::max(1u, threads); }
};

// --- schema-build / encode / split ---------------------------------------

struct SchemaBuildArgs {
  std::string format = "criteo";
  std::string input;
  std::string out;
  std::uint32_t min_freq = 1;
  std::string count_on = "all";
  std::uint64_t seed = 0;
};

void cmd_schema_build(const SchemaBuildArgs& a, std::ostream& out) {
  if (a.count_on != "all" && a.count_on != "train") {
    throw Error(ErrorCode::kInvalidArgument, "--count-on must be all or train");
  }
  auto in = open_in(a.input);
  RawReader reader(parse_data_format(a.format), in);
  SchemaBuilder builder(reader.field_specs(a.min_freq));
  SplitAssigner assigner(a.seed);
  RawRow row;
  std::uint64_t rows = 0;
  while (reader.next(row)) {
    ++rows;
    // The draw happens for every accepted row so the sequence lines up with `split`.
    const bool in_train = assigner.next() == SplitPart::kTrain;
    if (a.count_on == "all" || in_train) builder.add_row(row.tokens);
  }
  const auto schema = builder.finish();
  schema.save(a.out);
  out << "rows\t" << rows << "\nrejected\t" << reader.rejected() << "\nfields\t"
      << schema.field_count() << "\nfeatures\t" << schema.total_features() << "\nschema_hash\t"
      << io::hex64(schema.hash()) << '\n';
}

struct EncodeArgs {
  std::string format = "criteo";
  std::string input;
  std::string out;
};

void cmd_encode(const EncodeArgs& a, const Common& c, std::ostream& out) {
  const auto schema = FieldSchema::load(c.schema_path);
  auto in = open_in(a.input);
  RawReader reader(parse_data_format(a.format), in);
  if (reader.field_names() != schema.field_names()) {
    throw Error(ErrorCode::kSchemaMismatch, "input fields do not match the schema's fields");
  }
  Dataset data(schema.field_count());
  RawRow row;
  while (reader.next(row)) data.push(encode_row(schema, row));
  data.save(a.out);
  out << "rows\t" << data.size() << "\nrejected\t" << reader.rejected() << '\n';
}

struct SplitArgs {
  std::string input;
  std::string prefix;
  std::uint64_t seed = 0;
};

void cmd_split(const SplitArgs& a, std::ostream& out) {
  const auto data = Dataset::load(a.input);
  const auto split = split_dataset(data, a.seed);
  split.train.save(split_path(a.prefix, "train"));
  split.validation.save(split_path(a.prefix, "valid"));
  split.test.save(split_path(a.prefix, "test"));
  out << "train\t" << split.train.size() << "\nvalid\t" << split.validation.size() << "\ntest\t"
      << split.test.size() << '\n';
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string train;
  std::string valid;
  std::string test;
  std::string out;
  std::string variant = "fmfm";
  std::uint32_t dim = 16;
  std::string dims_file;
  std::string matrix_kind;
  std::string linear;
  std::string config_file;
  std::string checkpoint;
  std::string resume;
  std::string report;
  TrainConfig config;
  std::string optimizer = "adam";
};

ModelShape train_shape(const TrainArgs& a, const FieldSchema& schema) {
  auto variant = parse_variant(a.variant);
  std::vector<std::uint32_t> dims(schema.field_count(), a.dim);
  if (!a.dims_file.empty()) {
    const auto plan = DimsPlan::load(a.dims_file);
    if (plan.dims.size() != schema.field_count()) {
      throw Error(ErrorCode::kSchemaMismatch, "dims file has " + std::to_string(plan.dims.size()) +
                                                  " fields, schema has " +
                                                  std::to_string(schema.field_count()));
    }
    dims = plan.dims;
  }
  auto shape = ModelShape::make(variant, schema.feature_counts(), dims, schema.hash());
  if (!a.matrix_kind.empty()) {
    if (variant != Variant::kFmFM) {
      throw Error(ErrorCode::kInvalidArgument, "--matrix-kind only applies to --variant fmfm");
    }
    shape.kind = parse_matrix_kind(a.matrix_kind);
    // An explicit kind collapses to the matching variant, linear term included.
    shape.linear = shape.kind == MatrixKind::kIdentity ? LinearMode::kPerFeature
                                                       : LinearMode::kFieldShared;
  }
  if (!a.linear.empty()) {
    if (variant == Variant::kLR || variant == Variant::kFFM) {
      throw Error(ErrorCode::kInvalidArgument, "--linear does not apply to lr or ffm");
    }
    shape.linear = parse_linear_mode(a.linear);
  }
  shape.validate();
  return shape;
}

void cmd_train(TrainArgs a, const Common& c, CLI::App& sub, std::ostream& out) {
  TrainConfig config = a.config;
  if (!a.config_file.empty()) {
    // Flags given on the command line override the file.
    config = TrainConfig::load(a.config_file, TrainConfig{});
    auto given = [&](const char* name) { return sub.count(name) > 0; };
    if (given("--lr")) config.learning_rate = a.config.learning_rate;
    if (given("--l2")) config.l2_lambda = a.config.l2_lambda;
    if (given("--epochs")) config.epochs = a.config.epochs;
    if (given("--batch")) config.batch_size = a.config.batch_size;
    if (given("--init-scale")) config.init_scale = a.config.init_scale;
    if (given("--seed")) config.seed = a.config.seed;
    if (given("--optimizer")) config.optimizer = parse_optimizer(a.optimizer);
  } else {
    config.optimizer = parse_optimizer(a.optimizer);
  }
  config.validate();

  const auto schema = FieldSchema::load(c.schema_path);
  DatasetSplit split;
  split.train = Dataset::load(a.train);
  if (!a.valid.empty()) split.validation = Dataset::load(a.valid);
  else split.validation = Dataset(schema.field_count());

  std::optional<Optimizer> optimizer;
  FmModel model;
  if (!a.resume.empty()) {
    auto [m, opt] = load_checkpoint(a.resume, config);
    check_schema(schema.hash(), m.shape().schema_hash, "checkpoint");
    model = std::move(m);
    optimizer.emplace(std::move(opt));
  } else {
    model = init_model(train_shape(a, schema), config);
    optimizer.emplace(model, config);
  }

  auto on_epoch = [&](std::size_t epoch, const EpochStats& s) {
    out << "epoch\t" << epoch << "\ttrain_logloss\t" << std::setprecision(6) << s.train_logloss
        << "\tvalid_auc\t" << s.valid_auc << "\tvalid_logloss\t" << s.valid_logloss << '\n';
  };
  auto result = fit(std::move(model), *optimizer, split, config, on_epoch);
  result.model.save(a.out);
  if (!a.checkpoint.empty()) save_checkpoint(a.checkpoint, result.last_model, *optimizer);
  if (!a.report.empty()) {
    std::ofstream rep(a.report);
    if (!rep) throw Error(ErrorCode::kIo, "cannot write " + a.report);
    result.report.write_csv(rep);
  }
  out << "best_epoch\t" << result.report.best_epoch << "\nmodel_hash\t"
      << io::hex64(result.model.hash()) << '\n';
  if (!a.test.empty()) {
    const auto test = Dataset::load(a.test);
    const auto m = evaluate(result.model, test, c.effective_threads());
    out << std::setprecision(6) << "test_auc\t" << m.auc << "\ntest_logloss\t" << m.logloss << '\n';
  }
}

// --- evaluate / predict -------------------------------------------------------

struct ScoreArgs {
  std::string model;
  std::string cache;
  std::string data;
  std::string out;
};

void cmd_evaluate(const ScoreArgs& a, const Common& c, std::ostream& out) {
  const auto scorer = Scorer::open(a.model, a.cache);
  if (!c.schema_path.empty()) {
    check_schema(FieldSchema::load(c.schema_path).hash(), scorer.schema_hash(),
                 a.model.empty() ? "cache" : "model");
  }
  const auto data = Dataset::load(a.data);
  const auto m = evaluate_logits(scorer.logits(data, c.effective_threads()), data.labels());
  if (c.as_json) {
    out << json{{"auc", m.auc}, {"logloss", m.logloss}, {"rows", data.size()}}.dump() << '\n';
  } else {
    out << std::setprecision(10) << "auc\t" << m.auc << "\nlogloss\t" << m.logloss << "\nrows\t"
        << data.size() << '\n';
  }
}

void cmd_predict(const ScoreArgs& a, const Common& c, std::ostream& out) {
  const auto scorer = Scorer::open(a.model, a.cache);
  if (!c.schema_path.empty()) {
    check_schema(FieldSchema::load(c.schema_path).hash(), scorer.schema_hash(),
                 a.model.empty() ? "cache" : "model");
  }
  const auto data = Dataset::load(a.data);
  const auto logits = scorer.logits(data, c.effective_threads());
  std::ostringstream text;
  text << std::setprecision(17);
  for (double z : logits) text << sigmoid(z) << '\n';
  if (a.out.empty()) out << text.str();
  else io::write_file(a.out, text.str());
}

// --- reduce / cache -----------------------------------------------------------

struct ReduceArgs {
  std::string model;
  std::string out;
  double variance = 0.95;
  bool weighted = false;
  std::string train;
};

void cmd_reduce(const ReduceArgs& a, std::ostream& out) {
  const auto model = FmModel::load(a.model);
  PcaOptions options;
  if (a.weighted) {
    if (a.train.empty()) throw Error(ErrorCode::kInvalidArgument, "--weighted needs --train");
    const auto train = Dataset::load(a.train);
    train.validate(model.shape().feature_counts);
    options.weights = feature_frequencies(train, model.shape().feature_counts);
  }
  const auto plan = pca_field_dims(model, a.variance, options);
  plan.save(a.out);
  out << "dims";
  for (auto d : plan.dims) out << '\t' << d;
  out << "\nmean_dim\t" << std::setprecision(6) << plan.mean_dim() << '\n';
}

struct CacheArgs {
  std::string model;
  std::string out;
  int precision = 32;
  std::string tie = "lower-index";
};

void cmd_cache(const CacheArgs& a, std::ostream& out) {
  const auto model = FmModel::load(a.model);
  if (a.precision != 32 && a.precision != 64) {
    throw Error(ErrorCode::kInvalidArgument, "--precision must be 32 or 64");
  }
  CacheTieBreak tie;
  if (a.tie == "lower-index") tie = CacheTieBreak::kLowerFieldIndex;
  else if (a.tie == "more-features") tie = CacheTieBreak::kMoreFeatures;
  else throw Error(ErrorCode::kInvalidArgument, "--tie must be lower-index or more-features");
  const auto cm = AnyCachedModel::build(
      model, a.precision == 32 ? CachePrecision::k32 : CachePrecision::k64, tie);
  cm.save(a.out);
  out << "pair_table_size\t" << cm.pair_table_size() << "\nflops_per_instance\t"
      << cm.flops_per_instance() << '\n';
}

// --- flops / params / mi -------------------------------------------------------

struct CountArgs {
  std::string variant = "fmfm";
  std::uint64_t m = 0;
  std::uint64_t n = 0;
  std::uint64_t k = 16;
  std::string dims_file;
  std::string dims_list;
  std::string linear;
  bool cached = false;
};

std::optional<std::vector<std::uint32_t>> count_dims(const CountArgs& a) {
  if (!a.dims_file.empty() && !a.dims_list.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "give --dims or --dims-list, not both");
  }
  if (!a.dims_file.empty()) return DimsPlan::load(a.dims_file).dims;
  if (!a.dims_list.empty()) return parse_uint_list(a.dims_list);
  return std::nullopt;
}

LinearMode count_linear(const CountArgs& a) {
  return a.linear.empty() ? LinearMode::kPerFeature : parse_linear_mode(a.linear);
}

void emit_count(std::string_view key, std::uint64_t value, const Common& c, std::ostream& out) {
  if (c.as_json) out << json{{std::string(key), value}}.dump() << '\n';
  else out << value << '\n';
}

void cmd_flops(const CountArgs& a, const Common& c, std::ostream& out) {
  const auto v = parse_variant(a.variant);
  const auto linear = count_linear(a);
  std::uint64_t flops;
  if (auto dims = count_dims(a)) flops = estimate_flops(v, *dims, a.cached, linear);
  else flops = estimate_flops(v, a.n, a.k, a.cached, linear);
  emit_count("flops", flops, c, out);
}

void cmd_params(const CountArgs& a, const Common& c, std::ostream& out) {
  const auto v = parse_variant(a.variant);
  const auto linear = count_linear(a);
  auto dims = count_dims(a);
  std::uint64_t params;
  if (!c.schema_path.empty() || dims) {
    if (c.schema_path.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "per-field parameter counts need --schema");
    }
    const auto schema = FieldSchema::load(c.schema_path);
    if (!dims) dims.emplace(schema.field_count(), static_cast<std::uint32_t>(a.k));
    params = count_params(v, schema.feature_counts(), *dims, linear);
  } else {
    params = count_params(v, a.m, a.n, a.k, linear);
  }
  emit_count("params", params, c, out);
}

struct MiArgs {
  std::string data;
  std::string out;
  std::string dims_file;
};

void cmd_mi(const MiArgs& a, const Common& c, std::ostream& out) {
  const auto data = Dataset::load(a.data);
  const auto mi = mi_matrix(data);
  std::optional<double> rho;
  if (!a.dims_file.empty()) {
    const auto plan = DimsPlan::load(a.dims_file);
    if (plan.dims.size() != data.field_count()) {
      throw Error(ErrorCode::kSchemaMismatch, "dims file does not match the data's field count");
    }
    rho = upper_triangle_spearman(mi, cross_dim_map(plan.dims));
  }
  if (!a.out.empty()) {
    std::ofstream csv(a.out);
    if (!csv) throw Error(ErrorCode::kIo, "cannot write " + a.out);
    mi.write_csv(csv);
  }
  if (c.as_json) {
    json j;
    j["fields"] = mi.n;
    json rows = json::array();
    for (std::size_t k = 0; k < mi.n; ++k) {
      json row = json::array();
      for (std::size_t l = 0; l < mi.n; ++l) row.push_back(mi.at(k, l));
      rows.push_back(std::move(row));
    }
    j["mi_bits"] = std::move(rows);
    if (rho) j["spearman_vs_cross_dim"] = *rho;
    out << j.dump() << '\n';
  } else {
    if (a.out.empty()) mi.write_csv(out);
    if (rho) out << "spearman_vs_cross_dim\t" << std::setprecision(6) << *rho << '\n';
  }
}

// --- synth -----------------------------------------------------------------------

struct SynthArgs {
  std::string prefix;
  bool benchmark = false;
  std::string vocab = "100,100,100,100";
  std::string truth_dims = "4,4,4,4";
  std::string truth_kind = "full";
  SynthSpec spec;
};

void cmd_synth(SynthArgs a, CLI::App& sub, std::ostream& out) {
  SynthSpec spec = a.spec;
  if (a.benchmark) {
    spec = SynthSpec::benchmark(a.spec.seed);
    auto given = [&](const char* name) { return sub.count(name) > 0; };
    if (given("--samples")) spec.samples = a.spec.samples;
    if (given("--noise")) spec.noise_rate = a.spec.noise_rate;
  } else {
    spec.vocab_sizes = parse_uint_list(a.vocab);
    spec.truth_dims = parse_uint_list(a.truth_dims);
    spec.truth_kind = parse_matrix_kind(a.truth_kind);
  }
  const auto data = generate(spec);
  data.schema.save(a.prefix + ".schema");
  data.split.train.save(split_path(a.prefix, "train"));
  data.split.validation.save(split_path(a.prefix, "valid"));
  data.split.test.save(split_path(a.prefix, "test"));
  const auto truth = evaluate(data.truth, data.split.test);
  out << "train\t" << data.split.train.size() << "\nvalid\t" << data.split.validation.size()
      << "\ntest\t" << data.split.test.size() << "\nunseen_validation_pairs\t"
      << data.unseen_validation_pairs << "\ntruth_test_auc\t" << std::setprecision(6) << truth.auc
      << "\nschema_hash\t" << io::hex64(data.schema.hash()) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Field-matrixed factorization machine toolkit", "fmfm"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub, bool schema_required = false) {
    auto* opt = sub->add_option("--schema", common.schema_path, "Schema file");
    if (schema_required) opt->required();
    sub->add_option("--threads", common.threads, "Scoring threads")->check(CLI::PositiveNumber);
    sub->add_flag("--deterministic", common.deterministic, "Force single-threaded execution");
  };

  SchemaBuildArgs sb;
  auto* schema_build = app.add_subcommand("schema-build", "Count tokens and write a schema");
  schema_build->add_option("--format", sb.format, "criteo or avazu");
  schema_build->add_option("--input", sb.input, "Raw input file")->required();
  schema_build->add_option("--out", sb.out, "Schema output path")->required();
  schema_build->add_option("--min-freq", sb.min_freq, "Frequency threshold")->check(CLI::PositiveNumber);
  schema_build->add_option("--count-on", sb.count_on, "all or train");
  schema_build->add_option("--seed", sb.seed, "Split seed used with --count-on train");

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Encode raw rows under a schema");
  encode->add_option("--format", enc.format, "criteo or avazu");
  encode->add_option("--input", enc.input, "Raw input file")->required();
  encode->add_option("--out", enc.out, "Encoded output path")->required();
  add_common(encode, true);

  SplitArgs sp;
  auto* split = app.add_subcommand("split", "Split encoded data 80/10/10");
  split->add_option("--input", sp.input, "Encoded data")->required();
  split->add_option("--out-prefix", sp.prefix, "Writes PREFIX.{train,valid,test}.bin")->required();
  split->add_option("--seed", sp.seed, "Split seed");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--train", tr.train, "Training data")->required();
  train->add_option("--valid", tr.valid, "Validation data (best-AUC epoch selection)");
  train->add_option("--test", tr.test, "Optional test data to report");
  train->add_option("--out", tr.out, "Model output path")->required();
  train->add_option("--variant", tr.variant, "lr, fm, fwfm, fvfm, fmfm or ffm");
  train->add_option("--dim", tr.dim, "Uniform embedding dimension K");
  train->add_option("--dims", tr.dims_file, "Per-field dims file from reduce");
  train->add_option("--matrix-kind", tr.matrix_kind, "identity, scalar, diagonal or full");
  train->add_option("--linear", tr.linear, "per-feature or field-shared");
  train->add_option("--config", tr.config_file, "key=value training config");
  train->add_option("--lr", tr.config.learning_rate, "Learning rate");
  train->add_option("--l2", tr.config.l2_lambda, "L2 penalty");
  train->add_option("--epochs", tr.config.epochs, "Epochs");
  train->add_option("--batch", tr.config.batch_size, "Minibatch size");
  train->add_option("--optimizer", tr.optimizer, "sgd, adam or adagrad");
  train->add_option("--init-scale", tr.config.init_scale, "Embedding init sigma");
  train->add_option("--seed", tr.config.seed, "Seed for init and shuffling");
  train->add_option("--checkpoint", tr.checkpoint, "Write final model + optimizer state here");
  train->add_option("--resume", tr.resume, "Continue from a checkpoint");
  train->add_option("--report", tr.report, "Per-epoch CSV report");
  add_common(train, true);

  ScoreArgs ev;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "AUC and LogLoss on a dataset");
  evaluate_cmd->add_option("--model", ev.model, "Model file");
  evaluate_cmd->add_option("--cache", ev.cache, "Cache file");
  evaluate_cmd->add_option("--data", ev.data, "Encoded data")->required();
  evaluate_cmd->add_flag("--json", common.as_json, "JSON output");
  add_common(evaluate_cmd);

  ScoreArgs pr;
  auto* predict = app.add_subcommand("predict", "Write one click probability per row");
  predict->add_option("--model", pr.model, "Model file");
  predict->add_option("--cache", pr.cache, "Cache file");
  predict->add_option("--data", pr.data, "Encoded data")->required();
  predict->add_option("--out", pr.out, "Output file (default stdout)");
  add_common(predict);

  ReduceArgs rd;
  auto* reduce = app.add_subcommand("reduce", "Per-field PCA dimension search");
  reduce->add_option("--model", rd.model, "First-pass model")->required();
  reduce->add_option("--out", rd.out, "Dims file output")->required();
  reduce->add_option("--variance", rd.variance, "Variance fraction to keep")
      ->check(CLI::Range(0.0, 1.0));
  reduce->add_flag("--weighted", rd.weighted, "Weight rows by training frequency");
  reduce->add_option("--train", rd.train, "Training data for --weighted");

  CacheArgs ca;
  auto* cache = app.add_subcommand("cache", "Precompute intermediate vectors");
  cache->add_option("--model", ca.model, "FM-family model")->required();
  cache->add_option("--out", ca.out, "Cache output path")->required();
  cache->add_option("--precision", ca.precision, "32 or 64");
  cache->add_option("--tie", ca.tie, "lower-index or more-features");

  CountArgs fl;
  auto* flops = app.add_subcommand("flops", "Estimated FLOPs per instance");
  flops->add_option("--variant", fl.variant, "Model variant");
  flops->add_option("--n", fl.n, "Field count");
  flops->add_option("--k", fl.k, "Uniform dimension");
  flops->add_option("--dims", fl.dims_file, "Dims file");
  flops->add_option("--dims-list", fl.dims_list, "Comma-separated per-field dims");
  flops->add_option("--linear", fl.linear, "per-feature or field-shared");
  flops->add_flag("--cached", fl.cached, "Cached FmFM scoring");
  flops->add_flag("--json", common.as_json, "JSON output");

  CountArgs pa;
  auto* params = app.add_subcommand("params", "Parameter count");
  params->add_option("--variant", pa.variant, "Model variant");
  params->add_option("--m", pa.m, "Total feature count");
  params->add_option("--n", pa.n, "Field count");
  params->add_option("--k", pa.k, "Uniform dimension");
  params->add_option("--dims", pa.dims_file, "Dims file (needs --schema)");
  params->add_option("--dims-list", pa.dims_list, "Comma-separated per-field dims");
  params->add_option("--linear", pa.linear, "per-feature or field-shared");
  params->add_option("--schema", common.schema_path, "Schema for per-field counts");
  params->add_flag("--json", common.as_json, "JSON output");

  MiArgs mi;
  auto* mi_cmd = app.add_subcommand("mi", "Field-pair mutual information with the label");
  mi_cmd->add_option("--data", mi.data, "Encoded data")->required();
  mi_cmd->add_option("--out", mi.out, "CSV output (default stdout)");
  mi_cmd->add_option("--dims", mi.dims_file, "Dims file to correlate against");
  mi_cmd->add_flag("--json", common.as_json, "JSON output");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a planted-truth dataset");
  synth->add_option("--out-prefix", sy.prefix, "Writes PREFIX.schema and PREFIX.*.bin")->required();
  synth->add_flag("--benchmark", sy.benchmark, "Use the calibrated 8-field benchmark");
  synth->add_option("--vocab", sy.vocab, "Comma-separated vocabulary sizes");
  synth->add_option("--truth-dims", sy.truth_dims, "Comma-separated planted dims");
  synth->add_option("--truth-kind", sy.truth_kind, "Planted matrix kind");
  synth->add_option("--zipf", sy.spec.zipf_exponent, "Zipf exponent");
  synth->add_option("--embedding-scale", sy.spec.embedding_scale, "Planted embedding sigma");
  synth->add_option("--matrix-scale", sy.spec.matrix_scale, "Planted matrix sigma");
  synth->add_option("--linear-scale", sy.spec.linear_scale, "Planted linear sigma");
  synth->add_option("--bias", sy.spec.bias, "Planted bias");
  synth->add_option("--noise", sy.spec.noise_rate, "Label flip rate");
  synth->add_option("--samples", sy.spec.samples, "Sample count");
  synth->add_option("--seed", sy.spec.seed, "Seed");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << to_string(ErrorCode::kInvalidArgument) << ": " << e.what() << '\n';
    return 2;
  }

  try {
    if (*schema_build) cmd_schema_build(sb, out);
    else if (*encode) cmd_encode(enc, common, out);
    else if (*split) cmd_split(sp, out);
    else if (*train) cmd_train(tr, common, *train, out);
    else if (*evaluate_cmd) cmd_evaluate(ev, common, out);
    else if (*predict) cmd_predict(pr, common, out);
    else if (*reduce) cmd_reduce(rd, out);
    else if (*cache) cmd_cache(ca, out);
    else if (*flops) cmd_flops(fl, common, out);
    else if (*params) cmd_params(pa, common, out);
    else if (*mi_cmd) cmd_mi(mi, common, out);
    else if (*synth) cmd_synth(sy, *synth, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << to_string(e.code()) << ": " << msg << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fmfm::cli
