#include <doctest.h>

#include <sstream>

#include "fmfm/analysis.hpp"
#include "fmfm/error.hpp"
#include "fmfm/train.hpp"
#include "test_util.hpp"

using namespace fmfm;

namespace {

std::vector<Instance> as_batch(const Dataset& d) {
  std::vector<Instance> out;
  for (std::size_t r = 0; r < d.size(); ++r) out.push_back(d[r]);
  return out;
}

// Max relative difference between the analytic gradient and central
// differences of loss(), over every stored parameter.
double max_fd_error(FmModel model, std::span<const Instance> batch, double l2) {
  constexpr double h = 1e-5;
  const auto analytic = gradients(model, batch, l2);
  const auto ga = analytic.blocks();
  auto params = model.blocks();
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].values.size(); ++i) {
      double& p = params[b].values[i];
      const double saved = p;
      p = saved + h;
      const double up = loss(model, batch, l2);
      p = saved - h;
      const double down = loss(model, batch, l2);
      p = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = ga[b].values[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("loss values") {
  const std::vector<std::uint32_t> counts{3, 3};
  FmModel zero(ModelShape::make(Variant::kFM, counts, {2, 2}));
  const std::vector<std::uint32_t> x{1, 2};
  const std::vector<Instance> batch{{1, x}, {-1, x}};
  CHECK(loss(zero, batch, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss(zero, batch, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  FmModel lr(ModelShape::make(Variant::kLR, counts, {0, 0}));
  lr.bias() = 10.0;
  const std::vector<Instance> pos{{1, x}};
  // Bias is not penalized.
  CHECK(loss(lr, pos, 1.0) == doctest::Approx(std::log1p(std::exp(-10.0))).epsilon(1e-12));
  CHECK(loss(lr, pos, 0.0) == doctest::Approx(4.5398899216870535e-05).epsilon(1e-12));
  lr.linear(0).values[1] = 0.5;
  CHECK(loss(lr, pos, 0.1) > loss(lr, pos, 0.0));
  CHECK(loss(lr, pos, 0.1) - loss(lr, pos, 0.0) == doctest::Approx(0.1 * 0.25));
  CHECK_THROWS_AS(loss(lr, std::vector<Instance>{}, 0.0), Error);
}

TEST_CASE("gradients agree with central differences for every parameter class") {
  std::mt19937_64 rng(42);
  const std::vector<std::uint32_t> counts{3, 4, 2, 3};
  Dataset data = testing::random_dataset(counts, 8, rng);
  const auto batch = as_batch(data);
  struct Case {
    const char* name;
    Variant v;
    std::vector<std::uint32_t> dims;
    std::optional<MatrixKind> kind;
    std::optional<LinearMode> linear;
  };
  const std::vector<Case> cases{
      {"lr", Variant::kLR, {0, 0, 0, 0}, {}, {}},
      {"fm", Variant::kFM, {3, 3, 3, 3}, {}, {}},
      {"scalar", Variant::kFwFM, {3, 3, 3, 3}, {}, {}},
      {"diagonal", Variant::kFvFM, {3, 3, 3, 3}, {}, {}},
      {"full uniform", Variant::kFmFM, {3, 3, 3, 3}, {}, {}},
      {"full variable", Variant::kFmFM, {2, 4, 1, 3}, {}, {}},
      {"full per-feature", Variant::kFmFM, {2, 4, 1, 3}, {}, LinearMode::kPerFeature},
      {"identity field-shared", Variant::kFmFM, {3, 3, 3, 3}, MatrixKind::kIdentity,
       LinearMode::kFieldShared},
      {"ffm", Variant::kFFM, {2, 2, 2, 2}, {}, {}},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    auto shape = ModelShape::make(c.v, counts, c.dims);
    if (c.kind) shape.kind = *c.kind;
    if (c.linear) shape.linear = *c.linear;
    auto model = testing::random_model(shape, rng);
    CHECK(max_fd_error(model, batch, 0.0) <= 1e-6);
    CHECK(max_fd_error(model, batch, 0.01) <= 1e-6);
  }
}

TEST_CASE("gradient special cases") {
  std::mt19937_64 rng(4);
  const std::vector<std::uint32_t> counts{3, 3, 3};
  auto model = testing::random_model(ModelShape::make(Variant::kFmFM, counts, {2, 2, 2}), rng);
  for (std::size_t f = 0; f < 3; ++f) model.embeddings(f).values.assign(6, 0.0);
  const auto data = testing::random_dataset(counts, 5, rng);
  const auto batch = as_batch(data);
  auto g = gradients(model, batch, 0.0);
  for (const auto& pm : g.pairs()) {
    for (double v : pm.payload) CHECK(v == 0.0);
  }
  // With a penalty, the matrix gradient is exactly 2*lambda*M.
  g = gradients(model, batch, 0.25);
  for (std::size_t p = 0; p < g.pairs().size(); ++p) {
    for (std::size_t i = 0; i < g.pairs()[p].payload.size(); ++i) {
      CHECK(g.pairs()[p].payload[i] == 0.5 * model.pairs()[p].payload[i]);
    }
  }
}

TEST_CASE("one small SGD step does not increase the batch loss") {
  std::mt19937_64 rng(12);
  const std::vector<std::uint32_t> counts{5, 5, 5, 5};
  for (auto v : {Variant::kFM, Variant::kFwFM, Variant::kFvFM, Variant::kFmFM, Variant::kFFM}) {
    auto model = testing::random_model(ModelShape::make(v, counts, {3, 3, 3, 3}), rng, 0.3);
    const auto data = testing::random_dataset(counts, 64, rng);
    const auto batch = as_batch(data);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::kSGD;
    cfg.learning_rate = 1e-4;
    cfg.l2_lambda = 0.0;
    Optimizer opt(model, cfg);
    const double before = loss(model, batch, 0.0);
    CHECK(opt.step(model, batch) == doctest::Approx(before).epsilon(1e-14));
    CHECK(loss(model, batch, 0.0) - before <= 0.0);
  }
}

TEST_CASE("SGD step equals the exact gradient step") {
  std::mt19937_64 rng(31);
  const std::vector<std::uint32_t> counts{4, 4, 4};
  auto model = testing::random_model(ModelShape::make(Variant::kFmFM, counts, {2, 3, 2}), rng);
  Dataset data(3);
  // Every row of every field appears, so lazy updates cover all parameters.
  for (std::uint32_t i = 0; i < 4; ++i) data.push(i % 2 ? 1 : -1, std::vector<std::uint32_t>{i, i, 3 - i});
  const auto batch = as_batch(data);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSGD;
  cfg.learning_rate = 0.1;
  cfg.l2_lambda = 0.01;
  const auto g = gradients(model, batch, cfg.l2_lambda);
  auto expected = model;
  {
    auto p = expected.blocks();
    const auto gb = g.blocks();
    for (std::size_t b = 0; b < p.size(); ++b) {
      for (std::size_t i = 0; i < p[b].values.size(); ++i) p[b].values[i] -= 0.1 * gb[b].values[i];
    }
  }
  Optimizer opt(model, cfg);
  opt.step(model, batch);
  const auto got = model.blocks();
  const auto want = expected.blocks();
  for (std::size_t b = 0; b < got.size(); ++b) {
    for (std::size_t i = 0; i < got[b].values.size(); ++i) {
      CHECK(got[b].values[i] == doctest::Approx(want[b].values[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("init") {
  const std::vector<std::uint32_t> counts{4, 5, 6};
  TrainConfig cfg;
  cfg.seed = 99;
  const auto a = init_model(ModelShape::make(Variant::kFmFM, counts, {3, 2, 4}), cfg);
  const auto b = init_model(ModelShape::make(Variant::kFmFM, counts, {3, 2, 4}), cfg);
  CHECK(a == b);
  CHECK(a.bias() == 0.0);
  for (std::size_t f = 0; f < 3; ++f) {
    for (double w : a.linear(f).values) CHECK(w == 0.0);
  }
  // Identity-padded start: the 3x2 block of pair (0,1) is [[1,0],[0,1],[0,0]].
  CHECK(a.pair(0, 1).payload == std::vector<double>{1, 0, 0, 1, 0, 0});

  // FmFM at step 0 scores like an FM on the same embeddings.
  const auto fmfm = init_model(ModelShape::make(Variant::kFmFM, counts, {3, 3, 3}), cfg);
  auto fm = init_model(ModelShape::make(Variant::kFM, counts, {3, 3, 3}), cfg);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto x = testing::random_features(counts, rng);
    CHECK(score(fmfm, Instance{1, x}) == doctest::Approx(score(fm, Instance{1, x})).epsilon(1e-14));
  }

  cfg.init_scale = 0.0;
  const auto flat = init_model(ModelShape::make(Variant::kFmFM, counts, {3, 2, 4}), cfg);
  for (int i = 0; i < 20; ++i) {
    const auto x = testing::random_features(counts, rng);
    CHECK(score(flat, Instance{1, x}) == 0.0);
  }
}

TEST_CASE("separable toy set reaches train AUC 1") {
  // Label is +1 exactly when both fields pick feature 1.
  Dataset d(2);
  for (int rep = 0; rep < 50; ++rep) {
    for (std::uint32_t a = 1; a <= 2; ++a) {
      for (std::uint32_t b = 1; b <= 2; ++b) {
        d.push(a == 1 && b == 1 ? 1 : -1, std::vector<std::uint32_t>{a, b});
      }
    }
  }
  const std::vector<std::uint32_t> counts{3, 3};
  for (auto v : {Variant::kLR, Variant::kFM, Variant::kFmFM}) {
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.05;
    cfg.seed = 3;
    auto model = init_model(ModelShape::make(v, counts, {2, 2}), cfg);
    auto result = fit(std::move(model), DatasetSplit{d, d, d, 0}, cfg);
    CHECK(evaluate(result.model, d).auc == 1.0);
    CHECK(result.report.epochs.size() == 50);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  std::mt19937_64 rng(8);
  const std::vector<std::uint32_t> counts{4, 4, 4};
  const auto data = testing::random_dataset(counts, 300, rng);
  for (auto opt : {OptimizerKind::kSGD, OptimizerKind::kAdam, OptimizerKind::kAdagrad}) {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.optimizer = opt;
    const auto model = init_model(ModelShape::make(Variant::kFmFM, counts, {2, 2, 2}), cfg);
    const auto result = fit(model, DatasetSplit{data, data, data, 0}, cfg);
    CHECK(result.last_model == model);
    const auto& e = result.report.epochs;
    // Equal up to summation order, which changes with each epoch's shuffle.
    CHECK(e[0].train_logloss == doctest::Approx(e[1].train_logloss).epsilon(1e-13));
    CHECK(e[1].train_logloss == doctest::Approx(e[2].train_logloss).epsilon(1e-13));
  }
}

TEST_CASE("identity kind never touches matrix payloads") {
  std::mt19937_64 rng(2);
  const std::vector<std::uint32_t> counts{4, 4, 4};
  const auto data = testing::random_dataset(counts, 200, rng);
  TrainConfig cfg;
  cfg.epochs = 2;
  auto result = fit(init_model(ModelShape::make(Variant::kFM, counts, {2, 2, 2}), cfg),
                    DatasetSplit{data, data, data, 0}, cfg);
  for (const auto& pm : result.last_model.pairs()) CHECK(pm.payload.empty());
  CHECK(result.last_model.parameter_count() == 12 + 24);
}

TEST_CASE("training is deterministic for a fixed seed") {
  std::mt19937_64 rng(77);
  const std::vector<std::uint32_t> counts{6, 5, 4};
  const auto split = DatasetSplit{testing::random_dataset(counts, 500, rng),
                                  testing::random_dataset(counts, 100, rng), Dataset(3), 0};
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.seed = 5;
  auto run = [&] {
    return fit(init_model(ModelShape::make(Variant::kFmFM, counts, {3, 2, 2}), cfg), split, cfg);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.model.serialize() == b.model.serialize());
  std::ostringstream ra, rb;
  a.report.write_csv(ra);
  b.report.write_csv(rb);
  CHECK(ra.str() == rb.str());
}

TEST_CASE("best validation epoch is returned") {
  std::mt19937_64 rng(21);
  const std::vector<std::uint32_t> counts{20, 20};
  // Training labels are noise; the model can only overfit.
  const auto split = DatasetSplit{testing::random_dataset(counts, 400, rng),
                                  testing::random_dataset(counts, 400, rng), Dataset(2), 0};
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.05;
  const auto r = fit(init_model(ModelShape::make(Variant::kFM, counts, {4, 4}), cfg), split, cfg);
  double best = -1.0;
  std::size_t arg = 0;
  for (std::size_t e = 0; e < r.report.epochs.size(); ++e) {
    if (r.report.epochs[e].valid_auc > best) {
      best = r.report.epochs[e].valid_auc;
      arg = e;
    }
  }
  CHECK(r.report.best_epoch == arg);
  CHECK(evaluate(r.model, split.validation).auc == best);
}

TEST_CASE("diverging training is reported") {
  std::mt19937_64 rng(2);
  const std::vector<std::uint32_t> counts{4, 4};
  const auto data = testing::random_dataset(counts, 64, rng);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSGD;
  cfg.learning_rate = 1e200;
  cfg.init_scale = 1.0;
  cfg.epochs = 5;
  try {
    fit(init_model(ModelShape::make(Variant::kFmFM, counts, {3, 3}), cfg),
        DatasetSplit{data, data, data, 0}, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDiverged);
  }
}

TEST_CASE("config file") {
  std::istringstream in("# tuned\nlearning_rate = 0.05\nepochs=3  # short\noptimizer=adagrad\n");
  const auto cfg = TrainConfig::parse(in);
  CHECK(cfg.learning_rate == 0.05);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.optimizer == OptimizerKind::kAdagrad);
  CHECK(cfg.batch_size == 1024);
  std::istringstream round(cfg.serialize());
  CHECK(TrainConfig::parse(round).serialize() == cfg.serialize());

  std::istringstream unknown("momentum=0.9\n");
  CHECK_THROWS_AS(TrainConfig::parse(unknown), Error);
  std::istringstream negative("learning_rate=-1\n");
  CHECK_THROWS_AS(TrainConfig::parse(negative), Error);
  std::istringstream zero_batch("batch_size=0\n");
  CHECK_THROWS_AS(TrainConfig::parse(zero_batch), Error);
}

TEST_CASE("checkpoint round trip keeps optimizer state") {
  testing::TempDir dir;
  std::mt19937_64 rng(6);
  const std::vector<std::uint32_t> counts{5, 5, 5};
  const auto data = testing::random_dataset(counts, 200, rng);
  TrainConfig cfg;
  cfg.batch_size = 50;
  auto model = init_model(ModelShape::make(Variant::kFmFM, counts, {2, 3, 2}), cfg);
  Optimizer opt(model, cfg);
  const auto batch = as_batch(data);
  opt.step(model, std::span(batch).first(50));
  save_checkpoint(dir.file("ck.bin"), model, opt);
  auto [m2, o2] = load_checkpoint(dir.file("ck.bin"), cfg);
  CHECK(m2 == model);
  CHECK(o2.steps() == 1);
  // Continuing either copy gives the same next step.
  opt.step(model, std::span(batch).subspan(50, 50));
  o2.step(m2, std::span(batch).subspan(50, 50));
  CHECK(m2.serialize() == model.serialize());

  TrainConfig sgd = cfg;
  sgd.optimizer = OptimizerKind::kSGD;
  CHECK_THROWS_AS(load_checkpoint(dir.file("ck.bin"), sgd), Error);
}
