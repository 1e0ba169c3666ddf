#include <doctest.h>

#include <sstream>

#include "fmfm/analysis.hpp"
#include "fmfm/error.hpp"
#include "fmfm/synth.hpp"
#include "fmfm/train.hpp"
#include "test_util.hpp"

using namespace fmfm;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec s;
  s.vocab_sizes = {50, 30, 20};
  s.truth_dims = {3, 2, 2};
  s.matrix_scale = 0.5;
  s.samples = 5000;
  s.seed = seed;
  return s;
}

std::string bytes_of(const Dataset& d) {
  std::ostringstream out;
  d.write(out);
  return out.str();
}

double test_auc(const SynthData& data, Variant v, std::uint32_t k, std::uint32_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = 1;
  auto model = init_model(data.schema, v, std::vector<std::uint32_t>(data.schema.field_count(), k), cfg);
  return evaluate(fit(std::move(model), data.split, cfg).model, data.split.test).auc;
}

}  // namespace

TEST_CASE("zipf probabilities") {
  const auto p = zipf_probabilities(10, 1.0);
  double total = 0.0;
  for (double v : p) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(p[0] / p[1] == doctest::Approx(2.0));
  CHECK(p[0] / p[9] == doctest::Approx(10.0));
  for (double v : zipf_probabilities(4, 0.0)) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("same seed gives byte-identical data") {
  const auto a = generate(small_spec(3));
  const auto b = generate(small_spec(3));
  CHECK(bytes_of(a.split.train) == bytes_of(b.split.train));
  CHECK(bytes_of(a.split.validation) == bytes_of(b.split.validation));
  CHECK(bytes_of(a.split.test) == bytes_of(b.split.test));
  CHECK(a.schema.serialize() == b.schema.serialize());
  CHECK(a.truth == b.truth);
  CHECK(bytes_of(generate(small_spec(4)).split.train) != bytes_of(a.split.train));

  const auto total = a.split.train.size() + a.split.validation.size() + a.split.test.size();
  CHECK(total == 5000);
  a.split.train.validate(a.schema.feature_counts());
  CHECK(a.schema.feature_counts() == std::vector<std::uint32_t>{51, 31, 21});
}

TEST_CASE("feature frequencies follow the zipf law") {
  SynthSpec s = small_spec(11);
  s.vocab_sizes = {20, 5};
  s.truth_dims = {2, 2};
  s.zipf_exponent = 1.2;
  s.samples = 50000;
  const auto data = generate(s);
  // Schema counts cover every generated row.
  const auto probs = zipf_probabilities(20, 1.2);
  double chi2 = 0.0;
  for (const auto& e : data.schema.entries(0)) {
    const auto rank = std::stoul(e.token);
    const double expected = probs[rank - 1] * 50000.0;
    chi2 += (e.count - expected) * (e.count - expected) / expected;
  }
  // 19 degrees of freedom; the 0.999 quantile is 43.8.
  CHECK(chi2 < 43.8);
}

TEST_CASE("long tails leave validation pairs unseen in train") {
  auto s = small_spec(5);
  s.vocab_sizes = {500, 400, 300};
  s.samples = 20000;
  CHECK(generate(s).unseen_validation_pairs > 0);
  s.vocab_sizes = {2, 2, 2};
  CHECK(generate(s).unseen_validation_pairs == 0);
}

TEST_CASE("degenerate specs are rejected") {
  auto s = small_spec(1);
  s.vocab_sizes = {10, 0, 5};
  CHECK_THROWS_AS(generate(s), Error);
  s = small_spec(1);
  s.zipf_exponent = -1.0;
  CHECK_THROWS_AS(generate(s), Error);
  s = small_spec(1);
  s.noise_rate = 0.7;
  CHECK_THROWS_AS(generate(s), Error);
  s = small_spec(1);
  s.truth_dims = {2, 2};
  CHECK_THROWS_AS(generate(s), Error);
}

TEST_CASE("label noise 0.5 leaves nothing to learn") {
  auto s = small_spec(9);
  s.samples = 400000;
  s.noise_rate = 0.5;
  const auto data = generate(s);
  CHECK(evaluate(data.truth, data.split.test).auc <= 0.51);
  CHECK(test_auc(data, Variant::kFmFM, 4, 2) <= 0.51);
}

TEST_CASE("identity truth gives FM nothing to lose against FmFM") {
  SynthSpec s;
  s.vocab_sizes = {200, 150, 100, 60, 30};
  s.truth_kind = MatrixKind::kIdentity;
  s.truth_dims = {4, 4, 4, 4, 4};
  s.embedding_scale = 0.6;
  // FmFM uses field-shared linear terms, so keep per-feature ones out of the truth.
  s.linear_scale = 0.0;
  s.samples = 100000;
  s.seed = 21;
  const auto data = generate(s);
  const double fm = test_auc(data, Variant::kFM, 4, 5);
  const double fmfm = test_auc(data, Variant::kFmFM, 4, 5);
  CAPTURE(fm);
  CAPTURE(fmfm);
  CHECK(fm > 0.6);
  CHECK(std::abs(fm - fmfm) <= 0.005);
}
