#include <doctest.h>

#include "fmfm/analysis.hpp"
#include "fmfm/binary_io.hpp"
#include "fmfm/cache.hpp"
#include "fmfm/error.hpp"
#include "test_util.hpp"

using namespace fmfm;
using testing::rel_err;

namespace {

FmModel random_kind_model(MatrixKind kind, std::vector<std::uint32_t> counts,
                          std::vector<std::uint32_t> dims, LinearMode linear, std::mt19937_64& rng) {
  auto shape = ModelShape::make(Variant::kFmFM, std::move(counts), std::move(dims), 5);
  shape.kind = kind;
  shape.linear = linear;
  shape.validate();
  return testing::random_model(shape, rng);
}

}  // namespace

TEST_CASE("cached scores equal model scores for every kind") {
  std::mt19937_64 rng(100);
  const std::vector<std::uint32_t> counts{30, 7, 12, 50, 3};
  struct Case {
    MatrixKind kind;
    std::vector<std::uint32_t> dims;
  };
  const std::vector<Case> cases{{MatrixKind::kIdentity, {4, 4, 4, 4, 4}},
                                {MatrixKind::kScalar, {4, 4, 4, 4, 4}},
                                {MatrixKind::kDiagonal, {4, 4, 4, 4, 4}},
                                {MatrixKind::kFull, {4, 4, 4, 4, 4}},
                                {MatrixKind::kFull, {2, 14, 5, 1, 8}}};
  for (const auto& c : cases) {
    for (auto linear : {LinearMode::kPerFeature, LinearMode::kFieldShared}) {
      const auto model = random_kind_model(c.kind, counts, c.dims, linear, rng);
      const auto c64 = CachedModel64::build(model);
      const auto c32 = CachedModel32::build(model);
      double worst64 = 0.0;
      double worst32 = 0.0;
      for (int i = 0; i < 2000; ++i) {
        const auto x = testing::random_features(counts, rng);
        const double z = score(model, Instance{1, x});
        worst64 = std::max(worst64, rel_err(cached_score(c64, Instance{1, x}), z));
        worst32 = std::max(worst32, rel_err(cached_score(c32, Instance{1, x}), z));
      }
      CHECK(worst64 <= 1e-10);
      CHECK(worst32 <= 1e-5);
    }
  }
}

TEST_CASE("identity cache is a copy of the embeddings") {
  std::mt19937_64 rng(1);
  const std::vector<std::uint32_t> counts{5, 6, 7};
  const auto model = random_kind_model(MatrixKind::kIdentity, counts, {3, 3, 3},
                                       LinearMode::kPerFeature, rng);
  const auto cm = CachedModel64::build(model);
  for (const auto& cp : cm.pairs()) {
    CHECK(cp.cached_side == cp.k);
    for (std::uint32_t i = 0; i < counts[cp.k]; ++i) {
      const auto v = cp.vector(i);
      const auto e = model.embedding(cp.k, i);
      CHECK(std::equal(v.begin(), v.end(), e.begin(), e.end()));
    }
  }
}

TEST_CASE("the larger-dimension side is cached") {
  // A 2-dim field paired with a 14-dim field: cache the 14-dim side, store
  // 2-dim vectors, one 2-long dot per instance.
  std::mt19937_64 rng(2);
  const std::vector<std::uint32_t> counts{9, 4};
  const auto model = random_kind_model(MatrixKind::kFull, counts, {2, 14},
                                       LinearMode::kFieldShared, rng);
  CHECK(model.pair(0, 1).rows == 2);
  CHECK(model.pair(0, 1).cols == 14);
  const auto cm = CachedModel64::build(model);
  REQUIRE(cm.pairs().size() == 1);
  const auto& cp = cm.pairs()[0];
  CHECK(cp.cached_side == 1);
  CHECK(cp.other_side() == 0);
  CHECK(cp.dim == 2);
  CHECK(cp.vectors.size() == 4 * 2);
  CHECK(cm.pair_table_size() == 8);
  // Uncached pair cost 2*2*14 + 2*2 + 1 against 2*2 + 1 cached: the dot is 7x smaller
  // than the 14-long one it replaces.
  CHECK(cm.flops_per_instance() == 2 * 2 + 1 + 2 * 2);
  CHECK(cm.flops_per_instance() == estimate_flops(Variant::kFmFM, std::vector<std::uint32_t>{2, 14}, true));
}

TEST_CASE("ties go to the lower field index unless asked otherwise") {
  std::mt19937_64 rng(3);
  const std::vector<std::uint32_t> counts{3, 10, 5};
  const auto model = random_kind_model(MatrixKind::kFull, counts, {4, 4, 4},
                                       LinearMode::kFieldShared, rng);
  const auto lower = CachedModel64::build(model);
  for (const auto& cp : lower.pairs()) CHECK(cp.cached_side == cp.k);
  const auto more = CachedModel64::build(model, CacheTieBreak::kMoreFeatures);
  CHECK(more.pairs()[0].cached_side == 1);  // (0,1): 10 > 3
  CHECK(more.pairs()[1].cached_side == 2);  // (0,2): 5 > 3
  CHECK(more.pairs()[2].cached_side == 1);  // (1,2): 10 > 5
  std::mt19937_64 draw(4);
  for (int i = 0; i < 100; ++i) {
    const auto x = testing::random_features(counts, draw);
    CHECK(rel_err(more.score(Instance{1, x}), score(model, Instance{1, x})) <= 1e-10);
  }
}

TEST_CASE("pair table memory is exact") {
  std::mt19937_64 rng(4);
  const std::vector<std::uint32_t> counts{11, 7, 23, 5};
  const std::vector<std::uint32_t> dims{3, 6, 2, 6};
  const auto model = random_kind_model(MatrixKind::kFull, counts, dims, LinearMode::kFieldShared, rng);
  const auto cm = CachedModel32::build(model);
  std::uint64_t expected = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t l = k + 1; l < 4; ++l) {
      const auto side = dims[k] >= dims[l] ? k : l;
      expected += std::uint64_t{counts[side]} * std::min(dims[k], dims[l]);
    }
  }
  CHECK(cm.pair_table_size() == expected);
  CHECK(cm.flops_per_instance() == estimate_flops(Variant::kFmFM, dims, true));
}

TEST_CASE("zero model caches to zero") {
  const std::vector<std::uint32_t> counts{3, 4};
  FmModel zero(ModelShape::make(Variant::kFmFM, counts, {2, 3}));
  zero.fill(0.0);
  const auto cm = CachedModel32::build(zero);
  const std::vector<std::uint32_t> x{2, 3};
  CHECK(cm.score(Instance{1, x}) == 0.0);
}

TEST_CASE("lemma: <v M, u> equals <u M^T, v>") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto dk = std::uniform_int_distribution<std::uint32_t>(1, 16)(rng);
    const auto dl = std::uniform_int_distribution<std::uint32_t>(1, 16)(rng);
    FieldPairMatrix pm(0, 1, MatrixKind::kFull, dk, dl);
    for (auto& m : pm.payload) m = normal(rng);
    std::vector<double> v(dk), u(dl);
    for (auto& a : v) a = normal(rng);
    for (auto& a : u) a = normal(rng);
    const auto vm = transform(v, pm, Direction::kForward);
    const auto um = transform(u, pm, Direction::kBackward);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < dl; ++i) lhs += vm[i] * u[i];
    for (std::size_t i = 0; i < dk; ++i) rhs += um[i] * v[i];
    CHECK(rel_err(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("cache files") {
  testing::TempDir dir;
  std::mt19937_64 rng(5);
  const std::vector<std::uint32_t> counts{6, 8, 4};
  const auto model = random_kind_model(MatrixKind::kFull, counts, {3, 5, 2},
                                       LinearMode::kFieldShared, rng);
  for (auto precision : {CachePrecision::k32, CachePrecision::k64}) {
    const auto cm = AnyCachedModel::build(model, precision);
    cm.save(dir.file("c.bin"));
    const auto back = AnyCachedModel::load(dir.file("c.bin"));
    CHECK(back.precision() == precision);
    CHECK(back.source_model_hash() == model.hash());
    CHECK(back.schema_hash() == 5);
    for (int i = 0; i < 50; ++i) {
      const auto x = testing::random_features(counts, rng);
      CHECK(back.score(Instance{1, x}) == cm.score(Instance{1, x}));
    }
  }
  const auto bytes = io::read_file(dir.file("c.bin"));
  CHECK(bytes.rfind("fmfm-cache v1\n", 0) == 0);
  CHECK_THROWS_AS(AnyCachedModel::parse(bytes + "!"), Error);
  CHECK_THROWS_AS(AnyCachedModel::parse(bytes.substr(0, bytes.size() - 1)), Error);
  CHECK_THROWS_AS(CachedModel32::parse(bytes), Error);
  auto v2 = bytes;
  v2[12] = '2';
  CHECK_THROWS_AS(AnyCachedModel::parse(v2), Error);
}

TEST_CASE("only FM-family models can be cached") {
  const std::vector<std::uint32_t> counts{3, 3};
  CHECK_THROWS_AS(CachedModel64::build(FmModel(ModelShape::make(Variant::kLR, counts, {0, 0}))),
                  Error);
  CHECK_THROWS_AS(CachedModel64::build(FmModel(ModelShape::make(Variant::kFFM, counts, {2, 2}))),
                  Error);
  const auto cm = CachedModel64::build(FmModel(ModelShape::make(Variant::kFM, counts, {2, 2})));
  const std::vector<std::uint32_t> bad{1, 3};
  CHECK_THROWS_AS(cm.score(Instance{1, bad}), Error);
}
