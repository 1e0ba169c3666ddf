#include "fmfm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

#include "fmfm/error.hpp"
#include "fmfm/ingest.hpp"
#include "kernels.hpp"

namespace fmfm {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class ZipfSampler {
 public:
  ZipfSampler(std::uint32_t vocab, double exponent) : cdf_(zipf_probabilities(vocab, exponent)) {
    for (std::size_t i = 1; i < cdf_.size(); ++i) cdf_[i] += cdf_[i - 1];
    cdf_.back() = 1.0;
  }
  // Returns a rank in 1..vocab.
  std::uint32_t operator()(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::uint32_t>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1)) + 1;
  }

 private:
  std::vector<double> cdf_;
};

FmModel plant_truth(const SynthSpec& spec, std::mt19937_64& rng) {
  ModelShape shape;
  shape.variant = Variant::kFmFM;
  shape.kind = spec.truth_kind;
  shape.linear = LinearMode::kPerFeature;
  for (auto v : spec.vocab_sizes) shape.feature_counts.push_back(v + 1);
  shape.dims = spec.truth_dims;
  FmModel truth(shape);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t f = 0; f < truth.field_count(); ++f) {
    for (auto& v : truth.embeddings(f).values) v = spec.embedding_scale * normal(rng);
    for (auto& w : truth.linear(f).values) w = spec.linear_scale * normal(rng);
    truth.linear(f).values[kUnknownIndex] = 0.0;
    auto unknown = truth.embedding(f, kUnknownIndex);
    std::fill(unknown.begin(), unknown.end(), 0.0);
  }
  for (auto& pm : truth.pairs()) {
    for (auto& m : pm.payload) m = spec.matrix_scale * normal(rng);
  }
  truth.bias() = spec.bias;
  return truth;
}

}  // namespace

std::vector<double> zipf_probabilities(std::uint32_t vocab, double exponent) {
  std::vector<double> p(vocab);
  double total = 0.0;
  for (std::uint32_t r = 0; r < vocab; ++r) {
    p[r] = std::pow(static_cast<double>(r + 1), -exponent);
    total += p[r];
  }
  for (auto& v : p) v /= total;
  return p;
}

void SynthSpec::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, msg); };
  if (vocab_sizes.empty()) fail("synthetic spec needs at least one field");
  for (auto v : vocab_sizes) {
    if (v == 0) fail("synthetic vocabulary sizes must be positive");
  }
  if (truth_dims.size() != vocab_sizes.size()) fail("truth_dims must list one dimension per field");
  if (!(zipf_exponent >= 0.0)) fail("zipf exponent must be >= 0");
  if (!(noise_rate >= 0.0 && noise_rate <= 0.5)) fail("noise rate must lie in [0, 0.5]");
  if (samples == 0) fail("sample count must be positive");
}

SynthSpec SynthSpec::benchmark(std::uint64_t seed) {
  SynthSpec spec;
  spec.vocab_sizes = {1000, 800, 500, 300, 200, 100, 50, 20};
  spec.zipf_exponent = 1.0;
  spec.truth_kind = MatrixKind::kFull;
  spec.truth_dims = {5, 4, 4, 3, 3, 2, 2, 1};
  spec.embedding_scale = 1.0;
  spec.matrix_scale = 0.35;
  spec.linear_scale = 0.1;
  spec.bias = -1.0;
  spec.noise_rate = 0.0;
  spec.samples = 200000;
  spec.seed = seed;
  return spec;
}

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const auto n = spec.vocab_sizes.size();
  std::mt19937_64 rng(spec.seed);
  FmModel truth = plant_truth(spec, rng);

  std::vector<ZipfSampler> samplers;
  for (auto v : spec.vocab_sizes) samplers.emplace_back(v, spec.zipf_exponent);

  Dataset all(n);
  all.reserve(spec.samples);
  std::vector<std::uint32_t> row(n);
  std::vector<std::vector<std::uint64_t>> counts(n);
  for (std::size_t f = 0; f < n; ++f) counts[f].assign(spec.vocab_sizes[f] + 1, 0);
  for (std::uint64_t s = 0; s < spec.samples; ++s) {
    for (std::size_t f = 0; f < n; ++f) {
      row[f] = samplers[f](rng);
      ++counts[f][row[f]];
    }
    const double p = sigmoid(detail::logit(truth, Instance{1, row}));
    int label = uniform01(rng) < p ? 1 : -1;
    if (uniform01(rng) < spec.noise_rate) label = -label;
    all.push(label, row);
  }

  std::vector<std::string> names;
  std::vector<std::vector<FieldSchema::Entry>> entries(n);
  for (std::size_t f = 0; f < n; ++f) {
    names.push_back("f" + std::to_string(f));
    for (std::uint32_t j = 1; j <= spec.vocab_sizes[f]; ++j) {
      entries[f].push_back({std::to_string(j), j, counts[f][j]});
    }
  }

  SynthData out{FieldSchema(std::move(names), std::move(entries)),
                split_dataset(all, spec.seed ^ 0x5851f42d4c957f2dULL), std::move(truth), 0};

  std::unordered_set<std::uint64_t> seen;
  // Packs (pair, a, b); exact while vocabularies stay below 2^21.
  auto key = [](std::size_t p, std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(p) << 42) | (static_cast<std::uint64_t>(a) << 21) | b;
  };
  for (std::size_t r = 0; r < out.split.train.size(); ++r) {
    const auto x = out.split.train[r].features;
    for (std::size_t k = 0, p = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l, ++p) seen.insert(key(p, x[k], x[l]));
    }
  }
  std::unordered_set<std::uint64_t> unseen;
  for (std::size_t r = 0; r < out.split.validation.size(); ++r) {
    const auto x = out.split.validation[r].features;
    for (std::size_t k = 0, p = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l, ++p) {
        const auto id = key(p, x[k], x[l]);
        if (!seen.contains(id)) unseen.insert(id);
      }
    }
  }
  out.unseen_validation_pairs = unseen.size();
  return out;
}

}  // namespace fmfm
