#pragma once

#include <cstdint>
#include <vector>

#include "fmfm/dataset.hpp"
#include "fmfm/model.hpp"
#include "fmfm/schema.hpp"

namespace fmfm {

// Planted-truth generator for multi-field categorical data. Features of field
// f are drawn from a Zipf law over 1..vocab_sizes[f] (index 0 stays the
// unused unknown slot); labels come from the sigmoid of a planted FM-family
// model's logit, optionally flipped with probability noise_rate.
struct SynthSpec {
  std::vector<std::uint32_t> vocab_sizes;
  double zipf_exponent = 1.0;
  MatrixKind truth_kind = MatrixKind::kFull;
  std::vector<std::uint32_t> truth_dims;  // uniform unless truth_kind is Full
  double embedding_scale = 1.0;
  double matrix_scale = 1.0;
  double linear_scale = 0.0;
  double bias = 0.0;
  double noise_rate = 0.0;
  std::uint64_t samples = 10000;
  std::uint64_t seed = 0;

  void validate() const;

  // Desk-scale benchmark: 8 fields, vocabularies up to 1000, 200k samples,
  // full-matrix truth with per-field latent dimensions well below 8.
  static SynthSpec benchmark(std::uint64_t seed);
};

struct SynthData {
  FieldSchema schema;
  DatasetSplit split;
  FmModel truth;
  // Distinct (field pair, feature pair) combinations present in validation
  // but never seen together in train.
  std::uint64_t unseen_validation_pairs = 0;
};

SynthData generate(const SynthSpec& spec);

// Zipf probabilities over ranks 1..vocab (index 0 of the result is rank 1).
std::vector<double> zipf_probabilities(std::uint32_t vocab, double exponent);

}  // namespace fmfm
