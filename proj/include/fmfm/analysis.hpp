#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "fmfm/dataset.hpp"
#include "fmfm/model.hpp"

namespace fmfm {

// Exact AUC by sort-and-rank; tied scores count one half. Labels are ±1.
double auc(std::span<const double> scores, std::span<const std::int8_t> labels);

inline constexpr double kProbabilityClamp = 1e-7;
double logloss(std::span<const double> probs, std::span<const std::int8_t> labels);

struct Metrics {
  double auc = 0.5;
  double logloss = 0.0;
};

// Logits for every row, computed on `threads` workers; output order is row
// order regardless of thread count.
std::vector<double> score_all(const FmModel& model, const Dataset& data, unsigned threads = 1);
Metrics evaluate_logits(std::span<const double> logits, std::span<const std::int8_t> labels);
Metrics evaluate(const FmModel& model, const Dataset& data, unsigned threads = 1);

// Parameter counts, bias excluded. `linear` selects per-feature weights (m
// of them) or per-field shared vectors (sum of D_f).
std::uint64_t count_params(Variant v, std::uint64_t m, std::uint64_t n, std::uint64_t k,
                           LinearMode linear = LinearMode::kPerFeature);
// Per-field form; dims may vary only for FmFM.
std::uint64_t count_params(Variant v, std::span<const std::uint32_t> feature_counts,
                           std::span<const std::uint32_t> dims, LinearMode linear);

// Inference FLOPs per instance.
//   dot product of length d ........ 2d + 1
//   matrix-vector a x b ............ 2ab
//   scalar scaling ................. 1 per applied scalar
//   FM reformulated sum of squares . 3 per (field, dimension)
//   linear term .................... 2 per field; 2 D_f + 1 per field for
//                                    uncached field-shared vectors
// A cached model folds <v_i, w_F(i)> into one scalar per feature, so its
// linear cost is always 2 per field.
std::uint64_t estimate_flops(Variant v, std::uint64_t n, std::uint64_t k, bool cached,
                             LinearMode linear = LinearMode::kPerFeature);
std::uint64_t estimate_flops(Variant v, std::span<const std::uint32_t> dims, bool cached,
                             LinearMode linear = LinearMode::kPerFeature);

// Dense symmetric n x n matrix.
struct FieldMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  explicit FieldMatrix(std::size_t size = 0) : n(size), values(size * size, 0.0) {}
  double& at(std::size_t k, std::size_t l) { return values[k * n + l]; }
  double at(std::size_t k, std::size_t l) const { return values[k * n + l]; }

  void write_csv(std::ostream& out) const;
};

// Plug-in estimate of I((X_k, X_l); Y) in bits.
double field_pair_mi(const Dataset& data, std::size_t k, std::size_t l);
FieldMatrix mi_matrix(const Dataset& data);

// Entry (k, l) = min(D_k, D_l); the diagonal holds D_k.
FieldMatrix cross_dim_map(std::span<const std::uint32_t> dims);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);
// Correlation over the strict upper triangle of two field matrices.
double upper_triangle_spearman(const FieldMatrix& a, const FieldMatrix& b);

}  // namespace fmfm
