#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fmfm/dataset.hpp"
#include "fmfm/model.hpp"

namespace fmfm {

// Which field of an equal-dimension pair gets its intermediate vectors cached.
enum class CacheTieBreak { kLowerFieldIndex, kMoreFeatures };

// Precomputed intermediate vectors for one field pair. `cached_side` is the
// field with the larger embedding dimension; each of its features stores
// v_i transformed into the other field's space, so the vectors have dimension
// min(D_k, D_l).
template <typename Real>
struct CachedPair {
  std::uint32_t k = 0;
  std::uint32_t l = 0;
  std::uint32_t cached_side = 0;
  std::uint32_t dim = 0;
  std::vector<Real> vectors;  // feature_count(cached_side) x dim

  std::uint32_t other_side() const { return cached_side == k ? l : k; }
  std::span<const Real> vector(std::uint32_t local) const {
    return std::span(vectors).subspan(std::size_t{local} * dim, dim);
  }
};

// FFM-shaped scorer built from an FM-family model: every pair term is one
// dot product between a cached vector and a raw embedding.
template <typename Real>
class CachedModel {
 public:
  CachedModel() = default;

  static CachedModel build(const FmModel& model,
                           CacheTieBreak tie = CacheTieBreak::kLowerFieldIndex);

  std::size_t field_count() const { return feature_counts_.size(); }
  const std::vector<std::uint32_t>& feature_counts() const { return feature_counts_; }
  const std::vector<std::uint32_t>& dims() const { return dims_; }
  const std::vector<CachedPair<Real>>& pairs() const { return pairs_; }
  std::uint64_t source_model_hash() const { return source_hash_; }
  std::uint64_t schema_hash() const { return schema_hash_; }

  double score(Instance inst) const;

  // Numbers held by the pair tables: sum over pairs of
  // feature_count(cached side) * min(D_k, D_l).
  std::uint64_t pair_table_size() const;
  // FLOPs of one score() call: one dot per pair (2d + 1) plus 2 per field
  // for the folded linear term.
  std::uint64_t flops_per_instance() const;

  std::string serialize() const;
  static CachedModel parse(std::string_view bytes);

 private:
  std::uint64_t source_hash_ = 0;
  std::uint64_t schema_hash_ = 0;
  std::vector<std::uint32_t> feature_counts_;
  std::vector<std::uint32_t> dims_;
  double bias_ = 0.0;
  std::vector<std::vector<Real>> linear_;      // per field, one scalar per feature
  std::vector<std::vector<Real>> embeddings_;  // per field, feature_count x D_f
  std::vector<CachedPair<Real>> pairs_;
};

extern template class CachedModel<float>;
extern template class CachedModel<double>;

using CachedModel32 = CachedModel<float>;
using CachedModel64 = CachedModel<double>;

template <typename Real>
double cached_score(const CachedModel<Real>& cm, Instance inst) {
  return cm.score(inst);
}

enum class CachePrecision { k32, k64 };

// A cache file of either precision.
class AnyCachedModel {
 public:
  AnyCachedModel() = default;
  AnyCachedModel(CachedModel32 m) : model_(std::move(m)) {}
  AnyCachedModel(CachedModel64 m) : model_(std::move(m)) {}

  static AnyCachedModel build(const FmModel& model, CachePrecision precision,
                              CacheTieBreak tie = CacheTieBreak::kLowerFieldIndex);
  static AnyCachedModel parse(std::string_view bytes);
  static AnyCachedModel load(const std::string& path);
  void save(const std::string& path) const;

  CachePrecision precision() const;
  double score(Instance inst) const;
  std::vector<double> score_all(const Dataset& data) const;
  std::uint64_t source_model_hash() const;
  std::uint64_t schema_hash() const;
  std::uint64_t flops_per_instance() const;
  std::uint64_t pair_table_size() const;

 private:
  std::variant<CachedModel32, CachedModel64> model_;
};

}  // namespace fmfm
