#pragma once

#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fmfm/dataset.hpp"

namespace fmfm {

enum class Variant { kLR, kFM, kFwFM, kFvFM, kFmFM, kFFM };

// Constraint class of the field-pair matrices. FM, FwFM, FvFM and FmFM are the
// same scorer with Identity, Scalar, Diagonal and Full matrices respectively.
enum class MatrixKind { kIdentity, kScalar, kDiagonal, kFull };

enum class LinearMode { kPerFeature, kFieldShared };

std::string_view to_string(Variant v);
std::string_view to_string(MatrixKind k);
std::string_view to_string(LinearMode m);
Variant parse_variant(std::string_view name);
MatrixKind parse_matrix_kind(std::string_view name);
LinearMode parse_linear_mode(std::string_view name);

MatrixKind default_kind(Variant v);
LinearMode default_linear_mode(Variant v);
int degrees_of_freedom(MatrixKind k);
// True for the variants scored through field-pair matrices.
bool uses_pair_matrices(Variant v);

// `rows` vectors of `width` doubles, row-major.
struct Table {
  std::uint32_t rows = 0;
  std::uint32_t width = 0;
  std::vector<double> values;

  Table() = default;
  Table(std::uint32_t r, std::uint32_t w) : rows(r), width(w), values(std::size_t{r} * w, 0.0) {}

  std::span<double> row(std::size_t r) { return std::span(values).subspan(r * width, width); }
  std::span<const double> row(std::size_t r) const {
    return std::span(values).subspan(r * width, width);
  }

  friend bool operator==(const Table&, const Table&) = default;
};

// One matrix per unordered field pair k < l. Shape is rows = D_k, cols = D_l;
// the payload holds nothing (Identity), r (Scalar), d (Diagonal, rows == cols)
// or M row-major (Full).
struct FieldPairMatrix {
  std::uint32_t k = 0;
  std::uint32_t l = 0;
  MatrixKind kind = MatrixKind::kFull;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> payload;

  FieldPairMatrix() = default;
  FieldPairMatrix(std::uint32_t k, std::uint32_t l, MatrixKind kind, std::uint32_t rows,
                  std::uint32_t cols);

  static std::size_t payload_size(MatrixKind kind, std::uint32_t rows, std::uint32_t cols);

  friend bool operator==(const FieldPairMatrix&, const FieldPairMatrix&) = default;
};

// kForward maps a field-k vector into field l's space (v x M); kBackward maps
// a field-l vector into field k's space (v x M^T).
enum class Direction { kForward, kBackward };

void transform(std::span<const double> v, const FieldPairMatrix& pm, Direction dir,
               std::span<double> out);
std::vector<double> transform(std::span<const double> v, const FieldPairMatrix& pm, Direction dir);

// <vi M, vj> with vi from field k and vj from field l.
double pair_score(std::span<const double> vi, std::span<const double> vj, const FieldPairMatrix& pm);

struct ModelShape {
  Variant variant = Variant::kFmFM;
  MatrixKind kind = MatrixKind::kFull;
  LinearMode linear = LinearMode::kFieldShared;
  std::vector<std::uint32_t> feature_counts;
  std::vector<std::uint32_t> dims;  // all zero for LR
  std::uint64_t schema_hash = 0;

  // Fills kind and linear mode from the variant defaults.
  static ModelShape make(Variant v, std::vector<std::uint32_t> feature_counts,
                         std::vector<std::uint32_t> dims, std::uint64_t schema_hash = 0);

  void validate() const;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

enum class BlockKind { kEmbedding, kPairMatrix, kLinear, kBias };

// A contiguous parameter block. Row-sparse blocks (embeddings, per-feature
// linear weights) are addressed by (field, row); all others are dense.
template <typename T>
struct BasicParamBlock {
  BlockKind kind;
  std::uint32_t field;  // owning field, or pair index for kPairMatrix
  std::uint32_t width;  // row width
  bool row_sparse;
  std::span<T> values;
};
using ParamBlock = BasicParamBlock<double>;
using ConstParamBlock = BasicParamBlock<const double>;

class FmModel {
 public:
  FmModel() = default;
  // All parameters zero.
  explicit FmModel(ModelShape shape);

  const ModelShape& shape() const { return shape_; }
  Variant variant() const { return shape_.variant; }
  MatrixKind kind() const { return shape_.kind; }
  LinearMode linear_mode() const { return shape_.linear; }
  std::size_t field_count() const { return shape_.feature_counts.size(); }
  std::uint32_t dim(std::size_t field) const { return shape_.dims[field]; }

  std::span<double> embedding(std::size_t field, std::uint32_t local) {
    return embeddings_[field].row(local);
  }
  std::span<const double> embedding(std::size_t field, std::uint32_t local) const {
    return embeddings_[field].row(local);
  }
  // FFM only: feature's vector dedicated to interactions with `target`.
  std::span<double> ffm_embedding(std::size_t field, std::uint32_t local, std::size_t target);
  std::span<const double> ffm_embedding(std::size_t field, std::uint32_t local,
                                        std::size_t target) const;

  Table& embeddings(std::size_t field) { return embeddings_[field]; }
  const Table& embeddings(std::size_t field) const { return embeddings_[field]; }

  static std::size_t pair_index(std::size_t k, std::size_t l, std::size_t n);
  FieldPairMatrix& pair(std::size_t k, std::size_t l) {
    return pairs_[pair_index(k, l, field_count())];
  }
  const FieldPairMatrix& pair(std::size_t k, std::size_t l) const {
    return pairs_[pair_index(k, l, field_count())];
  }
  std::vector<FieldPairMatrix>& pairs() { return pairs_; }
  const std::vector<FieldPairMatrix>& pairs() const { return pairs_; }

  // PerFeature: rows = feature_count, width 1. FieldShared: rows 1, width D_f.
  Table& linear(std::size_t field) { return linear_[field]; }
  const Table& linear(std::size_t field) const { return linear_[field]; }

  double& bias() { return bias_; }
  double bias() const { return bias_; }

  // Fixed traversal order: per field (embedding, linear), then pairs by
  // (k, l), then the bias.
  std::vector<ParamBlock> blocks();
  std::vector<ConstParamBlock> blocks() const;

  // Number of stored parameters found by walking every block.
  std::size_t parameter_count(bool include_bias = false) const;

  void fill(double value);

  std::string serialize() const;
  static FmModel parse(std::string_view bytes);
  // Reads one model from the stream and leaves the position after it.
  static FmModel read(std::istream& in);
  void save(const std::string& path) const;
  static FmModel load(const std::string& path);
  std::uint64_t hash() const;

  friend bool operator==(const FmModel&, const FmModel&) = default;

 private:
  template <typename Block, typename Self>
  static std::vector<Block> collect_blocks(Self& self);

  ModelShape shape_;
  std::vector<Table> embeddings_;
  std::vector<FieldPairMatrix> pairs_;
  std::vector<Table> linear_;
  double bias_ = 0.0;
};

// Logit of the instance: bias + linear part + all n(n-1)/2 field-pair terms.
double score(const FmModel& model, Instance inst);

inline constexpr double kLogitClamp = 35.0;
double sigmoid(double logit);
double predict_proba(const FmModel& model, Instance inst);

// Throws kSchemaMismatch unless the instance fits the model's vocabulary.
void check_instance(const FmModel& model, Instance inst);

}  // namespace fmfm
