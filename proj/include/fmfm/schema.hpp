#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fmfm {

enum class FieldKind { kCategorical, kNumeric };

struct FieldSpec {
  std::string name;
  FieldKind kind = FieldKind::kCategorical;
  std::uint32_t min_frequency = 1;
};

struct GlobalFeatureId {
  std::uint32_t field = 0;
  std::uint32_t local = 0;

  friend bool operator==(const GlobalFeatureId&, const GlobalFeatureId&) = default;
  friend auto operator<=>(const GlobalFeatureId&, const GlobalFeatureId&) = default;
};

inline constexpr std::uint32_t kUnknownIndex = 0;

// Immutable field/feature vocabulary. Local index 0 of every field is the
// unknown slot; retained tokens occupy 1..feature_count-1.
class FieldSchema {
 public:
  struct Entry {
    std::string token;
    std::uint32_t local = 0;
    std::uint64_t count = 0;
  };

  FieldSchema() = default;
  FieldSchema(std::vector<std::string> names, std::vector<std::vector<Entry>> entries);

  std::size_t field_count() const { return names_.size(); }
  const std::vector<std::string>& field_names() const { return names_; }
  std::uint32_t feature_count(std::size_t field) const;
  const std::vector<std::uint32_t>& feature_counts() const { return feature_counts_; }
  std::uint64_t total_features() const { return total_features_; }

  GlobalFeatureId encode_token(std::size_t field, std::string_view token) const;
  // Inverse of encode_token for retained features; the unknown slot decodes
  // to an empty string.
  const std::string& decode(GlobalFeatureId id) const;
  // Entries of a field sorted by local index.
  std::span<const Entry> entries(std::size_t field) const;

  // Offset of each field's first feature in the flattened 0..m-1 index space.
  std::uint64_t global_offset(std::size_t field) const;

  std::string serialize() const;
  static FieldSchema parse(std::istream& in);
  static FieldSchema load(const std::string& path);
  void save(const std::string& path) const;

  // FNV-1a of the serialized text; model and cache files carry it.
  std::uint64_t hash() const;

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  using Vocab = std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>>;

  void index();

  std::vector<std::string> names_;
  std::vector<std::vector<Entry>> entries_;
  std::vector<Vocab> vocab_;
  std::vector<std::uint32_t> feature_counts_;
  std::vector<std::uint64_t> offsets_;
  std::uint64_t total_features_ = 0;
};

// Single frequency pass over token rows followed by thresholding. Rows must
// hold one token per field in field_spec order. Empty tokens are treated as
// missing and are never retained.
class SchemaBuilder {
 public:
  explicit SchemaBuilder(std::vector<FieldSpec> fields);

  void add_row(std::span<const std::string> row);
  // Deterministic merge of a builder that counted a separate shard.
  void merge(const SchemaBuilder& other);
  std::uint64_t rows() const { return rows_; }

  FieldSchema finish() const;

 private:
  std::vector<FieldSpec> fields_;
  std::vector<std::map<std::string, std::uint64_t, std::less<>>> counts_;
  std::uint64_t rows_ = 0;
};

FieldSchema build_schema(std::span<const std::vector<std::string>> rows,
                         const std::vector<FieldSpec>& fields);

}  // namespace fmfm
