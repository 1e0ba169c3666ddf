#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace fmfm {

// Read-only view of one encoded instance: the ±1 label and one local feature
// index per field, in field order.
struct Instance {
  int label = 1;
  std::span<const std::uint32_t> features;
};

struct EncodedInstance {
  std::int8_t label = 1;
  std::vector<std::uint32_t> features;

  Instance view() const { return {label, features}; }
};

// Flat storage for encoded instances of a fixed field count.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::size_t field_count) : fields_(field_count) {}

  std::size_t field_count() const { return fields_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  void reserve(std::size_t rows);
  void push(int label, std::span<const std::uint32_t> features);
  void push(const EncodedInstance& inst) { push(inst.label, inst.features); }

  Instance operator[](std::size_t row) const {
    return {labels_[row], std::span(features_).subspan(row * fields_, fields_)};
  }
  std::span<const std::int8_t> labels() const { return labels_; }

  // Throws kSchemaMismatch when any index is outside its field's vocabulary.
  void validate(std::span<const std::uint32_t> feature_counts) const;

  // "fmfm-data v1 <n>\n" then per record: i8 label, n x u32 local indices.
  void write(std::ostream& out) const;
  static Dataset read(std::istream& in);
  void save(const std::string& path) const;
  static Dataset load(const std::string& path);

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t fields_ = 0;
  std::vector<std::int8_t> labels_;
  std::vector<std::uint32_t> features_;
};

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::uint64_t seed = 0;
};

}  // namespace fmfm
