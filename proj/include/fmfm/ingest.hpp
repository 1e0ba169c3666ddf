#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fmfm/dataset.hpp"
#include "fmfm/schema.hpp"

namespace fmfm {

// Log-square bucketing of integer counters: values above 2 become
// floor(ln(x)^2), everything else passes through as its literal text.
std::string transform_numeric(std::optional<std::int64_t> value);

struct HourTokens {
  std::string day_of_week;  // "0".."6", Sunday = 0
  std::string hour;         // "0".."23"
};

// Splits an Avazu YYMMDDHH timestamp. Returns nullopt for malformed input.
std::optional<HourTokens> expand_avazu_hour(std::string_view raw);

enum class DataFormat { kCriteo, kAvazu };

DataFormat parse_data_format(std::string_view name);

struct RawRow {
  std::int8_t label = 1;
  std::vector<std::string> tokens;  // one per field, already transformed
};

// Parses raw Criteo TSV or Avazu CSV into transformed token rows. Malformed
// rows are skipped and counted.
class RawReader {
 public:
  RawReader(DataFormat format, std::istream& in);

  // Field layout of this input (Avazu reads it from the header).
  const std::vector<std::string>& field_names() const { return names_; }
  std::vector<FieldSpec> field_specs(std::uint32_t min_frequency) const;

  bool next(RawRow& row);
  std::uint64_t rejected() const { return rejected_; }

 private:
  bool parse_criteo(std::string_view line, RawRow& row) const;
  bool parse_avazu(std::string_view line, RawRow& row) const;

  DataFormat format_;
  std::istream& in_;
  std::vector<std::string> names_;
  std::vector<FieldKind> kinds_;
  // Avazu column roles.
  std::size_t columns_ = 0;
  std::size_t click_col_ = 0;
  std::size_t hour_col_ = 0;
  std::size_t id_col_ = static_cast<std::size_t>(-1);
  std::uint64_t rejected_ = 0;
  std::string line_;
};

std::vector<std::string> criteo_field_names();

EncodedInstance encode_row(const FieldSchema& schema, const RawRow& row);

enum class SplitPart { kTrain, kValidation, kTest };

// Per-instance independent draws with probabilities (0.8, 0.1, 0.1). The
// sequence depends only on the seed, so a streaming consumer that calls
// next() once per row in input order reproduces split_dataset exactly.
class SplitAssigner {
 public:
  explicit SplitAssigner(std::uint64_t seed) : rng_(seed) {}
  SplitPart next();

 private:
  std::mt19937_64 rng_;
};

DatasetSplit split_dataset(const Dataset& instances, std::uint64_t seed);

}  // namespace fmfm
