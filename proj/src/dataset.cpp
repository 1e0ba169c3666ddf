#include "fmfm/dataset.hpp"

#include <fstream>
#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"

namespace fmfm {

namespace {
constexpr std::string_view kDataKind = "fmfm-data";
constexpr std::string_view kDataVersion = "v1";
}  // namespace

void Dataset::reserve(std::size_t rows) {
  labels_.reserve(rows);
  features_.reserve(rows * fields_);
}

void Dataset::push(int label, std::span<const std::uint32_t> features) {
  if (label != 1 && label != -1) {
    throw Error(ErrorCode::kInvalidArgument, "label must be +1 or -1");
  }
  if (features.size() != fields_) {
    throw Error(ErrorCode::kDimensionMismatch, "instance has " + std::to_string(features.size()) +
                                                   " features, dataset has " +
                                                   std::to_string(fields_) + " fields");
  }
  labels_.push_back(static_cast<std::int8_t>(label));
  features_.insert(features_.end(), features.begin(), features.end());
}

void Dataset::validate(std::span<const std::uint32_t> feature_counts) const {
  if (feature_counts.size() != fields_) {
    throw Error(ErrorCode::kSchemaMismatch, "dataset has " + std::to_string(fields_) +
                                                " fields, schema has " +
                                                std::to_string(feature_counts.size()));
  }
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const auto f = i % fields_;
    if (features_[i] >= feature_counts[f]) {
      throw Error(ErrorCode::kSchemaMismatch,
                  "row " + std::to_string(i / fields_) + " field " + std::to_string(f) +
                      " index " + std::to_string(features_[i]) + " outside vocabulary");
    }
  }
}

void Dataset::write(std::ostream& out) const {
  io::write_magic(out, std::string(kDataKind) + " " + std::string(kDataVersion) + " " +
                           std::to_string(fields_));
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    io::write_pod<std::int8_t>(out, labels_[r]);
    io::write_array<std::uint32_t>(out, std::span(features_).subspan(r * fields_, fields_));
  }
}

Dataset Dataset::read(std::istream& in) {
  const auto rest = io::expect_magic(in, kDataKind, kDataVersion);
  std::istringstream header(rest);
  std::size_t n = 0;
  if (!(header >> n) || n == 0) throw Error(ErrorCode::kBadFormat, "data header needs <n>");
  Dataset data(n);
  std::vector<std::uint32_t> row(n);
  while (true) {
    std::int8_t label = 0;
    if (!in.read(reinterpret_cast<char*>(&label), 1)) break;
    io::read_array<std::uint32_t>(in, row);
    if (label != 1 && label != -1) throw Error(ErrorCode::kBadFormat, "bad label in data file");
    data.labels_.push_back(label);
    data.features_.insert(data.features_.end(), row.begin(), row.end());
  }
  return data;
}

void Dataset::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  write(out);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

Dataset Dataset::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read(in);
}

}  // namespace fmfm
