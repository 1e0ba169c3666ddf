#include "fmfm/ingest.hpp"

#include <charconv>
#include <chrono>
#include <cmath>

#include "fmfm/error.hpp"

namespace fmfm {

namespace {

constexpr std::size_t kCriteoNumeric = 13;
constexpr std::size_t kCriteoCategorical = 26;

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    parts.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string_view chomp(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
  return line;
}

template <typename T>
bool parse_int(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::string transform_numeric(std::optional<std::int64_t> value) {
  if (!value) return "missing";
  if (*value <= 2) return std::to_string(*value);
  const double l = std::log(static_cast<double>(*value));
  return std::to_string(static_cast<std::int64_t>(std::floor(l * l)));
}

std::optional<HourTokens> expand_avazu_hour(std::string_view raw) {
  if (raw.size() != 8) return std::nullopt;
  int yy = 0;
  unsigned mm = 0;
  unsigned dd = 0;
  unsigned hh = 0;
  if (!parse_int(raw.substr(0, 2), yy) || !parse_int(raw.substr(2, 2), mm) ||
      !parse_int(raw.substr(4, 2), dd) || !parse_int(raw.substr(6, 2), hh)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day date{std::chrono::year(2000 + yy), std::chrono::month(mm),
                                         std::chrono::day(dd)};
  if (!date.ok() || hh > 23) return std::nullopt;
  const std::chrono::weekday wd{std::chrono::sys_days(date)};
  return HourTokens{std::to_string(wd.c_encoding()), std::to_string(hh)};
}

DataFormat parse_data_format(std::string_view name) {
  if (name == "criteo") return DataFormat::kCriteo;
  if (name == "avazu") return DataFormat::kAvazu;
  throw Error(ErrorCode::kInvalidArgument, "unknown data format '" + std::string(name) + "'");
}

std::vector<std::string> criteo_field_names() {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= kCriteoNumeric; ++i) names.push_back("I" + std::to_string(i));
  for (std::size_t i = 1; i <= kCriteoCategorical; ++i) names.push_back("C" + std::to_string(i));
  return names;
}

RawReader::RawReader(DataFormat format, std::istream& in) : format_(format), in_(in) {
  if (format_ == DataFormat::kCriteo) {
    names_ = criteo_field_names();
    kinds_.assign(kCriteoNumeric, FieldKind::kNumeric);
    kinds_.resize(names_.size(), FieldKind::kCategorical);
    columns_ = 1 + names_.size();
    return;
  }
  std::string header;
  if (!std::getline(in_, header)) throw Error(ErrorCode::kEmptyInput, "avazu input has no header");
  const auto cols = split(chomp(header), ',');
  columns_ = cols.size();
  bool have_click = false;
  bool have_hour = false;
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] == "click") {
      click_col_ = c;
      have_click = true;
    } else if (cols[c] == "id") {
      id_col_ = c;
    } else if (cols[c] == "hour") {
      hour_col_ = c;
      have_hour = true;
      names_.push_back("day_of_week");
      names_.push_back("hour");
    } else {
      names_.emplace_back(cols[c]);
    }
  }
  if (!have_click || !have_hour) {
    throw Error(ErrorCode::kBadFormat, "avazu header needs 'click' and 'hour' columns");
  }
  kinds_.assign(names_.size(), FieldKind::kCategorical);
}

std::vector<FieldSpec> RawReader::field_specs(std::uint32_t min_frequency) const {
  std::vector<FieldSpec> specs;
  for (std::size_t f = 0; f < names_.size(); ++f) specs.push_back({names_[f], kinds_[f], min_frequency});
  return specs;
}

bool RawReader::parse_criteo(std::string_view line, RawRow& row) const {
  const auto cols = split(line, '\t');
  if (cols.size() != columns_) return false;
  if (cols[0] == "1") row.label = 1;
  else if (cols[0] == "0") row.label = -1;
  else return false;
  row.tokens.clear();
  for (std::size_t i = 1; i <= kCriteoNumeric; ++i) {
    if (cols[i].empty()) {
      row.tokens.push_back(transform_numeric(std::nullopt));
      continue;
    }
    std::int64_t v = 0;
    if (!parse_int(cols[i], v)) return false;
    row.tokens.push_back(transform_numeric(v));
  }
  for (std::size_t i = 1 + kCriteoNumeric; i < cols.size(); ++i) row.tokens.emplace_back(cols[i]);
  return true;
}

bool RawReader::parse_avazu(std::string_view line, RawRow& row) const {
  const auto cols = split(line, ',');
  if (cols.size() != columns_) return false;
  if (cols[click_col_] == "1") row.label = 1;
  else if (cols[click_col_] == "0") row.label = -1;
  else return false;
  row.tokens.clear();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c == click_col_ || c == id_col_) continue;
    if (c == hour_col_) {
      auto hour = expand_avazu_hour(cols[c]);
      if (!hour) return false;
      row.tokens.push_back(std::move(hour->day_of_week));
      row.tokens.push_back(std::move(hour->hour));
      continue;
    }
    row.tokens.emplace_back(cols[c]);
  }
  return true;
}

bool RawReader::next(RawRow& row) {
  while (std::getline(in_, line_)) {
    const auto line = chomp(line_);
    if (line.empty()) continue;
    const bool ok = format_ == DataFormat::kCriteo ? parse_criteo(line, row) : parse_avazu(line, row);
    if (ok) return true;
    ++rejected_;
  }
  return false;
}

EncodedInstance encode_row(const FieldSchema& schema, const RawRow& row) {
  if (row.tokens.size() != schema.field_count()) {
    throw Error(ErrorCode::kSchemaMismatch, "row has " + std::to_string(row.tokens.size()) +
                                                " tokens, schema has " +
                                                std::to_string(schema.field_count()) + " fields");
  }
  EncodedInstance inst;
  inst.label = row.label;
  inst.features.reserve(row.tokens.size());
  for (std::size_t f = 0; f < row.tokens.size(); ++f) {
    inst.features.push_back(schema.encode_token(f, row.tokens[f]).local);
  }
  return inst;
}

SplitPart SplitAssigner::next() {
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  if (u < 0.8) return SplitPart::kTrain;
  if (u < 0.9) return SplitPart::kValidation;
  return SplitPart::kTest;
}

DatasetSplit split_dataset(const Dataset& instances, std::uint64_t seed) {
  if (instances.empty()) throw Error(ErrorCode::kEmptyInput, "cannot split an empty dataset");
  const auto n = instances.field_count();
  DatasetSplit split{Dataset(n), Dataset(n), Dataset(n), seed};
  SplitAssigner assign(seed);
  for (std::size_t r = 0; r < instances.size(); ++r) {
    const auto inst = instances[r];
    switch (assign.next()) {
      case SplitPart::kTrain: split.train.push(inst.label, inst.features); break;
      case SplitPart::kValidation: split.validation.push(inst.label, inst.features); break;
      case SplitPart::kTest: split.test.push(inst.label, inst.features); break;
    }
  }
  return split;
}

}  // namespace fmfm
