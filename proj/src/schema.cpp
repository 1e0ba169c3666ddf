#include "fmfm/schema.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"

namespace fmfm {

namespace {

constexpr std::string_view kSchemaKind = "fmfm-schema";
constexpr std::string_view kSchemaVersion = "v1";

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::kBadFormat, "bad " + std::string(what) + " '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    parts.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

void check_token(std::string_view token) {
  if (token.find_first_of("\t\n\r") != std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument, "token contains a tab or newline");
  }
}

}  // namespace

FieldSchema::FieldSchema(std::vector<std::string> names, std::vector<std::vector<Entry>> entries)
    : names_(std::move(names)), entries_(std::move(entries)) {
  if (names_.empty()) throw Error(ErrorCode::kInvalidArgument, "schema needs at least one field");
  if (entries_.size() != names_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "schema entries do not match field count");
  }
  index();
}

void FieldSchema::index() {
  std::set<std::string_view> seen;
  for (const auto& name : names_) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate field name '" + name + "'");
    }
  }
  const auto n = names_.size();
  vocab_.assign(n, {});
  feature_counts_.assign(n, 1);
  offsets_.assign(n, 0);
  total_features_ = 0;
  for (std::size_t f = 0; f < n; ++f) {
    auto& list = entries_[f];
    std::sort(list.begin(), list.end(),
              [](const Entry& a, const Entry& b) { return a.local < b.local; });
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (list[i].local != i + 1) {
        throw Error(ErrorCode::kBadFormat, "field " + std::to_string(f) +
                                               ": local indices must be dense from 1");
      }
      if (!vocab_[f].emplace(list[i].token, list[i].local).second) {
        throw Error(ErrorCode::kBadFormat, "field " + std::to_string(f) + ": duplicate token '" +
                                               list[i].token + "'");
      }
    }
    feature_counts_[f] = static_cast<std::uint32_t>(list.size() + 1);
    offsets_[f] = total_features_;
    total_features_ += feature_counts_[f];
  }
}

std::uint32_t FieldSchema::feature_count(std::size_t field) const {
  if (field >= names_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "field " + std::to_string(field) + " out of range");
  }
  return feature_counts_[field];
}

GlobalFeatureId FieldSchema::encode_token(std::size_t field, std::string_view token) const {
  if (field >= names_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "field " + std::to_string(field) + " out of range");
  }
  const auto& vocab = vocab_[field];
  auto it = vocab.find(token);
  const auto local = it == vocab.end() ? kUnknownIndex : it->second;
  return {static_cast<std::uint32_t>(field), local};
}

const std::string& FieldSchema::decode(GlobalFeatureId id) const {
  static const std::string kUnknown;
  if (id.field >= names_.size() || id.local >= feature_counts_[id.field]) {
    throw Error(ErrorCode::kInvalidArgument, "feature id out of range");
  }
  if (id.local == kUnknownIndex) return kUnknown;
  return entries_[id.field][id.local - 1].token;
}

std::span<const FieldSchema::Entry> FieldSchema::entries(std::size_t field) const {
  feature_count(field);
  return entries_[field];
}

std::uint64_t FieldSchema::global_offset(std::size_t field) const {
  feature_count(field);
  return offsets_[field];
}

std::string FieldSchema::serialize() const {
  std::ostringstream out;
  out << kSchemaKind << ' ' << kSchemaVersion << ' ' << names_.size() << ' ' << total_features_
      << '\n';
  for (std::size_t f = 0; f < names_.size(); ++f) {
    out << "#field\t" << f << '\t' << names_[f] << '\n';
  }
  for (std::size_t f = 0; f < names_.size(); ++f) {
    for (const auto& e : entries_[f]) {
      out << f << '\t' << e.token << '\t' << e.local << '\t' << e.count << '\n';
    }
  }
  return std::move(out).str();
}

FieldSchema FieldSchema::parse(std::istream& in) {
  const auto rest = io::expect_magic(in, kSchemaKind, kSchemaVersion);
  std::istringstream header(rest);
  std::size_t n = 0;
  std::uint64_t m = 0;
  if (!(header >> n >> m) || n == 0) {
    throw Error(ErrorCode::kBadFormat, "schema header needs <n> <m>");
  }
  std::vector<std::string> names(n);
  for (std::size_t f = 0; f < n; ++f) names[f] = "field" + std::to_string(f);
  std::vector<std::vector<Entry>> entries(n);

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto parts = split_tabs(line);
    if (line.front() == '#') {
      if (parts.size() == 3 && parts[0] == "#field") {
        const auto f = parse_number<std::size_t>(parts[1], "field index");
        if (f >= n) throw Error(ErrorCode::kBadFormat, "field index out of range");
        names[f] = std::string(parts[2]);
      }
      continue;
    }
    if (parts.size() != 4) throw Error(ErrorCode::kBadFormat, "schema line needs 4 columns");
    const auto f = parse_number<std::size_t>(parts[0], "field index");
    if (f >= n) throw Error(ErrorCode::kBadFormat, "field index out of range");
    entries[f].push_back({std::string(parts[1]), parse_number<std::uint32_t>(parts[2], "local index"),
                          parse_number<std::uint64_t>(parts[3], "count")});
  }
  FieldSchema schema(std::move(names), std::move(entries));
  if (schema.total_features() != m) {
    throw Error(ErrorCode::kBadFormat, "schema header says m=" + std::to_string(m) + " but found " +
                                           std::to_string(schema.total_features()));
  }
  return schema;
}

FieldSchema FieldSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse(in);
}

void FieldSchema::save(const std::string& path) const { io::write_file(path, serialize()); }

std::uint64_t FieldSchema::hash() const { return io::fnv1a(serialize()); }

SchemaBuilder::SchemaBuilder(std::vector<FieldSpec> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw Error(ErrorCode::kInvalidArgument, "field spec is empty");
  std::set<std::string_view> seen;
  for (const auto& f : fields_) {
    if (!seen.insert(f.name).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate field name '" + f.name + "'");
    }
    if (f.min_frequency < 1) {
      throw Error(ErrorCode::kInvalidArgument, "min_frequency must be >= 1 for " + f.name);
    }
  }
  counts_.resize(fields_.size());
}

void SchemaBuilder::add_row(std::span<const std::string> row) {
  if (row.size() != fields_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "row has " + std::to_string(row.size()) +
                                                 " tokens, expected " +
                                                 std::to_string(fields_.size()));
  }
  for (std::size_t f = 0; f < row.size(); ++f) {
    if (row[f].empty()) continue;
    auto it = counts_[f].find(row[f]);
    if (it == counts_[f].end()) {
      check_token(row[f]);
      counts_[f].emplace(row[f], 1);
    } else {
      ++it->second;
    }
  }
  ++rows_;
}

void SchemaBuilder::merge(const SchemaBuilder& other) {
  if (other.fields_.size() != fields_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot merge builders with different fields");
  }
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    for (const auto& [token, count] : other.counts_[f]) counts_[f][token] += count;
  }
  rows_ += other.rows_;
}

FieldSchema SchemaBuilder::finish() const {
  if (rows_ == 0) throw Error(ErrorCode::kEmptyInput, "no rows to build a schema from");
  std::vector<std::string> names;
  std::vector<std::vector<FieldSchema::Entry>> entries(fields_.size());
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    names.push_back(fields_[f].name);
    auto& list = entries[f];
    for (const auto& [token, count] : counts_[f]) {
      if (count >= fields_[f].min_frequency) list.push_back({token, 0, count});
    }
    // Frequent tokens get small indices; ties resolved by token text.
    std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      return a.count > b.count;
    });
    for (std::size_t i = 0; i < list.size(); ++i) list[i].local = static_cast<std::uint32_t>(i + 1);
  }
  return FieldSchema(std::move(names), std::move(entries));
}

FieldSchema build_schema(std::span<const std::vector<std::string>> rows,
                         const std::vector<FieldSpec>& fields) {
  SchemaBuilder builder(fields);
  for (const auto& row : rows) builder.add_row(row);
  return builder.finish();
}

}  // namespace fmfm
