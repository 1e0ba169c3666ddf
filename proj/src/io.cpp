#include <cstdio>
#include <fstream>
#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"

namespace fmfm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kSchemaMismatch: return "schema-mismatch";
    case ErrorCode::kBadFormat: return "bad-format";
    case ErrorCode::kBadVersion: return "bad-version";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kDiverged: return "diverged";
  }
  return "unknown";
}

namespace io {

void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  out.put('\n');
}

std::string expect_magic(std::istream& in, std::string_view kind, std::string_view version) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kBadFormat, "missing header, expected " + std::string(kind));
  }
  std::istringstream fields(line);
  std::string got_kind;
  std::string got_version;
  fields >> got_kind >> got_version;
  if (got_kind != kind) {
    throw Error(ErrorCode::kBadFormat,
                "expected " + std::string(kind) + " header, got '" + got_kind + "'");
  }
  if (got_version != version) {
    throw Error(ErrorCode::kBadVersion, std::string(kind) + " version " + got_version +
                                            " not supported (want " + std::string(version) + ")");
  }
  std::string rest;
  std::getline(fields >> std::ws, rest);
  return rest;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t parse_hex64(std::string_view text) {
  if (text.empty() || text.size() > 16) {
    throw Error(ErrorCode::kBadFormat, "bad hash '" + std::string(text) + "'");
  }
  std::uint64_t v = 0;
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw Error(ErrorCode::kBadFormat, "bad hash '" + std::string(text) + "'");
  }
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

}  // namespace io
}  // namespace fmfm
