#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "fmfm/error.hpp"

// Little-endian POD serialization shared by the model, cache and data files.
namespace fmfm::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

template <typename T>
  requires std::is_arithmetic_v<T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_arithmetic_v<T>
void write_array(std::ostream& out, std::span<const T> values) {
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
  requires std::is_arithmetic_v<T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::kBadFormat, "unexpected end of binary stream");
  return value;
}

template <typename T>
  requires std::is_arithmetic_v<T>
void read_array(std::istream& in, std::span<T> values) {
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size_bytes()));
  if (!in) throw Error(ErrorCode::kBadFormat, "unexpected end of binary stream");
}

// Writes "<magic>\n". Magic strings look like "fmfm-model v1".
void write_magic(std::ostream& out, std::string_view magic);

// Reads one header line and checks that it starts with the expected kind and
// version. A matching kind with another version raises kBadVersion so
// consumers can tell the two failures apart. Returns the rest of the line
// after the magic (possibly empty).
std::string expect_magic(std::istream& in, std::string_view kind, std::string_view version);

// 64-bit FNV-1a, used for schema and model fingerprints.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);
std::uint64_t parse_hex64(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace fmfm::io
