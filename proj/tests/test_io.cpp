#include <doctest.h>

#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"
#include "test_util.hpp"

using namespace fmfm;

TEST_CASE("fnv1a matches the published 64-bit test vectors") {
  CHECK(io::fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(io::fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hex64 round trip") {
  for (std::uint64_t v : {0ULL, 1ULL, 0xdeadbeefcafef00dULL, ~0ULL}) {
    CHECK(io::parse_hex64(io::hex64(v)) == v);
  }
  CHECK(io::hex64(255) == "00000000000000ff");
  CHECK_THROWS_AS(io::parse_hex64("xyz"), Error);
}

TEST_CASE("magic header checks kind and version separately") {
  std::stringstream ok;
  io::write_magic(ok, "fmfm-data v1 39");
  CHECK(io::expect_magic(ok, "fmfm-data", "v1") == "39");

  std::stringstream wrong_version("fmfm-data v2 39\n");
  try {
    io::expect_magic(wrong_version, "fmfm-data", "v1");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadVersion);
  }

  std::stringstream wrong_kind("fmfm-model v1\n");
  try {
    io::expect_magic(wrong_kind, "fmfm-data", "v1");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadFormat);
  }
}

TEST_CASE("pods are little-endian on disk") {
  std::stringstream s;
  io::write_pod<std::uint32_t>(s, 0x01020304u);
  const auto bytes = s.str();
  REQUIRE(bytes.size() == 4);
  CHECK(bytes[0] == 0x04);
  CHECK(bytes[3] == 0x01);
  CHECK(io::read_pod<std::uint32_t>(s) == 0x01020304u);
  CHECK_THROWS_AS(io::read_pod<std::uint32_t>(s), Error);
}

TEST_CASE("missing file is an io error") {
  try {
    io::read_file("/nonexistent/fmfm/file");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
  }
}
