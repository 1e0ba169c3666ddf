#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fmfm/error.hpp"
#include "fmfm/binary_io.hpp"
#include "fmfm/ingest.hpp"
#include "test_util.hpp"

using namespace fmfm;

TEST_CASE("numeric transform") {
  CHECK(transform_numeric(std::nullopt) == "missing");
  CHECK(transform_numeric(2) == "2");
  CHECK(transform_numeric(0) == "0");
  CHECK(transform_numeric(-5) == "-5");
  // ln(100) = 4.60517..., squared 21.2076...
  CHECK(transform_numeric(100) == "21");
  CHECK(transform_numeric(3) == "1");  // ln 3 = 1.0986, squared 1.2069
  // Outputs change only where floor(ln(x)^2) changes.
  for (std::int64_t x = 3; x < 5000; ++x) {
    const double a = std::log(static_cast<double>(x));
    const double b = std::log(static_cast<double>(x + 1));
    const bool same_bucket = std::floor(a * a) == std::floor(b * b);
    CHECK((transform_numeric(x) == transform_numeric(x + 1)) == same_bucket);
  }
}

TEST_CASE("avazu hour expansion") {
  // 2014-10-21 was a Tuesday; Sunday is day 0.
  auto t = expand_avazu_hour("14102100");
  REQUIRE(t.has_value());
  CHECK(t->day_of_week == "2");
  CHECK(t->hour == "0");
  t = expand_avazu_hour("14102623");  // Sunday
  REQUIRE(t.has_value());
  CHECK(t->day_of_week == "0");
  CHECK(t->hour == "23");
  CHECK_FALSE(expand_avazu_hour("1410210").has_value());
  CHECK_FALSE(expand_avazu_hour("141021000").has_value());
  CHECK_FALSE(expand_avazu_hour("14133100").has_value());
  CHECK_FALSE(expand_avazu_hour("14102124").has_value());
  CHECK_FALSE(expand_avazu_hour("1410x100").has_value());
}

TEST_CASE("criteo rows") {
  std::string line = "1";
  for (int i = 0; i < 13; ++i) line += i == 2 ? "\t" : "\t" + std::to_string(i * 50);
  for (int i = 0; i < 26; ++i) line += i == 5 ? "\t" : "\t" + std::string("a") + std::to_string(i);
  std::istringstream in(line + "\n0\tbad\n" + line + "\n");
  RawReader reader(DataFormat::kCriteo, in);
  CHECK(reader.field_names().size() == 39);
  RawRow row;
  REQUIRE(reader.next(row));
  CHECK(row.label == 1);
  REQUIRE(row.tokens.size() == 39);
  CHECK(row.tokens[0] == "0");
  CHECK(row.tokens[2] == "missing");
  CHECK(row.tokens[1] == transform_numeric(50));
  CHECK(row.tokens[13] == "a0");
  CHECK(row.tokens[18] == "");
  REQUIRE(reader.next(row));
  CHECK_FALSE(reader.next(row));
  CHECK(reader.rejected() == 1);

  const auto specs = reader.field_specs(8);
  CHECK(specs[0].kind == FieldKind::kNumeric);
  CHECK(specs[13].kind == FieldKind::kCategorical);
  CHECK(specs[38].min_frequency == 8);
}

TEST_CASE("avazu rows drop id and click and expand hour") {
  const std::string header =
      "id,click,hour,C1,banner_pos,site_id,site_domain,site_category,app_id,app_domain,"
      "app_category,device_id,device_ip,device_model,device_type,device_conn_type,C14,C15,C16,"
      "C17,C18,C19,C20,C21";
  std::string row_text = "1000009418151094273,0,14102100";
  for (int i = 0; i < 21; ++i) row_text += ",v" + std::to_string(i);
  std::istringstream in(header + "\n" + row_text + "\n1,1,1410210" + std::string(21, ',') + "\n");
  RawReader reader(DataFormat::kAvazu, in);
  CHECK(reader.field_names().size() == 23);
  CHECK(reader.field_names()[0] == "day_of_week");
  CHECK(reader.field_names()[1] == "hour");
  RawRow row;
  REQUIRE(reader.next(row));
  CHECK(row.label == -1);
  REQUIRE(row.tokens.size() == 23);
  CHECK(row.tokens[0] == "2");
  CHECK(row.tokens[1] == "0");
  CHECK(row.tokens[2] == "v0");
  CHECK_FALSE(reader.next(row));
  CHECK(reader.rejected() == 1);

  std::istringstream no_click("id,hour\n");
  CHECK_THROWS_AS(RawReader(DataFormat::kAvazu, no_click), Error);
}

TEST_CASE("encode then decode reproduces retained tokens") {
  std::vector<std::vector<std::string>> rows{{"x", "1"}, {"x", "2"}, {"y", "1"}};
  const auto schema = build_schema(rows, {{"a"}, {"b"}});
  const auto inst = encode_row(schema, RawRow{1, {"x", "2"}});
  REQUIRE(inst.features.size() == 2);
  CHECK(schema.decode({0, inst.features[0]}) == "x");
  CHECK(schema.decode({1, inst.features[1]}) == "2");
  CHECK(encode_row(schema, RawRow{1, {"zzz", ""}}).features ==
        std::vector<std::uint32_t>{kUnknownIndex, kUnknownIndex});
  CHECK_THROWS_AS(encode_row(schema, RawRow{1, {"x"}}), Error);
}

TEST_CASE("split proportions within 0.1% on 10M draws") {
  SplitAssigner assign(20240601);
  std::uint64_t counts[3] = {0, 0, 0};
  constexpr std::uint64_t kDraws = 10'000'000;
  for (std::uint64_t i = 0; i < kDraws; ++i) ++counts[static_cast<int>(assign.next())];
  CHECK(std::abs(counts[0] / double(kDraws) - 0.8) <= 0.001);
  CHECK(std::abs(counts[1] / double(kDraws) - 0.1) <= 0.001);
  CHECK(std::abs(counts[2] / double(kDraws) - 0.1) <= 0.001);
}

TEST_CASE("split is a deterministic partition") {
  std::mt19937_64 rng(3);
  const std::vector<std::uint32_t> counts{5, 7};
  const auto data = testing::random_dataset(counts, 1000, rng);
  const auto a = split_dataset(data, 11);
  const auto b = split_dataset(data, 11);
  CHECK(a.train == b.train);
  CHECK(a.validation == b.validation);
  CHECK(a.test == b.test);
  CHECK(a.train.size() + a.validation.size() + a.test.size() == data.size());
  CHECK_FALSE(split_dataset(data, 12).train == a.train);

  Dataset one(2);
  one.push(1, std::vector<std::uint32_t>{1, 2});
  const auto s = split_dataset(one, 5);
  CHECK(s.train.size() + s.validation.size() + s.test.size() == 1);
  CHECK_THROWS_AS(split_dataset(Dataset(2), 5), Error);
}

TEST_CASE("dataset file round trip and validation") {
  testing::TempDir dir;
  std::mt19937_64 rng(9);
  const std::vector<std::uint32_t> counts{3, 4, 5};
  const auto data = testing::random_dataset(counts, 50, rng);
  data.save(dir.file("d.bin"));
  const auto back = Dataset::load(dir.file("d.bin"));
  CHECK(back == data);
  const auto bytes = io::read_file(dir.file("d.bin"));
  CHECK(bytes.rfind("fmfm-data v1 3\n", 0) == 0);
  CHECK(bytes.size() == std::string("fmfm-data v1 3\n").size() + 50 * (1 + 3 * 4));

  data.validate(counts);
  const std::vector<std::uint32_t> small{3, 4, 1};
  try {
    data.validate(small);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSchemaMismatch);
  }
  io::write_file(dir.file("v2.bin"), "fmfm-data v2 3\n");
  CHECK_THROWS_AS(Dataset::load(dir.file("v2.bin")), Error);
}
