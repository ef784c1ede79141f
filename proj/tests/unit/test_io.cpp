#include <doctest.h>

#include <cmath>
#include <limits>

#include "../support.hpp"
#include "kgc/error.hpp"
#include "kgc/io.hpp"

using namespace kgc;

TEST_CASE("sha256 of known strings") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("real formatting round-trips") {
  for (double x : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 6.02214076e23, -1e-300, 123456789.123456789}) {
    CHECK(io::parse_real(io::format_real(x)) == x);
  }
  CHECK_THROWS_AS(io::parse_real("1.5x"), Error);
  CHECK(io::parse_int("42") == 42);
  CHECK_THROWS_AS(io::parse_int("4.2"), Error);
}

TEST_CASE("float32 blocks round-trip float values exactly") {
  test::TempDir dir;
  const std::vector<double> values = {0.0, 1.5, -0.25, static_cast<float>(0.1), static_cast<float>(3.0e10)};
  io::write_f32(dir / "v.f32", values);
  CHECK(io::read_f32(dir / "v.f32") == values);
  CHECK(std::filesystem::file_size(dir / "v.f32") == 4 * values.size());
}

TEST_CASE("TSV rows report the offending line") {
  test::TempDir dir;
  io::write_text(dir / "a.tsv", "x\ty\tz\r\n\nx\ty\n");
  std::size_t rows = 0;
  try {
    io::for_each_row(dir / "a.tsv", 3, [&](std::span<const std::string_view> f, std::size_t) {
      CHECK(f[2] == "z");
      ++rows;
    });
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedLine);
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  CHECK(rows == 1);
}

TEST_CASE("json hashing ignores formatting but not content") {
  io::Json a = {{"x", 1}, {"y", {1, 2}}};
  io::Json b = io::Json::parse(R"({"x":1,   "y":[1,2]})");
  CHECK(io::sha256_json(a) == io::sha256_json(b));
  b["x"] = 2;
  CHECK(io::sha256_json(a) != io::sha256_json(b));
}
