#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "triage/config.hpp"
#include "triage/error.hpp"
#include "triage/io.hpp"
#include "triage/log.hpp"
#include "triage/rng.hpp"

using namespace triage;

TEST_CASE("rng streams depend only on the seed") {
  Rng a(42), b(42), c(43);
  std::vector<std::uint64_t> xa, xb, xc;
  for (int i = 0; i < 16; ++i) {
    xa.push_back(a());
    xb.push_back(b());
    xc.push_back(c());
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
}

TEST_CASE("uniform01 stays in [0, 1) and below() covers its range evenly") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  std::array<int, 6> counts{};
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.below(6)];
  for (int c : counts) CHECK(std::abs(c - n / 6) < 400);
}

TEST_CASE("shuffle is a permutation and reproducible") {
  std::vector<int> v(50), w;
  std::iota(v.begin(), v.end(), 0);
  w = v;
  Rng a(3), b(3);
  a.shuffle(std::span<int>(v));
  b.shuffle(std::span<int>(w));
  CHECK(v == w);
  std::sort(v.begin(), v.end());
  for (int i = 0; i < 50; ++i) CHECK(v[i] == i);
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("derived seeds differ by stream tag") {
  CHECK(derive_seed(1, 1) != derive_seed(1, 2));
  CHECK(derive_seed(1, 2, 3) == derive_seed(derive_seed(1, 2), 3));
  static_assert(derive_seed(5, 6) == derive_seed(5, 6));
}

TEST_CASE("split keeps empty fields, trim and chomp") {
  const auto f = io::split("a\t\tb", '\t');
  REQUIRE(f.size() == 3);
  CHECK(f[1].empty());
  CHECK(io::split("", ',').size() == 1);
  CHECK(io::trim("  x y \t") == "x y");
  CHECK(io::chomp("line\r") == "line");
  CHECK(io::chomp("line") == "line");
}

TEST_CASE("fnv1a matches published test vectors") {
  io::Fnv1a empty;
  CHECK(empty.digest() == 0xcbf29ce484222325ULL);
  io::Fnv1a a;
  a.update("a");
  CHECK(a.digest() == 0xaf63dc4c8601ec8cULL);
  io::Fnv1a foobar;
  foobar.update("foobar");
  CHECK(foobar.digest() == 0x85944171f73967e8ULL);
}

TEST_CASE("file round trip creates parent directories") {
  testing::TempDir dir("io");
  const auto path = dir / "nested/deeper/file.txt";
  io::write_file(path, "hello\n");
  CHECK(io::read_file(path) == "hello\n");
  CHECK_THROWS_AS(io::read_file(dir / "missing.txt"), IoError);
}

TEST_CASE("key-value config parsing") {
  const auto kv = config::parse_key_values("# comment\n n = 64\nlearning_rate=1e-3\n\nn = 32\n");
  CHECK(kv.at("n") == "32");
  CHECK(kv.at("learning_rate") == "1e-3");
  CHECK_THROWS_AS(config::parse_key_values("just words\n"), ParseError);
  CHECK_THROWS_AS(config::parse_key_values(" = 3\n"), ParseError);
  CHECK(config::render_key_values({{"b", "2"}, {"a", "1"}}) == "a = 1\nb = 2\n");
}

TEST_CASE("typed config conversions") {
  CHECK(config::to_size("k", "12") == 12);
  CHECK(config::to_double("k", "1e-5") == doctest::Approx(1e-5));
  CHECK(config::to_bool("k", "yes"));
  CHECK_FALSE(config::to_bool("k", "off"));
  CHECK(config::to_size_list("k", "1,2,3") == std::vector<std::size_t>{1, 2, 3});
  CHECK_THROWS_AS(config::to_size("k", "-1"), ConfigError);
  CHECK_THROWS_AS(config::to_size("k", "12x"), ConfigError);
  CHECK_THROWS_AS(config::to_double("k", ""), ConfigError);
  CHECK_THROWS_AS(config::to_bool("k", "maybe"), ConfigError);
  CHECK(config::from_double(1e-5) == "1e-05");
  CHECK(config::from_double(0.1) == "0.1");
  CHECK(config::to_double("k", config::from_double(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(config::from_size_list({1, 2, 3}) == "1,2,3");
}

TEST_CASE("warnings are captured and restored") {
  {
    WarningCapture capture;
    warn("first");
    warn("second");
    CHECK(capture.messages() == std::vector<std::string>{"first", "second"});
  }
  std::vector<std::string> seen;
  auto previous = set_warning_handler([&](const std::string& m) { seen.push_back(m); });
  warn("x");
  set_warning_handler(previous);
  CHECK(seen == std::vector<std::string>{"x"});
}
