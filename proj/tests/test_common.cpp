#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common/errors.hpp"
#include "common/hash.hpp"
#include "common/kvconfig.hpp"

using namespace ctae;

TEST_CASE("kvconfig parses keys, comments and blank lines") {
  auto cfg = KvConfig::from_string(
      "# comment\n"
      "alpha = 1.5\n"
      "\n"
      "name = run_a   # trailing comment\n"
      "count = 42\n"
      "flag = true\n"
      "dims = 3, 5, 7\n",
      "inline");
  CHECK(cfg.get_double("alpha") == doctest::Approx(1.5));
  CHECK(cfg.get_string("name") == "run_a");
  CHECK(cfg.get_int("count") == 42);
  CHECK(cfg.get_bool("flag"));
  CHECK(cfg.get_int_list("dims") == std::vector<int64_t>{3, 5, 7});
  CHECK_NOTHROW(cfg.finish());
}

TEST_CASE("kvconfig rejects malformed input") {
  CHECK_THROWS_AS(KvConfig::from_string("novalue\n", "x"), Error);
  CHECK_THROWS_AS(KvConfig::from_string("a = 1\na = 2\n", "x"), Error);
  auto cfg = KvConfig::from_string("n = notanumber\n", "x");
  CHECK_THROWS_AS(cfg.get_int("n"), Error);
  auto cfg2 = KvConfig::from_string("b = maybe\n", "x");
  CHECK_THROWS_AS(cfg2.get_bool("b"), Error);
}

TEST_CASE("kvconfig required vs defaulted lookups") {
  auto cfg = KvConfig::from_string("present = 7\n", "x");
  CHECK(cfg.get_int("present", 0) == 7);
  CHECK(cfg.get_int("absent", 13) == 13);
  CHECK_THROWS_AS(cfg.get_int("missing"), Error);
}

TEST_CASE("kvconfig flags unconsumed keys") {
  auto cfg = KvConfig::from_string("used = 1\nunused = 2\n", "x");
  cfg.get_int("used");
  CHECK_THROWS_AS(cfg.finish(), Error);
}

TEST_CASE("kvconfig canonical text is sorted and override-aware") {
  auto cfg = KvConfig::from_string("b = 2\na = 1\n", "x");
  cfg.set("c", "3");
  CHECK(cfg.canonical_text() == "a = 1\nb = 2\nc = 3\n");
}

TEST_CASE("fnv1a64 reference vectors") {
  // published FNV-1a 64-bit test vectors
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  CHECK(hex16(0xcbf29ce484222325ull) == "cbf29ce484222325");
  CHECK(config_hash("") == "cbf29ce48422");
  CHECK(config_hash("x").size() == 12);
}

TEST_CASE("error kinds map to exit codes") {
  try {
    fail(ErrorKind::config, "bad");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    CHECK(e.exit_code() == 2);
    CHECK(std::string(e.what()) == "bad");
  }
}
