#include "ccert/error.hpp"
#include "ccert/kv_config.hpp"
#include "doctest.h"

using namespace ccert;

TEST_CASE("kv config parses comments, blanks and typed values") {
  KvConfig kv({"a", "b", "c", "flag"});
  kv.parse("# header\n\na = 1.5\n  b=  hello world  # trailing\nc = 7\nflag = true\n");
  CHECK(kv.get_double("a", 0) == 1.5);
  CHECK(kv.get("b", "") == "hello world");
  CHECK(kv.get_long("c", 0) == 7);
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get_long("missing", 3) == 3);
  CHECK_FALSE(kv.has("missing"));
  CHECK(kv.dump() == "a = 1.5\nb = hello world\nc = 7\nflag = true\n");
}

TEST_CASE("kv config rejects bad input") {
  KvConfig kv({"a"});
  CHECK_THROWS_AS(kv.parse("a = 1\nnot a pair\n"), ParseError);
  KvConfig k2({"a"});
  CHECK_THROWS_AS(k2.parse("zzz = 1\n"), ConfigError);
  KvConfig k3({"a"});
  CHECK_THROWS_AS(k3.parse("a = 1\na = 2\n"), ConfigError);
  KvConfig k4({"a"});
  CHECK_THROWS_AS(k4.set("b", "1"), ConfigError);
  k4.set("a", "x");
  CHECK_THROWS(k4.get_double("a", 0));
  CHECK_THROWS(k4.get_bool("a", false));
  k4.set("a", "2");
  CHECK(k4.get_long("a", 0) == 2);
}

TEST_CASE("kv config parse errors carry the line number") {
  KvConfig kv({"a"});
  try {
    kv.parse("a = 1\n\n= 3\n", "f.cfg");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
}
