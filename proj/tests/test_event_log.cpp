#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "softics/error.hpp"
#include "softics/event_log.hpp"

using namespace softics;

TEST_CASE("canonical json sorts keys and fixes float precision") {
  const json j = json::parse(R"({"b": 1.5, "a": {"z": true, "y": [0.1, 2]}, "c": "x"})");
  CHECK(canonical_json(j) == R"({"a":{"y":[0.100000,2],"z":true},"b":1.500000,"c":"x"})");
  CHECK(canonical_line(SimTime{42}, Category::state, json{{"to", 2}}) == R"({"c":"state","p":{"to":2},"t":42})");
}

TEST_CASE("sha256 matches the reference test vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("digest of the empty log is defined and stable") {
  EventLog a;
  EventLog b;
  CHECK(a.digest() == b.digest());
  CHECK(a.digest() == sha256_hex(""));
}

TEST_CASE("digest covers every canonical line") {
  EventLog log;
  log.append(SimTime{1}, Category::meta, json{{"k", 1}});
  log.append(SimTime{2}, Category::packet, json{{"len", 60}});
  const std::string expected = sha256_hex(log.lines()[0] + "\n" + log.lines()[1] + "\n");
  CHECK(log.digest() == expected);
}

TEST_CASE("appending out of time order is refused") {
  EventLog log;
  log.append(SimTime{10}, Category::meta, json::object());
  CHECK_THROWS(log.append(SimTime{9}, Category::meta, json::object()));
}

TEST_CASE("write, read and verify round trip") {
  fixtures::TempDir tmp;
  EventLog log;
  for (int i = 0; i < 50; ++i) log.append(SimTime{i * 1000}, i % 2 ? Category::packet : Category::state, json{{"i", i}, {"v", i * 0.25}});
  const auto path = tmp / "run.log.jsonl";
  log.write(path);

  const EventLog back = EventLog::read(path);
  CHECK(back.lines() == log.lines());
  CHECK(back.digest() == log.digest());
  CHECK(back.record(3).payload["i"] == 3);
  CHECK(back.records(Category::state).size() == 25);

  CHECK(verify_log(path, log.digest()).pass);

  SUBCASE("flipping one byte fails verification") {
    std::string text = fixtures::slurp(path);
    const auto pos = text.find("\"i\":7");
    REQUIRE(pos != std::string::npos);
    text[pos + 4] = '8';
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
    const auto r = verify_log(path, log.digest());
    CHECK_FALSE(r.pass);
    CHECK(r.computed != r.expected);
  }
  SUBCASE("truncated file is a parse error with offset") {
    const std::string text = fixtures::slurp(path);
    const std::size_t cut = text.size() / 2;
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text.substr(0, cut);
    try {
      (void)EventLog::read(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() <= cut);
    }
  }
  SUBCASE("missing terminal record is a parse error") {
    std::string text = fixtures::slurp(path);
    text = text.substr(0, text.rfind("{\"c\":\"end\""));
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
    CHECK_THROWS_AS(EventLog::read(path), ParseError);
    const auto r = verify_log(path, log.digest());
    CHECK_FALSE(r.pass);
    CHECK(r.computed == log.digest());
    CHECK_FALSE(r.detail.empty());
  }
  SUBCASE("records appended after the terminal line fail verification") {
    std::ofstream(path, std::ios::binary | std::ios::app) << R"({"c":"meta","p":{},"t":99999})" << "\n";
    CHECK_FALSE(verify_log(path, log.digest()).pass);
    CHECK_THROWS_AS(EventLog::read(path), ParseError);
  }
  SUBCASE("garbage line reports its offset") {
    std::string text = fixtures::slurp(path);
    const auto second = text.find('\n') + 1;
    text.insert(second, "not json\n");
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
    try {
      (void)EventLog::read(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      // Points into the offending line.
      CHECK(e.offset() >= second);
      CHECK(e.offset() < second + 8);
    }
  }
}

TEST_CASE("missing log is an I/O error and a failed verification") {
  CHECK_THROWS_AS(EventLog::read("/nonexistent/softics.log"), IoError);
  CHECK_FALSE(verify_log("/nonexistent/softics.log", "00").pass);
}

TEST_CASE("category names round trip") {
  for (int i = 0; i <= static_cast<int>(Category::view); ++i) {
    const auto c = static_cast<Category>(i);
    CHECK(category_from_string(to_string(c)) == c);
  }
  CHECK_FALSE(category_from_string("bogus"));
}
