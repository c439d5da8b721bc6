#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "softics/types.hpp"

namespace softics {

using json = nlohmann::json;

enum class Category {
  meta,
  packet,
  state,
  sensor,
  command,
  attack,
  tamper,
  drop,
  transaction,
  process,
  alarm,
  view,
};

std::string_view to_string(Category c);
std::optional<Category> category_from_string(std::string_view name);

struct LogRecord {
  SimTime time{0};
  Category category = Category::meta;
  json payload;
};

// Canonical form: keys sorted, no whitespace, floats with six decimals.
std::string canonical_json(const json& value);
std::string canonical_line(SimTime time, Category category, const json& payload);

std::string sha256_hex(std::string_view data);

// Append-only, time-ordered record of a run. Records are serialized on append
// so the digest never depends on later mutation of payload objects.
class EventLog {
 public:
  void append(SimTime time, Category category, json payload);

  std::size_t size() const { return lines_.size(); }
  bool empty() const { return lines_.empty(); }
  const std::vector<std::string>& lines() const { return lines_; }
  Category category_at(std::size_t i) const { return categories_[i]; }
  SimTime time_at(std::size_t i) const { return times_[i]; }
  LogRecord record(std::size_t i) const;
  // Parsed records, optionally restricted to one category.
  std::vector<LogRecord> records(std::optional<Category> only = std::nullopt) const;

  // SHA-256 over every canonical line followed by '\n'.
  std::string digest() const;

  // Writes the records plus a terminal line carrying count and digest.
  void write(const std::filesystem::path& path) const;
  // Throws ParseError (with byte offset) on malformed or truncated input and
  // IoError if the file cannot be opened.
  static EventLog read(const std::filesystem::path& path);

 private:
  std::vector<std::string> lines_;
  std::vector<Category> categories_;
  std::vector<SimTime> times_;
};

struct VerifyResult {
  bool pass = false;
  std::string computed;
  std::string expected;
  std::string detail;  // why it failed
};

// Recomputes the digest of the record lines in a log file and checks it
// against both `expected_digest` and the file's own terminal record. Never
// throws for content problems: a damaged file simply fails.
VerifyResult verify_log(const std::filesystem::path& path, std::string_view expected_digest);

}  // namespace softics
