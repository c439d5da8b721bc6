#include "softics/event_log.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include "softics/error.hpp"

namespace softics {
namespace {

constexpr std::array<std::string_view, 12> kCategoryNames{
    "meta", "packet", "state", "sensor", "command", "attack", "tamper", "drop", "transaction", "process", "alarm", "view"};

void dump_canonical(const json& v, std::string& out) {
  switch (v.type()) {
    case json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        out += json(it.key()).dump();
        out.push_back(':');
        dump_canonical(it.value(), out);
      }
      out.push_back('}');
      break;
    }
    case json::value_t::array: {
      out.push_back('[');
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out.push_back(',');
        dump_canonical(v[i], out);
      }
      out.push_back(']');
      break;
    }
    case json::value_t::number_float: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v.get<double>());
      out += buf;
      break;
    }
    default:
      out += v.dump();
  }
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) { EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr); }
  void update(std::string_view data) { EVP_DigestUpdate(ctx_.get(), data.data(), data.size()); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    return to_hex(ByteView(md.data(), len));
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

bool is_terminal(const std::string& line) { return line.rfind("{\"c\":\"end\"", 0) == 0; }

}  // namespace

std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

std::optional<Category> category_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
    if (kCategoryNames[i] == name) return static_cast<Category>(i);
  return std::nullopt;
}

std::string canonical_json(const json& value) {
  std::string out;
  dump_canonical(value, out);
  return out;
}

std::string canonical_line(SimTime time, Category category, const json& payload) {
  std::string out = "{\"c\":\"";
  out += to_string(category);
  out += "\",\"p\":";
  dump_canonical(payload, out);
  out += ",\"t\":";
  out += std::to_string(time.count());
  out.push_back('}');
  return out;
}

std::string sha256_hex(std::string_view data) {
  Sha256 h;
  h.update(data);
  return h.hex();
}

void EventLog::append(SimTime time, Category category, json payload) {
  if (!times_.empty() && time < times_.back())
    throw ArgumentError("log record at " + std::to_string(time.count()) + " us precedes the previous record");
  lines_.push_back(canonical_line(time, category, payload));
  categories_.push_back(category);
  times_.push_back(time);
}

LogRecord EventLog::record(std::size_t i) const {
  auto j = json::parse(lines_[i]);
  return LogRecord{times_[i], categories_[i], std::move(j["p"])};
}

std::vector<LogRecord> EventLog::records(std::optional<Category> only) const {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < lines_.size(); ++i)
    if (!only || categories_[i] == *only) out.push_back(record(i));
  return out;
}

std::string EventLog::digest() const {
  Sha256 h;
  for (const auto& line : lines_) {
    h.update(line);
    h.update("\n");
  }
  return h.hex();
}

void EventLog::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write log '" + path.string() + "'");
  for (const auto& line : lines_) out << line << '\n';
  const SimTime last = times_.empty() ? SimTime{0} : times_.back();
  out << "{\"c\":\"end\",\"p\":" << canonical_json(json{{"digest", digest()}, {"records", lines_.size()}})
      << ",\"t\":" << last.count() << "}\n";
  if (!out) throw IoError("failed writing log '" + path.string() + "'");
}

EventLog EventLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open log '" + path.string() + "'");
  EventLog log;
  std::string line;
  std::size_t offset = 0;
  bool terminated = false;
  SimTime previous{0};
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (terminated) throw ParseError(line_offset, "data after terminal record");
    if (in.eof()) throw ParseError(line_offset, "record not newline-terminated");
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_offset + (e.byte > 0 ? e.byte - 1 : 0), "malformed record");
    }
    if (!j.is_object() || !j.contains("c") || !j.contains("t") || !j.contains("p") || !j["c"].is_string() ||
        !j["t"].is_number_integer())
      throw ParseError(line_offset, "record lacks c/t/p fields");
    const auto name = j["c"].get<std::string>();
    if (name == "end") {
      const auto& p = j["p"];
      if (!p.contains("records") || p["records"].get<std::size_t>() != log.size())
        throw ParseError(line_offset, "terminal record count does not match");
      terminated = true;
      continue;
    }
    const auto cat = category_from_string(name);
    if (!cat) throw ParseError(line_offset, "unknown category '" + name + "'");
    const SimTime t{j["t"].get<std::int64_t>()};
    if (t < previous) throw ParseError(line_offset, "time goes backwards");
    previous = t;
    log.lines_.push_back(line);
    log.categories_.push_back(*cat);
    log.times_.push_back(t);
  }
  if (!terminated) throw ParseError(offset, "log truncated: terminal record missing");
  return log;
}

VerifyResult verify_log(const std::filesystem::path& path, std::string_view expected_digest) {
  VerifyResult result;
  result.expected = std::string(expected_digest);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    result.detail = "cannot open log";
    return result;
  }
  Sha256 h;
  std::string line;
  std::size_t records = 0;
  std::optional<json> terminal;
  bool after_terminal = false;
  bool unterminated = false;
  while (std::getline(in, line)) {
    if (in.eof()) unterminated = true;
    if (terminal) after_terminal = true;
    if (is_terminal(line)) {
      terminal = json::parse(line, nullptr, false);
      continue;
    }
    h.update(line);
    h.update("\n");
    ++records;
  }
  result.computed = h.hex();
  // The terminal record vouches for the body; without it the file is cut short.
  if (!terminal || terminal->is_discarded() || unterminated) {
    result.detail = "terminal record missing or damaged";
  } else if (after_terminal) {
    result.detail = "data after terminal record";
  } else if ((*terminal)["p"].value("digest", "") != result.computed ||
             (*terminal)["p"].value("records", std::size_t{0}) != records) {
    result.detail = "terminal record disagrees with the body";
  } else if (result.computed != result.expected) {
    result.detail = "digest mismatch";
  } else {
    result.pass = true;
  }
  return result;
}

}  // namespace softics
