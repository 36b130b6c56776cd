// Config parsing with line-anchored errors, file hashing and small JSON helpers
// for the r1glm command-line tool.
#pragma once

#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <openssl/evp.h>

#include "json.hpp"
#include "r1glm/core.hpp"

namespace r1glm::cli {

using Json = nlohmann::json;

inline constexpr const char *kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kPartial = 3 };

/// A config or usage problem; the tool exits with code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::string read_text(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string sha256_hex(const std::string &bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

inline std::string sha256_file(const std::string &path) { return sha256_hex(read_text(path)); }

inline void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline void write_json(const std::string &path, const Json &j) { write_text(path, j.dump(2) + "\n"); }

/// Reads typed values out of a parsed JSON object and reports problems as
/// `file:line: message`, where line is that of the offending key (or of the
/// enclosing object when the key is absent). Every key must be consumed.
class ConfigReader {
public:
  static ConfigReader parse(const std::string &path) {
    auto text = std::make_shared<const std::string>(read_text(path));
    Json j;
    try {
      j = Json::parse(*text);
    } catch (const Json::parse_error &e) {
      const auto [line, column] = position(*text, e.byte == 0 ? 0 : e.byte - 1);
      std::string what = e.what();
      const auto colon = what.rfind(": ");
      throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(column) + ": invalid JSON" +
                        (colon == std::string::npos ? "" : what.substr(colon)));
    }
    if (!j.is_object()) throw ConfigError(path + ":1: config must be a JSON object");
    return ConfigReader(path, text, std::move(j), 0, "");
  }

  double number(const std::string &key, double fallback, const std::function<bool(double)> &ok = {},
                 const std::string &rule = "") {
    const Json *v = take(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key, "must be a number");
    const double x = v->get<double>();
    if (ok && !ok(x)) fail(key, rule);
    return x;
  }

  long long integer(const std::string &key, long long fallback, const std::function<bool(long long)> &ok = {},
                    const std::string &rule = "") {
    const Json *v = take(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(key, "must be an integer");
    const long long x = v->get<long long>();
    if (ok && !ok(x)) fail(key, rule);
    return x;
  }

  std::uint64_t seed(const std::string &key, std::uint64_t fallback) {
    const Json *v = take(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) fail(key, "must be a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string &key, bool fallback) {
    const Json *v = take(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(key, "must be true or false");
    return v->get<bool>();
  }

  std::string text(const std::string &key, const std::string &fallback) {
    const Json *v = take(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key, "must be a string");
    return v->get<std::string>();
  }

  /// Absent or null gives nullopt.
  std::optional<std::vector<double>> numbers(const std::string &key) {
    const Json *v = take(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_array()) fail(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto &x : *v) {
      if (!x.is_number()) fail(key, "must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  /// Nested object; absent keys give an empty reader.
  ConfigReader child(const std::string &key) {
    const Json *v = take(key);
    if (!v) return ConfigReader(path_, text_, Json::object(), offset_, prefix_ + key + ".");
    if (!v->is_object()) fail(key, "must be an object");
    return ConfigReader(path_, text_, *v, locate(key), prefix_ + key + ".");
  }

  /// Throws on keys that were never read.
  void finish() const {
    for (auto it = json_.begin(); it != json_.end(); ++it)
      if (!used_.count(it.key())) fail(it.key(), "unknown key");
  }

  /// Error anchored at `key` (or at the enclosing object when absent).
  [[noreturn]] void fail(const std::string &key, const std::string &message) const {
    const std::size_t at = json_.contains(key) ? locate(key) : offset_;
    throw ConfigError(path_ + ":" + std::to_string(position(*text_, at).first) + ": '" + prefix_ + key + "' " +
                      message);
  }

private:
  ConfigReader(std::string path, std::shared_ptr<const std::string> text, Json j, std::size_t offset,
               std::string prefix)
      : path_(std::move(path)), text_(std::move(text)), json_(std::move(j)), offset_(offset),
        prefix_(std::move(prefix)) {}

  const Json *take(const std::string &key) {
    used_.insert(key);
    const auto it = json_.find(key);
    return it == json_.end() ? nullptr : &*it;
  }

  // First `"key"` followed by ':' at or after this object's opening.
  std::size_t locate(const std::string &key) const {
    const std::string quoted = "\"" + key + "\"";
    for (std::size_t at = text_->find(quoted, offset_); at != std::string::npos; at = text_->find(quoted, at + 1)) {
      std::size_t after = at + quoted.size();
      while (after < text_->size() && std::isspace(static_cast<unsigned char>((*text_)[after]))) ++after;
      if (after < text_->size() && (*text_)[after] == ':') return at;
    }
    return offset_;
  }

  static std::pair<int, int> position(const std::string &text, std::size_t byte) {
    int line = 1, column = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    return {line, column};
  }

  std::string path_;
  std::shared_ptr<const std::string> text_;
  Json json_;
  std::size_t offset_;
  std::string prefix_;
  std::set<std::string> used_;
};

/// Wall-clock seconds since construction.
class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace r1glm::cli
