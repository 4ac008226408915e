#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "gridcert/clock.hpp"

namespace gridcert {

// Flat key=value configuration, one entry per line, '#' starts a comment.
class Properties {
 public:
  Properties() = default;

  static Properties parse(std::string_view text);
  static Properties load(const std::filesystem::path& file);

  void set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }
  bool contains(std::string_view key) const { return entries_.find(std::string(key)) != entries_.end(); }

  std::optional<std::string> get(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  // Throws InvalidConfig when missing.
  std::string require(std::string_view key) const;
  std::int64_t get_int_or(std::string_view key, std::int64_t fallback) const;
  Duration get_duration_or(std::string_view key, Duration fallback) const {
    return Duration{get_int_or(key, fallback.count())};
  }

  // Entries whose key starts with prefix, with the prefix removed.
  std::map<std::string, std::string> with_prefix(std::string_view prefix) const;
  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

}  // namespace gridcert
