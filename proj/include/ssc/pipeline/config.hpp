#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ssc::pipeline {

/// Flat key/value configuration. Every key has a default (the paper's
/// constant where one exists); files and overrides may only set known keys.
class Config {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::string help;
  };

  Config();

  /// Lines of `key = value`; `#` starts a comment.
  void load_file(const std::filesystem::path& path);
  void parse(const std::string& text, const std::string& origin = "<text>");
  /// `key=value`
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool boolean(const std::string& key) const;

  /// Range checks over every known key.
  void validate() const;
  /// All keys in declaration order, as a config file.
  std::string dump() const;
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  Entry& find(const std::string& key);
  const Entry& find(const std::string& key) const;
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace ssc::pipeline
