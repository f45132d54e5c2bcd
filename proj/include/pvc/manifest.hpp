#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pvc {

// Flat "key = value" text, one entry per line, '#' starts a comment. Order is preserved.
class Manifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::size_t value);
  void set(const std::string& key, bool value);

  bool contains(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
  // Throw IoError if the key is missing or malformed.
  std::string get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  static Manifest parse(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Manifest load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::string format_double(double v);
std::string join_doubles(const std::vector<double>& values);

}  // namespace pvc
