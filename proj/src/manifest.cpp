#include "pvc/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pvc/pvct.hpp"

namespace pvc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

void Manifest::set(const std::string& key, const std::string& value) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
  if (it != entries_.end()) {
    it->second = value;
  } else {
    entries_.emplace_back(key, value);
  }
}

void Manifest::set(const std::string& key, double value) { set(key, format_double(value)); }
void Manifest::set(const std::string& key, std::size_t value) { set(key, std::to_string(value)); }
void Manifest::set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

bool Manifest::contains(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> Manifest::find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

std::string Manifest::get(const std::string& key) const {
  auto v = find(key);
  if (!v) throw IoError("manifest: missing key '" + key + "'");
  return *v;
}

double Manifest::get_double(const std::string& key) const {
  const std::string s = get(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("manifest: '" + key + "' is not a number: " + s);
  return v;
}

std::size_t Manifest::get_size(const std::string& key) const {
  const std::string s = get(key);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError("manifest: '" + key + "' is not a non-negative integer: " + s);
  }
  return v;
}

bool Manifest::get_bool(const std::string& key) const {
  const std::string s = get(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw IoError("manifest: '" + key + "' is not a boolean: " + s);
}

std::vector<double> Manifest::get_doubles(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw IoError("manifest: '" + key + "' has a malformed entry: " + item);
    }
    out.push_back(v);
  }
  return out;
}

std::string Manifest::to_string() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("manifest line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw IoError("manifest line " + std::to_string(lineno) + ": empty key");
    m.set(key, trim(std::string_view(line).substr(eq + 1)));
  }
  return m;
}

void Manifest::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << to_string();
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace pvc
