#include "zrp/manifest.hpp"

#include <cstdio>
#include <stdexcept>

namespace zrp {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

CsvFile::CsvFile(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), columns_(columns.size()), out_(path, std::ios::trunc) {
  if (!out_) throw std::runtime_error("cannot open output file " + path);
  for (std::size_t i = 0; i < columns.size(); ++i)
    out_ << (i ? "," : "") << columns[i];
  out_ << "\n";
}

std::string CsvFile::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string CsvFile::num(std::int64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  return buf;
}

void CsvFile::write_row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::runtime_error("csv row width mismatch in " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i)
    out_ << (i ? "," : "") << cells[i];
  out_ << "\n";
  if (!out_) throw std::runtime_error("write failure on " + path_);
}

void write_manifest(const std::string& path, const std::string& command,
                    const nlohmann::json& config, std::uint64_t config_hash,
                    std::uint64_t seed, const std::vector<std::uint64_t>& streams,
                    const std::vector<std::string>& outputs,
                    const nlohmann::json& extra) {
  nlohmann::json m;
  m["command"] = command;
  m["config"] = config;
  m["config_hash"] = hex64(config_hash);
  m["seed"] = seed;
  nlohmann::json ids = nlohmann::json::array();
  for (std::uint64_t s : streams) ids.push_back(s);
  m["stream_ids"] = ids;
  m["outputs"] = outputs;
  for (const auto& item : extra.items()) m[item.key()] = item.value();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open manifest " + path);
  out << m.dump(2) << "\n";
}

}  // namespace zrp
