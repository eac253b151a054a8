#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace zrp {

std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);

// Fixed-schema CSV writer.  Numeric cells are printed with %.17g so a rerun
// with the same seed reproduces the file byte for byte.
class CsvFile {
 public:
  CsvFile(const std::string& path, const std::vector<std::string>& columns);

  static std::string num(double v);
  static std::string num(std::int64_t v);

  void write_row(const std::vector<std::string>& cells);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::size_t columns_;
  std::ofstream out_;
};

// JSON manifest placed next to every numeric output: names the command, the
// config hash, the seed, the derived RNG stream ids, and the files written.
void write_manifest(const std::string& path, const std::string& command,
                    const nlohmann::json& config, std::uint64_t config_hash,
                    std::uint64_t seed, const std::vector<std::uint64_t>& streams,
                    const std::vector<std::string>& outputs,
                    const nlohmann::json& extra = nlohmann::json::object());

}  // namespace zrp
