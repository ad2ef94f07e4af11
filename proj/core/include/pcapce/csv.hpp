#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcapce/types.hpp"

namespace pcapce {

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  /// Index of a named column; throws SchemaInvalid when absent.
  Eigen::Index column(const std::string& name) const;
};

/// Formats a double with 17 significant digits (round-trip exact).
std::string format_number(double v);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace pcapce
