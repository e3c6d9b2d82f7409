#pragma once

// Deterministic SVG rendering of the experiment CSVs. Output uses only
// <path>, <line> and <text> under a single <svg> root, with a fixed canvas
// and palette, so identical input yields identical bytes.

#include <filesystem>
#include <string>
#include <vector>

namespace mifs {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

/// kind: "spectrum" (level,index,sigma_normalized), "coverage"
/// (trial,beta,lower,upper,within) or "accuracy-grid" (level,single,mifs).
std::string render_svg(const CsvTable& table, const std::string& kind);

}  // namespace mifs
