#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "slr/rng.hpp"
#include "slr/tensor.hpp"

namespace testing {

inline double rel_err(const slr::ComplexTensor &a, const slr::ComplexTensor &b) {
  const double d = slr::norm(b);
  return slr::norm(a - b) / (d > 0 ? d : 1.0);
}

inline double rel_err(const slr::RealTensor &a, const slr::RealTensor &b) {
  const double d = slr::norm(b);
  return slr::norm(a - b) / (d > 0 ? d : 1.0);
}

inline double rel_diff(slr::cplx a, slr::cplx b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0 ? std::abs(a - b) / s : 0.0;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("slr_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string read_file(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// CSV text with every column whose header mentions "seconds" removed.
inline std::string drop_timing_columns(const std::string &csv) {
  std::istringstream in(csv);
  std::string line, out;
  std::vector<bool> keep;
  bool header = true;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (header) {
      for (const auto &c : cells) keep.push_back(c.find("seconds") == std::string::npos);
      header = false;
    }
    std::string row;
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (i >= keep.size() || keep[i]) row += (row.empty() ? "" : ",") + cells[i];
    out += row + "\n";
  }
  return out;
}

// Every file under dir keyed by relative path, timing columns stripped from CSVs.
inline std::map<std::string, std::string> artifacts(const std::filesystem::path &dir) {
  std::map<std::string, std::string> files;
  for (const auto &e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir).string();
    auto text = read_file(e.path());
    if (e.path().extension() == ".csv") text = drop_timing_columns(text);
    files[rel] = std::move(text);
  }
  return files;
}

}  // namespace testing
