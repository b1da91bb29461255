#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmd/data.hpp"
#include "rdmd/tensor.hpp"

namespace rdmd {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Doubles are written in shortest round-trip form, so output bytes depend only
// on the values.
std::string csv_text(const CsvTable& table);
void write_csv(const std::filesystem::path& path, const CsvTable& table);
// Errors name the offending 1-based line.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

// Columns x0..x{d-1}, g0..g{d-1}.
CsvTable pairs_table(const PairSet& pairs);
PairSet pairs_from_table(const CsvTable& table);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

struct SurfaceGrid {
  std::vector<double> r;
  std::vector<double> alpha;
  // values[i * alpha.size() + j] at (r[i], alpha[j])
  std::vector<double> values;
  double lambda = 0.0;
};

// Heatmap of log(1 + value - min) with iso-lines and the grid argmin marked.
std::string surface_svg(const SurfaceGrid& grid, const std::string& title = {});

// Source points, generator outputs and optional target samples, with an
// input -> output segment per pair. No pairs renders axes only.
std::string pairs_svg(const std::optional<PairSet>& pairs, const std::optional<Tensor>& target = std::nullopt,
                      const std::string& title = {});

// x-y polyline chart; one series per entry in ys.
std::string line_svg(const std::vector<double>& xs, const std::vector<std::vector<double>>& ys,
                     const std::vector<std::string>& labels, const std::string& x_label, const std::string& title,
                     bool log_x = false);

}  // namespace rdmd
