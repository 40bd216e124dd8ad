#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"
#include "hypstruct/matrix.hpp"

namespace hypstruct::cli {

/// Output directory of a run; every write goes through it.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path dir);

  std::filesystem::path path(std::string_view name) const { return dir_ / name; }
  void write(std::string_view name, std::string_view contents) const;
  void write_json(std::string_view name, const Json& doc) const;

 private:
  std::filesystem::path dir_;
};

/// {"tool_version", "command", "config", "results"}.
Json report(std::string_view command, const Json& config, Json results);

/// Round-trip formatting for CSV cells.
std::string num(double x);
/// Six significant digits, used in SVG output.
std::string num6(double x);

struct Scatter {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::array<double, 2>> points;
};

std::string scatter_svg(const Scatter& plot);

/// The Poincare disk of radius `radius` with one labelled point per row of
/// `coords` and a segment from every vertex to its parent.
std::string disk_svg(const Matrix& coords, double radius, const std::vector<std::string>& names,
                     const std::vector<int>& parents);

}  // namespace hypstruct::cli
