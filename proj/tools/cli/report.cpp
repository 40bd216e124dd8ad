#include "report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hypstruct/version.hpp"

namespace hypstruct::cli {

OutputDir::OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + dir_.string() + "': " + ec.message());
}

void OutputDir::write(std::string_view name, std::string_view contents) const {
  const auto p = path(name);
  std::ofstream out(p, std::ios::binary);
  out << contents;
  out.close();
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + p.string() + "'");
}

void OutputDir::write_json(std::string_view name, const Json& doc) const { write(name, doc.dump(2) + "\n"); }

Json report(std::string_view command, const Json& config, Json results) {
  Json r = Json::object();
  r["tool_version"] = kVersion;
  r["command"] = command;
  r["config"] = config;
  r["results"] = std::move(results);
  return r;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string num6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 60.0;

std::string escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

void text(std::ostringstream& o, double x, double y, std::string_view s, std::string_view anchor = "middle") {
  o << "<text x=\"" << num6(x) << "\" y=\"" << num6(y) << "\" font-size=\"12\" text-anchor=\"" << anchor << "\">"
    << escape(s) << "</text>\n";
}

}  // namespace

std::string scatter_svg(const Scatter& plot) {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
  if (!plot.points.empty()) {
    x0 = x1 = plot.points[0][0];
    y0 = y1 = plot.points[0][1];
    for (const auto& [x, y] : plot.points) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    x0 = std::min(x0, 0.0);
    y0 = std::min(y0, 0.0);
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) y1 = y0 + 1.0;
  }
  const double pw = kWidth - 2 * kMargin, ph = kHeight - 2 * kMargin;
  auto sx = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return kHeight - kMargin - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin << "\" y2=\""
    << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\"" << kHeight - kMargin
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double fx = x0 + (x1 - x0) * t / 4.0, fy = y0 + (y1 - y0) * t / 4.0;
    text(o, sx(fx), kHeight - kMargin + 16, num6(fx));
    text(o, kMargin - 6, sy(fy) + 4, num6(fy), "end");
  }
  text(o, kWidth / 2, 24, plot.title);
  text(o, kWidth / 2, kHeight - 16, plot.x_label);
  o << "<text x=\"16\" y=\"" << kHeight / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << kHeight / 2 << ")\">" << escape(plot.y_label) << "</text>\n";
  for (const auto& [x, y] : plot.points) {
    o << "<circle cx=\"" << num6(sx(x)) << "\" cy=\"" << num6(sy(y)) << "\" r=\"3\" fill=\"steelblue\" "
      << "fill-opacity=\"0.7\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string disk_svg(const Matrix& coords, double radius, const std::vector<std::string>& names,
                     const std::vector<int>& parents) {
  const double size = 440.0, pad = 20.0, center = size / 2;
  const double scale = (size / 2 - pad) / radius;
  auto px = [&](std::size_t v) { return center + coords(v, 0) * scale; };
  auto py = [&](std::size_t v) { return center - coords(v, 1) * scale; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<circle cx=\"" << center << "\" cy=\"" << center << "\" r=\"" << num6(radius * scale)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (std::size_t v = 0; v < coords.rows(); ++v) {
    if (parents[v] < 0) continue;
    const auto p = static_cast<std::size_t>(parents[v]);
    o << "<line x1=\"" << num6(px(v)) << "\" y1=\"" << num6(py(v)) << "\" x2=\"" << num6(px(p)) << "\" y2=\""
      << num6(py(p)) << "\" stroke=\"gray\"/>\n";
  }
  for (std::size_t v = 0; v < coords.rows(); ++v) {
    o << "<circle cx=\"" << num6(px(v)) << "\" cy=\"" << num6(py(v)) << "\" r=\"3\" fill=\"crimson\"/>\n";
    text(o, px(v), py(v) - 6, names[v]);
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hypstruct::cli
