#include "mifs/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mifs/error.hpp"

namespace mifs {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 60.0;
constexpr double kRight = 140.0;  // legend column
constexpr double kTop = 30.0;
constexpr double kBottom = 50.0;
constexpr std::array<const char*, 8> kPalette = {"#1f3fbf", "#d95f02", "#1b9e77", "#7570b3",
                                                 "#e7298a", "#66a61e", "#a6761d", "#444444"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

double parse_number(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ValidationError("not a number: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw ValidationError("not a number: '" + s + "'");
  }
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

class Canvas {
 public:
  Canvas(double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (x1_ <= x0_) x1_ = x0_ + 1.0;
    if (y1_ <= y0_) y1_ = y0_ + 1.0;
  }

  double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0_) / (y1_ - y0_) * (kHeight - kTop - kBottom); }

  void axes(const std::string& xlabel, const std::string& ylabel) {
    const double left = kLeft, right = kWidth - kRight, top = kTop, bottom = kHeight - kBottom;
    body_ << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(bottom) << "\" x2=\"" << fmt(right) << "\" y2=\""
          << fmt(bottom) << "\" stroke=\"#000\"/>\n";
    body_ << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\""
          << fmt(bottom) << "\" stroke=\"#000\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double xv = x0_ + (x1_ - x0_) * t / 4.0;
      const double yv = y0_ + (y1_ - y0_) * t / 4.0;
      body_ << "<text x=\"" << fmt(px(xv)) << "\" y=\"" << fmt(bottom + 16) << "\" font-size=\"11\" "
            << "text-anchor=\"middle\">" << label_number(xv) << "</text>\n";
      body_ << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(py(yv) + 4) << "\" font-size=\"11\" "
            << "text-anchor=\"end\">" << label_number(yv) << "</text>\n";
    }
    body_ << "<text x=\"" << fmt((left + right) / 2) << "\" y=\"" << fmt(kHeight - 12) << "\" font-size=\"12\" "
          << "text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
    body_ << "<text x=\"14\" y=\"" << fmt((top + bottom) / 2) << "\" font-size=\"12\" text-anchor=\"middle\" "
          << "transform=\"rotate(-90 14 " << fmt((top + bottom) / 2) << ")\">" << escape(ylabel) << "</text>\n";
  }

  void polyline(const Series& s, const char* color, bool dashed = false) {
    if (s.points.empty()) return;
    body_ << "<path d=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i)
      body_ << (i == 0 ? "M" : " L") << fmt(px(s.points[i].first)) << ' ' << fmt(py(s.points[i].second));
    body_ << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
    if (dashed) body_ << " stroke-dasharray=\"4 3\"";
    body_ << "/>\n";
  }

  void legend(std::size_t slot, const std::string& name, const char* color) {
    const double x = kWidth - kRight + 14;
    const double y = kTop + 16.0 * static_cast<double>(slot) + 8;
    body_ << "<path d=\"M" << fmt(x) << ' ' << fmt(y) << " L" << fmt(x + 20) << ' ' << fmt(y) << "\" stroke=\""
          << color << "\" stroke-width=\"2\"/>\n";
    body_ << "<text x=\"" << fmt(x + 26) << "\" y=\"" << fmt(y + 4) << "\" font-size=\"11\">" << escape(name)
          << "</text>\n";
  }

  void title(const std::string& t) {
    body_ << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">" << escape(t)
          << "</text>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double x0_, x1_, y0_, y1_;
  std::ostringstream body_;
};

std::vector<int> require_columns(const CsvTable& table, const std::vector<std::string>& names,
                                 const std::string& kind) {
  if (table.rows.empty()) throw ValidationError("CSV has no data rows for plot kind '" + kind + "'");
  std::vector<int> idx;
  for (const auto& n : names) {
    const int c = table.column(n);
    if (c < 0) throw ValidationError("CSV lacks column '" + n + "' required by plot kind '" + kind + "'");
    idx.push_back(c);
  }
  for (const auto& row : table.rows)
    if (row.size() != table.header.size()) throw ValidationError("CSV row width does not match header");
  return idx;
}

std::pair<double, double> y_range(const std::vector<Series>& series) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

std::pair<double, double> x_range(const std::vector<Series>& series) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  if (!std::isfinite(lo)) return {0.0, 1.0};
  return {lo, hi};
}

std::string draw(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                 const std::string& ylabel, std::pair<double, double> yr) {
  const auto xr = x_range(series);
  Canvas canvas(xr.first, xr.second, yr.first, yr.second);
  canvas.title(title);
  canvas.axes(xlabel, ylabel);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    canvas.polyline(series[i], color);
    canvas.legend(i, series[i].name, color);
  }
  return canvas.str();
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_csv(text.str());
}

std::string render_svg(const CsvTable& table, const std::string& kind) {
  if (kind == "spectrum") {
    const auto c = require_columns(table, {"level", "index", "sigma_normalized"}, kind);
    std::vector<Series> series;
    std::map<std::string, std::size_t> slot;
    for (const auto& row : table.rows) {
      const auto& name = row[c[0]];
      auto [it, inserted] = slot.emplace(name, series.size());
      if (inserted) series.push_back({"L=" + name, {}});
      series[it->second].points.emplace_back(parse_number(row[c[1]]), parse_number(row[c[2]]));
    }
    return draw(series, "normalized singular values", "index i", "sigma_i / sigma_1", {0.0, 1.0});
  }
  if (kind == "coverage") {
    const auto c = require_columns(table, {"trial", "beta", "lower", "upper", "within"}, kind);
    Series beta{"beta", {}}, lower{"lower bound", {}}, upper{"upper bound", {}};
    for (const auto& row : table.rows) {
      const double t = parse_number(row[c[0]]);
      const double b = parse_number(row[c[1]]);
      const double lo = parse_number(row[c[2]]);
      const double hi = parse_number(row[c[3]]);
      if (std::isfinite(b)) beta.points.emplace_back(t, b);
      if (std::isfinite(lo)) lower.points.emplace_back(t, lo);
      if (std::isfinite(hi)) upper.points.emplace_back(t, hi);
    }
    std::vector<Series> series{beta, lower, upper};
    return draw(series, "per-trial condition number", "trial", "beta", y_range(series));
  }
  if (kind == "accuracy-grid") {
    const auto c = require_columns(table, {"level", "single", "mifs"}, kind);
    Series single{"single-scale", {}}, stacked{"stacked", {}};
    for (const auto& row : table.rows) {
      const double l = parse_number(row[c[0]]);
      single.points.emplace_back(l, parse_number(row[c[1]]));
      stacked.points.emplace_back(l, parse_number(row[c[2]]));
    }
    std::vector<Series> series{single, stacked};
    return draw(series, "accuracy by level", "level L", "MAcc (%)", y_range(series));
  }
  throw ValidationError("unknown plot kind '" + kind + "' (expected spectrum, coverage or accuracy-grid)");
}

}  // namespace mifs
