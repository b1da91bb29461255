#include "rdmd/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "rdmd/config.hpp"

namespace rdmd {

std::string csv_text(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) out += (i ? "," : "") + table.header[i];
  out += "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw CsvError("csv row width does not match header");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += format_double(row[i]);
    }
    out += "\n";
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_text(path, csv_text(table)); }

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto cells = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(l);
    while (std::getline(s, cell, ',')) out.push_back(cell);
    if (!l.empty() && l.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      t.header = cells(line);
      if (t.header.empty()) throw CsvError("csv line 1: empty header");
      continue;
    }
    if (line.empty()) continue;
    const auto parts = cells(line);
    if (parts.size() != t.header.size()) {
      throw CsvError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                     " fields, got " + std::to_string(parts.size()));
    }
    std::vector<double> row;
    for (const auto& p : parts) {
      double v = 0.0;
      auto res = std::from_chars(p.data(), p.data() + p.size(), v);
      if (res.ec != std::errc{} || res.ptr != p.data() + p.size()) {
        throw CsvError("csv line " + std::to_string(line_no) + ": '" + p + "' is not a number");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (line_no == 0) throw CsvError("csv: empty input");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const CsvError& e) {
    throw CsvError(path.string() + ": " + e.what());
  }
}

CsvTable pairs_table(const PairSet& pairs) {
  CsvTable t;
  const std::size_t d = pairs.dim();
  for (std::size_t k = 0; k < d; ++k) t.header.push_back("x" + std::to_string(k));
  for (std::size_t k = 0; k < d; ++k) t.header.push_back("g" + std::to_string(k));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::vector<double> row;
    for (std::size_t k = 0; k < d; ++k) row.push_back(pairs.inputs.at(i, k));
    for (std::size_t k = 0; k < d; ++k) row.push_back(pairs.outputs.at(i, k));
    t.rows.push_back(std::move(row));
  }
  return t;
}

PairSet pairs_from_table(const CsvTable& table) {
  const std::size_t w = table.header.size();
  if (w == 0 || w % 2) throw CsvError("pair csv needs an even number of columns");
  const std::size_t d = w / 2;
  for (std::size_t k = 0; k < d; ++k) {
    if (table.header[k] != "x" + std::to_string(k) || table.header[d + k] != "g" + std::to_string(k)) {
      throw CsvError("pair csv header must be x0..x" + std::to_string(d - 1) + ",g0..g" + std::to_string(d - 1));
    }
  }
  if (table.rows.empty()) throw CsvError("pair csv has no rows");
  Tensor in({table.rows.size(), d});
  Tensor out({table.rows.size(), d});
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      in.at(i, k) = table.rows[i][k];
      out.at(i, k) = table.rows[i][d + k];
    }
  }
  return PairSet(std::move(in), std::move(out));
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double width = 640, height = 560;
  double left = 70, right = 30, top = 40, bottom = 60;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void header(std::ostringstream& s, const Frame& f, const std::string& title) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(f.width) << "\" height=\"" << num(f.height)
    << "\" viewBox=\"0 0 " << num(f.width) << " " << num(f.height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty()) {
    s << "<text x=\"" << num(f.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
  }
}

void axes(std::ostringstream& s, const Frame& f, const std::string& xl, const std::string& yl) {
  const double l = f.px(f.x0), r = f.px(f.x1), b = f.py(f.y0), t = f.py(f.y1);
  s << "<rect x=\"" << num(l) << "\" y=\"" << num(t) << "\" width=\"" << num(r - l) << "\" height=\"" << num(b - t)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s << "<line x1=\"" << num(f.px(xv)) << "\" y1=\"" << num(b) << "\" x2=\"" << num(f.px(xv)) << "\" y2=\""
      << num(b + 5) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << num(b + 18) << "\" text-anchor=\"middle\">" << label_num(xv)
      << "</text>\n";
    s << "<line x1=\"" << num(l - 5) << "\" y1=\"" << num(f.py(yv)) << "\" x2=\"" << num(l) << "\" y2=\""
      << num(f.py(yv)) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(l - 8) << "\" y=\"" << num(f.py(yv) + 4) << "\" text-anchor=\"end\">" << label_num(yv)
      << "</text>\n";
  }
  if (!xl.empty()) {
    s << "<text x=\"" << num((l + r) / 2) << "\" y=\"" << num(f.height - 15) << "\" text-anchor=\"middle\">"
      << escape(xl) << "</text>\n";
  }
  if (!yl.empty()) {
    s << "<text x=\"18\" y=\"" << num((t + b) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num((t + b) / 2) << ")\">" << escape(yl) << "</text>\n";
  }
}

// Viridis-like ramp on [0, 1].
std::string ramp(double u) {
  static const double stops[5][3] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  u = std::clamp(u, 0.0, 1.0) * 4.0;
  const int i = std::min(3, static_cast<int>(u));
  const double f = u - i;
  char buf[8];
  int c[3];
  for (int k = 0; k < 3; ++k) c[k] = static_cast<int>(std::lround(stops[i][k] + f * (stops[i + 1][k] - stops[i][k])));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

}  // namespace

std::string surface_svg(const SurfaceGrid& grid, const std::string& title) {
  const std::size_t nr = grid.r.size(), na = grid.alpha.size();
  if (nr < 2 || na < 2 || grid.values.size() != nr * na) throw std::invalid_argument("surface_svg: bad grid");
  Frame f;
  f.x0 = grid.alpha.front();
  f.x1 = grid.alpha.back();
  f.y0 = grid.r.front();
  f.y1 = grid.r.back();
  std::ostringstream s;
  header(s, f, title.empty() ? "lambda = " + label_num(grid.lambda) : title);

  const auto [mn_it, mx_it] = std::minmax_element(grid.values.begin(), grid.values.end());
  const double mn = *mn_it;
  const double span = std::log1p(*mx_it - mn);
  auto level = [&](double v) { return span > 0 ? std::log1p(v - mn) / span : 0.0; };

  const double da = (f.x1 - f.x0) / static_cast<double>(na - 1);
  const double dr = (f.y1 - f.y0) / static_cast<double>(nr - 1);
  s << "<g shape-rendering=\"crispEdges\">\n";
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < na; ++j) {
      const double a_lo = std::max(f.x0, grid.alpha[j] - da / 2), a_hi = std::min(f.x1, grid.alpha[j] + da / 2);
      const double r_lo = std::max(f.y0, grid.r[i] - dr / 2), r_hi = std::min(f.y1, grid.r[i] + dr / 2);
      s << "<rect x=\"" << num(f.px(a_lo)) << "\" y=\"" << num(f.py(r_hi)) << "\" width=\""
        << num(f.px(a_hi) - f.px(a_lo)) << "\" height=\"" << num(f.py(r_lo) - f.py(r_hi)) << "\" fill=\""
        << ramp(level(grid.values[i * na + j])) << "\"/>\n";
    }
  }
  s << "</g>\n";

  // Marching squares on the normalized level field.
  s << "<g stroke=\"white\" stroke-width=\"0.8\" fill=\"none\">\n";
  for (int c = 1; c <= 9; ++c) {
    const double iso = c / 10.0;
    for (std::size_t i = 0; i + 1 < nr; ++i) {
      for (std::size_t j = 0; j + 1 < na; ++j) {
        const double v[4] = {level(grid.values[i * na + j]), level(grid.values[i * na + j + 1]),
                             level(grid.values[(i + 1) * na + j + 1]), level(grid.values[(i + 1) * na + j])};
        const double ax[4] = {grid.alpha[j], grid.alpha[j + 1], grid.alpha[j + 1], grid.alpha[j]};
        const double ry[4] = {grid.r[i], grid.r[i], grid.r[i + 1], grid.r[i + 1]};
        std::vector<std::pair<double, double>> hits;
        for (int e = 0; e < 4; ++e) {
          const int n = (e + 1) % 4;
          if ((v[e] < iso) != (v[n] < iso)) {
            const double t = (iso - v[e]) / (v[n] - v[e]);
            hits.emplace_back(ax[e] + t * (ax[n] - ax[e]), ry[e] + t * (ry[n] - ry[e]));
          }
        }
        for (std::size_t h = 0; h + 1 < hits.size(); h += 2) {
          s << "<line x1=\"" << num(f.px(hits[h].first)) << "\" y1=\"" << num(f.py(hits[h].second)) << "\" x2=\""
            << num(f.px(hits[h + 1].first)) << "\" y2=\"" << num(f.py(hits[h + 1].second)) << "\"/>\n";
        }
      }
    }
  }
  s << "</g>\n";

  const std::size_t best = static_cast<std::size_t>(mn_it - grid.values.begin());
  const double bx = f.px(grid.alpha[best % na]), by = f.py(grid.r[best / na]);
  s << "<circle cx=\"" << num(bx) << "\" cy=\"" << num(by) << "\" r=\"5\" fill=\"red\" stroke=\"white\"/>\n";
  axes(s, f, "alpha", "r");
  s << "</svg>\n";
  return s.str();
}

std::string pairs_svg(const std::optional<PairSet>& pairs, const std::optional<Tensor>& target, const std::string& title) {
  Frame f;
  f.width = 600;
  f.height = 600;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  auto extend = [&](const Tensor& t) {
    for (double v : t.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  if (pairs) {
    extend(pairs->inputs);
    extend(pairs->outputs);
  }
  if (target) extend(*target);
  if (!(hi > lo)) {
    lo = (std::isfinite(lo) ? lo : 0.0) - 1.0;
    hi = lo + 2.0;
  }
  const double pad = 0.05 * (hi - lo);
  f.x0 = f.y0 = lo - pad;
  f.x1 = f.y1 = hi + pad;
  std::ostringstream s;
  header(s, f, title);
  if (target && target->rank() == 2 && target->cols() >= 2) {
    s << "<g fill=\"#9e9e9e\" fill-opacity=\"0.5\">\n";
    for (std::size_t i = 0; i < target->rows(); ++i) {
      s << "<circle cx=\"" << num(f.px(target->at(i, 0))) << "\" cy=\"" << num(f.py(target->at(i, 1)))
        << "\" r=\"1.5\"/>\n";
    }
    s << "</g>\n";
  }
  if (pairs && pairs->dim() >= 2) {
    const PairSet& p = *pairs;
    s << "<g stroke=\"#555555\" stroke-width=\"0.4\" stroke-opacity=\"0.5\">\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      s << "<line x1=\"" << num(f.px(p.inputs.at(i, 0))) << "\" y1=\"" << num(f.py(p.inputs.at(i, 1)))
        << "\" x2=\"" << num(f.px(p.outputs.at(i, 0))) << "\" y2=\"" << num(f.py(p.outputs.at(i, 1)))
        << "\"/>\n";
    }
    s << "</g>\n<g fill=\"#1f77b4\">\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      s << "<circle cx=\"" << num(f.px(p.inputs.at(i, 0))) << "\" cy=\"" << num(f.py(p.inputs.at(i, 1)))
        << "\" r=\"1.8\"/>\n";
    }
    s << "</g>\n<g fill=\"#ff7f0e\">\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      s << "<circle cx=\"" << num(f.px(p.outputs.at(i, 0))) << "\" cy=\"" << num(f.py(p.outputs.at(i, 1)))
        << "\" r=\"1.8\"/>\n";
    }
    s << "</g>\n";
  }
  axes(s, f, "", "");
  s << "</svg>\n";
  return s.str();
}

std::string line_svg(const std::vector<double>& xs, const std::vector<std::vector<double>>& ys,
                     const std::vector<std::string>& labels, const std::string& x_label, const std::string& title,
                     bool log_x) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
  Frame f;
  f.x0 = f.y0 = std::numeric_limits<double>::infinity();
  f.x1 = f.y1 = -f.x0;
  for (double x : xs) {
    if (log_x && !(x > 0)) continue;
    f.x0 = std::min(f.x0, tx(x));
    f.x1 = std::max(f.x1, tx(x));
  }
  for (const auto& series : ys) {
    for (double y : series) {
      if (!std::isfinite(y)) continue;
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  }
  if (!(f.x1 > f.x0)) {
    f.x0 = (std::isfinite(f.x0) ? f.x0 : 0.0) - 1.0;
    f.x1 = f.x0 + 2.0;
  }
  if (!(f.y1 > f.y0)) {
    f.y0 = (std::isfinite(f.y0) ? f.y0 : 0.0) - 1.0;
    f.y1 = f.y0 + 2.0;
  }
  std::ostringstream s;
  header(s, f, title);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const char* color = colors[k % 6];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < xs.size() && i < ys[k].size(); ++i) {
      if ((log_x && !(xs[i] > 0)) || !std::isfinite(ys[k][i])) continue;
      s << (first ? "" : " ") << num(f.px(tx(xs[i]))) << "," << num(f.py(ys[k][i]));
      first = false;
    }
    s << "\"/>\n";
    if (k < labels.size()) {
      s << "<text x=\"" << num(f.width - f.right - 5) << "\" y=\"" << num(f.top + 16 + 16 * k)
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(labels[k]) << "</text>\n";
    }
  }
  axes(s, f, log_x ? "log10 " + x_label : x_label, "");
  s << "</svg>\n";
  return s.str();
}

}  // namespace rdmd
