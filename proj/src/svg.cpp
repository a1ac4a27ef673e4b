#include "cegzsl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cegzsl::svg {

namespace {

constexpr double kWidth = 560, kHeight = 380;
constexpr double kLeft = 70, kRight = 140, kTop = 40, kBottom = 60;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string header(double w, double h, const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
    << "</text>\n";
  return o.str();
}

// White-to-blue ramp.
std::string shade(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 225 * v));
  const int g = static_cast<int>(std::lround(255 - 160 * v));
  const int b = static_cast<int>(std::lround(255 - 75 * v));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& x_label,
                      const std::vector<std::string>& x_ticks, const std::vector<Series>& series) {
  std::ostringstream o;
  o << header(kWidth, kHeight, title);
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const std::size_t n = x_ticks.size();
  auto px = [&](std::size_t i) { return kLeft + (n > 1 ? pw * i / (n - 1) : pw / 2); };
  auto py = [&](double v) { return kTop + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

  o << "<g stroke=\"#ccc\">\n";
  for (int k = 0; k <= 4; ++k) {
    const double y = py(k / 4.0);
    o << "<line x1=\"" << kLeft << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft + pw << "\" y2=\""
      << num(y) << "\"/>\n";
  }
  o << "</g>\n<g text-anchor=\"end\">\n";
  for (int k = 0; k <= 4; ++k) {
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(py(k / 4.0) + 4) << "\">" << num(k / 4.0)
      << "</text>\n";
  }
  o << "</g>\n<g text-anchor=\"middle\">\n";
  for (std::size_t i = 0; i < n; ++i) {
    o << "<text x=\"" << num(px(i)) << "\" y=\"" << kTop + ph + 18 << "\">" << escape(x_ticks[i])
      << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14 << "\">" << escape(x_label)
    << "</text>\n</g>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < std::min(n, series[s].ys.size()); ++i) {
      if (!std::isfinite(series[s].ys[i])) continue;
      o << (first ? "" : " ") << num(px(i)) << ',' << num(py(series[s].ys[i]));
      first = false;
    }
    o << "\"/>\n";
    for (std::size_t i = 0; i < std::min(n, series[s].ys.size()); ++i) {
      if (!std::isfinite(series[s].ys[i])) continue;
      o << "<circle cx=\"" << num(px(i)) << "\" cy=\"" << num(py(series[s].ys[i])) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    }
    const double ly = kTop + 16 + 20.0 * s;
    o << "<line x1=\"" << kLeft + pw + 16 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kLeft + pw + 36
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
      << "<text x=\"" << kLeft + pw + 42 << "\" y=\"" << ly << "\">" << escape(series[s].name)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string heatmap(const std::string& title, const std::string& row_label,
                    const std::string& col_label, const std::vector<std::string>& row_ticks,
                    const std::vector<std::string>& col_ticks,
                    const std::vector<std::vector<double>>& values) {
  const double cell = 64;
  const double left = 90, top = 50;
  const double w = left + cell * col_ticks.size() + 30;
  const double h = top + cell * row_ticks.size() + 60;
  std::ostringstream o;
  o << header(w, h, title);
  for (std::size_t r = 0; r < row_ticks.size(); ++r) {
    for (std::size_t c = 0; c < col_ticks.size(); ++c) {
      const double v = r < values.size() && c < values[r].size() ? values[r][c] : NAN;
      const double x = left + cell * c, y = top + cell * r;
      const bool ok = std::isfinite(v);
      o << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
        << "\" fill=\"" << (ok ? shade(v) : "#bbbbbb") << "\" stroke=\"white\"/>\n"
        << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
        << "\" text-anchor=\"middle\" fill=\"" << (ok && v > 0.6 ? "white" : "black") << "\">"
        << (ok ? num(v) : "n/a") << "</text>\n";
    }
    o << "<text x=\"" << left - 8 << "\" y=\"" << top + cell * r + cell / 2 + 4
      << "\" text-anchor=\"end\">" << escape(row_ticks[r]) << "</text>\n";
  }
  for (std::size_t c = 0; c < col_ticks.size(); ++c) {
    o << "<text x=\"" << left + cell * c + cell / 2 << "\" y=\"" << top + cell * row_ticks.size() + 18
      << "\" text-anchor=\"middle\">" << escape(col_ticks[c]) << "</text>\n";
  }
  o << "<text x=\"" << left + cell * col_ticks.size() / 2 << "\" y=\"" << h - 12
    << "\" text-anchor=\"middle\">" << escape(col_label) << "</text>\n"
    << "<text x=\"16\" y=\"" << top + cell * row_ticks.size() / 2
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + cell * row_ticks.size() / 2
    << ")\">" << escape(row_label) << "</text>\n</svg>\n";
  return o.str();
}

}  // namespace cegzsl::svg
