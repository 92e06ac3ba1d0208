#include "stratreg/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stratreg/cli/csv.hpp"

namespace stratreg::cli {

namespace {

constexpr double kWidth = 640, kHeight = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

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

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
      << "</text>\n";
}

}  // namespace

std::string svg_bar_chart(const std::string& title, const std::vector<Bar>& bars) {
  std::ostringstream out;
  header(out, title);
  const double plot_w = kWidth - kLeft - 30, plot_h = kHeight - kTop - kBottom;
  double top = 0.0;
  for (const auto& b : bars) top = std::max(top, b.value);
  if (!(top > 0.0)) top = 1.0;
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w << "\" y2=\""
      << kTop + plot_h << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << kLeft - 5 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\">" << num(top) << "</text>\n";
  out << "<text x=\"" << kLeft - 5 << "\" y=\"" << kTop + plot_h << "\" text-anchor=\"end\">0</text>\n";
  const double slot = bars.empty() ? plot_w : plot_w / static_cast<double>(bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = plot_h * std::max(0.0, bars[i].value) / top;
    const double x = kLeft + slot * i + slot * 0.1;
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(kTop + plot_h - h) << "\" width=\"" << num(slot * 0.8)
        << "\" height=\"" << num(h) << "\" fill=\"" << kPalette[0] << "\"/>\n";
    out << "<text x=\"" << num(x + slot * 0.4) << "\" y=\"" << kTop + plot_h + 14
        << "\" text-anchor=\"middle\" font-size=\"9\">" << escape(bars[i].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_loglog_plot(const std::string& title, const std::string& y_label, const std::vector<Series>& series) {
  std::ostringstream out;
  header(out, title);
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points)
      if (x > 0 && y > 0) {
        x0 = std::min(x0, std::log10(x));
        x1 = std::max(x1, std::log10(x));
        y0 = std::min(y0, std::log10(y));
        y1 = std::max(y1, std::log10(y));
      }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + plot_w * (std::log10(x) - x0) / (x1 - x0); };
  auto py = [&](double y) { return kTop + plot_h * (1.0 - (std::log10(y) - y0) / (y1 - y0)); };

  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\"" << plot_h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(std::ceil(x0)); e <= static_cast<int>(std::floor(x1)); ++e)
    out << "<text x=\"" << num(px(std::pow(10.0, e))) << "\" y=\"" << kTop + plot_h + 15
        << "\" text-anchor=\"middle\">1e" << e << "</text>\n";
  for (int e = static_cast<int>(std::ceil(y0)); e <= static_cast<int>(std::floor(y1)); ++e)
    out << "<text x=\"" << kLeft - 5 << "\" y=\"" << num(py(std::pow(10.0, e)) + 4)
        << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  out << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 10 << "\" text-anchor=\"middle\">n</text>\n";
  out << "<text x=\"15\" y=\"" << kTop + plot_h / 2 << "\" transform=\"rotate(-90 15 " << kTop + plot_h / 2
      << ")\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % (sizeof kPalette / sizeof *kPalette)];
    std::string pts;
    for (const auto& [x, y] : s.points)
      if (x > 0 && y > 0) pts += num(px(x)) + "," + num(py(y)) + " ";
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (s.dashed ? " stroke-dasharray=\"5,4\"" : "") << " points=\"" << pts << "\"/>\n";
    out << "<text x=\"" << kWidth - kRight + 8 << "\" y=\"" << kTop + 12 + 14 * i << "\" fill=\"" << color << "\">"
        << escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace stratreg::cli
