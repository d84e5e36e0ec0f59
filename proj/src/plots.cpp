#include "kalium/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kalium/errors.hpp"
#include "kalium/regression.hpp"

namespace kalium {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kMargin = 64.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Affine map from data coordinates to the plot box (y axis flipped).
struct Axis {
  double lo = 0.0, hi = 1.0, px_lo = 0.0, px_hi = 1.0;
  double operator()(double v) const {
    return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo);
  }
};

void open_svg(std::ostringstream& out) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
}

void draw_frame(std::ostringstream& out, const Axis& x, const Axis& y,
                const std::string& x_label, const std::string& y_label) {
  out << "<line x1=\"" << x.px_lo << "\" y1=\"" << y.px_lo << "\" x2=\"" << x.px_hi
      << "\" y2=\"" << y.px_lo << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << x.px_lo << "\" y1=\"" << y.px_lo << "\" x2=\"" << x.px_lo
      << "\" y2=\"" << y.px_hi << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x.lo + (x.hi - x.lo) * i / 4.0;
    const double yv = y.lo + (y.hi - y.lo) * i / 4.0;
    out << "<text x=\"" << x(xv) << "\" y=\"" << y.px_lo + 20
        << "\" font-size=\"12\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    out << "<text x=\"" << x.px_lo - 8 << "\" y=\"" << y(yv) + 4
        << "\" font-size=\"12\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  out << "<text x=\"" << (x.px_lo + x.px_hi) / 2 << "\" y=\"" << kHeight - 12
      << "\" font-size=\"14\" text-anchor=\"middle\">" << x_label << "</text>\n";
  out << "<text x=\"16\" y=\"" << (y.px_lo + y.px_hi) / 2
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (y.px_lo + y.px_hi) / 2 << ")\">" << y_label << "</text>\n";
}

std::string k_color(double k, double k_lo, double k_hi) {
  const double t = k_hi > k_lo ? std::clamp((k - k_lo) / (k_hi - k_lo), 0.0, 1.0) : 0.5;
  const int r = static_cast<int>(std::lround(255.0 * t));
  const int b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x20%02x", r, b);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out.flush()) throw DataError("cannot write " + path.string());
}

}  // namespace

void write_template_plot(const std::vector<TemplateSeries>& series,
                         const std::filesystem::path& svg_path,
                         const std::filesystem::path& csv_path) {
  if (series.empty()) throw DataError("no templates to plot");
  double t_lo = series[0].time_s.front(), t_hi = series[0].time_s.back();
  double v_lo = 0.0, v_hi = 0.0, k_lo = series[0].k_mmol_l, k_hi = series[0].k_mmol_l;
  for (const auto& s : series) {
    if (s.time_s.empty() || s.time_s.size() != s.mv.size())
      throw DataError("malformed template series " + s.id);
    t_lo = std::min(t_lo, s.time_s.front());
    t_hi = std::max(t_hi, s.time_s.back());
    v_lo = std::min(v_lo, *std::min_element(s.mv.begin(), s.mv.end()));
    v_hi = std::max(v_hi, *std::max_element(s.mv.begin(), s.mv.end()));
    k_lo = std::min(k_lo, s.k_mmol_l);
    k_hi = std::max(k_hi, s.k_mmol_l);
  }
  if (!(t_hi > t_lo) || !(v_hi > v_lo)) throw DataError("degenerate template plot range");
  const double pad = 0.05 * (v_hi - v_lo);

  const Axis x{t_lo, t_hi, kMargin, kWidth - kMargin};
  const Axis y{v_lo - pad, v_hi + pad, kHeight - kMargin, kMargin};

  std::ostringstream out;
  open_svg(out);
  draw_frame(out, x, y, "time relative to R peak (s)", "voltage (mV)");
  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << k_color(s.k_mmol_l, k_lo, k_hi)
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.time_s.size(); ++i) {
      if (i) out << " ";
      out << num(x(s.time_s[i])) << "," << num(y(s.mv[i]));
    }
    out << "\"/>\n";
  }
  // Legend: one entry per distinct K, colored like the polylines.
  double legend_y = kMargin + 4;
  for (const auto& s : series) {
    out << "<text x=\"" << kWidth - kMargin + 6 << "\" y=\"" << legend_y
        << "\" font-size=\"11\" fill=\"" << k_color(s.k_mmol_l, k_lo, k_hi) << "\">"
        << num(s.k_mmol_l) << "</text>\n";
    legend_y += 14;
  }
  out << "</svg>\n";
  write_file(svg_path, out.str());
  store_template_table(series, csv_path);
}

void write_weighting_plot(const std::vector<double>& concentrations,
                          const std::filesystem::path& svg_path,
                          const std::filesystem::path& csv_path) {
  if (concentrations.empty()) throw DataError("no concentration values to plot");
  const double k_min = *std::min_element(concentrations.begin(), concentrations.end());
  const double k_max = *std::max_element(concentrations.begin(), concentrations.end());

  // Histogram with fixed 0.25 mmol/l bins aligned to multiples of the width.
  const double bin_w = 0.25;
  const double first_edge = std::floor(k_min / bin_w) * bin_w;
  const std::size_t n_bins = static_cast<std::size_t>(
      std::max(1.0, std::ceil((k_max - first_edge) / bin_w + 1e-9)));
  std::vector<std::size_t> counts(n_bins, 0);
  for (double c : concentrations) {
    auto bin = static_cast<std::size_t>((c - first_edge) / bin_w);
    counts[std::min(bin, n_bins - 1)]++;
  }
  const std::size_t count_max = *std::max_element(counts.begin(), counts.end());

  const double c_lo = first_edge - 2.0 * bin_w;
  const double c_hi = first_edge + bin_w * static_cast<double>(n_bins) + 2.0 * bin_w;
  const Axis x{c_lo, c_hi, kMargin, kWidth - kMargin};
  const Axis y_count{0.0, static_cast<double>(count_max) * 1.1, kHeight - kMargin, kMargin};
  const Axis y_weight{0.0, 1.1, kHeight - kMargin, kMargin};

  std::ostringstream out;
  std::ostringstream csv;
  csv << "series,x,y\n";
  open_svg(out);
  draw_frame(out, x, y_count, "concentration (mmol/l)", "count");
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double left = first_edge + bin_w * static_cast<double>(b);
    out << "<rect x=\"" << num(x(left)) << "\" y=\""
        << num(y_count(static_cast<double>(counts[b]))) << "\" width=\""
        << num(x(left + bin_w) - x(left)) << "\" height=\""
        << num(y_count(0.0) - y_count(static_cast<double>(counts[b])))
        << "\" fill=\"#9bb7d4\" stroke=\"#5a7ba6\"/>\n";
    csv << "histogram," << format_double(left + 0.5 * bin_w) << "," << counts[b] << "\n";
  }

  const char* colors[3] = {"#1a9641", "#fdae61", "#d7191c"};
  const double wrs[3] = {0.0, 0.5, 1.0};
  for (int i = 0; i < 3; ++i) {
    const WeightingCurve curve = build_weighting_curve(concentrations, wrs[i]);
    out << "<polyline fill=\"none\" stroke=\"" << colors[i]
        << "\" stroke-width=\"2\" points=\"";
    const std::string label = "wr=" + format_double(wrs[i]);
    bool first = true;
    for (double c = c_lo; c <= c_hi + 1e-9; c += 0.02) {
      const double w = weight_of(curve, c);
      if (!first) out << " ";
      first = false;
      out << num(x(c)) << "," << num(y_weight(w));
      csv << label << "," << format_double(c) << "," << format_double(w) << "\n";
    }
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kMargin + 6 << "\" y=\"" << kMargin + 4 + 14 * i
        << "\" font-size=\"11\" fill=\"" << colors[i] << "\">" << label << "</text>\n";
  }
  // Right-hand weight axis labels.
  for (int i = 0; i <= 4; ++i) {
    const double wv = 0.25 * i;
    out << "<text x=\"" << kWidth - kMargin + 4 << "\" y=\"" << y_weight(wv) + 4
        << "\" font-size=\"12\" text-anchor=\"start\">" << num(wv) << "</text>\n";
  }
  out << "</svg>\n";
  write_file(svg_path, out.str());
  write_file(csv_path, csv.str());
}

}  // namespace kalium
