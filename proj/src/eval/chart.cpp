#include "rscnet/eval/chart.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace rscnet::eval {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 80, kRight = 160, kTop = 50, kBottom = 70;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

class Canvas {
 public:
  Canvas(const std::string& title, const std::string& x_label, const std::string& y_label, Range y_range)
      : y_(y_range) {
    out_ = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        "<text x=\"{2}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{3}</text>\n"
        "<text x=\"{2}\" y=\"{4}\" text-anchor=\"middle\">{5}</text>\n"
        "<text transform=\"translate(20,{6}) rotate(-90)\" text-anchor=\"middle\">{7}</text>\n",
        kWidth, kHeight, kLeft + plot_w() / 2, escape(title), kHeight - 15, escape(x_label), kTop + plot_h() / 2,
        escape(y_label));
    for (int i = 0; i <= 5; ++i) {
      const double v = y_.lo + (y_.hi - y_.lo) * i / 5.0;
      const double py = y(v);
      out_ += fmt::format(
          "<line x1=\"{0}\" x2=\"{1}\" y1=\"{2:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n"
          "<text x=\"{3}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:.4g}</text>\n",
          kLeft, kLeft + plot_w(), py, kLeft - 6, py + 4, v);
    }
    out_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333\"/>\n", kLeft,
                        kTop, plot_w(), plot_h());
  }

  static double plot_w() { return kWidth - kLeft - kRight; }
  static double plot_h() { return kHeight - kTop - kBottom; }
  double y(double v) const { return kTop + plot_h() * (1.0 - (v - y_.lo) / (y_.hi - y_.lo)); }

  void x_tick(double px, const std::string& label) {
    out_ += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px, kTop + plot_h() + 18,
                        escape(label));
  }
  void legend(std::size_t i, const std::string& name) {
    const double ly = kTop + 10 + 20 * double(i);
    out_ += fmt::format(
        "<rect x=\"{0}\" y=\"{1}\" width=\"12\" height=\"12\" fill=\"{2}\"/>"
        "<text x=\"{3}\" y=\"{4}\">{5}</text>\n",
        kLeft + plot_w() + 12, ly, kPalette[i % 7], kLeft + plot_w() + 30, ly + 10, escape(name));
  }
  void raw(const std::string& s) { out_ += s; }
  std::string finish() { return out_ + "</svg>\n"; }

 private:
  Range y_;
  std::string out_;
};

}  // namespace

std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<std::string>& categories, const std::vector<Series>& series) {
  Range range;
  for (const auto& s : series) {
    for (double v : s.values) range.add(v);
  }
  range.finish();
  Canvas canvas(title, x_label, y_label, range);
  const double n = double(std::max<std::size_t>(categories.size(), 1));
  auto px = [&](std::size_t i) { return kLeft + Canvas::plot_w() * (double(i) + 0.5) / n; };
  for (std::size_t i = 0; i < categories.size(); ++i) canvas.x_tick(px(i), categories[i]);
  for (std::size_t k = 0; k < series.size(); ++k) {
    std::string path;
    for (std::size_t i = 0; i < series[k].values.size() && i < categories.size(); ++i) {
      const double v = series[k].values[i];
      if (!std::isfinite(v)) {
        path += ' ';
        continue;
      }
      const bool start = path.empty() || path.back() == ' ';
      path += fmt::format("{}{:.1f},{:.1f} ", start ? "M" : "L", px(i), canvas.y(v));
      canvas.raw(fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"3.5\" fill=\"{}\"/>\n", px(i), canvas.y(v),
                             kPalette[k % 7]));
    }
    canvas.raw(fmt::format("<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", path,
                           kPalette[k % 7]));
    canvas.legend(k, series[k].name);
  }
  return canvas.finish();
}

std::string bar_chart_svg(const std::string& title, const std::string& y_label,
                          const std::vector<std::string>& categories, const std::vector<Series>& series,
                          bool log_scale) {
  auto value = [&](double v) { return log_scale ? (v > 0 ? std::log10(v) : std::nan("")) : v; };
  Range range;
  if (!log_scale) range.add(0.0);
  for (const auto& s : series) {
    for (double v : s.values) range.add(value(v));
  }
  if (log_scale && std::isfinite(range.lo)) range.lo = std::floor(range.lo);
  range.finish();
  Canvas canvas(title, "", log_scale ? "log10 " + y_label : y_label, range);
  const double n = double(std::max<std::size_t>(categories.size(), 1));
  const double group = Canvas::plot_w() / n;
  const double bar = 0.8 * group / double(std::max<std::size_t>(series.size(), 1));
  for (std::size_t i = 0; i < categories.size(); ++i) canvas.x_tick(kLeft + group * (double(i) + 0.5), categories[i]);
  const double base = canvas.y(std::max(range.lo, 0.0));
  for (std::size_t k = 0; k < series.size(); ++k) {
    for (std::size_t i = 0; i < series[k].values.size() && i < categories.size(); ++i) {
      const double v = value(series[k].values[i]);
      if (!std::isfinite(v)) continue;
      const double top = canvas.y(v);
      canvas.raw(fmt::format(
          "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"><title>{}: {:.6g}</title>"
          "</rect>\n",
          kLeft + group * double(i) + 0.1 * group + bar * double(k), std::min(top, base), bar, std::abs(base - top),
          kPalette[k % 7], escape(series[k].name), series[k].values[i]));
    }
    canvas.legend(k, series[k].name);
  }
  return canvas.finish();
}

}  // namespace rscnet::eval
