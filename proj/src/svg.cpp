#include "gazekit/svg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace gazekit {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 50;

std::ofstream open_svg(const std::string& path, const std::string& title) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
    << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
  f << "<rect width='100%' height='100%' fill='white'/>\n";
  f << "<text x='" << kWidth / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
    << "</text>\n";
  return f;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void axes(std::ofstream& f, double y_max, const std::string& x_label) {
  f << "<line x1='" << kMargin << "' y1='" << kHeight - kMargin << "' x2='" << kWidth - kMargin
    << "' y2='" << kHeight - kMargin << "' stroke='black'/>\n";
  f << "<line x1='" << kMargin << "' y1='" << kHeight - kMargin << "' x2='" << kMargin << "' y2='"
    << kMargin << "' stroke='black'/>\n";
  f << "<text x='" << kMargin - 8 << "' y='" << kMargin << "' text-anchor='end' font-size='10'>"
    << fmt(y_max) << "</text>\n";
  f << "<text x='" << kMargin - 8 << "' y='" << kHeight - kMargin
    << "' text-anchor='end' font-size='10'>0</text>\n";
  f << "<text x='" << kWidth / 2 << "' y='" << kHeight - 12
    << "' text-anchor='middle' font-size='11'>" << x_label << "</text>\n";
}

}  // namespace

void svg_bar_chart(const std::string& path, const std::string& title,
                   const std::vector<std::string>& labels, const std::vector<double>& values,
                   const std::vector<double>& errors) {
  std::ofstream f = open_svg(path, title);
  double y_max = 1e-9;
  for (std::size_t i = 0; i < values.size(); ++i)
    y_max = std::max(y_max, values[i] + (i < errors.size() ? errors[i] : 0.0));
  y_max *= 1.1;
  axes(f, y_max, "");

  const double plot_w = kWidth - 2.0 * kMargin;
  const double plot_h = kHeight - 2.0 * kMargin;
  const double slot = plot_w / std::max<std::size_t>(1, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double h = values[i] / y_max * plot_h;
    const double x = kMargin + i * slot + slot * 0.15;
    const double y = kHeight - kMargin - h;
    f << "<rect x='" << fmt(x) << "' y='" << fmt(y) << "' width='" << fmt(slot * 0.7)
      << "' height='" << fmt(h) << "' fill='#4878a8'/>\n";
    if (i < errors.size() && errors[i] > 0.0) {
      const double cx = x + slot * 0.35;
      const double e = errors[i] / y_max * plot_h;
      f << "<line x1='" << fmt(cx) << "' y1='" << fmt(y - e) << "' x2='" << fmt(cx) << "' y2='"
        << fmt(std::min(y + e, kHeight - kMargin + 0.0)) << "' stroke='black'/>\n";
    }
    if (i < labels.size())
      f << "<text x='" << fmt(x + slot * 0.35) << "' y='" << kHeight - kMargin + 14
        << "' text-anchor='middle' font-size='9'>" << labels[i] << "</text>\n";
  }
  f << "</svg>\n";
}

void svg_binned_curve(const std::string& path, const std::string& title,
                      const BinnedErrors& binned, const std::string& x_label) {
  std::ofstream f = open_svg(path, title);
  if (binned.bins.empty()) {
    f << "</svg>\n";
    return;
  }
  double x_lo = binned.bins.front().center, x_hi = binned.bins.back().center;
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 1.0;
    x_hi += 1.0;
  }
  double y_max = 1e-9;
  for (const BinStat& b : binned.bins) y_max = std::max(y_max, b.mean_deg);
  y_max *= 1.2;
  axes(f, y_max, x_label);

  const double plot_w = kWidth - 2.0 * kMargin;
  const double plot_h = kHeight - 2.0 * kMargin;
  const auto px = [&](double x) { return kMargin + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto py = [&](double y) {
    return kHeight - kMargin - std::clamp(y / y_max, 0.0, 1.0) * plot_h;
  };

  f << "<polyline fill='none' stroke='#a84848' stroke-width='1.5' points='";
  for (int i = 0; i <= 100; ++i) {
    const double x = x_lo + (x_hi - x_lo) * i / 100.0;
    f << fmt(px(x)) << "," << fmt(py(binned.fit(x))) << " ";
  }
  f << "'/>\n";
  for (const BinStat& b : binned.bins)
    f << "<circle cx='" << fmt(px(b.center)) << "' cy='" << fmt(py(b.mean_deg))
      << "' r='3' fill='#4878a8'/>\n";
  f << "</svg>\n";
}

void svg_histogram2d(const std::string& path, const std::string& title, const Histogram2D& hist) {
  std::ofstream f = open_svg(path, title);
  long peak = 1;
  for (long c : hist.counts) peak = std::max(peak, c);
  const double plot_w = kWidth - 2.0 * kMargin;
  const double plot_h = kHeight - 2.0 * kMargin;
  const double cell_w = plot_w / hist.x_bins;
  const double cell_h = plot_h / hist.y_bins;
  for (int by = 0; by < hist.y_bins; ++by) {
    for (int bx = 0; bx < hist.x_bins; ++bx) {
      const long c = hist.counts[static_cast<std::size_t>(by) * hist.x_bins + bx];
      if (c == 0) continue;
      const int level = static_cast<int>(255.0 * (1.0 - static_cast<double>(c) / peak));
      f << "<rect x='" << fmt(kMargin + bx * cell_w) << "' y='" << fmt(kMargin + by * cell_h)
        << "' width='" << fmt(cell_w) << "' height='" << fmt(cell_h) << "' fill='rgb(" << level
        << "," << level << ",255)'/>\n";
    }
  }
  f << "<rect x='" << kMargin << "' y='" << kMargin << "' width='" << fmt(plot_w) << "' height='"
    << fmt(plot_h) << "' fill='none' stroke='black'/>\n";
  f << "</svg>\n";
}

void write_report_plots(const std::string& dir, const EvalReport& report) {
  fs::create_directories(dir);
  std::vector<std::string> labels;
  std::vector<double> means, stds;
  for (const PersonStat& p : report.per_person) {
    labels.push_back(p.person);
    means.push_back(p.mean_deg);
    stds.push_back(p.stddev_deg);
  }
  svg_bar_chart((fs::path(dir) / "per_person.svg").string(),
                "mean angular error by person (deg)", labels, means, stds);
  svg_binned_curve((fs::path(dir) / "error_by_yaw.svg").string(),
                   "error vs gaze yaw (deg)", report.by_yaw, "gaze yaw (deg)");
  svg_binned_curve((fs::path(dir) / "error_by_intensity.svg").string(),
                   "error vs left-right intensity difference", report.by_intensity,
                   "left minus right mean intensity");
}

void write_statistics_plots(const std::string& dir, const DatasetStatistics& stats) {
  fs::create_directories(dir);
  const auto hist_chart = [&](const char* file, const char* title, const Histogram& h) {
    std::vector<std::string> labels;
    std::vector<double> values;
    const int bins = static_cast<int>(h.counts.size());
    for (int b = 0; b < bins; ++b) {
      labels.push_back(b % 4 == 0 ? fmt(h.lo + (b + 0.5) * (h.hi - h.lo) / bins) : "");
      values.push_back(static_cast<double>(h.counts[b]));
    }
    svg_bar_chart((fs::path(dir) / file).string(), title, labels, values, {});
  };
  hist_chart("mean_intensity.svg", "mean grey level inside the patch", stats.mean_intensity);
  hist_chart("left_right_diff.svg", "left minus right mean intensity", stats.left_right_diff);
  svg_histogram2d((fs::path(dir) / "gaze_hist.svg").string(), "gaze angles (deg)", stats.gaze);
  svg_histogram2d((fs::path(dir) / "head_hist.svg").string(), "head angles (deg)", stats.head);
}

}  // namespace gazekit
