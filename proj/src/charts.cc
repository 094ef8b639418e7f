#include "strata/charts.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "strata/csv.h"
#include "strata/error.h"

namespace strata::app {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 800;
constexpr double kHeight = 450;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 60;
constexpr const char* kSanskritColor = "#d95f02";
constexpr const char* kPersianColor = "#1b9e77";

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<size_t> column(std::string_view name) const {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }
  double number(size_t row, size_t col) const {
    const auto& cell = rows[row].at(col);
    if (cell == "nan") return std::nan("");
    try {
      return std::stod(cell);
    } catch (const std::exception&) {
      throw DataError(fmt::format("chart input: '{}' is not a number", cell));
    }
  }
};

Table read_table(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  Table t;
  std::string line;
  if (std::getline(in, line)) t.header = csv::parse_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    t.rows.push_back(csv::parse_line(line));
  }
  return t;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

class Svg {
 public:
  explicit Svg(std::string_view title) {
    body_ = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"11\">\n"
        "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
        kWidth, kHeight);
    text(kWidth / 2, 22, title, "middle", 14);
  }

  void rect(double x, double y, double w, double h, std::string_view fill) {
    body_ += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
        x, y, std::max(w, 0.0), std::max(h, 0.0), fill);
  }
  void titled_rect(double x, double y, double w, double h, std::string_view fill,
                   std::string_view title) {
    body_ += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
        "fill=\"{}\"><title>{}</title></rect>\n",
        x, y, std::max(w, 0.0), std::max(h, 0.0), fill, escape(title));
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke,
            double width = 1) {
    body_ += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
        "stroke-width=\"{}\"/>\n",
        x1, y1, x2, y2, stroke, width);
  }
  void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke) {
    body_ += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(stroke) +
             "\" points=\"";
    for (const auto& [x, y] : pts) body_ += fmt::format("{:.2f},{:.2f} ", x, y);
    body_ += "\"/>\n";
  }
  void polygon(const std::vector<std::pair<double, double>>& pts, std::string_view fill) {
    body_ += "<polygon stroke=\"none\" fill-opacity=\"0.25\" fill=\"" + std::string(fill) +
             "\" points=\"";
    for (const auto& [x, y] : pts) body_ += fmt::format("{:.2f},{:.2f} ", x, y);
    body_ += "\"/>\n";
  }
  void text(double x, double y, std::string_view s, std::string_view anchor = "start",
            int size = 11, std::string_view extra = "") {
    body_ += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"{}\" font-size=\"{}\"{}>{}</text>\n",
        x, y, anchor, size, extra, escape(s));
  }
  void frame(std::string_view x_label, std::string_view y_label) {
    line(kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom, "black");
    line(kLeft, kTop, kLeft, kHeight - kBottom, "black");
    text((kLeft + kWidth - kRight) / 2, kHeight - 15, x_label, "middle");
    text(18, (kTop + kHeight - kBottom) / 2, y_label, "middle", 11,
         fmt::format(" transform=\"rotate(-90 18 {:.2f})\"", (kTop + kHeight - kBottom) / 2));
  }
  void y_ticks(double lo, double hi) {
    for (int i = 0; i <= 4; ++i) {
      const double v = lo + (hi - lo) * i / 4.0;
      const double y = kHeight - kBottom - (kHeight - kTop - kBottom) * i / 4.0;
      line(kLeft - 4, y, kLeft, y, "black");
      text(kLeft - 6, y + 4, fmt::format("{:.3g}", v), "end");
    }
  }
  std::string finish() { return body_ + "</svg>\n"; }

 private:
  std::string body_;
};

double plot_x(double v, double lo, double hi) {
  const double span = hi > lo ? hi - lo : 1.0;
  return kLeft + (kWidth - kLeft - kRight) * (v - lo) / span;
}

double plot_y(double v, double lo, double hi) {
  const double span = hi > lo ? hi - lo : 1.0;
  return kHeight - kBottom - (kHeight - kTop - kBottom) * (v - lo) / span;
}

std::string bar_chart(const Table& t, std::string_view title) {
  Svg svg(title);
  const auto word = t.column("word");
  const auto origin = t.column("origin");
  const auto errors = t.column("times_misclassified");
  if (!word || !origin || !errors) throw DataError("misclass CSV lacks required columns");
  double hi = 1;
  for (size_t r = 0; r < t.rows.size(); ++r) hi = std::max(hi, t.number(r, *errors));
  svg.frame("words ranked by errors", "cumulative misclassifications");
  svg.y_ticks(0, hi);
  const double slot = (kWidth - kLeft - kRight) / std::max<double>(1, t.rows.size());
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const double v = t.number(r, *errors);
    const double y = plot_y(v, 0, hi);
    const bool sanskrit = t.rows[r][*origin] == "SANSKRIT";
    svg.titled_rect(kLeft + slot * r, y, slot * 0.9, kHeight - kBottom - y,
                    sanskrit ? kSanskritColor : kPersianColor, t.rows[r][*word]);
  }
  svg.rect(kWidth - 170, kTop, 10, 10, kSanskritColor);
  svg.text(kWidth - 155, kTop + 9, "SANSKRIT");
  svg.rect(kWidth - 170, kTop + 15, 10, 10, kPersianColor);
  svg.text(kWidth - 155, kTop + 24, "PERSO_ARABIC");
  return svg.finish();
}

// Line with an optional +-std band. Non-numeric x values are plotted at
// their row index and labelled.
std::string line_chart(const Table& t, std::string_view title, std::string_view x_col,
                       std::string_view y_col, std::optional<std::string_view> std_col,
                       std::optional<std::string_view> second_y = std::nullopt) {
  Svg svg(title);
  const auto xc = t.column(x_col);
  const auto yc = t.column(y_col);
  if (!xc || !yc) throw DataError(fmt::format("chart input lacks '{}' or '{}'", x_col, y_col));
  std::optional<size_t> sc;
  if (std_col) sc = t.column(*std_col);
  const auto y2 = second_y ? t.column(*second_y) : std::nullopt;
  std::vector<double> xs;
  std::vector<std::string> labels;
  bool categorical = false;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    try {
      xs.push_back(std::stod(t.rows[r][*xc]));
    } catch (const std::exception&) {
      categorical = true;
    }
    labels.push_back(t.rows[r][*xc]);
  }
  if (categorical) {
    xs.clear();
    for (size_t r = 0; r < t.rows.size(); ++r) xs.push_back(static_cast<double>(r));
  }
  double x_lo = xs.empty() ? 0 : *std::min_element(xs.begin(), xs.end());
  double x_hi = xs.empty() ? 1 : *std::max_element(xs.begin(), xs.end());
  if (categorical) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  double y_lo = 0;
  double y_hi = 1;
  const bool has_band = sc.has_value();
  const size_t band_col = sc.value_or(0);
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const double s = has_band ? t.number(r, band_col) : 0.0;
    y_lo = std::min(y_lo, t.number(r, *yc) - s);
    y_hi = std::max(y_hi, t.number(r, *yc) + s);
  }
  svg.frame(x_col, y_col);
  svg.y_ticks(y_lo, y_hi);
  if (sc && !t.rows.empty()) {
    std::vector<std::pair<double, double>> band;
    for (size_t r = 0; r < t.rows.size(); ++r) {
      band.emplace_back(plot_x(xs[r], x_lo, x_hi),
                        plot_y(t.number(r, *yc) + t.number(r, *sc), y_lo, y_hi));
    }
    for (size_t r = t.rows.size(); r-- > 0;) {
      band.emplace_back(plot_x(xs[r], x_lo, x_hi),
                        plot_y(t.number(r, *yc) - t.number(r, *sc), y_lo, y_hi));
    }
    svg.polygon(band, "#7570b3");
  }
  std::vector<std::pair<double, double>> pts;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    pts.emplace_back(plot_x(xs[r], x_lo, x_hi), plot_y(t.number(r, *yc), y_lo, y_hi));
  }
  svg.polyline(pts, "#7570b3");
  if (y2) {
    std::vector<std::pair<double, double>> pts2;
    for (size_t r = 0; r < t.rows.size(); ++r) {
      pts2.emplace_back(plot_x(xs[r], x_lo, x_hi), plot_y(t.number(r, *y2), y_lo, y_hi));
    }
    svg.polyline(pts2, "#999999");
    svg.text(kWidth - 200, kTop + 10, fmt::format("grey: {}", *second_y));
  }
  const size_t step = std::max<size_t>(1, t.rows.size() / 10);
  for (size_t r = 0; r < t.rows.size(); r += step) {
    svg.text(plot_x(xs[r], x_lo, x_hi), kHeight - kBottom + 15, labels[r], "middle");
  }
  return svg.finish();
}

std::string heatmap(const Table& t, std::string_view title) {
  Svg svg(title);
  std::map<std::string, std::vector<size_t>> panels;
  std::vector<std::string> panel_order;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const auto& name = t.rows[r].at(0);
    if (!panels.contains(name)) panel_order.push_back(name);
    panels[name].push_back(r);
  }
  const size_t nv = t.header.size() >= 2 ? t.header.size() - 2 : 0;
  const double panel_width = (kWidth - 40) / std::max<double>(1, panel_order.size());
  const double cell = std::min((panel_width - 120) / std::max<double>(1, nv),
                               (kHeight - kTop - 40) / std::max<double>(1, nv));
  for (size_t p = 0; p < panel_order.size(); ++p) {
    const double x0 = 20 + panel_width * p + 110;
    const double y0 = kTop + 20;
    svg.text(x0 + cell * nv / 2, kTop + 12, panel_order[p], "middle", 12);
    const auto& rows = panels[panel_order[p]];
    for (size_t i = 0; i < rows.size() && i < nv; ++i) {
      svg.text(x0 - 4, y0 + cell * (i + 0.6), t.rows[rows[i]].at(1), "end", 9);
      for (size_t j = 0; j < nv; ++j) {
        const double r = t.number(rows[i], j + 2);
        std::string fill = "#dddddd";
        if (!std::isnan(r)) {
          const int shade = static_cast<int>(std::lround(255 * (1 - std::abs(r))));
          fill = r >= 0 ? fmt::format("#{:02x}{:02x}ff", shade, shade)
                        : fmt::format("#ff{:02x}{:02x}", shade, shade);
        }
        svg.rect(x0 + cell * j, y0 + cell * i, cell - 1, cell - 1, fill);
        svg.text(x0 + cell * (j + 0.5), y0 + cell * (i + 0.6),
                 std::isnan(r) ? "n/a" : fmt::format("{:.2f}", r), "middle", 9);
      }
    }
  }
  return svg.finish();
}

std::string range_chart(const Table& t, std::string_view title) {
  Svg svg(title);
  const auto dim = t.column("dimension");
  const auto mean = t.column("mean_abs_phi");
  const auto lo = t.column("min_phi");
  const auto hi = t.column("max_phi");
  const auto rank = t.column("rank");
  if (!dim || !mean || !lo || !hi || !rank) throw DataError("SHAP CSV lacks required columns");
  std::vector<size_t> order(t.rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return t.number(a, *rank) < t.number(b, *rank);
  });
  const size_t shown = std::min<size_t>(order.size(), 20);
  double y_lo = 0;
  double y_hi = 0;
  for (size_t k = 0; k < shown; ++k) {
    y_lo = std::min(y_lo, t.number(order[k], *lo));
    y_hi = std::max(y_hi, t.number(order[k], *hi));
  }
  if (y_hi <= y_lo) y_hi = y_lo + 1;
  svg.frame("dimension (top 20 by mean |phi|)", "phi range");
  svg.y_ticks(y_lo, y_hi);
  const double slot = (kWidth - kLeft - kRight) / std::max<double>(1, shown);
  for (size_t k = 0; k < shown; ++k) {
    const size_t r = order[k];
    const double x = kLeft + slot * (k + 0.5);
    svg.line(x, plot_y(t.number(r, *lo), y_lo, y_hi), x, plot_y(t.number(r, *hi), y_lo, y_hi),
             "#7570b3", 4);
    svg.rect(x - 3, plot_y(t.number(r, *mean), y_lo, y_hi) - 3, 6, 6, "black");
    svg.text(x, kHeight - kBottom + 15, t.rows[r][*dim], "middle");
  }
  return svg.finish();
}

std::optional<std::string> render(const fs::path& csv_path) {
  const std::string base = csv_path.stem().string();
  if (base.find("misclass") != std::string::npos) {
    return bar_chart(read_table(csv_path), "Cumulative misclassifications per word");
  }
  if (base.ends_with("iterations")) {
    return line_chart(read_table(csv_path), "Accuracy per iteration", "iteration", "accuracy",
                      std::nullopt);
  }
  if (base.starts_with("sweep_")) {
    return line_chart(read_table(csv_path),
                      fmt::format("Accuracy by {}", base.substr(6)), "value",
                      "mean_accuracy", "std_accuracy");
  }
  if (base.starts_with("ablation_")) {
    return line_chart(read_table(csv_path),
                      fmt::format("Dimension ablation ({})", base.substr(9)), "n_dims",
                      "mean_accuracy", "std_accuracy");
  }
  if (base == "correlation") return heatmap(read_table(csv_path), "Correlation matrix");
  if (base == "overlap") {
    return line_chart(read_table(csv_path), "Top-k overlap between corpora", "k", "jaccard",
                      std::nullopt, "expected_random_jaccard");
  }
  if (base == "shap_summary") return range_chart(read_table(csv_path), "SHAP feature effects");
  return std::nullopt;
}

}  // namespace

std::vector<fs::path> emit_charts(const fs::path& run_dir) {
  std::vector<fs::path> inputs;
  if (fs::is_directory(run_dir)) {
    for (const auto& entry : fs::directory_iterator(run_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") {
        inputs.push_back(entry.path());
      }
    }
  }
  std::sort(inputs.begin(), inputs.end());
  std::vector<fs::path> written;
  for (const auto& path : inputs) {
    const auto svg = render(path);
    if (!svg) continue;
    auto out_path = path;
    out_path.replace_extension(".svg");
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", out_path.string()));
    out << *svg;
    written.push_back(out_path);
  }
  return written;
}

}  // namespace strata::app
