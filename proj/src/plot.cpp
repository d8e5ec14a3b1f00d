#include "bgcn/plot.hpp"

#include "bgcn/text_io.hpp"
#include "bgcn/traffic_data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace bgcn {

Image::Image(int width, int height) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw UsageError("image: size must be positive");
  rgb_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3, 255);
}

void Image::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return;
  const auto at = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  rgb_[at] = r;
  rgb_[at + 1] = g;
  rgb_[at + 2] = b;
}

void Image::fill_rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, r, g, b);
}

void Image::line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, r, g, b);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Image::save_ppm(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P6\n" << width_ << ' ' << height_ << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb_.data()), static_cast<std::streamsize>(rgb_.size()));
}

Histogram histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw UsageError("histogram: bins must be positive");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  if (values.empty()) {
    for (int b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
    return h;
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  if (hi == lo) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) h.edges.push_back(lo + width * b);
  h.edges.push_back(hi);
  for (double v : values) {
    auto b = static_cast<Index>((v - lo) / width);
    b = std::clamp<Index>(b, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  return h;
}

Image render_heatmap(const MatrixXd& m, int cell) {
  if (m.size() == 0) throw ShapeError("heatmap: empty matrix");
  Image img(static_cast<int>(m.cols()) * cell, static_cast<int>(m.rows()) * cell);
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = std::clamp(m(i, j) / scale, -1.0, 1.0);
      const auto fade = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - std::abs(v))));
      const int x = static_cast<int>(j) * cell, y = static_cast<int>(i) * cell;
      if (v >= 0)
        img.fill_rect(x, y, x + cell - 1, y + cell - 1, 255, fade, fade);
      else
        img.fill_rect(x, y, x + cell - 1, y + cell - 1, fade, fade, 255);
    }
  return img;
}

Image render_histogram(const Histogram& h, int width, int height) {
  Image img(width, height);
  const Index peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  const int bins = static_cast<int>(h.counts.size());
  for (int b = 0; b < bins && peak > 0; ++b) {
    const int x0 = b * width / bins, x1 = (b + 1) * width / bins - 2;
    const int bar = static_cast<int>(std::lround(static_cast<double>(h.counts[static_cast<std::size_t>(b)]) /
                                                 static_cast<double>(peak) * (height - 1)));
    if (bar > 0) img.fill_rect(x0, height - bar, x1, height - 1, 70, 110, 180);
  }
  return img;
}

Image render_curves(const std::vector<std::vector<double>>& series, int width, int height) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 4> colors{{{200, 40, 40}, {40, 90, 200}, {40, 150, 60}, {120, 60, 160}}};
  Image img(width, height);
  double lo = INFINITY, hi = -INFINITY;
  std::size_t length = 0;
  for (const auto& s : series)
    for (double v : s)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        length = std::max(length, s.size());
      }
  if (length == 0) return img;
  if (hi == lo) hi = lo + 1.0;
  const int margin = 4;
  auto px = [&](std::size_t i) {
    return length == 1 ? width / 2 : margin + static_cast<int>(i * static_cast<std::size_t>(width - 2 * margin - 1) / (length - 1));
  };
  auto py = [&](double v) {
    return height - 1 - margin - static_cast<int>(std::lround((v - lo) / (hi - lo) * (height - 2 * margin - 1)));
  };
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& c = colors[k % colors.size()];
    const auto& s = series[k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s[i])) continue;
      if (i > 0 && std::isfinite(s[i - 1]))
        img.line(px(i - 1), py(s[i - 1]), px(i), py(s[i]), c[0], c[1], c[2]);
      else
        img.set(px(i), py(s[i]), c[0], c[1], c[2]);
    }
  }
  return img;
}

std::vector<double> off_diagonal(const MatrixXd& m) {
  std::vector<double> out;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) out.push_back(m(i, j));
  return out;
}

namespace {

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void write_histogram(const std::filesystem::path& dir, const std::string& name, const MatrixXd& m,
                     std::vector<std::filesystem::path>& written) {
  const Histogram h = histogram(off_diagonal(m), 20);
  render_histogram(h).save_ppm(dir / (name + ".ppm"));
  auto out = open_text(dir / (name + ".csv"));
  out << "bin_low,bin_high,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
  written.push_back(dir / (name + ".csv"));
}

}  // namespace

std::vector<std::filesystem::path> write_plots(const std::filesystem::path& dir, const PlotInputs& in) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  const std::pair<const char*, const MatrixXd*> graphs[] = {
      {"adjacency_observed", &in.observed}, {"adjacency_constant", &in.constant}, {"adjacency_constant_phi", &in.constant_phi}};
  for (const auto& [name, m] : graphs) {
    const std::string base = name;
    render_heatmap(*m).save_ppm(dir / (base + ".ppm"));
    save_matrix_csv(dir / (base + ".csv"), *m);
    written.push_back(dir / (base + ".csv"));
    write_histogram(dir, "edges_" + base.substr(std::string("adjacency_").size()), *m, written);
  }

  std::vector<double> mae, rmse;
  {
    auto out = open_text(dir / "horizon_metrics.csv");
    out << "horizon,mae,rmse,mape\n";
    for (std::size_t h = 0; h < in.test.horizons.size(); ++h) {
      const MetricValues& v = in.test.horizons[h];
      out << h + 1 << ',' << format_double(v.mae) << ',' << format_double(v.rmse) << ','
          << (v.mape ? format_double(*v.mape) : "") << '\n';
      mae.push_back(v.mae);
      rmse.push_back(v.rmse);
    }
  }
  render_curves({mae, rmse}).save_ppm(dir / "horizon_metrics.ppm");
  written.push_back(dir / "horizon_metrics.csv");

  if (in.trace_prediction.rows() != in.trace_truth.rows() || in.trace_prediction.cols() != in.trace_truth.cols() ||
      static_cast<std::size_t>(in.trace_prediction.rows()) != in.trace_nodes.size())
    throw ShapeError("plot: prediction and truth traces disagree in shape");
  {
    auto out = open_text(dir / "traces.csv");
    out << "step";
    for (const auto& id : in.trace_nodes) out << ',' << id << "_prediction," << id << "_truth";
    out << '\n';
    for (Index t = 0; t < in.trace_prediction.cols(); ++t) {
      out << t;
      for (Index n = 0; n < in.trace_prediction.rows(); ++n)
        out << ',' << format_double(in.trace_prediction(n, t)) << ',' << format_double(in.trace_truth(n, t));
      out << '\n';
    }
  }
  for (Index n = 0; n < in.trace_prediction.rows(); ++n) {
    const auto row = [](const MatrixXd& m, Index r) { return std::vector<double>(m.row(r).begin(), m.row(r).end()); };
    render_curves({row(in.trace_truth, n), row(in.trace_prediction, n)})
        .save_ppm(dir / ("trace_" + in.trace_nodes[static_cast<std::size_t>(n)] + ".ppm"));
  }
  written.push_back(dir / "traces.csv");
  return written;
}

}  // namespace bgcn
