#pragma once

#include "bgcn/metrics.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bgcn {

// 8-bit RGB raster written as binary PPM.
class Image {
 public:
  Image(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void fill_rect(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  const std::vector<std::uint8_t>& pixels() const { return rgb_; }
  void save_ppm(const std::filesystem::path& path) const;

 private:
  int width_, height_;
  std::vector<std::uint8_t> rgb_;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<Index> counts;
};

// Equal-width bins over [min, max] of the values; the last bin is closed.
Histogram histogram(const std::vector<double>& values, int bins);

// Diverging map: blue below zero, white at zero, red above, scaled by the
// largest magnitude.
Image render_heatmap(const MatrixXd& m, int cell = 12);
Image render_histogram(const Histogram& h, int width = 320, int height = 200);
// One polyline per series over a shared x index.
Image render_curves(const std::vector<std::vector<double>>& series, int width = 480, int height = 240);

// Numbers behind the figures.
struct PlotInputs {
  MatrixXd observed;        // observed adjacency
  MatrixXd constant;        // normalized MAP graph
  MatrixXd constant_phi;    // constant + phi
  MetricReport test;        // per-horizon test metrics
  std::vector<std::string> trace_nodes;
  MatrixXd trace_prediction;  // nodes x steps, one-step-ahead
  MatrixXd trace_truth;
};

// Writes each figure as <name>.ppm plus its <name>.csv sidecar and returns
// the sidecar paths.
std::vector<std::filesystem::path> write_plots(const std::filesystem::path& dir, const PlotInputs& inputs);

// Off-diagonal entries, row-major.
std::vector<double> off_diagonal(const MatrixXd& m);

}  // namespace bgcn
