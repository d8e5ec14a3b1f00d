#pragma once

#include "bgcn/backbone.hpp"
#include "bgcn/rng.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace bgcn::testing {

inline MatrixXd random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(lo, hi);
  return m;
}

// Relative error between two gradient tensors; 0 when both vanish.
inline double relative_error(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  if (scale < 1e-12) return 0.0;
  return (a - b).norm() / scale;
}

// Tiny backbone used by gradient and causality probes.
inline BackboneConfig tiny_config(GraphMode mode = GraphMode::bayesian, SkipSource skip = SkipSource::tcn) {
  BackboneConfig c;
  c.num_nodes = 4;
  c.layers = 3;
  c.kernel_size = 2;
  c.dilations = {1, 2, 2};
  c.residual_channels = 3;
  c.skip_channels = 3;
  c.end_channels = 3;
  c.t_in = 6;
  c.horizon = 2;
  c.graph_mode = mode;
  c.skip_source = skip;
  c.dropout_rate = 0.5;
  c.adaptive_dim = 2;
  return c;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bgcn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace bgcn::testing
