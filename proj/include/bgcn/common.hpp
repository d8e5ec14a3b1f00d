#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bgcn {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;

// Error hierarchy. The CLI maps each family onto an exit code:
// UsageError -> 1, DataError -> 2, DivergenceError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

// Input that is well-formed but mathematically degenerate (zero variance,
// zero kernel bandwidth, ...).
struct DegenerateInputError : DataError {
  using DataError::DataError;
};

struct ShapeError : DataError {
  using DataError::DataError;
};

struct BarrierViolationError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  using Error::Error;
};

inline std::string shape_string(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace bgcn
