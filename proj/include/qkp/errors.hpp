#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qkp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParam : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  GridMismatch() : Error("fields live on different grids") {}
};

/// An x1-line mean exceeded the zero-mean tolerance.
class NonZeroMean : public Error {
 public:
  NonZeroMean(double worst, int line)
      : Error("x1-line mean " + std::to_string(worst) + " on line " +
              std::to_string(line) + " exceeds tolerance"),
        worst_mean(worst),
        line_index(line) {}
  double worst_mean;
  int line_index;
};

class NoConvergence : public Error {
 public:
  NoConvergence(int iters, double residual)
      : Error("no convergence after " + std::to_string(iters) +
              " iterations, residual " + std::to_string(residual)),
        iterations(iters),
        residual_norm(residual) {}
  int iterations;
  double residual_norm;
};

class NonPositiveDensity : public Error {
 public:
  explicit NonPositiveDensity(double min_value)
      : Error("density reached non-positive value " + std::to_string(min_value)),
        minimum(min_value) {}
  double minimum;
};

/// Solution amplitude exceeded the overflow guard (or became non-finite).
class Blowup : public Error {
 public:
  Blowup(double time, double max_abs)
      : Error("blowup at t=" + std::to_string(time) +
              " (max |value| = " + std::to_string(max_abs) + ")"),
        t(time),
        max_value(max_abs) {}
  double t;
  double max_value;
};

class DerivationMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t col, const std::string& what)
      : Error("parse error at column " + std::to_string(col) + ": " + what), column(col) {}
  std::size_t column;  // 1-based
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace qkp
