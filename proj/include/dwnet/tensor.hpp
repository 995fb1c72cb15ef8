#ifndef DWNET_TENSOR_HPP
#define DWNET_TENSOR_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace dwnet {

class Rng;

/// Dense row-major matrix of doubles. Row vectors are 1 x c, scalars 1 x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double value);
  static Tensor scalar(double value);
  static Tensor row(const std::vector<double>& values);
  static Tensor column(const std::vector<double>& values);
  /// Entries i.i.d. uniform in [-bound, bound].
  static Tensor uniform(int r, int c, double bound, Rng& rng);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& other) const {
    return rows == other.rows && cols == other.cols;
  }
  bool all_finite() const;
  double max_abs() const;

  std::string shape_str() const;
};

bool operator==(const Tensor& a, const Tensor& b);

/// Throws ShapeMismatch naming `what` unless a and b have equal shapes.
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace dwnet

#endif  // DWNET_TENSOR_HPP
