#include "dwnet/tensor.hpp"

#include <cmath>
#include <cstdio>

#include "dwnet/error.hpp"
#include "dwnet/rng.hpp"

namespace dwnet {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidTopology: return "InvalidTopology";
    case ErrorKind::InvalidRouting: return "InvalidRouting";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::SizeMismatch: return "SizeMismatch";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::DegenerateEpsilon: return "DegenerateEpsilon";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InfeasibleTraffic: return "InfeasibleTraffic";
    case ErrorKind::Overload: return "Overload";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ZeroActual: return "ZeroActual";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::ConfigMismatch: return "ConfigMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Tensor Tensor::full(int r, int c, double value) {
  Tensor t(r, c);
  for (double& v : t.data) v = value;
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t(1, 1);
  t.data[0] = value;
  return t;
}

Tensor Tensor::row(const std::vector<double>& values) {
  Tensor t(1, static_cast<int>(values.size()));
  t.data = values;
  return t;
}

Tensor Tensor::column(const std::vector<double>& values) {
  Tensor t(static_cast<int>(values.size()), 1);
  t.data = values;
  return t;
}

Tensor Tensor::uniform(int r, int c, double bound, Rng& rng) {
  Tensor t(r, c);
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data) m = std::max(m, std::fabs(v));
  return m;
}

std::string Tensor::shape_str() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "[%dx%d]", rows, cols);
  return buf;
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    raise(ErrorKind::ShapeMismatch, std::string(what) + ": " + a.shape_str() +
                                        " vs " + b.shape_str());
  }
}

}  // namespace dwnet
