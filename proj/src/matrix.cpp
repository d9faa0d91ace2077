#include "lgc/matrix.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "lgc/errors.hpp"

namespace lgc::diff {

Matrix::Matrix(int r, int c, double fill) : rows(r), cols(c) {
  if (r < 0 || c < 0) throw ShapeError("matrix dimensions must be non-negative");
  data.assign(static_cast<size_t>(r) * c, fill);
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rws) {
  Matrix m;
  m.rows = static_cast<int>(rws.size());
  m.cols = m.rows > 0 ? static_cast<int>(rws.begin()->size()) : 0;
  m.data.reserve(static_cast<size_t>(m.rows) * m.cols);
  for (const auto& row : rws) {
    if (static_cast<int>(row.size()) != m.cols)
      throw ShapeError("ragged initializer for matrix");
    m.data.insert(m.data.end(), row.begin(), row.end());
  }
  return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
  Matrix m;
  m.rows = static_cast<int>(v.size());
  m.cols = 1;
  m.data = v;
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double x : data)
    if (!std::isfinite(x)) return false;
  return true;
}

double Matrix::max_abs() const {
  double mx = 0.0;
  for (double x : data) mx = std::max(mx, std::fabs(x));
  return mx;
}

void Matrix::fill(double x) {
  for (double& v : data) v = x;
}

void Matrix::resize(int r, int c) {
  rows = r;
  cols = c;
  data.assign(static_cast<size_t>(r) * c, 0.0);
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

std::string shape_str(const Matrix& m) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%dx%d", m.rows, m.cols);
  return buf;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Matrix transposed(const Matrix& m) {
  Matrix out(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;  // ln(1+e^x) -> x, avoids overflow
  const double v = std::log1p(std::exp(x));
  // exp underflows to 0 below ~-745; keep the output strictly positive
  return v > 0.0 ? v : std::numeric_limits<double>::denorm_min();
}

double relu(double x) { return x > 0.0 ? x : 0.0; }

Matrix activation(Act kind, const Matrix& m) {
  if (!m.all_finite()) throw NumericError("activation: non-finite input");
  Matrix out(m.rows, m.cols);
  for (int i = 0; i < m.size(); ++i) {
    const double x = m.data[i];
    switch (kind) {
      case Act::sigmoid: out.data[i] = sigmoid(x); break;
      case Act::tanh: out.data[i] = std::tanh(x); break;
      case Act::relu: out.data[i] = relu(x); break;
      case Act::softplus: out.data[i] = softplus(x); break;
    }
  }
  return out;
}

}  // namespace lgc::diff
