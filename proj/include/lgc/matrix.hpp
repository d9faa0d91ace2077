#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace lgc::diff {

// Dense row-major real64 matrix. Column vectors are (n x 1).
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rws);
  static Matrix column(const std::vector<double>& v);
  static Matrix scalar(double x) { return Matrix(1, 1, x); }
  static Matrix identity(int n);

  double& operator()(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  int size() const { return rows * cols; }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;
  double max_abs() const;
  void fill(double x);

  // Resizes in place; reuses capacity when possible.
  void resize(int r, int c);
};

bool operator==(const Matrix& a, const Matrix& b);

std::string shape_str(const Matrix& m);

// Plain (untaped) helpers.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transposed(const Matrix& m);

enum class Act { sigmoid, tanh, relu, softplus };

// Overflow-safe scalar activations.
double sigmoid(double x);
double softplus(double x);
double relu(double x);

// Elementwise activation; throws NumericError on non-finite input.
Matrix activation(Act kind, const Matrix& m);

}  // namespace lgc::diff
