#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lgc/matrix.hpp"

namespace lgc::test {

// Central finite differences against an analytic gradient. `loss` must be a
// pure function of the entries it is probed on (reseed any rng inside).
struct GradCheck {
  double h = 1e-5;
  double max_rel_err = 0.0;
  std::string worst;

  // rel err with a floor so near-zero gradient pairs compare absolutely
  static double rel_err(double got, double want) {
    return std::fabs(got - want) / std::max({std::fabs(got), std::fabs(want), 1e-6});
  }

  void probe(diff::Matrix& param, const diff::Matrix& analytic, const std::string& name,
             const std::function<double()>& loss) {
    for (int i = 0; i < param.size(); ++i) {
      const double keep = param.data[i];
      param.data[i] = keep + h;
      const double up = loss();
      param.data[i] = keep - h;
      const double down = loss();
      param.data[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double err = rel_err(analytic.data[i], fd);
      if (err > max_rel_err) {
        max_rel_err = err;
        worst = name + "[" + std::to_string(i) + "] analytic=" +
                std::to_string(analytic.data[i]) + " fd=" + std::to_string(fd);
      }
    }
  }
};

}  // namespace lgc::test
