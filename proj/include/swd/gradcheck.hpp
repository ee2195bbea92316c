#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "swd/tensor.hpp"

namespace swd {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::string error;  // non-empty if the forward pass failed (offending node named)
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double max_rel_err() const {
    double m = 0.0;
    for (const auto& e : entries) {
      if (!e.error.empty()) return std::numeric_limits<double>::infinity();
      m = std::max(m, e.max_rel_err);
    }
    return m;
  }
  bool pass(double tol) const { return max_rel_err() <= tol; }
};

// Compares reverse-mode gradients against central finite differences for
// every element of every checked tensor. `build` must rebuild the loss graph
// from the current tensor values on each call. Runs in 64-bit only: the
// finite-difference quotient loses too many digits in float.
inline GradCheckReport gradcheck(std::vector<Tensor<double>> checked,
                                 const std::function<Tensor<double>()>& build,
                                 double eps = 1e-5) {
  GradCheckReport report;

  std::vector<std::vector<double>> analytic(checked.size());
  try {
    Tensor<double> loss = build();
    for (auto& t : checked) {
      auto& g = t.mutable_grad();
      std::fill(g.begin(), g.end(), 0.0);
    }
    backward(loss);
    for (size_t pi = 0; pi < checked.size(); ++pi) analytic[pi] = checked[pi].grad();
  } catch (const NumericError& e) {
    GradCheckEntry entry;
    entry.name = "(forward)";
    entry.error = e.what();
    report.entries.push_back(entry);
    return report;
  }

  for (size_t pi = 0; pi < checked.size(); ++pi) {
    GradCheckEntry entry;
    entry.name = checked[pi].name().empty() ? ("tensor#" + std::to_string(pi))
                                            : checked[pi].name();
    auto& vals = checked[pi].mutable_val();
    for (size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      double lp = 0.0, lm = 0.0;
      try {
        vals[i] = keep + eps;
        lp = build().item();
        vals[i] = keep - eps;
        lm = build().item();
      } catch (const NumericError& e) {
        vals[i] = keep;
        entry.error = e.what();
        break;
      }
      vals[i] = keep;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double rel =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace swd
