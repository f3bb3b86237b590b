#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "darkspin/curve.hpp"
#include "darkspin/fitting.hpp"

namespace darkspin::detail {

struct ParamDef {
  std::string name;
  double init = 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

using ModelFn = std::function<double(double t, const std::vector<double>& p)>;

// Bounded least squares via LM on transformed parameters. Tries each start and keeps the best.
// Errors are Gauss-Newton 1-sigma, absolute when the curve carries y_err.
FitResult fit_model(const std::string& model, const DecayCurve& curve, const std::vector<ParamDef>& defs,
                    const std::vector<std::vector<double>>& starts, const ModelFn& f);

// Lomb-Scargle power on a uniform frequency grid up to the mean Nyquist rate; returns (freq, power).
std::pair<std::vector<double>, std::vector<double>> periodogram(const std::vector<double>& t,
                                                                 const std::vector<double>& y);

}  // namespace darkspin::detail
