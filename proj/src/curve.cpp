#include "darkspin/curve.hpp"

#include <cmath>
#include <string>

#include "darkspin/error.hpp"

namespace darkspin {

void DecayCurve::validate() const {
  require(t.size() == y.size(), ErrorCode::InvalidArgument, "t and y lengths differ");
  require(y_err.empty() || y_err.size() == t.size(), ErrorCode::InvalidArgument, "y_err length differs");
  for (std::size_t i = 0; i < t.size(); ++i) {
    require(std::isfinite(t[i]) && std::isfinite(y[i]), ErrorCode::InvalidArgument,
            "non-finite value at index " + std::to_string(i));
    if (i > 0) {
      require(t[i] > t[i - 1], ErrorCode::InvalidArgument,
              "t must be strictly increasing at index " + std::to_string(i));
    }
    if (!y_err.empty()) {
      require(std::isfinite(y_err[i]) && y_err[i] > 0.0, ErrorCode::InvalidArgument,
              "y_err must be positive at index " + std::to_string(i));
    }
  }
}

DoubleLogResult double_log(const DecayCurve& c, double eps, std::size_t min_points) {
  c.validate();
  DoubleLogResult r;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double f = c.y[i];
    if (!(f < 1.0 - eps) || !(f > eps)) {
      ++r.dropped;
      continue;
    }
    double lf = std::log(f);
    r.curve.t.push_back(c.t[i]);
    r.curve.y.push_back(std::log(-lf));
    // dF_p/dF = 1/(F log F)
    if (c.has_errors()) r.curve.y_err.push_back(c.y_err[i] / std::abs(f * lf));
    r.kept.push_back(i);
  }
  if (r.curve.size() < min_points) {
    throw Error(ErrorCode::InsufficientData, "only " + std::to_string(r.curve.size()) +
                                                 " points survive the double-log transform");
  }
  return r;
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  v[n - 1] = b;
  return v;
}

std::vector<double> logspace(double a, double b, std::size_t n) {
  auto v = linspace(std::log(a), std::log(b), n);
  for (auto& x : v) x = std::exp(x);
  if (n > 0) {
    v.front() = a;
    v.back() = b;
  }
  return v;
}

}  // namespace darkspin
