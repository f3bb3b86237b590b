#pragma once

#include <cstddef>
#include <vector>

namespace darkspin {

// Sampled trace. t in us (or MHz for spectra), y_err empty when absent.
struct DecayCurve {
  std::vector<double> t;
  std::vector<double> y;
  std::vector<double> y_err;

  std::size_t size() const { return t.size(); }
  bool has_errors() const { return !y_err.empty(); }

  // Strictly increasing t, equal lengths, finite values, y_err > 0.
  void validate() const;
};

struct DoubleLogResult {
  DecayCurve curve;             // t, F_p, propagated 1-sigma when errors were given
  std::vector<std::size_t> kept; // source indices of surviving points
  int dropped = 0;
};

inline constexpr double kDoubleLogEps = 1e-6;

// F_p = log(-log F). Points with F >= 1-eps or F <= eps are dropped.
DoubleLogResult double_log(const DecayCurve& curve, double eps = kDoubleLogEps, std::size_t min_points = 4);

std::vector<double> linspace(double a, double b, std::size_t n);
std::vector<double> logspace(double a, double b, std::size_t n);

}  // namespace darkspin
