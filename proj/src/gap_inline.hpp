#pragma once

#include <cmath>

namespace darkspin::detail {

// -(x^2/8) (e^{-G/4} sinc(a/2))^2 with x = V t, G = gamma t, (a/2)^2 = (x^2 - G^2)/16.
// e4 = exp(-G/4) is passed in so bath loops can hoist it.
inline double gap_scaled(double x, double G, double e4) {
  if (x == 0.0) return 0.0;
  double q2 = (x * x - G * G) / 16.0;
  double s;
  if (std::abs(q2) < 1e-3) {
    double y = -q2;
    s = e4 * (1.0 + y / 6.0 * (1.0 + y / 20.0 * (1.0 + y / 42.0 * (1.0 + y / 72.0))));
  } else if (q2 > 0.0) {
    double q = std::sqrt(q2);
    s = e4 * std::sin(q) / q;
  } else {
    double k = std::sqrt(-q2);
    s = std::exp(k - G / 4.0) * (-std::expm1(-2.0 * k)) / (2.0 * k);
  }
  return -x * x / 8.0 * s * s;
}

struct DeerEcho {
  double deer;
  double echo;
};

// Real-arithmetic f_deer and f_echo for x = V t, G = gamma t.
inline DeerEcho deer_echo_fast(double x, double G) {
  double e2 = std::exp(-G / 2.0);
  if (G == 0.0) return {std::cos(x / 2.0), 1.0};
  double a2 = (x * x - G * G) / 4.0;
  double c, sc;
  if (std::abs(a2) < 1e-3) {
    double y = -a2;
    c = e2 * (1.0 + y / 2.0 * (1.0 + y / 12.0 * (1.0 + y / 30.0 * (1.0 + y / 56.0))));
    sc = e2 * (1.0 + y / 6.0 * (1.0 + y / 20.0 * (1.0 + y / 42.0 * (1.0 + y / 72.0))));
  } else if (a2 > 0.0) {
    double a = std::sqrt(a2);
    c = e2 * std::cos(a);
    sc = e2 * std::sin(a) / a;
  } else {
    double k = std::sqrt(-a2);
    double ek = std::exp(k - G / 2.0);
    double m = std::exp(-2.0 * k);
    c = ek * (1.0 + m) / 2.0;
    sc = ek * (-std::expm1(-2.0 * k)) / (2.0 * k);
  }
  double deer = c + G / 2.0 * sc;
  return {deer, deer - gap_scaled(x, G, std::exp(-G / 4.0))};
}

}  // namespace darkspin::detail
