#include "darkspin/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "darkspin/error.hpp"
#include "gap_inline.hpp"

namespace darkspin {

namespace {

using cd = std::complex<double>;

thread_local double g_imag_residue = 0.0;

constexpr double kImagTol = 1e-12;

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

// e^{-s} cos(a) and e^{-s} sin(a)/a for a = sqrt(a2), a2 real of either sign.
// The degenerate region uses the Taylor series in a2.
struct ScaledTrig {
  cd cos;
  cd sinc;
};

ScaledTrig scaled_trig(double a2, double s, bool near_degenerate) {
  double e = std::exp(-s);
  if (a2 == 0.0 || (near_degenerate && std::abs(a2) < 0.1)) {
    double x = -a2;
    double c = 1.0 + x / 2.0 * (1.0 + x / 12.0 * (1.0 + x / 30.0 * (1.0 + x / 56.0)));
    double sn = 1.0 + x / 6.0 * (1.0 + x / 20.0 * (1.0 + x / 42.0 * (1.0 + x / 72.0)));
    return {cd(e * c, 0.0), cd(e * sn, 0.0)};
  }
  cd a = std::sqrt(cd(a2, 0.0));
  if (std::abs(a.imag()) < 40.0) {
    return {std::cos(a) * e, std::sin(a) / a * e};
  }
  const cd i(0.0, 1.0);
  cd ep = std::exp(i * a - s);
  cd em = std::exp(-i * a - s);
  return {(ep + em) / 2.0, (ep - em) / (2.0 * i * a)};
}

double take_real(cd z, const char* what) {
  double im = std::abs(z.imag());
  g_imag_residue = std::max(g_imag_residue, im);
  if (!(im < kImagTol)) {
    throw Error(ErrorCode::Internal, std::string("complex kernel left imaginary residue in ") + what);
  }
  return z.real();
}

struct KernelPieces {
  cd c;       // e^{-gt/2} cos a
  cd sc;      // e^{-gt/2} sinc a
  cd sc_half; // e^{-gt/4} sinc(a/2)
};

KernelPieces pieces(double v, double g, double t) {
  double u = v * v - g * g;
  bool near = std::abs(u) < 1e-6 * v * v;
  double a2 = t * t * u / 4.0;
  auto full = scaled_trig(a2, g * t / 2.0, near);
  auto half = scaled_trig(a2 / 4.0, g * t / 4.0, near);
  return {full.cos, full.sinc, half.sinc};
}

}  // namespace

void KernelParams::validate() const {
  require(std::isfinite(v_dd), ErrorCode::InvalidArgument, "v_dd must be finite");
  require(finite_nonneg(gamma_e1) && finite_nonneg(gamma_e2), ErrorCode::InvalidArgument,
          "kernel rates must be finite and non-negative");
  require(finite_nonneg(t), ErrorCode::InvalidArgument, "t must be finite and non-negative");
}

void NvRelaxation::validate() const {
  require(finite_nonneg(gamma_v1) && finite_nonneg(gamma_v2), ErrorCode::InvalidArgument,
          "NV rates must be finite and non-negative");
}

double f_deer(const KernelParams& p) {
  p.validate();
  auto k = pieces(p.v_dd, p.gamma_e1, p.t);
  return take_real(k.c + p.gamma_e1 * p.t / 2.0 * k.sc, "f_deer");
}

double f_echo(const KernelParams& p) {
  p.validate();
  double g = p.gamma_e1, t = p.t;
  if (g == 0.0) return 1.0;
  auto k = pieces(p.v_dd, g, t);
  cd z = std::exp(-g * t / 2.0) + g * g * t * t / 8.0 * k.sc_half * k.sc_half + g * t / 2.0 * k.sc;
  return take_real(z, "f_echo");
}

double f_deer_minus_echo(const KernelParams& p) { return f_deer(p) - f_echo(p); }

double deer_echo_gap(double v, double g, double t) {
  return detail::gap_scaled(v * t, g * t, std::exp(-g * t / 4.0));
}

double t1_sequence_signal(const KernelParams& p, const NvRelaxation& nv, double tau, double t) {
  p.validate();
  nv.validate();
  require(finite_nonneg(tau) && finite_nonneg(t), ErrorCode::InvalidArgument, "tau and t must be non-negative");
  auto k = pieces(p.v_dd, p.gamma_e1, t);
  double sc = take_real(k.sc, "t1_sequence_signal");
  double probe = std::exp(-(nv.gamma_v1 / 2.0 + nv.gamma_v2) * t) * std::abs(p.v_dd) * t / 2.0 * sc;
  return std::exp(-(nv.gamma_v1 + p.gamma_e1) * tau) * probe * probe;
}

double composite_t1_signal(double f_y_pi, double f_y_0, double f_my_pi, double f_my_0) {
  return (f_y_pi - f_y_0) - (f_my_pi - f_my_0);
}

namespace detail {
double last_imag_residue() { return g_imag_residue; }
}  // namespace detail

}  // namespace darkspin
