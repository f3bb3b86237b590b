#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace darkspin {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Base constants. The derived dipolar prefactor is recomputed from these.
struct PhysicalConstants {
  double mu0_over_4pi = 1e-7;              // T m / A
  double hbar = 1.054571817e-34;           // J s
  double gamma_electron = kTwoPi * 28.0e9; // rad / s / T
  double gamma_electron_linear = 2.8024;   // MHz / G
  double mu_bohr = 9.2740100783e-24;       // J / T

  // mu0 gamma^2 hbar / 4pi in rad/us nm^3
  double dipolar_prefactor() const {
    return mu0_over_4pi * gamma_electron * gamma_electron * hbar * 1e21;
  }
  double planck() const { return kTwoPi * hbar; }
};

const PhysicalConstants& default_constants();

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

// Tilt of a <111> axis from the [100] surface normal.
inline const double kMagicTilt = std::acos(1.0 / std::sqrt(3.0));

// Axis in the x-z plane tilted by beta from the surface normal (+z).
Vec3 tilted_axis(double beta_rad);
Vec3 default_nv_axis();

// NV at the origin, surface normal +z, bath plane at z = nv_depth_nm.
struct Geometry {
  double nv_depth_nm = 5.0;
  Vec3 nv_axis = default_nv_axis();
  Vec3 spin_position{0.0, 0.0, 5.0};

  void validate() const;
};

void validate_axis(const Vec3& axis);

// Signed V_dd in rad/us.
double dipolar_coupling(const Geometry& geom, const PhysicalConstants& c = default_constants());
double dipolar_coupling(const Vec3& r_nm, const Vec3& axis, const PhysicalConstants& c = default_constants());

// Separation (nm) at which |V_dd|/2pi equals f_target_mhz.
double coupling_at_frequency(double f_target_mhz, double theta_rad,
                             const PhysicalConstants& c = default_constants());

namespace units {

inline double mhz_to_rad_per_us(double f) { return kTwoPi * f; }
inline double rad_per_us_to_mhz(double w) { return w / kTwoPi; }
// Relaxation rates are not angular: 1 MHz = 1e6 s^-1 = 1 us^-1.
inline double rate_mhz_to_per_us(double g) { return g; }
inline double per_um2_to_per_nm2(double s) { return s * 1e-6; }
inline double per_nm2_to_per_um2(double s) { return s * 1e6; }
inline double per_um3_to_per_nm3(double s) { return s * 1e-9; }
inline double per_nm3_to_per_um3(double s) { return s * 1e9; }
inline double per_cm2_to_per_um2(double s) { return s * 1e-8; }
inline double ns_to_us(double t) { return t * 1e-3; }

}  // namespace units

}  // namespace darkspin
