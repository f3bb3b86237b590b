#include "darkspin/core.hpp"

#include <string>

#include "darkspin/error.hpp"

namespace darkspin {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::Domain: return "domain";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::InsufficientData: return "insufficient_data";
    case ErrorCode::NonConvergence: return "non_convergence";
    case ErrorCode::Unidentifiable: return "unidentifiable";
    case ErrorCode::Integration: return "integration";
    case ErrorCode::Truncation: return "truncation";
    case ErrorCode::Ambiguous: return "ambiguous";
    case ErrorCode::NoSolution: return "no_solution";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

const PhysicalConstants& default_constants() {
  static const PhysicalConstants c{};
  return c;
}

Vec3 tilted_axis(double beta) { return {std::sin(beta), 0.0, std::cos(beta)}; }

Vec3 default_nv_axis() { return tilted_axis(kMagicTilt); }

void validate_axis(const Vec3& axis) {
  double n = norm(axis);
  require(std::isfinite(n) && std::abs(n - 1.0) <= 1e-12, ErrorCode::InvalidArgument,
          "nv_axis must have unit norm");
}

void Geometry::validate() const {
  require(nv_depth_nm > 0.0 && std::isfinite(nv_depth_nm), ErrorCode::InvalidArgument,
          "nv_depth_nm must be positive");
  validate_axis(nv_axis);
}

double dipolar_coupling(const Vec3& r, const Vec3& axis, const PhysicalConstants& c) {
  double r2 = dot(r, r);
  require(r2 > 0.0 && std::isfinite(r2), ErrorCode::Domain, "zero-length separation vector");
  double rn = dot(r, axis);
  double cos2 = rn * rn / r2;
  double rlen = std::sqrt(r2);
  return c.dipolar_prefactor() * (1.0 - 3.0 * cos2) / (r2 * rlen);
}

double dipolar_coupling(const Geometry& geom, const PhysicalConstants& c) {
  validate_axis(geom.nv_axis);
  return dipolar_coupling(geom.spin_position, geom.nv_axis, c);
}

double coupling_at_frequency(double f_mhz, double theta, const PhysicalConstants& c) {
  require(f_mhz > 0.0 && std::isfinite(f_mhz), ErrorCode::Domain, "target frequency must be positive");
  double ct = std::cos(theta);
  double ang = std::abs(1.0 - 3.0 * ct * ct);
  require(ang > 1e-12, ErrorCode::Domain, "magic angle: no finite separation");
  return std::cbrt(c.dipolar_prefactor() * ang / (kTwoPi * f_mhz));
}

}  // namespace darkspin
