#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "darkspin/core.hpp"
#include "darkspin/curve.hpp"

namespace darkspin {

enum class Dimensionality { Plane2D, HalfSpace3D };

const char* dimensionality_name(Dimensionality d);

// density in um^-2 (2D) or um^-3 (3D); gamma_e in MHz; depth in nm.
struct BathParams {
  double density = 0.0;
  double gamma_e = 0.0;
  double depth = 5.0;
  Dimensionality dim = Dimensionality::Plane2D;
  double flip_fraction = 1.0;
  Vec3 axis = default_nv_axis();

  void validate() const;
  // nm^-2 or nm^-3
  double density_internal() const;
};

struct WOptions {
  double rel_tol = 1e-6;
  // Excluded lateral radius (2D) or NV distance (3D) around the foot point, nm.
  double inner_cutoff_nm = 0.0;
  // Outer lateral radius (2D) or NV distance (3D), nm.
  double outer_cutoff_nm = std::numeric_limits<double>::infinity();
  int min_azimuth = 64;
  int max_azimuth = 1 << 17;
  int max_subintervals = 4000;
  bool memoize = true;
};

// Integral of (f_deer - f_echo) over the bath, nm^2 (2D) or nm^3 (3D). Never positive.
double w_integral(double gamma_mhz, double d_nm, double t_us, Dimensionality dim,
                  const Vec3& axis = default_nv_axis(), const WOptions& opt = {});

std::vector<double> w_curve(double gamma_mhz, double d_nm, const std::vector<double>& t_us, Dimensionality dim,
                            const Vec3& axis = default_nv_axis(), const WOptions& opt = {});

void clear_w_memo();
std::size_t w_memo_size();

// exp(alpha sigma W)
double fid(const BathParams& bath, double t_us, const WOptions& opt = {});
DecayCurve fid_curve(const BathParams& bath, const std::vector<double>& t_us, const WOptions& opt = {});

struct McOptions {
  // 0 picks the radius from the tail bound.
  double r_max_nm = 0.0;
  int max_doublings = 3;
};

struct McResult {
  DecayCurve curve;  // y = ratio of configurational means, y_err = delta-method standard error
  double r_max_nm = 0.0;
  double mean_spins = 0.0;
  double max_bias_over_se = 0.0;
  int doublings = 0;
};

McResult simulate_fid_mc(const BathParams& bath, const std::vector<double>& t_us, int n_configs, std::uint64_t seed,
                         const McOptions& opt = {});

// Upper bound on |sigma * W| from spins beyond radius r (lateral in 2D, NV distance in 3D).
double tail_bound(const BathParams& bath, double t_us, double r_nm);

}  // namespace darkspin
