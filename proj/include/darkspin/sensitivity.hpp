#pragma once

#include <string>
#include <vector>

#include "darkspin/bathavg.hpp"

namespace darkspin::sens {

// Target and background baths seen by one NV. tau in us.
struct SensitivityScenario {
  BathParams target;
  BathParams background;
  double coating_nm = 0.0;
  double nv_depth_nm = 4.0;
  double total_time_s = 1.0;

  void validate() const;
  // Target on top of a coating of thickness h, background at the diamond surface.
  static SensitivityScenario coated(double nv_depth_nm, double h_nm, double sigma_t, double gamma_t, double sigma_b,
                                    double gamma_b);
};

// Values reported when <S_z> is 0 or 1 to working precision.
inline constexpr double kInsensitive = 1e300;

struct EtaResult {
  double eta = kInsensitive;  // um^-2 s^1/2
  double signal = 1.0;        // <S_z>
  double derivative = 0.0;    // d<S_z>/d sigma_T, per um^-2
  bool insensitive = false;
};

double expected_signal(const SensitivityScenario& s, double tau_us, const WOptions& w = {});
double signal_derivative(const SensitivityScenario& s, double tau_us, const WOptions& w = {});
// Central difference in sigma_T, for cross-checks.
double signal_derivative_fd(const SensitivityScenario& s, double tau_us, double rel_step = 1e-4, const WOptions& w = {});
EtaResult eta(const SensitivityScenario& s, double tau_us, const WOptions& w = {});

struct TauOptimum {
  double tau_us = 0.0;
  EtaResult eta;
  bool at_bound = false;
  std::vector<std::string> warnings;
};

// 64-node log grid, then bracketed refinement around the best node.
TauOptimum optimize_tau(const SensitivityScenario& s, double tau_lo_us, double tau_hi_us, const WOptions& w = {});

struct RatioMapOptions {
  double h_nm = 4.0;
  double sigma_bare = 1461.0;
  double gamma_bare = 0.0;
  double sigma_coated = 278.5;
  double gamma_coated = 0.097;
  double gamma_target = 0.0;
  double tau_lo_us = 0.01;
  double tau_hi_us = 100.0;
};

struct RatioCell {
  double nv_depth_nm = 0.0;
  double sigma_t = 0.0;
  double eta_coated = 0.0;
  double eta_bare = 0.0;
  double ratio = 0.0;  // eta_coated / eta_bare; < 1 favours the coating
  double tau_coated = 0.0;
  double tau_bare = 0.0;
};

std::vector<RatioCell> ratio_map(const std::vector<double>& nv_depths_nm, const std::vector<double>& sigma_t,
                                 const RatioMapOptions& opt = {}, const WOptions& w = {});
inline constexpr const char* kRatioOrientation = "eta_coated/eta_bare";

struct SnrModel {
  double a = 0.0093;
  double b = -0.3477;
  double t_ref_h = 5.0;
  double delta_sigma_b = 107.5;  // um^-2
  double h_nm = 4.0;
  double nv_depth_nm = 4.0;

  void validate() const;
};

double snr_line(const SnrModel& m, double sigma);
// Hours to SNR = 1.
double time_to_snr(const SnrModel& m, double sigma_t, double nv_density_factor = 1.0);
inline constexpr double kQuotedTimeSample1_h = 2.3;
inline constexpr double kQuotedTimeSample2_h = 0.25;

struct DipolarPerturbation {
  double ratio = 0.0;  // dV/V
  bool regime_ok = true;  // rho >= 10 h
};

DipolarPerturbation dipolar_perturbation_ratio(double h_nm, double rho_nm, double delta_h_nm);
// Mean spacing 1/sqrt(sigma), nm, sigma in um^-2.
double spacing_from_density(double sigma_um2);

}  // namespace darkspin::sens
