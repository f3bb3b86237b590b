#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "darkspin/core.hpp"

namespace darkspin::spectra {

enum class Isotope { N14, N15 };
enum class Axis { On, Off };

const char* isotope_name(Isotope i);

// Nuclear gyromagnetic ratios, MHz/G (signed).
inline constexpr double kGammaN14 = 3.0766e-4;
inline constexpr double kGammaN15 = -4.3156e-4;

// Frequencies in MHz.
struct P1Params {
  Isotope isotope = Isotope::N14;
  double a_par = 113.55;
  double a_perp = 81.4875;
  double q = 0.0;
  double omega_e = 550.0;
  // unset: gamma_n * omega_e / gamma_e
  std::optional<double> omega_n;

  void validate() const;
  double nuclear_larmor(const PhysicalConstants& c = default_constants()) const;
  // A_par, A_perp solved jointly from on/off-axis 14N splittings.
  static P1Params from_splittings(double on_axis_split, double off_axis_split);
};

std::pair<double, double> off_axis_constants(double a_par, double a_perp);

struct ResonanceList {
  std::vector<double> m_i;        // nuclear projection held during the flip
  std::vector<double> frequency;  // MHz, ordered by decreasing m_i
  std::vector<std::string> warnings;
};

ResonanceList p1_resonances(const P1Params& p, Axis axis);
// Numerical diagonalisation, electron flips with m_I conserved.
ResonanceList p1_exact(const P1Params& p, Axis axis);

struct Peak {
  double center = 0.0;
  double error = 0.0;
};

struct GFactorResult {
  double omega_e_on = 0.0;
  double omega_e_off = 0.0;
  double omega_e_avg = 0.0;
  double omega_e_avg_err = 0.0;
  double b_eff = 0.0;  // G
  double b_eff_err = 0.0;
  double g = 0.0;
  double g_err = 0.0;
  bool g_in_band = true;
  std::vector<double> roots;  // 15N quadratic roots, descending
  std::string a_perp_kind;    // 15N: which constant was supplied
  std::vector<std::string> warnings;
};

// g from the dark-spin line at B_eff.
double g_from_field(double omega_fit_mhz, double b_gauss, const PhysicalConstants& c = default_constants());

struct GFactor14nInput {
  std::vector<Peak> on_axis;   // t1, t2, t3
  std::vector<Peak> off_axis;  // t1, t2, t3
  Peak dark;
  double gamma_e = 2.8024;  // MHz/G
};

GFactorResult g_factor_14n(const GFactor14nInput& in, const PhysicalConstants& c = default_constants());

struct GFactor15nInput {
  Peak t1;
  Peak t2;
  double a_perp = 0.0;
  double a_perp_err = 0.0;
  std::string a_perp_kind = "A_perp";  // or "A'_perp"
  Peak dark;
  double window_lo = 100.0;  // MHz
  double window_hi = 5000.0;
  double gamma_e = 2.8024;
  // false keeps omega_n in the denominator, with omega_n tied to omega_e through the field
  bool neglect_omega_n = true;
};

GFactorResult g_factor_15n(const GFactor15nInput& in, const PhysicalConstants& c = default_constants());

}  // namespace darkspin::spectra
