#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace darkspin::nn {

enum class ProfileKind { Gaussian, Uniform2D, Uniform3D };

// Gaussian depth profile with areal dose q (nm^-2), or a uniform plane (q nm^-2) / volume (q nm^-3).
struct ImplantProfile {
  ProfileKind kind = ProfileKind::Gaussian;
  double mean_depth = 0.0;   // nm
  double depth_sigma = 1.0;  // nm
  double q = 0.0;            // nm^-2, or nm^-3 for Uniform3D

  void validate() const;
  // mean_depth < 2 depth_sigma: the full-line depth approximation is poor
  bool half_space_warning() const;

  static ImplantProfile gaussian_um2(double mu_nm, double sigma_nm, double dose_um2);
  static ImplantProfile gaussian_cm2(double mu_nm, double sigma_nm, double dose_cm2);
  static ImplantProfile uniform_2d(double q_nm2);
  static ImplantProfile uniform_3d(double q_nm3);
};

// f(r | z'): expected spins per unit q on the sphere of radius r around an NV at depth z'.
double shell_density(double r, double z_nv, const ImplantProfile& p);
// Integral of f from 0 to r.
double cumulative_shell(double r, double z_nv, const ImplantProfile& p);
// n-th nearest neighbour density, evaluated in log space.
double nn_density(int n, double r, double z_nv, const ImplantProfile& p);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
  double std() const;
};

double nn_normalization(int n, double z_nv, const ImplantProfile& p);
Moments nn_mean_var(int n, double z_nv, const ImplantProfile& p);
// NV depth drawn from the same Gaussian; law of total variance over mu +/- 6 sigma.
Moments nn_mean_var_averaged(int n, const ImplantProfile& p);

// Uniform closed forms
double l_n_uniform_2d(int n, double q_nm2);
double l_n_uniform_3d(int n, double q_nm3);
// std of the n-th neighbour distance, 2D uniform
double std_n_uniform_2d(int n, double q_nm2);

struct McMoments {
  double mean = 0.0;
  double std = 0.0;
  double se_mean = 0.0;
  double se_std = 0.0;
  int trials = 0;
  double mean_spins_drawn = 0.0;
};

// z_nv unset: NV depth drawn from the profile each trial.
McMoments sample_nn_mc(int n, const ImplantProfile& p, std::optional<double> z_nv, int trials, std::uint64_t seed,
                       std::size_t max_spins = 50'000'000);

}  // namespace darkspin::nn
