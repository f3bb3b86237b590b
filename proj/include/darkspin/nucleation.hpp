#pragma once

#include <vector>

#include "darkspin/fitting.hpp"

namespace darkspin::nucleation {

// N_d in nm^-2, g in nm/cycle.
struct NucleationModel {
  double n_d = 0.047;
  double g = 0.04667;

  void validate() const;
  double r_cov() const;  // nm
};

// Mean film thickness (nm) after x cycles; island radius r = g x.
double film_thickness(double x_cycles, const NucleationModel& m);
// d mu / dx, nm/cycle
double film_growth_rate(double x_cycles, const NucleationModel& m);

struct Coalescence {
  double r_cov = 0.0;
  double cycles = 0.0;  // x at which r = R_cov
};

Coalescence coalescence_radius(const NucleationModel& m);

struct NucleationFit {
  FitResult fit;  // n_d, g
  NucleationModel model;
  double r_squared = 0.0;
  double r_cov = 0.0;
  double r_cov_err = 0.0;
  double n_d_per_um2 = 0.0;
};

NucleationFit fit_nucleation(const std::vector<double>& cycles, const std::vector<double>& thickness_nm);

}  // namespace darkspin::nucleation
