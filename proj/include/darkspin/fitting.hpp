#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "darkspin/bathavg.hpp"
#include "darkspin/curve.hpp"

namespace darkspin {

struct FitResult {
  std::string model;
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> errors;     // reported 1-sigma
  std::vector<double> gn_errors;  // Gauss-Newton covariance 1-sigma
  double residual = 0.0;
  int n_points = 0;
  int dropped = 0;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<std::string> warnings;

  std::size_t index(const std::string& name) const;
  double value(const std::string& name) const { return values[index(name)]; }
  double error(const std::string& name) const { return errors[index(name)]; }
};

// ---- FID ----

struct FidFitOptions {
  double gamma_min = 0.0;  // MHz
  double gamma_max = 2.0;
  double depth_min = 1.0;  // nm
  double depth_max = 30.0;
  Dimensionality dim = Dimensionality::Plane2D;
  Vec3 axis = default_nv_axis();
  double flip_fraction = 1.0;
  int grid_gamma = 24;
  int grid_depth = 24;
  bool weighted = false;  // inverse-variance weights in F_p space (needs y_err)
  double eps = kDoubleLogEps;
  double simplex_tol = 1e-7;
  WOptions w;
};

// Cost in F_p space at (gamma, d) with sigma solved in closed form. Used by the fit and exposed for tests.
struct FidCost {
  double cost = 0.0;
  double sigma = 0.0;  // um^-2 or um^-3
};

class FidProblem {
 public:
  FidProblem(const DecayCurve& curve, const FidFitOptions& opt);
  FidCost cost(double gamma, double depth) const;
  // Cost at explicit sigma.
  double cost_at(double sigma, double gamma, double depth) const;
  // Model F_p at the kept times.
  std::vector<double> model(double sigma, double gamma, double depth) const;
  const DoubleLogResult& data() const { return dl_; }
  const std::vector<double>& weights() const { return wt_; }

 private:
  std::vector<double> log_minus_w(double gamma, double depth) const;
  FidFitOptions opt_;
  DoubleLogResult dl_;
  std::vector<double> wt_;
  double unit_;  // density interface unit -> nm^-k
};

FitResult fit_fid(const DecayCurve& curve, const FidFitOptions& opt = {});

struct PropagationResult {
  std::vector<double> errors;   // sqrt of clamped squares
  std::vector<double> squares;  // raw least-squares solution
  bool clamped = false;
};

// Solves (ΔF)^2 = [dF/dx]^2 (Δx)^2 in the least-squares sense by pseudo-inverse.
// Throws Unidentifiable naming the null direction when the matrix is rank deficient.
PropagationResult error_propagation(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& delta_f,
                                    const std::vector<std::string>& names = {});

// ---- decay models ----

struct StretchedT1Fixed {
  double t1_nv = 0.0;
  double n_nv = 1.0;
  bool electron_term = true;
};

// A exp(-(t/T1nv)^nnv - (t/T1e)^ne) + c. With electron_term false fits A, c, T1_nv, n_nv.
double stretched_t1_model(double t, double A, double c, double t1_nv, double n_nv, double t1_e, double n_e);
FitResult fit_stretched_t1(const DecayCurve& curve, const StretchedT1Fixed& fixed);
// Stage one of the two-stage protocol: NV-only fit for A, c, T1_nv, n_nv.
FitResult fit_stretched_t1_nv(const DecayCurve& curve);

struct EchoModulationOptions {
  std::optional<double> omega_n;  // MHz; fixed when given
  bool fix_omega = false;
};

// A exp(-(t/T2)^n) [1 + alpha sin^2(pi omega_n t / 2 + phi1)]
double echo_modulation_model(double t, double A, double T2, double n, double alpha, double omega_n, double phi1);
FitResult fit_echo_modulation(const DecayCurve& curve, const EchoModulationOptions& opt = {});

// Dominant frequency (cycles per time unit) of the detrended curve; nullopt below the noise floor.
std::optional<double> dominant_frequency(const DecayCurve& curve);

struct RabiOptions {
  bool pure = false;  // exp(-(t/T)^n) cos(2 pi f t) with no amplitude, phase or offset
};

double rabi_model(double t, double A, double T, double n, double f, double phi, double C);
FitResult fit_rabi(const DecayCurve& curve, const RabiOptions& opt = {});

struct LorentzianOptions {
  int n_peaks = 1;
  std::vector<double> initial_centers;  // optional; otherwise found by peak scan
  // Index triples (lo, mid, hi) constrained to mid - lo = hi - mid.
  std::vector<std::array<int, 3>> symmetric_groups;
  bool shared_width = false;
};

// baseline + sum_k a_k (w_k/2)^2 / ((f - c_k)^2 + (w_k/2)^2), w = FWHM
double lorentzian_sum(double f, double baseline, const std::vector<double>& centers, const std::vector<double>& widths,
                      const std::vector<double>& amps);
FitResult fit_lorentzians(const DecayCurve& spectrum, const LorentzianOptions& opt);

}  // namespace darkspin
