#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace darkspin::opt {

using Objective = std::function<double(const std::vector<double>&)>;

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// GSL nmsimplex2. Stops when the simplex characteristic size drops below size_tol.
MinimizeResult nelder_mead(const Objective& f, const std::vector<double>& x0, const std::vector<double>& step,
                           double size_tol = 1e-8, int max_iter = 4000);

// r(p) -> residual vector of fixed length
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

struct LsqOptions {
  double xtol = 1e-12;
  double ftol = 1e-14;
  int max_fev = 20000;
};

struct LsqResult {
  Eigen::VectorXd p;
  double cost = 0.0;  // sum r^2
  int iterations = 0;
  int status = 0;
  bool converged = false;
};

// Levenberg-Marquardt with central-difference Jacobian.
LsqResult least_squares(const ResidualFn& f, int n_residuals, const Eigen::VectorXd& p0, const LsqOptions& opt = {});

// Central differences with step rel_step * |p_j|, or abs_floor when p_j is 0.
Eigen::MatrixXd jacobian(const ResidualFn& f, int n_residuals, const Eigen::VectorXd& p, double rel_step = 1e-6,
                         double abs_floor = 1e-8);

// Minimize a 1D function on [a, b]: log grid of n nodes then Brent refinement around the best node.
double grid_then_brent(const std::function<double(double)>& f, double a, double b, int n_grid, bool log_grid,
                       double* f_min = nullptr, int bits = 40);

}  // namespace darkspin::opt
