#include "darkspin/optimize.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "darkspin/error.hpp"

namespace darkspin::opt {

namespace {

struct NmCtx {
  const Objective* f;
  std::vector<double> buf;
  std::exception_ptr err;
};

double nm_trampoline(const gsl_vector* v, void* p) {
  auto* c = static_cast<NmCtx*>(p);
  if (c->err) return GSL_NAN;
  for (std::size_t i = 0; i < c->buf.size(); ++i) c->buf[i] = gsl_vector_get(v, i);
  try {
    double y = (*c->f)(c->buf);
    return std::isfinite(y) ? y : GSL_POSINF;
  } catch (...) {
    c->err = std::current_exception();
    return GSL_NAN;
  }
}

struct LmFunctor {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const ResidualFn* f;
  int n_in, n_out;

  int inputs() const { return n_in; }
  int values() const { return n_out; }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
    (*f)(x, r);
    if (!r.allFinite()) r.setConstant(1e150);
    return 0;
  }
};

}  // namespace

MinimizeResult nelder_mead(const Objective& f, const std::vector<double>& x0, const std::vector<double>& step,
                           double size_tol, int max_iter) {
  const std::size_t n = x0.size();
  require(n >= 1 && step.size() == n, ErrorCode::InvalidArgument, "nelder_mead: bad dimensions");
  gsl_set_error_handler_off();
  NmCtx ctx{&f, std::vector<double>(n), nullptr};
  gsl_multimin_function fn{&nm_trampoline, n, &ctx};
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    gsl_vector_set(ss, i, step[i]);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  MinimizeResult out;
  int status = GSL_CONTINUE;
  int it = 0;
  while (status == GSL_CONTINUE && it < max_iter) {
    ++it;
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (ctx.err) break;
    status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), size_tol);
  }
  out.x.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.x[i] = gsl_vector_get(s->x, i);
  out.f = s->fval;
  out.iterations = it;
  out.converged = status == GSL_SUCCESS;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  if (ctx.err) std::rethrow_exception(ctx.err);
  return out;
}

LsqResult least_squares(const ResidualFn& f, int n_residuals, const Eigen::VectorXd& p0, const LsqOptions& opt) {
  require(n_residuals >= p0.size(), ErrorCode::InsufficientData, "fewer residuals than parameters");
  LmFunctor fun{&f, static_cast<int>(p0.size()), n_residuals};
  Eigen::NumericalDiff<LmFunctor, Eigen::Central> nd(fun);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LmFunctor, Eigen::Central>> lm(nd);
  lm.parameters.xtol = opt.xtol;
  lm.parameters.ftol = opt.ftol;
  lm.parameters.maxfev = opt.max_fev;
  Eigen::VectorXd p = p0;
  auto st = lm.minimize(p);
  LsqResult out;
  out.p = p;
  Eigen::VectorXd r(n_residuals);
  f(p, r);
  out.cost = r.squaredNorm();
  out.iterations = static_cast<int>(lm.iter);
  out.status = static_cast<int>(st);
  using S = Eigen::LevenbergMarquardtSpace::Status;
  out.converged = st == S::RelativeReductionTooSmall || st == S::RelativeErrorTooSmall ||
                  st == S::RelativeErrorAndReductionTooSmall || st == S::CosinusTooSmall ||
                  st == S::FtolTooSmall || st == S::XtolTooSmall || st == S::GtolTooSmall;
  return out;
}

Eigen::MatrixXd jacobian(const ResidualFn& f, int n_residuals, const Eigen::VectorXd& p, double rel_step,
                         double abs_floor) {
  Eigen::MatrixXd J(n_residuals, p.size());
  Eigen::VectorXd rp(n_residuals), rm(n_residuals);
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    double h = p[j] != 0.0 ? rel_step * std::abs(p[j]) : abs_floor;
    Eigen::VectorXd q = p;
    q[j] = p[j] + h;
    f(q, rp);
    q[j] = p[j] - h;
    f(q, rm);
    J.col(j) = (rp - rm) / (2.0 * h);
  }
  return J;
}

double grid_then_brent(const std::function<double(double)>& f, double a, double b, int n_grid, bool log_grid,
                       double* f_min, int bits) {
  require(a > 0.0 || !log_grid, ErrorCode::InvalidArgument, "log grid needs positive bounds");
  require(b >= a, ErrorCode::InvalidArgument, "bounds reversed");
  if (b == a) {
    if (f_min) *f_min = f(a);
    return a;
  }
  n_grid = std::max(n_grid, 3);
  std::vector<double> xs(n_grid), fs(n_grid);
  for (int i = 0; i < n_grid; ++i) {
    double u = static_cast<double>(i) / (n_grid - 1);
    xs[i] = log_grid ? a * std::pow(b / a, u) : a + (b - a) * u;
    fs[i] = f(xs[i]);
  }
  int k = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  double lo = xs[std::max(0, k - 1)], hi = xs[std::min(n_grid - 1, k + 1)];
  auto g = [&](double u) { return f(log_grid ? std::exp(u) : u); };
  double ulo = log_grid ? std::log(lo) : lo, uhi = log_grid ? std::log(hi) : hi;
  boost::uintmax_t it = 200;
  auto r = boost::math::tools::brent_find_minima(g, ulo, uhi, bits, it);
  double x = log_grid ? std::exp(r.first) : r.first;
  double fx = r.second;
  if (fs[k] < fx) {
    x = xs[k];
    fx = fs[k];
  }
  if (f_min) *f_min = fx;
  return x;
}

}  // namespace darkspin::opt
