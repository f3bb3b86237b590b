#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "darkspin/error.hpp"
#include "darkspin/fitting.hpp"
#include "darkspin/optimize.hpp"

namespace darkspin {

std::size_t FitResult::index(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  require(it != names.end(), ErrorCode::InvalidArgument, "no parameter named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

FidProblem::FidProblem(const DecayCurve& curve, const FidFitOptions& opt) : opt_(opt) {
  curve.validate();
  require(std::isfinite(opt.gamma_min) && std::isfinite(opt.gamma_max) && opt.gamma_min >= 0.0 &&
              opt.gamma_max > opt.gamma_min,
          ErrorCode::InvalidArgument, "gamma bounds must be finite with 0 <= min < max");
  require(std::isfinite(opt.depth_min) && std::isfinite(opt.depth_max) && opt.depth_min > 0.0 &&
              opt.depth_max > opt.depth_min,
          ErrorCode::InvalidArgument, "depth bounds must be finite with 0 < min < max");
  require(opt.flip_fraction > 0.0 && opt.flip_fraction <= 1.0, ErrorCode::InvalidArgument,
          "flip fraction must lie in (0, 1]");
  require(opt.grid_gamma >= 2 && opt.grid_depth >= 2, ErrorCode::InvalidArgument, "grid needs >= 2 nodes per axis");
  require(!opt.weighted || curve.has_errors(), ErrorCode::InvalidArgument, "weighted fit needs y_err");
  dl_ = double_log(curve, opt.eps, 6);
  const std::size_t n = dl_.curve.size();
  wt_.assign(n, 1.0);
  if (opt.weighted) {
    for (std::size_t i = 0; i < n; ++i) wt_[i] = 1.0 / (dl_.curve.y_err[i] * dl_.curve.y_err[i]);
  }
  unit_ = opt.dim == Dimensionality::Plane2D ? units::per_um2_to_per_nm2(1.0) : units::per_um3_to_per_nm3(1.0);
}

std::vector<double> FidProblem::log_minus_w(double gamma, double depth) const {
  const auto& t = dl_.curve.t;
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    double w = w_integral(gamma, depth, t[i], opt_.dim, opt_.axis, opt_.w);
    out[i] = w < 0.0 ? std::log(-w * opt_.flip_fraction * unit_) : -std::numeric_limits<double>::infinity();
  }
  return out;
}

FidCost FidProblem::cost(double gamma, double depth) const {
  auto lw = log_minus_w(gamma, depth);
  const auto& y = dl_.curve.y;
  double sw = 0.0, s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(lw[i])) return {std::numeric_limits<double>::infinity(), 0.0};
    sw += wt_[i];
    s += wt_[i] * (y[i] - lw[i]);
  }
  double log_sigma = s / sw;
  double c = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double r = y[i] - log_sigma - lw[i];
    c += wt_[i] * r * r;
  }
  return {c, std::exp(log_sigma)};
}

double FidProblem::cost_at(double sigma, double gamma, double depth) const {
  auto m = model(sigma, gamma, depth);
  double c = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double r = dl_.curve.y[i] - m[i];
    c += wt_[i] * r * r;
  }
  return c;
}

std::vector<double> FidProblem::model(double sigma, double gamma, double depth) const {
  auto lw = log_minus_w(gamma, depth);
  for (double& v : lw) v += std::log(sigma);
  return lw;
}

PropagationResult error_propagation(const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& delta_f,
                                    const std::vector<std::string>& names) {
  const auto n = jacobian.rows(), p = jacobian.cols();
  require(n > p, ErrorCode::InsufficientData, "error propagation needs more points than parameters");
  require(delta_f.size() == n, ErrorCode::InvalidArgument, "delta_f length mismatch");
  Eigen::MatrixXd A = jacobian.array().square().matrix();
  Eigen::VectorXd b = delta_f.array().square().matrix();
  // column scaling so the rank test is unit-free
  Eigen::VectorXd scale(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double c = A.col(j).norm();
    scale[j] = c > 0.0 ? c : 1.0;
  }
  Eigen::MatrixXd As = A * scale.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(As, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double tol = std::max<double>(n, p) * std::numeric_limits<double>::epsilon() * 16.0 * sv[0];
  if (sv[0] == 0.0 || sv[p - 1] <= tol) {
    Eigen::VectorXd nd = svd.matrixV().col(p - 1);
    std::ostringstream os;
    os << "error propagation matrix is rank deficient; null direction";
    for (Eigen::Index j = 0; j < p; ++j) {
      os << (j ? ", " : " (") << (static_cast<std::size_t>(j) < names.size() ? names[j] : "p" + std::to_string(j))
         << ": " << nd[j];
    }
    os << ")";
    fail(ErrorCode::Unidentifiable, os.str());
  }
  Eigen::VectorXd xs = svd.solve(b);
  PropagationResult out;
  for (Eigen::Index j = 0; j < p; ++j) {
    double sq = xs[j] / scale[j];
    out.squares.push_back(sq);
    if (sq < 0.0) out.clamped = true;
    out.errors.push_back(std::sqrt(std::max(0.0, sq)));
  }
  return out;
}

namespace {

double clampd(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

}  // namespace

FitResult fit_fid(const DecayCurve& curve, const FidFitOptions& opt) {
  FidProblem prob(curve, opt);
  const auto& dl = prob.data();
  const std::size_t n = dl.curve.size();

  // coarse grid
  std::vector<double> gs, ds = logspace(opt.depth_min, opt.depth_max, opt.grid_depth);
  if (opt.gamma_min == 0.0) {
    gs.push_back(0.0);
    auto lg = logspace(opt.gamma_max * 1e-3, opt.gamma_max, opt.grid_gamma - 1);
    gs.insert(gs.end(), lg.begin(), lg.end());
  } else {
    gs = logspace(opt.gamma_min, opt.gamma_max, opt.grid_gamma);
  }
  double best = std::numeric_limits<double>::infinity(), cmin = best, cmax = -best;
  std::size_t bi = 0, bj = 0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (std::size_t j = 0; j < ds.size(); ++j) {
      double c = prob.cost(gs[i], ds[j]).cost;
      if (!std::isfinite(c)) continue;
      cmin = std::min(cmin, c);
      cmax = std::max(cmax, c);
      if (c < best) {
        best = c;
        bi = i;
        bj = j;
      }
    }
  }
  require(std::isfinite(best), ErrorCode::NonConvergence, "FID cost is not finite anywhere on the grid");
  double cmean = 0.5 * (cmin + cmax);
  if (cmax - cmin <= 1e-10 * std::max(std::abs(cmean), std::numeric_limits<double>::min())) {
    fail(ErrorCode::Unidentifiable, "FID cost is flat across the (gamma, d) grid");
  }

  // simplex in (gamma / gamma_max, log d)
  const double gmax = opt.gamma_max;
  const double lo_u = opt.gamma_min / gmax, hi_u = 1.0;
  const double lo_v = std::log(opt.depth_min), hi_v = std::log(opt.depth_max);
  auto objective = [&](const std::vector<double>& x) {
    double u = clampd(x[0], lo_u, hi_u), v = clampd(x[1], lo_v, hi_v);
    double pen = (x[0] - u) * (x[0] - u) + (x[1] - v) * (x[1] - v);
    double c = prob.cost(u * gmax, std::exp(v)).cost;
    return c + pen * (1e3 + 1e3 * c);
  };
  double du = std::max(0.05, (bi + 1 < gs.size() ? gs[bi + 1] : gs[bi]) / gmax - gs[bi] / gmax);
  double dv = std::log(ds[1] / ds[0]);
  auto nm = opt::nelder_mead(objective, {gs[bi] / gmax, std::log(ds[bj])}, {0.5 * du, 0.5 * dv}, opt.simplex_tol);
  double gh = clampd(nm.x[0], lo_u, hi_u) * gmax, dh = std::exp(clampd(nm.x[1], lo_v, hi_v));
  FidCost fc = prob.cost(gh, dh);
  if (fc.cost > best) {  // the simplex never lost to its own start, but guard against clamping
    gh = gs[bi];
    dh = ds[bj];
    fc = prob.cost(gh, dh);
  }

  FitResult out;
  out.model = opt.dim == Dimensionality::Plane2D ? "fid_2d" : "fid_3d";
  out.names = {"sigma", "gamma", "d"};
  out.values = {fc.sigma, gh, dh};
  out.residual = fc.cost;
  out.n_points = static_cast<int>(n);
  out.dropped = dl.dropped;
  out.iterations = nm.iterations;

  const double tol_b = 1e-6;
  bool g_lo = gh <= opt.gamma_min + tol_b * gmax, g_hi = gh >= opt.gamma_max * (1.0 - tol_b);
  bool d_lo = dh <= opt.depth_min * (1.0 + tol_b), d_hi = dh >= opt.depth_max * (1.0 - tol_b);
  if (g_lo) out.warnings.push_back(opt.gamma_min == 0.0 ? "gamma at lower bound 0" : "boundary solution: gamma at lower bound");
  if (g_hi) out.warnings.push_back("boundary solution: gamma at upper bound");
  if (d_lo) out.warnings.push_back("boundary solution: d at lower bound");
  if (d_hi) out.warnings.push_back("boundary solution: d at upper bound");

  // partials of F_p, central unless a bound forces one side
  const double sg = fc.sigma, hs = 1e-4 * sg;
  const double hg = 1e-4 * std::max(gh, 1e-2 * gmax);
  const double hd = 1e-4 * dh;
  Eigen::MatrixXd J(n, 3);
  auto put = [&](int col, const std::vector<double>& a, const std::vector<double>& b, double h) {
    for (std::size_t i = 0; i < n; ++i) J(static_cast<Eigen::Index>(i), col) = (a[i] - b[i]) / h;
  };
  put(0, prob.model(sg + hs, gh, dh), prob.model(sg - hs, gh, dh), 2.0 * hs);
  if (gh - hg < opt.gamma_min) {
    put(1, prob.model(sg, gh + hg, dh), prob.model(sg, gh, dh), hg);
  } else if (gh + hg > opt.gamma_max) {
    put(1, prob.model(sg, gh, dh), prob.model(sg, gh - hg, dh), hg);
  } else {
    put(1, prob.model(sg, gh + hg, dh), prob.model(sg, gh - hg, dh), 2.0 * hg);
  }
  put(2, prob.model(sg, gh, dh + hd), prob.model(sg, gh, dh - hd), 2.0 * hd);

  auto fit_fp = prob.model(sg, gh, dh);
  Eigen::VectorXd resid(n), dF(n);
  for (std::size_t i = 0; i < n; ++i) {
    resid[i] = dl.curve.y[i] - fit_fp[i];
    dF[i] = curve.has_errors() ? dl.curve.y_err[i] : std::abs(resid[i]);
  }
  const auto& w = prob.weights();
  Eigen::VectorXd wv = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd grad = 2.0 * J.transpose() * (wv.asDiagonal() * resid);
  Eigen::Matrix3d H = J.transpose() * wv.asDiagonal() * J;
  Eigen::Vector3d sc(sg, std::max(gh, 1e-2 * gmax), dh);
  std::vector<int> free_idx;
  for (int j = 0; j < 3; ++j) {
    bool pinned = (j == 1 && (g_lo || g_hi)) || (j == 2 && (d_lo || d_hi));
    if (!pinned) free_idx.push_back(j);
    if (!pinned) out.gradient_norm = std::max(out.gradient_norm, std::abs(grad[j]) * sc[j]);
  }
  // Newton decrement over the free parameters
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  Eigen::VectorXd gf(nf);
  Eigen::MatrixXd Hf(nf, nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    gf[a] = grad[free_idx[a]];
    for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = 2.0 * H(free_idx[a], free_idx[b]);
  }
  double dec = nf > 0 ? 0.5 * gf.dot(Hf.completeOrthogonalDecomposition().solve(gf)) : 0.0;
  // absolute floor so noise-free data, where the cost itself is ~0, can still pass
  const double floor = (opt.weighted ? 1e-2 : 1e-8) * static_cast<double>(n);
  out.converged = nm.converged && dec <= 1e-3 * fc.cost + floor;

  auto prop = error_propagation(J, dF, out.names);
  out.errors = prop.errors;
  if (prop.clamped) out.warnings.push_back("negative squared error clamped to 0");

  // Gauss-Newton covariance; absolute when weights are inverse variances
  double s2 = opt.weighted ? 1.0 : fc.cost / std::max<double>(1.0, static_cast<double>(n) - 3.0);
  Eigen::Matrix3d cov = H.completeOrthogonalDecomposition().pseudoInverse() * s2;
  for (int j = 0; j < 3; ++j) out.gn_errors.push_back(std::sqrt(std::max(0.0, cov(j, j))));
  return out;
}

}  // namespace darkspin
