#include "lsq_model.hpp"

#include <algorithm>
#include <cmath>

#include "darkspin/core.hpp"
#include "darkspin/error.hpp"
#include "darkspin/optimize.hpp"

namespace darkspin::detail {

namespace {

double to_internal(const ParamDef& d, double x) {
  bool lo = std::isfinite(d.lo), hi = std::isfinite(d.hi);
  if (lo && hi) {
    double s = (x - d.lo) / (d.hi - d.lo);
    s = std::min(1.0 - 1e-12, std::max(1e-12, s));
    return std::log(s / (1.0 - s));
  }
  if (lo) return std::log(std::max(x - d.lo, 1e-300));
  if (hi) return -std::log(std::max(d.hi - x, 1e-300));
  return x;
}

double to_external(const ParamDef& d, double u) {
  bool lo = std::isfinite(d.lo), hi = std::isfinite(d.hi);
  if (lo && hi) return d.lo + (d.hi - d.lo) / (1.0 + std::exp(-u));
  if (lo) return d.lo + std::exp(u);
  if (hi) return d.hi - std::exp(-u);
  return u;
}

}  // namespace

FitResult fit_model(const std::string& model, const DecayCurve& curve, const std::vector<ParamDef>& defs,
                    const std::vector<std::vector<double>>& starts, const ModelFn& f) {
  curve.validate();
  const auto n = static_cast<int>(curve.size());
  const auto p = static_cast<int>(defs.size());
  require(n > p, ErrorCode::InsufficientData, model + ": need more points than parameters");
  std::vector<double> inv_sig(n, 1.0);
  if (curve.has_errors()) {
    for (int i = 0; i < n; ++i) inv_sig[i] = 1.0 / curve.y_err[i];
  }
  std::vector<double> ext(p);
  auto ext_of = [&](const Eigen::VectorXd& u) {
    for (int j = 0; j < p; ++j) ext[j] = to_external(defs[j], u[j]);
    return ext;
  };
  opt::ResidualFn rint = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r) {
    const auto& e = ext_of(u);
    for (int i = 0; i < n; ++i) r[i] = (curve.y[i] - f(curve.t[i], e)) * inv_sig[i];
  };

  std::vector<std::vector<double>> all = starts;
  if (all.empty()) {
    std::vector<double> s0;
    for (const auto& d : defs) s0.push_back(d.init);
    all.push_back(s0);
  }
  opt::LsqResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (const auto& s : all) {
    Eigen::VectorXd u0(p);
    for (int j = 0; j < p; ++j) u0[j] = to_internal(defs[j], s[j]);
    auto r = opt::least_squares(rint, n, u0);
    if (std::isfinite(r.cost) && r.cost < best.cost) best = r;
  }
  require(std::isfinite(best.cost), ErrorCode::NonConvergence, model + ": no start produced a finite cost");

  FitResult out;
  out.model = model;
  for (const auto& d : defs) out.names.push_back(d.name);
  Eigen::VectorXd pe(p);
  for (int j = 0; j < p; ++j) pe[j] = to_external(defs[j], best.p[j]);
  out.values.assign(pe.data(), pe.data() + p);
  out.residual = best.cost;
  out.n_points = n;
  out.iterations = best.iterations;

  // Jacobian in external parameters
  opt::ResidualFn rext = [&](const Eigen::VectorXd& e, Eigen::VectorXd& r) {
    std::vector<double> ev(e.data(), e.data() + p);
    for (int i = 0; i < n; ++i) r[i] = (curve.y[i] - f(curve.t[i], ev)) * inv_sig[i];
  };
  Eigen::MatrixXd J = -opt::jacobian(rext, n, pe, 1e-6, 1e-9);
  Eigen::VectorXd r(n);
  rext(pe, r);
  Eigen::MatrixXd H = J.transpose() * J;
  double s2 = curve.has_errors() ? 1.0 : best.cost / std::max(1, n - p);
  auto cod = H.completeOrthogonalDecomposition();
  Eigen::MatrixXd cov = cod.pseudoInverse() * s2;
  for (int j = 0; j < p; ++j) out.errors.push_back(std::sqrt(std::max(0.0, cov(j, j))));
  out.gn_errors = out.errors;
  if (cod.rank() < p) out.warnings.push_back("singular normal matrix: some parameters are unidentifiable");

  Eigen::VectorXd g = 2.0 * J.transpose() * r;
  for (int j = 0; j < p; ++j) out.gradient_norm = std::max(out.gradient_norm, std::abs(g[j]) * std::max(std::abs(pe[j]), 1e-12));
  double dec = 0.5 * g.dot(cod.solve(g)) / 2.0;
  out.converged = best.converged && dec <= 1e-6 * best.cost + 1e-20;

  for (int j = 0; j < p; ++j) {
    const auto& d = defs[j];
    double span = std::isfinite(d.lo) && std::isfinite(d.hi) ? d.hi - d.lo : std::max(std::abs(pe[j]), 1.0);
    if (std::isfinite(d.lo) && pe[j] - d.lo <= 1e-6 * span) out.warnings.push_back(d.name + " at lower bound");
    if (std::isfinite(d.hi) && d.hi - pe[j] <= 1e-6 * span) out.warnings.push_back(d.name + " at upper bound");
  }
  // correlated pairs
  for (int a = 0; a < p; ++a) {
    for (int b = a + 1; b < p; ++b) {
      double den = std::sqrt(cov(a, a) * cov(b, b));
      if (den > 0.0 && std::abs(cov(a, b)) / den > 0.99) {
        out.warnings.push_back("strong correlation between " + defs[a].name + " and " + defs[b].name);
      }
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> periodogram(const std::vector<double>& t,
                                                                 const std::vector<double>& y) {
  const std::size_t n = t.size();
  double span = t.back() - t.front();
  double nyq = 0.5 * (n - 1) / span;
  double df = 1.0 / (4.0 * span);
  std::size_t nf = static_cast<std::size_t>(nyq / df);
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  std::vector<double> fr, pw;
  for (std::size_t k = 1; k <= nf; ++k) {
    double f = k * df, w = kTwoPi * f;
    double s2 = 0, c2 = 0;
    for (double ti : t) {
      s2 += std::sin(2 * w * ti);
      c2 += std::cos(2 * w * ti);
    }
    double tau = std::atan2(s2, c2) / (2 * w);
    double yc = 0, ys = 0, cc = 0, ss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double c = std::cos(w * (t[i] - tau)), s = std::sin(w * (t[i] - tau));
      yc += (y[i] - mean) * c;
      ys += (y[i] - mean) * s;
      cc += c * c;
      ss += s * s;
    }
    fr.push_back(f);
    pw.push_back(0.5 * (yc * yc / std::max(cc, 1e-300) + ys * ys / std::max(ss, 1e-300)));
  }
  return {fr, pw};
}

}  // namespace darkspin::detail
