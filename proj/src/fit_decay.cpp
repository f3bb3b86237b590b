#include <algorithm>
#include <cmath>
#include <numeric>

#include "darkspin/core.hpp"
#include "darkspin/error.hpp"
#include "darkspin/fitting.hpp"
#include "lsq_model.hpp"

namespace darkspin {

using detail::ParamDef;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double stretched(double t, double T, double n) { return std::pow(t / T, n); }

// First time the normalized trace falls below 1/e, else the last time.
double e_fold_time(const std::vector<double>& t, const std::vector<double>& q) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (q[i] < std::exp(-1.0)) return std::max(t[i], 1e-12);
  }
  return t.back();
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

}  // namespace

double stretched_t1_model(double t, double A, double c, double t1_nv, double n_nv, double t1_e, double n_e) {
  double e = stretched(t, t1_nv, n_nv);
  if (t1_e > 0.0) e += stretched(t, t1_e, n_e);
  return A * std::exp(-e) + c;
}

FitResult fit_stretched_t1_nv(const DecayCurve& curve) {
  curve.validate();
  require(curve.size() >= 6, ErrorCode::InsufficientData, "stretched T1 fit needs at least 6 points");
  const auto& t = curve.t;
  const auto& y = curve.y;
  double c0 = y.back(), A0 = y.front() - c0;
  if (A0 == 0.0) A0 = 1.0;
  std::vector<double> q(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) q[i] = (y[i] - c0) / A0;
  double T0 = e_fold_time(t, q);
  std::vector<ParamDef> defs = {{"A", A0}, {"c", c0}, {"T1_nv", T0, 0.0, kInf}, {"n_nv", 1.0, 0.0, 4.0}};
  std::vector<std::vector<double>> starts;
  for (double ts : {0.5, 1.0, 2.0}) {
    for (double ns : {0.7, 1.0, 1.8}) starts.push_back({A0, c0, T0 * ts, ns});
  }
  auto f = [](double tt, const std::vector<double>& p) { return stretched_t1_model(tt, p[0], p[1], p[2], p[3], 0.0, 1.0); };
  auto r = detail::fit_model("stretched_t1_nv", curve, defs, starts, f);
  if (r.value("n_nv") >= 4.0 * (1.0 - 1e-6)) r.converged = false;
  return r;
}

FitResult fit_stretched_t1(const DecayCurve& curve, const StretchedT1Fixed& fixed) {
  if (!fixed.electron_term) return fit_stretched_t1_nv(curve);
  curve.validate();
  require(fixed.t1_nv > 0.0 && fixed.n_nv > 0.0 && fixed.n_nv <= 4.0, ErrorCode::InvalidArgument,
          "NV parameters must satisfy T1_nv > 0 and 0 < n_nv <= 4");
  require(curve.size() >= 6, ErrorCode::InsufficientData, "stretched T1 fit needs at least 6 points");
  const auto& t = curve.t;
  const auto& y = curve.y;
  double c0 = y.back(), A0 = y.front() - c0;
  if (A0 == 0.0) A0 = 1.0;
  std::vector<double> q(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    q[i] = (y[i] - c0) / (A0 * std::exp(-stretched(t[i], fixed.t1_nv, fixed.n_nv)));
  }
  double T0 = e_fold_time(t, q);
  std::vector<ParamDef> defs = {{"A", A0}, {"c", c0}, {"T1_e", T0, 0.0, kInf}, {"n_e", 1.0, 0.0, 4.0}};
  std::vector<std::vector<double>> starts;
  for (double ts : {0.3, 1.0, 3.0}) {
    for (double ns : {0.6, 1.0, 1.8}) starts.push_back({A0, c0, T0 * ts, ns});
  }
  auto f = [fixed](double tt, const std::vector<double>& p) {
    return stretched_t1_model(tt, p[0], p[1], fixed.t1_nv, fixed.n_nv, p[2], p[3]);
  };
  auto r = detail::fit_model("stretched_t1", curve, defs, starts, f);
  if (r.value("n_e") >= 4.0 * (1.0 - 1e-6)) {
    r.converged = false;
    r.warnings.push_back("n_e reached its bound 4");
  }
  return r;
}

double echo_modulation_model(double t, double A, double T2, double n, double alpha, double omega_n, double phi1) {
  double s = std::sin(kPi * omega_n * t / 2.0 + phi1);
  return A * std::exp(-stretched(t, T2, n)) * (1.0 + alpha * s * s);
}

std::optional<double> dominant_frequency(const DecayCurve& curve) {
  curve.validate();
  if (curve.size() < 8) return std::nullopt;
  auto [fr, pw] = detail::periodogram(curve.t, curve.y);
  if (fr.size() < 4) return std::nullopt;
  auto k = static_cast<std::size_t>(std::max_element(pw.begin(), pw.end()) - pw.begin());
  double floor = median(pw);
  // Lomb-Scargle powers of pure noise are ~exponential: a peak 20x the median is p ~ 1e-9 per bin.
  if (!(pw[k] > 20.0 * floor) || pw[k] <= 0.0) return std::nullopt;
  // parabolic refinement
  double f = fr[k];
  if (k > 0 && k + 1 < fr.size()) {
    double a = pw[k - 1], b = pw[k], c = pw[k + 1];
    double den = a - 2 * b + c;
    if (den < 0.0) f += 0.5 * (a - c) / den * (fr[1] - fr[0]);
  }
  return f;
}

FitResult fit_echo_modulation(const DecayCurve& curve, const EchoModulationOptions& opt) {
  curve.validate();
  require(curve.size() >= 10, ErrorCode::InsufficientData, "echo modulation fit needs at least 10 points");
  const auto& t = curve.t;
  // envelope first
  auto env = fit_stretched_t1_nv(curve);
  double A0 = env.value("A") + env.value("c"), T0 = env.value("T1_nv"), n0 = env.value("n_nv");
  DecayCurve ratio = curve;
  ratio.y_err.clear();
  for (std::size_t i = 0; i < t.size(); ++i) {
    double e = A0 * std::exp(-stretched(t[i], T0, n0));
    ratio.y[i] = e != 0.0 ? curve.y[i] / e - 1.0 : 0.0;
  }
  std::optional<double> om = opt.omega_n;
  std::vector<std::string> notes;
  double ratio_peak = 0.0;
  for (double v : ratio.y) ratio_peak = std::max(ratio_peak, std::abs(v));
  if (!om && ratio_peak > 1e-9) {
    auto fpk = dominant_frequency(ratio);
    if (fpk) om = 2.0 * *fpk;
  }
  if (!om) {
    // no modulation: stretched exponential with alpha = 0
    std::vector<ParamDef> defs = {{"A", A0}, {"T2", T0, 0.0, kInf}, {"n", n0, 0.0, 10.0}};
    auto f = [](double tt, const std::vector<double>& p) { return p[0] * std::exp(-stretched(tt, p[1], p[2])); };
    auto r = detail::fit_model("echo_modulation", curve, defs, {{A0, T0, n0}}, f);
    r.model = "echo_modulation";
    for (const char* nm : {"alpha", "omega_n", "phi1"}) {
      r.names.push_back(nm);
      r.values.push_back(0.0);
      r.errors.push_back(0.0);
      r.gn_errors.push_back(0.0);
    }
    r.warnings.push_back("omega_n unidentifiable: no spectral peak above the noise floor; supply omega_n");
    return r;
  }
  double span = t.back() - t.front();
  if (*om / 2.0 * span < 3.0) notes.push_back("fewer than 3 modulation periods in the window");
  // alpha and phase from a linear fit of the ratio on 1, cos, sin at the modulation frequency
  double w = kPi * *om;
  Eigen::MatrixXd X(t.size(), 3);
  Eigen::VectorXd yv(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::cos(w * t[i]);
    X(i, 2) = std::sin(w * t[i]);
    yv[i] = ratio.y[i];
  }
  Eigen::Vector3d b = X.colPivHouseholderQr().solve(yv);
  // alpha sin^2(x + phi) = alpha/2 - alpha/2 cos(2 phi) cos(wt) + alpha/2 sin(2 phi) sin(wt)
  double amp = std::hypot(b[1], b[2]);
  double alpha0 = std::max(2.0 * amp, 1e-3);
  double phi0 = 0.5 * std::atan2(b[2], -b[1]);
  std::vector<ParamDef> defs = {{"A", A0 / (1.0 + alpha0 / 2.0)},
                                {"T2", T0, 0.0, kInf},
                                {"n", n0, 0.0, 10.0},
                                {"alpha", alpha0, 0.0, kInf},
                                {"omega_n", *om, 0.0, kInf},
                                {"phi1", phi0}};
  std::vector<std::vector<double>> starts;
  for (double ns : {n0, 1.0, 2.0}) {
    starts.push_back({defs[0].init, T0, ns, alpha0, *om, phi0});
  }
  detail::ModelFn f;
  if (opt.fix_omega && opt.omega_n) {
    double fixed = *opt.omega_n;
    defs.erase(defs.begin() + 4);
    for (auto& s : starts) s.erase(s.begin() + 4);
    f = [fixed](double tt, const std::vector<double>& p) {
      return echo_modulation_model(tt, p[0], p[1], p[2], p[3], fixed, p[4]);
    };
  } else {
    f = [](double tt, const std::vector<double>& p) {
      return echo_modulation_model(tt, p[0], p[1], p[2], p[3], p[4], p[5]);
    };
  }
  auto r = detail::fit_model("echo_modulation", curve, defs, starts, f);
  if (opt.fix_omega && opt.omega_n) {
    r.names.insert(r.names.begin() + 4, "omega_n");
    r.values.insert(r.values.begin() + 4, *opt.omega_n);
    r.errors.insert(r.errors.begin() + 4, 0.0);
    r.gn_errors.insert(r.gn_errors.begin() + 4, 0.0);
  }
  // phase is defined modulo pi
  auto ip = r.index("phi1");
  r.values[ip] = std::remainder(r.values[ip], kPi);
  r.warnings.insert(r.warnings.end(), notes.begin(), notes.end());
  return r;
}

double rabi_model(double t, double A, double T, double n, double f, double phi, double C) {
  return A * std::exp(-stretched(t, T, n)) * std::cos(kTwoPi * f * t + phi) + C;
}

FitResult fit_rabi(const DecayCurve& curve, const RabiOptions& opt) {
  curve.validate();
  require(curve.size() >= 10, ErrorCode::InsufficientData, "Rabi fit needs at least 10 points");
  const auto& t = curve.t;
  const auto& y = curve.y;
  auto fpk = dominant_frequency(curve);
  require(fpk.has_value(), ErrorCode::Unidentifiable, "no oscillation above the noise floor");
  double f0 = *fpk;
  double span = t.back() - t.front();
  // amplitude, phase and offset from a linear fit at f0
  Eigen::MatrixXd X(t.size(), 3);
  Eigen::VectorXd yv(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = std::cos(kTwoPi * f0 * t[i]);
    X(i, 2) = std::sin(kTwoPi * f0 * t[i]);
    yv[i] = y[i];
  }
  Eigen::Vector3d b = X.colPivHouseholderQr().solve(yv);
  double A0 = std::max(std::hypot(b[1], b[2]), 1e-12), phi0 = std::atan2(-b[2], b[1]), C0 = b[0];
  double T0 = span;
  FitResult r;
  if (opt.pure) {
    std::vector<ParamDef> defs = {{"T_rabi", T0, 0.0, kInf}, {"n", 1.0, 0.0, 10.0}, {"f", f0, 0.0, kInf}};
    std::vector<std::vector<double>> starts;
    for (double ts : {0.2, 0.5, 1.0, 3.0}) {
      for (double ns : {1.0, 2.0}) starts.push_back({T0 * ts, ns, f0});
    }
    auto fm = [](double tt, const std::vector<double>& p) { return rabi_model(tt, 1.0, p[0], p[1], p[2], 0.0, 0.0); };
    r = detail::fit_model("rabi_pure", curve, defs, starts, fm);
  } else {
    std::vector<ParamDef> defs = {{"A", A0},  {"T_rabi", T0, 0.0, kInf}, {"n", 1.0, 0.0, 10.0},
                                  {"f", f0, 0.0, kInf}, {"phi", phi0}, {"C", C0}};
    std::vector<std::vector<double>> starts;
    for (double ts : {0.2, 0.5, 1.0, 3.0}) {
      for (double ns : {1.0, 2.0}) starts.push_back({A0 * 1.5, T0 * ts, ns, f0, phi0, C0});
    }
    auto fm = [](double tt, const std::vector<double>& p) { return rabi_model(tt, p[0], p[1], p[2], p[3], p[4], p[5]); };
    r = detail::fit_model("rabi", curve, defs, starts, fm);
    // canonical sign: A > 0, phi in (-pi, pi]
    auto ia = r.index("A"), ip = r.index("phi");
    if (r.values[ia] < 0.0) {
      r.values[ia] = -r.values[ia];
      r.values[ip] += kPi;
    }
    r.values[ip] = std::remainder(r.values[ip], kTwoPi);
  }
  if (r.value("f") * span < 3.0) r.warnings.push_back("fewer than 3 oscillation periods in the window");
  return r;
}

}  // namespace darkspin
