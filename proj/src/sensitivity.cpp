#include "darkspin/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "darkspin/error.hpp"
#include "darkspin/optimize.hpp"

namespace darkspin::sens {

namespace {

// nm^-d per user density unit
double unit_of(const BathParams& b) { return b.dim == Dimensionality::Plane2D ? 1e-6 : 1e-9; }

double w_of(const BathParams& b, double tau, const WOptions& w) {
  return w_integral(b.gamma_e, b.depth, tau, b.dim, b.axis, w);
}

struct Parts {
  double log_s = 0.0;
  double w_target = 0.0;  // per user density unit, with flip fraction
};

Parts parts(const SensitivityScenario& s, double tau, const WOptions& w) {
  require(std::isfinite(tau) && tau > 0.0, ErrorCode::Domain, "tau must be positive");
  Parts p;
  p.w_target = s.target.flip_fraction * unit_of(s.target) * w_of(s.target, tau, w);
  p.log_s = s.target.density * p.w_target;
  if (s.background.density > 0.0) {
    p.log_s += s.background.flip_fraction * s.background.density * unit_of(s.background) * w_of(s.background, tau, w);
  }
  return p;
}

}  // namespace

void SensitivityScenario::validate() const {
  target.validate();
  background.validate();
  require(coating_nm >= 0.0 && nv_depth_nm > 0.0 && total_time_s > 0.0, ErrorCode::Domain,
          "coating >= 0, NV depth > 0 and total time > 0 required");
}

SensitivityScenario SensitivityScenario::coated(double nv_depth_nm, double h_nm, double sigma_t, double gamma_t,
                                                double sigma_b, double gamma_b) {
  SensitivityScenario s;
  s.nv_depth_nm = nv_depth_nm;
  s.coating_nm = h_nm;
  s.target.density = sigma_t;
  s.target.gamma_e = gamma_t;
  s.target.depth = nv_depth_nm + h_nm;
  s.background.density = sigma_b;
  s.background.gamma_e = gamma_b;
  s.background.depth = nv_depth_nm;
  return s;
}

double expected_signal(const SensitivityScenario& s, double tau_us, const WOptions& w) {
  s.validate();
  return std::exp(parts(s, tau_us, w).log_s);
}

double signal_derivative(const SensitivityScenario& s, double tau_us, const WOptions& w) {
  s.validate();
  auto p = parts(s, tau_us, w);
  return p.w_target * std::exp(p.log_s);
}

double signal_derivative_fd(const SensitivityScenario& s, double tau_us, double rel_step, const WOptions& w) {
  s.validate();
  double h = rel_step * std::max(s.target.density, 1.0);
  auto up = s, dn = s;
  up.target.density += h;
  dn.target.density -= h;
  return (expected_signal(up, tau_us, w) - expected_signal(dn, tau_us, w)) / (2 * h);
}

EtaResult eta(const SensitivityScenario& s, double tau_us, const WOptions& w) {
  s.validate();
  auto p = parts(s, tau_us, w);
  EtaResult r;
  r.signal = std::exp(p.log_s);
  r.derivative = p.w_target * r.signal;
  double var = -std::expm1(2.0 * p.log_s);  // 1 - S^2
  if (!(var > 0.0) || r.signal < 1e-300 || std::abs(r.derivative) < 1e-300) {
    r.insensitive = true;
    r.eta = kInsensitive;
    return r;
  }
  r.eta = std::sqrt(var) * std::sqrt(tau_us * 1e-6) / std::abs(r.derivative);
  if (!std::isfinite(r.eta)) {
    r.insensitive = true;
    r.eta = kInsensitive;
  }
  return r;
}

TauOptimum optimize_tau(const SensitivityScenario& s, double lo, double hi, const WOptions& w) {
  s.validate();
  require(lo > 0.0 && hi >= lo, ErrorCode::InvalidArgument, "tau bounds must be positive and ordered");
  auto f = [&](double tau) { return std::log(eta(s, tau, w).eta); };
  TauOptimum out;
  out.tau_us = opt::grid_then_brent(f, lo, hi, 64, true, nullptr, 24);
  out.eta = eta(s, out.tau_us, w);
  if (hi > lo && (out.tau_us <= lo * (1 + 1e-3) || out.tau_us >= hi * (1 - 1e-3))) {
    out.at_bound = true;
    out.warnings.push_back("optimal tau at the search bound");
  }
  if (out.eta.insensitive) out.warnings.push_back("no signal anywhere in the tau range");
  return out;
}

std::vector<RatioCell> ratio_map(const std::vector<double>& depths, const std::vector<double>& sigma_t,
                                 const RatioMapOptions& o, const WOptions& w) {
  std::vector<RatioCell> out;
  for (double d : depths) {
    for (double st : sigma_t) {
      auto coated = SensitivityScenario::coated(d, o.h_nm, st, o.gamma_target, o.sigma_coated, o.gamma_coated);
      auto bare = SensitivityScenario::coated(d, 0.0, st, o.gamma_target, o.sigma_bare, o.gamma_bare);
      auto oc = optimize_tau(coated, o.tau_lo_us, o.tau_hi_us, w);
      auto ob = optimize_tau(bare, o.tau_lo_us, o.tau_hi_us, w);
      RatioCell c;
      c.nv_depth_nm = d;
      c.sigma_t = st;
      c.eta_coated = oc.eta.eta;
      c.eta_bare = ob.eta.eta;
      c.ratio = oc.eta.eta / ob.eta.eta;
      c.tau_coated = oc.tau_us;
      c.tau_bare = ob.tau_us;
      out.push_back(c);
    }
  }
  return out;
}

void SnrModel::validate() const {
  require(a > 0.0, ErrorCode::Domain, "SNR slope must be positive");
  require(t_ref_h > 0.0 && delta_sigma_b >= 0.0 && h_nm >= 0.0 && nv_depth_nm > 0.0, ErrorCode::Domain,
          "SNR model parameters out of range");
}

double snr_line(const SnrModel& m, double sigma) { return m.a * sigma + m.b; }

double time_to_snr(const SnrModel& m, double sigma_t, double factor) {
  m.validate();
  require(sigma_t > 0.0 && factor > 0.0, ErrorCode::Domain, "sigma_T and density factor must be positive");
  double line = snr_line(m, sigma_t);
  require(line > 0.0, ErrorCode::NoSolution, "SNR line is not positive at this density: SNR = 1 is unattainable");
  double geo = std::pow((m.nv_depth_nm + m.h_nm) / m.nv_depth_nm, 4);
  double target = sigma_t / line;
  // SNR^2 = sigma_T^2 t / (t_I (dsB^2 + target^2 geo)) = 1
  double t = m.t_ref_h * (m.delta_sigma_b * m.delta_sigma_b + target * target * geo) / (sigma_t * sigma_t);
  return t / factor;
}

DipolarPerturbation dipolar_perturbation_ratio(double h, double rho, double dh) {
  require(h >= 0.0 && rho > 0.0, ErrorCode::Domain, "h >= 0 and rho > 0 required");
  return {-3.0 * h * dh / (rho * rho), rho >= 10.0 * h};
}

double spacing_from_density(double sigma_um2) {
  require(sigma_um2 > 0.0, ErrorCode::Domain, "density must be positive");
  return 1e3 / std::sqrt(sigma_um2);
}

}  // namespace darkspin::sens
