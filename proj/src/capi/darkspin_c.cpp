#include "darkspin/darkspin.h"

#include <cmath>
#include <exception>
#include <map>
#include <new>
#include <string>

#include "darkspin/bathavg.hpp"
#include "darkspin/error.hpp"
#include "darkspin/fitting.hpp"
#include "darkspin/kernels.hpp"
#include "darkspin/lindblad.hpp"
#include "darkspin/nn.hpp"
#include "darkspin/nucleation.hpp"
#include "darkspin/sensitivity.hpp"
#include "darkspin/spectra.hpp"

struct ds_curve {
  darkspin::DecayCurve c;
};

struct ds_fit {
  darkspin::FitResult r;
  std::map<std::string, double> extra;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_warning;

ds_status to_status(darkspin::ErrorCode c) { return static_cast<ds_status>(static_cast<int>(c)); }

template <class F>
ds_status guard(F&& f) {
  g_error.clear();
  try {
    f();
    return DS_OK;
  } catch (const darkspin::Error& e) {
    g_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_error = "out of memory";
    return DS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return DS_ERR_INTERNAL;
  }
}

darkspin::Vec3 vec3(const double a[3]) { return {a[0], a[1], a[2]}; }

darkspin::BathParams bath_of(const ds_bath& b) {
  darkspin::BathParams p;
  p.density = b.density;
  p.gamma_e = b.gamma_e;
  p.depth = b.depth;
  p.dim = b.dim == DS_DIM_3D ? darkspin::Dimensionality::HalfSpace3D : darkspin::Dimensionality::Plane2D;
  p.flip_fraction = b.flip_fraction;
  p.axis = vec3(b.axis);
  return p;
}

darkspin::nn::ImplantProfile profile_of(const ds_profile& p) {
  darkspin::nn::ImplantProfile r;
  switch (p.kind) {
    case DS_PROFILE_GAUSSIAN: r.kind = darkspin::nn::ProfileKind::Gaussian; break;
    case DS_PROFILE_UNIFORM_2D: r.kind = darkspin::nn::ProfileKind::Uniform2D; break;
    case DS_PROFILE_UNIFORM_3D: r.kind = darkspin::nn::ProfileKind::Uniform3D; break;
    default: throw darkspin::Error(darkspin::ErrorCode::InvalidArgument, "unknown profile kind");
  }
  r.mean_depth = p.mean_depth;
  r.depth_sigma = p.depth_sigma;
  r.q = p.q;
  r.validate();
  return r;
}

darkspin::spectra::P1Params p1_of(const ds_p1_params& p) {
  darkspin::spectra::P1Params r;
  r.isotope = p.isotope == DS_N15 ? darkspin::spectra::Isotope::N15 : darkspin::spectra::Isotope::N14;
  r.a_par = p.a_par;
  r.a_perp = p.a_perp;
  r.q = p.q;
  r.omega_e = p.omega_e;
  if (!std::isnan(p.omega_n)) r.omega_n = p.omega_n;
  return r;
}

void fill_g(const darkspin::spectra::GFactorResult& r, ds_gfactor* out) {
  out->omega_e_on = r.omega_e_on;
  out->omega_e_off = r.omega_e_off;
  out->omega_e_avg = r.omega_e_avg;
  out->omega_e_avg_err = r.omega_e_avg_err;
  out->b_eff = r.b_eff;
  out->b_eff_err = r.b_eff_err;
  out->g = r.g;
  out->g_err = r.g_err;
  out->g_in_band = r.g_in_band;
  out->n_roots = static_cast<int>(r.roots.size());
  out->roots[0] = r.roots.size() > 0 ? r.roots[0] : NAN;
  out->roots[1] = r.roots.size() > 1 ? r.roots[1] : NAN;
  g_warning.clear();
  for (const auto& w : r.warnings) g_warning += (g_warning.empty() ? "" : "; ") + w;
}

darkspin::sens::SensitivityScenario scenario_of(const ds_scenario& s) {
  darkspin::sens::SensitivityScenario r;
  r.target = bath_of(s.target);
  r.background = bath_of(s.background);
  r.coating_nm = s.coating_nm;
  r.nv_depth_nm = s.nv_depth_nm;
  return r;
}

ds_status make_fit(darkspin::FitResult r, ds_fit** out) {
  *out = new ds_fit{std::move(r), {}};
  return DS_OK;
}

}  // namespace

extern "C" {

const char* ds_last_error(void) { return g_error.c_str(); }
const char* ds_last_warning(void) { return g_warning.c_str(); }

const char* ds_status_name(ds_status s) {
  switch (s) {
    case DS_OK: return "ok";
    case DS_ERR_NULL: return "null";
    case DS_ERR_BUFFER: return "buffer";
    default: return darkspin::error_code_name(static_cast<darkspin::ErrorCode>(s));
  }
}

const char* ds_version(void) { return "0.1.0"; }

void ds_get_constants(ds_constants* out) {
  if (!out) return;
  const auto& c = darkspin::default_constants();
  *out = {c.mu0_over_4pi, c.hbar, c.gamma_electron, c.gamma_electron_linear, c.mu_bohr, c.dipolar_prefactor(),
          darkspin::kMagicTilt};
}

ds_status ds_curve_create(const double* t, const double* y, const double* y_err, size_t n, ds_curve** out) {
  if (!out || (n > 0 && (!t || !y))) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    auto* c = new ds_curve;
    c->c.t.assign(t, t + n);
    c->c.y.assign(y, y + n);
    if (y_err) c->c.y_err.assign(y_err, y_err + n);
    try {
      c->c.validate();
    } catch (...) {
      delete c;
      throw;
    }
    *out = c;
  });
}

void ds_curve_free(ds_curve* c) { delete c; }
size_t ds_curve_size(const ds_curve* c) { return c ? c->c.size() : 0; }
int ds_curve_has_errors(const ds_curve* c) { return c && c->c.has_errors(); }

ds_status ds_curve_read(const ds_curve* c, double* t, double* y, double* y_err) {
  if (!c) return DS_ERR_NULL;
  for (std::size_t i = 0; i < c->c.size(); ++i) {
    if (t) t[i] = c->c.t[i];
    if (y) y[i] = c->c.y[i];
    if (y_err) y_err[i] = c->c.has_errors() ? c->c.y_err[i] : 0.0;
  }
  return DS_OK;
}

ds_status ds_kernels(double v, double g1, double g2, double t, double* deer, double* echo, double* diff) {
  return guard([&] {
    darkspin::KernelParams p{v, g1, g2, t};
    p.validate();
    if (deer) *deer = darkspin::f_deer(p);
    if (echo) *echo = darkspin::f_echo(p);
    if (diff) *diff = darkspin::f_deer_minus_echo(p);
  });
}

ds_status ds_oracle(double v, double g1, double g2, double t, double* deer, double* echo) {
  return guard([&] {
    darkspin::KernelParams p{v, g1, g2, t};
    p.validate();
    if (deer) *deer = darkspin::lindblad::run_deer(p);
    if (echo) *echo = darkspin::lindblad::run_echo(p);
  });
}

void ds_bath_default(ds_bath* b) {
  if (!b) return;
  darkspin::BathParams p;
  *b = {p.density, p.gamma_e, p.depth, DS_DIM_2D, p.flip_fraction, {p.axis[0], p.axis[1], p.axis[2]}};
}

ds_status ds_w_integral(double gamma, double depth, double t, int dim, const double axis[3], double rel_tol,
                        double* out) {
  if (!out) return DS_ERR_NULL;
  return guard([&] {
    darkspin::WOptions w;
    if (rel_tol > 0.0) w.rel_tol = rel_tol;
    auto ax = axis ? vec3(axis) : darkspin::default_nv_axis();
    *out = darkspin::w_integral(gamma, depth, t,
                                dim == DS_DIM_3D ? darkspin::Dimensionality::HalfSpace3D
                                                 : darkspin::Dimensionality::Plane2D,
                                ax, w);
  });
}

ds_status ds_fid_curve(const ds_bath* b, const double* t, size_t n, ds_curve** out) {
  if (!b || !t || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    auto c = darkspin::fid_curve(bath_of(*b), std::vector<double>(t, t + n));
    *out = new ds_curve{std::move(c)};
  });
}

ds_status ds_simulate_fid_mc(const ds_bath* b, const double* t, size_t n, int configs, uint64_t seed, ds_curve** out,
                             ds_mc_info* info) {
  if (!b || !t || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    auto r = darkspin::simulate_fid_mc(bath_of(*b), std::vector<double>(t, t + n), configs, seed);
    if (info) *info = {r.r_max_nm, r.mean_spins, r.max_bias_over_se, r.doublings};
    *out = new ds_curve{std::move(r.curve)};
  });
}

void ds_fid_options_default(ds_fid_options* o) {
  if (!o) return;
  darkspin::FidFitOptions d;
  *o = {d.gamma_min, d.gamma_max, d.depth_min, d.depth_max, DS_DIM_2D,
        {d.axis[0], d.axis[1], d.axis[2]}, d.flip_fraction, d.grid_gamma, d.grid_depth, d.weighted,
        d.simplex_tol, d.w.rel_tol};
}

ds_status ds_fit_fid(const ds_curve* c, const ds_fid_options* o, ds_fit** out) {
  if (!c || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    darkspin::FidFitOptions opt;
    if (o) {
      opt.gamma_min = o->gamma_min;
      opt.gamma_max = o->gamma_max;
      opt.depth_min = o->depth_min;
      opt.depth_max = o->depth_max;
      opt.dim = o->dim == DS_DIM_3D ? darkspin::Dimensionality::HalfSpace3D : darkspin::Dimensionality::Plane2D;
      opt.axis = vec3(o->axis);
      opt.flip_fraction = o->flip_fraction;
      opt.grid_gamma = o->grid_gamma;
      opt.grid_depth = o->grid_depth;
      opt.weighted = o->weighted != 0;
      opt.simplex_tol = o->simplex_tol;
      if (o->w_rel_tol > 0.0) opt.w.rel_tol = o->w_rel_tol;
    }
    make_fit(darkspin::fit_fid(c->c, opt), out);
  });
}

ds_status ds_fit_t1_nv(const ds_curve* c, ds_fit** out) {
  if (!c || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] { make_fit(darkspin::fit_stretched_t1_nv(c->c), out); });
}

ds_status ds_fit_stretched_t1(const ds_curve* c, double t1_nv, double n_nv, ds_fit** out) {
  if (!c || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] { make_fit(darkspin::fit_stretched_t1(c->c, {t1_nv, n_nv, true}), out); });
}

ds_status ds_fit_echo_modulation(const ds_curve* c, double omega_n, ds_fit** out) {
  if (!c || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    darkspin::EchoModulationOptions o;
    if (omega_n > 0.0) {
      o.omega_n = omega_n;
      o.fix_omega = true;
    }
    make_fit(darkspin::fit_echo_modulation(c->c, o), out);
  });
}

ds_status ds_fit_rabi(const ds_curve* c, int pure, ds_fit** out) {
  if (!c || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] { make_fit(darkspin::fit_rabi(c->c, {pure != 0}), out); });
}

ds_status ds_fit_lorentzians(const ds_curve* c, int n_peaks, const double* centers, const int* groups,
                             size_t n_groups, int shared_width, ds_fit** out) {
  if (!c || !out || (n_groups > 0 && !groups)) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    darkspin::LorentzianOptions o;
    o.n_peaks = n_peaks;
    if (centers) o.initial_centers.assign(centers, centers + n_peaks);
    for (size_t g = 0; g < n_groups; ++g) o.symmetric_groups.push_back({groups[3 * g], groups[3 * g + 1], groups[3 * g + 2]});
    o.shared_width = shared_width != 0;
    make_fit(darkspin::fit_lorentzians(c->c, o), out);
  });
}

void ds_fit_free(ds_fit* f) { delete f; }
const char* ds_fit_model(const ds_fit* f) { return f ? f->r.model.c_str() : ""; }
size_t ds_fit_param_count(const ds_fit* f) { return f ? f->r.values.size() : 0; }

const char* ds_fit_param_name(const ds_fit* f, size_t i) {
  return f && i < f->r.names.size() ? f->r.names[i].c_str() : nullptr;
}

ds_status ds_fit_param(const ds_fit* f, size_t i, double* value, double* error, double* gn_error) {
  if (!f) return DS_ERR_NULL;
  if (i >= f->r.values.size()) return DS_ERR_BUFFER;
  if (value) *value = f->r.values[i];
  if (error) *error = f->r.errors[i];
  if (gn_error) *gn_error = i < f->r.gn_errors.size() ? f->r.gn_errors[i] : NAN;
  return DS_OK;
}

ds_status ds_fit_summary(const ds_fit* f, double* residual, int* n_points, int* dropped, int* converged,
                         int* iterations) {
  if (!f) return DS_ERR_NULL;
  if (residual) *residual = f->r.residual;
  if (n_points) *n_points = f->r.n_points;
  if (dropped) *dropped = f->r.dropped;
  if (converged) *converged = f->r.converged;
  if (iterations) *iterations = f->r.iterations;
  return DS_OK;
}

size_t ds_fit_warning_count(const ds_fit* f) { return f ? f->r.warnings.size() : 0; }

const char* ds_fit_warning(const ds_fit* f, size_t i) {
  return f && i < f->r.warnings.size() ? f->r.warnings[i].c_str() : nullptr;
}

double ds_fit_extra(const ds_fit* f, const char* key) {
  if (!f || !key) return NAN;
  auto it = f->extra.find(key);
  return it == f->extra.end() ? NAN : it->second;
}

ds_status ds_nn_moments(const ds_profile* p, int n, double z_nv, double* mean, double* sd) {
  if (!p) return DS_ERR_NULL;
  return guard([&] {
    auto prof = profile_of(*p);
    auto m = std::isnan(z_nv) ? darkspin::nn::nn_mean_var_averaged(n, prof) : darkspin::nn::nn_mean_var(n, z_nv, prof);
    if (mean) *mean = m.mean;
    if (sd) *sd = m.std();
  });
}

ds_status ds_nn_normalization(const ds_profile* p, int n, double z_nv, double* out) {
  if (!p || !out) return DS_ERR_NULL;
  return guard([&] { *out = darkspin::nn::nn_normalization(n, z_nv, profile_of(*p)); });
}

ds_status ds_nn_mc(const ds_profile* p, int n, double z_nv, int trials, uint64_t seed, ds_nn_mc_result* out) {
  if (!p || !out) return DS_ERR_NULL;
  return guard([&] {
    std::optional<double> z;
    if (!std::isnan(z_nv)) z = z_nv;
    auto r = darkspin::nn::sample_nn_mc(n, profile_of(*p), z, trials, seed);
    *out = {r.mean, r.std, r.se_mean, r.se_std, r.trials, r.mean_spins_drawn};
  });
}

ds_status ds_nn_uniform(int dim, int n, double q, double* mean) {
  if (!mean) return DS_ERR_NULL;
  return guard([&] {
    *mean = dim == DS_DIM_3D ? darkspin::nn::l_n_uniform_3d(n, q) : darkspin::nn::l_n_uniform_2d(n, q);
  });
}

void ds_p1_default(ds_p1_params* p) {
  if (!p) return;
  darkspin::spectra::P1Params d;
  *p = {DS_N14, d.a_par, d.a_perp, d.q, d.omega_e, NAN};
}

ds_status ds_p1_from_splittings(double on, double off, double* a_par, double* a_perp) {
  if (!a_par || !a_perp) return DS_ERR_NULL;
  auto p = darkspin::spectra::P1Params::from_splittings(on, off);
  *a_par = p.a_par;
  *a_perp = p.a_perp;
  return DS_OK;
}

ds_status ds_off_axis_constants(double a_par, double a_perp, double* a_par_off, double* a_perp_off) {
  if (!a_par_off || !a_perp_off) return DS_ERR_NULL;
  auto r = darkspin::spectra::off_axis_constants(a_par, a_perp);
  *a_par_off = r.first;
  *a_perp_off = r.second;
  return DS_OK;
}

ds_status ds_p1_resonances(const ds_p1_params* p, int off_axis, int exact, double* freq, double* m_i, size_t cap,
                           size_t* n) {
  if (!p || !n) return DS_ERR_NULL;
  g_warning.clear();
  ds_status st = guard([&] {
    auto axis = off_axis ? darkspin::spectra::Axis::Off : darkspin::spectra::Axis::On;
    auto r = exact ? darkspin::spectra::p1_exact(p1_of(*p), axis) : darkspin::spectra::p1_resonances(p1_of(*p), axis);
    *n = r.frequency.size();
    for (const auto& w : r.warnings) g_warning += (g_warning.empty() ? "" : "; ") + w;
    if (cap < r.frequency.size()) throw darkspin::Error(darkspin::ErrorCode::InvalidArgument, "buffer too small");
    for (std::size_t k = 0; k < r.frequency.size(); ++k) {
      if (freq) freq[k] = r.frequency[k];
      if (m_i) m_i[k] = r.m_i[k];
    }
  });
  return st == DS_ERR_INVALID_ARGUMENT && cap < *n ? DS_ERR_BUFFER : st;
}

ds_status ds_gfactor_14n(const double on[3], const double on_err[3], const double off[3], const double off_err[3],
                         double dark, double dark_err, double gamma_e, ds_gfactor* out) {
  if (!on || !off || !on_err || !off_err || !out) return DS_ERR_NULL;
  return guard([&] {
    darkspin::spectra::GFactor14nInput in;
    for (int k = 0; k < 3; ++k) {
      in.on_axis.push_back({on[k], on_err[k]});
      in.off_axis.push_back({off[k], off_err[k]});
    }
    in.dark = {dark, dark_err};
    in.gamma_e = gamma_e;
    fill_g(darkspin::spectra::g_factor_14n(in), out);
  });
}

ds_status ds_gfactor_15n(double t1, double t1_err, double t2, double t2_err, double a_perp, double a_perp_err,
                         double dark, double dark_err, double lo, double hi, double gamma_e, int neglect_omega_n,
                         ds_gfactor* out) {
  if (!out) return DS_ERR_NULL;
  return guard([&] {
    darkspin::spectra::GFactor15nInput in;
    in.t1 = {t1, t1_err};
    in.t2 = {t2, t2_err};
    in.a_perp = a_perp;
    in.a_perp_err = a_perp_err;
    in.dark = {dark, dark_err};
    in.window_lo = lo;
    in.window_hi = hi;
    in.gamma_e = gamma_e;
    in.neglect_omega_n = neglect_omega_n != 0;
    fill_g(darkspin::spectra::g_factor_15n(in), out);
  });
}

void ds_scenario_coated(double d, double h, double st, double gt, double sb, double gb, ds_scenario* out) {
  if (!out) return;
  auto s = darkspin::sens::SensitivityScenario::coated(d, h, st, gt, sb, gb);
  ds_bath_default(&out->target);
  ds_bath_default(&out->background);
  out->target.density = st;
  out->target.gamma_e = gt;
  out->target.depth = s.target.depth;
  out->background.density = sb;
  out->background.gamma_e = gb;
  out->background.depth = s.background.depth;
  out->coating_nm = h;
  out->nv_depth_nm = d;
}

ds_status ds_sens_eta(const ds_scenario* s, double tau, ds_eta* out) {
  if (!s || !out) return DS_ERR_NULL;
  return guard([&] {
    auto r = darkspin::sens::eta(scenario_of(*s), tau);
    *out = {r.eta, r.signal, r.derivative, r.insensitive, tau, 0};
  });
}

ds_status ds_sens_derivative_fd(const ds_scenario* s, double tau, double rel_step, double* out) {
  if (!s || !out) return DS_ERR_NULL;
  return guard([&] { *out = darkspin::sens::signal_derivative_fd(scenario_of(*s), tau, rel_step); });
}

ds_status ds_sens_optimize(const ds_scenario* s, double lo, double hi, ds_eta* out) {
  if (!s || !out) return DS_ERR_NULL;
  return guard([&] {
    auto r = darkspin::sens::optimize_tau(scenario_of(*s), lo, hi);
    *out = {r.eta.eta, r.eta.signal, r.eta.derivative, r.eta.insensitive, r.tau_us, r.at_bound};
  });
}

void ds_ratio_options_default(ds_ratio_options* o) {
  if (!o) return;
  darkspin::sens::RatioMapOptions d;
  *o = {d.h_nm, d.sigma_bare, d.gamma_bare, d.sigma_coated, d.gamma_coated, d.gamma_target, d.tau_lo_us, d.tau_hi_us};
}

ds_status ds_ratio_map(const double* depths, size_t nd, const double* sigmas, size_t ns, const ds_ratio_options* o,
                       double* out) {
  if (!depths || !sigmas || !out) return DS_ERR_NULL;
  return guard([&] {
    darkspin::sens::RatioMapOptions opt;
    if (o) opt = {o->h_nm, o->sigma_bare, o->gamma_bare, o->sigma_coated, o->gamma_coated, o->gamma_target,
                  o->tau_lo_us, o->tau_hi_us};
    auto cells = darkspin::sens::ratio_map(std::vector<double>(depths, depths + nd),
                                           std::vector<double>(sigmas, sigmas + ns), opt);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      double row[7] = {c.nv_depth_nm, c.sigma_t, c.eta_coated, c.eta_bare, c.ratio, c.tau_coated, c.tau_bare};
      for (int k = 0; k < 7; ++k) out[7 * i + k] = row[k];
    }
  });
}

void ds_snr_default(ds_snr_model* m) {
  if (!m) return;
  darkspin::sens::SnrModel d;
  *m = {d.a, d.b, d.t_ref_h, d.delta_sigma_b, d.h_nm, d.nv_depth_nm};
}

namespace {
darkspin::sens::SnrModel snr_of(const ds_snr_model& m) {
  return {m.a, m.b, m.t_ref_h, m.delta_sigma_b, m.h_nm, m.nv_depth_nm};
}
}  // namespace

double ds_snr_line(const ds_snr_model* m, double sigma) { return m ? darkspin::sens::snr_line(snr_of(*m), sigma) : NAN; }

ds_status ds_time_to_snr(const ds_snr_model* m, double sigma_t, double factor, double* hours) {
  if (!m || !hours) return DS_ERR_NULL;
  return guard([&] { *hours = darkspin::sens::time_to_snr(snr_of(*m), sigma_t, factor); });
}

ds_status ds_dipolar_perturbation(double h, double rho, double dh, double* ratio, int* regime_ok) {
  if (!ratio) return DS_ERR_NULL;
  return guard([&] {
    auto r = darkspin::sens::dipolar_perturbation_ratio(h, rho, dh);
    *ratio = r.ratio;
    if (regime_ok) *regime_ok = r.regime_ok;
  });
}

ds_status ds_film_thickness(double n_d, double g, double x, double* mu, double* rate) {
  return guard([&] {
    darkspin::nucleation::NucleationModel m{n_d, g};
    if (mu) *mu = darkspin::nucleation::film_thickness(x, m);
    if (rate) *rate = darkspin::nucleation::film_growth_rate(x, m);
  });
}

ds_status ds_coalescence(double n_d, double g, double* r_cov, double* cycles) {
  return guard([&] {
    auto c = darkspin::nucleation::coalescence_radius({n_d, g});
    if (r_cov) *r_cov = c.r_cov;
    if (cycles) *cycles = c.cycles;
  });
}

ds_status ds_fit_nucleation(const double* x, const double* y, size_t n, ds_fit** out) {
  if (!x || !y || !out) return DS_ERR_NULL;
  *out = nullptr;
  return guard([&] {
    auto r = darkspin::nucleation::fit_nucleation(std::vector<double>(x, x + n), std::vector<double>(y, y + n));
    auto* f = new ds_fit{std::move(r.fit), {}};
    f->extra = {{"r_squared", r.r_squared}, {"r_cov", r.r_cov}, {"r_cov_err", r.r_cov_err}, {"n_d_per_um2", r.n_d_per_um2}};
    *out = f;
  });
}

}  // extern "C"
