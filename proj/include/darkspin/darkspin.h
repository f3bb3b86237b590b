#ifndef DARKSPIN_H
#define DARKSPIN_H

#include <stddef.h>
#include <stdint.h>

#if defined(DARKSPIN_BUILDING)
#define DS_API __attribute__((visibility("default")))
#else
#define DS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ds_status {
  DS_OK = 0,
  DS_ERR_DOMAIN = 1,
  DS_ERR_INVALID_ARGUMENT = 2,
  DS_ERR_INSUFFICIENT_DATA = 3,
  DS_ERR_NON_CONVERGENCE = 4,
  DS_ERR_UNIDENTIFIABLE = 5,
  DS_ERR_INTEGRATION = 6,
  DS_ERR_TRUNCATION = 7,
  DS_ERR_AMBIGUOUS = 8,
  DS_ERR_NO_SOLUTION = 9,
  DS_ERR_INTERNAL = 10,
  DS_ERR_NULL = 20,
  DS_ERR_BUFFER = 21
} ds_status;

/* Message of the last failure on this thread. */
DS_API const char* ds_last_error(void);
DS_API const char* ds_status_name(ds_status s);
DS_API const char* ds_version(void);

typedef struct ds_constants {
  double mu0_over_4pi;
  double hbar;
  double gamma_electron;        /* rad/s/T */
  double gamma_electron_linear; /* MHz/G */
  double mu_bohr;
  double dipolar_prefactor;     /* rad/us nm^3 */
  double magic_tilt;            /* rad */
} ds_constants;

DS_API void ds_get_constants(ds_constants* out);

/* ---- curves ---- */

typedef struct ds_curve ds_curve;

/* y_err may be NULL. */
DS_API ds_status ds_curve_create(const double* t, const double* y, const double* y_err, size_t n, ds_curve** out);
DS_API void ds_curve_free(ds_curve* c);
DS_API size_t ds_curve_size(const ds_curve* c);
DS_API int ds_curve_has_errors(const ds_curve* c);
/* Buffers of ds_curve_size() doubles; y_err may be NULL. */
DS_API ds_status ds_curve_read(const ds_curve* c, double* t, double* y, double* y_err);

/* ---- kernels and oracle ---- */

/* v_dd, gammas in rad/us and us^-1, t in us. */
DS_API ds_status ds_kernels(double v_dd, double gamma_e1, double gamma_e2, double t, double* deer, double* echo,
                            double* diff);
DS_API ds_status ds_oracle(double v_dd, double gamma_e1, double gamma_e2, double t, double* deer, double* echo);

/* ---- bath averages ---- */

enum { DS_DIM_2D = 0, DS_DIM_3D = 1 };

typedef struct ds_bath {
  double density;  /* um^-2 (2D) or um^-3 (3D) */
  double gamma_e;  /* MHz */
  double depth;    /* nm */
  int dim;
  double flip_fraction;
  double axis[3];
} ds_bath;

DS_API void ds_bath_default(ds_bath* b);
DS_API ds_status ds_w_integral(double gamma_e, double depth, double t, int dim, const double axis[3], double rel_tol,
                               double* out);
DS_API ds_status ds_fid_curve(const ds_bath* b, const double* t, size_t n, ds_curve** out);

typedef struct ds_mc_info {
  double r_max_nm;
  double mean_spins;
  double max_bias_over_se;
  int doublings;
} ds_mc_info;

DS_API ds_status ds_simulate_fid_mc(const ds_bath* b, const double* t, size_t n, int n_configs, uint64_t seed,
                                    ds_curve** out, ds_mc_info* info);

/* ---- fits ---- */

typedef struct ds_fit ds_fit;

typedef struct ds_fid_options {
  double gamma_min, gamma_max; /* MHz */
  double depth_min, depth_max; /* nm */
  int dim;
  double axis[3];
  double flip_fraction;
  int grid_gamma, grid_depth;
  int weighted;
  double simplex_tol;
  double w_rel_tol;
} ds_fid_options;

DS_API void ds_fid_options_default(ds_fid_options* o);
DS_API ds_status ds_fit_fid(const ds_curve* c, const ds_fid_options* o, ds_fit** out);
DS_API ds_status ds_fit_t1_nv(const ds_curve* c, ds_fit** out);
DS_API ds_status ds_fit_stretched_t1(const ds_curve* c, double t1_nv, double n_nv, ds_fit** out);
/* omega_n <= 0 or NaN: free */
DS_API ds_status ds_fit_echo_modulation(const ds_curve* c, double omega_n, ds_fit** out);
DS_API ds_status ds_fit_rabi(const ds_curve* c, int pure, ds_fit** out);
/* centers may be NULL; groups holds 3*n_groups zero-based indices. */
DS_API ds_status ds_fit_lorentzians(const ds_curve* c, int n_peaks, const double* centers, const int* groups,
                                    size_t n_groups, int shared_width, ds_fit** out);

DS_API void ds_fit_free(ds_fit* f);
DS_API const char* ds_fit_model(const ds_fit* f);
DS_API size_t ds_fit_param_count(const ds_fit* f);
DS_API const char* ds_fit_param_name(const ds_fit* f, size_t i);
/* any out pointer may be NULL */
DS_API ds_status ds_fit_param(const ds_fit* f, size_t i, double* value, double* error, double* gn_error);
DS_API ds_status ds_fit_summary(const ds_fit* f, double* residual, int* n_points, int* dropped, int* converged,
                                int* iterations);
DS_API size_t ds_fit_warning_count(const ds_fit* f);
DS_API const char* ds_fit_warning(const ds_fit* f, size_t i);
/* nucleation fits only; NaN otherwise */
DS_API double ds_fit_extra(const ds_fit* f, const char* key);

/* ---- nearest neighbours ---- */

enum { DS_PROFILE_GAUSSIAN = 0, DS_PROFILE_UNIFORM_2D = 1, DS_PROFILE_UNIFORM_3D = 2 };

typedef struct ds_profile {
  int kind;
  double mean_depth;  /* nm */
  double depth_sigma; /* nm */
  double q;           /* nm^-2, nm^-3 for uniform 3D */
} ds_profile;

/* z_nv NaN: averaged over NV depths drawn from the profile */
DS_API ds_status ds_nn_moments(const ds_profile* p, int n, double z_nv, double* mean, double* std);
DS_API ds_status ds_nn_normalization(const ds_profile* p, int n, double z_nv, double* out);

typedef struct ds_nn_mc_result {
  double mean, std, se_mean, se_std;
  int trials;
  double mean_spins_drawn;
} ds_nn_mc_result;

DS_API ds_status ds_nn_mc(const ds_profile* p, int n, double z_nv, int trials, uint64_t seed, ds_nn_mc_result* out);
DS_API ds_status ds_nn_uniform(int dim, int n, double q, double* mean);

/* ---- P1 spectra ---- */

enum { DS_N14 = 0, DS_N15 = 1 };

typedef struct ds_p1_params {
  int isotope;
  double a_par, a_perp, q, omega_e; /* MHz */
  double omega_n;                   /* NaN: from the field */
} ds_p1_params;

DS_API void ds_p1_default(ds_p1_params* p);
DS_API ds_status ds_p1_from_splittings(double on_axis_split, double off_axis_split, double* a_par, double* a_perp);
DS_API ds_status ds_off_axis_constants(double a_par, double a_perp, double* a_par_off, double* a_perp_off);
/* freq and m_i hold up to cap entries; n receives the count. Warnings land in ds_last_warning. */
DS_API ds_status ds_p1_resonances(const ds_p1_params* p, int off_axis, int exact, double* freq, double* m_i,
                                  size_t cap, size_t* n);
DS_API const char* ds_last_warning(void);

typedef struct ds_gfactor {
  double omega_e_on, omega_e_off, omega_e_avg, omega_e_avg_err;
  double b_eff, b_eff_err, g, g_err;
  int g_in_band;
  double roots[2];
  int n_roots;
} ds_gfactor;

DS_API ds_status ds_gfactor_14n(const double on[3], const double on_err[3], const double off[3],
                                const double off_err[3], double dark, double dark_err, double gamma_e,
                                ds_gfactor* out);
DS_API ds_status ds_gfactor_15n(double t1, double t1_err, double t2, double t2_err, double a_perp, double a_perp_err,
                                double dark, double dark_err, double window_lo, double window_hi, double gamma_e,
                                int neglect_omega_n, ds_gfactor* out);

/* ---- sensitivity ---- */

typedef struct ds_scenario {
  ds_bath target;
  ds_bath background;
  double coating_nm;
  double nv_depth_nm;
} ds_scenario;

/* target at nv_depth + h, background at nv_depth, 2D */
DS_API void ds_scenario_coated(double nv_depth_nm, double h_nm, double sigma_t, double gamma_t, double sigma_b,
                               double gamma_b, ds_scenario* out);

typedef struct ds_eta {
  double eta, signal, derivative;
  int insensitive;
  double tau_us;
  int at_bound;
} ds_eta;

DS_API ds_status ds_sens_eta(const ds_scenario* s, double tau_us, ds_eta* out);
DS_API ds_status ds_sens_derivative_fd(const ds_scenario* s, double tau_us, double rel_step, double* out);
DS_API ds_status ds_sens_optimize(const ds_scenario* s, double tau_lo, double tau_hi, ds_eta* out);

typedef struct ds_ratio_options {
  double h_nm, sigma_bare, gamma_bare, sigma_coated, gamma_coated, gamma_target, tau_lo_us, tau_hi_us;
} ds_ratio_options;

DS_API void ds_ratio_options_default(ds_ratio_options* o);
/* out rows hold 7 doubles: depth, sigma_t, eta_coated, eta_bare, ratio, tau_coated, tau_bare */
DS_API ds_status ds_ratio_map(const double* depths, size_t n_depths, const double* sigmas, size_t n_sigmas,
                              const ds_ratio_options* o, double* out);

typedef struct ds_snr_model {
  double a, b, t_ref_h, delta_sigma_b, h_nm, nv_depth_nm;
} ds_snr_model;

DS_API void ds_snr_default(ds_snr_model* m);
DS_API double ds_snr_line(const ds_snr_model* m, double sigma);
DS_API ds_status ds_time_to_snr(const ds_snr_model* m, double sigma_t, double nv_density_factor, double* hours);
DS_API ds_status ds_dipolar_perturbation(double h_nm, double rho_nm, double delta_h_nm, double* ratio,
                                         int* regime_ok);

/* ---- nucleation ---- */

DS_API ds_status ds_film_thickness(double n_d, double g, double x_cycles, double* mu, double* rate);
DS_API ds_status ds_coalescence(double n_d, double g, double* r_cov, double* cycles);
/* extras: "r_squared", "r_cov", "r_cov_err", "n_d_per_um2" */
DS_API ds_status ds_fit_nucleation(const double* cycles, const double* thickness, size_t n, ds_fit** out);

#ifdef __cplusplus
}
#endif

#endif
