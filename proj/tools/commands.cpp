#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 6.283185307179586;

std::string out_path(const Context& ctx, const std::string& name) { return (fs::path(ctx.out_dir) / name).string(); }

// result.json carries no timestamps; those go to metadata.json.
void emit(const Context& ctx, const std::string& sub, const json& config, const json& result,
          const std::vector<std::string>& warnings, const std::string& summary) {
  json doc;
  doc["subcommand"] = sub;
  doc["version"] = ds_version();
  doc["defaults"] = ctx.defaults;
  doc["config"] = config;
  doc["result"] = result;
  doc["warnings"] = warnings;
  write_json(out_path(ctx, "result.json"), doc);

  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  write_json(out_path(ctx, "metadata.json"), {{"created", buf}, {"argv", ctx.argv}, {"defaults_path", ctx.defaults_path}});
  std::cout << sub << ": " << summary << "\n";
}

double density_to_um2(double v, const std::string& unit) {
  if (unit == "um2") return v;
  if (unit == "cm2") return v * 1e-8;
  if (unit == "nm2") return v * 1e6;
  throw InputError("unsupported density unit '" + unit + "'");
}

int dim_of(const std::string& s) {
  if (s == "2d") return DS_DIM_2D;
  if (s == "3d") return DS_DIM_3D;
  throw InputError("dimensionality must be 2d or 3d");
}

std::vector<double> time_grid(double a, double b, int n, bool log) {
  if (n < 2 || !(b > a) || (log && a <= 0.0)) throw InputError("bad time grid");
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    double u = static_cast<double>(i) / (n - 1);
    t[i] = log ? a * std::pow(b / a, u) : a + (b - a) * u;
  }
  return t;
}

// ---- simulate-fid ----

struct SimOpts {
  double sigma = 0.0, gamma = 0.0, depth = 5.0, flip = 1.0;
  std::string dim = "2d", unit = "um2", spacing = "log";
  double t_min = 0.0, t_max = 0.0, noise = 0.0;
  int points = 0, mc = -1;
};

int run_simulate(const Context& ctx, const SimOpts& o) {
  const auto& d = ctx.defaults["simulate_fid"];
  double t_min = o.t_min > 0 ? o.t_min : d["t_min_us"].get<double>();
  double t_max = o.t_max > 0 ? o.t_max : d["t_max_us"].get<double>();
  int points = o.points > 0 ? o.points : d["points"].get<int>();
  int mc = o.mc >= 0 ? o.mc : d["mc_configs"].get<int>();
  auto t = time_grid(t_min, t_max, points, o.spacing == "log");

  ds_bath b;
  ds_bath_default(&b);
  b.density = density_to_um2(o.sigma, o.unit);
  b.gamma_e = o.gamma;
  b.depth = o.depth;
  b.dim = dim_of(o.dim);
  if (b.dim == DS_DIM_3D && o.unit != "um2") throw InputError("3d densities are given in um^-3 only");
  b.flip_fraction = o.flip;

  ds_curve* raw = nullptr;
  json mc_info = nullptr;
  if (mc > 0) {
    ds_mc_info info{};
    check(ds_simulate_fid_mc(&b, t.data(), t.size(), mc, ctx.seed, &raw, &info), "simulate_fid_mc");
    mc_info = {{"configs", mc}, {"r_max_nm", info.r_max_nm}, {"mean_spins", info.mean_spins},
               {"max_bias_over_se", info.max_bias_over_se}, {"doublings", info.doublings}};
  } else {
    check(ds_fid_curve(&b, t.data(), t.size(), &raw), "fid_curve");
  }
  CurvePtr curve(raw);
  CurveData c = read_curve(curve.get());
  if (o.noise > 0.0) {
    std::mt19937_64 rng(ctx.seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    c.err.resize(c.y.size());
    for (std::size_t i = 0; i < c.y.size(); ++i) {
      c.err[i] = o.noise * std::abs(c.y[i]);
      c.y[i] *= 1.0 + o.noise * n01(rng);
    }
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < c.t.size(); ++i) {
    if (c.err.empty()) rows.push_back({c.t[i], c.y[i]});
    else rows.push_back({c.t[i], c.y[i], c.err[i]});
  }
  write_csv(out_path(ctx, "curve.csv"), c.err.empty() ? std::vector<std::string>{"t_us", "signal"}
                                                      : std::vector<std::string>{"t_us", "signal", "sigma"},
            rows);
  double ymin = 1.0;
  for (double v : c.y) ymin = std::min(ymin, v);
  json config = {{"sigma_um", b.density}, {"gamma_mhz", b.gamma_e}, {"depth_nm", b.depth}, {"dim", o.dim},
                 {"flip_fraction", b.flip_fraction}, {"t_min_us", t_min}, {"t_max_us", t_max}, {"points", points},
                 {"spacing", o.spacing}, {"mc_configs", mc}, {"noise", o.noise}, {"seed", ctx.seed}};
  json result = {{"points", c.t.size()}, {"min_signal", ymin}, {"curve", "curve.csv"}, {"mc", mc_info}};
  std::ostringstream s;
  s << c.t.size() << " points, min F = " << ymin;
  emit(ctx, "simulate-fid", config, result, {}, s.str());
  return 0;
}

// ---- fit-fid ----

struct FitFidOpts {
  std::string input, time_unit, dim = "2d";
  double gamma_min = NAN, gamma_max = NAN, depth_min = NAN, depth_max = NAN, flip = 1.0, simplex_tol = NAN;
  int grid = 0;
  bool weighted = false;
};

int run_fit_fid(const Context& ctx, const FitFidOpts& o) {
  CurveData data = ingest_curve(o.input, o.time_unit);
  if (data.axis != "t_us") throw InputError("fit-fid needs a time axis");
  if (o.weighted && data.err.empty()) throw InputError("--weighted needs a sigma column");
  const auto& d = ctx.defaults["fit_fid"];
  ds_fid_options opt;
  ds_fid_options_default(&opt);
  auto pick = [](double v, const json& j) { return std::isnan(v) ? j.get<double>() : v; };
  opt.gamma_min = pick(o.gamma_min, d["gamma_min_mhz"]);
  opt.gamma_max = pick(o.gamma_max, d["gamma_max_mhz"]);
  opt.depth_min = pick(o.depth_min, d["depth_min_nm"]);
  opt.depth_max = pick(o.depth_max, d["depth_max_nm"]);
  opt.simplex_tol = pick(o.simplex_tol, d["simplex_tol"]);
  opt.grid_gamma = opt.grid_depth = o.grid > 0 ? o.grid : d["grid_gamma"].get<int>();
  opt.w_rel_tol = d["w_rel_tol"].get<double>();
  opt.dim = dim_of(o.dim);
  opt.flip_fraction = o.flip;
  opt.weighted = o.weighted;

  auto curve = make_curve(data);
  ds_fit* raw = nullptr;
  check(ds_fit_fid(curve.get(), &opt, &raw), "fit_fid");
  FitPtr fit(raw);
  json fj = fit_to_json(fit.get());

  double v[3];
  for (int k = 0; k < 3; ++k) ds_fit_param(fit.get(), k, &v[k], nullptr, nullptr);
  ds_bath b;
  ds_bath_default(&b);
  b.density = v[0];
  b.gamma_e = v[1];
  b.depth = v[2];
  b.dim = opt.dim;
  b.flip_fraction = opt.flip_fraction;
  ds_curve* model = nullptr;
  check(ds_fid_curve(&b, data.t.data(), data.t.size(), &model), "fid_curve");
  CurveData m = read_curve(model);
  ds_curve_free(model);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < data.t.size(); ++i) rows.push_back({data.t[i], data.y[i], m.y[i]});
  write_csv(out_path(ctx, "fit_curve.csv"), {"t_us", "signal", "model"}, rows);

  json config = {{"input", o.input}, {"gamma_min_mhz", opt.gamma_min}, {"gamma_max_mhz", opt.gamma_max},
                 {"depth_min_nm", opt.depth_min}, {"depth_max_nm", opt.depth_max}, {"dim", o.dim},
                 {"flip_fraction", opt.flip_fraction}, {"weighted", o.weighted}, {"grid", opt.grid_gamma},
                 {"simplex_tol", opt.simplex_tol}};
  json result = fj;
  result["units"] = {{"sigma", opt.dim == DS_DIM_2D ? "um^-2" : "um^-3"}, {"gamma_e", "MHz"}, {"depth", "nm"}};
  std::ostringstream s;
  s << "sigma=" << v[0] << " gamma=" << v[1] << " d=" << v[2] << (fit_converged(fit.get()) ? "" : " (not converged)");
  emit(ctx, "fit-fid", config, result, fj["warnings"].get<std::vector<std::string>>(), s.str());
  return fit_converged(fit.get()) ? 0 : 3;
}

// ---- oracle ----

struct OracleOpts {
  int points = 0;
  double tol = NAN;
};

int run_oracle(const Context& ctx, const OracleOpts& o) {
  int n = o.points > 0 ? o.points : ctx.defaults["oracle"]["points"].get<int>();
  double tol = std::isnan(o.tol) ? ctx.defaults["oracle"]["tolerance"].get<double>() : o.tol;
  std::mt19937_64 rng(ctx.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<std::vector<double>> rows;
  double m_deer = 0, m_echo = 0, m_diff = 0;
  int over = 0;
  for (int i = 0; i < n; ++i) {
    double f_mhz = 0.01 * std::pow(1000.0, u01(rng));
    double v = kTwoPi * f_mhz;
    double g1 = 2.0 * v * u01(rng);
    double g2 = 2.0 * v * u01(rng);
    double t = 10.0 / v * u01(rng);
    double cd, ce, cdiff, od, oe;
    check(ds_kernels(v, g1, g2, t, &cd, &ce, &cdiff), "kernels");
    check(ds_oracle(v, g1, g2, t, &od, &oe), "oracle");
    double ed = std::abs(cd - od), ee = std::abs(ce - oe), ex = std::abs(cdiff - (od - oe));
    m_deer = std::max(m_deer, ed);
    m_echo = std::max(m_echo, ee);
    m_diff = std::max(m_diff, ex);
    over += g1 > v;
    rows.push_back({f_mhz, g1, g2, t, cd, od, ce, oe, ed, ee, ex});
  }
  write_csv(out_path(ctx, "residuals.csv"),
            {"v_mhz", "gamma_e1", "gamma_e2", "t_us", "deer_closed", "deer_oracle", "echo_closed", "echo_oracle",
             "err_deer", "err_echo", "err_diff"},
            rows);
  bool pass = m_deer < tol && m_echo < tol && m_diff < tol;
  json config = {{"points", n}, {"tolerance", tol}, {"seed", ctx.seed}};
  json result = {{"max_abs_deer", m_deer}, {"max_abs_echo", m_echo}, {"max_abs_diff", m_diff},
                 {"overdamped_points", over}, {"pass", pass}, {"table", "residuals.csv"}};
  std::ostringstream s;
  s << n << " points, max residual " << std::max({m_deer, m_echo, m_diff}) << (pass ? " (pass)" : " (FAIL)");
  emit(ctx, "oracle", config, result, {}, s.str());
  return pass ? 0 : 3;
}

// ---- fit-decay ----

struct DecayOpts {
  std::string model, input, nv_input, time_unit, groups;
  double t1_nv = NAN, n_nv = NAN, omega_n = NAN;
  int peaks = 1;
  std::vector<double> centers;
  bool shared_width = false;
};

std::vector<int> parse_groups(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string grp;
  while (std::getline(ss, grp, ';')) {
    std::stringstream gs(grp);
    std::string idx;
    int count = 0;
    while (std::getline(gs, idx, ',')) {
      try {
        out.push_back(std::stoi(idx));
      } catch (...) {
        throw InputError("bad --groups entry '" + idx + "'");
      }
      ++count;
    }
    if (count != 3) throw InputError("each symmetric group needs three indices");
  }
  return out;
}

int run_fit_decay(const Context& ctx, const DecayOpts& o) {
  bool spectrum = o.model == "lorentzian";
  CurveData data = ingest_curve(o.input, o.time_unit);
  if (spectrum != (data.axis == "freq_MHz")) {
    throw InputError(spectrum ? "lorentzian needs a freq_MHz,contrast file" : "decay models need a time axis");
  }
  auto curve = make_curve(data);
  ds_fit* raw = nullptr;
  json config = {{"model", o.model}, {"input", o.input}};
  json stage_one = nullptr;
  if (o.model == "t1-nv") {
    check(ds_fit_t1_nv(curve.get(), &raw), "fit_t1_nv");
  } else if (o.model == "t1") {
    double t1 = o.t1_nv, n = o.n_nv;
    if (std::isnan(t1) || std::isnan(n)) {
      if (o.nv_input.empty()) throw InputError("t1 needs --t1-nv and --n-nv, or --nv-input for the NV-only stage");
      auto nv = make_curve(ingest_curve(o.nv_input, o.time_unit));
      ds_fit* f1 = nullptr;
      check(ds_fit_t1_nv(nv.get(), &f1), "fit_t1_nv");
      FitPtr p1(f1);
      stage_one = fit_to_json(f1);
      for (std::size_t i = 0; i < ds_fit_param_count(f1); ++i) {
        std::string name = ds_fit_param_name(f1, i);
        double v;
        ds_fit_param(f1, i, &v, nullptr, nullptr);
        if (name == "T1_nv") t1 = v;
        if (name == "n_nv") n = v;
      }
      config["nv_input"] = o.nv_input;
    }
    config["t1_nv"] = t1;
    config["n_nv"] = n;
    check(ds_fit_stretched_t1(curve.get(), t1, n, &raw), "fit_stretched_t1");
  } else if (o.model == "echo-mod") {
    config["omega_n"] = num(o.omega_n);
    check(ds_fit_echo_modulation(curve.get(), std::isnan(o.omega_n) ? 0.0 : o.omega_n, &raw), "fit_echo_modulation");
  } else if (o.model == "rabi" || o.model == "rabi-pure") {
    check(ds_fit_rabi(curve.get(), o.model == "rabi-pure", &raw), "fit_rabi");
  } else if (spectrum) {
    auto g = parse_groups(o.groups);
    if (!o.centers.empty() && static_cast<int>(o.centers.size()) != o.peaks) {
      throw InputError("--centers must list one value per peak");
    }
    config["peaks"] = o.peaks;
    config["groups"] = o.groups;
    config["shared_width"] = o.shared_width;
    check(ds_fit_lorentzians(curve.get(), o.peaks, o.centers.empty() ? nullptr : o.centers.data(),
                             g.empty() ? nullptr : g.data(), g.size() / 3, o.shared_width, &raw),
          "fit_lorentzians");
  } else {
    throw InputError("unknown model '" + o.model + "'");
  }
  FitPtr fit(raw);
  json result = fit_to_json(fit.get());
  if (!stage_one.is_null()) result["stage_one"] = stage_one;
  std::ostringstream s;
  s << o.model << " fit, residual " << result["residual"] << (fit_converged(fit.get()) ? "" : " (not converged)");
  emit(ctx, "fit-decay", config, result, result["warnings"].get<std::vector<std::string>>(), s.str());
  return fit_converged(fit.get()) ? 0 : 3;
}

// ---- nn ----

struct NnOpts {
  std::string profile = "gaussian", unit = "um2";
  double mu = 6.76, sigma_z = 2.77, dose = 30.0, z_nv = NAN;
  int n_max = 1, mc = -1;
};

int run_nn(const Context& ctx, const NnOpts& o) {
  ds_profile p{DS_PROFILE_GAUSSIAN, o.mu, o.sigma_z, 0.0};
  if (o.profile == "gaussian" || o.profile == "uniform2d") {
    p.kind = o.profile == "gaussian" ? DS_PROFILE_GAUSSIAN : DS_PROFILE_UNIFORM_2D;
    p.q = density_to_um2(o.dose, o.unit) * 1e-6;
  } else if (o.profile == "uniform3d") {
    if (o.unit != "nm3") throw InputError("uniform3d densities are given with --dose-unit nm3");
    p.kind = DS_PROFILE_UNIFORM_3D;
    p.q = o.dose;
  } else {
    throw InputError("profile must be gaussian, uniform2d or uniform3d");
  }
  if (p.kind != DS_PROFILE_UNIFORM_3D && o.unit == "nm3") throw InputError("nm3 only applies to uniform3d");
  int trials = o.mc >= 0 ? o.mc : 0;
  double z = p.kind == DS_PROFILE_GAUSSIAN ? o.z_nv : 0.0;
  json rows_j = json::array();
  std::vector<std::vector<double>> rows;
  std::vector<std::string> warnings;
  if (p.kind == DS_PROFILE_GAUSSIAN && o.mu < 2 * o.sigma_z) warnings.push_back("mean depth below two sigma: full-line depth approximation");
  for (int n = 1; n <= o.n_max; ++n) {
    double mean, sd;
    check(ds_nn_moments(&p, n, z, &mean, &sd), "nn_moments");
    json r = {{"n", n}, {"mean_nm", mean}, {"std_nm", sd}};
    std::vector<double> row = {static_cast<double>(n), mean, sd};
    if (p.kind != DS_PROFILE_GAUSSIAN) {
      double cf;
      check(ds_nn_uniform(p.kind == DS_PROFILE_UNIFORM_3D ? DS_DIM_3D : DS_DIM_2D, n, p.q, &cf), "nn_uniform");
      r["closed_form_mean_nm"] = cf;
    }
    if (!std::isnan(z) || p.kind != DS_PROFILE_GAUSSIAN) {
      double norm;
      check(ds_nn_normalization(&p, n, std::isnan(z) ? 0.0 : z, &norm), "nn_normalization");
      r["normalization"] = norm;
    }
    if (trials > 0) {
      ds_nn_mc_result mc;
      check(ds_nn_mc(&p, n, z, trials, ctx.seed + n, &mc), "nn_mc");
      r["mc"] = {{"mean_nm", mc.mean}, {"std_nm", mc.std}, {"se_mean", mc.se_mean}, {"se_std", mc.se_std},
                 {"trials", mc.trials}, {"mean_spins_drawn", mc.mean_spins_drawn}};
      row.insert(row.end(), {mc.mean, mc.se_mean, mc.std, mc.se_std});
    }
    rows_j.push_back(r);
    rows.push_back(row);
  }
  std::vector<std::string> header = {"n", "mean_nm", "std_nm"};
  if (trials > 0) header.insert(header.end(), {"mc_mean_nm", "mc_se_mean", "mc_std_nm", "mc_se_std"});
  write_csv(out_path(ctx, "nn.csv"), header, rows);
  json config = {{"profile", o.profile}, {"mean_depth_nm", o.mu}, {"depth_sigma_nm", o.sigma_z},
                 {"dose", o.dose}, {"dose_unit", o.unit}, {"q_internal", p.q}, {"z_nv_nm", num(z)},
                 {"averaged", std::isnan(z)}, {"n_max", o.n_max}, {"mc_trials", trials}, {"seed", ctx.seed}};
  std::ostringstream s;
  s << "l1 = " << rows[0][1] << " +/- " << rows[0][2] << " nm";
  emit(ctx, "nn", config, {{"neighbours", rows_j}, {"table", "nn.csv"}}, warnings, s.str());
  return 0;
}

// ---- p1 ----

struct P1Opts {
  int isotope = 14;
  double a_par = NAN, a_perp = NAN, q = 0.0, omega_e = 550.0, omega_n = NAN;
  std::string axis = "both";
};

int run_p1(const Context& ctx, const P1Opts& o) {
  ds_p1_params p;
  ds_p1_default(&p);
  if (o.isotope != 14 && o.isotope != 15) throw InputError("isotope must be 14 or 15");
  p.isotope = o.isotope == 15 ? DS_N15 : DS_N14;
  double dpar, dperp;
  const auto& d = ctx.defaults["p1"];
  ds_p1_from_splittings(d["on_axis_splitting_mhz"].get<double>(), d["off_axis_splitting_mhz"].get<double>(), &dpar, &dperp);
  bool derived = std::isnan(o.a_par) && std::isnan(o.a_perp);
  p.a_par = std::isnan(o.a_par) ? dpar : o.a_par;
  p.a_perp = std::isnan(o.a_perp) ? dperp : o.a_perp;
  p.q = o.q;
  p.omega_e = o.omega_e;
  p.omega_n = o.omega_n;
  if (o.axis != "on" && o.axis != "off" && o.axis != "both") throw InputError("axis must be on, off or both");
  json lines = json::array();
  std::vector<std::vector<double>> rows;
  std::vector<std::string> warnings;
  for (int off = 0; off <= 1; ++off) {
    if ((off && o.axis == "on") || (!off && o.axis == "off")) continue;
    double f[3], m[3], fe[3], me[3];
    size_t n = 0, ne = 0;
    check(ds_p1_resonances(&p, off, 0, f, m, 3, &n), "p1_resonances");
    std::string w = ds_last_warning();
    if (!w.empty()) warnings.push_back(w);
    check(ds_p1_resonances(&p, off, 1, fe, me, 3, &ne), "p1_exact");
    for (size_t k = 0; k < n; ++k) {
      lines.push_back({{"axis", off ? "off" : "on"}, {"m_i", m[k]}, {"perturbative_mhz", f[k]}, {"exact_mhz", fe[k]}});
      rows.push_back({static_cast<double>(off), m[k], f[k], fe[k], f[k] - fe[k]});
    }
  }
  write_csv(out_path(ctx, "lines.csv"), {"off_axis", "m_i", "perturbative_mhz", "exact_mhz", "difference_mhz"}, rows);
  double ao, po;
  ds_off_axis_constants(p.a_par, p.a_perp, &ao, &po);
  json config = {{"isotope", o.isotope == 15 ? "N15" : "N14"}, {"a_par_mhz", p.a_par}, {"a_perp_mhz", p.a_perp},
                 {"a_constants", derived ? "derived from default splittings" : "user"}, {"q_mhz", p.q},
                 {"omega_e_mhz", p.omega_e}, {"omega_n_mhz", num(p.omega_n)}, {"axis", o.axis}};
  json result = {{"off_axis_constants", {{"a_par_mhz", ao}, {"a_perp_mhz", po}}}, {"lines", lines}, {"table", "lines.csv"}};
  emit(ctx, "p1", config, result, warnings, std::to_string(rows.size()) + " lines");
  return 0;
}

// ---- gfactor ----

struct GOpts {
  std::string input;
};

json peak_of(const json& j, const std::string& key) {
  if (!j.contains(key) || !j[key].contains("center")) throw InputError("missing peak '" + key + "'");
  return j[key];
}

int run_gfactor(const Context& ctx, const GOpts& o) {
  json in = read_json(o.input);
  std::string iso = in.value("isotope", "N14");
  double gamma_e = in.value("gamma_e", ctx.defaults["constants"]["gamma_electron_linear_mhz_per_gauss"].get<double>());
  ds_gfactor g{};
  json config = {{"input", o.input}, {"isotope", iso}, {"gamma_e_mhz_per_gauss", gamma_e}};
  try {
    json dark = peak_of(in, "dark");
    if (iso == "N14") {
      auto grab = [&](const char* key, double* c, double* e) {
        const auto& arr = in.at(key);
        if (!arr.is_array() || arr.size() != 3) throw InputError(std::string(key) + " needs three peaks");
        for (int k = 0; k < 3; ++k) {
          c[k] = arr[k].at("center").get<double>();
          e[k] = arr[k].value("error", 0.0);
        }
      };
      double on[3], one[3], off[3], offe[3];
      grab("on_axis", on, one);
      grab("off_axis", off, offe);
      check(ds_gfactor_14n(on, one, off, offe, dark.at("center").get<double>(), dark.value("error", 0.0), gamma_e, &g),
            "gfactor_14n");
    } else if (iso == "N15") {
      json t1 = peak_of(in, "t1"), t2 = peak_of(in, "t2");
      auto win = in.value("window", std::vector<double>{100.0, 5000.0});
      if (win.size() != 2) throw InputError("window needs [lo, hi]");
      std::string kind = in.value("a_perp_kind", "A_perp");
      if (kind != "A_perp" && kind != "A'_perp") throw InputError("a_perp_kind must be A_perp or A'_perp");
      config["a_perp_kind"] = kind;
      config["window_mhz"] = win;
      config["neglect_omega_n"] = in.value("neglect_omega_n", true);
      check(ds_gfactor_15n(t1.at("center").get<double>(), t1.value("error", 0.0), t2.at("center").get<double>(),
                           t2.value("error", 0.0), in.at("a_perp").get<double>(), in.value("a_perp_error", 0.0),
                           dark.at("center").get<double>(), dark.value("error", 0.0), win[0], win[1], gamma_e,
                           in.value("neglect_omega_n", true), &g),
            "gfactor_15n");
    } else {
      throw InputError("isotope must be N14 or N15");
    }
  } catch (const json::exception& e) {
    throw InputError(o.input + ": " + e.what());
  }
  std::vector<std::string> warnings;
  std::string w = ds_last_warning();
  if (!w.empty()) warnings.push_back(w);
  json roots = json::array();
  for (int k = 0; k < g.n_roots; ++k) roots.push_back(g.roots[k]);
  json result = {{"omega_e_on_mhz", num(g.omega_e_on)}, {"omega_e_off_mhz", num(g.omega_e_off)},
                 {"omega_e_avg_mhz", g.omega_e_avg}, {"omega_e_avg_err_mhz", g.omega_e_avg_err},
                 {"b_eff_gauss", g.b_eff}, {"b_eff_err_gauss", g.b_eff_err}, {"g", g.g}, {"g_err", g.g_err},
                 {"g_in_band", g.g_in_band != 0}, {"roots_mhz", roots}};
  std::ostringstream s;
  s << "g = " << g.g << " +/- " << g.g_err << ", B_eff = " << g.b_eff << " G";
  emit(ctx, "gfactor", config, result, warnings, s.str());
  return 0;
}

// ---- sensitivity ----

struct SensOpts {
  std::vector<double> depths = {3, 4, 5, 6, 8, 10, 12};
  std::vector<double> sigmas = {50, 100, 200, 500, 1000, 2000, 5000, 10000};
  double h = NAN, snr_sigma = 500.0, nv_factor = 10.0, rho_h = NAN;
};

int run_sensitivity(const Context& ctx, const SensOpts& o) {
  const auto& d = ctx.defaults["sensitivity"];
  ds_ratio_options ro;
  ro.h_nm = std::isnan(o.h) ? d["coating_nm"].get<double>() : o.h;
  ro.sigma_bare = d["sigma_bare_um2"];
  ro.gamma_bare = d["gamma_bare_mhz"];
  ro.sigma_coated = d["sigma_coated_um2"];
  ro.gamma_coated = d["gamma_coated_mhz"];
  ro.gamma_target = d["gamma_target_mhz"];
  ro.tau_lo_us = d["tau_lo_us"];
  ro.tau_hi_us = d["tau_hi_us"];
  if (o.depths.empty() || o.sigmas.empty()) throw InputError("need at least one depth and one density");
  std::vector<double> cells(7 * o.depths.size() * o.sigmas.size());
  check(ds_ratio_map(o.depths.data(), o.depths.size(), o.sigmas.data(), o.sigmas.size(), &ro, cells.data()),
        "ratio_map");
  std::vector<std::vector<double>> rows;
  int below = 0, above = 0;
  for (std::size_t i = 0; i < cells.size() / 7; ++i) {
    const double* c = &cells[7 * i];
    rows.push_back({c[0], c[1], c[4], c[2], c[3], c[5], c[6]});
    (c[4] < 1.0 ? below : above)++;
  }
  write_csv(out_path(ctx, "ratio_map.csv"),
            {"d_nv_nm", "sigma_T_um2", "eta_ratio", "eta_coated", "eta_bare", "tau_coated_us", "tau_bare_us"}, rows);

  const auto& sj = d["snr"];
  ds_snr_model m{sj["a"], sj["b"], sj["t_ref_h"], sj["delta_sigma_b_um2"], sj["h_nm"], sj["nv_depth_nm"]};
  double t1 = NAN, t10 = NAN;
  check(ds_time_to_snr(&m, o.snr_sigma, 1.0, &t1), "time_to_snr");
  check(ds_time_to_snr(&m, o.snr_sigma, o.nv_factor, &t10), "time_to_snr");
  double rho = 1e3 / std::sqrt(o.snr_sigma), dv;
  int ok;
  check(ds_dipolar_perturbation(ro.h_nm, rho, ro.h_nm, &dv, &ok), "dipolar_perturbation");
  std::vector<std::string> warnings;
  if (!ok) warnings.push_back("spacing not large compared with the coating: dV/V estimate outside its regime");

  json config = {{"depths_nm", o.depths}, {"sigmas_um2", o.sigmas}, {"coating_nm", ro.h_nm},
                 {"sigma_bare_um2", ro.sigma_bare}, {"gamma_bare_mhz", ro.gamma_bare},
                 {"sigma_coated_um2", ro.sigma_coated}, {"gamma_coated_mhz", ro.gamma_coated},
                 {"gamma_target_mhz", ro.gamma_target}, {"tau_range_us", {ro.tau_lo_us, ro.tau_hi_us}},
                 {"snr_sigma_um2", o.snr_sigma}, {"nv_density_factor", o.nv_factor}};
  json result = {
      {"ratio_orientation", "eta_coated/eta_bare (below 1: coating improves sensitivity)"},
      {"cells_coated_better", below},
      {"cells_bare_better", above},
      {"ratio_one_contour", below > 0 && above > 0},
      {"map", "ratio_map.csv"},
      {"snr_line_at_sigma", ds_snr_line(&m, o.snr_sigma)},
      {"time_to_snr",
       {{"formula_hours", t1},
        {"quoted_hours", d["quoted_time_to_snr_h"]["sample1"]},
        {"formula_hours_scaled", t10},
        {"quoted_hours_scaled", d["quoted_time_to_snr_h"]["sample2_10x_nv"]},
        {"note", "the displayed SNR(t) formula with the stated inputs gives formula_hours; the quoted value differs"}}},
      {"dipolar_perturbation", {{"rho_nm", rho}, {"delta_h_nm", ro.h_nm}, {"ratio", dv}, {"regime_ok", ok != 0}}}};
  std::ostringstream s;
  s << below << "/" << rows.size() << " cells favour the coating; t(SNR=1) = " << t1 << " h";
  emit(ctx, "sensitivity", config, result, warnings, s.str());
  return 0;
}

// ---- nucleation ----

struct NucOpts {
  std::string input;
  double n_d = NAN, g = NAN, x_max = 300.0;
  int points = 301;
};

int run_nucleation(const Context& ctx, const NucOpts& o) {
  double nd = o.n_d, g = o.g;
  json config = {{"x_max", o.x_max}, {"points", o.points}};
  json result;
  std::vector<std::string> warnings;
  if (!o.input.empty()) {
    Table tb = read_csv(o.input);
    if (tb.header != std::vector<std::string>{"cycles", "thickness_nm"}) {
      throw InputError(o.input + ": header must be cycles,thickness_nm");
    }
    std::vector<double> x, y;
    for (const auto& r : tb.rows) {
      x.push_back(r[0]);
      y.push_back(r[1]);
    }
    ds_fit* raw = nullptr;
    check(ds_fit_nucleation(x.data(), y.data(), x.size(), &raw), "fit_nucleation");
    FitPtr fit(raw);
    result = fit_to_json(fit.get());
    ds_fit_param(fit.get(), 0, &nd, nullptr, nullptr);
    ds_fit_param(fit.get(), 1, &g, nullptr, nullptr);
    for (const char* k : {"r_squared", "r_cov", "r_cov_err", "n_d_per_um2"}) result[k] = num(ds_fit_extra(fit.get(), k));
    warnings = result["warnings"].get<std::vector<std::string>>();
    config["input"] = o.input;
  } else {
    if (std::isnan(nd) || std::isnan(g)) throw InputError("give --input, or both --n-d and --g");
    config["n_d_nm2"] = nd;
    config["g_nm_per_cycle"] = g;
  }
  double rc, xc;
  check(ds_coalescence(nd, g, &rc, &xc), "coalescence");
  result["coalescence"] = {{"r_cov_nm", rc}, {"cycles", xc}, {"n_d_per_um2", nd * 1e6}};
  if (o.points < 2 || !(o.x_max > 0)) throw InputError("bad curve grid");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < o.points; ++i) {
    double x = o.x_max * i / (o.points - 1), mu;
    check(ds_film_thickness(nd, g, x, &mu, nullptr), "film_thickness");
    rows.push_back({x, mu});
  }
  write_csv(out_path(ctx, "model_curve.csv"), {"cycles", "thickness_nm"}, rows);
  result["curve"] = "model_curve.csv";
  std::ostringstream s;
  s << "N_d = " << nd << " nm^-2, g = " << g << " nm/cycle, R_cov = " << rc << " nm";
  emit(ctx, "nucleation", config, result, warnings, s.str());
  bool conv = result.contains("converged") ? result["converged"].get<bool>() : true;
  return conv ? 0 : 3;
}

}  // namespace

void register_commands(CLI::App& app, Context& ctx, std::function<int()>& action) {
  {
    auto o = std::make_shared<SimOpts>();
    auto* c = app.add_subcommand("simulate-fid", "configurationally averaged (or Monte Carlo) FID curve");
    c->add_option("--sigma", o->sigma, "bath density");
    c->add_option("--gamma", o->gamma, "depolarization rate, MHz");
    c->add_option("--depth", o->depth, "NV depth, nm");
    c->add_option("--dim", o->dim, "2d or 3d");
    c->add_option("--flip", o->flip, "flip fraction");
    c->add_option("--density-unit", o->unit, "um2 or cm2");
    c->add_option("--t-min", o->t_min, "us");
    c->add_option("--t-max", o->t_max, "us");
    c->add_option("--points", o->points);
    c->add_option("--spacing", o->spacing, "log or linear");
    c->add_option("--mc", o->mc, "Monte Carlo configurations (0: analytic)");
    c->add_option("--noise", o->noise, "relative multiplicative noise");
    c->callback([&, o] { action = [&, o] { return run_simulate(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<FitFidOpts>();
    auto* c = app.add_subcommand("fit-fid", "fit sigma, gamma_e and depth to an FID curve");
    c->add_option("-i,--input", o->input, "CSV t_us,signal[,sigma]")->required();
    c->add_option("--time-unit", o->time_unit, "declared time unit (us or ns)");
    c->add_option("--gamma-min", o->gamma_min);
    c->add_option("--gamma-max", o->gamma_max);
    c->add_option("--depth-min", o->depth_min);
    c->add_option("--depth-max", o->depth_max);
    c->add_option("--dim", o->dim);
    c->add_option("--flip", o->flip);
    c->add_option("--grid", o->grid);
    c->add_option("--simplex-tol", o->simplex_tol);
    c->add_flag("--weighted", o->weighted, "inverse-variance weights from the sigma column");
    c->callback([&, o] { action = [&, o] { return run_fit_fid(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<OracleOpts>();
    auto* c = app.add_subcommand("oracle", "closed forms against master-equation propagation");
    c->add_option("--points", o->points);
    c->add_option("--tol", o->tol);
    c->callback([&, o] { action = [&, o] { return run_oracle(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<DecayOpts>();
    auto* c = app.add_subcommand("fit-decay", "T1, echo, Rabi and Lorentzian fits");
    c->add_option("--model", o->model, "t1-nv, t1, echo-mod, rabi, rabi-pure, lorentzian")->required();
    c->add_option("-i,--input", o->input)->required();
    c->add_option("--nv-input", o->nv_input, "NV-only T1 curve for the first stage");
    c->add_option("--time-unit", o->time_unit);
    c->add_option("--t1-nv", o->t1_nv);
    c->add_option("--n-nv", o->n_nv);
    c->add_option("--omega-n", o->omega_n, "fixed nuclear modulation frequency, MHz");
    c->add_option("--peaks", o->peaks);
    c->add_option("--centers", o->centers);
    c->add_option("--groups", o->groups, "symmetric triples, e.g. 0,1,2;3,4,5");
    c->add_flag("--shared-width", o->shared_width);
    c->callback([&, o] { action = [&, o] { return run_fit_decay(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<NnOpts>();
    auto* c = app.add_subcommand("nn", "n-th nearest neighbour distance statistics");
    c->add_option("--profile", o->profile, "gaussian, uniform2d, uniform3d");
    c->add_option("--mu", o->mu, "mean implant depth, nm");
    c->add_option("--sigma-z", o->sigma_z, "depth spread, nm");
    c->add_option("--dose", o->dose);
    c->add_option("--dose-unit", o->unit, "um2, cm2, nm2, nm3");
    c->add_option("--z-nv", o->z_nv, "fixed NV depth; default averages over the profile");
    c->add_option("--n-max", o->n_max);
    c->add_option("--mc", o->mc, "Monte Carlo trials");
    c->callback([&, o] { action = [&, o] { return run_nn(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<P1Opts>();
    auto* c = app.add_subcommand("p1", "P1 resonance lines");
    c->add_option("--isotope", o->isotope, "14 or 15");
    c->add_option("--a-par", o->a_par);
    c->add_option("--a-perp", o->a_perp);
    c->add_option("--q", o->q);
    c->add_option("--omega-e", o->omega_e);
    c->add_option("--omega-n", o->omega_n);
    c->add_option("--axis", o->axis, "on, off or both");
    c->callback([&, o] { action = [&, o] { return run_p1(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<GOpts>();
    auto* c = app.add_subcommand("gfactor", "g-factor from grouped peak centers");
    c->add_option("-i,--input", o->input, "grouped-peak JSON")->required();
    c->callback([&, o] { action = [&, o] { return run_gfactor(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<SensOpts>();
    auto* c = app.add_subcommand("sensitivity", "coated/bare sensitivity map and time to SNR");
    c->add_option("--depths", o->depths, "NV depths, nm");
    c->add_option("--sigmas", o->sigmas, "target densities, um^-2");
    c->add_option("--coating", o->h, "coating thickness, nm");
    c->add_option("--snr-sigma", o->snr_sigma);
    c->add_option("--nv-factor", o->nv_factor);
    c->callback([&, o] { action = [&, o] { return run_sensitivity(ctx, *o); }; });
  }
  {
    auto o = std::make_shared<NucOpts>();
    auto* c = app.add_subcommand("nucleation", "island nucleation thickness model and fit");
    c->add_option("-i,--input", o->input, "CSV cycles,thickness_nm");
    c->add_option("--n-d", o->n_d, "nm^-2");
    c->add_option("--g", o->g, "nm/cycle");
    c->add_option("--x-max", o->x_max);
    c->add_option("--points", o->points);
    c->callback([&, o] { action = [&, o] { return run_nucleation(ctx, *o); }; });
  }
}
