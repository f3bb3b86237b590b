#include "darkspin/nucleation.hpp"

#include <algorithm>
#include <cmath>

#include "darkspin/core.hpp"
#include "darkspin/error.hpp"
#include "lsq_model.hpp"

namespace darkspin::nucleation {

void NucleationModel::validate() const {
  require(std::isfinite(n_d) && n_d > 0.0, ErrorCode::Domain, "N_d must be positive");
  require(std::isfinite(g) && g > 0.0, ErrorCode::Domain, "g must be positive");
}

double NucleationModel::r_cov() const { return std::sqrt(1.0 / (kPi * n_d)); }

namespace {

// u = r - sqrt(r^2 - R^2), written without cancellation
double cap_height(double r, double rc, double s) { return rc * rc / (r + s); }

double thickness_r(double r, double n_d, double rc) {
  if (r <= rc) return 2.0 / 3.0 * n_d * kPi * r * r * r;
  double s = std::sqrt((r - rc) * (r + rc));
  double u = cap_height(r, rc, s);
  return n_d * (kPi * rc * rc * s + kPi / 6.0 * (3 * rc * rc + u * u) * u);
}

}  // namespace

double film_thickness(double x, const NucleationModel& m) {
  m.validate();
  require(x >= 0.0, ErrorCode::Domain, "cycle count must be >= 0");
  return thickness_r(m.g * x, m.n_d, m.r_cov());
}

double film_growth_rate(double x, const NucleationModel& m) {
  m.validate();
  require(x >= 0.0, ErrorCode::Domain, "cycle count must be >= 0");
  double r = m.g * x, rc = m.r_cov();
  if (r <= rc) return m.g * 2.0 * m.n_d * kPi * r * r;
  double s = std::sqrt((r - rc) * (r + rc));
  double u = cap_height(r, rc, s);
  return m.g * m.n_d * kPi * (0.5 * (rc * rc + u * u) + r * u);
}

Coalescence coalescence_radius(const NucleationModel& m) {
  m.validate();
  return {m.r_cov(), m.r_cov() / m.g};
}

NucleationFit fit_nucleation(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), ErrorCode::InvalidArgument, "cycles and thickness differ in length");
  require(x.size() >= 3, ErrorCode::InsufficientData, "need at least 3 points");
  std::vector<std::size_t> idx(x.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  DecayCurve c;
  for (auto i : idx) {
    require(std::isfinite(x[i]) && std::isfinite(y[i]) && x[i] >= 0.0, ErrorCode::InvalidArgument,
            "cycles must be finite and >= 0, thickness finite");
    c.t.push_back(x[i]);
    c.y.push_back(y[i]);
  }
  const std::size_t n = c.size();

  // g from the last two points, N_d from where the data reach 80% of the linear law
  double g0 = (c.y[n - 1] - c.y[n - 2]) / (c.t[n - 1] - c.t[n - 2]);
  if (!(g0 > 0.0)) g0 = std::max(c.y[n - 1] / std::max(c.t[n - 1], 1.0), 1e-6);
  double r_on = g0 * c.t[n / 2];
  for (std::size_t i = 0; i < n; ++i) {
    if (c.t[i] > 0.0 && c.y[i] >= 0.8 * g0 * c.t[i]) {
      r_on = g0 * c.t[i];
      break;
    }
  }
  double nd0 = 1.0 / (kPi * r_on * r_on);

  std::vector<detail::ParamDef> defs = {{"n_d", nd0, 0.0}, {"g", g0, 0.0}};
  std::vector<std::vector<double>> starts;
  for (double k : {1.0, 0.3, 3.0}) starts.push_back({nd0 * k, g0});
  auto f = [](double xc, const std::vector<double>& p) {
    return thickness_r(p[1] * xc, p[0], std::sqrt(1.0 / (kPi * p[0])));
  };
  NucleationFit out;
  out.fit = detail::fit_model("nucleation", c, defs, starts, f);
  out.model = {out.fit.values[0], out.fit.values[1]};
  out.r_cov = out.model.r_cov();
  // R = (pi N_d)^-1/2
  out.r_cov_err = 0.5 * out.r_cov * out.fit.errors[0] / out.model.n_d;
  out.n_d_per_um2 = units::per_nm2_to_per_um2(out.model.n_d);

  double mean = 0.0;
  for (double v : c.y) mean += v;
  mean /= n;
  double tss = 0.0;
  for (double v : c.y) tss += (v - mean) * (v - mean);
  out.r_squared = tss > 0.0 ? 1.0 - out.fit.residual / tss : 1.0;

  std::size_t in_hemisphere = 0;
  for (double xc : c.t) in_hemisphere += out.model.g * xc <= out.r_cov;
  if (n < 4) out.fit.warnings.push_back("fewer than 4 points");
  if (in_hemisphere == 0 || in_hemisphere == n) out.fit.warnings.push_back("data do not span both growth regimes");
  if (in_hemisphere == 0) {
    double rel = out.fit.errors[0] / out.model.n_d;
    bool near_linear = out.model.g * c.t.front() > 3.0 * out.r_cov;
    require(!(near_linear || rel > 1.0 || !std::isfinite(rel)), ErrorCode::Unidentifiable,
            "all data lie in the linear regime: N_d is unidentifiable");
  }
  return out;
}

}  // namespace darkspin::nucleation
