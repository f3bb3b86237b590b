#include "darkspin/spectra.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <tuple>

#include "darkspin/error.hpp"

namespace darkspin::spectra {

const char* isotope_name(Isotope i) { return i == Isotope::N14 ? "N14" : "N15"; }

void P1Params::validate() const {
  require(std::isfinite(omega_e) && omega_e > 0.0, ErrorCode::Domain, "omega_e must be positive");
  require(std::isfinite(a_par) && std::isfinite(a_perp) && std::isfinite(q), ErrorCode::Domain,
          "hyperfine constants must be finite");
  if (omega_n) require(std::isfinite(*omega_n), ErrorCode::Domain, "omega_n must be finite");
}

double P1Params::nuclear_larmor(const PhysicalConstants& c) const {
  if (omega_n) return *omega_n;
  double gn = isotope == Isotope::N14 ? kGammaN14 : kGammaN15;
  return gn * omega_e / c.gamma_electron_linear;
}

P1Params P1Params::from_splittings(double on_axis_split, double off_axis_split) {
  P1Params p;
  p.a_par = 0.5 * on_axis_split;
  p.a_perp = (9.0 * 0.5 * off_axis_split - p.a_par) / 8.0;
  return p;
}

std::pair<double, double> off_axis_constants(double a_par, double a_perp) {
  return {(a_par + 8.0 * a_perp) / 9.0, (4.0 * a_par + 5.0 * a_perp) / 9.0};
}

namespace {

P1Params mapped(const P1Params& p, Axis axis) {
  P1Params q = p;
  if (axis == Axis::Off) std::tie(q.a_par, q.a_perp) = off_axis_constants(p.a_par, p.a_perp);
  return q;
}

void common_warnings(const P1Params& p, ResonanceList& out) {
  if (p.isotope == Isotope::N15 && p.q != 0.0) out.warnings.push_back("Q ignored: 15N has no nuclear quadrupole moment");
  if (p.omega_e <= std::abs(p.a_perp)) out.warnings.push_back("omega_e <= A_perp: perturbative lines are not reliable");
}

}  // namespace

ResonanceList p1_resonances(const P1Params& p0, Axis axis) {
  p0.validate();
  P1Params p = mapped(p0, axis);
  ResonanceList out;
  common_warnings(p, out);
  double we = p.omega_e, ap = p.a_par, aq = p.a_perp;
  if (p.isotope == Isotope::N14) {
    out.m_i = {1.0, 0.0, -1.0};
    out.frequency = {we + ap + aq * aq / (2 * we), we + aq * aq / we, we - ap + aq * aq / (2 * we)};
  } else {
    double shift = aq * aq / (4.0 * (we - p.nuclear_larmor()));
    out.m_i = {0.5, -0.5};
    out.frequency = {we + 0.5 * ap + shift, we - 0.5 * ap + shift};
  }
  return out;
}

ResonanceList p1_exact(const P1Params& p0, Axis axis) {
  p0.validate();
  P1Params p = mapped(p0, axis);
  ResonanceList out;
  common_warnings(p, out);
  const double I = p.isotope == Isotope::N14 ? 1.0 : 0.5;
  const int ni = static_cast<int>(2 * I + 1);
  const int dim = 2 * ni;
  const double wn = p.nuclear_larmor();
  const double q = p.isotope == Isotope::N14 ? p.q : 0.0;
  auto ms = [&](int idx) { return idx < ni ? 0.5 : -0.5; };
  auto mi = [&](int idx) { return I - (idx % ni); };

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (int a = 0; a < dim; ++a) {
    double s = ms(a), m = mi(a);
    H(a, a) = p.omega_e * s + wn * m + p.a_par * s * m + q * m * m;
  }
  // A_perp/2 (S+ I- + S- I+): |-1/2, m> <-> |+1/2, m-1>
  for (int k = 0; k < ni; ++k) {
    double m = I - k;
    if (m - 1 < -I) continue;
    int down = ni + k;    // |-1/2, m>
    int up = k + 1;       // |+1/2, m-1>
    double el = 0.5 * p.a_perp * std::sqrt(I * (I + 1) - m * (m - 1));
    H(up, down) = el;
    H(down, up) = el;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  require(es.info() == Eigen::Success, ErrorCode::Internal, "eigensolver failed");

  // label each eigenstate by its dominant product state
  std::vector<double> energy(dim, 0.0);
  std::vector<bool> taken(dim, false);
  for (int j = 0; j < dim; ++j) {
    Eigen::Index best;
    es.eigenvectors().col(j).cwiseAbs2().maxCoeff(&best);
    require(!taken[best], ErrorCode::Internal, "eigenstates could not be labelled uniquely");
    taken[best] = true;
    energy[best] = es.eigenvalues()[j];
  }
  for (int k = 0; k < ni; ++k) {
    out.m_i.push_back(I - k);
    out.frequency.push_back(energy[k] - energy[ni + k]);
  }
  return out;
}

double g_from_field(double omega_fit_mhz, double b_gauss, const PhysicalConstants& c) {
  require(b_gauss > 0.0, ErrorCode::Domain, "field must be positive");
  return c.planck() * omega_fit_mhz * 1e6 / (c.mu_bohr * b_gauss * 1e-4);
}

namespace {

using Pipeline = std::function<std::vector<double>(const std::vector<double>&)>;

// First-order propagation with central differences, step = sigma/100.
std::vector<double> linearized_errors(const Pipeline& f, const std::vector<double>& x, const std::vector<double>& sx) {
  std::vector<double> var(f(x).size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (sx[i] <= 0.0) continue;
    double h = sx[i] / 100.0;
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    auto fp = f(xp), fm = f(xm);
    for (std::size_t k = 0; k < var.size(); ++k) {
      double d = (fp[k] - fm[k]) / (2 * h) * sx[i];
      var[k] += d * d;
    }
  }
  for (auto& v : var) v = std::sqrt(v);
  return var;
}

void check_band(GFactorResult& r) {
  r.g_in_band = r.g > 1.5 && r.g < 2.5;
  if (!r.g_in_band) r.warnings.push_back("g outside the (1.5, 2.5) sanity band");
}

}  // namespace

GFactorResult g_factor_14n(const GFactor14nInput& in, const PhysicalConstants& c) {
  require(in.on_axis.size() == 3 && in.off_axis.size() == 3, ErrorCode::InvalidArgument,
          "need three on-axis and three off-axis peaks");
  require(in.gamma_e > 0.0, ErrorCode::Domain, "gamma_e must be positive");
  std::vector<double> x, sx;
  for (const auto* grp : {&in.on_axis, &in.off_axis}) {
    for (const auto& pk : *grp) {
      require(std::isfinite(pk.center) && pk.error >= 0.0, ErrorCode::InvalidArgument, "bad peak");
      x.push_back(pk.center);
      sx.push_back(pk.error);
    }
  }
  x.push_back(in.dark.center);
  sx.push_back(in.dark.error);

  Pipeline f = [&](const std::vector<double>& v) {
    double on = v[0] + v[2] - v[1];
    double off = v[3] + v[5] - v[4];
    double avg = 0.5 * (on + off);
    double b = avg / in.gamma_e;
    return std::vector<double>{on, off, avg, b, g_from_field(v[6], b, c)};
  };
  auto v = f(x);
  require(std::abs(v[0] - v[1]) <= 0.05 * std::abs(v[2]), ErrorCode::InvalidArgument,
          "on- and off-axis triplets give omega_e differing by more than 5%: check grouping");
  auto e = linearized_errors(f, x, sx);
  GFactorResult r;
  r.omega_e_on = v[0];
  r.omega_e_off = v[1];
  r.omega_e_avg = v[2];
  r.omega_e_avg_err = e[2];
  r.b_eff = v[3];
  r.b_eff_err = e[3];
  r.g = v[4];
  r.g_err = e[4];
  check_band(r);
  return r;
}

GFactorResult g_factor_15n(const GFactor15nInput& in, const PhysicalConstants& c) {
  require(in.gamma_e > 0.0, ErrorCode::Domain, "gamma_e must be positive");
  require(in.window_hi > in.window_lo, ErrorCode::InvalidArgument, "empty frequency window");
  double s0 = in.t1.center + in.t2.center;
  require(s0 > 2.0 * std::abs(in.a_perp), ErrorCode::Domain, "need omega_t1 + omega_t2 > 2 A_perp");
  // omega - omega_n = kappa omega when omega_n is kept
  const double kappa = in.neglect_omega_n ? 1.0 : 1.0 - kGammaN15 / in.gamma_e;

  auto roots_of = [&](double s, double ap) {
    double half = 0.5 * s;
    double disc = half * half - ap * ap / kappa;
    require(disc >= 0.0, ErrorCode::NoSolution, "negative discriminant");
    if (ap == 0.0) return std::vector<double>{half};
    double sq = std::sqrt(disc);
    return std::vector<double>{0.5 * (half + sq), 0.5 * (half - sq)};
  };
  auto roots = roots_of(s0, in.a_perp);
  int pick = -1, count = 0;
  for (std::size_t k = 0; k < roots.size(); ++k) {
    if (roots[k] >= in.window_lo && roots[k] <= in.window_hi) {
      pick = static_cast<int>(k);
      ++count;
    }
  }
  require(count == 1, ErrorCode::Ambiguous,
          count == 0 ? "no root inside the frequency window" : "both roots inside the frequency window");

  Pipeline f = [&](const std::vector<double>& v) {
    auto r = roots_of(v[0] + v[1], v[2]);
    double w = r[std::min<std::size_t>(pick, r.size() - 1)];
    double b = w / in.gamma_e;
    return std::vector<double>{w, b, g_from_field(v[3], b, c)};
  };
  std::vector<double> x = {in.t1.center, in.t2.center, in.a_perp, in.dark.center};
  std::vector<double> sx = {in.t1.error, in.t2.error, in.a_perp_err, in.dark.error};
  auto v = f(x);
  auto e = linearized_errors(f, x, sx);
  GFactorResult r;
  r.roots = roots;
  r.omega_e_on = std::nan("");
  r.omega_e_off = v[0];
  r.omega_e_avg = v[0];
  r.omega_e_avg_err = e[0];
  r.b_eff = v[1];
  r.b_eff_err = e[1];
  r.g = v[2];
  r.g_err = e[2];
  r.a_perp_kind = in.a_perp_kind;
  check_band(r);
  return r;
}

}  // namespace darkspin::spectra
