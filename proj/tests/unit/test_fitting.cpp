#include <cmath>
#include <random>

#include "darkspin/bathavg.hpp"
#include "darkspin/error.hpp"
#include "darkspin/fitting.hpp"
#include "darkspin/random.hpp"
#include "doctest.h"

using namespace darkspin;

namespace {

DecayCurve sample(const std::vector<double>& t, const std::function<double(double)>& f) {
  DecayCurve c;
  c.t = t;
  for (double x : t) c.y.push_back(f(x));
  return c;
}

void add_noise(DecayCurve& c, double sd, std::uint64_t seed) {
  rng::Stream rs(seed);
  c.y_err.assign(c.size(), sd);
  for (double& y : c.y) y += sd * rs.normal();
}

// 3x3 Gaussian elimination with partial pivoting
std::array<double, 3> solve3(std::array<std::array<double, 4>, 3> m) {
  for (int c = 0; c < 3; ++c) {
    int p = c;
    for (int r = c + 1; r < 3; ++r)
      if (std::abs(m[r][c]) > std::abs(m[p][c])) p = r;
    std::swap(m[c], m[p]);
    for (int r = c + 1; r < 3; ++r) {
      double f = m[r][c] / m[c][c];
      for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double s = m[r][3];
    for (int k = r + 1; k < 3; ++k) s -= m[r][k] * x[k];
    x[r] = s / m[r][r];
  }
  return x;
}

FidFitOptions quick_fid() {
  FidFitOptions o;
  o.gamma_max = 1.0;
  o.depth_min = 2.0;
  o.depth_max = 20.0;
  o.grid_gamma = o.grid_depth = 8;
  o.simplex_tol = 1e-9;
  return o;
}

}  // namespace

TEST_CASE("error propagation matches a hand-solved 4-point system") {
  Eigen::MatrixXd J(4, 3);
  J << 1.0, 0.5, -2.0, 0.3, 1.2, 0.7, -0.8, 0.4, 1.5, 2.0, -1.1, 0.2;
  Eigen::VectorXd dF(4);
  dF << 0.01, 0.02, 0.015, 0.03;
  std::array<std::array<double, 4>, 3> ne{};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 4; ++i) ne[a][b] += std::pow(J(i, a), 2) * std::pow(J(i, b), 2);
    for (int i = 0; i < 4; ++i) ne[a][3] += std::pow(J(i, a), 2) * dF[i] * dF[i];
  }
  auto x = solve3(ne);
  auto r = error_propagation(J, dF, {"a", "b", "c"});
  for (int j = 0; j < 3; ++j) CHECK(r.squares[j] == doctest::Approx(x[j]).epsilon(1e-10));
  auto r2 = error_propagation(J, 2.0 * dF);
  for (int j = 0; j < 3; ++j) CHECK(r2.squares[j] == doctest::Approx(4.0 * r.squares[j]).epsilon(1e-10));
  CHECK(r.clamped == (x[0] < 0 || x[1] < 0 || x[2] < 0));
}

TEST_CASE("error propagation names the null direction") {
  Eigen::MatrixXd J(5, 3);
  for (int i = 0; i < 5; ++i) {
    J(i, 0) = 1.0 + i;
    J(i, 1) = 2.0 * (1.0 + i);  // squared column is 4x column 0
    J(i, 2) = std::sin(i + 0.3);
  }
  Eigen::VectorXd dF = Eigen::VectorXd::Constant(5, 0.01);
  try {
    error_propagation(J, dF, {"sigma", "gamma", "d"});
    FAIL("expected unidentifiable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unidentifiable);
    CHECK(std::string(e.what()).find("sigma") != std::string::npos);
  }
}

TEST_CASE("closed-form sigma zeroes the cost gradient") {
  BathParams b;
  b.density = 900.0;
  b.gamma_e = 0.15;
  b.depth = 6.0;
  auto c = fid_curve(b, logspace(0.3, 15.0, 14));
  add_noise(c, 0.004, 11);
  for (auto& e : c.y_err) e = 0.004;
  FidProblem prob(c, quick_fid());
  for (double g : {0.05, 0.3}) {
    for (double d : {4.0, 8.0}) {
      auto fc = prob.cost(g, d);
      // cost is quadratic in log sigma, so a central difference there is exact up to rounding
      double h = 1e-3;
      double up = prob.cost_at(fc.sigma * std::exp(h), g, d), dn = prob.cost_at(fc.sigma * std::exp(-h), g, d);
      CHECK(std::abs(up - dn) / (2 * h) < 1e-8 * fc.cost + 1e-14);
      CHECK(up > fc.cost);
      CHECK(dn > fc.cost);
      CHECK(prob.cost_at(fc.sigma, g, d) == doctest::Approx(fc.cost).epsilon(1e-12));
    }
  }
}

TEST_CASE("fid fit: noiseless round trip") {
  BathParams b;
  b.density = 1461.0;
  b.gamma_e = 0.2;
  b.depth = 7.2;
  auto c = fid_curve(b, logspace(0.2, 20.0, 18));
  auto r = fit_fid(c, quick_fid());
  CHECK(r.converged);
  CHECK(r.value("sigma") == doctest::Approx(1461.0).epsilon(1e-5));
  CHECK(r.value("gamma") == doctest::Approx(0.2).epsilon(1e-5));
  CHECK(r.value("d") == doctest::Approx(7.2).epsilon(1e-5));
  for (double e : r.errors) CHECK(e < 1e-3);
  CHECK(r.gn_errors.size() == 3);
}

TEST_CASE("fid fit: bounds and degenerate data") {
  BathParams b;
  b.density = 1461.0;
  b.depth = 4.0;
  auto c = fid_curve(b, logspace(0.2, 20.0, 14));
  auto o = quick_fid();
  o.depth_min = 5.0;
  auto r = fit_fid(c, o);
  bool saw = false;
  for (const auto& w : r.warnings) saw |= w.find("d at lower bound") != std::string::npos;
  CHECK(saw);
  DecayCurve ones = sample(logspace(0.2, 20.0, 10), [](double) { return 1.0; });
  CHECK_THROWS_AS(fit_fid(ones, o), Error);
}

TEST_CASE("stretched T1: NV stage and product stage") {
  auto t = logspace(1.0, 2000.0, 30);
  auto nv = sample(t, [](double x) { return 0.3 * std::exp(-std::pow(x / 800.0, 0.9)) + 0.05; });
  auto r1 = fit_stretched_t1_nv(nv);
  CHECK(r1.value("T1_nv") == doctest::Approx(800.0).epsilon(1e-6));
  CHECK(r1.value("n_nv") == doctest::Approx(0.9).epsilon(1e-6));
  auto prod = sample(t, [](double x) { return stretched_t1_model(x, 0.3, 0.05, 800.0, 0.9, 50.0, 1.0); });
  auto r2 = fit_stretched_t1(prod, {800.0, 0.9, true});
  CHECK(r2.value("T1_e") == doctest::Approx(50.0).epsilon(1e-6));
  CHECK(r2.value("n_e") == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r2.value("A") == doctest::Approx(0.3).epsilon(1e-6));
  // amplitude scale equivariance
  DecayCurve k = prod;
  for (double& y : k.y) y *= 7.0;
  auto r3 = fit_stretched_t1(k, {800.0, 0.9, true});
  CHECK(r3.value("T1_e") == doctest::Approx(r2.value("T1_e")).epsilon(1e-9));
  CHECK(r3.value("n_e") == doctest::Approx(r2.value("n_e")).epsilon(1e-9));
  CHECK(r3.value("A") == doctest::Approx(7.0 * r2.value("A")).epsilon(1e-9));
  CHECK_THROWS_AS(fit_stretched_t1(prod, {-1.0, 0.9, true}), Error);
}

TEST_CASE("echo with nuclear modulation") {
  const double om = 1.0705e-3 * 196.9;  // 13C Larmor at the fitted field, MHz
  auto t = linspace(0.5, 60.0, 240);
  auto c = sample(t, [&](double x) { return echo_modulation_model(x, 0.8, 40.0, 1.6, 0.3, om, 0.4); });
  auto r = fit_echo_modulation(c);
  CHECK(r.value("omega_n") == doctest::Approx(om).epsilon(0.01));
  CHECK(r.value("T2") == doctest::Approx(40.0).epsilon(1e-4));
  CHECK(r.value("alpha") == doctest::Approx(0.3).epsilon(1e-4));
  EchoModulationOptions fixed;
  fixed.omega_n = om;
  fixed.fix_omega = true;
  auto rf = fit_echo_modulation(c, fixed);
  CHECK(rf.value("omega_n") == om);
  CHECK(rf.value("n") == doctest::Approx(1.6).epsilon(1e-6));
  auto flat = sample(t, [&](double x) { return echo_modulation_model(x, 0.8, 40.0, 3.42, 0.0, om, 0.0); });
  auto r0 = fit_echo_modulation(flat);
  CHECK(r0.value("alpha") == 0.0);
  CHECK(r0.value("n") == doctest::Approx(3.42).epsilon(1e-6));
  bool flagged = false;
  for (const auto& w : r0.warnings) flagged |= w.find("omega_n unidentifiable") != std::string::npos;
  CHECK(flagged);
}

TEST_CASE("decaying Rabi oscillation") {
  auto t = linspace(0.0, 1.2, 200);
  auto c = sample(t, [](double x) { return rabi_model(x, 0.1, 0.5453, 1.103, 16.7, 0.3, 0.9); });
  auto r = fit_rabi(c);
  CHECK(r.value("f") == doctest::Approx(16.7).epsilon(1e-7));
  CHECK(r.value("T_rabi") == doctest::Approx(0.5453).epsilon(1e-6));
  CHECK(r.value("n") == doctest::Approx(1.103).epsilon(1e-6));
  auto pure = sample(t, [](double x) { return rabi_model(x, 1.0, 0.5453, 1.103, 16.7, 0.0, 0.0); });
  auto rp = fit_rabi(pure, {true});
  CHECK(rp.value("f") == doctest::Approx(16.7).epsilon(1e-7));
  auto cosine = sample(linspace(0.0, 40.0, 300), [](double x) { return std::cos(kTwoPi * 0.1752 * x); });
  auto rc = fit_rabi(cosine);
  CHECK(rc.value("f") == doctest::Approx(0.1752).epsilon(1e-6));
  auto noisy = sample(linspace(0.0, 40.0, 300), [](double x) { return 0.5 * std::exp(-x / 30.0) * std::cos(kTwoPi * 0.1752 * x); });
  add_noise(noisy, 0.03, 5);
  auto rn = fit_rabi(noisy);
  CHECK(std::abs(rn.value("f") - 0.1752) < 0.0047);
  DecayCurve flat = sample(linspace(0.0, 1.0, 50), [](double) { return 1.0; });
  CHECK_THROWS_AS(fit_rabi(flat), Error);
}

TEST_CASE("Lorentzian spectra") {
  auto f = linspace(500.0, 600.0, 201);
  auto one = sample(f, [](double x) { return lorentzian_sum(x, 1.0, {551.9}, {6.0}, {-0.04}); });
  LorentzianOptions o1;
  auto r = fit_lorentzians(one, o1);
  CHECK(r.value("center_1") == doctest::Approx(551.9).epsilon(1e-9));
  CHECK(r.value("width_1") == doctest::Approx(6.0).epsilon(1e-7));
  CHECK(r.value("amplitude_1") == doctest::Approx(-0.04).epsilon(1e-7));

  // six 14N lines: on-axis triplet split by 227.1/2, off-axis by 170.1/2
  std::vector<double> centers = {549.1 - 113.55, 554.7 - 85.05, 549.1, 554.7, 554.7 + 85.05, 549.1 + 113.55};
  std::vector<double> amps = {-0.01, -0.02, -0.01, -0.02, -0.02, -0.01};
  auto ff = linspace(380.0, 720.0, 681);
  auto six = sample(ff, [&](double x) { return lorentzian_sum(x, 1.0, centers, std::vector<double>(6, 5.0), amps); });
  add_noise(six, 5e-4, 3);
  LorentzianOptions o6;
  o6.n_peaks = 6;
  o6.initial_centers = {437.0, 468.0, 548.0, 556.0, 641.0, 661.0};
  o6.symmetric_groups = {{0, 2, 5}, {1, 3, 4}};
  auto r6 = fit_lorentzians(six, o6);
  CHECK(std::abs(2 * r6.value("spacing_1") - 227.1) < 1.1);
  CHECK(std::abs(2 * r6.value("spacing_2") - 170.1) < 1.1);

  auto f15 = linspace(400.0, 700.0, 601);
  auto three = sample(f15, [](double x) {
    return lorentzian_sum(x, 1.0, {550.0 - 120.1, 550.0, 550.0 + 120.1}, {5.0, 5.0, 5.0}, {-0.02, -0.05, -0.02});
  });
  LorentzianOptions o3;
  o3.n_peaks = 3;
  o3.shared_width = true;
  o3.symmetric_groups = {{0, 1, 2}};
  auto r3 = fit_lorentzians(three, o3);
  CHECK(r3.value("spacing_1") == doctest::Approx(120.1).epsilon(1e-8));
  CHECK(r3.value("width") == doctest::Approx(5.0).epsilon(1e-8));

  LorentzianOptions bad;
  bad.n_peaks = 2;
  bad.initial_centers = {540.0};
  CHECK_THROWS_AS(fit_lorentzians(one, bad), Error);
}

TEST_CASE("unresolved peaks raise a covariance warning") {
  auto f = linspace(500.0, 600.0, 201);
  auto c = sample(f, [](double x) { return lorentzian_sum(x, 1.0, {550.0, 551.0}, {10.0, 10.0}, {-0.03, -0.03}); });
  add_noise(c, 1e-3, 8);
  LorentzianOptions o;
  o.n_peaks = 2;
  o.initial_centers = {545.0, 556.0};
  auto r = fit_lorentzians(c, o);
  CHECK_FALSE(r.warnings.empty());
}
