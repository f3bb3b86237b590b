#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "darkspin/error.hpp"
#include "darkspin/nn.hpp"
#include "doctest.h"

using namespace darkspin::nn;

namespace {

constexpr double kPi = 3.14159265358979323846;

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

}  // namespace

TEST_CASE("uniform limits of the neighbour density") {
  const double q = 30e-6;
  auto flat = ImplantProfile::uniform_2d(q);
  for (double r : {10.0, 90.0, 250.0})
    CHECK(nn_density(1, r, 0.0, flat) == doctest::Approx(2 * kPi * q * r * std::exp(-kPi * q * r * r)).epsilon(1e-10));
  const double q3 = 1e-5;
  auto vol = ImplantProfile::uniform_3d(q3);
  for (double r : {5.0, 20.0, 40.0})
    CHECK(nn_density(1, r, 0.0, vol) ==
          doctest::Approx(4 * kPi * q3 * r * r * std::exp(-4 * kPi * q3 * r * r * r / 3)).epsilon(1e-10));
  // Gamma-function closed form, evaluated with std::tgamma
  for (int n = 1; n <= 4; ++n) {
    double want = std::tgamma(n + 0.5) / (std::tgamma(n) * std::sqrt(kPi) * std::sqrt(q));
    CHECK(l_n_uniform_2d(n, q) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(l_n_uniform_2d(1, q) == doctest::Approx(91.29).epsilon(1e-4));
  CHECK(std_n_uniform_2d(1, q) / l_n_uniform_2d(1, q) == doctest::Approx(std::sqrt(4 / kPi - 1)).epsilon(1e-12));
  CHECK_THROWS_AS(nn_density(0, 1.0, 0.0, flat), darkspin::Error);
}

TEST_CASE("normalization and the cumulative shell") {
  for (double dose : {30.0, 300.0, 2000.0}) {
    auto p = ImplantProfile::gaussian_um2(6.76, 2.77, dose);
    for (int n = 1; n <= 4; ++n) {
      for (double z : {6.76, 12.0, 1.0}) CHECK(nn_normalization(n, z, p) == doctest::Approx(1.0).epsilon(1e-6));
    }
    double lam = integrate([&](double r) { return shell_density(r, 6.76, p); }, 0.0, 40.0);
    CHECK(cumulative_shell(40.0, 6.76, p) == doctest::Approx(lam).epsilon(1e-8));
  }
}

TEST_CASE("averaged moments for the two implanted samples") {
  auto s0 = ImplantProfile::gaussian_cm2(6.76, 2.77, 3e9);
  auto m0 = nn_mean_var_averaged(1, s0);
  CHECK(m0.mean == doctest::Approx(91.37).epsilon(0.01));
  CHECK(m0.std() == doctest::Approx(47.60).epsilon(0.02));
  CHECK(m0.std() / m0.mean == doctest::Approx(0.5227).epsilon(0.01));
  auto s1 = ImplantProfile::gaussian_um2(6.76, 2.77, 2000.0);
  CHECK(nn_mean_var_averaged(1, s1).mean == doctest::Approx(11.93).epsilon(0.02));
  CHECK_FALSE(s1.half_space_warning());
  CHECK(ImplantProfile::gaussian_um2(3.0, 2.0, 30.0).half_space_warning());
}

TEST_CASE("ordering and density monotonicity") {
  for (double dose : {10.0, 300.0, 5000.0}) {
    auto p = ImplantProfile::gaussian_um2(6.76, 2.77, dose);
    double prev = 0.0;
    for (int n = 1; n <= 4; ++n) {
      double l = nn_mean_var(n, 6.76, p).mean;
      CHECK(l > prev);
      prev = l;
    }
  }
  double prev = 1e300;
  for (double dose : {10.0, 100.0, 1000.0, 10000.0}) {
    double l = nn_mean_var(1, 6.76, ImplantProfile::gaussian_um2(6.76, 2.77, dose)).mean;
    CHECK(l < prev);
    prev = l;
  }
}

TEST_CASE("Monte Carlo agrees with quadrature across densities") {
  for (double dose : {10.0, 300.0, 5000.0}) {
    auto p = ImplantProfile::gaussian_um2(6.76, 2.77, dose);
    for (int n : {1, 2, 4}) {
      auto a = nn_mean_var(n, 6.76, p);
      auto mc = sample_nn_mc(n, p, 6.76, 4000, 17 + n);
      CHECK(std::abs(mc.mean - a.mean) < 3.0 * mc.se_mean);
    }
  }
  auto p = ImplantProfile::gaussian_um2(6.76, 2.77, 30.0);
  auto x = sample_nn_mc(1, p, std::nullopt, 2000, 3);
  auto y = sample_nn_mc(1, p, std::nullopt, 2000, 3);
  CHECK(x.mean == y.mean);
  CHECK_THROWS_AS(sample_nn_mc(1, p, 6.76, 500, 3), darkspin::Error);
}

TEST_CASE("NV position matters only at high density") {
  auto lo = ImplantProfile::gaussian_um2(6.76, 2.77, 10.0);
  double a = nn_mean_var(1, 6.76, lo).mean, b = nn_mean_var(1, 16.76, lo).mean;
  CHECK(std::abs(a - b) / a < 0.01);
  CHECK(a == doctest::Approx(l_n_uniform_2d(1, 10e-6)).epsilon(0.01));
  auto hi = ImplantProfile::gaussian_um2(6.76, 2.77, 5000.0);
  CHECK(nn_mean_var(1, 6.76, hi).mean < nn_mean_var(1, 16.76, hi).mean);
}
