#include <cmath>

#include "darkspin/error.hpp"
#include "darkspin/nucleation.hpp"
#include "doctest.h"

using namespace darkspin;
using namespace darkspin::nucleation;

TEST_CASE("thickness curve") {
  NucleationModel m;
  CHECK(film_thickness(0.0, m) == 0.0);
  auto c = coalescence_radius(m);
  CHECK(c.r_cov == doctest::Approx(2.60).epsilon(0.01));
  CHECK(c.r_cov == doctest::Approx(std::sqrt(1.0 / (kPi * m.n_d))).epsilon(1e-15));
  double at = film_thickness(c.cycles, m);
  CHECK(std::abs(at - 2.0 / 3.0 * m.n_d * kPi * std::pow(c.r_cov, 3)) < 1e-12);
  // one ulp either side of the branch point
  double lo = std::nextafter(c.cycles, 0.0), hi = std::nextafter(c.cycles, 1e9);
  CHECK(std::abs(film_thickness(hi, m) - film_thickness(lo, m)) < 1e-12);
  CHECK(std::abs(film_growth_rate(hi, m) - film_growth_rate(lo, m)) < 1e-8);
  for (double x : {10.0, 40.0, 80.0, 300.0}) {
    double h = 1e-4;
    double fd = (film_thickness(x + h, m) - film_thickness(x - h, m)) / (2 * h);
    CHECK(film_growth_rate(x, m) == doctest::Approx(fd).epsilon(1e-7));
  }
  double prev = -1.0;
  for (double x = 0.0; x < 500.0; x += 7.0) {
    double y = film_thickness(x, m);
    CHECK(y > prev);
    prev = y;
  }
  CHECK(film_growth_rate(1e6, m) == doctest::Approx(m.g).epsilon(1e-6));
  CHECK_THROWS_AS(film_thickness(-1.0, m), Error);
  NucleationModel bad{-1.0, 0.1};
  CHECK_THROWS_AS(film_thickness(1.0, bad), Error);
}

TEST_CASE("coalescence radius scaling") {
  NucleationModel unit{1.0 / kPi, 0.05};
  CHECK(unit.r_cov() == doctest::Approx(1.0).epsilon(1e-15));
  NucleationModel a{0.047, 0.05}, b{0.047 / 4, 0.05};
  CHECK(b.r_cov() == doctest::Approx(2.0 * a.r_cov()).epsilon(1e-15));
}

TEST_CASE("fit round trip") {
  NucleationModel m;
  std::vector<double> x, y;
  for (double c = 0.0; c <= 300.0; c += 20.0) {
    x.push_back(c);
    y.push_back(film_thickness(c, m));
  }
  auto r = fit_nucleation(x, y);
  CHECK(r.model.n_d == doctest::Approx(0.047).epsilon(1e-8));
  CHECK(r.model.g == doctest::Approx(0.04667).epsilon(1e-8));
  CHECK(r.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.n_d_per_um2 == doctest::Approx(47000.0).epsilon(1e-8));
  CHECK(r.r_cov == doctest::Approx(m.r_cov()).epsilon(1e-8));
  CHECK(r.fit.value("n_d") == r.model.n_d);

  // linear regime only: the density cannot be separated from the offset
  std::vector<double> xl, yl;
  for (double c = 200.0; c <= 400.0; c += 20.0) {
    xl.push_back(c);
    yl.push_back(film_thickness(c, m));
  }
  try {
    fit_nucleation(xl, yl);
    FAIL("expected unidentifiable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Unidentifiable);
  }
  CHECK_THROWS_AS(fit_nucleation({1.0, 2.0}, {0.1, 0.2}), Error);
}
