#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <string>

#include "darkspin/bathavg.hpp"
#include "darkspin/error.hpp"
#include "darkspin/random.hpp"
#include "gap_inline.hpp"

namespace darkspin {

namespace {

struct Sums {
  std::vector<double> d, e, dd, ee, de;
  explicit Sums(std::size_t n) : d(n), e(n), dd(n), ee(n), de(n) {}
};

// Radius where the quadratic tail bound drops below rel of F.
double auto_radius(const BathParams& b, double t_max) {
  const double rel = 1e-4;
  double r = 10.0 * b.depth;
  while (tail_bound(b, t_max, r) > rel) r *= 1.25;
  return r;
}

// Half-space volume {|x| <= r, z >= d}.
double cap_volume(double r, double d) { return kPi * (2.0 * r * r * r / 3.0 - r * r * d + d * d * d / 3.0); }

double invert_cap_volume(double u, double d) {
  double lo = std::max(d, std::cbrt(3.0 * u / kTwoPi));
  double hi = std::max(2.0 * d, std::cbrt(6.0 * u / kPi));
  if (cap_volume(lo, d) >= u) return lo;
  auto f = [&](double r) { return cap_volume(r, d) - u; };
  boost::uintmax_t it = 200;
  auto res = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), it);
  return 0.5 * (res.first + res.second);
}

void run_configs(const BathParams& b, const std::vector<double>& ts, int n, std::uint64_t seed, double r_max,
                 Sums& s, double& spins_total) {
  const std::size_t nt = ts.size();
  const double rho = b.density_internal();
  const double gamma = units::rate_mhz_to_per_us(b.gamma_e);
  const bool plane = b.dim == Dimensionality::Plane2D;
  std::vector<double> dcur(nt), ecur(nt);
  spins_total = 0.0;
  for (int i = 0; i < n; ++i) {
    rng::Stream rs(rng::derive_seed(seed, static_cast<std::uint64_t>(i)));
    std::fill(dcur.begin(), dcur.end(), 1.0);
    std::fill(ecur.begin(), ecur.end(), 1.0);
    double acc = 0.0;
    while (true) {
      acc += rs.exponential() / rho;
      Vec3 pos;
      if (plane) {
        double r = std::sqrt(acc / kPi);
        if (r > r_max) break;
        double ph = kTwoPi * rs.uniform();
        pos = {r * std::cos(ph), r * std::sin(ph), b.depth};
      } else {
        double r = invert_cap_volume(acc, b.depth);
        if (r > r_max) break;
        double z = b.depth + (r - b.depth) * rs.uniform();
        double ph = kTwoPi * rs.uniform();
        double rl = std::sqrt(std::max(0.0, r * r - z * z));
        pos = {rl * std::cos(ph), rl * std::sin(ph), z};
      }
      bool flipped = b.flip_fraction >= 1.0 || rs.uniform() < b.flip_fraction;
      spins_total += 1.0;
      double v = dipolar_coupling(pos, b.axis);
      for (std::size_t k = 0; k < nt; ++k) {
        auto f = detail::deer_echo_fast(v * ts[k], gamma * ts[k]);
        dcur[k] *= flipped ? f.deer : f.echo;
        ecur[k] *= f.echo;
      }
    }
    for (std::size_t k = 0; k < nt; ++k) {
      s.d[k] += dcur[k];
      s.e[k] += ecur[k];
      s.dd[k] += dcur[k] * dcur[k];
      s.ee[k] += ecur[k] * ecur[k];
      s.de[k] += dcur[k] * ecur[k];
    }
  }
}

}  // namespace

McResult simulate_fid_mc(const BathParams& b, const std::vector<double>& ts, int n_configs, std::uint64_t seed,
                         const McOptions& opt) {
  b.validate();
  require(n_configs >= 100, ErrorCode::InvalidArgument, "simulate_fid_mc needs at least 100 configurations");
  require(!ts.empty(), ErrorCode::InvalidArgument, "empty time grid");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    require(std::isfinite(ts[i]) && ts[i] >= 0.0 && (i == 0 || ts[i] > ts[i - 1]), ErrorCode::InvalidArgument,
            "time grid must be non-negative and strictly increasing");
  }
  McResult out;
  out.curve.t = ts;
  const std::size_t nt = ts.size();
  if (b.density == 0.0 || b.flip_fraction == 0.0) {
    out.curve.y.assign(nt, 1.0);
    out.curve.y_err.assign(nt, 0.0);
    return out;
  }
  double t_max = ts.back();
  double r = opt.r_max_nm > 0.0 ? opt.r_max_nm : auto_radius(b, t_max);
  require(r > b.depth || b.dim == Dimensionality::Plane2D, ErrorCode::InvalidArgument, "r_max must exceed the depth");
  const double n = n_configs;
  for (int attempt = 0;; ++attempt) {
    Sums s(nt);
    double spins = 0.0;
    run_configs(b, ts, n_configs, seed, r, s, spins);
    out.curve.y.assign(nt, 0.0);
    out.curve.y_err.assign(nt, 0.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < nt; ++k) {
      double md = s.d[k] / n, me = s.e[k] / n;
      double vd = (s.dd[k] - n * md * md) / (n - 1.0);
      double ve = (s.ee[k] - n * me * me) / (n - 1.0);
      double cde = (s.de[k] - n * md * me) / (n - 1.0);
      double f = md / me;
      double var = (vd - 2.0 * f * cde + f * f * ve) / (n * me * me);
      double se = std::sqrt(std::max(0.0, var));
      out.curve.y[k] = f;
      out.curve.y_err[k] = se;
      double bias = std::abs(f) * tail_bound(b, ts[k], r);
      if (se > 0.0) worst = std::max(worst, bias / se);
    }
    out.r_max_nm = r;
    out.mean_spins = spins / n;
    out.max_bias_over_se = worst;
    out.doublings = attempt;
    if (worst <= 0.1) break;
    if (attempt >= opt.max_doublings) {
      throw Error(ErrorCode::Truncation, "truncation bias bound " + std::to_string(worst) +
                                             " SE persists after doubling r_max to " + std::to_string(r) + " nm");
    }
    r *= 2.0;
  }
  return out;
}

}  // namespace darkspin
