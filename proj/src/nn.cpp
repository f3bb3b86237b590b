#include "darkspin/nn.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <memory>

#include "darkspin/core.hpp"
#include "darkspin/error.hpp"
#include "darkspin/random.hpp"

namespace darkspin::nn {

void ImplantProfile::validate() const {
  require(std::isfinite(q) && q > 0.0, ErrorCode::InvalidArgument, "dose q must be > 0");
  if (kind == ProfileKind::Gaussian) {
    require(std::isfinite(depth_sigma) && depth_sigma > 0.0, ErrorCode::InvalidArgument, "depth sigma must be > 0");
    require(std::isfinite(mean_depth), ErrorCode::InvalidArgument, "mean depth must be finite");
  }
}

bool ImplantProfile::half_space_warning() const {
  return kind == ProfileKind::Gaussian && mean_depth < 2.0 * depth_sigma;
}

ImplantProfile ImplantProfile::gaussian_um2(double mu_nm, double sigma_nm, double dose_um2) {
  return {ProfileKind::Gaussian, mu_nm, sigma_nm, units::per_um2_to_per_nm2(dose_um2)};
}

ImplantProfile ImplantProfile::gaussian_cm2(double mu_nm, double sigma_nm, double dose_cm2) {
  return gaussian_um2(mu_nm, sigma_nm, units::per_cm2_to_per_um2(dose_cm2));
}

ImplantProfile ImplantProfile::uniform_2d(double q_nm2) { return {ProfileKind::Uniform2D, 0.0, 1.0, q_nm2}; }
ImplantProfile ImplantProfile::uniform_3d(double q_nm3) { return {ProfileKind::Uniform3D, 0.0, 1.0, q_nm3}; }

double Moments::std() const { return std::sqrt(std::max(0.0, variance)); }

double shell_density(double r, double z_nv, const ImplantProfile& p) {
  require(r >= 0.0, ErrorCode::Domain, "r must be >= 0");
  switch (p.kind) {
    case ProfileKind::Uniform2D:
      return kTwoPi * r;
    case ProfileKind::Uniform3D:
      return 2.0 * kTwoPi * r * r;
    case ProfileKind::Gaussian:
      break;
  }
  const double a = p.mean_depth - z_nv, s = std::sqrt(2.0) * p.depth_sigma;
  return kPi * r * (std::erf((r + a) / s) + std::erf((r - a) / s));
}

double cumulative_shell(double r, double z_nv, const ImplantProfile& p) {
  require(r >= 0.0, ErrorCode::Domain, "r must be >= 0");
  switch (p.kind) {
    case ProfileKind::Uniform2D:
      return kPi * r * r;
    case ProfileKind::Uniform3D:
      return 4.0 * kPi * r * r * r / 3.0;
    case ProfileKind::Gaussian:
      break;
  }
  const double a = p.mean_depth - z_nv, sg = p.depth_sigma, s = std::sqrt(2.0) * sg;
  // the closed form cancels to ~r^3 at small r
  if (r < 0.5 * sg) {
    return boost::math::quadrature::gauss<double, 20>::integrate(
        [&](double x) { return shell_density(x, z_nv, p); }, 0.0, r);
  }
  const double ep = std::exp(-(r + a) * (r + a) / (2.0 * sg * sg));
  const double em = std::exp(-(r - a) * (r - a) / (2.0 * sg * sg));
  const double erfs = std::erf((r + a) / s) + std::erf((r - a) / s);
  const double closed = std::sqrt(kPi / 2.0) * (ep * (r - a) + em * (r + a)) * sg +
                        kPi / 2.0 * (r * r - a * a - sg * sg) * erfs;
  return closed;
}

double nn_density(int n, double r, double z_nv, const ImplantProfile& p) {
  require(n >= 1, ErrorCode::InvalidArgument, "n must be >= 1");
  p.validate();
  double f = shell_density(r, z_nv, p);
  if (f <= 0.0) return 0.0;
  double u = p.q * cumulative_shell(r, z_nv, p);
  if (u <= 0.0) return n == 1 ? p.q * f : 0.0;
  double lg = (n - 1) * std::log(u) - std::lgamma(static_cast<double>(n)) + std::log(p.q * f) - u;
  return std::exp(lg);
}

namespace {

struct GslOff {
  GslOff() { gsl_set_error_handler_off(); }
};
const GslOff gsl_off;

struct Ws {
  gsl_integration_workspace* w;
  Ws() : w(gsl_integration_workspace_alloc(2000)) {}
  ~Ws() { gsl_integration_workspace_free(w); }
  Ws(const Ws&) = delete;
  Ws& operator=(const Ws&) = delete;
};

gsl_integration_workspace* ws(int level) {
  thread_local Ws w[2];
  return w[level].w;
}

struct Thunk {
  const std::function<double(double)>* f;
  std::exception_ptr err;
};

double thunk(double x, void* p) {
  auto* t = static_cast<Thunk*>(p);
  if (t->err) return 0.0;
  try {
    return (*t->f)(x);
  } catch (...) {
    t->err = std::current_exception();
    return 0.0;
  }
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel, int level) {
  Thunk th{&f, nullptr};
  gsl_function F{&thunk, &th};
  double res = 0, err = 0;
  int rc = gsl_integration_qag(&F, a, b, 0.0, rel, 2000, GSL_INTEG_GAUSS31, ws(level), &res, &err);
  if (th.err) std::rethrow_exception(th.err);
  if (rc != GSL_SUCCESS && !(err <= 100.0 * rel * std::abs(res))) {
    throw IntegrationError(std::string("nearest-neighbour quadrature failed: ") + gsl_strerror(rc), res, err);
  }
  return res;
}

// Radius beyond which the n-th neighbour tail mass is negligible.
double r_cut(int n, double z_nv, const ImplantProfile& p) {
  const double target = n + 12.0 * std::sqrt(static_cast<double>(n)) + 40.0;
  double r = 1.0 / std::sqrt(p.q);
  if (p.kind == ProfileKind::Uniform3D) r = 1.0 / std::cbrt(p.q);
  while (p.q * cumulative_shell(r, z_nv, p) < target) r *= 1.5;
  return r;
}

// Integral of r^k W_n over [0, rc] in equal pieces.
double moment(int n, int k, double z_nv, const ImplantProfile& p, double rel, int level) {
  double rc = r_cut(n, z_nv, p);
  auto f = [&](double r) { return std::pow(r, k) * nn_density(n, r, z_nv, p); };
  double s = 0.0;
  const int pieces = 8;
  for (int i = 0; i < pieces; ++i) s += integrate(f, rc * i / pieces, rc * (i + 1) / pieces, rel, level);
  return s;
}

}  // namespace

double nn_normalization(int n, double z_nv, const ImplantProfile& p) {
  p.validate();
  return moment(n, 0, z_nv, p, 1e-11, 0);
}

Moments nn_mean_var(int n, double z_nv, const ImplantProfile& p) {
  require(n >= 1, ErrorCode::InvalidArgument, "n must be >= 1");
  p.validate();
  double m1 = moment(n, 1, z_nv, p, 1e-11, 0);
  double m2 = moment(n, 2, z_nv, p, 1e-11, 0);
  return {m1, m2 - m1 * m1};
}

Moments nn_mean_var_averaged(int n, const ImplantProfile& p) {
  require(n >= 1, ErrorCode::InvalidArgument, "n must be >= 1");
  p.validate();
  require(p.kind == ProfileKind::Gaussian, ErrorCode::InvalidArgument, "averaging needs a Gaussian profile");
  const double mu = p.mean_depth, sg = p.depth_sigma;
  auto g = [&](double z) { return std::exp(-(z - mu) * (z - mu) / (2 * sg * sg)) / (std::sqrt(2 * kPi) * sg); };
  // symmetric about mu: integrate z >= mu and double
  auto l_of = [&](double z) { return moment(n, 1, z, p, 1e-11, 1); };
  auto m2_of = [&](double z) { return moment(n, 2, z, p, 1e-11, 1); };
  double el = 2.0 * integrate([&](double z) { return l_of(z) * g(z); }, mu, mu + 6 * sg, 1e-10, 0);
  double em2 = 2.0 * integrate([&](double z) { return m2_of(z) * g(z); }, mu, mu + 6 * sg, 1e-10, 0);
  double mass = 2.0 * integrate(g, mu, mu + 6 * sg, 1e-12, 0);
  el /= mass;
  em2 /= mass;
  // E[V] + E[l^2] - E[l]^2 = E[r^2] - E[l]^2
  return {el, em2 - el * el};
}

double l_n_uniform_2d(int n, double q) {
  require(n >= 1 && q > 0.0, ErrorCode::InvalidArgument, "need n >= 1, q > 0");
  return std::exp(std::lgamma(n + 0.5) - std::lgamma(static_cast<double>(n))) / (std::sqrt(kPi) * std::sqrt(q));
}

double l_n_uniform_3d(int n, double q) {
  require(n >= 1 && q > 0.0, ErrorCode::InvalidArgument, "need n >= 1, q > 0");
  return std::cbrt(3.0 / (4.0 * kPi)) * std::exp(std::lgamma(n + 1.0 / 3.0) - std::lgamma(static_cast<double>(n))) /
         std::cbrt(q);
}

double std_n_uniform_2d(int n, double q) {
  double l = l_n_uniform_2d(n, q);
  return std::sqrt(n / (kPi * q) - l * l);
}

McMoments sample_nn_mc(int n, const ImplantProfile& p, std::optional<double> z_nv, int trials, std::uint64_t seed,
                       std::size_t max_spins) {
  require(n >= 1, ErrorCode::InvalidArgument, "n must be >= 1");
  require(trials >= 1000, ErrorCode::InvalidArgument, "sample_nn_mc needs at least 1000 trials");
  p.validate();
  require(p.kind != ProfileKind::Uniform3D, ErrorCode::InvalidArgument, "Monte Carlo supports layer profiles only");
  const bool gauss = p.kind == ProfileKind::Gaussian;
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, spins = 0;
  std::vector<double> best;
  for (int i = 0; i < trials; ++i) {
    rng::Stream rs(rng::derive_seed(seed, static_cast<std::uint64_t>(i)));
    double zn = z_nv ? *z_nv : (gauss ? p.mean_depth + p.depth_sigma * rs.normal() : 0.0);
    best.clear();
    double area = 0.0;
    std::size_t k = 0;
    // spins in order of lateral radius; stop once no later spin can enter the n nearest
    while (true) {
      area += rs.exponential() / p.q;
      double rho = std::sqrt(area / kPi);
      if (static_cast<int>(best.size()) == n && rho >= best.back()) break;
      if (++k > max_spins) {
        throw Error(ErrorCode::Truncation, "nearest-neighbour sampling exceeded the spin limit");
      }
      double z = gauss ? p.mean_depth + p.depth_sigma * rs.normal() : 0.0;
      double dz = z - zn;
      double r = std::sqrt(rho * rho + dz * dz);
      if (static_cast<int>(best.size()) < n) {
        best.insert(std::upper_bound(best.begin(), best.end(), r), r);
      } else if (r < best.back()) {
        best.pop_back();
        best.insert(std::upper_bound(best.begin(), best.end(), r), r);
      }
    }
    double x = best.back();
    s1 += x;
    s2 += x * x;
    s3 += x * x * x;
    s4 += x * x * x * x;
    spins += static_cast<double>(k);
  }
  const double N = trials;
  double m = s1 / N, e2 = s2 / N, e3 = s3 / N, e4 = s4 / N;
  double var = (e2 - m * m) * N / (N - 1);
  double mu4 = e4 - 4 * m * e3 + 6 * m * m * e2 - 3 * m * m * m * m;
  McMoments out;
  out.trials = trials;
  out.mean = m;
  out.std = std::sqrt(std::max(0.0, var));
  out.se_mean = out.std / std::sqrt(N);
  double var_var = (mu4 - var * var * (N - 3) / (N - 1)) / N;
  out.se_std = out.std > 0 ? std::sqrt(std::max(0.0, var_var)) / (2 * out.std) : 0.0;
  out.mean_spins_drawn = spins / N;
  return out;
}

}  // namespace darkspin::nn
