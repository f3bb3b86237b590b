#include "darkspin/bathavg.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "darkspin/error.hpp"
#include "gap_inline.hpp"

namespace darkspin {

const char* dimensionality_name(Dimensionality d) { return d == Dimensionality::Plane2D ? "2D" : "3D"; }

void BathParams::validate() const {
  require(std::isfinite(density) && density >= 0.0, ErrorCode::InvalidArgument, "density must be >= 0");
  require(std::isfinite(gamma_e) && gamma_e >= 0.0, ErrorCode::InvalidArgument, "gamma_e must be >= 0");
  require(std::isfinite(depth) && depth > 0.0, ErrorCode::InvalidArgument, "depth must be > 0");
  require(flip_fraction >= 0.0 && flip_fraction <= 1.0, ErrorCode::InvalidArgument,
          "flip_fraction must lie in [0, 1]");
  validate_axis(axis);
}

double BathParams::density_internal() const {
  return dim == Dimensionality::Plane2D ? units::per_um2_to_per_nm2(density) : units::per_um3_to_per_nm3(density);
}

namespace {

struct GslInit {
  GslInit() { gsl_set_error_handler_off(); }
};
const GslInit gsl_init;

struct Workspace {
  gsl_integration_workspace* w;
  explicit Workspace(std::size_t n) : w(gsl_integration_workspace_alloc(n)) {}
  ~Workspace() { gsl_integration_workspace_free(w); }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

gsl_integration_workspace* workspace(int level, std::size_t n) {
  thread_local std::unique_ptr<Workspace> ws[2];
  thread_local std::size_t size[2] = {0, 0};
  if (!ws[level] || size[level] < n) {
    ws[level] = std::make_unique<Workspace>(n);
    size[level] = n;
  }
  return ws[level]->w;
}

// cos(pi k / N) on [0, pi]: base level and odd refinements, cached per thread.
const std::vector<double>& cos_base(int n) {
  thread_local std::unordered_map<int, std::vector<double>> cache;
  auto& v = cache[n];
  if (v.empty()) {
    v.resize(n + 1);
    for (int k = 0; k <= n; ++k) v[k] = std::cos(kPi * k / n);
  }
  return v;
}

const std::vector<double>& cos_odd(int n2) {
  thread_local std::unordered_map<int, std::vector<double>> cache;
  auto& v = cache[n2];
  if (v.empty()) {
    v.resize(n2 / 2);
    for (int j = 0; j < n2 / 2; ++j) v[j] = std::cos(kPi * (2 * j + 1) / n2);
  }
  return v;
}

int next_pow2(double x) {
  int n = 1;
  while (n < x && n < (1 << 30)) n <<= 1;
  return n;
}

struct Ctx {
  double T = 0, G = 0, e4 = 1;
  double sb = 0, cb = 1;
  const WOptions* opt = nullptr;
  std::exception_ptr err;
  double inner_mu_w = 0;  // 3D: current w for the mu integral
};

// Integral over phi in [0, 2pi) of gap(amp (1 - 3 (a cos phi + b)^2)).
double azimuth(const Ctx& c, double amp, double a, double b) {
  auto f = [&](double cp) {
    double q = a * cp + b;
    return detail::gap_scaled(amp * (1.0 - 3.0 * q * q), c.G, c.e4);
  };
  double kmax = 3.0 * std::abs(amp) * std::abs(a) * (std::abs(a) + std::abs(b));
  int n = next_pow2(std::max(c.opt->min_azimuth / 2.0, 0.65 * kmax + 32.0));
  const auto& base = cos_base(n);
  double sum = 0.5 * (f(base[0]) + f(base[n]));
  for (int k = 1; k < n; ++k) sum += f(base[k]);
  double prev = 2.0 * kPi / n * sum;
  while (true) {
    int n2 = 2 * n;
    if (n2 > c.opt->max_azimuth / 2) {
      throw IntegrationError("azimuthal refinement limit reached", prev, std::abs(prev));
    }
    const auto& odd = cos_odd(n2);
    for (double cp : odd) sum += f(cp);
    double cur = 2.0 * kPi / n2 * sum;
    if (std::abs(cur - prev) <= 0.1 * c.opt->rel_tol * std::abs(cur) || cur == 0.0) return cur;
    prev = cur;
    n = n2;
  }
}

double qag(double (*fn)(double, void*), Ctx& c, double lo, double hi, int level) {
  if (!(hi > lo)) return 0.0;
  gsl_function F{fn, &c};
  double result = 0, abserr = 0;
  auto n = static_cast<std::size_t>(c.opt->max_subintervals);
  int rc = gsl_integration_qag(&F, lo, hi, 0.0, c.opt->rel_tol, n, GSL_INTEG_GAUSS21, workspace(level, n), &result,
                               &abserr);
  if (c.err) std::rethrow_exception(c.err);
  if (rc != GSL_SUCCESS && !(abserr <= 100.0 * c.opt->rel_tol * std::abs(result))) {
    throw IntegrationError(std::string("W quadrature did not converge: ") + gsl_strerror(rc), result, abserr);
  }
  return result;
}

// 2D: dA = w^-3 dw dphi with w = d/r.
double radial2d(double w, void* p) {
  auto& c = *static_cast<Ctx*>(p);
  if (c.err || w <= 0.0) return 0.0;
  try {
    double amp = c.T * w * w * w;
    double a = std::sqrt(std::max(0.0, 1.0 - w * w)) * c.sb;
    double b = w * c.cb;
    return azimuth(c, amp, a, b) / (w * w * w);
  } catch (...) {
    c.err = std::current_exception();
    return 0.0;
  }
}

// 3D: inner integral over mu = cos(polar) in [w, 1] at fixed w.
double polar3d(double mu, void* p) {
  auto& c = *static_cast<Ctx*>(p);
  if (c.err) return 0.0;
  try {
    double w = c.inner_mu_w;
    double amp = c.T * w * w * w;
    double a = std::sqrt(std::max(0.0, 1.0 - mu * mu)) * c.sb;
    double b = mu * c.cb;
    return azimuth(c, amp, a, b);
  } catch (...) {
    c.err = std::current_exception();
    return 0.0;
  }
}

// dV = w^-4 dw dOmega
double radial3d(double w, void* p) {
  auto& c = *static_cast<Ctx*>(p);
  if (c.err || w <= 0.0) return 0.0;
  try {
    c.inner_mu_w = w;
    double v = qag(polar3d, c, w, 1.0, 1);
    double w2 = w * w;
    return v / (w2 * w2);
  } catch (...) {
    c.err = std::current_exception();
    return 0.0;
  }
}

// Dimensionless W with d = 1.
double w_hat(double T, double G, Dimensionality dim, const Vec3& axis, double rin, double rout, const WOptions& opt) {
  Ctx c;
  c.T = T;
  c.G = G;
  c.e4 = std::exp(-G / 4.0);
  c.sb = std::hypot(axis[0], axis[1]);
  c.cb = std::abs(axis[2]);
  c.opt = &opt;
  if (dim == Dimensionality::Plane2D) {
    double hi = 1.0 / std::sqrt(1.0 + rin * rin);
    double lo = std::isinf(rout) ? 0.0 : 1.0 / std::sqrt(1.0 + rout * rout);
    return qag(radial2d, c, lo, hi, 0);
  }
  double hi = 1.0 / std::max(1.0, rin);
  double lo = std::isinf(rout) ? 0.0 : 1.0 / rout;
  return qag(radial3d, c, lo, hi, 0);
}

struct Key {
  long long g, d, t, ax, ay, az, rin, rout, tol;
  int dim;
  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const {
    std::size_t h = 1469598103934665603ull;
    for (long long v : {k.g, k.d, k.t, k.ax, k.ay, k.az, k.rin, k.rout, k.tol, static_cast<long long>(k.dim)}) {
      h ^= std::hash<long long>{}(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

constexpr double kQuantum = 1e-9;
constexpr std::size_t kMemoCap = 1u << 20;

long long quant(double x) {
  if (std::isinf(x)) return -1;
  return std::llround(x / kQuantum);
}

std::mutex memo_mutex;
std::unordered_map<Key, double, KeyHash>& memo() {
  static std::unordered_map<Key, double, KeyHash> m;
  return m;
}

}  // namespace

void clear_w_memo() {
  std::lock_guard<std::mutex> lk(memo_mutex);
  memo().clear();
}

std::size_t w_memo_size() {
  std::lock_guard<std::mutex> lk(memo_mutex);
  return memo().size();
}

double w_integral(double gamma_mhz, double d_nm, double t_us, Dimensionality dim, const Vec3& axis,
                  const WOptions& opt) {
  require(std::isfinite(gamma_mhz) && gamma_mhz >= 0.0, ErrorCode::InvalidArgument, "gamma must be >= 0");
  require(std::isfinite(d_nm) && d_nm > 0.0, ErrorCode::InvalidArgument, "depth must be > 0");
  require(std::isfinite(t_us) && t_us >= 0.0, ErrorCode::InvalidArgument, "t must be >= 0");
  require(opt.rel_tol > 0.0 && opt.rel_tol < 1.0, ErrorCode::InvalidArgument, "rel_tol must lie in (0, 1)");
  require(opt.inner_cutoff_nm >= 0.0 && opt.outer_cutoff_nm > opt.inner_cutoff_nm, ErrorCode::InvalidArgument,
          "cutoffs must satisfy 0 <= inner < outer");
  validate_axis(axis);

  Key key{quant(units::rate_mhz_to_per_us(gamma_mhz)),
          quant(d_nm),
          quant(t_us),
          quant(axis[0]),
          quant(axis[1]),
          quant(axis[2]),
          quant(opt.inner_cutoff_nm),
          quant(opt.outer_cutoff_nm),
          quant(opt.rel_tol),
          static_cast<int>(dim)};
  if (key.t == 0) return 0.0;
  if (opt.memoize) {
    std::lock_guard<std::mutex> lk(memo_mutex);
    auto it = memo().find(key);
    if (it != memo().end()) return it->second;
  }
  double g = key.g * kQuantum;
  double d = key.d * kQuantum;
  double t = key.t * kQuantum;
  require(d > 0.0, ErrorCode::InvalidArgument, "depth below quantization step");
  double T = default_constants().dipolar_prefactor() * t / (d * d * d);
  double rin = opt.inner_cutoff_nm / d;
  double rout = opt.outer_cutoff_nm / d;
  double scale = dim == Dimensionality::Plane2D ? d * d : d * d * d;
  double w = scale * w_hat(T, g * t, dim, axis, rin, rout, opt);
  if (w > 0.0) w = 0.0;
  if (opt.memoize) {
    std::lock_guard<std::mutex> lk(memo_mutex);
    if (memo().size() >= kMemoCap) memo().clear();
    memo().emplace(key, w);
  }
  return w;
}

std::vector<double> w_curve(double gamma_mhz, double d_nm, const std::vector<double>& ts, Dimensionality dim,
                            const Vec3& axis, const WOptions& opt) {
  std::vector<double> out(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) out[i] = w_integral(gamma_mhz, d_nm, ts[i], dim, axis, opt);
  return out;
}

double fid(const BathParams& bath, double t_us, const WOptions& opt) {
  bath.validate();
  double s = bath.density_internal() * bath.flip_fraction;
  if (s == 0.0) return 1.0;
  return std::exp(s * w_integral(bath.gamma_e, bath.depth, t_us, bath.dim, bath.axis, opt));
}

DecayCurve fid_curve(const BathParams& bath, const std::vector<double>& ts, const WOptions& opt) {
  DecayCurve c;
  c.t = ts;
  c.y.reserve(ts.size());
  for (double t : ts) c.y.push_back(fid(bath, t, opt));
  return c;
}

double tail_bound(const BathParams& bath, double t_us, double r) {
  double pt = default_constants().dipolar_prefactor() * t_us;
  double s = bath.density_internal() * bath.flip_fraction;
  if (bath.dim == Dimensionality::Plane2D) return s * kPi * pt * pt / (4.0 * r * r * r * r);
  return s * kPi * pt * pt / (3.0 * r * r * r);
}

}  // namespace darkspin
