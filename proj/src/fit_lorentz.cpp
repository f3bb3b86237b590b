#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "darkspin/error.hpp"
#include "darkspin/fitting.hpp"
#include "darkspin/optimize.hpp"

namespace darkspin {

double lorentzian_sum(double f, double baseline, const std::vector<double>& centers, const std::vector<double>& widths,
                      const std::vector<double>& amps) {
  double y = baseline;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    double h = 0.5 * widths[k];
    double x = f - centers[k];
    y += amps[k] * h * h / (x * x + h * h);
  }
  return y;
}

namespace {

double median_of(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Largest |y - base| local extrema, separated by at least min_sep.
std::vector<double> scan_peaks(const DecayCurve& s, double base, int n, double min_sep) {
  std::vector<std::pair<double, double>> cand;
  const auto& f = s.t;
  const auto& y = s.y;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double v = std::abs(y[i] - base);
    bool left = i == 0 || v >= std::abs(y[i - 1] - base);
    bool right = i + 1 == y.size() || v >= std::abs(y[i + 1] - base);
    if (left && right) cand.emplace_back(v, f[i]);
  }
  std::sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.first > b.first; });
  std::vector<double> out;
  for (const auto& c : cand) {
    bool ok = std::all_of(out.begin(), out.end(), [&](double x) { return std::abs(x - c.second) >= min_sep; });
    if (ok) out.push_back(c.second);
    if (static_cast<int>(out.size()) == n) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

FitResult fit_lorentzians(const DecayCurve& spectrum, const LorentzianOptions& opt) {
  spectrum.validate();
  const int K = opt.n_peaks;
  require(K >= 1, ErrorCode::InvalidArgument, "n_peaks must be >= 1");
  const auto& fr = spectrum.t;
  const auto& y = spectrum.y;
  const int n = static_cast<int>(fr.size());
  require(n > 3 * K + 1, ErrorCode::InsufficientData, "spectrum has too few points for the requested peaks");
  double span = fr.back() - fr.front();
  double base = median_of(y);
  std::vector<double> c0 = opt.initial_centers;
  if (c0.empty()) c0 = scan_peaks(spectrum, base, K, span / (4.0 * K + 4.0));
  require(static_cast<int>(c0.size()) == K, ErrorCode::InvalidArgument,
          "could not find " + std::to_string(K) + " initial peak centers");
  std::sort(c0.begin(), c0.end());

  // symmetric groups: lo and hi follow mid -/+ spacing
  std::vector<int> role(K, 0);  // 0 free, 1 derived
  std::vector<int> group_of(K, -1);
  std::set<int> used;
  for (std::size_t g = 0; g < opt.symmetric_groups.size(); ++g) {
    const auto& grp = opt.symmetric_groups[g];
    for (int idx : grp) {
      require(idx >= 0 && idx < K && !used.count(idx), ErrorCode::InvalidArgument,
              "symmetric group indices must be distinct peak indices");
      used.insert(idx);
      group_of[idx] = static_cast<int>(g);
    }
    role[grp[0]] = 1;
    role[grp[2]] = 1;
  }

  // free vector layout: baseline, centers of free peaks, spacings, widths (1 or K), amplitudes (K)
  std::vector<std::string> names = {"baseline"};
  std::vector<double> p0 = {base};
  std::vector<int> center_slot(K, -1);
  for (int k = 0; k < K; ++k) {
    if (role[k] == 0) {
      center_slot[k] = static_cast<int>(p0.size());
      names.push_back("center_" + std::to_string(k + 1));
      p0.push_back(c0[k]);
    }
  }
  std::vector<int> spacing_slot;
  for (std::size_t g = 0; g < opt.symmetric_groups.size(); ++g) {
    const auto& grp = opt.symmetric_groups[g];
    spacing_slot.push_back(static_cast<int>(p0.size()));
    names.push_back("spacing_" + std::to_string(g + 1));
    p0.push_back(0.5 * (c0[grp[2]] - c0[grp[0]]));
  }
  const int width_slot = static_cast<int>(p0.size());
  double w0 = std::max(span / (10.0 * K), 3.0 * span / n);
  for (int k = 0; k < (opt.shared_width ? 1 : K); ++k) {
    names.push_back(opt.shared_width ? "width" : "width_" + std::to_string(k + 1));
    p0.push_back(std::log(w0));
  }
  const int amp_slot = static_cast<int>(p0.size());
  for (int k = 0; k < K; ++k) {
    names.push_back("amplitude_" + std::to_string(k + 1));
    auto it = std::min_element(fr.begin(), fr.end(), [&](double a, double b) { return std::abs(a - c0[k]) < std::abs(b - c0[k]); });
    p0.push_back(y[it - fr.begin()] - base);
  }
  const int P = static_cast<int>(p0.size());

  auto centers_of = [&](const Eigen::VectorXd& p) {
    std::vector<double> c(K);
    for (int k = 0; k < K; ++k) {
      if (role[k] == 0) c[k] = p[center_slot[k]];
    }
    for (std::size_t g = 0; g < opt.symmetric_groups.size(); ++g) {
      const auto& grp = opt.symmetric_groups[g];
      double mid = p[center_slot[grp[1]]], s = p[spacing_slot[g]];
      c[grp[0]] = mid - s;
      c[grp[2]] = mid + s;
    }
    return c;
  };
  auto eval = [&](const Eigen::VectorXd& p, double f) {
    auto c = centers_of(p);
    std::vector<double> w(K), a(K);
    for (int k = 0; k < K; ++k) {
      w[k] = std::exp(p[width_slot + (opt.shared_width ? 0 : k)]);
      a[k] = p[amp_slot + k];
    }
    return lorentzian_sum(f, p[0], c, w, a);
  };
  std::vector<double> inv(n, 1.0);
  if (spectrum.has_errors()) {
    for (int i = 0; i < n; ++i) inv[i] = 1.0 / spectrum.y_err[i];
  }
  opt::ResidualFn res = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (int i = 0; i < n; ++i) r[i] = (y[i] - eval(p, fr[i])) * inv[i];
  };
  Eigen::VectorXd start = Eigen::Map<Eigen::VectorXd>(p0.data(), P);
  opt::LsqResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (double ws : {1.0, 0.3, 3.0}) {
    Eigen::VectorXd s = start;
    for (int k = 0; k < (opt.shared_width ? 1 : K); ++k) s[width_slot + k] += std::log(ws);
    auto r = opt::least_squares(res, n, s);
    if (r.cost < best.cost) best = r;
  }
  require(std::isfinite(best.cost), ErrorCode::NonConvergence, "Lorentzian fit diverged");

  // covariance in the free layout, then map widths out of log space and add derived centers
  Eigen::MatrixXd J = -opt::jacobian(res, n, best.p, 1e-7, 1e-9);
  auto cod = (J.transpose() * J).completeOrthogonalDecomposition();
  double s2 = spectrum.has_errors() ? 1.0 : best.cost / std::max(1, n - P);
  Eigen::MatrixXd cov = cod.pseudoInverse() * s2;

  // reported = baseline, center_1..K, spacing_g, widths, amplitudes
  FitResult out;
  out.model = "lorentzians";
  out.n_points = n;
  out.residual = best.cost;
  out.iterations = best.iterations;
  std::vector<Eigen::VectorXd> rows;  // gradient of each reported quantity w.r.t. free params
  auto add = [&](const std::string& nm, double v, const Eigen::VectorXd& g) {
    out.names.push_back(nm);
    out.values.push_back(v);
    rows.push_back(g);
  };
  Eigen::VectorXd e = Eigen::VectorXd::Zero(P);
  auto unit = [&](int i) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(P);
    g[i] = 1.0;
    return g;
  };
  add("baseline", best.p[0], unit(0));
  auto c = centers_of(best.p);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd g = e;
    if (role[k] == 0) {
      g = unit(center_slot[k]);
    } else {
      int gi = group_of[k];
      const auto& grp = opt.symmetric_groups[gi];
      g[center_slot[grp[1]]] = 1.0;
      g[spacing_slot[gi]] = k == grp[0] ? -1.0 : 1.0;
    }
    add("center_" + std::to_string(k + 1), c[k], g);
  }
  for (std::size_t g = 0; g < spacing_slot.size(); ++g) add("spacing_" + std::to_string(g + 1), best.p[spacing_slot[g]], unit(spacing_slot[g]));
  for (int k = 0; k < (opt.shared_width ? 1 : K); ++k) {
    double w = std::exp(best.p[width_slot + k]);
    add(opt.shared_width ? "width" : "width_" + std::to_string(k + 1), w, unit(width_slot + k) * w);
  }
  for (int k = 0; k < K; ++k) add("amplitude_" + std::to_string(k + 1), best.p[amp_slot + k], unit(amp_slot + k));
  for (const auto& g : rows) out.errors.push_back(std::sqrt(std::max(0.0, g.dot(cov * g))));
  out.gn_errors = out.errors;

  Eigen::VectorXd r(n);
  res(best.p, r);
  Eigen::VectorXd grad = 2.0 * J.transpose() * r;
  double dec = 0.25 * grad.dot(cod.solve(grad));
  out.converged = best.converged && dec <= 1e-6 * best.cost + 1e-20;
  out.gradient_norm = grad.cwiseAbs().maxCoeff();
  if (cod.rank() < P) out.warnings.push_back("singular normal matrix: some peaks are unidentifiable");
  // unresolved neighbours
  for (int a = 0; a < K; ++a) {
    for (int b = a + 1; b < K; ++b) {
      const auto& ga = rows[1 + a];
      const auto& gb = rows[1 + b];
      double vab = ga.dot(cov * gb), va = ga.dot(cov * ga), vb = gb.dot(cov * gb);
      double wa = out.values[out.index(opt.shared_width ? "width" : "width_" + std::to_string(a + 1))];
      bool close = std::abs(c[a] - c[b]) < 0.5 * wa;
      if ((va > 0 && vb > 0 && std::abs(vab) / std::sqrt(va * vb) > 0.9) || close) {
        out.warnings.push_back("peaks " + std::to_string(a + 1) + " and " + std::to_string(b + 1) +
                               " are not spectrally resolved");
      }
    }
  }
  return out;
}

}  // namespace darkspin
