#include "darkspin/lindblad.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

#include "darkspin/core.hpp"
#include "darkspin/error.hpp"

namespace darkspin::lindblad {

namespace {

const cd I(0.0, 1.0);

Mat4 kron(const Mat2& a, const Mat2& b) { return Eigen::kroneckerProduct(a, b).eval(); }

Vec16 vec(const Mat4& m) { return Eigen::Map<const Vec16>(m.data()); }

Mat4 unvec(const Vec16& v) {
  Mat4 m;
  Eigen::Map<Vec16>(m.data()) = v;
  return m;
}

// Column-stacking: vec(A X B) = (B^T kron A) vec(X).
Super commutator_super(const Mat4& h) {
  Mat4 id = Mat4::Identity();
  return -I * (Eigen::kroneckerProduct(id, h) - Eigen::kroneckerProduct(h.transpose(), id)).eval();
}

Super dissipator_super(const Mat4& a) {
  Mat4 id = Mat4::Identity();
  Mat4 ada = a.adjoint() * a;
  Super s = Eigen::kroneckerProduct(a.conjugate(), a);
  s -= 0.5 * Eigen::kroneckerProduct(id, ada);
  s -= 0.5 * Eigen::kroneckerProduct(ada.transpose(), id);
  return s;
}

Mat2 sigma_plus() {
  Mat2 m = Mat2::Zero();
  m(0, 1) = 1.0;
  return m;
}

Mat2 sigma_minus() {
  Mat2 m = Mat2::Zero();
  m(1, 0) = 1.0;
  return m;
}

Mat2 rotation(double angle, double phase) {
  Mat2 n = std::cos(phase) * pauli('x') + std::sin(phase) * pauli('y');
  return std::cos(angle / 2.0) * Mat2::Identity() - I * std::sin(angle / 2.0) * n;
}

void rk4_segment(Vec16& v, const Super& l0, const Super& lb, const AcDrive& d, double t0, double dt,
                 int steps) {
  double h = dt / steps;
  auto f = [&](double tt, const Vec16& x) -> Vec16 {
    return l0 * x + std::sin(d.omega * tt + d.chi) * (lb * x);
  };
  for (int k = 0; k < steps; ++k) {
    double tt = t0 + k * h;
    Vec16 k1 = f(tt, v);
    Vec16 k2 = f(tt + h / 2.0, v + h / 2.0 * k1);
    Vec16 k3 = f(tt + h / 2.0, v + h / 2.0 * k2);
    Vec16 k4 = f(tt + h, v + h * k3);
    v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
}

}  // namespace

void AcDrive::validate() const {
  require(std::isfinite(amplitude) && amplitude >= 0.0, ErrorCode::InvalidArgument,
          "drive amplitude must be non-negative");
  require(std::isfinite(omega) && std::isfinite(chi), ErrorCode::InvalidArgument, "drive must be finite");
}

double Rates::max_rate() const { return std::max({gamma_v1, gamma_v2, gamma_e1, gamma_e2}); }

const Mat2& pauli(char which) {
  static const Mat2 id = Mat2::Identity();
  static const Mat2 x = (Mat2() << 0, 1, 1, 0).finished();
  static const Mat2 y = (Mat2() << 0, -I, I, 0).finished();
  static const Mat2 z = (Mat2() << 1, 0, 0, -1).finished();
  switch (which) {
    case 'x': return x;
    case 'y': return y;
    case 'z': return z;
    default: return id;
  }
}

Mat4 on_spin(Spin s, const Mat2& op) {
  return s == Spin::Nv ? kron(op, Mat2::Identity()) : kron(Mat2::Identity(), op);
}

SpinRegister::SpinRegister() : rho_(Mat4::Identity() / 4.0) {}

SpinRegister SpinRegister::polarized_nv_mixed_electron() {
  return SpinRegister(kron(Mat2::Identity() + pauli('z'), Mat2::Identity()) / 4.0);
}

double SpinRegister::expect(const Mat4& op) const { return (op * rho_).trace().real(); }
double SpinRegister::sz_nv() const { return expect(on_spin(Spin::Nv, pauli('z'))); }
double SpinRegister::sz_e() const { return expect(on_spin(Spin::Electron, pauli('z'))); }

double SpinRegister::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Mat4> es((rho_ + rho_.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void SpinRegister::check() const {
  double herm = (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12) throw Error(ErrorCode::Internal, "density matrix lost hermiticity");
  double tr = rho_.trace().real();
  if (std::abs(tr - 1.0) > 1e-8) throw Error(ErrorCode::Internal, "trace drift beyond 1e-8");
  if (min_eigenvalue() < -1e-10) throw Error(ErrorCode::Internal, "negative density-matrix eigenvalue");
}

void PulseSequence::validate() const {
  for (const auto& s : steps) {
    if (auto* p = std::get_if<Pulse>(&s)) {
      require(std::isfinite(p->angle) && std::isfinite(p->phase), ErrorCode::InvalidArgument,
              "pulse angle must be finite");
    } else if (auto* f = std::get_if<FreeEvolution>(&s)) {
      require(std::isfinite(f->duration) && f->duration >= 0.0, ErrorCode::InvalidArgument,
              "durations must be non-negative");
    }
  }
}

Super superoperator(const Generator& g) {
  Mat4 h = g.v_dd / 4.0 * kron(pauli('z'), pauli('z'));
  Super l = commutator_super(h);
  const auto& r = g.rates;
  if (r.gamma_v1 > 0) {
    l += r.gamma_v1 / 2.0 * (dissipator_super(on_spin(Spin::Nv, sigma_plus())) +
                             dissipator_super(on_spin(Spin::Nv, sigma_minus())));
  }
  if (r.gamma_v2 > 0) l += r.gamma_v2 / 2.0 * dissipator_super(on_spin(Spin::Nv, pauli('z')));
  if (r.gamma_e1 > 0) {
    l += r.gamma_e1 / 2.0 * (dissipator_super(on_spin(Spin::Electron, sigma_plus())) +
                             dissipator_super(on_spin(Spin::Electron, sigma_minus())));
  }
  if (r.gamma_e2 > 0) l += r.gamma_e2 / 2.0 * dissipator_super(on_spin(Spin::Electron, pauli('z')));
  return l;
}

Super drive_superoperator(double amplitude) {
  return commutator_super(amplitude / 2.0 * on_spin(Spin::Nv, pauli('z')));
}

void propagate(SpinRegister& reg, const Generator& g, double t_start, double dt, const PropagateOptions& opt) {
  require(std::isfinite(dt) && dt >= 0.0, ErrorCode::InvalidArgument, "dt must be non-negative");
  g.drive.validate();
  if (dt == 0.0) return;
  Super l0 = superoperator(g);
  Vec16 v = vec(reg.rho());
  bool driven = g.drive.active();
  Integrator mode = opt.integrator;
  if (mode == Integrator::Auto) mode = driven ? Integrator::Rk4 : Integrator::Exponential;
  require(!(driven && mode == Integrator::Exponential), ErrorCode::InvalidArgument,
          "time-dependent drive needs the RK4 integrator");

  if (mode == Integrator::Exponential) {
    Super m = (l0 * dt).exp();
    v = m * v;
  } else {
    Super lb = driven ? drive_superoperator(g.drive.amplitude) : Super::Zero();
    double rate = std::max({std::abs(g.v_dd), g.rates.max_rate(), g.drive.amplitude});
    double h = rate > 0 ? 0.01 / rate : dt;
    if (driven && g.drive.omega != 0.0) h = std::min(h, kTwoPi / (50.0 * std::abs(g.drive.omega)));
    int steps = std::max(1, static_cast<int>(std::ceil(dt / h)));
    Vec16 coarse = v;
    rk4_segment(coarse, l0, lb, g.drive, t_start, dt, steps);
    bool ok = false;
    for (int k = 0; k < opt.max_halvings; ++k) {
      steps *= 2;
      Vec16 fine = v;
      rk4_segment(fine, l0, lb, g.drive, t_start, dt, steps);
      double change = (fine - coarse).cwiseAbs().maxCoeff();
      coarse = fine;
      if (change < opt.rk4_change_tol) {
        ok = true;
        break;
      }
    }
    if (!ok) throw Error(ErrorCode::NonConvergence, "RK4 step halving did not settle");
    v = coarse;
  }
  reg.rho() = unvec(v);
  reg.check();
}

void apply_pulse(SpinRegister& reg, const Pulse& p) {
  Mat4 u = on_spin(p.target, rotation(p.angle, p.phase));
  reg.rho() = u * reg.rho() * u.adjoint();
}

SpinRegister run_sequence(const PulseSequence& seq, const Generator& g, SpinRegister reg,
                          const PropagateOptions& opt) {
  seq.validate();
  double clock = 0.0;
  Mat4 z = on_spin(Spin::Nv, pauli('z'));
  for (const auto& s : seq.steps) {
    if (auto* p = std::get_if<Pulse>(&s)) {
      apply_pulse(reg, *p);
    } else if (auto* f = std::get_if<FreeEvolution>(&s)) {
      propagate(reg, g, clock, f->duration, opt);
      clock += f->duration;
    } else {
      reg.rho() = 0.5 * (reg.rho() + z * reg.rho() * z);
    }
  }
  reg.check();
  return reg;
}

namespace {

void probe_segment(std::vector<Step>& s, double t, double final_phase) {
  s.push_back(Pulse{Spin::Nv, kPi / 2.0, 0.0});
  s.push_back(FreeEvolution{t / 2.0});
  s.push_back(Pulse{Spin::Nv, kPi, kPi / 2.0});
  s.push_back(Pulse{Spin::Electron, kPi, 0.0});
  s.push_back(FreeEvolution{t / 2.0});
  s.push_back(Pulse{Spin::Nv, kPi / 2.0, final_phase});
}

double run_hahn(const KernelParams& p, bool electron_pi, const PropagateOptions& opt) {
  p.validate();
  PulseSequence seq;
  seq.steps.push_back(Pulse{Spin::Nv, kPi / 2.0, 0.0});
  seq.steps.push_back(FreeEvolution{p.t / 2.0});
  seq.steps.push_back(Pulse{Spin::Nv, kPi, kPi / 2.0});
  if (electron_pi) seq.steps.push_back(Pulse{Spin::Electron, kPi, 0.0});
  seq.steps.push_back(FreeEvolution{p.t / 2.0});
  // Final pulse about -x so the undisturbed echo reads +1.
  seq.steps.push_back(Pulse{Spin::Nv, kPi / 2.0, kPi});
  Generator g;
  g.v_dd = p.v_dd;
  g.rates.gamma_e1 = p.gamma_e1;
  g.rates.gamma_e2 = p.gamma_e2;
  return run_sequence(seq, g, SpinRegister::polarized_nv_mixed_electron(), opt).sz_nv();
}

}  // namespace

double run_deer(const KernelParams& p, const PropagateOptions& opt) { return run_hahn(p, true, opt); }
double run_echo(const KernelParams& p, const PropagateOptions& opt) { return run_hahn(p, false, opt); }

PulseSequence t1_sequence(double tau, double t, bool with_pi, FinalPhase final_phase, bool dephase_storage) {
  PulseSequence seq;
  auto& s = seq.steps;
  probe_segment(s, t, kPi / 2.0);
  if (dephase_storage) s.push_back(NvDephase{});
  s.push_back(FreeEvolution{tau / 2.0});
  if (with_pi) s.push_back(Pulse{Spin::Electron, kPi, 0.0});
  s.push_back(FreeEvolution{tau / 2.0});
  probe_segment(s, t, final_phase == FinalPhase::PlusY ? kPi / 2.0 : -kPi / 2.0);
  return seq;
}

double run_t1_sequence(const KernelParams& p, const NvRelaxation& nv, const AcDrive& drive, double tau, double t,
                       bool with_pi, FinalPhase final_phase, const T1SequenceOptions& opt) {
  p.validate();
  nv.validate();
  drive.validate();
  require(std::isfinite(tau) && tau >= 0 && std::isfinite(t) && t >= 0, ErrorCode::InvalidArgument,
          "tau and t must be non-negative");
  Generator g;
  g.v_dd = p.v_dd;
  g.rates = {nv.gamma_v1, nv.gamma_v2, p.gamma_e1, p.gamma_e2};
  g.drive = drive;
  auto seq = t1_sequence(tau, t, with_pi, final_phase, opt.dephase_storage);
  return run_sequence(seq, g, SpinRegister::polarized_nv_mixed_electron(), opt.propagate).sz_nv();
}

double ac_echo_phase(const AcDrive& d, double t0, double t) {
  if (!d.active()) return 0.0;
  auto integral = [&](double a, double b) {
    if (d.omega == 0.0) return std::sin(d.chi) * (b - a);
    return (std::cos(d.omega * a + d.chi) - std::cos(d.omega * b + d.chi)) / d.omega;
  };
  double mid = t0 + t / 2.0;
  return d.amplitude * (integral(mid, t0 + t) - integral(t0, mid));
}

}  // namespace darkspin::lindblad
