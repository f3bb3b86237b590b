#include <cmath>
#include <random>

#include "darkspin/core.hpp"
#include "darkspin/error.hpp"
#include "darkspin/kernels.hpp"
#include "darkspin/lindblad.hpp"
#include "doctest.h"

using namespace darkspin;
using namespace darkspin::lindblad;

namespace {

SpinRegister random_state(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Mat4 a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cd(n01(rng), n01(rng));
  Mat4 rho = a * a.adjoint();
  return SpinRegister(rho / rho.trace());
}

double channel(const KernelParams& p, const NvRelaxation& nv, const AcDrive& d, double tau, double t, bool pi,
               FinalPhase ph) {
  return run_t1_sequence(p, nv, d, tau, t, pi, ph);
}

}  // namespace

TEST_CASE("free evolution without generator is the identity") {
  auto reg = random_state(1);
  Mat4 before = reg.rho();
  propagate(reg, Generator{}, 0.0, 3.7);
  CHECK((reg.rho() - before).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("electron depolarization decays its polarization exponentially") {
  SpinRegister reg(on_spin(Spin::Electron, Mat2::Identity() + pauli('z')) / 4.0);
  Generator g;
  g.rates.gamma_e1 = 0.3;
  for (double t : {0.5, 2.0, 6.0}) {
    SpinRegister r = reg;
    propagate(r, g, 0.0, t);
    CHECK(r.sz_e() == doctest::Approx(std::exp(-0.3 * t)).epsilon(1e-12));
  }
}

TEST_CASE("exponential and RK4 integrators agree") {
  Generator g;
  g.v_dd = 2.1;
  g.rates = {0.05, 0.1, 0.4, 0.2};
  auto a = random_state(5), b = a;
  PropagateOptions rk;
  rk.integrator = Integrator::Rk4;
  rk.rk4_change_tol = 1e-11;
  propagate(a, g, 0.0, 2.5);
  propagate(b, g, 0.0, 2.5, rk);
  CHECK((a.rho() - b.rho()).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("echo and deer oracle limits") {
  for (double t : {0.5, 3.0, 11.0}) {
    CHECK(run_echo({1.3, 0.0, 0.0, t}) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(run_deer({0.0, 0.7, 0.3, t}) == doctest::Approx(run_echo({0.0, 0.7, 0.3, t})).epsilon(1e-12));
  }
}

TEST_CASE("both signals ignore electron dephasing") {
  for (double g2 : {0.0, 0.5, 3.0}) {
    KernelParams p{2.0, 0.3, g2, 1.7};
    CHECK(run_deer(p) == doctest::Approx(f_deer(p)).epsilon(1e-8));
    CHECK(run_echo(p) == doctest::Approx(f_echo(p)).epsilon(1e-8));
  }
}

TEST_CASE("density matrix stays physical through a sequence") {
  Generator g;
  g.v_dd = 3.0;
  g.rates = {0.2, 0.3, 0.5, 0.1};
  auto seq = t1_sequence(1.0, 2.0, true, FinalPhase::PlusY);
  SpinRegister reg = SpinRegister::polarized_nv_mixed_electron();
  for (const auto& s : seq.steps) {
    PulseSequence one{{s}};
    reg = run_sequence(one, g, reg);
    CHECK(reg.min_eigenvalue() >= -1e-10);
    CHECK(reg.rho().trace().real() == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("t1 channels against the closed form") {
  KernelParams p{kTwoPi * 0.2, 0.05, 0.0, 1.1};
  NvRelaxation nv{0.01, 0.02};
  AcDrive off;
  for (double tau : {0.0, 0.7, 4.0}) {
    double diff = channel(p, nv, off, tau, p.t, true, FinalPhase::PlusY) - channel(p, nv, off, tau, p.t, false, FinalPhase::PlusY);
    CHECK(diff == doctest::Approx(2.0 * t1_sequence_signal(p, nv, tau, p.t)).epsilon(1e-8));
  }
  // no relaxation, no drive: pure pulse algebra
  KernelParams q{1.4, 0.0, 0.0, 0.9};
  double d0 = channel(q, {}, off, 0.0, q.t, true, FinalPhase::PlusY) - channel(q, {}, off, 0.0, q.t, false, FinalPhase::PlusY);
  CHECK(d0 == doctest::Approx(2.0 * std::pow(std::sin(q.v_dd * q.t / 2), 2)).epsilon(1e-10));
}

TEST_CASE("driven t1 channels: common offset cancels, echo filter factor remains") {
  KernelParams p{kTwoPi * 0.2, 0.05, 0.0, 1.3};
  NvRelaxation nv{0.01, 0.0};
  const double tau = 0.8;
  for (double chi : {0.0, M_PI / 3}) {
    AcDrive d{0.6, 2.3, chi};
    double ypi = channel(p, nv, d, tau, p.t, true, FinalPhase::PlusY), y0 = channel(p, nv, d, tau, p.t, false, FinalPhase::PlusY);
    double psi1 = ac_echo_phase(d, 0.0, p.t), psi2 = ac_echo_phase(d, p.t + tau, p.t);
    CHECK(ypi - y0 == doctest::Approx(2.0 * t1_sequence_signal(p, nv, tau, p.t) * std::cos(psi1) * std::cos(psi2)).epsilon(1e-6));
  }
}

TEST_CASE("invalid sequences and drives are rejected") {
  PulseSequence bad{{FreeEvolution{-1.0}}};
  CHECK_THROWS_AS(run_sequence(bad, Generator{}, SpinRegister{}), Error);
  AcDrive d{-1.0, 1.0, 0.0};
  CHECK_THROWS_AS(d.validate(), Error);
  Generator g;
  g.drive = {0.5, 1.0, 0.0};
  PropagateOptions exp_only;
  exp_only.integrator = Integrator::Exponential;
  SpinRegister r;
  CHECK_THROWS_AS(propagate(r, g, 0.0, 1.0, exp_only), Error);
}
