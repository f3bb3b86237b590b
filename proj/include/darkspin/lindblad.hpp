#pragma once

#include <Eigen/Dense>
#include <complex>
#include <variant>
#include <vector>

#include "darkspin/kernels.hpp"

namespace darkspin::lindblad {

using cd = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Super = Eigen::Matrix<cd, 16, 16>;
using Vec16 = Eigen::Matrix<cd, 16, 1>;

enum class Spin { Nv, Electron };

// Classical surrogate field (B/2) sin(w t + chi) sigma_z on the NV. Rad/us.
struct AcDrive {
  double amplitude = 0.0;
  double omega = 0.0;
  double chi = 0.0;

  bool active() const { return amplitude != 0.0; }
  void validate() const;
};

struct Rates {
  double gamma_v1 = 0.0;
  double gamma_v2 = 0.0;
  double gamma_e1 = 0.0;
  double gamma_e2 = 0.0;

  double max_rate() const;
};

// Hamiltonian (V/4) sz(v) sz(e) + drive, plus the four dissipators.
struct Generator {
  double v_dd = 0.0;
  Rates rates;
  AcDrive drive;
};

// Two-level density matrix on NV (x) electron.
class SpinRegister {
 public:
  SpinRegister();
  explicit SpinRegister(const Mat4& rho) : rho_(rho) {}

  static SpinRegister polarized_nv_mixed_electron();

  const Mat4& rho() const { return rho_; }
  Mat4& rho() { return rho_; }

  double expect(const Mat4& op) const;
  double sz_nv() const;
  double sz_e() const;
  double min_eigenvalue() const;

  // Throws Internal when hermiticity, trace or positivity drift past tolerance.
  void check() const;

 private:
  Mat4 rho_;
};

const Mat2& pauli(char which);
Mat4 on_spin(Spin s, const Mat2& op);

// Rotation by angle about the in-plane axis (cos phase, sin phase, 0).
struct Pulse {
  Spin target = Spin::Nv;
  double angle = 0.0;
  double phase = 0.0;
};

struct FreeEvolution {
  double duration = 0.0;
};

// Complete loss of NV transverse coherence, rho -> (rho + Z rho Z)/2.
struct NvDephase {};

using Step = std::variant<Pulse, FreeEvolution, NvDephase>;

struct PulseSequence {
  std::vector<Step> steps;
  void validate() const;
};

enum class Integrator { Auto, Exponential, Rk4 };

struct PropagateOptions {
  Integrator integrator = Integrator::Auto;
  double rk4_change_tol = 1e-8;
  int max_halvings = 8;
};

Super superoperator(const Generator& g);
Super drive_superoperator(double amplitude);

// Evolve from absolute time t_start for dt.
void propagate(SpinRegister& reg, const Generator& g, double t_start, double dt,
               const PropagateOptions& opt = {});

void apply_pulse(SpinRegister& reg, const Pulse& p);

// Runs a sequence from reg; returns the final register. Absolute time starts at 0.
SpinRegister run_sequence(const PulseSequence& seq, const Generator& g, SpinRegister reg,
                          const PropagateOptions& opt = {});

// Tr[sz(v) rho] after the DEER / Hahn-echo sequences.
double run_deer(const KernelParams& p, const PropagateOptions& opt = {});
double run_echo(const KernelParams& p, const PropagateOptions& opt = {});

enum class FinalPhase { PlusY, MinusY };

struct T1SequenceOptions {
  bool dephase_storage = true;
  PropagateOptions propagate;
};

PulseSequence t1_sequence(double tau, double t, bool with_pi, FinalPhase final_phase,
                          bool dephase_storage = true);

double run_t1_sequence(const KernelParams& p, const NvRelaxation& nv, const AcDrive& drive, double tau,
                       double t, bool with_pi, FinalPhase final_phase, const T1SequenceOptions& opt = {});

// Differential echo phase the drive imprints on a probe segment [t0, t0+t] with a mid-point NV pi.
double ac_echo_phase(const AcDrive& drive, double t0, double t);

}  // namespace darkspin::lindblad
