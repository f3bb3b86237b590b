#pragma once

namespace darkspin {

// Rates and couplings in rad/us, times in us.
struct KernelParams {
  double v_dd = 0.0;
  double gamma_e1 = 0.0;
  double gamma_e2 = 0.0;
  double t = 0.0;

  void validate() const;
};

struct NvRelaxation {
  double gamma_v1 = 0.0;
  double gamma_v2 = 0.0;

  void validate() const;
};

double f_deer(const KernelParams& p);
double f_echo(const KernelParams& p);

// f_deer - f_echo by subtraction of the two closed forms.
double f_deer_minus_echo(const KernelParams& p);

// Same quantity in the factored form -e^{-gt/2} (Vt)^2/8 sinc^2(a/2), a = t sqrt(V^2-g^2)/2.
// Real arithmetic, no cancellation at small Vt. Used inside the bath integrals.
double deer_echo_gap(double v_dd, double gamma, double t);

double t1_sequence_signal(const KernelParams& p, const NvRelaxation& nv, double tau, double t);

double composite_t1_signal(double f_y_pi, double f_y_0, double f_my_pi, double f_my_0);

namespace detail {
// Largest imaginary residue seen by the complex path on this thread.
double last_imag_residue();
}

}  // namespace darkspin
