#pragma once
// Hamiltonian builders for the two-photon qubit-resonator models and the
// parameter solvers that put each gate protocol on resonance.
//
// All frequencies are angular (rad/ns); see units.hpp. Builders accept the
// target space plus the (mode, qubit) pair they act on, so the same model can
// be instantiated per rail inside a multi-rail space.

#include "tpqr/hilbert.hpp"
#include "tpqr/units.hpp"

#include <numbers>
#include <string>
#include <vector>

namespace tpqr {

// Bare qubit-resonator parameters. delta() is the two-photon detuning
// omega_q - 2*omega_r; it is always derived, never stored.
struct SystemParams {
    double omega_r = 0.0;  // resonator angular frequency
    double omega_q = 0.0;  // qubit angular frequency
    double g = 0.0;        // two-photon coupling strength

    double delta() const { return omega_q - 2.0 * omega_r; }
};

// Effective-model parameters in the perturbative ultrastrong regime.
//   omega_2bs = 2g^2/(2*omega_r + omega_q)     (photon-like shift)
//   Omega_q   = 2g^2/omega_q                   (qubit-like shift)
//   B         = -6*(omega_2bs/2 + 2*Omega_q)   (two-photon block energy)
//   T_osc     = 2*pi/sqrt(B^2 + 8 g^2)
// resonance_residual() must vanish for the interaction picture to be static.
struct BlochSiegertParams {
    SystemParams base;
    double omega_2bs = 0.0;
    double Omega_q = 0.0;
    double B = 0.0;
    double r = 0.0;  // omega_q / omega_r
    int k = 0;       // oscillation count per gate
    double T_osc = 0.0;
    double gate_time = 0.0;

    double resonance_residual() const;  // omega_q - 2*omega_r + 3*omega_2bs + Omega_q
};

// Far-detuned effective parameters; chi = 2 g^2 / |delta|.
// The phase conditions solved are omega_r*t = 2*pi*n and
// (omega_r - chi)*t = 2*pi*(n-1) + target_phase (reducing to the odd multiple
// (2m-1)*pi with m = n when target_phase = pi).
struct DispersiveParams {
    SystemParams base;
    double chi = 0.0;
    int n = 0;  // single-photon phase winding count
    int m = 0;  // two-photon condition index (m = n by construction)
    double target_phase = 0.0;
    double gate_time = 0.0;

    double delta_abs() const;
};

// Mean photon-number bound used by validity checks (two photons max in the
// gate protocols).
inline constexpr double kMeanPhotonBound = 2.0;

// H = omega_r a'a + (omega_q/2) sz + g (s+ a^2 + s- a'^2).
// Throws std::invalid_argument if the mode cutoff is < 2 (the two-photon term
// would vanish identically).
OperatorMatrix h_2jc(const SpaceLabel& space, const SystemParams& p,
                     int mode = 0, int qubit = 0);

// Interaction picture of h_2jc with respect to the bare part:
// g (s+ a^2 e^{i delta t} + s- a'^2 e^{-i delta t}). Static when delta = 0.
OperatorMatrix h_2jc_interaction(const SpaceLabel& space, const SystemParams& p,
                                 double t, int mode = 0, int qubit = 0);

// Full model H = omega_r a'a + (omega_q/2) sz + g sx (a^2 + a'^2), including
// the counter-rotating terms. Cutoff >= 4 recommended so those terms have
// room to act.
OperatorMatrix h_2qrm(const SpaceLabel& space, const SystemParams& p,
                      int mode = 0, int qubit = 0);

// Effective ultrastrong-regime model:
// h_2jc - omega_2bs a'a + (omega_2bs/2 + Omega_q/2) sz
//       + (omega_2bs/2 + 2*Omega_q) sz (a'a + (a'a)^2).
// Appends a validity warning to *warnings when g*(n_bar+1) exceeds 0.3 of the
// qubit frequency scale.
OperatorMatrix h_2bs(const SpaceLabel& space, const BlochSiegertParams& p,
                     std::vector<std::string>* warnings = nullptr,
                     int mode = 0, int qubit = 0);

// Interaction picture of h_2bs at resonance: static matrix
// (omega_2bs/2 + 2*Omega_q) sz (a'a + (a'a)^2) + g (s+ a^2 + s- a'^2),
// whose restriction to {|0,g>, |1,g>, |0,e>, |2,g>} is diag(0, B/3, 0, B)
// plus the sqrt(2) g coupling |0,e> <-> |2,g>.
// Throws if the resonance residual exceeds 1e-9 * omega_r.
OperatorMatrix h_2bs_interaction(const SpaceLabel& space, const BlochSiegertParams& p,
                                 int mode = 0, int qubit = 0);

// Diagonal far-detuned model:
// (omega_r + chi) a'a + (omega_q + chi) sz/2 + (chi/2) sz (a'a + (a'a)^2).
OperatorMatrix h_dispersive(const SpaceLabel& space, const DispersiveParams& p,
                            int mode = 0, int qubit = 0);

// Coupling ratio that closes the ultrastrong resonance condition:
// g/omega_r = sqrt(4r - r^3) / (2 sqrt(1 + 2r)), r = omega_q/omega_r.
// Throws if r is outside (0, 2).
double solve_pusc_coupling(double r);

// Residual of the phase-closure condition selecting r for a given oscillation
// count k: k/(3 + (-1)^(k+1)) minus
// sqrt((2-r)(1152 + 880 r - 230 r^2 - 209 r^3)) / (2 (2-r)(8 + 5r)).
double pusc_k_residual(double r, int k);

// Solves the phase-closure condition for r by bisection on (0.01, 1.99) and
// fills every derived field; gate_time = k * T_osc. Valid k are 4, 6, 7, 8,
// 9, ... (no root exists for k < 4 or k = 5).
BlochSiegertParams solve_pusc_k(int k, double omega_r = units::ghz_cyclic(5.0));

// Solves the two phase conditions for a winding count n and returns the full
// parameter set: chi = (2*pi - target_phase) * omega_r / (2*pi*n) (so
// chi/omega_r = 1/(2n) at target_phase = pi), gate_time = 2*pi*n/omega_r,
// g = chi * delta_over_g_bar * (n_bar+1) / 2 with n_bar = 2, and
// omega_q = 2*omega_r + |delta| where |delta| = 2 g^2 / chi.
// delta_over_g_bar is the validity knob |delta| / (g (n_bar+1)).
// Throws on n < 1 or target_phase outside (0, 2*pi).
DispersiveParams solve_dispersive(int n, double delta_over_g_bar = 10.0,
                                  double target_phase = std::numbers::pi,
                                  double omega_r = units::ghz_cyclic(1.0),
                                  std::vector<std::string>* warnings = nullptr);

// Residuals of the two dispersive phase conditions (single-photon winding,
// two-photon target phase); both are < 1e-12 for solver output.
std::pair<double, double> dispersive_phase_residuals(const DispersiveParams& p);

}  // namespace tpqr
