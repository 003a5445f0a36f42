#pragma once
// Discretized-waveguide catch / interact / release simulation: Lorentzian
// wavepacket construction on a uniform frequency grid, time-dependent
// coupler schedules, free-phase (tilde) reference states, waveform overlaps,
// and the end-to-end nonlinear-sign fidelity with decoherence.
//
// The state space conserves excitation number (bath photons + resonator
// photons + 2 per qubit excitation), so the amplitudes are packed by sector:
//   [ zero | r1 | w_m (N) | A | Q | B_m (N) | C_{m<=n} (N(N+1)/2) ]
// where zero  = empty waveguide and resonator,
//       r1    = one photon in the resonator,
//       w_m   = one photon in bath mode m,
//       A     = two photons in the resonator,
//       Q     = excited qubit (absorbed the photon pair),
//       B_m   = one resonator photon + one photon in mode m,
//       C_mn  = two bath photons in modes m <= n (ordered storage carries the
//               bosonic symmetry; the m = n diagonal is the double-occupied
//               mode).

#include "tpqr/dynamics.hpp"
#include "tpqr/gates.hpp"
#include "tpqr/hilbert.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tpqr {

// Lorentzian packet: single-photon field amplitude ~ 1/((omega-omega0) + i eps)
// (the causal sign: the packet decays as exp(-eps t) in time). span_k sets
// the simulated frequency window, delta_omega = span_k * epsilon / N.
struct WavepacketSpec {
    double epsilon = 0.0;  // bandwidth, angular (rad/ns)
    double omega0 = 0.0;   // center detuning from the resonator (0 = resonant)
    double span_k = 0.0;   // window width in units of epsilon (>= 2)
};

// Uniform bath grid symmetric about the resonator frequency. Stored as
// detunings Delta_m = omega_m - omega_r = (m - (N-1)/2) * delta_omega.
struct BathDiscretization {
    int N = 0;
    double delta_omega = 0.0;
    std::vector<double> detunings;

    double detuning(int m) const { return detunings.at(static_cast<std::size_t>(m)); }
    bool operator==(const BathDiscretization&) const = default;
};

BathDiscretization discretize_bath(const WavepacketSpec& spec, int N);

// One piece of the waveguide-resonator coupling profile. ExpDecay evaluates
// a*exp(-b*t) with global time (matching published catch profiles);
// LinearRamp runs from a at t_start to b at t_end; Constant holds a.
struct ScheduleSegment {
    enum class Kind { Zero, Constant, ExpDecay, LinearRamp };
    Kind kind = Kind::Zero;
    double t_start = 0.0;
    double t_end = 0.0;
    double a = 0.0;
    double b = 0.0;

    double value(double t) const;
};

// Full protocol schedule: g_wr(t) piecewise over [0, t_end] plus the
// triangular resonator-qubit pulse g_rq(t) on [t_in, t_in + t_q], whose
// duration t_q = sqrt(2) pi / g0 makes it a two-photon pi pulse by
// construction. Amplitudes are calibrated at a reference grid spacing;
// g_wr(t, delta_omega) rescales them by sqrt(delta_omega / calib) so the
// effective decay rate 2 pi g_wr^2 / delta_omega is grid-independent.
struct CouplerSchedule {
    std::vector<ScheduleSegment> wr_segments;
    double g0 = 0.0;
    double t_in = 0.0;
    double t_q = 0.0;
    double t_end = 0.0;
    double calib_delta_omega = 0.0;

    double g_wr_raw(double t) const;
    double g_wr(double t, double delta_omega) const;
    double g_rq(double t) const;
    // Times where any coupling is non-smooth; integration never steps across.
    std::vector<double> breakpoints() const;
    // Throws std::invalid_argument on gaps, overlaps, negative couplings, or
    // an interaction window that is not the pi-pulse duration for g0.
    void validate() const;
};

// Published operating points (catch exponential, pi-pulse triangle, step
// release), calibrated at N = 100:
//  - schedule_a: 0.02 rad/ns packet; catch 100 ns, total 300 ns.
//  - schedule_b: 0.15 rad/ns packet; catch 20 ns, total 70 ns.
CouplerSchedule schedule_a();
CouplerSchedule schedule_b();
WavepacketSpec packet_a();  // epsilon 0.02, span 5
WavepacketSpec packet_b();  // epsilon 0.15, span 4

// Pure state over the packed catch/release basis.
struct BathState {
    BathDiscretization bath;
    Vec amplitudes;

    static int dim_for(int N);
    int dim() const { return dim_for(bath.N); }

    int idx_zero() const { return 0; }
    int idx_r1() const { return 1; }
    int idx_w(int m) const { return 2 + m; }
    int idx_A() const { return bath.N + 2; }
    int idx_Q() const { return bath.N + 3; }
    int idx_B(int m) const { return bath.N + 4 + m; }
    int idx_C(int m, int n) const;  // requires m <= n

    // Squared norm of the 0-, 1-, or 2-excitation block.
    double sector_norm2(int excitations) const;
};

// Packet state alpha0|vac> + alpha1|1_w> + alpha2|2_w> with the resonator
// empty: w_m ~ 1/(Delta_m - omega0 + i eps), C_mn the symmetrized product
// (2 w_m w_n off-diagonal, sqrt(2) w_m^2 on the diagonal), each photon
// sector L2-normalized on the grid. Throws if |alpha|^2 does not sum to 1.
BathState build_lorentzian_input(const WavepacketSpec& spec,
                                 const std::array<Complex, 3>& alphas,
                                 const BathDiscretization& bath);

// Sampled closed-system evolution.
struct WaveguideTrace {
    BathDiscretization bath;
    std::vector<double> times;
    std::vector<Vec> states;

    BathState state_at(std::size_t i) const;
};

// Integrates the excitation-conserving Schroedinger equation with the
// time-dependent couplings of `schedule`. Records at `record_times` (sorted,
// within [0, t_end]); when empty, a uniform ~2 samples/ns grid plus all
// schedule breakpoints is used. Norm is checked to 1e-8 at every record.
WaveguideTrace propagate_catch_release(const BathState& psi0,
                                       const CouplerSchedule& schedule,
                                       std::vector<double> record_times = {});

// Applies the bath free phases exp(-i Delta_m tau) per bath photon, with
// tau = t before the interaction window closes and tau = t - t_in - t_q
// afterwards (the free-phase clock restarts when the release begins).
BathState tilde_reference_state(const BathState& input, double t, double t_in,
                                double t_q);

// |<ref sector | out sector>| over the bath amplitudes of the given photon
// sector (1 -> w, 2 -> C), normalized per sector. Throws if either sector
// is empty (norm below 1e-12) or the grids differ.
double waveform_overlap(const BathState& out, const BathState& reference, int sector);

// Complex projections of a trace onto the moving references
// <tilde1,0_r|psi>, <tilde2,0_r|psi>, <0_w,1_r|psi>, <0_w,2_r|psi>
// (the published input/output panels; all four are nearly real).
struct ProjectionSeries {
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<Complex>> values;  // [name][time]
};
ProjectionSeries tilde_projections(const WaveguideTrace& trace, const BathState& input,
                                   const CouplerSchedule& schedule);

// Options for the open-system run. Density-matrix mode (trajectories = 0)
// needs ~10 complex buffers of D^2 doubles; the run refuses to start when
// 16 * D^2 * 10 bytes exceeds memory_budget_bytes and suggests reducing N.
// trajectories > 0 switches to a Monte Carlo wave-function ensemble (the
// fallback that stays affordable at N = 100).
struct CatchReleaseOptions {
    std::size_t memory_budget_bytes = 2ull << 30;
    bool linear_phase_correction = false;  // flip the released one-photon sign
    int trajectories = 0;
    std::uint64_t seed = 20260817u;
};

// End-to-end open-system NS gate over the full catch/interact/release
// window. The target is the freely-evolved input with the one- and
// two-photon sectors negated (the catch contributes one minus sign, the
// interaction the other). Reports fidelity, the resonator populations at
// t_in, and the released one- and two-photon waveform overlaps.
GateReport full_ns_fidelity(const BathState& input, const CouplerSchedule& schedule,
                            const NoiseParams& noise,
                            const CatchReleaseOptions& opts = {});

// Derivative-free tuning of the catch (amplitude, decay rate) or release
// (plateau) parameters against a closed-system objective.
enum class ScheduleObjective {
    CatchPopulation,  // resonator population captured at t_in
    ReleaseOverlap,   // released one-photon waveform overlap at t_end
};

struct ScheduleBounds {
    double amp_lo = 0.0, amp_hi = 0.0;        // catch amplitude (rad/ns)
    double rate_lo = 0.0, rate_hi = 0.0;      // catch decay rate (1/ns)
    double release_lo = 0.0, release_hi = 0.0;  // release plateau (rad/ns)
};

struct OptimizedSchedule {
    CouplerSchedule schedule;
    double objective = 0.0;
    bool improved = false;    // objective strictly better than the initial
    bool at_bounds = false;   // best point pinned to a search-box face
};

// Zero-width bounds freeze a parameter (all-zero-width returns the initial
// schedule unchanged). The objective is evaluated on pure-state runs with
// the given input packet.
OptimizedSchedule optimize_schedule(ScheduleObjective objective,
                                    const CouplerSchedule& initial,
                                    const ScheduleBounds& bounds,
                                    const WavepacketSpec& packet, int bath_modes);

}  // namespace tpqr
