#pragma once
// Closed- and open-system propagators: Schrodinger evolution (exact for
// static Hamiltonians, guarded fixed-step RK4 for time-dependent ones), the
// standard Lindblad master equation, and the dressed-state master equation
// whose jump operators connect eigenstates of the full coupled Hamiltonian.

#include "tpqr/hilbert.hpp"
#include "tpqr/models.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tpqr {

// Rates in 1/ns (configs quote 1/us; convert at the boundary, units.hpp).
struct NoiseParams {
    double kappa = 0.0;      // resonator photon loss, channel a
    double gamma = 0.0;      // qubit damping, channel sigma_-
    double gamma_phi = 0.0;  // qubit dephasing, channel sigma_z at rate/2
};

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 0.0;
    int steps = 1;           // macro-steps across [t_start, t_end]
    int sample_stride = 1;   // record every stride-th boundary (always both ends)
};

struct EvolutionTrace {
    SpaceLabel space;
    std::vector<double> times;
    std::vector<Vec> kets;       // filled by closed-system propagation
    std::vector<Mat> densities;  // filled by the master-equation solvers
    std::vector<std::string> observable_names;
    std::vector<std::vector<double>> observables;  // one series per name

    bool is_density() const { return !densities.empty(); }
};

using TimeDepOperator = std::function<Mat(double)>;

// Static-Hamiltonian propagation via eigendecomposition: unitary to machine
// precision, so norm is conserved exactly and phases carry no integrator
// error. Throws on non-Hermitian input.
EvolutionTrace propagate_state(const OperatorMatrix& h, const KetState& psi0,
                               const TimeGrid& grid);

// Time-dependent propagation: fixed-step RK4 with step
// <= min(2*pi/(50*omega_max), grid spacing) and a per-step halving guard
// (step-doubling error estimate < 1e-10). Hermiticity is checked at every
// recorded time; norm drift beyond 1e-8 aborts.
EvolutionTrace propagate_state(const TimeDepOperator& h, double omega_max,
                               const KetState& psi0, const TimeGrid& grid);

// One generic collapse channel: dissipator D[op] entering at `rate`,
// D[L]rho = (2 L rho L' - L'L rho - rho L'L)/2.
struct CollapseChannel {
    Mat op;
    double rate = 0.0;
};

// Standard master equation with the bare channels a (kappa), sigma_- (gamma)
// and sigma_z (gamma_phi/2) built on h's space; requires a one-mode,
// one-qubit space. Throws on negative rates.
EvolutionTrace lindblad_evolve(const OperatorMatrix& h, const NoiseParams& noise,
                               const DensityMatrix& rho0, const TimeGrid& grid);

// Master equation with an explicit channel list (any space).
EvolutionTrace lindblad_evolve_ops(const OperatorMatrix& h,
                                   const std::vector<CollapseChannel>& channels,
                                   const DensityMatrix& rho0, const TimeGrid& grid);

// One dressed-channel seed: the bare coupling operator X, its rate, and the
// reference frequency of its bath. The seed expands into jump operators
// |j><k| (k > j, eigenstates of the full Hamiltonian, ascending energies)
// with rates rate * (Delta_kj / freq_scale) * |<k|X|j>|^2.
struct DressedChannelSeed {
    Mat op;
    double rate = 0.0;
    double freq_scale = 0.0;
};

struct DressedOptions {
    // Coherent generator override; defaults to h_full. Used to evolve in the
    // interaction picture when the interaction Hamiltonian commutes with the
    // free part (the dissipator is frame-invariant there because the jump
    // operators only pick up scalar phases).
    std::optional<Mat> h_coherent;
    // Channels applied with their bare operators, undressed (e.g. sigma_z
    // dephasing, which the dressed-rate construction does not cover).
    std::vector<CollapseChannel> bare_extra;
    // Degenerate-eigenvalue reports land here when provided.
    std::vector<std::string>* warnings = nullptr;
};

EvolutionTrace dressed_lindblad_evolve(const OperatorMatrix& h_full,
                                       const std::vector<DressedChannelSeed>& seeds,
                                       const DensityMatrix& rho0, const TimeGrid& grid,
                                       const DressedOptions& options = {});

// The two standard seeds for one rail: (a + a', kappa, omega_r) and
// (sigma_x, gamma, omega_q).
std::vector<DressedChannelSeed> standard_dressed_channels(const SpaceLabel& space,
                                                          const SystemParams& params,
                                                          double kappa, double gamma,
                                                          int mode = 0, int qubit = 0);

struct NamedObservable {
    std::string name;
    Mat op;  // Hermitian; series records Re<op>
};

// Computes <op> at every recorded time and appends the series to the trace
// (also returned). Throws on dimension mismatch.
std::vector<std::vector<double>> attach_observables(
    EvolutionTrace& trace, const std::vector<NamedObservable>& observables);

// CSV export: column 1 is time (ns), then one column per named observable in
// insertion order. Deterministic formatting (%.17g).
void export_csv(const EvolutionTrace& trace, const std::string& path);

}  // namespace tpqr
