#pragma once
// Nonlinear-sign gate protocols in the three coupling regimes, the
// beam-splitter unitary lifted to Fock space, and the two-rail
// controlled-Z composition (beam splitter - parallel NS - beam splitter).

#include "tpqr/dynamics.hpp"
#include "tpqr/hilbert.hpp"
#include "tpqr/models.hpp"

#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tpqr {

// Two-rail beam splitter. The one-photon block on (|01>, |10>) is
// [[-sin t, cos t], [cos t, sin t]]; the two-photon block on
// (|02>, |11>, |20>) is its second-quantized homogeneous lift
// (b' -> -sin t b' + cos t a', a' -> cos t b' + sin t a'), which is the
// unitary completion: at t = pi/4 it sends |11> to (-|02> + |20>)/sqrt(2)
// with no |11> remainder (two-photon interference). Both blocks are
// symmetric orthogonal, so the lifted operator is an involution.
struct BeamSplitter {
    double theta = 0.0;
    Eigen::Matrix2d block_1photon;
    Eigen::Matrix3d lifted_2photon;
};

BeamSplitter beam_splitter_unitary(double theta);

// The beam splitter on a two-mode photonic space (each cutoff >= 2, no
// qubits): block-diagonal in total photon number, acting with the lifted
// blocks on the 0/1/2-photon sectors and as the identity on the sectors the
// truncation cannot represent faithfully (total photons > 2, outside the
// encoded sector).
Mat beam_splitter_matrix(const BeamSplitter& bs, const SpaceLabel& space);

// Ideal nonlinear-sign map: flips the sign of the two-photon amplitude of
// one mode, leaving everything else unchanged. Involution. Throws if the
// mode's cutoff is < 2.
KetState ns_apply_ideal(const KetState& photonic, int mode = 0);

struct GateReport {
    std::string protocol;
    std::vector<std::pair<std::string, double>> params;  // insertion-ordered
    double gate_time = 0.0;  // ns
    double fidelity = 0.0;   // in [0, 1]
    EvolutionTrace trace;
};

// (|0> + |1> + |2>)/sqrt(3) on a single photonic mode.
KetState standard_ns_input(int cutoff = 2);
// (|00> + |01> + |10> + |11>)/2 on two photonic modes (cutoff 2 each).
KetState standard_cz_input();

// Strong-coupling NS gate: evolves psi0 (x) |g> under the resonant
// interaction-picture pair-exchange Hamiltonian with the bare master
// equation for t = pi/(sqrt(2) g). psi0 is a single-mode photonic state
// (cutoff >= 2), optionally already joined with a qubit that must then be
// in |g>. Requires omega_q = 2 omega_r.
GateReport ns_protocol_sc(const SystemParams& p, const NoiseParams& noise,
                          const KetState& psi0);

// Ultrastrong-regime NS gate: evolves under the static interaction picture
// of the effective Hamiltonian for gate_time = k T_osc with the
// dressed-state master equation (jumps between eigenstates of the full
// effective Hamiltonian). The closed-form phase conditions
// (theta_1 - theta_0 = 0 and theta_2 - theta_0 = pi, mod 2 pi) are
// verified and recorded in the report. Dephasing has no dressed
// counterpart here; when include_bare_dephasing is set, gamma_phi enters
// with its bare sigma_z operator, otherwise it is not applied.
GateReport ns_protocol_pusc(const BlochSiegertParams& p, const NoiseParams& noise,
                            const KetState& psi0, bool include_bare_dephasing = false);

// Far-detuned NS / controlled-phase gate: diagonal-phase evolution under the
// bare master equation for the solved gate_time. The two-photon amplitude
// acquires exp(-i target_phase) relative to the vacuum and one-photon rails
// (pi gives the sign flip).
GateReport ns_protocol_dispersive(const DispersiveParams& p, const NoiseParams& noise,
                                  const KetState& psi0);

// Mid-pipeline controlled-Z state: two rails (cutoff 2 each) with their
// interaction qubits. The encoded sector keeps total photon number <= 2.
struct TwoRailState {
    SpaceLabel space;  // modes {2, 2}, qubits 2
    Mat density;
};

// Embeds a two-mode photonic ket with both qubits in |g>.
TwoRailState two_rail_embed(const KetState& photonic);
// Population outside the encoded sector (total photon number > 2).
double encoded_photon_leakage(const TwoRailState& state);

// Ideal controlled-Z pipeline on a two-mode photonic ket: beam splitter,
// sign flip on each rail's two-photon amplitude, beam splitter again.
KetState cz_apply_ideal(const KetState& photonic, double theta);

// Regime selector for cz_protocol; the active alternative names the
// protocol, and each rail evolves under that regime's NS Hamiltonian.
using RegimeParams = std::variant<SystemParams, BlochSiegertParams, DispersiveParams>;

// Full controlled-Z protocol: BS(theta), one joint master equation evolving
// both rails in parallel (dimension 36) with noise channels duplicated per
// rail, qubits traced out, BS(theta) again. Fidelity is reported against the
// ideal controlled-Z image of the input (|11> amplitude negated). The input
// must live in span{|00>, |01>, |10>, |11>} on cutoff-2 rails.
GateReport cz_protocol(const RegimeParams& params, const NoiseParams& noise,
                       double theta, const KetState& input,
                       bool include_bare_dephasing = false);

}  // namespace tpqr
