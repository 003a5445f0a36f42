#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <utility>
#include <vector>

// Truncated Fock (x) qubit Hilbert spaces: basis bookkeeping, ladder and
// Pauli operators, states, density matrices, and the metrics the gate
// protocols are scored with.
namespace tpqr {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;

// Labeled tensor-product basis over bosonic modes and qubits.
//
// Basis ordering is fixed: mode occupations are the major (slowest) indices
// in declaration order, qubits follow as binary digits with g=0 before e=1.
// For one mode (cutoff c) and one qubit, index = n*2 + q, so
// |0,g>,|0,e>,|1,g>,|1,e>,... For two modes and two qubits (the two-rail
// gate space), index = ((n1*(c2+1) + n2)*2 + q1)*2 + q2.
struct SpaceLabel {
  std::vector<int> mode_cutoffs;  // per-mode maximum photon number
  int qubit_count = 0;

  int dim() const;
  int mode_dim(int mode) const { return mode_cutoffs.at(mode) + 1; }
  int subsystem_count() const { return static_cast<int>(mode_cutoffs.size()) + qubit_count; }

  // Occupation list: one entry per mode (photon number), then one per qubit
  // (0 = g, 1 = e).
  std::vector<int> unpack(int index) const;
  int pack(const std::vector<int>& occupations) const;
  std::string basis_label(int index) const;  // e.g. "n0=2 q0=g"

  bool operator==(const SpaceLabel&) const = default;
};

SpaceLabel build_space(std::vector<int> mode_cutoffs, int qubit_count);

struct KetState {
  SpaceLabel space;
  Vec amplitudes;

  double norm() const { return amplitudes.norm(); }
};

struct DensityMatrix {
  SpaceLabel space;
  Mat matrix;

  double trace_real() const { return matrix.trace().real(); }
};

struct OperatorMatrix {
  SpaceLabel space;
  Mat matrix;
  bool hermitian_flag = false;
};

// Basis ket with the given occupation list (modes then qubits).
KetState basis_ket(const SpaceLabel& space, const std::vector<int>& occupations);

// Annihilation/creation pair for one bosonic mode. a|n> = sqrt(n)|n-1>;
// amplitudes above the cutoff are dropped by the truncation.
std::pair<OperatorMatrix, OperatorMatrix> ladder_ops(const SpaceLabel& space, int mode_index);

// Single-qubit Pauli-algebra operators embedded in the full space.
// which: 'z', 'x', '+', '-'. sigma_+ = |e><g|, sigma_- = |g><e|.
OperatorMatrix qubit_op(const SpaceLabel& space, int qubit_index, char which);

// Conserved excitation charge a†a + 2 sigma_+ sigma_- for a one-mode,
// one-qubit space: one qubit excitation counts as one photon pair.
OperatorMatrix excitation_operator(const SpaceLabel& space);

DensityMatrix to_density(const KetState& psi);

// <psi| rho |psi>, clamped into [0,1] against roundoff.
double fidelity(const DensityMatrix& rho, const KetState& target);
// |<target|psi>|^2.
double fidelity(const KetState& psi, const KetState& target);

// Trace out every subsystem not listed in keep_subsystems. Subsystem ids:
// modes are 0..M-1 in declaration order, qubits M..M+Q-1. The kept ids must
// be strictly increasing; ordering of the reduced space follows the kept ids.
DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep_subsystems);

// Validates Hermiticity (1e-10), unit trace (1e-8), and spectrum >= -1e-7.
// Throws std::runtime_error naming the violated invariant.
void check_density_invariants(const DensityMatrix& rho);

// || M - M^dagger ||, used by builders to assert the hermitian_flag.
double hermiticity_defect(const Mat& m);

}  // namespace tpqr
