#include "tpqr/hilbert.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <stdexcept>

namespace tpqr {

int SpaceLabel::dim() const {
  int d = 1;
  for (int c : mode_cutoffs) {
    if (c < 0) throw std::invalid_argument("mode cutoff must be >= 0");
    d *= c + 1;
  }
  for (int q = 0; q < qubit_count; ++q) d *= 2;
  return d;
}

std::vector<int> SpaceLabel::unpack(int index) const {
  if (index < 0 || index >= dim()) throw std::out_of_range("basis index out of range");
  const int m = static_cast<int>(mode_cutoffs.size());
  std::vector<int> occ(m + qubit_count, 0);
  for (int q = qubit_count - 1; q >= 0; --q) {
    occ[m + q] = index & 1;
    index >>= 1;
  }
  for (int i = m - 1; i >= 0; --i) {
    const int d = mode_cutoffs[i] + 1;
    occ[i] = index % d;
    index /= d;
  }
  return occ;
}

int SpaceLabel::pack(const std::vector<int>& occ) const {
  const int m = static_cast<int>(mode_cutoffs.size());
  if (static_cast<int>(occ.size()) != m + qubit_count)
    throw std::invalid_argument("occupation list length mismatch");
  int index = 0;
  for (int i = 0; i < m; ++i) {
    if (occ[i] < 0 || occ[i] > mode_cutoffs[i])
      throw std::out_of_range("mode occupation outside cutoff");
    index = index * (mode_cutoffs[i] + 1) + occ[i];
  }
  for (int q = 0; q < qubit_count; ++q) {
    if (occ[m + q] != 0 && occ[m + q] != 1)
      throw std::out_of_range("qubit occupation must be 0 (g) or 1 (e)");
    index = index * 2 + occ[m + q];
  }
  return index;
}

std::string SpaceLabel::basis_label(int index) const {
  const auto occ = unpack(index);
  const int m = static_cast<int>(mode_cutoffs.size());
  std::string s;
  for (int i = 0; i < m; ++i) {
    if (!s.empty()) s += ' ';
    s += "n" + std::to_string(i) + "=" + std::to_string(occ[i]);
  }
  for (int q = 0; q < qubit_count; ++q) {
    if (!s.empty()) s += ' ';
    s += "q" + std::to_string(q) + "=" + (occ[m + q] ? "e" : "g");
  }
  if (s.empty()) s = "vac";
  return s;
}

SpaceLabel build_space(std::vector<int> mode_cutoffs, int qubit_count) {
  if (qubit_count < 0) throw std::invalid_argument("qubit count must be >= 0");
  for (int c : mode_cutoffs)
    if (c < 0) throw std::invalid_argument("mode cutoff must be >= 0");
  SpaceLabel s{std::move(mode_cutoffs), qubit_count};
  if (s.dim() < 1) throw std::invalid_argument("zero-dimensional space");
  return s;
}

KetState basis_ket(const SpaceLabel& space, const std::vector<int>& occ) {
  Vec v = Vec::Zero(space.dim());
  v(space.pack(occ)) = 1.0;
  return {space, std::move(v)};
}

std::pair<OperatorMatrix, OperatorMatrix> ladder_ops(const SpaceLabel& space, int mode_index) {
  const int m = static_cast<int>(space.mode_cutoffs.size());
  if (mode_index < 0 || mode_index >= m) throw std::out_of_range("invalid mode index");
  const int d = space.dim();
  Mat a = Mat::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    auto occ = space.unpack(j);
    const int n = occ[mode_index];
    if (n == 0) continue;
    occ[mode_index] = n - 1;
    a(space.pack(occ), j) = std::sqrt(static_cast<double>(n));
  }
  Mat ad = a.adjoint();
  return {OperatorMatrix{space, std::move(a), false},
          OperatorMatrix{space, std::move(ad), false}};
}

OperatorMatrix qubit_op(const SpaceLabel& space, int qubit_index, char which) {
  if (qubit_index < 0 || qubit_index >= space.qubit_count)
    throw std::out_of_range("invalid qubit index");
  const int m = static_cast<int>(space.mode_cutoffs.size());
  const int d = space.dim();
  Mat op = Mat::Zero(d, d);
  bool hermitian = (which == 'z' || which == 'x');
  for (int j = 0; j < d; ++j) {
    auto occ = space.unpack(j);
    const int q = occ[m + qubit_index];
    switch (which) {
      case 'z':
        op(j, j) = q ? 1.0 : -1.0;
        break;
      case 'x':
        occ[m + qubit_index] = 1 - q;
        op(space.pack(occ), j) = 1.0;
        break;
      case '+':  // |e><g|
        if (q == 0) {
          occ[m + qubit_index] = 1;
          op(space.pack(occ), j) = 1.0;
        }
        break;
      case '-':  // |g><e|
        if (q == 1) {
          occ[m + qubit_index] = 0;
          op(space.pack(occ), j) = 1.0;
        }
        break;
      default:
        throw std::invalid_argument("unknown qubit operator");
    }
  }
  return {space, std::move(op), hermitian};
}

OperatorMatrix excitation_operator(const SpaceLabel& space) {
  if (space.mode_cutoffs.size() != 1 || space.qubit_count != 1)
    throw std::invalid_argument("excitation operator needs a one-mode, one-qubit space");
  const int d = space.dim();
  Mat c = Mat::Zero(d, d);
  for (int j = 0; j < d; ++j) {
    const auto occ = space.unpack(j);
    c(j, j) = occ[0] + 2 * occ[1];
  }
  return {space, std::move(c), true};
}

DensityMatrix to_density(const KetState& psi) {
  return {psi.space, psi.amplitudes * psi.amplitudes.adjoint()};
}

double fidelity(const DensityMatrix& rho, const KetState& target) {
  if (!(rho.space == target.space)) throw std::invalid_argument("space mismatch");
  const Complex v = target.amplitudes.adjoint() * rho.matrix * target.amplitudes;
  return std::clamp(std::abs(v), 0.0, 1.0);
}

double fidelity(const KetState& psi, const KetState& target) {
  if (!(psi.space == target.space)) throw std::invalid_argument("space mismatch");
  const Complex v = target.amplitudes.dot(psi.amplitudes);
  return std::clamp(std::norm(v), 0.0, 1.0);
}

DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep) {
  const auto& sp = rho.space;
  const int nsub = sp.subsystem_count();
  if (keep.empty()) throw std::invalid_argument("keep list must not be empty");
  if (!std::is_sorted(keep.begin(), keep.end()))
    throw std::invalid_argument("keep list must be strictly increasing");
  std::vector<bool> kept(nsub, false);
  for (int k : keep) {
    if (k < 0 || k >= nsub) throw std::out_of_range("keep id out of range");
    if (kept[k]) throw std::invalid_argument("duplicate keep id");
    kept[k] = true;
  }

  const int m = static_cast<int>(sp.mode_cutoffs.size());
  auto sub_dim = [&](int s) { return s < m ? sp.mode_cutoffs[s] + 1 : 2; };

  SpaceLabel out_space;
  for (int k : keep)
    if (k < m) out_space.mode_cutoffs.push_back(sp.mode_cutoffs[k]);
  out_space.qubit_count = static_cast<int>(
      std::count_if(keep.begin(), keep.end(), [&](int k) { return k >= m; }));
  const int dk = out_space.dim();

  // index of a full-basis state within the kept / traced factor
  auto split = [&](int full, int& kept_idx, int& traced_idx) {
    const auto occ = sp.unpack(full);
    kept_idx = 0;
    traced_idx = 0;
    for (int s = 0; s < nsub; ++s) {
      if (kept[s])
        kept_idx = kept_idx * sub_dim(s) + occ[s];
      else
        traced_idx = traced_idx * sub_dim(s) + occ[s];
    }
  };

  Mat out = Mat::Zero(dk, dk);
  const int d = sp.dim();
  std::vector<int> kidx(d), tidx(d);
  for (int j = 0; j < d; ++j) split(j, kidx[j], tidx[j]);
  for (int row = 0; row < d; ++row)
    for (int col = 0; col < d; ++col)
      if (tidx[row] == tidx[col]) out(kidx[row], kidx[col]) += rho.matrix(row, col);
  return {std::move(out_space), std::move(out)};
}

double hermiticity_defect(const Mat& m) { return (m - m.adjoint()).norm(); }

void check_density_invariants(const DensityMatrix& rho) {
  if (hermiticity_defect(rho.matrix) > 1e-10)
    throw std::runtime_error("density matrix invariant violated: hermiticity");
  if (std::abs(rho.matrix.trace().real() - 1.0) > 1e-8 ||
      std::abs(rho.matrix.trace().imag()) > 1e-8)
    throw std::runtime_error("density matrix invariant violated: unit trace");
  Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-7)
    throw std::runtime_error("density matrix invariant violated: positivity");
}

}  // namespace tpqr
