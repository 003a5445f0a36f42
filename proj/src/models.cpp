#include "tpqr/models.hpp"

#include "tpqr/optimize.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace tpqr {

namespace {

constexpr double kPi = std::numbers::pi;

// Diagonal operator from a per-basis-state energy function of the photon
// number in `mode` and the qubit sign (+1 excited, -1 ground) of `qubit`.
// Built exactly from integer occupations so diagonal models carry no
// floating-point matmul noise.
template <typename F>
Mat diagonal_op(const SpaceLabel& space, int mode, int qubit, F&& energy) {
    const int d = space.dim();
    Mat h = Mat::Zero(d, d);
    const int qubit_slot = static_cast<int>(space.mode_cutoffs.size()) + qubit;
    for (int i = 0; i < d; ++i) {
        const std::vector<int> occ = space.unpack(i);
        const double sz = occ[qubit_slot] ? 1.0 : -1.0;
        h(i, i) = energy(occ[mode], sz);
    }
    return h;
}

void require_mode_qubit(const SpaceLabel& space, int mode, int qubit, int min_cutoff) {
    if (mode < 0 || mode >= static_cast<int>(space.mode_cutoffs.size()))
        throw std::invalid_argument("model builder: mode index out of range");
    if (qubit < 0 || qubit >= space.qubit_count)
        throw std::invalid_argument("model builder: qubit index out of range");
    if (space.mode_cutoffs[mode] < min_cutoff)
        throw std::invalid_argument("model builder: mode cutoff must be >= " +
                                    std::to_string(min_cutoff) +
                                    " for the two-photon coupling to act");
}

// g (s+ a^2 + s- a'^2) with an optional phase e^{i phi} on the s+ a^2 part.
Mat pair_exchange(const SpaceLabel& space, int mode, int qubit, double g, double phi) {
    const auto [a, ad] = ladder_ops(space, mode);
    const Mat sp = qubit_op(space, qubit, '+').matrix;
    const Mat raise_qubit = sp * a.matrix * a.matrix;
    const Complex phase = std::exp(Complex(0.0, phi));
    Mat h = g * phase * raise_qubit;
    h += h.adjoint().eval();
    return h;
}

}  // namespace

double BlochSiegertParams::resonance_residual() const {
    return base.omega_q - 2.0 * base.omega_r + 3.0 * omega_2bs + Omega_q;
}

double DispersiveParams::delta_abs() const { return std::abs(base.delta()); }

OperatorMatrix h_2jc(const SpaceLabel& space, const SystemParams& p, int mode, int qubit) {
    require_mode_qubit(space, mode, qubit, 2);
    Mat h = diagonal_op(space, mode, qubit, [&](int n, double sz) {
        return p.omega_r * n + 0.5 * p.omega_q * sz;
    });
    h += pair_exchange(space, mode, qubit, p.g, 0.0);
    return OperatorMatrix{space, std::move(h), true};
}

OperatorMatrix h_2jc_interaction(const SpaceLabel& space, const SystemParams& p,
                                 double t, int mode, int qubit) {
    require_mode_qubit(space, mode, qubit, 2);
    Mat h = pair_exchange(space, mode, qubit, p.g, p.delta() * t);
    return OperatorMatrix{space, std::move(h), true};
}

OperatorMatrix h_2qrm(const SpaceLabel& space, const SystemParams& p, int mode, int qubit) {
    require_mode_qubit(space, mode, qubit, 2);
    const auto [a, ad] = ladder_ops(space, mode);
    const Mat sx = qubit_op(space, qubit, 'x').matrix;
    Mat h = diagonal_op(space, mode, qubit, [&](int n, double sz) {
        return p.omega_r * n + 0.5 * p.omega_q * sz;
    });
    const Mat pair = a.matrix * a.matrix + ad.matrix * ad.matrix;
    h += p.g * sx * pair;
    return OperatorMatrix{space, std::move(h), true};
}

OperatorMatrix h_2bs(const SpaceLabel& space, const BlochSiegertParams& p,
                     std::vector<std::string>* warnings, int mode, int qubit) {
    require_mode_qubit(space, mode, qubit, 2);
    const double ratio = p.base.g * (kMeanPhotonBound + 1.0) / p.base.omega_q;
    if (warnings && ratio > 0.3)
        warnings->push_back("effective-model validity: g*(n_bar+1)/omega_q = " +
                            std::to_string(ratio) + " exceeds 0.3");
    const double w = 0.5 * p.omega_2bs + 2.0 * p.Omega_q;
    Mat h = diagonal_op(space, mode, qubit, [&](int n, double sz) {
        const double np = static_cast<double>(n) + static_cast<double>(n) * n;
        return (p.base.omega_r - p.omega_2bs) * n +
               0.5 * (p.base.omega_q + p.omega_2bs + p.Omega_q) * sz + w * sz * np;
    });
    h += pair_exchange(space, mode, qubit, p.base.g, 0.0);
    return OperatorMatrix{space, std::move(h), true};
}

OperatorMatrix h_2bs_interaction(const SpaceLabel& space, const BlochSiegertParams& p,
                                 int mode, int qubit) {
    require_mode_qubit(space, mode, qubit, 2);
    if (std::abs(p.resonance_residual()) > 1e-9 * p.base.omega_r)
        throw std::invalid_argument(
            "h_2bs_interaction: parameters are off resonance; the interaction "
            "picture is not time-independent");
    const double w = 0.5 * p.omega_2bs + 2.0 * p.Omega_q;
    Mat h = diagonal_op(space, mode, qubit, [&](int n, double sz) {
        const double np = static_cast<double>(n) + static_cast<double>(n) * n;
        return w * sz * np;
    });
    h += pair_exchange(space, mode, qubit, p.base.g, 0.0);
    return OperatorMatrix{space, std::move(h), true};
}

OperatorMatrix h_dispersive(const SpaceLabel& space, const DispersiveParams& p,
                            int mode, int qubit) {
    require_mode_qubit(space, mode, qubit, 2);
    Mat h = diagonal_op(space, mode, qubit, [&](int n, double sz) {
        const double np = static_cast<double>(n) + static_cast<double>(n) * n;
        return (p.base.omega_r + p.chi) * n + 0.5 * (p.base.omega_q + p.chi) * sz +
               0.5 * p.chi * sz * np;
    });
    return OperatorMatrix{space, std::move(h), true};
}

double solve_pusc_coupling(double r) {
    if (!(r > 0.0 && r < 2.0))
        throw std::invalid_argument("solve_pusc_coupling: r must lie in (0, 2)");
    return std::sqrt(4.0 * r - r * r * r) / (2.0 * std::sqrt(1.0 + 2.0 * r));
}

double pusc_k_residual(double r, int k) {
    // (-1)^(k+1) is -1 for even k, +1 for odd k.
    const double parity = (k % 2 == 0) ? -1.0 : 1.0;
    const double lhs = static_cast<double>(k) / (3.0 + parity);
    const double poly =
        1152.0 + 880.0 * r - 230.0 * r * r - 209.0 * r * r * r;
    const double rhs = std::sqrt((2.0 - r) * poly) /
                       (2.0 * (2.0 - r) * (8.0 + 5.0 * r));
    return lhs - rhs;
}

BlochSiegertParams solve_pusc_k(int k, double omega_r) {
    if (k < 4 || k == 5)
        throw std::invalid_argument(
            "solve_pusc_k: no phase-closure root exists in (0, 2) for k = " +
            std::to_string(k));
    const double r =
        bisect_root([k](double x) { return pusc_k_residual(x, k); }, 0.01, 1.99, 1e-12);

    BlochSiegertParams p;
    p.r = r;
    p.k = k;
    p.base.omega_r = omega_r;
    p.base.omega_q = r * omega_r;
    p.base.g = solve_pusc_coupling(r) * omega_r;
    const double g = p.base.g;
    p.omega_2bs = 2.0 * g * g / (2.0 * p.base.omega_r + p.base.omega_q);
    p.Omega_q = 2.0 * g * g / p.base.omega_q;
    p.B = -6.0 * (0.5 * p.omega_2bs + 2.0 * p.Omega_q);
    p.T_osc = 2.0 * kPi / std::sqrt(p.B * p.B + 8.0 * g * g);
    p.gate_time = k * p.T_osc;
    return p;
}

DispersiveParams solve_dispersive(int n, double delta_over_g_bar, double target_phase,
                                  double omega_r, std::vector<std::string>* warnings) {
    if (n < 1 || !(target_phase > 0.0 && target_phase < 2.0 * kPi) ||
        !(delta_over_g_bar > 0.0))
        throw std::invalid_argument(
            "solve_dispersive: inconsistent phase/integer combination");

    DispersiveParams p;
    p.n = n;
    p.m = n;
    p.target_phase = target_phase;
    p.gate_time = 2.0 * kPi * n / omega_r;
    // omega_r*t winds n full turns while (omega_r - chi)*t lands on
    // 2*pi*(n-1) + target_phase, i.e. chi*t = 2*pi - target_phase.
    p.chi = (2.0 * kPi - target_phase) / p.gate_time;
    // chi = 2 g^2/|delta| combined with |delta| = knob * g * (n_bar+1).
    p.base.g = 0.5 * p.chi * delta_over_g_bar * (kMeanPhotonBound + 1.0);
    const double delta_abs = 2.0 * p.base.g * p.base.g / p.chi;
    p.base.omega_r = omega_r;
    p.base.omega_q = 2.0 * omega_r + delta_abs;
    if (warnings && delta_over_g_bar < 10.0)
        warnings->push_back(
            "dispersive validity: |delta|/(g*(n_bar+1)) = " +
            std::to_string(delta_over_g_bar) + " is below the threshold 10");
    return p;
}

std::pair<double, double> dispersive_phase_residuals(const DispersiveParams& p) {
    const double t = p.gate_time;
    const double r1 = std::abs(p.base.omega_r * t - 2.0 * kPi * p.n);
    const double r2 = std::abs((p.base.omega_r - p.chi) * t -
                               (2.0 * kPi * (p.n - 1) + p.target_phase));
    return {r1, r2};
}

}  // namespace tpqr
