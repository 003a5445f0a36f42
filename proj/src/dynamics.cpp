#include "tpqr/dynamics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace tpqr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kStepTol = 1e-10;   // per-step halving-guard error estimate
constexpr double kNormTol = 1e-8;    // norm / trace drift abort threshold

void require_hermitian(const Mat& m, const char* who) {
    if (hermiticity_defect(m) > 1e-10 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw std::invalid_argument(std::string(who) + ": operator is not Hermitian");
}

bool record_at(int boundary, int steps, int stride) {
    return boundary % std::max(stride, 1) == 0 || boundary == steps;
}

void validate_grid(const TimeGrid& grid) {
    if (!(grid.t_end > grid.t_start) || grid.steps < 1)
        throw std::invalid_argument("time grid: need t_end > t_start and steps >= 1");
}

// Spectral-radius upper bound (Gershgorin) used to pick the RK4 step.
double frequency_bound(const Mat& h) {
    double best = 0.0;
    for (int i = 0; i < h.rows(); ++i) best = std::max(best, h.row(i).cwiseAbs().sum());
    return best;
}

// One classical RK4 step of y' = rhs(t, y).
template <typename StateT, typename Rhs>
StateT rk4_step(const Rhs& rhs, double t, const StateT& y, double h) {
    const StateT k1 = rhs(t, y);
    const StateT k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1);
    const StateT k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2);
    const StateT k4 = rhs(t + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Integrates y across [t0, t1] with the persistent substep *h_cur, halving it
// whenever the step-doubling error estimate exceeds kStepTol. The halved step
// is kept for the rest of the run (deterministic, monotone).
template <typename StateT, typename Rhs>
void integrate_guarded(StateT& y, double t0, double t1, double* h_cur, const Rhs& rhs) {
    double t = t0;
    while (t < t1 - 1e-15 * std::max(1.0, std::abs(t1))) {
        const double h = std::min(*h_cur, t1 - t);
        const StateT full = rk4_step(rhs, t, y, h);
        const StateT half = rk4_step(rhs, t + 0.5 * h,
                                     rk4_step(rhs, t, y, 0.5 * h), 0.5 * h);
        if ((full - half).norm() > kStepTol && *h_cur > 1e-9) {
            *h_cur *= 0.5;
            continue;
        }
        y = half;
        t += h;
    }
}

}  // namespace

EvolutionTrace propagate_state(const OperatorMatrix& h, const KetState& psi0,
                               const TimeGrid& grid) {
    validate_grid(grid);
    require_hermitian(h.matrix, "propagate_state");
    if (h.matrix.rows() != psi0.amplitudes.size())
        throw std::invalid_argument("propagate_state: dimension mismatch");

    Eigen::SelfAdjointEigenSolver<Mat> solver(h.matrix);
    const Mat& v = solver.eigenvectors();
    const Eigen::VectorXd& e = solver.eigenvalues();
    const Vec c0 = v.adjoint() * psi0.amplitudes;

    EvolutionTrace trace;
    trace.space = psi0.space;
    const double dt = (grid.t_end - grid.t_start) / grid.steps;
    for (int b = 0; b <= grid.steps; ++b) {
        if (!record_at(b, grid.steps, grid.sample_stride)) continue;
        const double t = grid.t_start + b * dt;
        Vec phases(c0.size());
        for (int i = 0; i < c0.size(); ++i)
            phases(i) = std::exp(Complex(0.0, -e(i) * (t - grid.t_start))) * c0(i);
        trace.times.push_back(t);
        trace.kets.push_back(v * phases);
    }
    return trace;
}

EvolutionTrace propagate_state(const TimeDepOperator& h, double omega_max,
                               const KetState& psi0, const TimeGrid& grid) {
    validate_grid(grid);
    if (!(omega_max > 0.0))
        throw std::invalid_argument("propagate_state: omega_max must be positive");

    const double dt = (grid.t_end - grid.t_start) / grid.steps;
    double h_cur = std::min(kTwoPi / (50.0 * omega_max), dt);
    const double norm0 = psi0.amplitudes.norm();

    const auto rhs = [&h](double t, const Vec& y) -> Vec {
        return Complex(0.0, -1.0) * (h(t) * y);
    };

    EvolutionTrace trace;
    trace.space = psi0.space;
    Vec y = psi0.amplitudes;
    for (int b = 0; b <= grid.steps; ++b) {
        const double t = grid.t_start + b * dt;
        if (b > 0) integrate_guarded(y, t - dt, t, &h_cur, rhs);
        if (!record_at(b, grid.steps, grid.sample_stride)) continue;
        require_hermitian(h(t), "propagate_state");
        if (std::abs(y.norm() - norm0) > kNormTol * std::max(1.0, norm0))
            throw std::runtime_error("propagate_state: norm drift beyond tolerance");
        trace.times.push_back(t);
        trace.kets.push_back(y);
    }
    return trace;
}

EvolutionTrace lindblad_evolve_ops(const OperatorMatrix& h,
                                   const std::vector<CollapseChannel>& channels,
                                   const DensityMatrix& rho0, const TimeGrid& grid) {
    validate_grid(grid);
    require_hermitian(h.matrix, "lindblad_evolve");
    check_density_invariants(rho0);
    const int d = static_cast<int>(h.matrix.rows());
    if (rho0.matrix.rows() != d)
        throw std::invalid_argument("lindblad_evolve: dimension mismatch");

    struct Prepared {
        Mat l;
        double rate;
    };
    std::vector<Prepared> prep;
    // -iH - (1/2) sum rate L'L folded into one generator: the master equation
    // is then rho' = K rho + rho K' + sum rate L rho L'.
    Mat k_eff = Complex(0.0, -1.0) * h.matrix;
    double rate_scale = 0.0;
    for (const CollapseChannel& c : channels) {
        if (c.rate < 0.0)
            throw std::invalid_argument("lindblad_evolve: negative rate");
        if (c.rate == 0.0) continue;
        const Mat ldl = c.op.adjoint() * c.op;
        k_eff -= (0.5 * c.rate) * ldl;
        rate_scale += c.rate * frequency_bound(ldl);
        prep.push_back({c.op, c.rate});
    }

    const auto rhs = [&](double, const Mat& rho) -> Mat {
        Mat out = k_eff * rho + rho * k_eff.adjoint();
        for (const Prepared& p : prep)
            out.noalias() += p.rate * (p.l * rho * p.l.adjoint());
        return out;
    };

    const double dt = (grid.t_end - grid.t_start) / grid.steps;
    double h_cur = std::min(kTwoPi / (50.0 * (frequency_bound(h.matrix) + rate_scale + 1e-12)), dt);

    EvolutionTrace trace;
    trace.space = rho0.space;
    Mat rho = rho0.matrix;
    for (int b = 0; b <= grid.steps; ++b) {
        const double t = grid.t_start + b * dt;
        if (b > 0) {
            integrate_guarded(rho, t - dt, t, &h_cur, rhs);
            rho = 0.5 * (rho + rho.adjoint().eval());  // project out roundoff skew
        }
        if (!record_at(b, grid.steps, grid.sample_stride)) continue;
        if (std::abs(rho.trace().real() - 1.0) > kNormTol)
            throw std::runtime_error("lindblad_evolve: trace drift beyond tolerance");
        DensityMatrix snapshot{rho0.space, rho};
        check_density_invariants(snapshot);
        trace.times.push_back(t);
        trace.densities.push_back(rho);
    }
    return trace;
}

EvolutionTrace lindblad_evolve(const OperatorMatrix& h, const NoiseParams& noise,
                               const DensityMatrix& rho0, const TimeGrid& grid) {
    if (noise.kappa < 0.0 || noise.gamma < 0.0 || noise.gamma_phi < 0.0)
        throw std::invalid_argument("lindblad_evolve: negative rate");
    const SpaceLabel& space = rho0.space;
    if (space.mode_cutoffs.size() != 1 || space.qubit_count != 1)
        throw std::invalid_argument(
            "lindblad_evolve: implicit channels need a one-mode, one-qubit space; "
            "use lindblad_evolve_ops otherwise");
    std::vector<CollapseChannel> channels;
    channels.push_back({ladder_ops(space, 0).first.matrix, noise.kappa});
    channels.push_back({qubit_op(space, 0, '-').matrix, noise.gamma});
    channels.push_back({qubit_op(space, 0, 'z').matrix, 0.5 * noise.gamma_phi});
    return lindblad_evolve_ops(h, channels, rho0, grid);
}

std::vector<DressedChannelSeed> standard_dressed_channels(const SpaceLabel& space,
                                                          const SystemParams& params,
                                                          double kappa, double gamma,
                                                          int mode, int qubit) {
    const auto [a, ad] = ladder_ops(space, mode);
    std::vector<DressedChannelSeed> seeds;
    seeds.push_back({a.matrix + ad.matrix, kappa, params.omega_r});
    seeds.push_back({qubit_op(space, qubit, 'x').matrix, gamma, params.omega_q});
    return seeds;
}

EvolutionTrace dressed_lindblad_evolve(const OperatorMatrix& h_full,
                                       const std::vector<DressedChannelSeed>& seeds,
                                       const DensityMatrix& rho0, const TimeGrid& grid,
                                       const DressedOptions& options) {
    validate_grid(grid);
    require_hermitian(h_full.matrix, "dressed_lindblad_evolve");
    check_density_invariants(rho0);
    const int d = static_cast<int>(h_full.matrix.rows());
    if (rho0.matrix.rows() != d)
        throw std::invalid_argument("dressed_lindblad_evolve: dimension mismatch");
    for (const DressedChannelSeed& s : seeds) {
        if (s.rate < 0.0)
            throw std::invalid_argument("dressed_lindblad_evolve: negative rate");
        if (!(s.freq_scale > 0.0))
            throw std::invalid_argument("dressed_lindblad_evolve: freq_scale must be positive");
    }
    for (const CollapseChannel& c : options.bare_extra)
        if (c.rate < 0.0)
            throw std::invalid_argument("dressed_lindblad_evolve: negative rate");

    Eigen::SelfAdjointEigenSolver<Mat> solver(h_full.matrix);
    Eigen::VectorXd e = solver.eigenvalues();
    Mat v = solver.eigenvectors();
    const double e_scale = std::max(1.0, e.cwiseAbs().maxCoeff());

    // Degenerate clusters: report, optionally co-diagonalize the coherent
    // override inside them, and fix an overlap-based deterministic order.
    std::vector<std::pair<int, int>> clusters;  // [first, last]
    for (int i = 0; i < d;) {
        int j = i;
        while (j + 1 < d && e(j + 1) - e(j) < 1e-12 * e_scale) ++j;
        if (j > i) clusters.push_back({i, j});
        i = j + 1;
    }
    if (options.warnings)
        for (const auto& [lo, hi] : clusters)
            options.warnings->push_back(
                "degenerate eigenvalues: indices " + std::to_string(lo) + ".." +
                std::to_string(hi) + " within 1e-12 relative spacing");
    if (options.h_coherent) {
        for (const auto& [lo, hi] : clusters) {
            const int w = hi - lo + 1;
            const Mat block =
                v.middleCols(lo, w).adjoint() * (*options.h_coherent) * v.middleCols(lo, w);
            Eigen::SelfAdjointEigenSolver<Mat> sub(0.5 * (block + block.adjoint()));
            v.middleCols(lo, w) = (v.middleCols(lo, w) * sub.eigenvectors()).eval();
        }
    }
    for (const auto& [lo, hi] : clusters) {
        // Stable order inside clusters: by the bare index each column lives on.
        std::vector<int> order(hi - lo + 1);
        for (size_t idx = 0; idx < order.size(); ++idx) order[idx] = lo + static_cast<int>(idx);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            int ia = 0, ib = 0;
            v.col(a).cwiseAbs().maxCoeff(&ia);
            v.col(b).cwiseAbs().maxCoeff(&ib);
            return ia < ib;
        });
        Mat rearranged(d, hi - lo + 1);
        for (size_t idx = 0; idx < order.size(); ++idx) rearranged.col(idx) = v.col(order[idx]);
        v.middleCols(lo, hi - lo + 1) = rearranged;
    }
    for (int i = 0; i < d; ++i) {
        int peak = 0;
        v.col(i).cwiseAbs().maxCoeff(&peak);
        const Complex z = v(peak, i);
        if (std::abs(z) > 0.0) v.col(i) *= std::conj(z) / std::abs(z);
    }

    // Expand seeds into eigenbasis jump rates: gamma_jk drains k into j (k>j).
    Eigen::MatrixXd gain = Eigen::MatrixXd::Zero(d, d);  // gain(j,k): flow k -> j
    Eigen::VectorXd out_rate = Eigen::VectorXd::Zero(d);
    for (const DressedChannelSeed& s : seeds) {
        if (s.rate == 0.0) continue;
        const Mat x_eig = v.adjoint() * s.op * v;
        for (int k = 1; k < d; ++k) {
            for (int j = 0; j < k; ++j) {
                const double w2 = std::norm(x_eig(k, j));
                const double rate = s.rate * ((e(k) - e(j)) / s.freq_scale) * w2;
                if (rate <= 0.0) continue;
                gain(j, k) += rate;
                out_rate(k) += rate;
            }
        }
    }

    const Mat h_c = options.h_coherent ? (v.adjoint() * (*options.h_coherent) * v).eval()
                                       : Mat(e.cast<Complex>().asDiagonal());
    Mat h_c_off = h_c;
    h_c_off.diagonal().setZero();
    const bool coherent_diagonal = h_c_off.cwiseAbs().maxCoeff() < 1e-10 * e_scale;

    std::vector<std::pair<Mat, double>> extra;  // (L in eigenbasis, rate)
    bool extra_diagonal = true;
    for (const CollapseChannel& c : options.bare_extra) {
        if (c.rate == 0.0) continue;
        Mat l_eig = v.adjoint() * c.op * v;
        Mat off = l_eig;
        off.diagonal().setZero();
        if (off.cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, l_eig.cwiseAbs().maxCoeff()))
            extra_diagonal = false;
        extra.push_back({std::move(l_eig), c.rate});
    }

    const Eigen::VectorXd e_c = h_c.diagonal().real();
    const double dt = (grid.t_end - grid.t_start) / grid.steps;

    EvolutionTrace trace;
    trace.space = rho0.space;
    Mat rho = v.adjoint() * rho0.matrix * v;

    const auto record = [&](double t, const Mat& rho_eig) {
        if (std::abs(rho_eig.trace().real() - 1.0) > kNormTol)
            throw std::runtime_error("dressed_lindblad_evolve: trace drift beyond tolerance");
        Mat lab = v * rho_eig * v.adjoint();
        lab = 0.5 * (lab + lab.adjoint().eval());
        DensityMatrix snapshot{rho0.space, lab};
        check_density_invariants(snapshot);
        trace.times.push_back(t);
        trace.densities.push_back(std::move(lab));
    };

    if (coherent_diagonal && extra_diagonal) {
        // Exactly solvable: populations follow a classical rate equation and
        // each coherence evolves by a scalar generator.
        Mat coh_gen = Mat::Zero(d, d);
        for (int m = 0; m < d; ++m)
            for (int n = 0; n < d; ++n) {
                Complex gen(-0.5 * (out_rate(m) + out_rate(n)), -(e_c(m) - e_c(n)));
                for (const auto& [l_eig, rate] : extra) {
                    const Complex lm = l_eig(m, m), ln = l_eig(n, n);
                    gen += rate * (lm * std::conj(ln) -
                                   0.5 * (std::norm(lm) + std::norm(ln)));
                }
                coh_gen(m, n) = gen;
            }

        const Eigen::VectorXd p0 = rho.diagonal().real();
        const Mat rho0_eig = rho;
        const auto pop_rhs = [&](double, const Eigen::VectorXd& p) -> Eigen::VectorXd {
            return gain * p - out_rate.cwiseProduct(p);
        };
        Eigen::VectorXd p = p0;
        double t_prev = grid.t_start;
        const double h_pop = (grid.t_end - grid.t_start) / std::max(grid.steps, 4000);
        for (int b = 0; b <= grid.steps; ++b) {
            const double t = grid.t_start + b * dt;
            if (b > 0) {
                double hp = h_pop;
                integrate_guarded(p, t_prev, t, &hp, pop_rhs);
                t_prev = t;
            }
            if (!record_at(b, grid.steps, grid.sample_stride)) continue;
            const double span = t - grid.t_start;
            Mat rho_t(d, d);
            for (int m = 0; m < d; ++m)
                for (int n = 0; n < d; ++n)
                    rho_t(m, n) = (m == n) ? Complex(p(m))
                                           : std::exp(coh_gen(m, n) * span) * rho0_eig(m, n);
            record(t, rho_t);
        }
        return trace;
    }

    // General path: RK4 in the eigenbasis, where the jump dissipator has the
    // closed population/coherence form and only the coherent part (plus any
    // non-diagonal bare channels) needs matrix products.
    std::vector<std::pair<Mat, double>> extra_prep;  // (L, rate) with L'L cached
    std::vector<Mat> extra_ldl;
    for (const auto& [l_eig, rate] : extra) {
        extra_prep.push_back({l_eig, rate});
        extra_ldl.push_back(l_eig.adjoint() * l_eig);
    }
    const auto rhs = [&](double, const Mat& r) -> Mat {
        Mat out(d, d);
        if (coherent_diagonal) {
            for (int m = 0; m < d; ++m)
                for (int n = 0; n < d; ++n)
                    out(m, n) = Complex(0.0, -(e_c(m) - e_c(n))) * r(m, n);
        } else {
            out = Complex(0.0, -1.0) * (h_c * r - r * h_c);
        }
        const Eigen::VectorXd pops = r.diagonal().real();
        const Eigen::VectorXd feed = gain * pops;
        for (int m = 0; m < d; ++m)
            for (int n = 0; n < d; ++n) {
                out(m, n) -= 0.5 * (out_rate(m) + out_rate(n)) * r(m, n);
                if (m == n) out(m, n) += feed(m);
            }
        for (size_t i = 0; i < extra_prep.size(); ++i) {
            const auto& [l, rate] = extra_prep[i];
            out.noalias() += rate * (l * r * l.adjoint());
            out.noalias() -= (0.5 * rate) * (extra_ldl[i] * r + r * extra_ldl[i]);
        }
        return out;
    };

    double h_cur = std::min(kTwoPi / (50.0 * (frequency_bound(h_c) + 1e-12)), dt);
    for (int b = 0; b <= grid.steps; ++b) {
        const double t = grid.t_start + b * dt;
        if (b > 0) {
            integrate_guarded(rho, t - dt, t, &h_cur, rhs);
            rho = 0.5 * (rho + rho.adjoint().eval());
        }
        if (!record_at(b, grid.steps, grid.sample_stride)) continue;
        record(t, rho);
    }
    return trace;
}

std::vector<std::vector<double>> attach_observables(
    EvolutionTrace& trace, const std::vector<NamedObservable>& observables) {
    const size_t count = trace.is_density() ? trace.densities.size() : trace.kets.size();
    if (count != trace.times.size())
        throw std::invalid_argument("attach_observables: malformed trace");

    std::vector<std::vector<double>> out;
    for (const NamedObservable& obs : observables) {
        std::vector<double> series;
        series.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            if (trace.is_density()) {
                if (obs.op.rows() != trace.densities[i].rows())
                    throw std::invalid_argument("attach_observables: dimension mismatch");
                series.push_back((obs.op * trace.densities[i]).trace().real());
            } else {
                if (obs.op.rows() != trace.kets[i].size())
                    throw std::invalid_argument("attach_observables: dimension mismatch");
                series.push_back(
                    (trace.kets[i].adjoint() * obs.op * trace.kets[i])(0, 0).real());
            }
        }
        trace.observable_names.push_back(obs.name);
        trace.observables.push_back(series);
        out.push_back(std::move(series));
    }
    return out;
}

void export_csv(const EvolutionTrace& trace, const std::string& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("export_csv: cannot open " + path);

    file << "time_ns";
    for (const std::string& name : trace.observable_names) file << "," << name;
    file << "\n";

    char buf[64];
    for (size_t i = 0; i < trace.times.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", trace.times[i]);
        file << buf;
        for (const auto& series : trace.observables) {
            std::snprintf(buf, sizeof(buf), "%.17g", series.at(i));
            file << "," << buf;
        }
        file << "\n";
    }
}

}  // namespace tpqr
