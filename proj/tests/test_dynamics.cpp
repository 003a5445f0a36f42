#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tpqr/dynamics.hpp"
#include "tpqr/models.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace tpqr;
using units::ghz_cyclic;

namespace {

constexpr double kPi = std::numbers::pi;

SystemParams sc_params() {
    return {ghz_cyclic(5.0), ghz_cyclic(10.0), ghz_cyclic(0.25)};
}

KetState three_level_plus(const SpaceLabel& space) {
    Vec amp = basis_ket(space, {0, 0}).amplitudes + basis_ket(space, {1, 0}).amplitudes +
              basis_ket(space, {2, 0}).amplitudes;
    return {space, amp / std::sqrt(3.0)};
}

Mat projector(const SpaceLabel& space, const std::vector<int>& occ) {
    const Vec v = basis_ket(space, occ).amplitudes;
    return v * v.adjoint();
}

}  // namespace

TEST_CASE("resonant two-photon exchange matches its closed form") {
    const SpaceLabel space = build_space({3}, 1);
    const SystemParams p = sc_params();
    const double g = p.g;
    const KetState psi0 = three_level_plus(space);
    const double period = 2.0 * kPi / (std::sqrt(2.0) * g);
    const TimeGrid grid{0.0, period, 240, 1};

    const auto closed_state = [&](double t) -> Vec {
        Vec amp = Vec::Zero(space.dim());
        const double s3 = std::sqrt(3.0);
        amp += basis_ket(space, {0, 0}).amplitudes / s3;
        amp += basis_ket(space, {1, 0}).amplitudes / s3;
        amp += std::cos(std::sqrt(2.0) * g * t) * basis_ket(space, {2, 0}).amplitudes / s3;
        amp += Complex(0.0, -std::sin(std::sqrt(2.0) * g * t)) *
               basis_ket(space, {0, 1}).amplitudes / s3;
        return amp;
    };

    SUBCASE("eigendecomposition path") {
        const EvolutionTrace trace = propagate_state(h_2jc_interaction(space, p, 0.0), psi0, grid);
        REQUIRE(trace.times.size() == 241);
        double worst = 0.0;
        for (size_t i = 0; i < trace.times.size(); ++i)
            worst = std::max(worst, (trace.kets[i] - closed_state(trace.times[i])).norm());
        CHECK(worst < 1e-12);
    }

    SUBCASE("fixed-step integrator path") {
        const TimeDepOperator h = [&](double t) { return h_2jc_interaction(space, p, t).matrix; };
        const EvolutionTrace trace = propagate_state(h, 4.0 * std::sqrt(2.0) * g, psi0, grid);
        double worst = 0.0;
        for (size_t i = 0; i < trace.times.size(); ++i)
            worst = std::max(worst, (trace.kets[i] - closed_state(trace.times[i])).norm());
        CHECK(worst < 1e-7);
        for (const Vec& k : trace.kets) CHECK(std::abs(k.norm() - 1.0) < 1e-9);
    }
}

TEST_CASE("static ultrastrong interaction matches the detuned-oscillation closed form") {
    const BlochSiegertParams bp = solve_pusc_k(4);
    const SpaceLabel space = build_space({6}, 1);
    const double g = bp.base.g;
    const double B = bp.B;
    const double Omega = std::sqrt(B * B + 8.0 * g * g);
    const KetState psi0 = three_level_plus(space);
    const TimeGrid grid{0.0, bp.T_osc, 200, 1};

    const auto closed_state = [&](double t) -> Vec {
        const double s3 = std::sqrt(3.0);
        const Complex rot = std::exp(Complex(0.0, -0.5 * B * t));
        const double c = std::cos(0.5 * Omega * t), s = std::sin(0.5 * Omega * t);
        Vec amp = Vec::Zero(space.dim());
        amp += basis_ket(space, {0, 0}).amplitudes / s3;
        amp += std::exp(Complex(0.0, -B * t / 3.0)) * basis_ket(space, {1, 0}).amplitudes / s3;
        amp += rot * Complex(c, -(B / Omega) * s) * basis_ket(space, {2, 0}).amplitudes / s3;
        amp += rot * Complex(0.0, -(2.0 * std::sqrt(2.0) * g / Omega) * s) *
               basis_ket(space, {0, 1}).amplitudes / s3;
        return amp;
    };

    const OperatorMatrix h_int = h_2bs_interaction(space, bp);

    SUBCASE("eigendecomposition path") {
        const EvolutionTrace trace = propagate_state(h_int, psi0, grid);
        double worst = 0.0;
        for (size_t i = 0; i < trace.times.size(); ++i)
            worst = std::max(worst, (trace.kets[i] - closed_state(trace.times[i])).norm());
        CHECK(worst < 1e-12);
    }

    SUBCASE("fixed-step integrator path") {
        const TimeDepOperator h = [&](double) { return h_int.matrix; };
        const EvolutionTrace trace = propagate_state(h, std::abs(B) + 4.0 * g, psi0, grid);
        double worst = 0.0;
        for (size_t i = 0; i < trace.times.size(); ++i)
            worst = std::max(worst, (trace.kets[i] - closed_state(trace.times[i])).norm());
        CHECK(worst < 1e-7);
    }

    SUBCASE("full oscillations return the pair amplitude to magnitude one") {
        const EvolutionTrace trace =
            propagate_state(h_int, psi0, TimeGrid{0.0, bp.gate_time, 4, 1});
        const Vec final = trace.kets.back();
        const Complex c2 = basis_ket(space, {2, 0}).amplitudes.adjoint() * final;
        const Complex c0e = basis_ket(space, {0, 1}).amplitudes.adjoint() * final;
        CHECK(std::abs(std::abs(c2) * std::sqrt(3.0) - 1.0) < 1e-10);
        CHECK(std::abs(c0e) < 1e-10);
    }
}

TEST_CASE("the two closed-system propagators agree on a static Hamiltonian") {
    const SpaceLabel space = build_space({4}, 1);
    const SystemParams p{ghz_cyclic(5.0), ghz_cyclic(9.3), ghz_cyclic(0.8)};
    const OperatorMatrix h = h_2qrm(space, p);
    const KetState psi0 = three_level_plus(space);
    const TimeGrid grid{0.0, 1.0, 40, 8};

    const EvolutionTrace exact = propagate_state(h, psi0, grid);
    const TimeDepOperator hf = [&](double) { return h.matrix; };
    const EvolutionTrace rk4 = propagate_state(hf, h.matrix.cwiseAbs().rowwise().sum().maxCoeff(),
                                               psi0, grid);
    REQUIRE(exact.times.size() == rk4.times.size());
    for (size_t i = 0; i < exact.times.size(); ++i)
        CHECK((exact.kets[i] - rk4.kets[i]).norm() < 1e-8);
}

TEST_CASE("far-detuned evolution accumulates the designed phases") {
    const DispersiveParams dp = solve_dispersive(3, std::sqrt(80.0));
    const SpaceLabel space = build_space({3}, 1);
    const KetState psi0 = three_level_plus(space);
    const EvolutionTrace trace =
        propagate_state(h_dispersive(space, dp), psi0, TimeGrid{0.0, dp.gate_time, 2, 1});

    const Vec final = trace.kets.back();
    const Complex u0 = Complex(basis_ket(space, {0, 0}).amplitudes.adjoint() * final) * std::sqrt(3.0);
    const Complex u1 = Complex(basis_ket(space, {1, 0}).amplitudes.adjoint() * final) * std::sqrt(3.0);
    const Complex u2 = Complex(basis_ket(space, {2, 0}).amplitudes.adjoint() * final) * std::sqrt(3.0);
    // One-photon phase returns to zero (mod 2 pi); the two-photon rail picks
    // up exactly the extra pi.
    CHECK(std::abs(u1 / u0 - 1.0) < 1e-9);
    CHECK(std::abs(u2 / u1 + 1.0) < 1e-9);
    CHECK(std::abs(std::abs(u0) - 1.0) < 1e-12);
}

TEST_CASE("propagation guards reject malformed inputs") {
    const SpaceLabel space = build_space({2}, 1);
    const int d = space.dim();
    const KetState psi0 = basis_ket(space, {0, 0});

    SUBCASE("zero Hamiltonian is the identity map") {
        const OperatorMatrix h{space, Mat::Zero(d, d), true};
        const EvolutionTrace trace = propagate_state(h, psi0, TimeGrid{0.0, 5.0, 10, 1});
        for (const Vec& k : trace.kets) CHECK((k - psi0.amplitudes).norm() < 1e-14);
    }

    SUBCASE("non-Hermitian generators throw") {
        Mat bad = Mat::Zero(d, d);
        bad(0, 1) = 1.0;
        const OperatorMatrix h{space, bad, false};
        CHECK_THROWS_AS(propagate_state(h, psi0, TimeGrid{0.0, 1.0, 4, 1}),
                        std::invalid_argument);
        const TimeDepOperator hf = [&](double) { return bad; };
        CHECK_THROWS_AS(propagate_state(hf, 1.0, psi0, TimeGrid{0.0, 1.0, 4, 1}),
                        std::invalid_argument);
    }

    SUBCASE("norm drift between samples aborts") {
        // Anti-Hermitian pumping that vanishes at every recorded boundary, so
        // it can only be caught by the norm monitor.
        const double dt = 0.5;
        const TimeDepOperator hf = [&](double t) {
            const double s = std::sin(kPi * t / dt);
            return Mat(Complex(0.0, 0.05 * s * s) * projector(space, {0, 0}));
        };
        CHECK_THROWS_AS(propagate_state(hf, 1.0, psi0, TimeGrid{0.0, 2.0, 4, 1}),
                        std::runtime_error);
    }

    SUBCASE("grid validation") {
        const OperatorMatrix h{space, Mat::Zero(d, d), true};
        CHECK_THROWS_AS(propagate_state(h, psi0, TimeGrid{1.0, 0.0, 4, 1}),
                        std::invalid_argument);
        CHECK_THROWS_AS(propagate_state(h, psi0, TimeGrid{0.0, 1.0, 0, 1}),
                        std::invalid_argument);
        const TimeDepOperator hf = [&](double) { return Mat::Zero(d, d); };
        CHECK_THROWS_AS(propagate_state(hf, 0.0, psi0, TimeGrid{0.0, 1.0, 4, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("master equation with zero rates matches unitary evolution") {
    const SpaceLabel space = build_space({3}, 1);
    const SystemParams p = sc_params();
    const OperatorMatrix h = h_2jc_interaction(space, p, 0.0);
    const KetState psi0 = three_level_plus(space);
    const TimeGrid grid{0.0, 1.0, 50, 10};

    const EvolutionTrace unitary = propagate_state(h, psi0, grid);
    const EvolutionTrace me = lindblad_evolve(h, NoiseParams{}, to_density(psi0), grid);
    REQUIRE(me.times.size() == unitary.times.size());
    for (size_t i = 0; i < me.times.size(); ++i) {
        const Mat ref = unitary.kets[i] * unitary.kets[i].adjoint();
        CHECK((me.densities[i] - ref).norm() < 1e-8);
    }
}

TEST_CASE("master equation keeps a constant state invariant") {
    const SpaceLabel space = build_space({2}, 1);
    const OperatorMatrix h{space, Mat::Zero(space.dim(), space.dim()), true};
    const DensityMatrix rho0 = to_density(three_level_plus(space));
    const EvolutionTrace trace = lindblad_evolve(h, NoiseParams{}, rho0, TimeGrid{0.0, 10.0, 20, 1});
    for (const Mat& rho : trace.densities) CHECK((rho - rho0.matrix).norm() < 1e-12);
}

TEST_CASE("two-photon exchange gate fidelity under standard noise") {
    const SpaceLabel space = build_space({3}, 1);
    const SystemParams p = sc_params();
    const double rate = units::per_us(0.05);
    const NoiseParams noise{rate, rate, rate};
    const KetState psi0 = three_level_plus(space);
    Vec target_amp = basis_ket(space, {0, 0}).amplitudes + basis_ket(space, {1, 0}).amplitudes -
                     basis_ket(space, {2, 0}).amplitudes;
    const KetState target{space, target_amp / std::sqrt(3.0)};
    const double t_gate = kPi / (std::sqrt(2.0) * p.g);

    const auto run = [&](double t_end) {
        const EvolutionTrace trace = lindblad_evolve(h_2jc_interaction(space, p, 0.0), noise,
                                                     to_density(psi0), TimeGrid{0.0, t_end, 100, 100});
        return fidelity(DensityMatrix{space, trace.densities.back()}, target);
    };

    const double f_opt = run(t_gate);
    CHECK(std::abs(f_opt - 0.9999430) < 5e-5);
    CHECK(std::abs(f_opt - 0.9995) <= 0.0005);

    const double f_early = run(0.95 * t_gate);
    const double f_late = run(1.05 * t_gate);
    CHECK(std::abs(f_early - 0.991756) < 1e-4);
    CHECK(std::abs(f_late - 0.991750) < 1e-4);
    CHECK(f_early >= 0.9913);
    CHECK(f_late >= 0.9913);
}

TEST_CASE("master equation guards") {
    const SpaceLabel space = build_space({2}, 1);
    const OperatorMatrix h{space, Mat::Zero(space.dim(), space.dim()), true};
    const DensityMatrix rho0 = to_density(basis_ket(space, {0, 0}));

    SUBCASE("negative rates throw") {
        CHECK_THROWS_AS(lindblad_evolve(h, NoiseParams{-1e-3, 0.0, 0.0}, rho0,
                                        TimeGrid{0.0, 1.0, 4, 1}),
                        std::invalid_argument);
        CHECK_THROWS_AS(
            lindblad_evolve_ops(h, {{Mat::Identity(4, 4), -0.1}}, rho0, TimeGrid{0.0, 1.0, 4, 1}),
            std::invalid_argument);
    }

    SUBCASE("implicit channels require a one-mode, one-qubit space") {
        const SpaceLabel big = build_space({2, 2}, 2);
        const OperatorMatrix hb{big, Mat::Zero(big.dim(), big.dim()), true};
        const DensityMatrix rb = to_density(basis_ket(big, {0, 0, 0, 0}));
        CHECK_THROWS_AS(lindblad_evolve(hb, NoiseParams{}, rb, TimeGrid{0.0, 1.0, 4, 1}),
                        std::invalid_argument);
        CHECK_NOTHROW(lindblad_evolve_ops(hb, {}, rb, TimeGrid{0.0, 1.0, 4, 1}));
    }

    SUBCASE("non-Hermitian Hamiltonian throws") {
        Mat bad = Mat::Zero(space.dim(), space.dim());
        bad(0, 1) = 1.0;
        CHECK_THROWS_AS(lindblad_evolve_ops(OperatorMatrix{space, bad, false}, {}, rho0,
                                            TimeGrid{0.0, 1.0, 4, 1}),
                        std::invalid_argument);
    }
}

TEST_CASE("dressed master equation reduces to unitary evolution at zero rates") {
    const SpaceLabel space = build_space({4}, 1);
    const SystemParams p{ghz_cyclic(5.0), ghz_cyclic(9.0), ghz_cyclic(1.1)};
    const OperatorMatrix h = h_2qrm(space, p);
    const KetState psi0 = three_level_plus(space);
    const TimeGrid grid{0.0, 0.8, 16, 4};

    const EvolutionTrace unitary = propagate_state(h, psi0, grid);
    const EvolutionTrace dressed = dressed_lindblad_evolve(
        h, standard_dressed_channels(space, p, 0.0, 0.0), to_density(psi0), grid);
    REQUIRE(dressed.times.size() == unitary.times.size());
    for (size_t i = 0; i < dressed.times.size(); ++i) {
        const Mat ref = unitary.kets[i] * unitary.kets[i].adjoint();
        CHECK((dressed.densities[i] - ref).norm() < 1e-8);
    }
}

TEST_CASE("dressed relaxation drains energy monotonically") {
    const SpaceLabel space = build_space({6}, 1);
    const SystemParams p{ghz_cyclic(5.0), ghz_cyclic(9.0), ghz_cyclic(1.0)};
    const OperatorMatrix h = h_2qrm(space, p);

    Eigen::SelfAdjointEigenSolver<Mat> solver(h.matrix);
    const Vec top = solver.eigenvectors().col(space.dim() - 1);
    const DensityMatrix rho0{space, top * top.adjoint()};

    EvolutionTrace trace = dressed_lindblad_evolve(
        h, standard_dressed_channels(space, p, 2e-3, 2e-3), rho0, TimeGrid{0.0, 400.0, 200, 10});
    const auto energy = attach_observables(trace, {{"energy", h.matrix}}).front();
    for (size_t i = 1; i < energy.size(); ++i) CHECK(energy[i] <= energy[i - 1] + 1e-10);
    CHECK(energy.back() < energy.front() - 0.1 * std::abs(energy.front()));
}

TEST_CASE("dressed and bare master equations agree at weak coupling") {
    const SpaceLabel space = build_space({6}, 1);
    const double omega_r = ghz_cyclic(5.0);
    const SystemParams p{omega_r, 1.9938 * omega_r, 0.05 * omega_r};
    const OperatorMatrix h = h_2qrm(space, p);
    const KetState psi0 = three_level_plus(space);
    const double rate = units::per_us(0.05);
    const TimeGrid grid{0.0, 2.0, 100, 100};

    const Vec target = propagate_state(h, psi0, grid).kets.back();

    const EvolutionTrace bare =
        lindblad_evolve(h, NoiseParams{rate, rate, 0.0}, to_density(psi0), grid);
    const EvolutionTrace dressed = dressed_lindblad_evolve(
        h, standard_dressed_channels(space, p, rate, rate), to_density(psi0), grid);

    const KetState target_ket{space, target};
    const double f_bare = fidelity(DensityMatrix{space, bare.densities.back()}, target_ket);
    const double f_dressed = fidelity(DensityMatrix{space, dressed.densities.back()}, target_ket);
    CHECK(f_bare < 1.0);
    CHECK(f_dressed < 1.0);
    CHECK(std::abs(f_bare - f_dressed) < 1e-4);
}

TEST_CASE("dressed solver honors the coherent override") {
    const BlochSiegertParams bp = solve_pusc_k(4);
    const SpaceLabel space = build_space({6}, 1);
    const OperatorMatrix h_full = h_2bs(space, bp);
    const OperatorMatrix h_int = h_2bs_interaction(space, bp);
    const KetState psi0 = three_level_plus(space);
    const TimeGrid grid{0.0, bp.gate_time, 40, 8};

    DressedOptions opts;
    opts.h_coherent = h_int.matrix;
    const EvolutionTrace dressed = dressed_lindblad_evolve(
        h_full, standard_dressed_channels(space, bp.base, 0.0, 0.0), to_density(psi0), grid, opts);

    const EvolutionTrace unitary = propagate_state(h_int, psi0, grid);
    REQUIRE(dressed.times.size() == unitary.times.size());
    for (size_t i = 0; i < dressed.times.size(); ++i) {
        const Mat ref = unitary.kets[i] * unitary.kets[i].adjoint();
        CHECK((dressed.densities[i] - ref).norm() < 1e-8);
    }
}

TEST_CASE("undressed dephasing channel damps interaction-picture coherences") {
    const BlochSiegertParams bp = solve_pusc_k(4);
    const SpaceLabel space = build_space({6}, 1);
    const OperatorMatrix h_full = h_2bs(space, bp);
    const OperatorMatrix h_int = h_2bs_interaction(space, bp);
    const KetState psi0 = three_level_plus(space);
    const TimeGrid grid{0.0, bp.gate_time, 20, 20};

    Vec target_amp = basis_ket(space, {0, 0}).amplitudes + basis_ket(space, {1, 0}).amplitudes +
                     basis_ket(space, {2, 0}).amplitudes;
    const EvolutionTrace ref = propagate_state(h_int, psi0, grid);
    const KetState target{space, ref.kets.back()};

    DressedOptions opts;
    opts.h_coherent = h_int.matrix;
    opts.bare_extra.push_back({qubit_op(space, 0, 'z').matrix, 0.5 * units::per_us(1.0)});
    const EvolutionTrace noisy = dressed_lindblad_evolve(
        h_full, standard_dressed_channels(space, bp.base, 0.0, 0.0), to_density(psi0), grid, opts);

    const double f = fidelity(DensityMatrix{space, noisy.densities.back()}, target);
    CHECK(f < 1.0 - 1e-6);
    CHECK(f > 0.99);
}

TEST_CASE("degenerate spectra are reported") {
    const SpaceLabel space = build_space({4}, 1);
    const SystemParams p{ghz_cyclic(5.0), ghz_cyclic(10.0), 0.0};  // exact pair degeneracies
    const OperatorMatrix h = h_2qrm(space, p);

    std::vector<std::string> warnings;
    DressedOptions opts;
    opts.warnings = &warnings;
    const EvolutionTrace trace = dressed_lindblad_evolve(
        h, standard_dressed_channels(space, p, 1e-4, 0.0), to_density(basis_ket(space, {2, 0})),
        TimeGrid{0.0, 1.0, 4, 1}, opts);
    CHECK(!warnings.empty());
    CHECK(warnings.front().find("degenerate") != std::string::npos);
    CHECK(std::abs(trace.densities.back().trace().real() - 1.0) < 1e-9);
}

TEST_CASE("dressed solver guards") {
    const SpaceLabel space = build_space({2}, 1);
    const int d = space.dim();
    const OperatorMatrix h{space, Mat::Zero(d, d), true};
    const DensityMatrix rho0 = to_density(basis_ket(space, {0, 0}));

    CHECK_THROWS_AS(dressed_lindblad_evolve(h, {{Mat::Identity(d, d), -1.0, 1.0}}, rho0,
                                            TimeGrid{0.0, 1.0, 4, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(dressed_lindblad_evolve(h, {{Mat::Identity(d, d), 1.0, 0.0}}, rho0,
                                            TimeGrid{0.0, 1.0, 4, 1}),
                    std::invalid_argument);
    Mat bad = Mat::Zero(d, d);
    bad(0, 1) = 1.0;
    CHECK_THROWS_AS(dressed_lindblad_evolve(OperatorMatrix{space, bad, false}, {}, rho0,
                                            TimeGrid{0.0, 1.0, 4, 1}),
                    std::invalid_argument);
}

TEST_CASE("observable series and CSV export") {
    const SpaceLabel space = build_space({3}, 1);
    const SystemParams p = sc_params();
    const double g = p.g;
    const KetState psi0 = basis_ket(space, {2, 0});
    const TimeGrid grid{0.0, kPi / (std::sqrt(2.0) * g), 80, 1};
    EvolutionTrace trace = propagate_state(h_2jc_interaction(space, p, 0.0), psi0, grid);

    std::vector<NamedObservable> obs;
    obs.push_back({"p_pair", projector(space, {2, 0})});
    obs.push_back({"p_excited", projector(space, {0, 1})});
    Mat total = Mat::Zero(space.dim(), space.dim());
    for (int i = 0; i < space.dim(); ++i) total += projector(space, space.unpack(i));
    obs.push_back({"p_total", total});

    const auto series = attach_observables(trace, obs);
    REQUIRE(series.size() == 3);
    for (size_t i = 0; i < trace.times.size(); ++i) {
        const double t = trace.times[i];
        const double c = std::cos(std::sqrt(2.0) * g * t);
        CHECK(series[0][i] == doctest::Approx(c * c).epsilon(1e-9));
        CHECK(series[1][i] == doctest::Approx(1.0 - c * c).epsilon(1e-9));
        CHECK(series[2][i] == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("detuned-oscillation leakage peaks below one") {
        const BlochSiegertParams bp = solve_pusc_k(6);
        const SpaceLabel bs = build_space({4}, 1);
        EvolutionTrace osc = propagate_state(h_2bs_interaction(bs, bp), basis_ket(bs, {2, 0}),
                                             TimeGrid{0.0, bp.T_osc, 200, 1});
        const auto leak = attach_observables(osc, {{"p_leak", projector(bs, {0, 1})}}).front();
        const double expected_peak =
            8.0 * bp.base.g * bp.base.g / (bp.B * bp.B + 8.0 * bp.base.g * bp.base.g);
        double peak = 0.0;
        for (size_t i = 0; i < leak.size(); ++i) {
            peak = std::max(peak, leak[i]);
            const double t = osc.times[i];
            const double s = std::sin(0.5 * std::sqrt(bp.B * bp.B + 8.0 * bp.base.g * bp.base.g) * t);
            CHECK(leak[i] == doctest::Approx(expected_peak * s * s).epsilon(1e-7));
        }
        CHECK(peak == doctest::Approx(expected_peak).epsilon(1e-4));
        CHECK(peak < 1.0);
    }

    SUBCASE("export is deterministic and ordered") {
        const std::string path_a = "dyn_export_a.csv";
        const std::string path_b = "dyn_export_b.csv";
        export_csv(trace, path_a);
        export_csv(trace, path_b);

        std::ifstream fa(path_a), fb(path_b);
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        REQUIRE(!sa.str().empty());
        CHECK(sa.str() == sb.str());

        std::string header;
        std::stringstream lines(sa.str());
        std::getline(lines, header);
        CHECK(header == "time_ns,p_pair,p_excited,p_total");
        std::string first;
        std::getline(lines, first);
        double t0 = -1.0, v0 = -1.0;
        std::sscanf(first.c_str(), "%lg,%lg", &t0, &v0);
        CHECK(t0 == 0.0);
        CHECK(v0 == doctest::Approx(1.0).epsilon(1e-12));
        std::remove(path_a.c_str());
        std::remove(path_b.c_str());
    }

    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(attach_observables(trace, {{"bad", Mat::Identity(3, 3)}}),
                        std::invalid_argument);
    }
}
