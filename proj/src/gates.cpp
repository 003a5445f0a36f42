#include "tpqr/gates.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tpqr {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double x) {  // into (-pi, pi]
    return std::atan2(std::sin(x), std::cos(x));
}

struct PhotonicInput {
    Vec amps;  // size cutoff + 1
    int cutoff = 0;
};

// Accepts a bare photonic mode or a mode already joined with one qubit that
// must sit in |g>.
PhotonicInput split_single_mode(const KetState& psi0) {
    const SpaceLabel& s = psi0.space;
    if (s.mode_cutoffs.size() != 1)
        throw std::invalid_argument("ns protocol: expects a single photonic mode");
    if (s.mode_cutoffs[0] < 2)
        throw std::invalid_argument("ns protocol: mode cutoff must be >= 2");
    if (std::abs(psi0.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("ns protocol: input state must be normalized");

    PhotonicInput in;
    in.cutoff = s.mode_cutoffs[0];
    in.amps = Vec::Zero(in.cutoff + 1);
    if (s.qubit_count == 0) {
        in.amps = psi0.amplitudes;
        return in;
    }
    if (s.qubit_count != 1)
        throw std::invalid_argument("ns protocol: expects at most one qubit");
    for (int i = 0; i < s.dim(); ++i) {
        const auto occ = s.unpack(i);
        if (occ[1] == 1) {
            if (std::abs(psi0.amplitudes(i)) > 1e-12)
                throw std::invalid_argument("ns protocol: qubit must start in |g>");
        } else {
            in.amps(occ[0]) = psi0.amplitudes(i);
        }
    }
    return in;
}

KetState joint_ground(const SpaceLabel& joint, const Vec& photonic) {
    Vec v = Vec::Zero(joint.dim());
    const int n_max = std::min<int>(joint.mode_cutoffs[0], static_cast<int>(photonic.size()) - 1);
    for (int n = 0; n <= n_max; ++n) v(joint.pack({n, 0})) = photonic(n);
    return {joint, v};
}

Mat number_projector(const SpaceLabel& joint, int n) {
    Mat p = Mat::Zero(joint.dim(), joint.dim());
    for (int q = 0; q < 2; ++q) {
        const int i = joint.pack({n, q});
        p(i, i) = 1.0;
    }
    return p;
}

std::vector<NamedObservable> ns_observables(const SpaceLabel& joint) {
    std::vector<NamedObservable> obs;
    for (int n = 0; n <= 2; ++n)
        obs.push_back({"p" + std::to_string(n), number_projector(joint, n)});
    Mat pe = Mat::Zero(joint.dim(), joint.dim());
    for (int i = 0; i < joint.dim(); ++i)
        if (joint.unpack(i)[1] == 1) pe(i, i) = 1.0;
    obs.push_back({"p_qubit_excited", pe});
    return obs;
}

Vec flip_two_photon(Vec photonic) {
    photonic(2) = -photonic(2);
    return photonic;
}

void push_noise(std::vector<std::pair<std::string, double>>& params, const NoiseParams& n) {
    params.emplace_back("kappa_per_ns", n.kappa);
    params.emplace_back("gamma_per_ns", n.gamma);
    params.emplace_back("gamma_phi_per_ns", n.gamma_phi);
}

void require_two_rail_photonic(const SpaceLabel& s) {
    if (s.mode_cutoffs.size() != 2 || s.qubit_count != 0 || s.mode_cutoffs[0] != 2 ||
        s.mode_cutoffs[1] != 2)
        throw std::invalid_argument("cz: expects two photonic rails with cutoff 2 each");
}

}  // namespace

BeamSplitter beam_splitter_unitary(double theta) {
    const double s = std::sin(theta), c = std::cos(theta);
    BeamSplitter bs;
    bs.theta = theta;
    bs.block_1photon << -s, c, c, s;
    const double cross = std::sqrt(2.0) * s * c;
    bs.lifted_2photon << s * s, -cross, c * c,
                        -cross, c * c - s * s, cross,
                         c * c, cross, s * s;
    return bs;
}

Mat beam_splitter_matrix(const BeamSplitter& bs, const SpaceLabel& space) {
    if (space.mode_cutoffs.size() != 2 || space.qubit_count != 0 ||
        space.mode_cutoffs[0] < 2 || space.mode_cutoffs[1] < 2)
        throw std::invalid_argument("beam splitter: expects two photonic modes, cutoffs >= 2");

    Mat u = Mat::Identity(space.dim(), space.dim());
    const int i01 = space.pack({0, 1}), i10 = space.pack({1, 0});
    const int one[2] = {i01, i10};
    for (int col = 0; col < 2; ++col)
        for (int row = 0; row < 2; ++row) u(one[row], one[col]) = bs.block_1photon(row, col);

    const int two[3] = {space.pack({0, 2}), space.pack({1, 1}), space.pack({2, 0})};
    for (int col = 0; col < 3; ++col)
        for (int row = 0; row < 3; ++row) u(two[row], two[col]) = bs.lifted_2photon(row, col);
    return u;
}

KetState ns_apply_ideal(const KetState& photonic, int mode) {
    const SpaceLabel& s = photonic.space;
    if (mode < 0 || mode >= static_cast<int>(s.mode_cutoffs.size()))
        throw std::invalid_argument("ns_apply_ideal: no such mode");
    if (s.mode_cutoffs[mode] < 2)
        throw std::invalid_argument("ns_apply_ideal: mode cutoff must be >= 2");
    KetState out = photonic;
    for (int i = 0; i < s.dim(); ++i)
        if (s.unpack(i)[mode] == 2) out.amplitudes(i) = -out.amplitudes(i);
    return out;
}

KetState standard_ns_input(int cutoff) {
    const SpaceLabel space = build_space({cutoff}, 0);
    Vec v = Vec::Zero(space.dim());
    for (int n = 0; n <= 2; ++n) v(n) = 1.0 / std::sqrt(3.0);
    return {space, v};
}

KetState standard_cz_input() {
    const SpaceLabel space = build_space({2, 2}, 0);
    Vec v = Vec::Zero(space.dim());
    v(space.pack({0, 0})) = 0.5;
    v(space.pack({0, 1})) = 0.5;
    v(space.pack({1, 0})) = 0.5;
    v(space.pack({1, 1})) = 0.5;
    return {space, v};
}

GateReport ns_protocol_sc(const SystemParams& p, const NoiseParams& noise,
                          const KetState& psi0) {
    const PhotonicInput in = split_single_mode(psi0);
    if (std::abs(p.delta()) > 1e-9 * p.omega_r)
        throw std::invalid_argument("ns_protocol_sc: requires omega_q = 2 omega_r");

    const SpaceLabel joint = build_space({in.cutoff}, 1);
    const KetState psi = joint_ground(joint, in.amps);
    const double t_gate = kPi / (std::sqrt(2.0) * p.g);

    EvolutionTrace trace = lindblad_evolve(h_2jc_interaction(joint, p, 0.0), noise,
                                           to_density(psi), TimeGrid{0.0, t_gate, 400, 20});
    attach_observables(trace, ns_observables(joint));

    const KetState target = joint_ground(joint, flip_two_photon(in.amps));
    const double f = fidelity(DensityMatrix{joint, trace.densities.back()}, target);

    GateReport report;
    report.protocol = "ns_sc";
    report.params.emplace_back("omega_r_rad_per_ns", p.omega_r);
    report.params.emplace_back("omega_q_rad_per_ns", p.omega_q);
    report.params.emplace_back("g_rad_per_ns", p.g);
    push_noise(report.params, noise);
    report.gate_time = t_gate;
    report.fidelity = f;
    report.trace = std::move(trace);
    return report;
}

GateReport ns_protocol_pusc(const BlochSiegertParams& p, const NoiseParams& noise,
                            const KetState& psi0, bool include_bare_dephasing) {
    if (p.k < 4 || p.k == 5)
        throw std::invalid_argument("ns_protocol_pusc: oscillation count k must be >= 4 and != 5");
    const PhotonicInput in = split_single_mode(psi0);

    const SpaceLabel joint = build_space({std::max(in.cutoff, 6)}, 1);
    const KetState psi = joint_ground(joint, in.amps);
    const double t_gate = p.gate_time;

    const OperatorMatrix h_full = h_2bs(joint, p);
    const OperatorMatrix h_int = h_2bs_interaction(joint, p);  // throws off resonance

    DressedOptions opts;
    opts.h_coherent = h_int.matrix;
    if (include_bare_dephasing && noise.gamma_phi > 0.0)
        opts.bare_extra.push_back({qubit_op(joint, 0, 'z').matrix, 0.5 * noise.gamma_phi});

    EvolutionTrace trace = dressed_lindblad_evolve(
        h_full, standard_dressed_channels(joint, p.base, noise.kappa, noise.gamma),
        to_density(psi), TimeGrid{0.0, t_gate, 240, 12}, opts);
    attach_observables(trace, ns_observables(joint));

    // Closed-form rail phases at the solved time; the one-photon rail must
    // return to zero and the two-photon rail must land on pi (mod 2 pi).
    const double phase_one = wrap_angle(-p.B * t_gate / 3.0);
    const double phase_two = wrap_angle(-p.B * t_gate / 2.0 + (p.k % 2 ? kPi : 0.0));
    if (std::abs(phase_one) > 1e-6 || std::abs(wrap_angle(phase_two - kPi)) > 1e-6)
        throw std::runtime_error("ns_protocol_pusc: phase conditions not met at the solved time");

    const KetState target = joint_ground(joint, flip_two_photon(in.amps));
    const double f = fidelity(DensityMatrix{joint, trace.densities.back()}, target);

    GateReport report;
    report.protocol = "ns_pusc";
    report.params.emplace_back("omega_r_rad_per_ns", p.base.omega_r);
    report.params.emplace_back("omega_q_rad_per_ns", p.base.omega_q);
    report.params.emplace_back("g_rad_per_ns", p.base.g);
    report.params.emplace_back("r", p.r);
    report.params.emplace_back("k", static_cast<double>(p.k));
    report.params.emplace_back("B_rad_per_ns", p.B);
    report.params.emplace_back("T_osc_ns", p.T_osc);
    report.params.emplace_back("phase_one_rel", phase_one);
    report.params.emplace_back("phase_two_rel", phase_two);
    report.params.emplace_back("bare_dephasing", include_bare_dephasing ? 1.0 : 0.0);
    push_noise(report.params, noise);
    report.gate_time = t_gate;
    report.fidelity = f;
    report.trace = std::move(trace);
    return report;
}

GateReport ns_protocol_dispersive(const DispersiveParams& p, const NoiseParams& noise,
                                  const KetState& psi0) {
    const PhotonicInput in = split_single_mode(psi0);
    const SpaceLabel joint = build_space({in.cutoff}, 1);
    const KetState psi = joint_ground(joint, in.amps);
    const double t_gate = p.gate_time;

    EvolutionTrace trace = lindblad_evolve(h_dispersive(joint, p), noise, to_density(psi),
                                           TimeGrid{0.0, t_gate, 360, 18});
    attach_observables(trace, ns_observables(joint));

    Vec target_ph = in.amps;
    target_ph(2) *= std::exp(Complex(0.0, -p.target_phase));
    const KetState target = joint_ground(joint, target_ph);
    const double f = fidelity(DensityMatrix{joint, trace.densities.back()}, target);

    GateReport report;
    report.protocol = "ns_dispersive";
    report.params.emplace_back("omega_r_rad_per_ns", p.base.omega_r);
    report.params.emplace_back("omega_q_rad_per_ns", p.base.omega_q);
    report.params.emplace_back("g_rad_per_ns", p.base.g);
    report.params.emplace_back("chi_rad_per_ns", p.chi);
    report.params.emplace_back("n", static_cast<double>(p.n));
    report.params.emplace_back("target_phase_rad", p.target_phase);
    push_noise(report.params, noise);
    report.gate_time = t_gate;
    report.fidelity = f;
    report.trace = std::move(trace);
    return report;
}

TwoRailState two_rail_embed(const KetState& photonic) {
    require_two_rail_photonic(photonic.space);
    if (std::abs(photonic.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("two_rail_embed: state must be normalized");
    const SpaceLabel joint = build_space({2, 2}, 2);
    Vec v = Vec::Zero(joint.dim());
    for (int i = 0; i < photonic.space.dim(); ++i) {
        const auto occ = photonic.space.unpack(i);
        v(joint.pack({occ[0], occ[1], 0, 0})) = photonic.amplitudes(i);
    }
    return {joint, v * v.adjoint()};
}

double encoded_photon_leakage(const TwoRailState& state) {
    double leak = 0.0;
    for (int i = 0; i < state.space.dim(); ++i) {
        const auto occ = state.space.unpack(i);
        if (occ[0] + occ[1] > 2) leak += state.density(i, i).real();
    }
    return leak;
}

KetState cz_apply_ideal(const KetState& photonic, double theta) {
    require_two_rail_photonic(photonic.space);
    const Mat u = beam_splitter_matrix(beam_splitter_unitary(theta), photonic.space);
    KetState mid{photonic.space, u * photonic.amplitudes};
    mid = ns_apply_ideal(mid, 0);
    mid = ns_apply_ideal(mid, 1);
    mid.amplitudes = u * mid.amplitudes;
    return mid;
}

GateReport cz_protocol(const RegimeParams& params, const NoiseParams& noise, double theta,
                       const KetState& input, bool include_bare_dephasing) {
    require_two_rail_photonic(input.space);
    if (std::abs(input.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("cz: input state must be normalized");
    for (int i = 0; i < input.space.dim(); ++i) {
        const auto occ = input.space.unpack(i);
        if ((occ[0] > 1 || occ[1] > 1) && std::abs(input.amplitudes(i)) > 1e-12)
            throw std::invalid_argument("cz: input must lie in the two-rail logical sector");
    }

    const Mat u = beam_splitter_matrix(beam_splitter_unitary(theta), input.space);
    const TwoRailState rail = two_rail_embed(KetState{input.space, u * input.amplitudes});
    const SpaceLabel& joint = rail.space;
    const DensityMatrix rho0{joint, rail.density};

    std::string protocol;
    double t_gate = 0.0;
    EvolutionTrace trace;
    std::vector<std::pair<std::string, double>> extra_params;

    if (const auto* p = std::get_if<SystemParams>(&params)) {
        if (std::abs(p->delta()) > 1e-9 * p->omega_r)
            throw std::invalid_argument("cz: requires omega_q = 2 omega_r");
        protocol = "cz_sc";
        t_gate = kPi / (std::sqrt(2.0) * p->g);
        Mat h = h_2jc_interaction(joint, *p, 0.0, 0, 0).matrix +
                h_2jc_interaction(joint, *p, 0.0, 1, 1).matrix;
        std::vector<CollapseChannel> channels;
        for (int rail_idx = 0; rail_idx < 2; ++rail_idx) {
            channels.push_back({ladder_ops(joint, rail_idx).first.matrix, noise.kappa});
            channels.push_back({qubit_op(joint, rail_idx, '-').matrix, noise.gamma});
            channels.push_back({qubit_op(joint, rail_idx, 'z').matrix, 0.5 * noise.gamma_phi});
        }
        trace = lindblad_evolve_ops(OperatorMatrix{joint, std::move(h), true}, channels, rho0,
                                    TimeGrid{0.0, t_gate, 400, 40});
        extra_params.emplace_back("g_rad_per_ns", p->g);
    } else if (const auto* bp = std::get_if<BlochSiegertParams>(&params)) {
        protocol = "cz_pusc";
        t_gate = bp->gate_time;
        Mat h_full = h_2bs(joint, *bp, nullptr, 0, 0).matrix + h_2bs(joint, *bp, nullptr, 1, 1).matrix;
        Mat h_int = h_2bs_interaction(joint, *bp, 0, 0).matrix +
                    h_2bs_interaction(joint, *bp, 1, 1).matrix;
        std::vector<DressedChannelSeed> seeds;
        for (int rail_idx = 0; rail_idx < 2; ++rail_idx)
            for (DressedChannelSeed& s :
                 standard_dressed_channels(joint, bp->base, noise.kappa, noise.gamma, rail_idx,
                                           rail_idx))
                seeds.push_back(std::move(s));
        DressedOptions opts;
        opts.h_coherent = std::move(h_int);
        if (include_bare_dephasing && noise.gamma_phi > 0.0)
            for (int rail_idx = 0; rail_idx < 2; ++rail_idx)
                opts.bare_extra.push_back(
                    {qubit_op(joint, rail_idx, 'z').matrix, 0.5 * noise.gamma_phi});
        trace = dressed_lindblad_evolve(OperatorMatrix{joint, std::move(h_full), true}, seeds,
                                        rho0, TimeGrid{0.0, t_gate, 240, 24}, opts);
        extra_params.emplace_back("r", bp->r);
        extra_params.emplace_back("k", static_cast<double>(bp->k));
    } else {
        const auto& dp = std::get<DispersiveParams>(params);
        protocol = "cz_dispersive";
        t_gate = dp.gate_time;
        // The rails' Hamiltonian is diagonal, so the eigenstate-jump
        // (secular) construction applies exactly along the Fock basis and
        // evolves in closed form; dephasing stays diagonal there too.
        Mat h = h_dispersive(joint, dp, 0, 0).matrix + h_dispersive(joint, dp, 1, 1).matrix;
        std::vector<DressedChannelSeed> seeds;
        for (int rail_idx = 0; rail_idx < 2; ++rail_idx)
            for (DressedChannelSeed& s : standard_dressed_channels(
                     joint, dp.base, noise.kappa, noise.gamma, rail_idx, rail_idx))
                seeds.push_back(std::move(s));
        DressedOptions opts;
        if (noise.gamma_phi > 0.0)
            for (int rail_idx = 0; rail_idx < 2; ++rail_idx)
                opts.bare_extra.push_back(
                    {qubit_op(joint, rail_idx, 'z').matrix, 0.5 * noise.gamma_phi});
        trace = dressed_lindblad_evolve(OperatorMatrix{joint, std::move(h), true}, seeds, rho0,
                                        TimeGrid{0.0, t_gate, 360, 36}, opts);
        extra_params.emplace_back("chi_rad_per_ns", dp.chi);
        extra_params.emplace_back("n", static_cast<double>(dp.n));
    }

    // Photon-sector and qubit-excitation observables on the joint trace.
    std::vector<NamedObservable> obs;
    for (int total = 0; total <= 2; ++total) {
        Mat proj = Mat::Zero(joint.dim(), joint.dim());
        for (int i = 0; i < joint.dim(); ++i) {
            const auto occ = joint.unpack(i);
            if (occ[0] + occ[1] == total) proj(i, i) = 1.0;
        }
        obs.push_back({"p_photons_" + std::to_string(total), proj});
    }
    Mat nq = Mat::Zero(joint.dim(), joint.dim());
    for (int i = 0; i < joint.dim(); ++i) {
        const auto occ = joint.unpack(i);
        nq(i, i) = occ[2] + occ[3];
    }
    obs.push_back({"n_qubit_excited", nq});
    attach_observables(trace, obs);

    const DensityMatrix rho_ph = partial_trace(DensityMatrix{joint, trace.densities.back()}, {0, 1});
    const Mat rho_out = u * rho_ph.matrix * u.adjoint();

    Vec target = input.amplitudes;
    target(input.space.pack({1, 1})) = -target(input.space.pack({1, 1}));
    const double f =
        fidelity(DensityMatrix{input.space, rho_out}, KetState{input.space, target});

    GateReport report;
    report.protocol = protocol;
    report.params.emplace_back("theta_rad", theta);
    for (auto& kv : extra_params) report.params.push_back(std::move(kv));
    push_noise(report.params, noise);
    report.gate_time = t_gate;
    report.fidelity = f;
    report.trace = std::move(trace);
    return report;
}

}  // namespace tpqr
