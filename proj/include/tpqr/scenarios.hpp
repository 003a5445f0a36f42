#pragma once
// Config-driven scenario runners behind the command-line tool: each one
// resolves defaults + overrides, runs the matching protocol, and emits
// deterministic CSV/JSON data files with a hashed manifest.

#include "tpqr/io.hpp"

#include <cstdint>
#include <string>

namespace tpqr {

struct ScenarioConfig {
    // ns-sc | ns-pusc | ns-dispersive | cz | catch-release | sweep
    std::string scenario;
    io::json overrides = io::json::object();
    std::string out_dir;  // empty: run without writing files
    std::uint64_t seed = 20260817u;
};

// Runs one scenario. Throws std::invalid_argument on an unknown scenario id
// or an override key the scenario does not define. The seed only affects
// trajectory-mode catch-release runs; everything else is deterministic.
io::ResultBundle run_scenario(const ScenarioConfig& config);

// All five tuned-resonance rows (k = 4, 6, 7, 8, 9): solved ratio, qubit
// frequency, coupling, gate time, resonance residual, and the simulated
// controlled-Z fidelity in both dephasing configurations.
io::ResultBundle run_table1(const std::string& out_dir);

// Named cross-module invariant checks; summary["all_pass"] gates the CLI
// exit code. inject_defect corrupts a Hamiltonian copy so the hermiticity
// check must fail (negative control for the harness itself).
io::ResultBundle run_property_suite(const std::string& out_dir,
                                    bool inject_defect = false);

}  // namespace tpqr
