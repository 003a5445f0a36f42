#include "tpqr/scenarios.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace {

// --set values are JSON when they parse as JSON (numbers, booleans, arrays,
// quoted strings, {"value","unit"} objects) and bare strings otherwise, so
// `--set packet=b` and `--set kappa_us=0.05` both do the obvious thing.
tpqr::io::json parse_set_value(const std::string& text) {
    try {
        return tpqr::io::json::parse(text);
    } catch (const tpqr::io::json::parse_error&) {
        return tpqr::io::json(text);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic two-photon gate simulator"};
    app.require_subcommand(1);

    std::string scenario;
    std::string config_file;
    std::string out_dir;
    std::vector<std::string> sets;
    unsigned int seed = 0;
    auto* run = app.add_subcommand("run", "Run one scenario and print its summary");
    run->add_option("scenario", scenario,
                    "ns-sc | ns-pusc | ns-dispersive | cz | catch-release | sweep");
    run->add_option("--config", config_file,
                    "JSON file with {scenario, overrides, out, seed}; command-line "
                    "options win on conflict");
    run->add_option("--set", sets, "Scenario override as key=value; repeatable");
    run->add_option("--out", out_dir, "Directory for the result bundle");
    auto* seed_opt = run->add_option("--seed", seed, "Trajectory RNG seed");

    std::string table_out;
    auto* table = app.add_subcommand(
        "table1", "Emit the five tuned operating points with simulated fidelities");
    table->add_option("--out", table_out, "Directory for the result bundle");

    std::string verify_out;
    bool inject = false;
    auto* verify = app.add_subcommand("verify", "Run the cross-module property suite");
    verify->add_option("--out", verify_out, "Directory for the result bundle");
    verify->add_flag("--inject-defect", inject,
                     "Negative control: corrupt a Hamiltonian copy so the "
                     "hermiticity check must fail");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            tpqr::ScenarioConfig config;
            if (!config_file.empty()) {
                std::ifstream in(config_file);
                if (!in)
                    throw std::runtime_error("cannot open config file " + config_file);
                const tpqr::io::json doc = tpqr::io::json::parse(in);
                config.scenario = doc.value("scenario", "");
                if (doc.contains("overrides")) config.overrides = doc.at("overrides");
                config.out_dir = doc.value("out", "");
                config.seed = doc.value("seed", config.seed);
            }
            if (!scenario.empty()) config.scenario = scenario;
            for (const std::string& kv : sets) {
                const std::size_t eq = kv.find('=');
                if (eq == std::string::npos || eq == 0)
                    throw std::invalid_argument("--set expects key=value, got \"" + kv +
                                                "\"");
                config.overrides[kv.substr(0, eq)] = parse_set_value(kv.substr(eq + 1));
            }
            if (!out_dir.empty()) config.out_dir = out_dir;
            if (seed_opt->count() > 0) config.seed = seed;
            if (config.scenario.empty())
                throw std::invalid_argument(
                    "no scenario given (positional argument or config file)");
            const tpqr::io::ResultBundle bundle = tpqr::run_scenario(config);
            std::cout << bundle.summary.dump(2) << "\n";
            return 0;
        }
        if (table->parsed()) {
            const tpqr::io::ResultBundle bundle = tpqr::run_table1(table_out);
            std::cout << bundle.summary.dump(2) << "\n";
            return 0;
        }
        const tpqr::io::ResultBundle bundle = tpqr::run_property_suite(verify_out, inject);
        std::cout << bundle.summary.dump(2) << "\n";
        return bundle.summary.at("all_pass").get<bool>() ? 0 : 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
}
