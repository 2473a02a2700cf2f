#include <iostream>

#include <CLI11.hpp>

#include "lep/cli.hpp"

int main(int argc, char** argv) {
    lep::Command cmd;
    CLI::App app{"Exceptional points of dissipative bosonic modes: spectra, correlations, oracles"};
    app.require_subcommand(1);

    std::string out = cmd.out.string();
    double n_th = 0.0, gamma12 = 0.0;
    app.add_option("--model", cmd.model_path, "Model config (JSON)");
    app.add_option("--preset", cmd.preset, "Built-in model used when --model is absent")->check(CLI::IsMember({"fig1"}));
    app.add_option("--out", out, "Output directory");
    app.add_option("--tol", cmd.tol, "Relative eigenvalue clustering tolerance");
    app.add_option("--cutoff", cmd.cutoff, "Fock cutoff per mode");
    auto* nth_opt = app.add_option("--n-th", n_th, "Override the thermal occupation");
    auto* g12_opt = app.add_option("--gamma12", gamma12, "Override the incoherent coupling of a two-mode model");
    app.add_option("--convention", cmd.convention, "Spectrum scaling")->check(CLI::IsMember({"canonical", "paper"}));
    app.add_option("--mem-budget-mb", cmd.mem_budget_mib, "Memory budget of the Fock superoperator (MiB)");

    app.add_option("--param", cmd.param, "Swept or perturbed parameter");
    app.add_option("--generator", cmd.generator, "nhh, moments or nhh-moments");
    app.add_option("--from", cmd.from, "Sweep start");
    app.add_option("--to", cmd.to, "Sweep end");
    app.add_option("--steps", cmd.steps, "Sweep points");
    app.add_option("--eps-min", cmd.eps_min, "Smallest perturbation");
    app.add_option("--eps-max", cmd.eps_max, "Largest perturbation");
    app.add_option("--eps-count", cmd.eps_count, "Number of log-spaced perturbations");
    app.add_option("--direction", cmd.direction, "Sign of the perturbation (1 or -1)");
    app.add_option("--mode", cmd.modes, "Probe fields (a1..aN, c1, c2); repeatable");
    app.add_option("--tau-max", cmd.tau_max, "Largest delay");
    app.add_option("--tau-steps", cmd.tau_steps, "Delay points");
    app.add_option("--max-k", cmd.max_k, "Highest k of g^(2k)");
    app.add_option("--omega-min", cmd.omega_min, "Lowest frequency");
    app.add_option("--omega-max", cmd.omega_max, "Highest frequency");
    app.add_option("--omega-steps", cmd.omega_steps, "Frequency points");
    app.add_option("--oracle-tau-max", cmd.oracle_tau_max, "Largest delay of the oracle comparison");
    app.add_option("--oracle-tau-steps", cmd.oracle_tau_steps, "Delay points of the oracle comparison");

    for (const auto& v : lep::verbs()) app.add_subcommand(v)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : lep::kExitValidation;
    }
    cmd.verb = app.get_subcommands().front()->get_name();
    cmd.out = out;
    if (*nth_opt) cmd.n_th = n_th;
    if (*g12_opt) cmd.gamma12 = gamma12;
    return lep::run(cmd);
}
