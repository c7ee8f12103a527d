#include "cac/experiment.hpp"
#include "cac/policy_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <sstream>

namespace {

enum Exit { ok = 0, other_error = 1, config_error = 2, no_convergence = 3, sim_invariant = 4 };

int fail(int code, const std::string& kind, const std::string& message) {
    nlohmann::json record{{"error", kind}, {"exit_code", code}, {"message", message}};
    std::cerr << record.dump() << '\n';
    return code;
}

std::vector<double> parse_loads(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(cac::parse_real(item));
        } catch (const std::exception&) {
            throw cac::ConfigError("invalid config: --loads entries must be numbers, got '" + item + "'");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Call admission control: MDP policies, NAG baseline and network simulation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, policy = "mdp", loads;
    std::uint64_t seed = 0;
    int replications = 0;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "Experiment config (INI)")->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "Output directory");
        cmd->add_option("--seed", seed, "Base seed; replication r uses seed + r");
        cmd->add_option("--loads", loads, "Comma-separated offered loads in BU-Erlangs");
        cmd->add_option("--replications", replications, "Replications per load point")->check(CLI::PositiveNumber);
    };
    auto* solve = app.add_subcommand("solve", "Solve fixed-point MDP policies; write policy files and a report");
    auto* simulate = app.add_subcommand("simulate", "Simulate a policy over the load points; write metrics CSV");
    auto* compare = app.add_subcommand("compare", "Simulate MDP and NAG on matched seeds; write comparison CSV");
    auto* verify = app.add_subcommand("verify", "Run invariant checks on the configured model");
    for (auto* cmd : {solve, simulate, compare, verify}) add_common(cmd);
    simulate->add_option("--policy", policy, "mdp | mdp:PATH | nag | accept-all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        return fail(config_error, "usage", e.what());
    }

    try {
        auto config = cac::load_config(config_path);
        cac::Overrides o;
        if (simulate->count("--seed") + solve->count("--seed") + compare->count("--seed") + verify->count("--seed")) {
            o.seed = seed;
        }
        if (!out_dir.empty()) o.out_dir = out_dir;
        if (!loads.empty()) o.loads = parse_loads(loads);
        if (replications > 0) o.replications = replications;
        cac::apply_overrides(config, o);

        std::vector<std::filesystem::path> written;
        if (*solve) {
            written = cac::solve_command(config);
        } else if (*simulate) {
            written = cac::simulate_command(config, cac::PolicySource::parse(policy));
        } else if (*compare) {
            written = cac::compare_command(config);
        } else {
            return cac::verify_command(config, std::cout) ? ok : sim_invariant;
        }
        for (const auto& p : written) std::cout << p.string() << '\n';
        return ok;
    } catch (const cac::ConfigError& e) {
        return fail(config_error, "config", e.what());
    } catch (const cac::ConvergenceError& e) {
        return fail(no_convergence, "convergence", e.what());
    } catch (const cac::SimulationInvariantError& e) {
        return fail(sim_invariant, "simulation_invariant", e.what());
    } catch (const cac::ModelError& e) {
        return fail(config_error, "model", e.what());
    } catch (const std::exception& e) {
        return fail(other_error, "io", e.what());
    }
}
