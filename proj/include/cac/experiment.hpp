#pragma once

#include "cac/config.hpp"
#include "cac/simulator.hpp"
#include "cac/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cac {

/// Where simulate takes its admission decisions from.
struct PolicySource {
    enum class Kind { mdp_solve, mdp_file, nag, accept_all };
    Kind kind = Kind::mdp_solve;
    std::filesystem::path path;  ///< mdp_file only

    /// "mdp", "mdp:PATH", "nag" or "accept-all".
    static PolicySource parse(const std::string& text);
    std::string label() const;
};

/// Command-line overrides applied on top of the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::vector<double>> loads;
    std::optional<int> replications;
};
void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

/// Runs f(0..count-1) on up to `jobs` threads (0 = hardware concurrency).
/// The first exception thrown by any task is rethrown after all finish.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& f);

struct SolvedPoint {
    double load = 0.0;
    double arrival_rate = 0.0;
    FixedPointResult fixed_point;
    ThresholdReport thresholds;
};

/// Fixed-point policy for one operating point, using the configured method.
SolvedPoint solve_point(const ExperimentConfig& config, double load, double arrival_rate);

/// One simulated (load, seed, policy) run.
struct MetricsRow {
    double load = 0.0;
    std::uint64_t seed = 0;
    std::string policy;
    SimMetrics metrics;
};

/// Seed of replication r.
inline std::uint64_t replication_seed(const ExperimentConfig& config, int r) {
    return config.seed + static_cast<std::uint64_t>(r);
}

SimulationConfig simulation_config(const ExperimentConfig& config, double arrival_rate,
                                   std::uint64_t seed);

/// Simulates every (load, replication) under one provider per load point.
/// `provider_for(load_index)` is called once per load point, before any run.
std::vector<MetricsRow> simulate_rows(
    const ExperimentConfig& config, const std::string& policy_name,
    const std::function<std::unique_ptr<PolicyProvider>(std::size_t)>& provider_for);

std::unique_ptr<PolicyProvider> make_nag_provider(const ExperimentConfig& config);

/// Metrics CSV. Lines starting with "# " carry the effective config; then the
/// column header, the per-run rows sorted by (load, policy, seed), and a mean
/// and standard-error row per (load, policy).
///
///   seed,load,policy,pcb_1..pcb_K,phd_1..phd_K,utility_raw,normalized_utility,events_simulated
///
/// Undefined probabilities are written as NA.
void write_metrics_csv(std::ostream& out, const ExperimentConfig& config, std::vector<MetricsRow> rows,
                       const std::vector<std::string>& extra_header = {});

struct ComparisonRow {
    double load = 0.0;
    int replications = 0;
    double utility_mdp = 0.0;  ///< mean normalized utility
    double utility_nag = 0.0;
    double utility_ratio = 0.0;
    double utility_gain = 0.0;
    double gain_se = 0.0;      ///< standard error of the per-seed gain
    std::vector<std::optional<double>> pcb_mdp, phd_mdp, pcb_nag, phd_nag;
};

/// Pairs MDP and NAG rows by (load, seed).
std::vector<ComparisonRow> compare_rows(const std::vector<MetricsRow>& rows, std::size_t num_classes);
void write_comparison_csv(std::ostream& out, const ExperimentConfig& config,
                          const std::vector<ComparisonRow>& rows);

// ---------------------------------------------------------------------------
// Subcommands. Each writes into config.output_dir and returns the paths written.

std::vector<std::filesystem::path> solve_command(const ExperimentConfig& config);
std::vector<std::filesystem::path> simulate_command(const ExperimentConfig& config, const PolicySource& source);
std::vector<std::filesystem::path> compare_command(const ExperimentConfig& config);

/// Runs the invariant checks on the configured model and prints one line per
/// check. Returns true when all pass.
bool verify_command(const ExperimentConfig& config, std::ostream& log);

}  // namespace cac
