#pragma once

#include "cac/model.hpp"
#include "cac/nag.hpp"
#include "cac/solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cac {

/// Raised for unreadable, malformed or invalid experiment configs.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class FixedPointMethod { damped, binary_search };

struct ExperimentConfig {
    int schema_version = 1;

    // [classes]
    std::vector<QosClassSpec> classes;

    // [traffic]
    int total_channels = 100;
    std::optional<double> arrival_rate;  ///< calls / s / cell, when given directly
    std::vector<double> offered_loads;   ///< BU-Erlangs per cell
    std::vector<double> class_mix;
    double holding_time = 120.0;         ///< mean seconds, same for every class
    double speed_kmh = 50.0;
    double cell_radius_km = 1.0;

    // [pricing]
    PricingScheme pricing = PricingScheme::flat;

    // [solver]
    SolverConfig solver;
    OccupancyConvention convention = OccupancyConvention::post_action;
    FixedPointMethod method = FixedPointMethod::damped;
    /// Per-call departure rate mu + rho mu in the cell MDP; see TrafficModel.
    bool handoff_departures = true;

    // [nag]
    NagConfig nag;

    // [simulation]
    int rings = 2;
    double horizon = 20000.0;
    double warmup = 2000.0;
    int replications = 10;
    std::uint64_t seed = 1;
    bool allow_self_reinjection = true;
    int jobs = 0;  ///< worker threads; 0 = hardware concurrency

    // [output]
    std::filesystem::path output_dir = "results";

    double holding_rate() const { return 1.0 / holding_time; }
    double rho() const;
    double handoff_rate() const { return rho() * holding_rate(); }
    /// Mean BU per new call.
    double mean_bandwidth() const;
    /// lambda = L mu / E[b].
    double arrival_rate_for_load(double load) const;
    double load_for_arrival_rate(double rate) const;
    /// The operating points to run: one per offered load, or the direct rate.
    std::vector<std::pair<double, double>> load_points() const;  ///< (load, lambda)

    TrafficModel traffic(double arrival_rate) const;
    CellProblem cell_problem(double arrival_rate) const;

    void validate() const;
};

/// Parses an INI-style config. Throws ConfigError naming the line (syntax)
/// or the field and constraint (validation). Unknown keys are rejected.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");

/// Every effective parameter, explicit or defaulted, plus derived values,
/// as "key = value" lines in a fixed order.
std::vector<std::string> describe(const ExperimentConfig& config);

}  // namespace cac
