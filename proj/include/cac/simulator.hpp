#pragma once

#include "cac/model.hpp"
#include "cac/solver.hpp"
#include "cac/topology.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cac {

/// Raised when a provider admits a call that does not fit.
class SimulationInvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Read-only view of the whole network handed to admission policies.
struct NetworkView {
    const HexTopology& topology;
    const std::vector<Occupancy>& occupancy;  ///< per cell
    std::span<const int> bandwidths;
    int total_channels;

    int used_bandwidth(int cell) const;
    bool fits(int cell, int cls) const;
};

/// Admission decision interface shared by the MDP table, NAG and accept-all.
class PolicyProvider {
public:
    virtual ~PolicyProvider() = default;
    virtual std::string name() const = 0;
    virtual Action decide(const NetworkView& view, int cell, CallEvent incoming) const = 0;
};

/// Accepts whenever the call fits.
class AcceptAllProvider final : public PolicyProvider {
public:
    std::string name() const override { return "accept-all"; }
    Action decide(const NetworkView& view, int cell, CallEvent incoming) const override;
};

/// Looks decisions up in a solved policy table.
class TablePolicyProvider final : public PolicyProvider {
public:
    explicit TablePolicyProvider(Policy policy, std::string name = "mdp");
    std::string name() const override { return name_; }
    Action decide(const NetworkView& view, int cell, CallEvent incoming) const override;
    const Policy& policy() const { return policy_; }

private:
    Policy policy_;
    StateSpace space_;
    std::string name_;
};

struct SimulationConfig {
    std::vector<QosClassSpec> classes;
    int total_channels = 100;
    /// Arrival rate, class mix, per-class holding rates and the per-call
    /// handoff rate rho * mu. neighbor_calls is not used.
    TrafficModel traffic;
    PricingScheme pricing = PricingScheme::flat;
    double horizon = 10000.0;  ///< seconds
    double warmup = 1000.0;    ///< seconds; statistics start here
    std::uint64_t seed = 1;
    bool allow_self_reinjection = true;
    /// Collect the event-epoch state histogram and the time-weighted
    /// occupancy histogram of this cell.
    std::optional<int> record_cell;

    void validate() const;
};

struct ClassCounters {
    std::uint64_t new_arrivals = 0;
    std::uint64_t blocked = 0;
    std::uint64_t handoff_attempts = 0;
    std::uint64_t dropped = 0;
    std::uint64_t completions = 0;
};

/// Fate of the calls that arrived after warmup; adds up exactly.
struct CohortCounters {
    std::uint64_t arrivals = 0;
    std::uint64_t blocked = 0;
    std::uint64_t completed = 0;
    std::uint64_t dropped = 0;
    std::uint64_t active_at_horizon = 0;
};

struct RawCounters {
    std::vector<ClassCounters> per_class;
    std::vector<CohortCounters> cohort;
    double utility_raw = 0.0;
    double utility_infinite_capacity = 0.0;
    std::uint64_t events_simulated = 0;
    std::array<std::uint64_t, 6> handoff_directions{};
    /// Per state of the recorded cell, counted at each arrival, handoff
    /// arrival and completion epoch (pre-decision occupancy).
    std::vector<std::uint64_t> state_visits;
    /// Seconds spent in each occupancy block by the recorded cell.
    std::vector<double> occupancy_time;
};

struct SimMetrics {
    std::vector<ClassCounters> per_class;
    double utility_raw = 0.0;
    double utility_infinite_capacity = 0.0;
    std::vector<std::optional<double>> blocking;  ///< P_cb per class; empty when no arrivals
    std::vector<std::optional<double>> dropping;  ///< P_hd per class; empty when no attempts
    std::optional<double> blocking_all;
    std::optional<double> dropping_all;
    double normalized_utility = 1.0;
    std::uint64_t events_simulated = 0;
};

SimMetrics compute_metrics(const RawCounters& raw);

struct SimResult {
    RawCounters raw;
    SimMetrics metrics;
};

/// Event-driven simulation of the whole network under one admission policy.
/// Identical (config, provider) gives identical results.
SimResult run_simulation(const HexTopology& topology, const PolicyProvider& provider,
                         const SimulationConfig& config);

}  // namespace cac
