#pragma once

#include "cac/chain.hpp"
#include "cac/model.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cac {

enum class Criterion { average_reward, discounted };

struct SolverConfig {
    Criterion criterion = Criterion::average_reward;
    double discount = 0.95;  ///< only used by the discounted criterion
    double epsilon = 1e-7;   ///< span (average) or sup-norm (discounted) stopping threshold
    int max_sweeps = 500000;
    /// Weight of the original chain in P' = (1 - a) I + a P for relative value
    /// iteration. Any a in (0, 1] leaves the optimal policy and gain unchanged;
    /// a < 1 removes periodicity.
    double aperiodicity = 0.95;
    RewardTiming timing = RewardTiming::per_epoch;

    double fixed_point_tolerance = 0.01;
    double fixed_point_damping = 0.5;
    int max_fixed_point_iters = 100;

    StationaryOptions stationary;

    void validate() const;
};

/// A finite MDP with two actions in explicit sparse form. Rows are stored for
/// (state, action) pairs; an infeasible pair has no row and is never chosen.
class TabularMdp {
public:
    explicit TabularMdp(std::size_t num_states);

    std::size_t size() const { return feasible_.size() / 2; }

    /// Defines the row for (state, action). Probabilities must sum to 1.
    void set(std::size_t state, Action action, double reward, std::vector<Transition> row);

    bool feasible(std::size_t state, Action action) const { return feasible_[slot(state, action)]; }
    double reward(std::size_t state, Action action) const { return reward_[slot(state, action)]; }
    const std::vector<Transition>& row(std::size_t state, Action action) const {
        return rows_[slot(state, action)];
    }

    /// Throws ModelError if a state has no feasible action or a row is not
    /// stochastic.
    void check() const;

private:
    static std::size_t slot(std::size_t state, Action a) {
        return 2 * state + static_cast<std::size_t>(a);
    }

    std::vector<bool> feasible_;
    std::vector<double> reward_;
    std::vector<std::vector<Transition>> rows_;
};

/// Builds the tabular form of a cell MDP. With `semi_markov` timing the
/// linear-pricing carriage is paid per second of sojourn and the result is
/// the data-transformed MDP whose per-step gain equals reward per second.
TabularMdp compile(const CellMdp& model, RewardTiming timing = RewardTiming::per_epoch);

struct ValueFunction {
    std::vector<double> values;
};

/// Settings a policy was solved under, carried into the policy file.
struct PolicyMetadata {
    int total_channels = 0;
    std::vector<QosClassSpec> classes;
    std::vector<double> neighbor_calls;  ///< the c the policy was solved at
    PricingScheme pricing = PricingScheme::flat;
};

struct Policy {
    std::vector<Action> actions;
    PolicyMetadata metadata;

    Action operator[](std::size_t state) const { return actions[state]; }
    std::size_t size() const { return actions.size(); }
};

/// Raised when value iteration or the fixed-point loop runs out of budget.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, int iterations, double last_delta)
        : std::runtime_error(what), iterations_(iterations), last_delta_(last_delta) {}
    int iterations() const { return iterations_; }
    double last_delta() const { return last_delta_; }

private:
    int iterations_;
    double last_delta_;
};

struct SolveResult {
    ValueFunction value;          ///< bias (average) or value (discounted)
    std::vector<Action> actions;  ///< greedy policy, ties go to reject
    double gain = 0.0;            ///< per-step gain estimate (average criterion)
    int sweeps = 0;
    double final_delta = 0.0;     ///< last span or sup-norm difference
    std::vector<double> deltas;   ///< per-sweep span or sup-norm history
};

SolveResult value_iteration(const TabularMdp& mdp, const SolverConfig& config,
                            const ValueFunction* warm_start = nullptr);

/// Solves a cell MDP and attaches policy metadata.
struct CellSolution {
    Policy policy;
    SolveResult result;
};
CellSolution value_iteration(const CellMdp& model, const SolverConfig& config,
                             const ValueFunction* warm_start = nullptr);

/// Greedy policy for a given value function; reject wins ties.
std::vector<Action> greedy_policy(const TabularMdp& mdp, const ValueFunction& value,
                                  const SolverConfig& config);

SparseChain induced_chain(const TabularMdp& mdp, const std::vector<Action>& policy);
SparseChain induced_chain(const CellMdp& model, const std::vector<Action>& policy);

/// Long-run average reward per step of a fixed policy.
double average_reward(const TabularMdp& mdp, const std::vector<Action>& policy,
                      std::span<const double> distribution);

/// c_i = sum_s pi(s) x_i(s) over the (pre-action) occupancy of each state.
std::vector<double> expected_calls(std::span<const double> distribution, const StateSpace& space);

/// Time-average calls per class: each state's post-action occupancy weighted
/// by the embedded-chain probability times the sojourn that follows it.
std::vector<double> time_average_calls(const CellMdp& model, const std::vector<Action>& policy,
                                       std::span<const double> distribution);

/// Marginal distribution over occupancy blocks.
std::vector<double> occupancy_marginal(std::span<const double> distribution, const StateSpace& space);

// ---------------------------------------------------------------------------
// Fixed point over the expected neighbour call counts.

/// Everything needed to build a cell MDP except the neighbour-call guess.
struct CellProblem {
    std::vector<QosClassSpec> classes;
    int total_channels = 100;
    TrafficModel traffic;  ///< neighbor_calls is ignored
    PricingScheme pricing = PricingScheme::flat;
    OccupancyConvention convention = OccupancyConvention::post_action;

    CellMdp make_model(std::vector<double> neighbor_calls,
                       std::shared_ptr<const StateSpace> space = nullptr) const;
};

/// Half the per-class capacity split by class mix: N * mix_i / (2 b_i).
std::vector<double> default_initial_calls(const CellProblem& problem);

struct FixedPointStep {
    std::vector<double> assumed;  ///< c_k the MDP was built with
    std::vector<double> induced;  ///< c'_k from the solved policy's stationary law
    std::vector<double> next;     ///< c_{k+1}
    double delta = 0.0;           ///< ||c_{k+1} - c_k||_inf
    double gain = 0.0;
    int sweeps = 0;
    std::string note;
};

struct FixedPointResult {
    Policy policy;
    std::vector<double> calls;  ///< c*, the point the returned policy was solved at
    double gain = 0.0;
    std::vector<double> distribution;  ///< stationary law of the returned policy
    std::vector<FixedPointStep> trace;
    std::vector<std::string> warnings;
};

class FixedPointError : public ConvergenceError {
public:
    FixedPointError(const std::string& what, std::vector<FixedPointStep> trace)
        : ConvergenceError(what, static_cast<int>(trace.size()),
                           trace.empty() ? 0.0 : trace.back().delta),
          trace_(std::move(trace)) {}
    const std::vector<FixedPointStep>& trace() const { return trace_; }

private:
    std::vector<FixedPointStep> trace_;
};

/// Damped iteration c_{k+1} = (1 - d) c_k + d c'_k until the step is below
/// the tolerance. The result is a local fixed point only.
FixedPointResult fixed_point_policy(const CellProblem& problem, const SolverConfig& config,
                                    std::optional<std::vector<double>> initial = std::nullopt);

/// Single-class bisection on c' - c. Falls back to the damped iteration when
/// the initial bracket does not straddle a sign change.
FixedPointResult binary_search_single_class(const CellProblem& problem, const SolverConfig& config,
                                            std::optional<double> initial = std::nullopt);

// ---------------------------------------------------------------------------
// Threshold structure

struct ThresholdEntry {
    CallEvent event;
    bool monotone = true;
    /// Largest occupied bandwidth after an admission of this event type
    /// (0 when nothing is admitted). Set only when monotone.
    std::optional<int> threshold;
    /// (rejected state, accepted state) pairs where the rejected one uses
    /// less bandwidth. Truncated to the first few.
    std::vector<std::pair<std::size_t, std::size_t>> violations;
    std::size_t violation_count = 0;
};

struct ThresholdReport {
    std::vector<ThresholdEntry> entries;
    bool all_monotone() const;
};

/// Checks that each arrival type's accept region is downward closed in
/// occupied bandwidth.
ThresholdReport verify_threshold(const std::vector<Action>& policy, const StateSpace& space);

}  // namespace cac
