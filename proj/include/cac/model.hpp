#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cac {

/// Raised when a model cannot be built or has no dynamics (empty class list,
/// no class fits the cell, all event rates zero).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when `accept` is requested for an arrival that does not fit.
class InfeasibleActionError : public ModelError {
public:
    using ModelError::ModelError;
};

/// One QoS class: its bandwidth demand and reward triple.
struct QosClassSpec {
    int bandwidth = 1;          ///< BU per call
    double reward_carry = 1.0;  ///< flat: per accepted call; linear: per second carried
    double reward_block = 0.0;  ///< penalty for blocking a new call (<= 0)
    double reward_drop = 0.0;   ///< penalty for dropping a handoff (<= 0)
};

void validate(std::span<const QosClassSpec> classes);

enum class EventKind : std::uint8_t { none, new_arrival, handoff_arrival, departure };

/// The call event attached to a state. `cls` is a 0-based class index and is
/// -1 for `none`.
struct CallEvent {
    EventKind kind = EventKind::none;
    int cls = -1;

    static constexpr CallEvent no_event() { return {}; }
    static constexpr CallEvent arrival(int c) { return {EventKind::new_arrival, c}; }
    static constexpr CallEvent handoff(int c) { return {EventKind::handoff_arrival, c}; }
    static constexpr CallEvent departure(int c) { return {EventKind::departure, c}; }

    constexpr bool is_arrival() const {
        return kind == EventKind::new_arrival || kind == EventKind::handoff_arrival;
    }

    friend constexpr bool operator==(const CallEvent&, const CallEvent&) = default;
};

/// "n", "r1", "h2", "d1", ... with 1-based class ids.
std::string event_code(CallEvent event);
CallEvent parse_event_code(std::string_view code);

enum class Action : std::uint8_t { reject = 0, accept = 1 };

std::string_view to_string(Action a);

using Occupancy = std::vector<int>;

struct CellState {
    Occupancy occupancy;
    CallEvent event;
};

/// The enumerated state space: every occupancy vector within capacity paired
/// with every admissible event. Occupancies are ordered lexicographically;
/// within one occupancy the event order is n, r1..rK, h1..hK, d1..dK.
class StateSpace {
public:
    StateSpace(std::vector<int> bandwidths, int total_channels);

    std::size_t size() const { return states_.size(); }
    std::size_t num_classes() const { return bandwidths_.size(); }
    std::size_t num_occupancies() const { return block_start_.size() - 1; }
    int total_channels() const { return total_channels_; }
    std::span<const int> bandwidths() const { return bandwidths_; }

    const CellState& operator[](std::size_t i) const { return states_[i]; }
    const std::vector<CellState>& states() const { return states_; }

    /// Index of the occupancy block a state belongs to.
    std::size_t occupancy_index(std::size_t state) const { return occupancy_of_state_[state]; }
    std::span<const int> occupancy(std::size_t occupancy_idx) const;

    std::optional<std::size_t> find(std::span<const int> occupancy, CallEvent event) const;
    std::optional<std::size_t> find_occupancy(std::span<const int> occupancy) const;
    /// Throws ModelError if the pair is not in the space.
    std::size_t index_of(std::span<const int> occupancy, CallEvent event) const;

    int used_bandwidth(std::span<const int> occupancy) const;
    int used_bandwidth(std::size_t state) const { return used_bw_[state]; }

    /// Whether one more call of class `cls` fits on top of `occupancy`.
    bool fits(std::span<const int> occupancy, int cls) const;

    /// The empty-cell, no-event state.
    std::size_t empty_state() const { return 0; }

private:
    std::optional<std::size_t> block_code(std::span<const int> occupancy) const;
    std::size_t event_slot(CallEvent event) const;

    std::vector<int> bandwidths_;
    int total_channels_;
    std::vector<CellState> states_;
    std::vector<int> used_bw_;
    std::vector<std::size_t> occupancy_of_state_;
    std::vector<int> occupancies_;          // flattened, K per block
    std::vector<std::size_t> block_start_;  // first state of each block, plus end sentinel
    std::vector<std::size_t> radix_;        // mixed-radix strides for the dense lookup
    std::vector<std::ptrdiff_t> dense_;     // radix code -> block, -1 when over capacity
    std::vector<std::ptrdiff_t> slots_;     // block * (3K+1) + slot -> state, -1 when absent
};

StateSpace enumerate_states(std::span<const QosClassSpec> classes, int total_channels);

/// Traffic and mobility seen by one cell.
struct TrafficModel {
    double arrival_rate = 0.0;            ///< lambda, new calls / s / cell
    std::vector<double> class_mix;        ///< probability a new call is of class i
    std::vector<double> holding_rates;    ///< mu_i, 1/s
    double handoff_rate_per_call = 0.0;   ///< rho * mu, 1/s
    std::vector<double> neighbor_calls;   ///< c_i, expected calls per class at a neighbor
    /// Calls also leave the cell by handing off (per-call rate mu_i + rho mu)
    /// instead of only by completing (mu_i).
    bool handoff_departures = false;

    double class_arrival_rate(std::size_t cls) const { return arrival_rate * class_mix[cls]; }
    double handoff_arrival_rate(std::size_t cls) const {
        return neighbor_calls[cls] * handoff_rate_per_call;
    }
    double departure_rate_per_call(std::size_t cls) const {
        return holding_rates[cls] + (handoff_departures ? handoff_rate_per_call : 0.0);
    }

    void validate(std::size_t num_classes) const;
};

/// Dimensionless mobility factor rho = (3 + 2 sqrt 3) v / (9 mu R), with the
/// speed converted from km/h to km/s.
double mobility_rho(double speed_kmh, double holding_rate, double cell_radius_km);

enum class PricingScheme { flat, linear };

/// Which occupancy feeds the next-event rates after an action.
/// `post_action` uses x + sigma for departures and the total rate;
/// `paper_literal` uses the pre-action x throughout.
enum class OccupancyConvention { post_action, paper_literal };

/// Whether the carriage term of linear pricing is paid per decision epoch or
/// per second of the following sojourn.
enum class RewardTiming { per_epoch, semi_markov };

std::string_view to_string(PricingScheme p);
std::string_view to_string(OccupancyConvention c);
std::string_view to_string(RewardTiming t);

/// The per-epoch reward of taking `action` in `state`.
double reward(const CellState& state, Action action, PricingScheme scheme,
              std::span<const QosClassSpec> classes);

struct Transition {
    std::size_t target;
    double probability;
};

/// The admission MDP of one cell under a fixed traffic assumption. Immutable.
class CellMdp {
public:
    CellMdp(std::vector<QosClassSpec> classes, int total_channels, TrafficModel traffic,
            PricingScheme pricing, OccupancyConvention convention = OccupancyConvention::post_action);

    /// Shares an already enumerated space (it must match classes and capacity).
    CellMdp(std::shared_ptr<const StateSpace> space, std::vector<QosClassSpec> classes,
            TrafficModel traffic, PricingScheme pricing,
            OccupancyConvention convention = OccupancyConvention::post_action);

    const StateSpace& states() const { return *space_; }
    std::shared_ptr<const StateSpace> shared_states() const { return space_; }
    const std::vector<QosClassSpec>& classes() const { return classes_; }
    const TrafficModel& traffic() const { return traffic_; }
    PricingScheme pricing() const { return pricing_; }
    OccupancyConvention convention() const { return convention_; }
    std::size_t size() const { return space_->size(); }

    /// Total event rate omega for a given occupancy.
    double event_rate(std::span<const int> occupancy) const;
    /// tau = 1 / omega. Throws ModelError when omega is zero.
    double mean_event_time(std::span<const int> occupancy) const;
    double mean_event_time(const CellState& state) const { return mean_event_time(state.occupancy); }

    bool is_feasible(std::size_t state, Action action) const;
    Occupancy post_action_occupancy(std::size_t state, Action action) const;

    /// Successor distribution. Zero-probability successors are omitted.
    /// Throws InfeasibleActionError for an accept that does not fit.
    std::vector<Transition> transition_distribution(std::size_t state, Action action) const;

    /// Expected time until the next event after `action`, under the
    /// configured occupancy convention.
    double sojourn_time(std::size_t state, Action action) const;

    double reward(std::size_t state, Action action) const;

private:
    void check() const;

    std::shared_ptr<const StateSpace> space_;
    std::vector<QosClassSpec> classes_;
    TrafficModel traffic_;
    PricingScheme pricing_;
    OccupancyConvention convention_;
};

}  // namespace cac
