#include "cac/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace cac {

void validate(std::span<const QosClassSpec> classes) {
    if (classes.empty()) {
        throw ModelError("model needs at least one QoS class");
    }
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& c = classes[i];
        const auto name = "class " + std::to_string(i + 1);
        if (c.bandwidth < 1) {
            throw ModelError(name + ": bandwidth must be >= 1");
        }
        if (!(c.reward_carry > 0.0)) {
            throw ModelError(name + ": carriage reward must be > 0");
        }
        if (c.reward_block > 0.0 || c.reward_drop > 0.0) {
            throw ModelError(name + ": block and drop rewards are penalties and must be <= 0");
        }
    }
}

std::string event_code(CallEvent event) {
    switch (event.kind) {
    case EventKind::none: return "n";
    case EventKind::new_arrival: return "r" + std::to_string(event.cls + 1);
    case EventKind::handoff_arrival: return "h" + std::to_string(event.cls + 1);
    case EventKind::departure: return "d" + std::to_string(event.cls + 1);
    }
    return "?";
}

CallEvent parse_event_code(std::string_view code) {
    if (code == "n") {
        return CallEvent::no_event();
    }
    if (code.size() < 2) {
        throw ModelError("bad event code '" + std::string(code) + "'");
    }
    int cls = 0;
    const auto* first = code.data() + 1;
    const auto* last = code.data() + code.size();
    auto [ptr, ec] = std::from_chars(first, last, cls);
    if (ec != std::errc{} || ptr != last || cls < 1) {
        throw ModelError("bad event code '" + std::string(code) + "'");
    }
    switch (code.front()) {
    case 'r': return CallEvent::arrival(cls - 1);
    case 'h': return CallEvent::handoff(cls - 1);
    case 'd': return CallEvent::departure(cls - 1);
    default: throw ModelError("bad event code '" + std::string(code) + "'");
    }
}

std::string_view to_string(Action a) { return a == Action::accept ? "accept" : "reject"; }

std::string_view to_string(PricingScheme p) { return p == PricingScheme::flat ? "flat" : "linear"; }

std::string_view to_string(OccupancyConvention c) {
    return c == OccupancyConvention::post_action ? "post_action" : "paper_literal";
}

std::string_view to_string(RewardTiming t) {
    return t == RewardTiming::per_epoch ? "per_epoch" : "semi_markov";
}

// ---------------------------------------------------------------------------
// StateSpace

StateSpace::StateSpace(std::vector<int> bandwidths, int total_channels)
    : bandwidths_(std::move(bandwidths)), total_channels_(total_channels) {
    if (bandwidths_.empty()) {
        throw ModelError("model needs at least one QoS class");
    }
    if (total_channels_ < 1) {
        throw ModelError("total_channels must be >= 1");
    }
    for (int b : bandwidths_) {
        if (b < 1) {
            throw ModelError("bandwidth must be >= 1");
        }
    }

    const std::size_t k = bandwidths_.size();
    radix_.assign(k, 1);
    std::size_t dense_size = 1;
    for (std::size_t i = k; i-- > 0;) {
        radix_[i] = dense_size;
        dense_size *= static_cast<std::size_t>(total_channels_ / bandwidths_[i] + 1);
    }
    dense_.assign(dense_size, -1);

    // Odometer over occupancies, last class fastest: lexicographic order.
    Occupancy x(k, 0);
    const std::size_t slots_per_block = 3 * k + 1;
    while (true) {
        const int used = used_bandwidth(x);
        if (used <= total_channels_) {
            const std::size_t block = block_start_.size();
            block_start_.push_back(states_.size());
            occupancies_.insert(occupancies_.end(), x.begin(), x.end());
            std::size_t code = 0;
            for (std::size_t i = 0; i < k; ++i) {
                code += radix_[i] * static_cast<std::size_t>(x[i]);
            }
            dense_[code] = static_cast<std::ptrdiff_t>(block);
            slots_.resize(slots_.size() + slots_per_block, -1);

            auto push = [&](CallEvent ev) {
                slots_[block * slots_per_block + event_slot(ev)] =
                    static_cast<std::ptrdiff_t>(states_.size());
                states_.push_back({x, ev});
                used_bw_.push_back(used);
                occupancy_of_state_.push_back(block);
            };
            push(CallEvent::no_event());
            for (std::size_t i = 0; i < k; ++i) push(CallEvent::arrival(static_cast<int>(i)));
            for (std::size_t i = 0; i < k; ++i) push(CallEvent::handoff(static_cast<int>(i)));
            for (std::size_t i = 0; i < k; ++i) {
                if (x[i] >= 1) push(CallEvent::departure(static_cast<int>(i)));
            }
        }
        // advance
        std::size_t pos = k;
        while (pos-- > 0) {
            if (x[pos] < total_channels_ / bandwidths_[pos]) {
                ++x[pos];
                break;
            }
            x[pos] = 0;
        }
        if (pos == static_cast<std::size_t>(-1)) {
            break;
        }
    }
    block_start_.push_back(states_.size());
}

std::span<const int> StateSpace::occupancy(std::size_t occupancy_idx) const {
    const std::size_t k = bandwidths_.size();
    return {occupancies_.data() + occupancy_idx * k, k};
}

std::size_t StateSpace::event_slot(CallEvent event) const {
    const std::size_t k = bandwidths_.size();
    const auto c = static_cast<std::size_t>(event.cls);
    switch (event.kind) {
    case EventKind::none: return 0;
    case EventKind::new_arrival: return 1 + c;
    case EventKind::handoff_arrival: return 1 + k + c;
    case EventKind::departure: return 1 + 2 * k + c;
    }
    return 0;
}

std::optional<std::size_t> StateSpace::block_code(std::span<const int> occupancy) const {
    if (occupancy.size() != bandwidths_.size()) {
        return std::nullopt;
    }
    std::size_t code = 0;
    for (std::size_t i = 0; i < occupancy.size(); ++i) {
        if (occupancy[i] < 0 || occupancy[i] > total_channels_ / bandwidths_[i]) {
            return std::nullopt;
        }
        code += radix_[i] * static_cast<std::size_t>(occupancy[i]);
    }
    const auto block = dense_[code];
    if (block < 0) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(block);
}

std::optional<std::size_t> StateSpace::find_occupancy(std::span<const int> occupancy) const {
    return block_code(occupancy);
}

std::optional<std::size_t> StateSpace::find(std::span<const int> occupancy, CallEvent event) const {
    const auto block = block_code(occupancy);
    if (!block) {
        return std::nullopt;
    }
    if (event.kind != EventKind::none &&
        (event.cls < 0 || static_cast<std::size_t>(event.cls) >= bandwidths_.size())) {
        return std::nullopt;
    }
    const auto s = slots_[*block * (3 * bandwidths_.size() + 1) + event_slot(event)];
    if (s < 0) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(s);
}

std::size_t StateSpace::index_of(std::span<const int> occupancy, CallEvent event) const {
    if (auto s = find(occupancy, event)) {
        return *s;
    }
    std::string occ;
    for (int v : occupancy) {
        occ += (occ.empty() ? "" : ",") + std::to_string(v);
    }
    throw ModelError("state (" + occ + "," + event_code(event) + ") is not in the state space");
}

int StateSpace::used_bandwidth(std::span<const int> occupancy) const {
    int used = 0;
    for (std::size_t i = 0; i < occupancy.size(); ++i) {
        used += bandwidths_[i] * occupancy[i];
    }
    return used;
}

bool StateSpace::fits(std::span<const int> occupancy, int cls) const {
    return used_bandwidth(occupancy) + bandwidths_[static_cast<std::size_t>(cls)] <= total_channels_;
}

StateSpace enumerate_states(std::span<const QosClassSpec> classes, int total_channels) {
    if (classes.empty()) {
        throw ModelError("model needs at least one QoS class");
    }
    std::vector<int> bw;
    bw.reserve(classes.size());
    for (const auto& c : classes) {
        bw.push_back(c.bandwidth);
    }
    return StateSpace(std::move(bw), total_channels);
}

// ---------------------------------------------------------------------------
// Traffic

void TrafficModel::validate(std::size_t num_classes) const {
    auto fail = [](const std::string& what) { throw ModelError("traffic: " + what); };
    if (class_mix.size() != num_classes || holding_rates.size() != num_classes ||
        neighbor_calls.size() != num_classes) {
        fail("per-class vectors must have one entry per class");
    }
    if (!(arrival_rate >= 0.0) || !std::isfinite(arrival_rate)) fail("arrival_rate must be >= 0");
    if (!(handoff_rate_per_call >= 0.0) || !std::isfinite(handoff_rate_per_call)) {
        fail("handoff_rate_per_call must be >= 0");
    }
    double mix = 0.0;
    for (std::size_t i = 0; i < num_classes; ++i) {
        if (!(class_mix[i] >= 0.0)) fail("class_mix entries must be >= 0");
        if (!(holding_rates[i] >= 0.0) || !std::isfinite(holding_rates[i])) {
            fail("holding rates must be >= 0");
        }
        if (!(neighbor_calls[i] >= 0.0) || !std::isfinite(neighbor_calls[i])) {
            fail("neighbor_calls entries must be >= 0");
        }
        mix += class_mix[i];
    }
    if (std::abs(mix - 1.0) > 1e-9) fail("class_mix must sum to 1");
}

double mobility_rho(double speed_kmh, double holding_rate, double cell_radius_km) {
    if (speed_kmh < 0.0 || holding_rate < 0.0 || cell_radius_km < 0.0) {
        throw ModelError("mobility_rho: inputs must be >= 0");
    }
    if (holding_rate == 0.0 || cell_radius_km == 0.0) {
        throw ModelError("mobility_rho: holding rate and cell radius must be nonzero");
    }
    const double speed_km_s = speed_kmh / 3600.0;
    return (3.0 + 2.0 * std::sqrt(3.0)) * speed_km_s / (9.0 * holding_rate * cell_radius_km);
}

// ---------------------------------------------------------------------------
// Reward

double reward(const CellState& state, Action action, PricingScheme scheme,
              std::span<const QosClassSpec> classes) {
    const auto& ev = state.event;
    const bool accept = action == Action::accept;
    const QosClassSpec* cls =
        ev.kind == EventKind::none ? nullptr : &classes[static_cast<std::size_t>(ev.cls)];

    if (scheme == PricingScheme::flat) {
        switch (ev.kind) {
        case EventKind::new_arrival: return accept ? cls->reward_carry : cls->reward_block;
        case EventKind::handoff_arrival: return accept ? 0.0 : cls->reward_drop;
        default: return 0.0;
        }
    }

    double carriage = 0.0;
    for (std::size_t j = 0; j < classes.size(); ++j) {
        carriage += state.occupancy[j] * classes[j].reward_carry;
    }
    switch (ev.kind) {
    case EventKind::new_arrival:
        return carriage + (accept ? cls->reward_carry : cls->reward_block);
    case EventKind::handoff_arrival:
        return carriage + (accept ? cls->reward_carry : cls->reward_drop);
    case EventKind::departure:
        return carriage + (accept ? 0.0 : -cls->reward_carry);
    case EventKind::none:
        return carriage;
    }
    return carriage;
}

// ---------------------------------------------------------------------------
// CellMdp

CellMdp::CellMdp(std::vector<QosClassSpec> classes, int total_channels, TrafficModel traffic,
                 PricingScheme pricing, OccupancyConvention convention)
    : CellMdp(std::make_shared<const StateSpace>(enumerate_states(classes, total_channels)),
              classes, std::move(traffic), pricing, convention) {}

CellMdp::CellMdp(std::shared_ptr<const StateSpace> space, std::vector<QosClassSpec> classes,
                 TrafficModel traffic, PricingScheme pricing, OccupancyConvention convention)
    : space_(std::move(space)),
      classes_(std::move(classes)),
      traffic_(std::move(traffic)),
      pricing_(pricing),
      convention_(convention) {
    check();
}

void CellMdp::check() const {
    validate(classes_);
    traffic_.validate(classes_.size());
    if (space_->num_classes() != classes_.size()) {
        throw ModelError("state space does not match the class list");
    }
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (space_->bandwidths()[i] != classes_[i].bandwidth) {
            throw ModelError("state space does not match the class bandwidths");
        }
    }
    const bool any_fits = std::any_of(classes_.begin(), classes_.end(), [&](const auto& c) {
        return c.bandwidth <= space_->total_channels();
    });
    if (!any_fits) {
        throw ModelError("degenerate model: no class fits in " +
                         std::to_string(space_->total_channels()) + " channels");
    }
}

double CellMdp::event_rate(std::span<const int> occupancy) const {
    double omega = 0.0;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        omega += occupancy[i] * traffic_.departure_rate_per_call(i) + traffic_.class_arrival_rate(i) +
                 traffic_.handoff_arrival_rate(i);
    }
    return omega;
}

double CellMdp::mean_event_time(std::span<const int> occupancy) const {
    const double omega = event_rate(occupancy);
    if (!(omega > 0.0)) {
        throw ModelError("degenerate model: total event rate is zero");
    }
    return 1.0 / omega;
}

bool CellMdp::is_feasible(std::size_t state, Action action) const {
    const auto& s = (*space_)[state];
    if (action == Action::reject || !s.event.is_arrival()) {
        return true;
    }
    return space_->fits(s.occupancy, s.event.cls);
}

Occupancy CellMdp::post_action_occupancy(std::size_t state, Action action) const {
    const auto& s = (*space_)[state];
    Occupancy x = s.occupancy;
    if (s.event.kind == EventKind::departure) {
        --x[static_cast<std::size_t>(s.event.cls)];
    } else if (s.event.is_arrival() && action == Action::accept) {
        if (!space_->fits(s.occupancy, s.event.cls)) {
            throw InfeasibleActionError("accept of " + event_code(s.event) +
                                        " exceeds capacity in state " + std::to_string(state));
        }
        ++x[static_cast<std::size_t>(s.event.cls)];
    }
    return x;
}

double CellMdp::sojourn_time(std::size_t state, Action action) const {
    if (convention_ == OccupancyConvention::paper_literal) {
        return mean_event_time((*space_)[state].occupancy);
    }
    return mean_event_time(post_action_occupancy(state, action));
}

std::vector<Transition> CellMdp::transition_distribution(std::size_t state, Action action) const {
    const Occupancy next = post_action_occupancy(state, action);
    const auto& rate_occ = convention_ == OccupancyConvention::post_action
                               ? std::span<const int>(next)
                               : std::span<const int>((*space_)[state].occupancy);
    const double tau = mean_event_time(rate_occ);
    const std::size_t k = classes_.size();

    std::vector<Transition> out;
    out.reserve(3 * k + 1);
    double redirected = 0.0;
    auto add = [&](CallEvent ev, double rate) {
        if (rate <= 0.0) {
            return;
        }
        const double p = rate * tau;
        if (ev.kind == EventKind::departure && next[static_cast<std::size_t>(ev.cls)] == 0) {
            // Only reachable under the literal convention: the departing call
            // does not exist after the action, so nothing happens.
            redirected += p;
            return;
        }
        out.push_back({space_->index_of(next, ev), p});
    };
    for (std::size_t i = 0; i < k; ++i) {
        add(CallEvent::arrival(static_cast<int>(i)), traffic_.class_arrival_rate(i));
    }
    for (std::size_t i = 0; i < k; ++i) {
        add(CallEvent::handoff(static_cast<int>(i)), traffic_.handoff_arrival_rate(i));
    }
    for (std::size_t i = 0; i < k; ++i) {
        add(CallEvent::departure(static_cast<int>(i)), rate_occ[i] * traffic_.departure_rate_per_call(i));
    }
    if (redirected > 0.0) {
        out.push_back({space_->index_of(next, CallEvent::no_event()), redirected});
    }
    return out;
}

double CellMdp::reward(std::size_t state, Action action) const {
    return cac::reward((*space_)[state], action, pricing_, classes_);
}

}  // namespace cac
