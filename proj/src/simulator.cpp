#include "cac/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace cac {

int NetworkView::used_bandwidth(int cell) const {
    const auto& x = occupancy[static_cast<std::size_t>(cell)];
    int used = 0;
    for (std::size_t i = 0; i < x.size(); ++i) used += x[i] * bandwidths[i];
    return used;
}

bool NetworkView::fits(int cell, int cls) const {
    return used_bandwidth(cell) + bandwidths[static_cast<std::size_t>(cls)] <= total_channels;
}

Action AcceptAllProvider::decide(const NetworkView& view, int cell, CallEvent incoming) const {
    return view.fits(cell, incoming.cls) ? Action::accept : Action::reject;
}

TablePolicyProvider::TablePolicyProvider(Policy policy, std::string name)
    : policy_(std::move(policy)),
      space_(enumerate_states(policy_.metadata.classes, policy_.metadata.total_channels)),
      name_(std::move(name)) {
    if (space_.size() != policy_.size()) {
        throw ModelError("policy table does not match its metadata");
    }
}

Action TablePolicyProvider::decide(const NetworkView& view, int cell, CallEvent incoming) const {
    const auto s = space_.find(view.occupancy[static_cast<std::size_t>(cell)], incoming);
    return s ? policy_[*s] : Action::reject;
}

void SimulationConfig::validate() const {
    cac::validate(classes);
    auto t = traffic;
    t.neighbor_calls.assign(classes.size(), 0.0);
    t.validate(classes.size());
    if (total_channels < 1) throw ModelError("simulation: total_channels must be >= 1");
    if (!(warmup >= 0.0) || !(horizon > warmup)) {
        throw ModelError("simulation: need horizon > warmup >= 0");
    }
}

namespace {

struct ActiveCall {
    int cls = 0;
    int cell = 0;
    double carried_since = 0.0;
    double end = 0.0;
    double next_handoff = 0.0;
    bool cohort = false;
};

struct QueuedEvent {
    double time;
    std::uint64_t seq;
    bool is_arrival;
    std::size_t index;  // cell for arrivals, call slot otherwise

    bool operator>(const QueuedEvent& o) const {
        return time != o.time ? time > o.time : seq > o.seq;
    }
};

class Simulation {
public:
    Simulation(const HexTopology& topology, const PolicyProvider& provider, const SimulationConfig& cfg)
        : topo_(topology), provider_(provider), cfg_(cfg), k_(cfg.classes.size()) {
        bandwidths_.reserve(k_);
        for (const auto& c : cfg.classes) bandwidths_.push_back(c.bandwidth);
        occupancy_.assign(topo_.size(), Occupancy(k_, 0));
        for (std::size_t c = 0; c < topo_.size(); ++c) {
            const auto id = static_cast<std::uint32_t>(c);
            arrival_rng_.emplace_back(cfg.seed, id, StreamPurpose::arrivals);
            mobility_rng_.emplace_back(cfg.seed, id, StreamPurpose::mobility);
            reinjection_rng_.emplace_back(cfg.seed, id, StreamPurpose::reinjection);
        }
        raw_.per_class.resize(k_);
        raw_.cohort.resize(k_);
        if (cfg.record_cell) {
            if (*cfg.record_cell < 0 || static_cast<std::size_t>(*cfg.record_cell) >= topo_.size()) {
                throw ModelError("simulation: record_cell out of range");
            }
            space_.emplace(bandwidths_, cfg.total_channels);
            raw_.state_visits.assign(space_->size(), 0);
            raw_.occupancy_time.assign(space_->num_occupancies(), 0.0);
        }
    }

    RawCounters run() {
        for (std::size_t c = 0; c < topo_.size(); ++c) {
            push(arrival_rng_[c].exponential(cfg_.traffic.arrival_rate), true, c);
        }
        while (!queue_.empty() && queue_.top().time <= cfg_.horizon) {
            const auto ev = queue_.top();
            queue_.pop();
            advance_clock(ev.time);
            ++raw_.events_simulated;
            if (ev.is_arrival) {
                on_arrival(ev.index);
            } else {
                on_call_event(ev.index);
            }
        }
        advance_clock(cfg_.horizon);
        for (std::size_t slot = 0; slot < calls_.size(); ++slot) {
            if (!live_[slot]) continue;
            const auto& call = calls_[slot];
            accrue_carriage(call, cfg_.horizon);
            if (call.cohort) ++raw_.cohort[static_cast<std::size_t>(call.cls)].active_at_horizon;
        }
        return std::move(raw_);
    }

private:
    bool counting() const { return now_ >= cfg_.warmup; }

    void push(double time, bool is_arrival, std::size_t index) {
        if (!std::isfinite(time)) return;
        queue_.push({time, seq_++, is_arrival, index});
    }

    void advance_clock(double t) {
        if (cfg_.record_cell && t > now_) {
            const double from = std::max(now_, cfg_.warmup);
            if (t > from) {
                const auto& x = occupancy_[static_cast<std::size_t>(*cfg_.record_cell)];
                raw_.occupancy_time[*space_->find_occupancy(x)] += t - from;
            }
        }
        now_ = t;
    }

    NetworkView view() const { return {topo_, occupancy_, bandwidths_, cfg_.total_channels}; }

    void record_epoch(int cell, CallEvent ev) {
        if (!cfg_.record_cell || cell != *cfg_.record_cell || !counting()) return;
        const auto s = space_->find(occupancy_[static_cast<std::size_t>(cell)], ev);
        if (s) ++raw_.state_visits[*s];
    }

    Action ask(int cell, CallEvent ev) {
        const auto decision = provider_.decide(view(), cell, ev);
        const bool fits = view().fits(cell, ev.cls);
        if (decision == Action::accept && !fits) {
            throw SimulationInvariantError("policy '" + provider_.name() + "' admitted " +
                                           event_code(ev) + " into full cell " + std::to_string(cell) +
                                           " at t=" + std::to_string(now_));
        }
        return decision;
    }

    double carry_overlap(double from, double to) const {
        const double a = std::max(from, cfg_.warmup);
        const double b = std::min(to, cfg_.horizon);
        return b > a ? b - a : 0.0;
    }

    void accrue_carriage(const ActiveCall& call, double until) {
        if (cfg_.pricing != PricingScheme::linear) return;
        raw_.utility_raw += cfg_.classes[static_cast<std::size_t>(call.cls)].reward_carry *
                            carry_overlap(call.carried_since, until);
    }

    void schedule(std::size_t slot) {
        const auto& call = calls_[slot];
        push(std::min(call.end, call.next_handoff), false, slot);
    }

    void on_arrival(std::size_t cell) {
        auto& rng = arrival_rng_[cell];
        const auto& mix = cfg_.traffic.class_mix;
        const double u = rng.uniform();
        int cls = static_cast<int>(k_) - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < k_; ++i) {
            acc += mix[i];
            if (u < acc) {
                cls = static_cast<int>(i);
                break;
            }
        }
        const auto ci = static_cast<std::size_t>(cls);
        const double holding = rng.exponential(cfg_.traffic.holding_rates[ci]);
        push(now_ + rng.exponential(cfg_.traffic.arrival_rate), true, cell);

        const auto& spec = cfg_.classes[ci];
        const bool count = counting();
        if (count) {
            ++raw_.per_class[ci].new_arrivals;
            ++raw_.cohort[ci].arrivals;
        }
        // Infinite capacity: every call is admitted and carried to completion.
        if (cfg_.pricing == PricingScheme::flat) {
            if (count) raw_.utility_infinite_capacity += spec.reward_carry;
        } else {
            raw_.utility_infinite_capacity += spec.reward_carry * carry_overlap(now_, now_ + holding);
        }

        const int cell_id = static_cast<int>(cell);
        const auto ev = CallEvent::arrival(cls);
        record_epoch(cell_id, ev);
        if (ask(cell_id, ev) == Action::reject) {
            if (count) {
                ++raw_.per_class[ci].blocked;
                ++raw_.cohort[ci].blocked;
                raw_.utility_raw += spec.reward_block;
            }
            return;
        }
        if (count && cfg_.pricing == PricingScheme::flat) raw_.utility_raw += spec.reward_carry;

        ActiveCall call;
        call.cls = cls;
        call.cell = cell_id;
        call.carried_since = now_;
        call.end = now_ + holding;
        call.next_handoff = now_ + mobility_rng_[cell].exponential(cfg_.traffic.handoff_rate_per_call);
        call.cohort = count;
        ++occupancy_[cell][ci];
        std::size_t slot;
        if (!free_.empty()) {
            slot = free_.back();
            free_.pop_back();
            calls_[slot] = call;
            live_[slot] = true;
        } else {
            slot = calls_.size();
            calls_.push_back(call);
            live_.push_back(true);
        }
        schedule(slot);
    }

    void release(std::size_t slot) {
        live_[slot] = false;
        free_.push_back(slot);
    }

    void on_call_event(std::size_t slot) {
        auto& call = calls_[slot];
        const auto ci = static_cast<std::size_t>(call.cls);
        const auto src = static_cast<std::size_t>(call.cell);
        const bool count = counting();

        if (call.end <= call.next_handoff) {
            record_epoch(call.cell, CallEvent::departure(call.cls));
            --occupancy_[src][ci];
            accrue_carriage(call, now_);
            if (count) ++raw_.per_class[ci].completions;
            if (call.cohort) ++raw_.cohort[ci].completed;
            release(slot);
            return;
        }

        // Dwell expired: leave through one of six sides.
        const auto dir = static_cast<std::size_t>(mobility_rng_[src].index(6));
        if (count) ++raw_.handoff_directions[dir];
        int dest = topo_.by_direction[src][dir];
        if (dest < 0) {
            dest = handle_boundary_handoff(topo_, call.cell, reinjection_rng_[src],
                                           cfg_.allow_self_reinjection);
        }
        --occupancy_[src][ci];

        const auto ev = CallEvent::handoff(call.cls);
        if (count) ++raw_.per_class[ci].handoff_attempts;
        record_epoch(dest, ev);
        if (ask(dest, ev) == Action::reject) {
            accrue_carriage(call, now_);
            if (count) {
                ++raw_.per_class[ci].dropped;
                raw_.utility_raw += cfg_.classes[ci].reward_drop;
            }
            if (call.cohort) ++raw_.cohort[ci].dropped;
            release(slot);
            return;
        }
        const auto d = static_cast<std::size_t>(dest);
        ++occupancy_[d][ci];
        call.cell = dest;
        call.next_handoff = now_ + mobility_rng_[d].exponential(cfg_.traffic.handoff_rate_per_call);
        schedule(slot);
    }

    const HexTopology& topo_;
    const PolicyProvider& provider_;
    const SimulationConfig& cfg_;
    std::size_t k_;
    std::vector<int> bandwidths_;
    std::vector<Occupancy> occupancy_;
    std::vector<RandomStream> arrival_rng_, mobility_rng_, reinjection_rng_;
    std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, std::greater<>> queue_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    std::vector<ActiveCall> calls_;
    std::vector<bool> live_;
    std::vector<std::size_t> free_;
    std::optional<StateSpace> space_;
    RawCounters raw_;
};

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

SimMetrics compute_metrics(const RawCounters& raw) {
    SimMetrics m;
    m.per_class = raw.per_class;
    m.utility_raw = raw.utility_raw;
    m.utility_infinite_capacity = raw.utility_infinite_capacity;
    m.events_simulated = raw.events_simulated;
    ClassCounters total;
    for (const auto& c : raw.per_class) {
        m.blocking.push_back(ratio(c.blocked, c.new_arrivals));
        m.dropping.push_back(ratio(c.dropped, c.handoff_attempts));
        total.new_arrivals += c.new_arrivals;
        total.blocked += c.blocked;
        total.handoff_attempts += c.handoff_attempts;
        total.dropped += c.dropped;
    }
    m.blocking_all = ratio(total.blocked, total.new_arrivals);
    m.dropping_all = ratio(total.dropped, total.handoff_attempts);
    m.normalized_utility = raw.utility_infinite_capacity == 0.0
                               ? 1.0
                               : raw.utility_raw / raw.utility_infinite_capacity;
    return m;
}

SimResult run_simulation(const HexTopology& topology, const PolicyProvider& provider,
                         const SimulationConfig& config) {
    config.validate();
    if (topology.size() == 0) throw ModelError("simulation: empty topology");
    Simulation sim(topology, provider, config);
    SimResult out;
    out.raw = sim.run();
    out.metrics = compute_metrics(out.raw);
    return out;
}

}  // namespace cac
