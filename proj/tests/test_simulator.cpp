#include <doctest.h>

#include "cac/simulator.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace cac;

namespace {

class RejectAll final : public PolicyProvider {
public:
    std::string name() const override { return "reject-all"; }
    Action decide(const NetworkView&, int, CallEvent) const override { return Action::reject; }
};

class AcceptAlways final : public PolicyProvider {
public:
    std::string name() const override { return "broken"; }
    Action decide(const NetworkView&, int, CallEvent) const override { return Action::accept; }
};

SimulationConfig reference_like(double lambda, double horizon = 3000.0, std::uint64_t seed = 1) {
    SimulationConfig c;
    c.classes = {{1, 1.0, -0.1, -8.0}, {4, 4.0, -0.4, -32.0}};
    c.total_channels = 100;
    const double mu = 1.0 / 120.0;
    c.traffic = TrafficModel{lambda, {0.5, 0.5}, {mu, mu}, 1.1971 * mu, {0.0, 0.0}};
    c.horizon = horizon;
    c.warmup = 0.1 * horizon;
    c.seed = seed;
    return c;
}

SimulationConfig erlang(double load, double horizon, std::uint64_t seed = 3) {
    SimulationConfig c;
    c.classes = {{1, 1.0, -0.1, -8.0}};
    c.total_channels = 10;
    c.traffic = TrafficModel{load, {1.0}, {1.0}, 0.0, {0.0}};
    c.horizon = horizon;
    c.warmup = 100.0;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("no traffic") {
    const auto r = run_simulation(build_hex_topology(2), AcceptAllProvider{}, reference_like(0.0));
    CHECK(r.raw.events_simulated == 0);
    CHECK(r.metrics.normalized_utility == 1.0);
    CHECK_FALSE(r.metrics.blocking[0].has_value());
    CHECK_FALSE(r.metrics.dropping_all.has_value());
}

TEST_CASE("no mobility means no handoffs") {
    auto cfg = reference_like(0.5);
    cfg.traffic.handoff_rate_per_call = 0.0;
    const auto r = run_simulation(build_hex_topology(2), AcceptAllProvider{}, cfg);
    for (const auto& c : r.metrics.per_class) CHECK(c.handoff_attempts == 0);
    CHECK_FALSE(r.metrics.dropping[0].has_value());
    CHECK(r.metrics.blocking[0].has_value());
}

TEST_CASE("reject-all utility is the sum of blocking penalties") {
    const auto cfg = reference_like(0.5);
    const auto r = run_simulation(build_hex_topology(2), RejectAll{}, cfg);
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) expected += cfg.classes[i].reward_block * r.metrics.per_class[i].new_arrivals;
    CHECK(r.metrics.utility_raw == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.metrics.utility_raw < 0.0);
    CHECK(r.metrics.blocking_all == 1.0);
}

TEST_CASE("accept-all with ample capacity has no loss") {
    auto cfg = reference_like(0.05);
    cfg.total_channels = 1000;
    const auto r = run_simulation(build_hex_topology(2), AcceptAllProvider{}, cfg);
    CHECK(r.metrics.blocking_all == 0.0);
    CHECK(r.metrics.dropping_all == 0.0);
    CHECK(r.metrics.normalized_utility == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("conservation, determinism and bounded normalized utility") {
    for (auto pricing : {PricingScheme::flat, PricingScheme::linear}) {
        auto cfg = reference_like(2.0);
        cfg.pricing = pricing;
        const auto topo = build_hex_topology(2);
        const auto a = run_simulation(topo, AcceptAllProvider{}, cfg);
        const auto b = run_simulation(topo, AcceptAllProvider{}, cfg);
        CHECK(a.raw.events_simulated == b.raw.events_simulated);
        CHECK(a.raw.utility_raw == b.raw.utility_raw);
        CHECK(a.raw.handoff_directions == b.raw.handoff_directions);
        for (std::size_t i = 0; i < 2; ++i) {
            const auto& c = a.raw.cohort[i];
            CHECK(c.arrivals == c.blocked + c.completed + c.dropped + c.active_at_horizon);
            const auto& k = a.metrics.per_class[i];
            CHECK(k.blocked <= k.new_arrivals);
            CHECK(k.dropped <= k.handoff_attempts);
        }
        if (pricing == PricingScheme::flat) CHECK(a.metrics.normalized_utility <= 1.0 + 1e-12);
        CHECK(a.metrics.blocking_all > 0.0);

        auto other = cfg;
        other.seed = 2;
        CHECK(run_simulation(topo, AcceptAllProvider{}, other).raw.events_simulated != a.raw.events_simulated);
    }
}

TEST_CASE("the infinite-capacity reference does not depend on the policy") {
    const auto cfg = reference_like(1.0);
    const auto topo = build_hex_topology(2);
    const auto a = run_simulation(topo, AcceptAllProvider{}, cfg);
    const auto r = run_simulation(topo, RejectAll{}, cfg);
    CHECK(a.raw.utility_infinite_capacity == r.raw.utility_infinite_capacity);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.metrics.per_class[i].new_arrivals == r.metrics.per_class[i].new_arrivals);
    }
}

TEST_CASE("handoff directions are uniform") {
    const auto r = run_simulation(build_hex_topology(2), AcceptAllProvider{}, reference_like(0.5, 20000));
    double total = 0;
    for (auto n : r.raw.handoff_directions) total += static_cast<double>(n);
    REQUIRE(total > 10000);
    const double p = 1.0 / 6.0;
    const double sigma = std::sqrt(total * p * (1 - p));
    for (auto n : r.raw.handoff_directions) CHECK(std::abs(static_cast<double>(n) - total * p) <= 3 * sigma);
}

TEST_CASE("Erlang-B") {
    const double load = 5.0;
    const auto r = run_simulation(build_hex_topology(0), AcceptAllProvider{}, erlang(load, 60000));
    REQUIRE(r.metrics.per_class[0].new_arrivals > 250000);
    CHECK(*r.metrics.blocking[0] == doctest::Approx(oracle::erlang_b(10, load)).epsilon(0.10));
    CHECK(oracle::erlang_b(10, load) == doctest::Approx(0.018384).epsilon(1e-4));
}

TEST_CASE("an infeasible admission aborts the run") {
    CHECK_THROWS_AS(run_simulation(build_hex_topology(0), AcceptAlways{}, erlang(20.0, 500.0)),
                    SimulationInvariantError);
}

TEST_CASE("config validation") {
    auto cfg = reference_like(0.5);
    cfg.warmup = cfg.horizon;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("table provider follows the policy") {
    const std::vector<QosClassSpec> cls{{1, 1.0, -0.1, -8.0}};
    const auto space = enumerate_states(cls, 3);
    Policy p;
    p.actions.assign(space.size(), Action::reject);
    p.metadata = {3, cls, {0.0}, PricingScheme::flat};
    p.actions[space.index_of(Occupancy{1}, CallEvent::arrival(0))] = Action::accept;
    const TablePolicyProvider provider(p);
    const auto topo = build_hex_topology(0);
    std::vector<Occupancy> occ{{1}};
    const std::vector<int> bw{1};
    const NetworkView view{topo, occ, bw, 3};
    CHECK(provider.decide(view, 0, CallEvent::arrival(0)) == Action::accept);
    CHECK(provider.decide(view, 0, CallEvent::handoff(0)) == Action::reject);
}
