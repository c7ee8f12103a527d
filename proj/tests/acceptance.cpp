// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "cac/experiment.hpp"
#include "oracles.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace cac;

namespace {

// Pinned tolerances.
constexpr double kRowSumTol = 1e-12;
constexpr double kOracleTol = 1e-9;
constexpr double kFixedPointTol = 0.01;
constexpr int kFixedPointIters = 100;
constexpr double kErlangRelTol = 0.10;
constexpr std::uint64_t kMinArrivals = 1000000;
constexpr double kOccupancyL1 = 0.05;
constexpr std::uint64_t kMinEvents = 1000000;
constexpr double kPricingFactor = 3.0;
constexpr int kMinReplications = 10;
constexpr double kConfidence = 0.95;
constexpr double kNagAlpha = 0.04;
const double kReportedGains[] = {0.18, 0.55, 1.44};

const std::filesystem::path kSource = CAC_SOURCE_DIR;
const std::filesystem::path kScratch = CAC_SCRATCH_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

ExperimentConfig reference() {
    auto cfg = load_config(kSource / "configs" / "reference.ini");
    cfg.output_dir = kScratch;
    return cfg;
}

void set_r_db(ExperimentConfig& cfg, double r_db) {
    for (auto& c : cfg.classes) c.reward_drop = r_db * c.reward_block;
}

struct Summary {
    double mean = 0.0;
    double half_width = 0.0;  ///< t-based 95% half width
    std::size_t n = 0;
};

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.n = xs.size();
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
    if (s.n < 2) return s;
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    const double se = std::sqrt(ss / static_cast<double>(s.n - 1) / static_cast<double>(s.n));
    const boost::math::students_t t(static_cast<double>(s.n - 1));
    s.half_width = boost::math::quantile(t, 0.5 + kConfidence / 2) * se;
    return s;
}

// Per-replication aggregate handoff dropping of the solved policy at one load.
std::vector<double> solved_dropping(const ExperimentConfig& cfg, double load) {
    const auto point = solve_point(cfg, load, cfg.arrival_rate_for_load(load));
    const auto rows = simulate_rows(cfg, "mdp", [&](std::size_t) {
        return std::make_unique<TablePolicyProvider>(point.fixed_point.policy);
    });
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.load == load && r.metrics.dropping_all) out.push_back(*r.metrics.dropping_all);
    }
    return out;
}

Outcome transition_validity() {
    auto cfg = reference();
    const auto space = std::make_shared<const StateSpace>(enumerate_states(cfg.classes, cfg.total_channels));
    double worst = 0.0;
    std::size_t pairs = 0;
    bool inside = true;
    for (auto conv : {OccupancyConvention::post_action, OccupancyConvention::paper_literal}) {
        for (bool hd : {false, true}) {
            cfg.convention = conv;
            cfg.handoff_departures = hd;
            const auto problem = cfg.cell_problem(cfg.arrival_rate_for_load(200));
            const auto model = problem.make_model(default_initial_calls(problem), space);
            for (std::size_t s = 0; s < space->size(); ++s) {
                for (Action a : {Action::reject, Action::accept}) {
                    if (!model.is_feasible(s, a)) continue;
                    double sum = 0.0;
                    for (const auto& t : model.transition_distribution(s, a)) {
                        inside = inside && t.target < space->size() && t.probability >= 0.0;
                        sum += t.probability;
                    }
                    worst = std::max(worst, std::abs(sum - 1.0));
                    ++pairs;
                }
            }
        }
    }
    return {inside && worst <= kRowSumTol,
            std::to_string(space->size()) + " states, " + std::to_string(pairs) +
                " state-action rows over 4 model variants, max |sum - 1| = " + fmt(worst, 3)};
}

Outcome oracle_optimality() {
    struct Rates {
        double lambda, mu, handoff, c;
    };
    const Rates settings[] = {{0.3, 0.1, 0.05, 2.0}, {1.0, 0.2, 0.1, 3.0}, {0.05, 0.02, 0.2, 1.0}};
    double worst = 0.0;
    for (const auto& r : settings) {
        for (auto pricing : {PricingScheme::flat, PricingScheme::linear}) {
            const CellMdp model({{1, 1.0, -0.1, -8.0}}, 4,
                                TrafficModel{r.lambda, {1.0}, {r.mu}, r.handoff, {r.c}}, pricing);
            const auto mdp = compile(model);
            const auto solved = value_iteration(mdp, SolverConfig{});
            const auto best = oracle::exhaustive_best(mdp);
            worst = std::max(worst, std::abs(oracle::exact_gain(mdp, solved.actions) - best.gain));
        }
    }
    return {worst <= kOracleTol, "3 rate settings x 2 pricing schemes, max |g_vi - g_best| = " + fmt(worst, 3)};
}

Outcome threshold_structure() {
    auto cfg = reference();
    cfg.classes.resize(1);
    cfg.class_mix = {1.0};
    std::string detail;
    bool ok = true;
    for (double load : {25.0, 50.0, 100.0, 200.0, 400.0}) {
        const auto point = solve_point(cfg, load, cfg.arrival_rate_for_load(load));
        ok = ok && point.thresholds.all_monotone();
        detail += " L=" + fmt(load) + ":";
        for (const auto& e : point.thresholds.entries) {
            if (e.event.kind == EventKind::departure || e.event.kind == EventKind::none) continue;
            detail += std::string(e.event.kind == EventKind::new_arrival ? "r" : "h") + "=" +
                      (e.threshold ? std::to_string(*e.threshold) : std::string(e.monotone ? "none" : "X"));
        }
    }
    return {ok, "K=1 N=100 thresholds" + detail};
}

Outcome fixed_point_convergence() {
    const auto cfg = reference();
    const auto problem = cfg.cell_problem(cfg.arrival_rate_for_load(200));
    auto solver = cfg.solver;
    solver.fixed_point_tolerance = kFixedPointTol;
    solver.max_fixed_point_iters = kFixedPointIters;
    const auto first = fixed_point_policy(problem, solver);
    const auto restart = fixed_point_policy(problem, solver, first.calls);
    const double delta = first.trace.back().delta;
    const bool ok = delta < kFixedPointTol && static_cast<int>(first.trace.size()) <= kFixedPointIters &&
                    restart.trace.size() == 1 && restart.policy.actions == first.policy.actions;
    return {ok, std::to_string(first.trace.size()) + " iterations, last ||dc|| = " + fmt(delta, 3) +
                    ", c* = (" + fmt(first.calls[0]) + ", " + fmt(first.calls[1]) + "), restart took " +
                    std::to_string(restart.trace.size())};
}

Outcome erlang_b() {
    const double load = 5.0;
    SimulationConfig sim;
    sim.classes = {{1, 1.0, -0.1, -8.0}};
    sim.total_channels = 10;
    sim.traffic = TrafficModel{load, {1.0}, {1.0}, 0.0, {0.0}};
    sim.warmup = 100.0;
    sim.horizon = sim.warmup + 1.05 * static_cast<double>(kMinArrivals) / load;
    sim.seed = 5;
    const auto r = run_simulation(build_hex_topology(0), AcceptAllProvider{}, sim);
    const double expected = oracle::erlang_b(10, load);
    const double got = *r.metrics.blocking[0];
    const double rel = std::abs(got - expected) / expected;
    const auto arrivals = r.metrics.per_class[0].new_arrivals;
    return {arrivals >= kMinArrivals && rel <= kErlangRelTol,
            std::to_string(arrivals) + " arrivals, P_cb = " + fmt(got, 5) + " vs B(10,5) = " + fmt(expected, 5) +
                ", relative error " + fmt(rel, 3)};
}

Outcome simulator_solver_consistency() {
    const auto cfg = reference();
    const double rate = cfg.arrival_rate_for_load(200);
    auto traffic = cfg.traffic(rate);
    traffic.handoff_rate_per_call = 0.0;
    std::fill(traffic.neighbor_calls.begin(), traffic.neighbor_calls.end(), 0.0);
    const CellMdp model(cfg.classes, cfg.total_channels, traffic, cfg.pricing);
    const auto solved = value_iteration(model, cfg.solver);
    const auto pi = stationary_distribution(induced_chain(model, solved.policy.actions), cfg.solver.stationary);

    SimulationConfig sim;
    sim.classes = cfg.classes;
    sim.total_channels = cfg.total_channels;
    sim.traffic = traffic;
    sim.pricing = cfg.pricing;
    sim.warmup = 1000.0;
    // About 2 lambda events per unit time once the cell is busy.
    sim.horizon = sim.warmup + 1.2 * static_cast<double>(kMinEvents) / rate;
    sim.seed = 6;
    sim.record_cell = 0;
    const auto r = run_simulation(build_hex_topology(0), TablePolicyProvider(solved.policy), sim);

    const auto& space = model.states();
    std::vector<double> empirical(space.num_occupancies(), 0.0), analytic(space.num_occupancies(), 0.0);
    double visits = 0.0;
    for (std::size_t s = 0; s < space.size(); ++s) {
        const auto o = *space.find_occupancy(space[s].occupancy);
        empirical[o] += static_cast<double>(r.raw.state_visits[s]);
        analytic[o] += pi[s];
        visits += static_cast<double>(r.raw.state_visits[s]);
    }
    double l1 = 0.0;
    for (std::size_t o = 0; o < empirical.size(); ++o) l1 += std::abs(empirical[o] / visits - analytic[o]);
    return {r.raw.events_simulated >= kMinEvents && l1 < kOccupancyL1,
            std::to_string(r.raw.events_simulated) + " events, " + std::to_string(space.num_occupancies()) +
                " occupancies, L1 = " + fmt(l1, 3)};
}

Outcome pricing_effect() {
    auto cfg = reference();
    set_r_db(cfg, 80);
    cfg.pricing = PricingScheme::flat;
    const auto flat = summarize(solved_dropping(cfg, 300));
    cfg.pricing = PricingScheme::linear;
    const auto linear = summarize(solved_dropping(cfg, 300));
    return {flat.n >= 1 && flat.mean * kPricingFactor < linear.mean,
            "load 300, P_hd flat = " + fmt(flat.mean) + ", linear = " + fmt(linear.mean) + " (ratio " +
                fmt(linear.mean / flat.mean, 3) + "; reported around 1% vs 10%)"};
}

Outcome r_db_effect() {
    auto cfg = reference();
    cfg.replications = std::max(cfg.replications, kMinReplications);
    set_r_db(cfg, 80);
    const auto r80 = summarize(solved_dropping(cfg, 300));
    set_r_db(cfg, 40);
    const auto r40 = summarize(solved_dropping(cfg, 300));
    const bool ok = r80.n >= static_cast<std::size_t>(kMinReplications) &&
                    r40.n >= static_cast<std::size_t>(kMinReplications) &&
                    r80.mean + r80.half_width < r40.mean - r40.half_width;
    return {ok, "load 300, " + std::to_string(r80.n) + " replications, P_hd r80 = " + fmt(r80.mean) + " +- " +
                    fmt(r80.half_width, 2) + ", r40 = " + fmt(r40.mean) + " +- " + fmt(r40.half_width, 2)};
}

Outcome mdp_vs_nag() {
    auto cfg = reference();
    set_r_db(cfg, 80);
    cfg.nag.alpha = kNagAlpha;
    cfg.replications = std::max(cfg.replications, kMinReplications);
    std::vector<MetricsRow> rows;
    for (double load : cfg.offered_loads) {
        auto one = cfg;
        one.offered_loads = {load};
        const auto point = solve_point(one, load, one.arrival_rate_for_load(load));
        auto mdp = simulate_rows(one, "mdp", [&](std::size_t) {
            return std::make_unique<TablePolicyProvider>(point.fixed_point.policy);
        });
        auto nag = simulate_rows(one, "nag", [&](std::size_t) { return make_nag_provider(one); });
        rows.insert(rows.end(), mdp.begin(), mdp.end());
        rows.insert(rows.end(), nag.begin(), nag.end());
    }
    const auto cmp = compare_rows(rows, cfg.classes.size());
    bool ok = cmp.size() == 3;
    std::string detail;
    for (std::size_t i = 0; i < cmp.size(); ++i) {
        ok = ok && cmp[i].utility_gain > 0.0 && (i == 0 || cmp[i].utility_gain > cmp[i - 1].utility_gain);
        detail += (i ? ", " : "") + std::string("L=") + fmt(cmp[i].load) + " gain " +
                  fmt(100 * cmp[i].utility_gain, 3) + "% +- " + fmt(100 * cmp[i].gain_se, 2) + "% (reported " +
                  fmt(100 * kReportedGains[i], 3) + "%)";
    }
    return {ok, detail};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    auto cfg = reference();
    cfg.output_dir = kScratch / "rerun";
    std::filesystem::remove_all(cfg.output_dir);
    std::vector<std::string> first;
    for (const auto& p : compare_command(cfg)) first.push_back(slurp(p));
    const auto second_paths = compare_command(cfg);
    bool same = second_paths.size() == first.size();
    std::size_t bytes = 0;
    for (std::size_t i = 0; same && i < first.size(); ++i) {
        const auto again = slurp(second_paths[i]);
        same = again == first[i] && !again.empty();
        bytes += again.size();
    }
    return {same, "full compare run twice, " + std::to_string(second_paths.size()) + " CSV files, " +
                      std::to_string(bytes) + " bytes identical"};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"transition_validity", transition_validity},
        {"oracle_optimality", oracle_optimality},
        {"threshold_structure", threshold_structure},
        {"fixed_point_self_consistency", fixed_point_convergence},
        {"erlang_b", erlang_b},
        {"simulator_solver_consistency", simulator_solver_consistency},
        {"pricing_effect", pricing_effect},
        {"r_db_effect", r_db_effect},
        {"mdp_vs_nag", mdp_vs_nag},
        {"determinism", determinism},
    };
    // Optional argument: run only the listed criterion numbers.
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

    std::filesystem::create_directories(kScratch);
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << id << ' ' << criteria[i].first << ": " << o.detail << " ["
                  << fmt(secs, 3) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
