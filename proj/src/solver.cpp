#include "cac/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cac {

void SolverConfig::validate() const {
    if (criterion == Criterion::discounted && !(discount > 0.0 && discount < 1.0)) {
        throw ModelError("solver: discount must be in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw ModelError("solver: epsilon must be > 0");
    if (max_sweeps < 1) throw ModelError("solver: max_sweeps must be >= 1");
    if (!(aperiodicity > 0.0 && aperiodicity <= 1.0)) {
        throw ModelError("solver: aperiodicity must be in (0, 1]");
    }
    if (!(fixed_point_tolerance > 0.0)) throw ModelError("solver: fixed_point_tolerance must be > 0");
    if (!(fixed_point_damping > 0.0 && fixed_point_damping <= 1.0)) {
        throw ModelError("solver: fixed_point_damping must be in (0, 1]");
    }
    if (max_fixed_point_iters < 1) throw ModelError("solver: max_fixed_point_iters must be >= 1");
}

// ---------------------------------------------------------------------------
// TabularMdp

TabularMdp::TabularMdp(std::size_t num_states)
    : feasible_(2 * num_states, false), reward_(2 * num_states, 0.0), rows_(2 * num_states) {}

void TabularMdp::set(std::size_t state, Action action, double reward, std::vector<Transition> row) {
    const auto i = slot(state, action);
    feasible_[i] = true;
    reward_[i] = reward;
    rows_[i] = std::move(row);
}

void TabularMdp::check() const {
    for (std::size_t s = 0; s < size(); ++s) {
        if (!feasible(s, Action::reject) && !feasible(s, Action::accept)) {
            throw ModelError("state " + std::to_string(s) + " has no feasible action");
        }
        for (Action a : {Action::reject, Action::accept}) {
            if (!feasible(s, a)) continue;
            double total = 0.0;
            for (const auto& t : row(s, a)) {
                if (t.probability < 0.0 || t.target >= size()) {
                    throw ModelError("state " + std::to_string(s) + ": invalid transition");
                }
                total += t.probability;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw ModelError("state " + std::to_string(s) + ": row sums to " +
                                 std::to_string(total));
            }
        }
    }
}

TabularMdp compile(const CellMdp& model, RewardTiming timing) {
    const std::size_t n = model.size();
    TabularMdp out(n);

    if (timing == RewardTiming::per_epoch) {
        for (std::size_t s = 0; s < n; ++s) {
            for (Action a : {Action::reject, Action::accept}) {
                if (model.is_feasible(s, a)) {
                    out.set(s, a, model.reward(s, a), model.transition_distribution(s, a));
                }
            }
        }
        return out;
    }

    // Semi-Markov: reward per epoch r(s,a) with the carriage paid for the
    // sojourn, then the data transformation
    //   r' = r / tau(s,a),  P' = I + (tau0 / tau(s,a)) (P - I).
    const auto& classes = model.classes();
    std::vector<double> tau(2 * n, 0.0);
    double tau0 = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n; ++s) {
        for (Action a : {Action::reject, Action::accept}) {
            if (model.is_feasible(s, a)) {
                tau[2 * s + static_cast<std::size_t>(a)] = model.sojourn_time(s, a);
                tau0 = std::min(tau0, tau[2 * s + static_cast<std::size_t>(a)]);
            }
        }
    }
    for (std::size_t s = 0; s < n; ++s) {
        const auto& state = model.states()[s];
        double carriage = 0.0;
        for (std::size_t j = 0; j < classes.size(); ++j) {
            carriage += state.occupancy[j] * classes[j].reward_carry;
        }
        for (Action a : {Action::reject, Action::accept}) {
            if (!model.is_feasible(s, a)) continue;
            const double t = tau[2 * s + static_cast<std::size_t>(a)];
            double r = model.reward(s, a);
            if (model.pricing() == PricingScheme::linear) {
                r += carriage * (t - 1.0);
            }
            auto row = model.transition_distribution(s, a);
            const double scale = tau0 / t;
            bool has_self = false;
            for (auto& tr : row) {
                tr.probability *= scale;
                if (tr.target == s) {
                    tr.probability += 1.0 - scale;
                    has_self = true;
                }
            }
            if (!has_self && scale < 1.0) {
                row.push_back({s, 1.0 - scale});
            }
            out.set(s, a, r / t, std::move(row));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Value iteration

namespace {

struct Backup {
    const TabularMdp& mdp;
    const SolverConfig& cfg;

    double q(std::size_t s, Action a, const std::vector<double>& v) const {
        double expect = 0.0;
        for (const auto& t : mdp.row(s, a)) {
            expect += t.probability * v[t.target];
        }
        if (cfg.criterion == Criterion::discounted) {
            return mdp.reward(s, a) + cfg.discount * expect;
        }
        const double w = cfg.aperiodicity;
        return mdp.reward(s, a) + w * expect + (1.0 - w) * v[s];
    }

    /// Best value and action; reject wins ties.
    std::pair<double, Action> best(std::size_t s, const std::vector<double>& v) const {
        const bool can_reject = mdp.feasible(s, Action::reject);
        const bool can_accept = mdp.feasible(s, Action::accept);
        if (!can_accept) return {q(s, Action::reject, v), Action::reject};
        if (!can_reject) return {q(s, Action::accept, v), Action::accept};
        const double qr = q(s, Action::reject, v);
        const double qa = q(s, Action::accept, v);
        return qa > qr ? std::pair{qa, Action::accept} : std::pair{qr, Action::reject};
    }
};

}  // namespace

std::vector<Action> greedy_policy(const TabularMdp& mdp, const ValueFunction& value,
                                  const SolverConfig& config) {
    const Backup backup{mdp, config};
    std::vector<Action> policy(mdp.size());
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        policy[s] = backup.best(s, value.values).second;
    }
    return policy;
}

SolveResult value_iteration(const TabularMdp& mdp, const SolverConfig& config,
                            const ValueFunction* warm_start) {
    config.validate();
    const std::size_t n = mdp.size();
    if (n == 0) throw ModelError("value_iteration: empty MDP");
    const Backup backup{mdp, config};

    SolveResult out;
    std::vector<double> v(n, 0.0), next(n);
    if (warm_start && warm_start->values.size() == n) {
        v = warm_start->values;
    }
    const bool average = config.criterion == Criterion::average_reward;
    constexpr std::size_t reference = 0;  // empty cell, no event

    double delta = std::numeric_limits<double>::infinity();
    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t s = 0; s < n; ++s) {
            next[s] = backup.best(s, v).first;
            const double d = next[s] - v[s];
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        if (average) {
            delta = hi - lo;
            out.gain = 0.5 * (hi + lo);
            const double ref = next[reference];
            for (auto& x : next) x -= ref;
        } else {
            delta = std::max(std::abs(hi), std::abs(lo));
        }
        v.swap(next);
        out.deltas.push_back(delta);
        out.sweeps = sweep;
        if (delta < config.epsilon) {
            out.final_delta = delta;
            out.value.values = std::move(v);
            out.actions = greedy_policy(mdp, out.value, config);
            return out;
        }
    }
    throw ConvergenceError("value_iteration did not converge in " +
                               std::to_string(config.max_sweeps) + " sweeps (last " +
                               (average ? "span " : "sup-norm ") + std::to_string(delta) + ")",
                           config.max_sweeps, delta);
}

CellSolution value_iteration(const CellMdp& model, const SolverConfig& config,
                             const ValueFunction* warm_start) {
    const auto tab = compile(model, config.timing);
    CellSolution out;
    out.result = value_iteration(tab, config, warm_start);
    out.policy.actions = out.result.actions;
    out.policy.metadata = {model.states().total_channels(), model.classes(),
                           model.traffic().neighbor_calls, model.pricing()};
    return out;
}

// ---------------------------------------------------------------------------
// Induced chain and statistics

SparseChain induced_chain(const TabularMdp& mdp, const std::vector<Action>& policy) {
    SparseChain chain(mdp.size());
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        if (!mdp.feasible(s, policy[s])) {
            throw InfeasibleActionError("policy chooses an infeasible action in state " +
                                        std::to_string(s));
        }
        cols.clear();
        vals.clear();
        for (const auto& t : mdp.row(s, policy[s])) {
            cols.push_back(t.target);
            vals.push_back(t.probability);
        }
        chain.add_row(cols, vals);
    }
    return chain;
}

SparseChain induced_chain(const CellMdp& model, const std::vector<Action>& policy) {
    if (policy.size() != model.size()) {
        throw ModelError("policy size does not match the state space");
    }
    SparseChain chain(model.size());
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    for (std::size_t s = 0; s < model.size(); ++s) {
        cols.clear();
        vals.clear();
        for (const auto& t : model.transition_distribution(s, policy[s])) {
            cols.push_back(t.target);
            vals.push_back(t.probability);
        }
        chain.add_row(cols, vals);
    }
    return chain;
}

double average_reward(const TabularMdp& mdp, const std::vector<Action>& policy,
                      std::span<const double> distribution) {
    double g = 0.0;
    for (std::size_t s = 0; s < mdp.size(); ++s) {
        g += distribution[s] * mdp.reward(s, policy[s]);
    }
    return g;
}

std::vector<double> expected_calls(std::span<const double> distribution, const StateSpace& space) {
    std::vector<double> c(space.num_classes(), 0.0);
    for (std::size_t s = 0; s < space.size(); ++s) {
        const auto& x = space[s].occupancy;
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] += distribution[s] * x[i];
        }
    }
    return c;
}

std::vector<double> time_average_calls(const CellMdp& model, const std::vector<Action>& policy,
                                       std::span<const double> distribution) {
    std::vector<double> c(model.classes().size(), 0.0);
    double total_time = 0.0;
    for (std::size_t s = 0; s < model.size(); ++s) {
        if (distribution[s] == 0.0) continue;
        const double w = distribution[s] * model.sojourn_time(s, policy[s]);
        const auto x = model.post_action_occupancy(s, policy[s]);
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] += w * x[i];
        }
        total_time += w;
    }
    for (auto& v : c) v /= total_time;
    return c;
}

std::vector<double> occupancy_marginal(std::span<const double> distribution, const StateSpace& space) {
    std::vector<double> m(space.num_occupancies(), 0.0);
    for (std::size_t s = 0; s < space.size(); ++s) {
        m[space.occupancy_index(s)] += distribution[s];
    }
    return m;
}

// ---------------------------------------------------------------------------
// Fixed point

CellMdp CellProblem::make_model(std::vector<double> neighbor_calls,
                                std::shared_ptr<const StateSpace> space) const {
    TrafficModel t = traffic;
    t.neighbor_calls = std::move(neighbor_calls);
    if (!space) {
        space = std::make_shared<const StateSpace>(enumerate_states(classes, total_channels));
    }
    return CellMdp(std::move(space), classes, std::move(t), pricing, convention);
}

std::vector<double> default_initial_calls(const CellProblem& problem) {
    std::vector<double> c(problem.classes.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        c[i] = 0.5 * problem.total_channels * problem.traffic.class_mix[i] /
               problem.classes[i].bandwidth;
    }
    return c;
}

namespace {

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

/// Solves at one neighbour-call guess and measures the calls it induces.
struct Evaluation {
    CellSolution solution;
    std::vector<double> distribution;
    std::vector<double> induced;
};

class Evaluator {
public:
    Evaluator(const CellProblem& problem, const SolverConfig& config)
        : problem_(problem),
          config_(config),
          space_(std::make_shared<const StateSpace>(
              enumerate_states(problem.classes, problem.total_channels))) {}

    Evaluation operator()(const std::vector<double>& calls) {
        const auto model = problem_.make_model(calls, space_);
        Evaluation e;
        e.solution = value_iteration(model, config_, warm_value_ ? &*warm_value_ : nullptr);
        const auto chain = induced_chain(model, e.solution.policy.actions);
        e.distribution = stationary_distribution(chain, config_.stationary, warm_pi_);
        e.induced = time_average_calls(model, e.solution.policy.actions, e.distribution);
        warm_value_ = e.solution.result.value;
        warm_pi_ = e.distribution;
        return e;
    }

    std::shared_ptr<const StateSpace> space() const { return space_; }

private:
    const CellProblem& problem_;
    const SolverConfig& config_;
    std::shared_ptr<const StateSpace> space_;
    std::optional<ValueFunction> warm_value_;
    std::vector<double> warm_pi_;
};

bool no_exogenous_traffic(const CellProblem& problem) { return problem.traffic.arrival_rate == 0.0; }

/// Without new calls the network empties: c* = 0 and there is nothing to admit.
FixedPointResult empty_system(const CellProblem& problem, const std::vector<double>& initial) {
    const auto space = enumerate_states(problem.classes, problem.total_channels);
    FixedPointResult out;
    out.calls.assign(problem.classes.size(), 0.0);
    out.policy.actions.assign(space.size(), Action::reject);
    out.policy.metadata = {problem.total_channels, problem.classes, out.calls, problem.pricing};
    out.distribution.assign(space.size(), 0.0);
    out.distribution[space.empty_state()] = 1.0;
    FixedPointStep step;
    step.assumed = initial;
    step.induced = out.calls;
    step.next = out.calls;
    step.delta = sup_distance(initial, out.calls);
    step.note = "no exogenous traffic";
    out.trace.push_back(std::move(step));
    return out;
}

}  // namespace

FixedPointResult fixed_point_policy(const CellProblem& problem, const SolverConfig& config,
                                    std::optional<std::vector<double>> initial) {
    config.validate();
    std::vector<double> c = initial ? *initial : default_initial_calls(problem);
    if (c.size() != problem.classes.size()) {
        throw ModelError("fixed_point_policy: initial guess needs one entry per class");
    }
    if (no_exogenous_traffic(problem)) {
        return empty_system(problem, c);
    }

    Evaluator evaluate(problem, config);
    FixedPointResult out;
    const double d = config.fixed_point_damping;
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 0; k < config.max_fixed_point_iters; ++k) {
        auto e = evaluate(c);
        FixedPointStep step;
        step.assumed = c;
        step.induced = e.induced;
        const double full = d * sup_distance(e.induced, c);
        // Policy switches can make c' jump; a step never grows past the
        // previous one, so the trace of ||c_{k+1} - c_k|| is non-increasing.
        const double scale = full > previous ? previous / full : 1.0;
        if (scale < 1.0) step.note = "step capped at previous length";
        step.next.resize(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            step.next[i] = c[i] + scale * d * (e.induced[i] - c[i]);
        }
        step.delta = sup_distance(step.next, c);
        step.gain = e.solution.result.gain;
        step.sweeps = e.solution.result.sweeps;
        out.trace.push_back(step);
        previous = step.delta;
        if (full < config.fixed_point_tolerance) {
            out.policy = std::move(e.solution.policy);
            out.calls = c;
            out.gain = e.solution.result.gain;
            out.distribution = std::move(e.distribution);
            return out;
        }
        c = step.next;
    }
    const std::string message = "fixed_point_policy did not converge in " +
                                std::to_string(config.max_fixed_point_iters) + " iterations (last step " +
                                std::to_string(out.trace.back().delta) + ")";
    throw FixedPointError(message, std::move(out.trace));
}

FixedPointResult binary_search_single_class(const CellProblem& problem, const SolverConfig& config,
                                            std::optional<double> initial) {
    config.validate();
    if (problem.classes.size() != 1) {
        throw ModelError("binary_search_single_class needs exactly one class");
    }
    const double c0 = initial ? *initial : default_initial_calls(problem).front();
    if (no_exogenous_traffic(problem)) {
        return empty_system(problem, {c0});
    }

    Evaluator evaluate(problem, config);
    FixedPointResult out;
    auto record = [&](double at, const Evaluation& e, std::string note) {
        FixedPointStep step;
        step.assumed = {at};
        step.induced = e.induced;
        step.next = {at};
        step.delta = std::abs(e.induced.front() - at);
        step.gain = e.solution.result.gain;
        step.sweeps = e.solution.result.sweeps;
        step.note = std::move(note);
        out.trace.push_back(std::move(step));
    };
    auto finish = [&](double at, Evaluation e) {
        out.policy = std::move(e.solution.policy);
        out.calls = {at};
        out.gain = e.solution.result.gain;
        out.distribution = std::move(e.distribution);
        return out;
    };

    auto e0 = evaluate({c0});
    const double c0_induced = e0.induced.front();
    record(c0, e0, "initial guess");
    if (std::abs(c0_induced - c0) < config.fixed_point_tolerance) {
        return finish(c0, std::move(e0));
    }

    // The optimum lies between c0 and c0': c' - c must change sign there.
    double lo = std::min(c0, c0_induced);
    double hi = std::max(c0, c0_induced);
    const double other = c0 < c0_induced ? hi : lo;
    auto e1 = evaluate({other});
    record(other, e1, "bracket end");
    const double h0 = c0_induced - c0;
    const double h1 = e1.induced.front() - other;
    if ((h0 > 0.0 && h1 > 0.0) || (h0 < 0.0 && h1 < 0.0)) {
        out.warnings.push_back(
            "monotonicity violated: c' - c has the same sign at both bracket ends; "
            "falling back to damped fixed-point iteration");
        auto fallback = fixed_point_policy(problem, config, std::vector<double>{c0});
        fallback.warnings = out.warnings;
        out.trace.insert(out.trace.end(), fallback.trace.begin(), fallback.trace.end());
        fallback.trace = std::move(out.trace);
        return fallback;
    }

    const bool rising_at_lo = (lo == c0 ? h0 : h1) > 0.0;
    while (hi - lo >= config.fixed_point_tolerance) {
        const double mid = 0.5 * (lo + hi);
        auto e = evaluate({mid});
        record(mid, e, "bisection");
        if ((e.induced.front() > mid) == rising_at_lo) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double at = 0.5 * (lo + hi);
    auto final_eval = evaluate({at});
    record(at, final_eval, "bracket midpoint");
    return finish(at, std::move(final_eval));
}

// ---------------------------------------------------------------------------
// Thresholds

bool ThresholdReport::all_monotone() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.monotone; });
}

ThresholdReport verify_threshold(const std::vector<Action>& policy, const StateSpace& space) {
    if (policy.size() != space.size()) {
        throw ModelError("verify_threshold: policy size does not match the state space");
    }
    constexpr std::size_t max_listed = 16;
    ThresholdReport report;
    const std::size_t k = space.num_classes();
    for (EventKind kind : {EventKind::new_arrival, EventKind::handoff_arrival}) {
        for (std::size_t i = 0; i < k; ++i) {
            ThresholdEntry entry;
            entry.event = {kind, static_cast<int>(i)};
            std::vector<std::size_t> accepted, rejected;
            for (std::size_t s = 0; s < space.size(); ++s) {
                if (space[s].event != entry.event) continue;
                (policy[s] == Action::accept ? accepted : rejected).push_back(s);
            }
            auto by_bw = [&](std::size_t a, std::size_t b) {
                return space.used_bandwidth(a) < space.used_bandwidth(b);
            };
            std::sort(accepted.begin(), accepted.end(), by_bw);
            for (std::size_t r : rejected) {
                const int bw = space.used_bandwidth(r);
                auto first = std::lower_bound(
                    accepted.begin(), accepted.end(), bw,
                    [&](std::size_t a, int v) { return space.used_bandwidth(a) < v; });
                for (auto it = first; it != accepted.end(); ++it) {
                    ++entry.violation_count;
                    if (entry.violations.size() < max_listed) {
                        entry.violations.emplace_back(r, *it);
                    }
                }
            }
            entry.monotone = entry.violation_count == 0;
            if (entry.monotone) {
                entry.threshold = accepted.empty() ? 0
                                                   : space.used_bandwidth(accepted.back()) +
                                                         space.bandwidths()[i];
            }
            report.entries.push_back(std::move(entry));
        }
    }
    return report;
}

}  // namespace cac
