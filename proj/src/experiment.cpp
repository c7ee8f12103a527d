#include "cac/experiment.hpp"

#include "cac/nag.hpp"
#include "cac/policy_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

namespace cac {

PolicySource PolicySource::parse(const std::string& text) {
    if (text == "mdp") return {Kind::mdp_solve, {}};
    if (text == "nag") return {Kind::nag, {}};
    if (text == "accept-all") return {Kind::accept_all, {}};
    if (text.rfind("mdp:", 0) == 0 && text.size() > 4) return {Kind::mdp_file, text.substr(4)};
    throw ConfigError("invalid config: --policy must be mdp, mdp:PATH, nag or accept-all, got '" + text + "'");
}

std::string PolicySource::label() const {
    switch (kind) {
        case Kind::mdp_solve: return "mdp";
        case Kind::mdp_file: return "mdp";
        case Kind::nag: return "nag";
        case Kind::accept_all: return "accept-all";
    }
    return "?";
}

void apply_overrides(ExperimentConfig& config, const Overrides& o) {
    if (o.seed) config.seed = *o.seed;
    if (o.out_dir) config.output_dir = *o.out_dir;
    if (o.loads) {
        config.arrival_rate.reset();
        config.offered_loads = *o.loads;
    }
    if (o.replications) config.replications = *o.replications;
    config.validate();
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& f) {
    std::size_t workers = jobs > 0 ? static_cast<std::size_t>(jobs)
                                   : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

SolvedPoint solve_point(const ExperimentConfig& config, double load, double arrival_rate) {
    SolvedPoint out;
    out.load = load;
    out.arrival_rate = arrival_rate;
    const auto problem = config.cell_problem(arrival_rate);
    out.fixed_point = config.method == FixedPointMethod::binary_search
                          ? binary_search_single_class(problem, config.solver)
                          : fixed_point_policy(problem, config.solver);
    const auto space = enumerate_states(config.classes, config.total_channels);
    out.thresholds = verify_threshold(out.fixed_point.policy.actions, space);
    return out;
}

SimulationConfig simulation_config(const ExperimentConfig& config, double arrival_rate, std::uint64_t seed) {
    SimulationConfig s;
    s.classes = config.classes;
    s.total_channels = config.total_channels;
    s.traffic = config.traffic(arrival_rate);
    s.pricing = config.pricing;
    s.horizon = config.horizon;
    s.warmup = config.warmup;
    s.seed = seed;
    s.allow_self_reinjection = config.allow_self_reinjection;
    return s;
}

std::unique_ptr<PolicyProvider> make_nag_provider(const ExperimentConfig& config) {
    std::vector<int> b;
    for (const auto& c : config.classes) b.push_back(c.bandwidth);
    return std::make_unique<NagProvider>(b, config.total_channels, config.handoff_rate(),
                                         std::vector<double>(config.classes.size(), config.holding_rate()),
                                         config.nag);
}

std::vector<MetricsRow> simulate_rows(
    const ExperimentConfig& config, const std::string& policy_name,
    const std::function<std::unique_ptr<PolicyProvider>(std::size_t)>& provider_for) {
    const auto points = config.load_points();
    const auto topology = build_hex_topology(config.rings);
    std::vector<std::unique_ptr<PolicyProvider>> providers;
    for (std::size_t j = 0; j < points.size(); ++j) providers.push_back(provider_for(j));

    const auto reps = static_cast<std::size_t>(config.replications);
    std::vector<MetricsRow> rows(points.size() * reps);
    parallel_for(rows.size(), config.jobs, [&](std::size_t task) {
        const std::size_t j = task / reps;
        const int r = static_cast<int>(task % reps);
        const auto seed = replication_seed(config, r);
        const auto result =
            run_simulation(topology, *providers[j], simulation_config(config, points[j].second, seed));
        rows[task] = {points[j].first, seed, policy_name, result.metrics};
    });
    return rows;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : "NA"; }

struct Summary {
    std::optional<double> mean, se;
};

Summary summarize(const std::vector<double>& xs) {
    Summary s;
    if (xs.empty()) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double n = static_cast<double>(xs.size());
    s.mean = sum / n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - *s.mean) * (x - *s.mean);
        s.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return s;
}

void write_header(std::ostream& out, const ExperimentConfig& config, const std::vector<std::string>& extra) {
    out << "# cac results, config schema_version " << config.schema_version << '\n';
    for (const auto& line : describe(config)) out << "# " << line << '\n';
    for (const auto& line : extra) out << "# " << line << '\n';
}

}  // namespace

void write_metrics_csv(std::ostream& out, const ExperimentConfig& config, std::vector<MetricsRow> rows,
                       const std::vector<std::string>& extra_header) {
    const std::size_t k = config.classes.size();
    std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
        return std::tie(a.load, a.policy, a.seed) < std::tie(b.load, b.policy, b.seed);
    });
    write_header(out, config, extra_header);
    out << "seed,load,policy";
    for (std::size_t i = 1; i <= k; ++i) out << ",pcb_" << i;
    for (std::size_t i = 1; i <= k; ++i) out << ",phd_" << i;
    out << ",utility_raw,normalized_utility,events_simulated\n";

    for (const auto& r : rows) {
        out << r.seed << ',' << format_real(r.load) << ',' << r.policy;
        for (const auto& p : r.metrics.blocking) out << ',' << cell(p);
        for (const auto& p : r.metrics.dropping) out << ',' << cell(p);
        out << ',' << format_real(r.metrics.utility_raw) << ',' << format_real(r.metrics.normalized_utility)
            << ',' << r.metrics.events_simulated << '\n';
    }

    // Aggregates per (load, policy), in the same order.
    for (std::size_t a = 0; a < rows.size();) {
        std::size_t e = a;
        while (e < rows.size() && rows[e].load == rows[a].load && rows[e].policy == rows[a].policy) ++e;
        std::vector<Summary> columns;
        auto add = [&](auto get) {
            std::vector<double> xs;
            for (std::size_t i = a; i < e; ++i) {
                if (auto v = get(rows[i].metrics)) xs.push_back(*v);
            }
            columns.push_back(summarize(xs));
        };
        for (std::size_t i = 0; i < k; ++i) add([i](const SimMetrics& m) { return m.blocking[i]; });
        for (std::size_t i = 0; i < k; ++i) add([i](const SimMetrics& m) { return m.dropping[i]; });
        add([](const SimMetrics& m) { return std::optional<double>(m.utility_raw); });
        add([](const SimMetrics& m) { return std::optional<double>(m.normalized_utility); });
        add([](const SimMetrics& m) { return std::optional<double>(static_cast<double>(m.events_simulated)); });
        for (const char* which : {"mean", "se"}) {
            const bool mean = which[0] == 'm';
            out << which << ',' << format_real(rows[a].load) << ',' << rows[a].policy;
            for (const auto& s : columns) out << ',' << cell(mean ? s.mean : s.se);
            out << '\n';
        }
        a = e;
    }
}

std::vector<ComparisonRow> compare_rows(const std::vector<MetricsRow>& rows, std::size_t num_classes) {
    std::map<std::pair<double, std::uint64_t>, const SimMetrics*> mdp, nag;
    for (const auto& r : rows) {
        (r.policy == "nag" ? nag : mdp)[{r.load, r.seed}] = &r.metrics;
    }
    std::map<double, std::vector<std::pair<const SimMetrics*, const SimMetrics*>>> by_load;
    for (const auto& [key, m] : mdp) {
        const auto it = nag.find(key);
        if (it != nag.end()) by_load[key.first].emplace_back(m, it->second);
    }

    std::vector<ComparisonRow> out;
    for (const auto& [load, pairs] : by_load) {
        ComparisonRow c;
        c.load = load;
        c.replications = static_cast<int>(pairs.size());
        std::vector<double> um, un, gains;
        for (const auto& [m, n] : pairs) {
            um.push_back(m->normalized_utility);
            un.push_back(n->normalized_utility);
            gains.push_back((m->normalized_utility - n->normalized_utility) / std::abs(n->normalized_utility));
        }
        c.utility_mdp = *summarize(um).mean;
        c.utility_nag = *summarize(un).mean;
        c.utility_ratio = c.utility_mdp / c.utility_nag;
        c.utility_gain = (c.utility_mdp - c.utility_nag) / std::abs(c.utility_nag);
        c.gain_se = summarize(gains).se.value_or(0.0);
        auto mean_of = [&](bool use_mdp, bool blocking, std::size_t i) {
            std::vector<double> xs;
            for (const auto& [m, n] : pairs) {
                const auto* s = use_mdp ? m : n;
                if (auto v = blocking ? s->blocking[i] : s->dropping[i]) xs.push_back(*v);
            }
            return summarize(xs).mean;
        };
        for (std::size_t i = 0; i < num_classes; ++i) {
            c.pcb_mdp.push_back(mean_of(true, true, i));
            c.phd_mdp.push_back(mean_of(true, false, i));
            c.pcb_nag.push_back(mean_of(false, true, i));
            c.phd_nag.push_back(mean_of(false, false, i));
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_comparison_csv(std::ostream& out, const ExperimentConfig& config,
                          const std::vector<ComparisonRow>& rows) {
    const std::size_t k = config.classes.size();
    write_header(out, config, {"utility = mean normalized utility over matched seeds"});
    out << "load,replications,utility_mdp,utility_nag,utility_ratio,utility_gain,gain_se";
    for (const char* p : {"mdp", "nag"}) {
        for (std::size_t i = 1; i <= k; ++i) out << ",pcb_" << p << '_' << i;
        for (std::size_t i = 1; i <= k; ++i) out << ",phd_" << p << '_' << i;
    }
    out << '\n';
    for (const auto& c : rows) {
        out << format_real(c.load) << ',' << c.replications << ',' << format_real(c.utility_mdp) << ','
            << format_real(c.utility_nag) << ',' << format_real(c.utility_ratio) << ','
            << format_real(c.utility_gain) << ',' << format_real(c.gain_se);
        for (const auto* group : {&c.pcb_mdp, &c.phd_mdp, &c.pcb_nag, &c.phd_nag}) {
            for (const auto& v : *group) out << ',' << cell(v);
        }
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

std::filesystem::path prepare_dir(const ExperimentConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + config.output_dir.string() + ": " + ec.message());
    return config.output_dir;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string policy_file_name(double load) { return "policy_L" + format_real(load) + ".txt"; }

nlohmann::json to_json(const std::vector<double>& xs) {
    auto j = nlohmann::json::array();
    for (double x : xs) j.push_back(x);
    return j;
}

std::vector<SolvedPoint> solve_all(const ExperimentConfig& config) {
    const auto points = config.load_points();
    std::vector<SolvedPoint> solved(points.size());
    parallel_for(points.size(), config.jobs, [&](std::size_t j) {
        solved[j] = solve_point(config, points[j].first, points[j].second);
    });
    return solved;
}

}  // namespace

std::vector<std::filesystem::path> solve_command(const ExperimentConfig& config) {
    const auto dir = prepare_dir(config);
    const auto solved = solve_all(config);
    const auto space = enumerate_states(config.classes, config.total_channels);

    std::vector<std::filesystem::path> written;
    nlohmann::json report;
    report["schema_version"] = config.schema_version;
    report["load_unit"] = "BU-Erlangs per cell";
    report["states"] = space.size();
    report["points"] = nlohmann::json::array();
    for (const auto& p : solved) {
        const auto path = dir / policy_file_name(p.load);
        write_policy(path, p.fixed_point.policy);
        written.push_back(path);

        nlohmann::json j;
        j["load"] = p.load;
        j["arrival_rate"] = p.arrival_rate;
        j["policy_file"] = path.filename().string();
        j["fixed_point_iterations"] = p.fixed_point.trace.size();
        j["calls"] = to_json(p.fixed_point.calls);
        j["gain"] = p.fixed_point.gain;
        j["warnings"] = p.fixed_point.warnings;
        auto trace = nlohmann::json::array();
        for (const auto& s : p.fixed_point.trace) {
            trace.push_back({{"assumed", to_json(s.assumed)},
                             {"induced", to_json(s.induced)},
                             {"delta", s.delta},
                             {"gain", s.gain},
                             {"sweeps", s.sweeps},
                             {"note", s.note}});
        }
        j["trace"] = trace;
        auto thresholds = nlohmann::json::array();
        for (const auto& e : p.thresholds.entries) {
            nlohmann::json t;
            t["event"] = event_code(e.event);
            t["monotone"] = e.monotone;
            t["threshold"] = e.threshold ? nlohmann::json(*e.threshold) : nlohmann::json(nullptr);
            t["violations"] = e.violation_count;
            thresholds.push_back(t);
        }
        j["thresholds"] = thresholds;
        j["threshold_structure"] = p.thresholds.all_monotone();
        report["points"].push_back(j);
    }
    auto config_echo = nlohmann::json::array();
    for (const auto& line : describe(config)) config_echo.push_back(line);
    report["config"] = config_echo;

    const auto report_path = dir / "solve_report.json";
    write_file(report_path, report.dump(2) + "\n");
    written.push_back(report_path);
    return written;
}

namespace {

void check_policy_matches(const Policy& p, const ExperimentConfig& config, const std::filesystem::path& path) {
    bool ok = p.metadata.total_channels == config.total_channels &&
              p.metadata.classes.size() == config.classes.size();
    for (std::size_t i = 0; ok && i < config.classes.size(); ++i) {
        ok = p.metadata.classes[i].bandwidth == config.classes[i].bandwidth;
    }
    if (!ok) {
        throw ConfigError("invalid config: policy file " + path.string() +
                          " does not match classes.bandwidth / traffic.total_channels");
    }
}

std::vector<MetricsRow> mdp_rows(const ExperimentConfig& config, std::vector<std::string>& header) {
    const auto solved = solve_all(config);
    for (const auto& p : solved) {
        std::string calls;
        for (double c : p.fixed_point.calls) calls += (calls.empty() ? "" : ",") + format_real(c);
        header.push_back("mdp[load=" + format_real(p.load) + "] fixed_point_iterations = " +
                         std::to_string(p.fixed_point.trace.size()) + ", calls = " + calls);
    }
    return simulate_rows(config, "mdp", [&](std::size_t j) {
        return std::make_unique<TablePolicyProvider>(solved[j].fixed_point.policy, "mdp");
    });
}

}  // namespace

std::vector<std::filesystem::path> simulate_command(const ExperimentConfig& config, const PolicySource& source) {
    const auto dir = prepare_dir(config);
    std::vector<std::string> header{"policy_source = " + source.label() +
                                    (source.kind == PolicySource::Kind::mdp_file ? ":" + source.path.string() : "")};
    std::vector<MetricsRow> rows;
    switch (source.kind) {
        case PolicySource::Kind::mdp_solve:
            rows = mdp_rows(config, header);
            break;
        case PolicySource::Kind::mdp_file: {
            const auto policy = read_policy(source.path);
            check_policy_matches(policy, config, source.path);
            rows = simulate_rows(config, "mdp",
                                 [&](std::size_t) { return std::make_unique<TablePolicyProvider>(policy, "mdp"); });
            break;
        }
        case PolicySource::Kind::nag:
            rows = simulate_rows(config, "nag", [&](std::size_t) { return make_nag_provider(config); });
            break;
        case PolicySource::Kind::accept_all:
            rows = simulate_rows(config, "accept-all",
                                 [](std::size_t) { return std::make_unique<AcceptAllProvider>(); });
            break;
    }
    std::ostringstream csv;
    write_metrics_csv(csv, config, std::move(rows), header);
    const auto path = dir / ("metrics_" + source.label() + ".csv");
    write_file(path, csv.str());
    return {path};
}

std::vector<std::filesystem::path> compare_command(const ExperimentConfig& config) {
    const auto dir = prepare_dir(config);
    std::vector<std::string> header;
    auto rows = mdp_rows(config, header);
    auto nag = simulate_rows(config, "nag", [&](std::size_t) { return make_nag_provider(config); });
    rows.insert(rows.end(), nag.begin(), nag.end());

    std::ostringstream metrics, comparison;
    write_comparison_csv(comparison, config, compare_rows(rows, config.classes.size()));
    write_metrics_csv(metrics, config, std::move(rows), header);
    const auto cmp_path = dir / "compare.csv";
    const auto metrics_path = dir / "compare_metrics.csv";
    write_file(cmp_path, comparison.str());
    write_file(metrics_path, metrics.str());
    return {cmp_path, metrics_path};
}

// ---------------------------------------------------------------------------
// verify

bool verify_command(const ExperimentConfig& config, std::ostream& log) {
    bool all = true;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        log << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
        all = all && ok;
    };
    const auto points = config.load_points();
    const auto [load, rate] = points.front();
    const auto problem = config.cell_problem(rate);
    const auto space = std::make_shared<const StateSpace>(enumerate_states(config.classes, config.total_channels));

    {
        const auto model = problem.make_model(default_initial_calls(problem), space);
        double worst = 0.0;
        bool inside = true;
        for (std::size_t s = 0; s < space->size(); ++s) {
            for (Action a : {Action::reject, Action::accept}) {
                if (!model.is_feasible(s, a)) continue;
                double sum = 0.0;
                for (const auto& t : model.transition_distribution(s, a)) {
                    sum += t.probability;
                    inside = inside && t.target < space->size() && t.probability >= 0.0;
                }
                worst = std::max(worst, std::abs(sum - 1.0));
            }
        }
        report("transition_validity", inside && worst <= 1e-12,
               std::to_string(space->size()) + " states, max |sum - 1| = " + format_real(worst));
    }

    SolvedPoint solved;
    try {
        solved = solve_point(config, load, rate);
        report("fixed_point", true,
               "load " + format_real(load) + " converged in " + std::to_string(solved.fixed_point.trace.size()) +
                   " iterations");
    } catch (const ConvergenceError& e) {
        report("fixed_point", false, e.what());
        return false;
    }
    {
        const auto& pi = solved.fixed_point.distribution;
        double sum = 0.0, low = 0.0;
        for (double p : pi) {
            sum += p;
            low = std::min(low, p);
        }
        const auto model = problem.make_model(solved.fixed_point.calls, space);
        const auto chain = induced_chain(model, solved.fixed_point.policy.actions);
        const double residual = stationary_residual(chain, pi);
        report("stationary_distribution", low >= 0.0 && std::abs(sum - 1.0) <= 1e-10 && residual < 1e-8,
               "sum - 1 = " + format_real(sum - 1.0) + ", residual = " + format_real(residual));
    }
    {
        std::size_t violations = 0;
        for (const auto& e : solved.thresholds.entries) violations += e.violation_count;
        log << "INFO threshold_structure: " << (solved.thresholds.all_monotone() ? "monotone" : "not monotone")
            << " (" << violations << " violations)\n";
    }
    {
        auto sim = config;
        sim.horizon = std::min(config.horizon, 2000.0);
        sim.warmup = std::min(config.warmup, 0.1 * sim.horizon);
        const auto topology = build_hex_topology(config.rings);
        const TablePolicyProvider provider(solved.fixed_point.policy);
        const auto cfg = simulation_config(sim, rate, config.seed);
        const auto a = run_simulation(topology, provider, cfg);
        const auto b = run_simulation(topology, provider, cfg);
        bool conserved = true;
        for (const auto& c : a.raw.cohort) {
            conserved = conserved && c.arrivals == c.blocked + c.completed + c.dropped + c.active_at_horizon;
        }
        report("conservation", conserved, "per-class cohort fates add up");
        const bool same = a.raw.events_simulated == b.raw.events_simulated &&
                          a.raw.utility_raw == b.raw.utility_raw &&
                          a.raw.utility_infinite_capacity == b.raw.utility_infinite_capacity;
        report("determinism", same, std::to_string(a.raw.events_simulated) + " events, identical reruns");
    }
    {
        const auto s = survival_probabilities(config.handoff_rate(), config.holding_rate(), config.nag.t_est);
        report("nag_survival", s.p_stay + 6.0 * s.p_move <= 1.0 + 1e-15,
               "p_stay = " + format_real(s.p_stay) + ", p_move = " + format_real(s.p_move));
    }
    return all;
}

}  // namespace cac
