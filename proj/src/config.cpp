#include "cac/config.hpp"

#include "cac/policy_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace cac {

double ExperimentConfig::rho() const { return mobility_rho(speed_kmh, holding_rate(), cell_radius_km); }

double ExperimentConfig::mean_bandwidth() const {
    double b = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i) b += class_mix[i] * classes[i].bandwidth;
    return b;
}

double ExperimentConfig::arrival_rate_for_load(double load) const {
    return load * holding_rate() / mean_bandwidth();
}

double ExperimentConfig::load_for_arrival_rate(double rate) const {
    return rate * mean_bandwidth() / holding_rate();
}

std::vector<std::pair<double, double>> ExperimentConfig::load_points() const {
    std::vector<std::pair<double, double>> out;
    if (arrival_rate) {
        out.emplace_back(load_for_arrival_rate(*arrival_rate), *arrival_rate);
    } else {
        for (double l : offered_loads) out.emplace_back(l, arrival_rate_for_load(l));
    }
    return out;
}

TrafficModel ExperimentConfig::traffic(double rate) const {
    TrafficModel t;
    t.arrival_rate = rate;
    t.class_mix = class_mix;
    t.holding_rates.assign(classes.size(), holding_rate());
    t.handoff_rate_per_call = handoff_rate();
    t.neighbor_calls.assign(classes.size(), 0.0);
    t.handoff_departures = handoff_departures;
    return t;
}

CellProblem ExperimentConfig::cell_problem(double rate) const {
    return {classes, total_channels, traffic(rate), pricing, convention};
}

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& constraint) {
    throw ConfigError("invalid config: " + field + " " + constraint);
}

}  // namespace

void ExperimentConfig::validate() const {
    if (schema_version != 1) invalid("schema_version", "must be 1");
    if (classes.empty()) invalid("classes.bandwidth", "must list at least one class");
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& c = classes[i];
        if (c.bandwidth < 1) invalid("classes.bandwidth", "entries must be >= 1");
        if (c.bandwidth > total_channels) invalid("classes.bandwidth", "entries must be <= traffic.total_channels");
        if (!(c.reward_carry > 0.0)) invalid("classes.reward_carry", "entries must be > 0");
        if (c.reward_block > 0.0) invalid("classes.reward_block", "entries must be <= 0");
        if (c.reward_drop > 0.0) invalid("classes.reward_drop", "entries must be <= 0");
    }
    if (total_channels < 1) invalid("traffic.total_channels", "must be >= 1");
    if (arrival_rate && !(*arrival_rate >= 0.0)) invalid("traffic.arrival_rate", "must be >= 0");
    if (arrival_rate && !offered_loads.empty()) {
        invalid("traffic.arrival_rate", "cannot be combined with traffic.offered_load");
    }
    if (!arrival_rate && offered_loads.empty()) invalid("traffic.offered_load", "must list at least one load");
    for (double l : offered_loads) {
        if (!(l >= 0.0)) invalid("traffic.offered_load", "entries must be >= 0");
    }
    if (class_mix.size() != classes.size()) invalid("traffic.class_mix", "needs one entry per class");
    double mix = 0.0;
    for (double m : class_mix) {
        if (!(m >= 0.0)) invalid("traffic.class_mix", "entries must be >= 0");
        mix += m;
    }
    if (std::abs(mix - 1.0) > 1e-9) invalid("traffic.class_mix", "must sum to 1");
    if (!(holding_time > 0.0)) invalid("traffic.holding_time", "must be > 0");
    if (!(speed_kmh >= 0.0)) invalid("traffic.speed_kmh", "must be >= 0");
    if (!(cell_radius_km > 0.0)) invalid("traffic.cell_radius_km", "must be > 0");

    if (solver.criterion == Criterion::discounted && !(solver.discount > 0.0 && solver.discount < 1.0)) {
        invalid("solver.discount", "must be in (0, 1)");
    }
    if (!(solver.epsilon > 0.0)) invalid("solver.epsilon", "must be > 0");
    if (solver.max_sweeps < 1) invalid("solver.max_sweeps", "must be >= 1");
    if (!(solver.aperiodicity > 0.0 && solver.aperiodicity <= 1.0)) {
        invalid("solver.aperiodicity", "must be in (0, 1]");
    }
    if (!(solver.fixed_point_tolerance > 0.0)) invalid("solver.fixed_point_tolerance", "must be > 0");
    if (!(solver.fixed_point_damping > 0.0 && solver.fixed_point_damping <= 1.0)) {
        invalid("solver.fixed_point_damping", "must be in (0, 1]");
    }
    if (solver.max_fixed_point_iters < 1) invalid("solver.max_fixed_point_iters", "must be >= 1");
    if (method == FixedPointMethod::binary_search && classes.size() != 1) {
        invalid("solver.method", "binary_search needs exactly one class");
    }

    if (!(nag.alpha > 0.0 && nag.alpha < 1.0)) invalid("nag.alpha", "must be in (0, 1)");
    if (!(nag.t_est > 0.0)) invalid("nag.t_est", "must be > 0");

    if (rings < 0) invalid("simulation.rings", "must be >= 0");
    if (!(horizon > 0.0)) invalid("simulation.horizon", "must be > 0");
    if (!(warmup >= 0.0 && warmup < horizon)) invalid("simulation.warmup", "must be in [0, horizon)");
    if (replications < 1) invalid("simulation.replications", "must be >= 1");
    if (jobs < 0) invalid("simulation.jobs", "must be >= 0");
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

using boost::property_tree::ptree;

std::string trim(std::string s) {
    // Inline comments: " ; ..." or " # ...".
    for (const char* marker : {" ;", "\t;", " #", "\t#"}) {
        const auto pos = s.find(marker);
        if (pos != std::string::npos) s.erase(pos);
    }
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

class Reader {
public:
    explicit Reader(const ptree& tree) : tree_(tree) {}

    std::optional<std::string> raw(const std::string& section, const std::string& key) {
        if (!section.empty()) sections_.insert(section);
        seen_.insert(section.empty() ? key : section + "." + key);
        const ptree* node = &tree_;
        if (!section.empty()) {
            const auto it = tree_.find(section);
            if (it == tree_.not_found()) return std::nullopt;
            node = &it->second;
        }
        const auto it = node->find(key);
        if (it == node->not_found()) return std::nullopt;
        return trim(it->second.data());
    }

    std::optional<double> real(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        try {
            return parse_real(*v);
        } catch (const std::exception&) {
            invalid(section + "." + key, "must be a number, got '" + *v + "'");
        }
    }

    std::optional<long long> integer(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        long long out = 0;
        auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc{} || ptr != v->data() + v->size()) {
            invalid(section + "." + key, "must be an integer, got '" + *v + "'");
        }
        return out;
    }

    std::optional<std::vector<double>> reals(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        std::vector<double> out;
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            try {
                out.push_back(parse_real(item));
            } catch (const std::exception&) {
                invalid(section + "." + key, "entries must be numbers, got '" + item + "'");
            }
        }
        return out;
    }

    std::optional<bool> boolean(const std::string& section, const std::string& key) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        if (*v == "true" || *v == "yes" || *v == "1") return true;
        if (*v == "false" || *v == "no" || *v == "0") return false;
        invalid(section + "." + key, "must be true or false, got '" + *v + "'");
    }

    template <typename E>
    std::optional<E> choice(const std::string& section, const std::string& key,
                            const std::map<std::string, E>& options) {
        const auto v = raw(section, key);
        if (!v) return std::nullopt;
        const auto it = options.find(*v);
        if (it == options.end()) {
            std::string names;
            for (const auto& [name, _] : options) names += (names.empty() ? "" : "|") + name;
            invalid(section + "." + key, "must be one of " + names + ", got '" + *v + "'");
        }
        return it->second;
    }

    /// Rejects any key that was never asked for.
    void reject_unknown() const {
        for (const auto& [name, node] : tree_) {
            if (node.empty()) {
                if (sections_.count(name)) continue;  // an empty section
                if (!seen_.count(name)) throw ConfigError("invalid config: unknown key '" + name + "'");
                continue;
            }
            for (const auto& [key, _] : node) {
                const auto full = name + "." + key;
                if (!seen_.count(full)) throw ConfigError("invalid config: unknown key '" + full + "'");
            }
        }
    }

private:
    const ptree& tree_;
    std::set<std::string> seen_;
    std::set<std::string> sections_;
};

}  // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
    ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config parse error at " + source + " line " + std::to_string(e.line()) +
                          ": " + e.message());
    }
    Reader r(tree);
    ExperimentConfig cfg;

    const auto version = r.integer("", "schema_version");
    if (!version) invalid("schema_version", "is required");
    cfg.schema_version = static_cast<int>(*version);

    // [classes]
    std::vector<double> bandwidth = r.reals("classes", "bandwidth").value_or(std::vector<double>{1, 4});
    const std::size_t k = bandwidth.size();
    auto per_class = [&](const std::string& key, std::vector<double> fallback) {
        auto v = r.reals("classes", key).value_or(std::move(fallback));
        if (v.size() != k) invalid("classes." + key, "needs one entry per class (" + std::to_string(k) + ")");
        return v;
    };
    for (double b : bandwidth) {
        if (b != std::floor(b) || b < 1) invalid("classes.bandwidth", "entries must be integers >= 1");
    }
    const auto carry = per_class("reward_carry", bandwidth);
    const double block_fraction = r.real("classes", "block_penalty_fraction").value_or(0.1);
    if (!(block_fraction >= 0.0)) invalid("classes.block_penalty_fraction", "must be >= 0");
    std::vector<double> default_block(k);
    for (std::size_t i = 0; i < k; ++i) default_block[i] = -block_fraction * carry[i];
    const auto block = per_class("reward_block", default_block);
    const auto r_db = per_class("r_db", std::vector<double>(k, 80.0));
    std::vector<double> default_drop(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (!(r_db[i] >= 0.0)) invalid("classes.r_db", "entries must be >= 0");
        default_drop[i] = r_db[i] * block[i];
    }
    const auto drop = per_class("reward_drop", default_drop);
    for (std::size_t i = 0; i < k; ++i) {
        cfg.classes.push_back({static_cast<int>(bandwidth[i]), carry[i], block[i], drop[i]});
    }

    // [traffic]
    if (auto v = r.integer("traffic", "total_channels")) cfg.total_channels = static_cast<int>(*v);
    cfg.arrival_rate = r.real("traffic", "arrival_rate");
    if (auto v = r.reals("traffic", "offered_load")) cfg.offered_loads = *v;
    if (!cfg.arrival_rate && cfg.offered_loads.empty()) cfg.offered_loads = {100, 200, 300};
    const auto data_fraction = r.real("traffic", "data_fraction");
    const auto mix = r.reals("traffic", "class_mix");
    if (data_fraction && mix) invalid("traffic.data_fraction", "cannot be combined with traffic.class_mix");
    if (mix) {
        cfg.class_mix = *mix;
    } else if (data_fraction) {
        if (k != 2) invalid("traffic.data_fraction", "needs exactly two classes");
        if (!(*data_fraction >= 0.0 && *data_fraction <= 1.0)) invalid("traffic.data_fraction", "must be in [0, 1]");
        cfg.class_mix = {*data_fraction, 1.0 - *data_fraction};
    } else {
        cfg.class_mix.assign(k, 1.0 / static_cast<double>(k));
    }
    if (auto v = r.real("traffic", "holding_time")) cfg.holding_time = *v;
    if (auto v = r.real("traffic", "speed_kmh")) cfg.speed_kmh = *v;
    if (auto v = r.real("traffic", "cell_radius_km")) cfg.cell_radius_km = *v;

    // [pricing]
    if (auto v = r.choice<PricingScheme>("pricing", "scheme",
                                         {{"flat", PricingScheme::flat}, {"linear", PricingScheme::linear}})) {
        cfg.pricing = *v;
    }

    // [solver]
    auto& s = cfg.solver;
    if (auto v = r.choice<Criterion>("solver", "criterion",
                                     {{"average", Criterion::average_reward},
                                      {"discounted", Criterion::discounted}})) {
        s.criterion = *v;
    }
    if (auto v = r.real("solver", "discount")) s.discount = *v;
    if (auto v = r.real("solver", "epsilon")) s.epsilon = *v;
    if (auto v = r.integer("solver", "max_sweeps")) s.max_sweeps = static_cast<int>(*v);
    if (auto v = r.real("solver", "aperiodicity")) s.aperiodicity = *v;
    if (auto v = r.choice<RewardTiming>("solver", "reward_timing",
                                        {{"per_epoch", RewardTiming::per_epoch},
                                         {"semi_markov", RewardTiming::semi_markov}})) {
        s.timing = *v;
    }
    if (auto v = r.choice<OccupancyConvention>("solver", "occupancy",
                                               {{"post_action", OccupancyConvention::post_action},
                                                {"paper_literal", OccupancyConvention::paper_literal}})) {
        cfg.convention = *v;
    }
    if (auto v = r.choice<FixedPointMethod>("solver", "method",
                                            {{"damped", FixedPointMethod::damped},
                                             {"binary_search", FixedPointMethod::binary_search}})) {
        cfg.method = *v;
    }
    if (auto v = r.boolean("solver", "handoff_departures")) cfg.handoff_departures = *v;
    if (auto v = r.real("solver", "fixed_point_tolerance")) s.fixed_point_tolerance = *v;
    if (auto v = r.real("solver", "fixed_point_damping")) s.fixed_point_damping = *v;
    if (auto v = r.integer("solver", "max_fixed_point_iters")) s.max_fixed_point_iters = static_cast<int>(*v);

    // [nag]
    if (auto v = r.real("nag", "alpha")) cfg.nag.alpha = *v;
    if (auto v = r.real("nag", "t_est")) cfg.nag.t_est = *v;

    // [simulation]
    if (auto v = r.integer("simulation", "rings")) cfg.rings = static_cast<int>(*v);
    if (auto v = r.real("simulation", "horizon")) cfg.horizon = *v;
    cfg.warmup = r.real("simulation", "warmup").value_or(0.1 * cfg.horizon);
    if (auto v = r.integer("simulation", "replications")) cfg.replications = static_cast<int>(*v);
    if (auto v = r.integer("simulation", "seed")) {
        if (*v < 0) invalid("simulation.seed", "must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(*v);
    }
    if (auto v = r.boolean("simulation", "allow_self_reinjection")) cfg.allow_self_reinjection = *v;
    if (auto v = r.integer("simulation", "jobs")) cfg.jobs = static_cast<int>(*v);

    // [output]
    if (auto v = r.raw("output", "dir")) cfg.output_dir = *v;

    r.reject_unknown();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    return parse_config(in, path.string());
}

std::vector<std::string> describe(const ExperimentConfig& c) {
    std::vector<std::string> out;
    auto put = [&](const std::string& key, const std::string& value) { out.push_back(key + " = " + value); };
    auto list = [](const auto& values, auto fmt) {
        std::string s;
        for (const auto& v : values) s += (s.empty() ? "" : ",") + fmt(v);
        return s;
    };
    auto real = [](double v) { return format_real(v); };

    put("schema_version", std::to_string(c.schema_version));
    put("classes.bandwidth", list(c.classes, [](const auto& q) { return std::to_string(q.bandwidth); }));
    put("classes.reward_carry", list(c.classes, [&](const auto& q) { return real(q.reward_carry); }));
    put("classes.reward_block", list(c.classes, [&](const auto& q) { return real(q.reward_block); }));
    put("classes.reward_drop", list(c.classes, [&](const auto& q) { return real(q.reward_drop); }));
    put("traffic.total_channels", std::to_string(c.total_channels));
    if (c.arrival_rate) put("traffic.arrival_rate", real(*c.arrival_rate));
    if (!c.offered_loads.empty()) put("traffic.offered_load", list(c.offered_loads, real));
    put("traffic.load_unit", "BU-Erlangs per cell (lambda * holding_time * mean bandwidth)");
    put("traffic.class_mix", list(c.class_mix, real));
    put("traffic.holding_time", real(c.holding_time));
    put("traffic.speed_kmh", real(c.speed_kmh));
    put("traffic.cell_radius_km", real(c.cell_radius_km));
    put("pricing.scheme", std::string(to_string(c.pricing)));
    put("solver.criterion", c.solver.criterion == Criterion::average_reward ? "average" : "discounted");
    put("solver.discount", real(c.solver.discount));
    put("solver.epsilon", real(c.solver.epsilon));
    put("solver.max_sweeps", std::to_string(c.solver.max_sweeps));
    put("solver.aperiodicity", real(c.solver.aperiodicity));
    put("solver.reward_timing", std::string(to_string(c.solver.timing)));
    put("solver.occupancy", std::string(to_string(c.convention)));
    put("solver.method", c.method == FixedPointMethod::damped ? "damped" : "binary_search");
    put("solver.handoff_departures", c.handoff_departures ? "true" : "false");
    put("solver.fixed_point_tolerance", real(c.solver.fixed_point_tolerance));
    put("solver.fixed_point_damping", real(c.solver.fixed_point_damping));
    put("solver.max_fixed_point_iters", std::to_string(c.solver.max_fixed_point_iters));
    put("nag.alpha", real(c.nag.alpha));
    put("nag.t_est", real(c.nag.t_est));
    put("simulation.rings", std::to_string(c.rings));
    put("simulation.horizon", real(c.horizon));
    put("simulation.warmup", real(c.warmup));
    put("simulation.replications", std::to_string(c.replications));
    put("simulation.seed", std::to_string(c.seed));
    put("simulation.allow_self_reinjection", c.allow_self_reinjection ? "true" : "false");
    put("output.dir", c.output_dir.string());
    put("derived.holding_rate", real(c.holding_rate()));
    put("derived.rho", real(c.rho()));
    put("derived.handoff_rate", real(c.handoff_rate()));
    for (const auto& [load, rate] : c.load_points()) {
        put("derived.arrival_rate[load=" + real(load) + "]", real(rate));
    }
    return out;
}

}  // namespace cac
