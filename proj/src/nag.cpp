#include "cac/nag.hpp"

#include <cmath>

namespace cac {

void NagConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ModelError("nag: alpha must be in (0, 1)");
    if (!(t_est > 0.0)) throw ModelError("nag: t_est must be > 0");
}

Survival survival_probabilities(double handoff_rate, double holding_rate, double t_est) {
    return {std::exp(-(handoff_rate + holding_rate) * t_est),
            -std::expm1(-handoff_rate * t_est) / 6.0};
}

double overload_probability(std::span<const int> cell, std::span<const Occupancy> neighbors,
                            int extra_bandwidth, const NagContext& ctx) {
    double mean = 0.0, var = 0.0;
    auto add = [&](double b, double count, double p) {
        mean += count * b * p;
        var += count * b * b * p * (1.0 - p);
    };
    const double p_move = -std::expm1(-ctx.handoff_rate * ctx.config.t_est) / 6.0;
    for (std::size_t j = 0; j < cell.size(); ++j) {
        const auto s = survival_probabilities(ctx.handoff_rate, ctx.holding_rates[j], ctx.config.t_est);
        add(ctx.bandwidths[j], cell[j], s.p_stay);
    }
    for (const auto& n : neighbors) {
        for (std::size_t j = 0; j < n.size(); ++j) add(ctx.bandwidths[j], n[j], p_move);
    }
    const double slack = ctx.total_channels - extra_bandwidth - mean;
    if (var <= 0.0) {
        return slack < 0.0 ? 1.0 : 0.0;
    }
    // P(D > slack + mean) for D ~ N(mean, var)
    return 0.5 * std::erfc(slack / std::sqrt(2.0 * var));
}

Action nag_admit(const NetworkView& view, int cell, CallEvent incoming, const NagContext& ctx) {
    if (!view.fits(cell, incoming.cls)) return Action::reject;
    if (incoming.kind != EventKind::new_arrival) return Action::accept;

    const auto& topo = view.topology;
    const auto c = static_cast<std::size_t>(cell);
    const double alpha = ctx.config.alpha;
    const int b_new = ctx.bandwidths[static_cast<std::size_t>(incoming.cls)];

    std::vector<Occupancy> around;
    for (int n : topo.neighbors[c]) around.push_back(view.occupancy[static_cast<std::size_t>(n)]);
    if (overload_probability(view.occupancy[c], around, b_new, ctx) > alpha) {
        return Action::reject;
    }

    // The new call joins this cell and becomes a handoff source for each neighbour.
    Occupancy with_new = view.occupancy[c];
    ++with_new[static_cast<std::size_t>(incoming.cls)];
    for (int n : topo.neighbors[c]) {
        const auto ni = static_cast<std::size_t>(n);
        around.clear();
        for (int m : topo.neighbors[ni]) {
            around.push_back(m == cell ? with_new : view.occupancy[static_cast<std::size_t>(m)]);
        }
        if (overload_probability(view.occupancy[ni], around, 0, ctx) > alpha) {
            return Action::reject;
        }
    }
    return Action::accept;
}

NagProvider::NagProvider(std::vector<int> bandwidths, int total_channels, double handoff_rate,
                         std::vector<double> holding_rates, NagConfig config)
    : bandwidths_(std::move(bandwidths)), holding_rates_(std::move(holding_rates)) {
    config.validate();
    ctx_ = {bandwidths_, total_channels, handoff_rate, holding_rates_, config};
}

Action NagProvider::decide(const NetworkView& view, int cell, CallEvent incoming) const {
    return nag_admit(view, cell, incoming, ctx_);
}

}  // namespace cac
