#pragma once

#include "cac/simulator.hpp"

#include <optional>
#include <span>

namespace cac {

struct NagConfig {
    double alpha = 0.01;  ///< target handoff-dropping probability
    double t_est = 5.0;   ///< look-ahead horizon in seconds

    void validate() const;
};

/// Per-call fates over the look-ahead horizon.
struct Survival {
    double p_stay = 1.0;  ///< neither hands off nor terminates
    double p_move = 0.0;  ///< hands off into one given neighbour
};

/// p_move = (1 - exp(-rho mu t)) / 6,  p_stay = exp(-(rho mu + mu) t).
Survival survival_probabilities(double handoff_rate, double holding_rate, double t_est);

/// Inputs shared by every NAG evaluation.
struct NagContext {
    std::span<const int> bandwidths;
    int total_channels = 100;
    double handoff_rate = 0.0;              ///< rho mu
    std::span<const double> holding_rates;  ///< mu_i
    NagConfig config;
};

/// Probability that the bandwidth demanded at a cell after t_est exceeds
/// capacity. Residents stay with p_stay, each neighbour call arrives with
/// p_move; the sum is matched to a Gaussian. `extra_bandwidth` is added
/// deterministically.
double overload_probability(std::span<const int> cell, std::span<const Occupancy> neighbors,
                            int extra_bandwidth, const NagContext& ctx);

/// Admission test. Handoffs are admitted whenever they fit; new calls must
/// also keep the predicted overload at the cell and at each neighbour at or
/// below alpha.
Action nag_admit(const NetworkView& view, int cell, CallEvent incoming, const NagContext& ctx);

class NagProvider final : public PolicyProvider {
public:
    NagProvider(std::vector<int> bandwidths, int total_channels, double handoff_rate,
                std::vector<double> holding_rates, NagConfig config);
    NagProvider(const NagProvider&) = delete;
    NagProvider& operator=(const NagProvider&) = delete;

    std::string name() const override { return "nag"; }
    Action decide(const NetworkView& view, int cell, CallEvent incoming) const override;

private:
    std::vector<int> bandwidths_;
    std::vector<double> holding_rates_;
    NagContext ctx_;
};

}  // namespace cac
