#include <doctest.h>

#include "cac/chain.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numeric>

using namespace cac;

TEST_CASE("two-state chain") {
    const auto chain = SparseChain::from_dense({{0.9, 0.1}, {0.5, 0.5}});
    const auto pi = stationary_distribution(chain);
    CHECK(pi[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    CHECK(pi[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-9));
    CHECK(stationary_residual(chain, pi) < 1e-8);
}

TEST_CASE("identity chain has several recurrent classes") {
    const auto chain = SparseChain::from_dense({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    CHECK(recurrent_classes(chain).size() == 3);
    CHECK_THROWS_AS(stationary_distribution(chain), ChainError);
}

TEST_CASE("doubly stochastic chain is uniform") {
    const auto chain = SparseChain::from_dense({{0.2, 0.5, 0.3}, {0.3, 0.2, 0.5}, {0.5, 0.3, 0.2}});
    for (double p : stationary_distribution(chain)) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("periodic chain still converges") {
    const auto chain = SparseChain::from_dense({{0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}, {1, 0, 0, 0}});
    for (double p : stationary_distribution(chain)) CHECK(p == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("transient states get no mass") {
    // State 0 leaks into the closed pair {1, 2}.
    const auto chain = SparseChain::from_dense({{0.5, 0.5, 0}, {0, 0.3, 0.7}, {0, 0.6, 0.4}});
    const auto classes = recurrent_classes(chain);
    REQUIRE(classes.size() == 1);
    CHECK(classes[0].size() == 2);
    const auto pi = stationary_distribution(chain);
    CHECK(pi[0] < 1e-10);
    CHECK(pi[1] == doctest::Approx(0.6 / 1.3).epsilon(1e-8));
}

TEST_CASE("random dense chains match the linear-solve oracle") {
    std::uint64_t state = 12345;
    auto next = [&] {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    };
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 6 + static_cast<std::size_t>(trial);
        std::vector<std::vector<double>> p(n, std::vector<double>(n));
        for (auto& row : p) {
            for (auto& v : row) v = next();
            const double s = std::accumulate(row.begin(), row.end(), 0.0);
            for (auto& v : row) v /= s;
        }
        const auto pi = stationary_distribution(SparseChain::from_dense(p));
        const auto expected = oracle::dense_stationary(p);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(pi[i] >= 0.0);
            CHECK(pi[i] == doctest::Approx(expected[i]).epsilon(1e-8));
            sum += pi[i];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-10);
    }
}

TEST_CASE("rows must be stochastic") {
    CHECK_THROWS(SparseChain::from_dense({{0.5, 0.4}, {0.5, 0.5}}));
}
