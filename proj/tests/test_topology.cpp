#include <doctest.h>

#include "cac/topology.hpp"

#include <algorithm>
#include <map>

using namespace cac;

TEST_CASE("ring sizes and degrees") {
    const auto t0 = build_hex_topology(0);
    CHECK(t0.size() == 1);
    CHECK(t0.degree(0) == 0);
    CHECK(t0.boundary_deficit[0] == 6);

    const auto t1 = build_hex_topology(1);
    CHECK(t1.size() == 7);
    std::map<int, int> d1;
    for (int c = 0; c < 7; ++c) ++d1[t1.degree(c)];
    CHECK(d1 == std::map<int, int>{{3, 6}, {6, 1}});

    const auto t2 = build_hex_topology(2);
    CHECK(t2.size() == 19);
    std::map<int, int> d2;
    for (int c = 0; c < 19; ++c) ++d2[t2.degree(c)];
    CHECK(d2 == std::map<int, int>{{3, 6}, {4, 6}, {6, 7}});
    CHECK(t2.total_deficit() == 30);
}

TEST_CASE("adjacency is symmetric and matches directions") {
    const auto t = build_hex_topology(2);
    for (std::size_t c = 0; c < t.size(); ++c) {
        int via_directions = 0;
        for (std::size_t d = 0; d < 6; ++d) {
            const int n = t.by_direction[c][d];
            if (n < 0) continue;
            ++via_directions;
            // Moving back the opposite way returns to c.
            CHECK(t.by_direction[static_cast<std::size_t>(n)][(d + 3) % 6] == static_cast<int>(c));
            const auto& back = t.neighbors[static_cast<std::size_t>(n)];
            CHECK(std::count(back.begin(), back.end(), static_cast<int>(c)) == 1);
        }
        CHECK(via_directions == t.degree(static_cast<int>(c)));
        CHECK(t.boundary_deficit[c] == 6 - t.degree(static_cast<int>(c)));
    }
}

TEST_CASE("boundary reinjection") {
    const auto t0 = build_hex_topology(0);
    RandomStream r0(1, 0, StreamPurpose::reinjection);
    for (int i = 0; i < 10; ++i) CHECK(handle_boundary_handoff(t0, 0, r0) == 0);

    const auto t = build_hex_topology(2);
    RandomStream rng(7, 0, StreamPurpose::reinjection);
    std::vector<int> hits(t.size(), 0);
    const int draws = 300000;
    int from = -1;
    for (std::size_t c = 0; c < t.size(); ++c) {
        if (t.boundary_deficit[c] == 3) from = static_cast<int>(c);
    }
    for (int i = 0; i < draws; ++i) ++hits[static_cast<std::size_t>(handle_boundary_handoff(t, from, rng))];
    double corner = 0, edge = 0;
    for (std::size_t c = 0; c < t.size(); ++c) {
        if (t.boundary_deficit[c] == 0) CHECK(hits[c] == 0);
        if (t.boundary_deficit[c] == 3) corner += hits[c];
        if (t.boundary_deficit[c] == 2) edge += hits[c];
    }
    CHECK(corner / draws == doctest::Approx(18.0 / 30.0).epsilon(0.01));
    CHECK(edge / draws == doctest::Approx(12.0 / 30.0).epsilon(0.015));
    CHECK((corner / 6) / (edge / 6) == doctest::Approx(1.5).epsilon(0.02));

    RandomStream no_self(7, 0, StreamPurpose::reinjection);
    for (int i = 0; i < 1000; ++i) CHECK(handle_boundary_handoff(t, from, no_self, false) != from);
}

TEST_CASE("random streams are reproducible and independent") {
    RandomStream a(42, 3, StreamPurpose::arrivals), b(42, 3, StreamPurpose::arrivals);
    RandomStream c(42, 3, StreamPurpose::mobility), d(42, 4, StreamPurpose::arrivals);
    int same_c = 0, same_d = 0;
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        same_c += x == c.uniform();
        same_d += x == d.uniform();
    }
    CHECK(same_c == 0);
    CHECK(same_d == 0);
    RandomStream e(1, 0, StreamPurpose::arrivals);
    double sum = 0;
    for (int i = 0; i < 200000; ++i) sum += e.exponential(2.0);
    CHECK(sum / 200000 == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::isinf(e.exponential(0.0)));
}
