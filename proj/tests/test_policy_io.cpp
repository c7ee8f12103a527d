#include <doctest.h>

#include "cac/policy_io.hpp"

#include <cmath>
#include <limits>
#include <sstream>

using namespace cac;

namespace {

Policy sample_policy() {
    CellProblem p;
    p.classes = {{1, 1.0, -0.1, -8.0}, {4, 4.0, -0.4, -32.0}};
    p.total_channels = 12;
    const double mu = 1.0 / 120.0;
    p.traffic = TrafficModel{0.1, {0.5, 0.5}, {mu, mu}, 1.1971 * mu, {0.0, 0.0}};
    auto model = p.make_model({1.0 / 3.0, 0.1});
    return value_iteration(model, SolverConfig{}).policy;
}

}  // namespace

TEST_CASE("real formatting round-trips") {
    for (double v : {0.0, 1.0, -0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -8.0, 0.1 + 0.2}) {
        CHECK(parse_real(format_real(v)) == v);
    }
    CHECK(format_real(0.5) == "0.5");
    CHECK(format_real(100.0) == "100");
    CHECK_THROWS(parse_real("1.5x"));
    CHECK_THROWS(parse_real(""));
}

TEST_CASE("policy files round-trip exactly") {
    const auto p = sample_policy();
    std::stringstream first;
    write_policy(first, p);
    const auto back = read_policy(first);
    CHECK(back.actions == p.actions);
    CHECK(back.metadata.total_channels == p.metadata.total_channels);
    CHECK(back.metadata.neighbor_calls == p.metadata.neighbor_calls);
    CHECK(back.metadata.pricing == p.metadata.pricing);
    for (std::size_t i = 0; i < p.metadata.classes.size(); ++i) {
        CHECK(back.metadata.classes[i].bandwidth == p.metadata.classes[i].bandwidth);
        CHECK(back.metadata.classes[i].reward_carry == p.metadata.classes[i].reward_carry);
        CHECK(back.metadata.classes[i].reward_block == p.metadata.classes[i].reward_block);
        CHECK(back.metadata.classes[i].reward_drop == p.metadata.classes[i].reward_drop);
    }
    std::stringstream second;
    write_policy(second, back);
    CHECK(second.str() == first.str());
}

TEST_CASE("policy file layout") {
    std::stringstream out;
    write_policy(out, sample_policy());
    std::string header, row;
    std::getline(out, header);
    std::getline(out, row);
    CHECK(header.rfind("cac-policy v1 K=2 N=12 b=1;4 ", 0) == 0);
    CHECK(header.find("pricing=flat") != std::string::npos);
    CHECK(header.find("c=0.3333333333333333;0.1") != std::string::npos);
    CHECK(row == "0,0,n,reject");
}

TEST_CASE("malformed policy files report the line") {
    std::stringstream good;
    write_policy(good, sample_policy());
    auto text = good.str();

    auto fails_at = [](const std::string& t, const std::string& needle) {
        std::istringstream in(t);
        try {
            read_policy(in);
        } catch (const std::exception& e) {
            return std::string(e.what()).find(needle) != std::string::npos;
        }
        return false;
    };
    CHECK(fails_at("not a policy\n", "line 1"));

    auto bad_action = text;
    bad_action.replace(bad_action.find("0,0,n,reject"), 12, "0,0,n,maybe!");
    CHECK(fails_at(bad_action, "line 2"));

    auto truncated = text.substr(0, text.size() / 2);
    truncated = truncated.substr(0, truncated.rfind('\n') + 1);
    std::istringstream in(truncated);
    CHECK_THROWS(read_policy(in));
}
