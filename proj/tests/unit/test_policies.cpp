#include "aoi/policies.hpp"
#include "aoi/errors.hpp"

#include <doctest.h>

#include <cstdint>
#include <vector>

using namespace aoi;

namespace {

FleetView view_of(const std::vector<UeConfig>& configs, const std::vector<UeState>& states) {
    return FleetView{configs, states};
}

// small deterministic generator for random-view property checks
struct Lcg {
    std::uint64_t s = 12345;
    int next(int lo, int hi) {
        s = s * 6364136223846793005ULL + 1442695040888963407ULL;
        return lo + static_cast<int>((s >> 33) % static_cast<std::uint64_t>(hi - lo + 1));
    }
};

} // namespace

TEST_CASE("whittle policy schedules the largest index") {
    const std::vector<UeConfig> configs = {{0.5, 0.25, CostFunction::linear()},
                                           {0.5, 0.25, CostFunction::step_violation(3)}};
    WhittlePolicy policy(configs);
    // indices 4.25 and 0.46875
    CHECK(policy.decide(view_of(configs, {{1, 2}, {1, 1}})).ue == 0);
    // swap the states: 1.75 vs step at (1,2) = 1.5
    CHECK(policy.decide(view_of(configs, {{1, 1}, {1, 2}})).ue == 0);
}

TEST_CASE("whittle policy idles when no index is positive") {
    const std::vector<UeConfig> configs = {{0.5, 0.25, CostFunction::linear()},
                                           {0.5, 0.25, CostFunction::linear()}};
    WhittlePolicy policy(configs);
    CHECK(policy.decide(view_of(configs, {{4, 0}, {9, 0}})).idle());

    const std::vector<UeConfig> flat = {{0.5, 0.25, CostFunction::constant(1.0)},
                                        {0.5, 0.25, CostFunction::constant(1.0)}};
    WhittlePolicy flat_policy(flat);
    CHECK(flat_policy.decide(view_of(flat, {{2, 3}, {1, 4}})).idle());
}

TEST_CASE("whittle policy breaks exact ties by lowest id") {
    const std::vector<UeConfig> configs = {{0.5, 0.25, CostFunction::linear()},
                                           {0.5, 0.25, CostFunction::linear()}};
    WhittlePolicy policy(configs);
    CHECK(policy.decide(view_of(configs, {{1, 2}, {1, 2}})).ue == 0);
}

TEST_CASE("whittle policy never schedules an empty buffer over a positive index") {
    const std::vector<UeConfig> configs = {{0.5, 0.25, CostFunction::linear()},
                                           {0.5, 0.25, CostFunction::linear()}};
    WhittlePolicy policy(configs);
    Lcg rng;
    for (int trial = 0; trial < 300; ++trial) {
        const std::vector<UeState> states = {{rng.next(1, 20), 0},
                                             {rng.next(1, 20), rng.next(1, 20)}};
        const SchedulerDecision decision = policy.decide(view_of(configs, states));
        CHECK(decision.ue == 1);
    }
}

TEST_CASE("age greedy prefers the oldest deliverable packet") {
    const std::vector<UeConfig> configs = {{0.5, 0.2, CostFunction::linear()},
                                           {0.5, 0.2, CostFunction::linear()}};
    AgeGreedyPolicy policy;
    CHECK(policy.decide(view_of(configs, {{3, 2}, {7, 0}})).ue == 0);
    CHECK(policy.decide(view_of(configs, {{3, 2}, {4, 3}})).ue == 1);
    CHECK(policy.decide(view_of(configs, {{3, 0}, {7, 0}})).idle());
    CHECK(policy.decide(view_of(configs, {{4, 2}, {3, 3}})).ue == 0); // tie on age
}

TEST_CASE("on-demand policy schedules any sole candidate") {
    const std::vector<UeConfig> configs = {{0.3, 0.25, CostFunction::step_violation(8)}};
    OnDemandWhittlePolicy policy(configs);
    CHECK(policy.decide(view_of(configs, {{2, 3}})).ue == 0);
    CHECK(policy.decide(view_of(configs, {{2, 0}})).idle());
}

TEST_CASE("on-demand equals whittle at deterministic generation") {
    const std::vector<UeConfig> configs = {{1.0, 0.25, CostFunction::linear()},
                                           {1.0, 0.4, CostFunction::linear()},
                                           {1.0, 0.1, CostFunction::linear()}};
    WhittlePolicy whittle(configs);
    OnDemandWhittlePolicy on_demand(configs);
    Lcg rng;
    for (int trial = 0; trial < 300; ++trial) {
        const std::vector<UeState> states = {{rng.next(1, 12), rng.next(0, 12)},
                                             {rng.next(1, 12), rng.next(0, 12)},
                                             {rng.next(1, 12), rng.next(0, 12)}};
        const FleetView view = view_of(configs, states);
        CHECK(whittle.decide(view).ue == on_demand.decide(view).ue);
    }
}

TEST_CASE("optimal policy is a table lookup") {
    JointMdp joint;
    joint.ues = {UeConfig{0.6, 0.2, CostFunction::constant(0.0)},
                 UeConfig{0.6, 0.2, CostFunction::constant(0.0)}};
    joint.a_cap = 8;
    joint.d_cap = 8;
    auto solution = joint_rvi_solve(joint);
    auto table = std::make_shared<const JointPolicyTable>(std::move(solution.policy));
    OptimalPolicy policy(table);
    // all-zero costs: idling is always among the optimal actions
    CHECK(policy.decide(view_of(joint.ues, {{2, 3}, {1, 4}})).idle());
}

TEST_CASE("optimal policy for one user schedules exactly the deliverable states") {
    JointMdp joint;
    joint.ues = {UeConfig{0.5, 0.25, CostFunction::linear()}};
    joint.a_cap = 16;
    joint.d_cap = 16;
    auto solution = joint_rvi_solve(joint);
    auto table = std::make_shared<const JointPolicyTable>(std::move(solution.policy));
    OptimalPolicy policy(table);
    for (int a = 1; a <= 14; ++a) {
        for (int d = 0; d <= 14; ++d) {
            const SchedulerDecision decision = policy.decide(view_of(joint.ues, {{a, d}}));
            if (d == 0)
                CHECK(decision.idle());
            else
                CHECK(decision.ue == 0);
        }
    }
}

TEST_CASE("round robin cycles and skips empty buffers") {
    const std::vector<UeConfig> configs(3, UeConfig{0.5, 0.2, CostFunction::linear()});
    RoundRobinPolicy policy;
    const std::vector<UeState> all = {{1, 1}, {1, 1}, {1, 1}};
    CHECK(policy.decide(view_of(configs, all)).ue == 0);
    CHECK(policy.decide(view_of(configs, all)).ue == 1);
    CHECK(policy.decide(view_of(configs, all)).ue == 2);
    CHECK(policy.decide(view_of(configs, all)).ue == 0);

    const std::vector<UeState> gap = {{1, 1}, {4, 0}, {1, 1}};
    CHECK(policy.decide(view_of(configs, gap)).ue == 2);
    CHECK(policy.decide(view_of(configs, gap)).ue == 0);

    const std::vector<UeState> empty = {{1, 0}, {4, 0}, {9, 0}};
    CHECK(policy.decide(view_of(configs, empty)).idle());
    CHECK(policy.decide(view_of(configs, gap)).ue == 2);
}

TEST_CASE("single user round robin") {
    const std::vector<UeConfig> configs = {{0.5, 0.2, CostFunction::linear()}};
    RoundRobinPolicy policy;
    CHECK(policy.decide(view_of(configs, {{1, 1}})).ue == 0);
    CHECK(policy.decide(view_of(configs, {{2, 0}})).idle());
}

TEST_CASE("decisions are deterministic and schedule at most one UE") {
    const std::vector<UeConfig> configs = {{0.5, 0.25, CostFunction::linear()},
                                           {0.7, 0.1, CostFunction::step_violation(4)},
                                           {0.4, 0.3, CostFunction::polynomial(2, 0.5)}};
    WhittlePolicy policy(configs);
    Lcg rng;
    for (int trial = 0; trial < 200; ++trial) {
        const std::vector<UeState> states = {{rng.next(1, 15), rng.next(0, 15)},
                                             {rng.next(1, 15), rng.next(0, 15)},
                                             {rng.next(1, 15), rng.next(0, 15)}};
        const FleetView view = view_of(configs, states);
        const SchedulerDecision first = policy.decide(view);
        const SchedulerDecision second = policy.decide(view);
        CHECK(first.ue == second.ue);
        CHECK(first.ue < 3);
    }
}

TEST_CASE("scaling every cost by the same factor preserves decisions") {
    const std::vector<UeConfig> base = {{0.5, 0.25, CostFunction::polynomial(2, 1.0)},
                                        {0.7, 0.1, CostFunction::polynomial(2, 1.0)}};
    const std::vector<UeConfig> scaled = {{0.5, 0.25, CostFunction::polynomial(2, 3.0)},
                                          {0.7, 0.1, CostFunction::polynomial(2, 3.0)}};
    WhittlePolicy base_policy(base);
    WhittlePolicy scaled_policy(scaled);
    Lcg rng;
    for (int trial = 0; trial < 100; ++trial) {
        const std::vector<UeState> states = {{rng.next(1, 10), rng.next(0, 10)},
                                             {rng.next(1, 10), rng.next(0, 10)}};
        CHECK(base_policy.decide(view_of(base, states)).ue ==
              scaled_policy.decide(view_of(scaled, states)).ue);
        for (int n = 0; n < 2; ++n) {
            const double i_base = base_policy.index_of(n, states[static_cast<size_t>(n)]);
            const double i_scaled = scaled_policy.index_of(n, states[static_cast<size_t>(n)]);
            CHECK(i_scaled == doctest::Approx(3.0 * i_base).epsilon(1e-9));
        }
    }
}

TEST_CASE("policy registry") {
    const std::vector<UeConfig> configs = {{0.5, 0.25, CostFunction::linear()}};
    for (const std::string& name : {"whittle", "age_greedy", "on_demand_whittle", "round_robin"}) {
        auto policy = make_policy(name, configs);
        CHECK(policy->name() == name);
    }
    CHECK_THROWS_AS(make_policy("nonsense", configs), RejectedParameters);
    CHECK_THROWS_AS(make_policy("optimal", configs), RejectedParameters); // no table
    CHECK(policy_uses_index("whittle"));
    CHECK(policy_uses_index("on_demand_whittle"));
    CHECK_FALSE(policy_uses_index("age_greedy"));
}
