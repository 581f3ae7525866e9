#pragma once

#include "aoi/policies.hpp"
#include "aoi/rng.hpp"
#include "aoi/ue.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace aoi {

struct SimConfig {
    std::vector<UeConfig> ues;
    long horizon = 100'000; // slots per replication
    long warmup = 1'000;    // slots excluded from every average
    std::uint64_t seed = 1;
    std::string policy = "whittle";
    int replications = 1;
    /// Added to the charged-cost account whenever a slot transmits.
    double charge = 0.0;
    int threads = 1;
    PolicyOptions policy_options;
};

struct UeStats {
    double mean_cost = 0.0;
    double mean_age = 0.0;
    double throughput = 0.0; // successful deliveries per slot
};

struct SimReport {
    /// Time-and-user average of v(h) over slots (warmup, horizon].
    double mean_cost = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// Average of the Lagrangian account: per slot and user, the cost of the
    /// post-transmission age plus `charge` when the user transmitted. This
    /// is the quantity the decoupled solver's average cost prices.
    double mean_charged_cost = 0.0;
    double mean_age = 0.0;
    double throughput = 0.0; // fleet-wide deliveries per slot
    long horizon = 0;
    long warmup = 0;
    int replications = 0;
    std::vector<double> replication_costs;
    std::vector<UeStats> per_ue;
};

/// State advance for one UE once the slot's events are resolved.
/// delivered = scheduled and decoded; arrival = a packet was generated
/// after the transmission.
inline UeState transition(UeState s, bool delivered, bool arrival) {
    if (delivered) return arrival ? UeState{1, s.a} : UeState{s.a + 1, 0};
    return arrival ? UeState{1, s.a + s.d} : UeState{s.a + 1, s.d};
}

struct SlotResult {
    double cost = 0.0;         // sum over UEs of v(a+d) before transmission
    double charged_cost = 0.0; // sum of post-transmission v plus charge
    double age = 0.0;          // sum over UEs of a+d
    int deliveries = 0;
};

/// Advance the whole fleet by one slot: costs are accrued on the
/// pre-transmission states, then the scheduled transmission resolves, then
/// arrivals are drawn and states advance.
SlotResult step(std::span<const UeConfig> ues, std::span<UeState> states,
                SchedulerDecision decision, const CounterRng& rng, std::uint64_t replication,
                std::uint64_t slot, double charge);

using SchedulerFactory = std::function<std::unique_ptr<Scheduler>(int replication)>;

/// Monte-Carlo run: `replications` independent replications, each starting
/// every UE at (1, 0), with seeds derived deterministically from
/// (config.seed, replication). The report is bit-identical for identical
/// configs, regardless of thread count.
SimReport run(const SimConfig& config, const SchedulerFactory& factory);

/// Convenience overload resolving the policy by config.policy name
/// ("optimal" needs a table and is rejected here).
SimReport run(const SimConfig& config);

struct SweepSpec {
    std::vector<double> lambda_grid;  // applied to every UE
    std::vector<double> epsilon_grid; // applied to every UE
    std::vector<std::string> policies;
};

struct SweepCell {
    double lambda = 0.0;
    double epsilon = 0.0;
    std::string policy;
    SimReport report;
    /// Non-empty when this cell's run failed; other cells are unaffected.
    std::string error;

    bool ok() const { return error.empty(); }
};

/// Cartesian product lambda x epsilon x policy, each cell via run() with
/// the same base seed (common random numbers across cells). Row order is
/// lambda-major, then epsilon, then policy. A failing cell carries its
/// error message; the remaining cells still run.
std::vector<SweepCell> sweep(const SimConfig& base, const SweepSpec& spec);

} // namespace aoi
