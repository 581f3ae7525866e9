#pragma once

#include "aoi/oracle.hpp"
#include "aoi/rng.hpp"
#include "aoi/ue.hpp"
#include "aoi/whittle.hpp"

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aoi {

/// At most one UE is served per slot; ue < 0 means the slot idles.
struct SchedulerDecision {
    int ue = -1;

    bool idle() const { return ue < 0; }
    static SchedulerDecision idle_slot() { return {}; }
    static SchedulerDecision schedule(int ue_id) { return {ue_id}; }
};

/// Snapshot handed to a policy at each decision instant.
struct FleetView {
    std::span<const UeConfig> configs;
    std::span<const UeState> states;

    int size() const { return static_cast<int>(states.size()); }
};

class Scheduler {
  public:
    virtual ~Scheduler() = default;
    virtual SchedulerDecision decide(const FleetView& view) = 0;
    virtual std::string_view name() const = 0;
};

struct PolicyOptions {
    IndexOptions index;
    /// Break argmax ties uniformly instead of by lowest UE id.
    bool random_tie_break = false;
    std::uint64_t tie_seed = 0;
};

/// Schedules the UE with the highest Whittle index; idles when every index
/// is zero (in particular when no UE holds a deliverable packet).
class WhittlePolicy : public Scheduler {
  public:
    WhittlePolicy(std::span<const UeConfig> ues, PolicyOptions options = {});
    ~WhittlePolicy() override;
    SchedulerDecision decide(const FleetView& view) override;
    std::string_view name() const override { return "whittle"; }

    double index_of(int ue, UeState state) const;

  private:
    struct PerUe;
    std::vector<PerUe> ues_;
    PolicyOptions options_;
    std::uint64_t tie_counter_ = 0;
};

/// Schedules the UE with the largest age among those holding a deliverable
/// packet (d >= 1).
class AgeGreedyPolicy : public Scheduler {
  public:
    explicit AgeGreedyPolicy(PolicyOptions options = {});
    SchedulerDecision decide(const FleetView& view) override;
    std::string_view name() const override { return "age_greedy"; }

  private:
    PolicyOptions options_;
    std::uint64_t tie_counter_ = 0;
};

/// Whittle index specialized to deterministic generation (lambda = 1),
/// applied to the true state and restricted to UEs with d >= 1.
class OnDemandWhittlePolicy : public Scheduler {
  public:
    OnDemandWhittlePolicy(std::span<const UeConfig> ues, PolicyOptions options = {});
    ~OnDemandWhittlePolicy() override;
    SchedulerDecision decide(const FleetView& view) override;
    std::string_view name() const override { return "on_demand_whittle"; }

    double index_of(int ue, UeState state) const;

  private:
    struct PerUe;
    std::vector<PerUe> ues_;
    PolicyOptions options_;
    std::uint64_t tie_counter_ = 0;
};

/// Table lookup into a solved joint policy.
class OptimalPolicy : public Scheduler {
  public:
    explicit OptimalPolicy(std::shared_ptr<const JointPolicyTable> table);
    SchedulerDecision decide(const FleetView& view) override;
    std::string_view name() const override { return "optimal"; }

  private:
    std::shared_ptr<const JointPolicyTable> table_;
};

/// Cycles through UE ids, skipping UEs with no deliverable packet.
class RoundRobinPolicy : public Scheduler {
  public:
    RoundRobinPolicy() = default;
    SchedulerDecision decide(const FleetView& view) override;
    std::string_view name() const override { return "round_robin"; }

  private:
    int cursor_ = -1;
};

/// Policy registry keyed by the config-file names. "optimal" requires a
/// solved joint table.
std::unique_ptr<Scheduler> make_policy(const std::string& name, std::span<const UeConfig> ues,
                                       const PolicyOptions& options = {},
                                       std::shared_ptr<const JointPolicyTable> table = nullptr);

/// True for policies that evaluate a Whittle index and therefore need
/// lambda > 0 (proposed policy only) and epsilon < 1.
bool policy_uses_index(std::string_view name);

inline const std::vector<std::string>& known_policies() {
    static const std::vector<std::string> names = {"whittle", "age_greedy", "on_demand_whittle",
                                                   "optimal", "round_robin"};
    return names;
}

} // namespace aoi
