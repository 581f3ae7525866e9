#include "aoi/policies.hpp"

#include "aoi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace aoi {
namespace {

// Flat per-UE cache over the states a policy actually visits; falls back to
// the calculator's own memo outside the window.
struct IndexCache {
    static constexpr int kALim = 192;
    static constexpr int kDLim = 192;
    std::vector<double> values;

    IndexCache() : values(static_cast<size_t>(kALim) * kDLim,
                          std::numeric_limits<double>::quiet_NaN()) {}

    double lookup(const WhittleCalculator& calc, UeState s) {
        if (s.a < kALim && s.d < kDLim) {
            double& slot = values[static_cast<size_t>(s.a) * kDLim + static_cast<size_t>(s.d)];
            if (std::isnan(slot)) slot = calc.index(s);
            return slot;
        }
        return calc.index(s);
    }
};

// Argmax by value with lowest-id ties, or uniform ties when requested.
class ArgmaxPicker {
  public:
    ArgmaxPicker(bool random_ties, std::uint64_t seed, std::uint64_t counter)
        : random_ties_(random_ties), seed_(seed), counter_(counter) {}

    void offer(int id, double value) {
        if (best_id_ < 0 || value > best_value_) {
            best_id_ = id;
            best_value_ = value;
            tie_count_ = 1;
        } else if (random_ties_ && value == best_value_) {
            // reservoir choice among exact ties
            ++tie_count_;
            const double u = CounterRng(seed_).uniform(counter_, static_cast<std::uint64_t>(id), 0,
                                                       CounterRng::kTieBreak);
            if (u < 1.0 / static_cast<double>(tie_count_)) best_id_ = id;
        }
    }

    bool empty() const { return best_id_ < 0; }
    int id() const { return best_id_; }
    double value() const { return best_value_; }

  private:
    bool random_ties_;
    std::uint64_t seed_;
    std::uint64_t counter_;
    int best_id_ = -1;
    double best_value_ = 0.0;
    int tie_count_ = 0;
};

} // namespace

struct WhittlePolicy::PerUe {
    std::unique_ptr<WhittleCalculator> calc;
    IndexCache cache;
};

WhittlePolicy::WhittlePolicy(std::span<const UeConfig> ues, PolicyOptions options)
    : options_(options) {
    ues_.reserve(ues.size());
    for (const UeConfig& ue : ues)
        ues_.push_back(PerUe{
            std::make_unique<WhittleCalculator>(ue.lambda, ue.epsilon, ue.cost, options.index),
            {}});
}

WhittlePolicy::~WhittlePolicy() = default;

double WhittlePolicy::index_of(int ue, UeState state) const {
    return ues_[static_cast<size_t>(ue)].calc->index(state);
}

SchedulerDecision WhittlePolicy::decide(const FleetView& view) {
    if (view.size() != static_cast<int>(ues_.size()))
        throw RejectedParameters("whittle policy: view size does not match construction");
    ArgmaxPicker pick(options_.random_tie_break, options_.tie_seed, tie_counter_++);
    for (int n = 0; n < view.size(); ++n) {
        const UeState s = view.states[static_cast<size_t>(n)];
        if (s.d == 0) continue;
        PerUe& entry = ues_[static_cast<size_t>(n)];
        const double idx = entry.cache.lookup(*entry.calc, s);
        if (idx > 0.0) pick.offer(n, idx);
    }
    return pick.empty() ? SchedulerDecision::idle_slot() : SchedulerDecision::schedule(pick.id());
}

AgeGreedyPolicy::AgeGreedyPolicy(PolicyOptions options) : options_(options) {}

SchedulerDecision AgeGreedyPolicy::decide(const FleetView& view) {
    ArgmaxPicker pick(options_.random_tie_break, options_.tie_seed, tie_counter_++);
    for (int n = 0; n < view.size(); ++n) {
        const UeState s = view.states[static_cast<size_t>(n)];
        if (s.d == 0) continue;
        pick.offer(n, static_cast<double>(s.age()));
    }
    return pick.empty() ? SchedulerDecision::idle_slot() : SchedulerDecision::schedule(pick.id());
}

struct OnDemandWhittlePolicy::PerUe {
    std::unique_ptr<WhittleCalculator> calc;
    IndexCache cache;
};

OnDemandWhittlePolicy::OnDemandWhittlePolicy(std::span<const UeConfig> ues, PolicyOptions options)
    : options_(options) {
    ues_.reserve(ues.size());
    for (const UeConfig& ue : ues)
        ues_.push_back(PerUe{
            std::make_unique<WhittleCalculator>(1.0, ue.epsilon, ue.cost, options.index), {}});
}

OnDemandWhittlePolicy::~OnDemandWhittlePolicy() = default;

double OnDemandWhittlePolicy::index_of(int ue, UeState state) const {
    return ues_[static_cast<size_t>(ue)].calc->index(state);
}

SchedulerDecision OnDemandWhittlePolicy::decide(const FleetView& view) {
    if (view.size() != static_cast<int>(ues_.size()))
        throw RejectedParameters("on-demand policy: view size does not match construction");
    ArgmaxPicker pick(options_.random_tie_break, options_.tie_seed, tie_counter_++);
    for (int n = 0; n < view.size(); ++n) {
        const UeState s = view.states[static_cast<size_t>(n)];
        if (s.d == 0) continue;
        PerUe& entry = ues_[static_cast<size_t>(n)];
        pick.offer(n, entry.cache.lookup(*entry.calc, s));
    }
    return pick.empty() ? SchedulerDecision::idle_slot() : SchedulerDecision::schedule(pick.id());
}

OptimalPolicy::OptimalPolicy(std::shared_ptr<const JointPolicyTable> table)
    : table_(std::move(table)) {
    if (!table_) throw RejectedParameters("optimal policy: missing joint table");
}

SchedulerDecision OptimalPolicy::decide(const FleetView& view) {
    const int ue = table_->action(view.states);
    return ue < 0 ? SchedulerDecision::idle_slot() : SchedulerDecision::schedule(ue);
}

SchedulerDecision RoundRobinPolicy::decide(const FleetView& view) {
    const int n = view.size();
    for (int step = 1; step <= n; ++step) {
        const int cand = (cursor_ + step) % n;
        if (view.states[static_cast<size_t>(cand)].d >= 1) {
            cursor_ = cand;
            return SchedulerDecision::schedule(cand);
        }
    }
    return SchedulerDecision::idle_slot();
}

std::unique_ptr<Scheduler> make_policy(const std::string& name, std::span<const UeConfig> ues,
                                       const PolicyOptions& options,
                                       std::shared_ptr<const JointPolicyTable> table) {
    if (name == "whittle") return std::make_unique<WhittlePolicy>(ues, options);
    if (name == "age_greedy") return std::make_unique<AgeGreedyPolicy>(options);
    if (name == "on_demand_whittle") return std::make_unique<OnDemandWhittlePolicy>(ues, options);
    if (name == "round_robin") return std::make_unique<RoundRobinPolicy>();
    if (name == "optimal") return std::make_unique<OptimalPolicy>(std::move(table));
    throw RejectedParameters("unknown policy name: " + name);
}

bool policy_uses_index(std::string_view name) {
    return name == "whittle" || name == "on_demand_whittle";
}

} // namespace aoi
