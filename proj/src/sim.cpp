#include "aoi/sim.hpp"

#include "aoi/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace aoi {
namespace {

void check_config(const SimConfig& config) {
    if (config.ues.empty()) throw RejectedParameters("sim: at least one UE required");
    if (config.horizon <= config.warmup || config.warmup < 0)
        throw RejectedParameters("sim: requires horizon > warmup >= 0");
    if (config.replications < 1) throw RejectedParameters("sim: replications must be >= 1");
    for (size_t n = 0; n < config.ues.size(); ++n) {
        const UeConfig& ue = config.ues[n];
        if (!(ue.lambda >= 0.0 && ue.lambda <= 1.0 && ue.epsilon >= 0.0 && ue.epsilon <= 1.0)) {
            std::ostringstream os;
            os << "sim: UE " << n << " probabilities outside [0, 1]";
            throw RejectedParameters(os.str());
        }
    }
}

struct ReplicationTotals {
    double cost = 0.0;
    double charged = 0.0;
    double age = 0.0;
    long deliveries = 0;
    std::vector<double> ue_cost;
    std::vector<double> ue_age;
    std::vector<long> ue_deliveries;
};

ReplicationTotals run_replication(const SimConfig& config, Scheduler& policy, int replication) {
    const int n_ues = static_cast<int>(config.ues.size());
    const CounterRng rng(config.seed);
    std::vector<UeState> states(static_cast<size_t>(n_ues));

    ReplicationTotals totals;
    totals.ue_cost.assign(static_cast<size_t>(n_ues), 0.0);
    totals.ue_age.assign(static_cast<size_t>(n_ues), 0.0);
    totals.ue_deliveries.assign(static_cast<size_t>(n_ues), 0);

    const FleetView view{config.ues, states};
    const auto rep = static_cast<std::uint64_t>(replication);
    for (long t = 1; t <= config.horizon; ++t) {
        const SchedulerDecision decision = policy.decide(view);
        if (decision.ue >= n_ues)
            throw RejectedParameters("sim: policy scheduled an unknown UE id");
        const bool accrue = t > config.warmup;
        const auto slot = static_cast<std::uint64_t>(t);
        for (int n = 0; n < n_ues; ++n) {
            const UeConfig& ue = config.ues[static_cast<size_t>(n)];
            UeState& s = states[static_cast<size_t>(n)];
            const bool scheduled = decision.ue == n;
            bool delivered = false;
            if (scheduled) {
                delivered =
                    rng.uniform(rep, static_cast<std::uint64_t>(n), slot, CounterRng::kChannel) <
                    1.0 - ue.epsilon;
            }
            if (accrue) {
                const int h = s.age();
                const double v = ue.cost.evaluate(h);
                totals.cost += v;
                totals.age += h;
                totals.ue_cost[static_cast<size_t>(n)] += v;
                totals.ue_age[static_cast<size_t>(n)] += h;
                const int h_post = delivered ? s.a : h;
                totals.charged += ue.cost.evaluate(h_post) + (scheduled ? config.charge : 0.0);
                if (delivered) {
                    ++totals.deliveries;
                    ++totals.ue_deliveries[static_cast<size_t>(n)];
                }
            }
            const bool arrival =
                rng.uniform(rep, static_cast<std::uint64_t>(n), slot, CounterRng::kArrival) <
                ue.lambda;
            s = transition(s, delivered, arrival);
        }
    }
    return totals;
}

} // namespace

SlotResult step(std::span<const UeConfig> ues, std::span<UeState> states,
                SchedulerDecision decision, const CounterRng& rng, std::uint64_t replication,
                std::uint64_t slot, double charge) {
    SlotResult result;
    for (int n = 0; n < static_cast<int>(ues.size()); ++n) {
        const UeConfig& ue = ues[static_cast<size_t>(n)];
        UeState& s = states[static_cast<size_t>(n)];
        const bool scheduled = decision.ue == n;
        bool delivered = false;
        if (scheduled) {
            delivered = rng.uniform(replication, static_cast<std::uint64_t>(n), slot,
                                    CounterRng::kChannel) < 1.0 - ue.epsilon;
        }
        const int h = s.age();
        result.cost += ue.cost.evaluate(h);
        result.age += h;
        result.charged_cost += ue.cost.evaluate(delivered ? s.a : h) + (scheduled ? charge : 0.0);
        if (delivered) ++result.deliveries;
        const bool arrival = rng.uniform(replication, static_cast<std::uint64_t>(n), slot,
                                         CounterRng::kArrival) < ue.lambda;
        s = transition(s, delivered, arrival);
    }
    return result;
}

SimReport run(const SimConfig& config, const SchedulerFactory& factory) {
    check_config(config);
    const int n_ues = static_cast<int>(config.ues.size());
    const int reps = config.replications;
    std::vector<ReplicationTotals> totals(static_cast<size_t>(reps));

    const int threads = std::max(1, std::min(config.threads, reps));
    if (threads == 1) {
        for (int r = 0; r < reps; ++r) {
            auto policy = factory(r);
            totals[static_cast<size_t>(r)] = run_replication(config, *policy, r);
        }
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
                        auto policy = factory(r);
                        totals[static_cast<size_t>(r)] = run_replication(config, *policy, r);
                    }
                } catch (...) {
                    errors[static_cast<size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    const double slots = static_cast<double>(config.horizon - config.warmup);
    const double norm = slots * n_ues;

    SimReport report;
    report.horizon = config.horizon;
    report.warmup = config.warmup;
    report.replications = reps;
    report.per_ue.assign(static_cast<size_t>(n_ues), UeStats{});
    report.replication_costs.reserve(static_cast<size_t>(reps));

    for (int r = 0; r < reps; ++r) {
        const ReplicationTotals& t = totals[static_cast<size_t>(r)];
        report.replication_costs.push_back(t.cost / norm);
        report.mean_charged_cost += t.charged / norm;
        report.mean_age += t.age / norm;
        report.throughput += static_cast<double>(t.deliveries) / slots;
        for (int n = 0; n < n_ues; ++n) {
            UeStats& u = report.per_ue[static_cast<size_t>(n)];
            u.mean_cost += t.ue_cost[static_cast<size_t>(n)] / slots;
            u.mean_age += t.ue_age[static_cast<size_t>(n)] / slots;
            u.throughput += static_cast<double>(t.ue_deliveries[static_cast<size_t>(n)]) / slots;
        }
    }
    const double r_inv = 1.0 / reps;
    report.mean_charged_cost *= r_inv;
    report.mean_age *= r_inv;
    report.throughput *= r_inv;
    for (UeStats& u : report.per_ue) {
        u.mean_cost *= r_inv;
        u.mean_age *= r_inv;
        u.throughput *= r_inv;
    }

    double mean = 0.0;
    for (double c : report.replication_costs) mean += c;
    mean *= r_inv;
    report.mean_cost = mean;
    if (reps >= 2) {
        double ss = 0.0;
        for (double c : report.replication_costs) ss += (c - mean) * (c - mean);
        const double half = 1.96 * std::sqrt(ss / (reps - 1)) / std::sqrt(static_cast<double>(reps));
        report.ci_low = mean - half;
        report.ci_high = mean + half;
    } else {
        report.ci_low = report.ci_high = mean;
    }
    return report;
}

SimReport run(const SimConfig& config) {
    if (config.policy == "optimal")
        throw RejectedParameters("sim: the optimal policy needs a solved joint table");
    return run(config, [&](int) {
        return make_policy(config.policy, config.ues, config.policy_options);
    });
}

std::vector<SweepCell> sweep(const SimConfig& base, const SweepSpec& spec) {
    if (spec.lambda_grid.empty() || spec.epsilon_grid.empty() || spec.policies.empty())
        throw RejectedParameters("sweep: lambda grid, epsilon grid and policies must be non-empty");
    std::vector<SweepCell> cells;
    cells.reserve(spec.lambda_grid.size() * spec.epsilon_grid.size() * spec.policies.size());
    for (double lambda : spec.lambda_grid) {
        for (double epsilon : spec.epsilon_grid) {
            SimConfig config = base;
            for (UeConfig& ue : config.ues) {
                ue.lambda = lambda;
                ue.epsilon = epsilon;
            }
            for (const std::string& policy : spec.policies) {
                config.policy = policy;
                SweepCell cell;
                cell.lambda = lambda;
                cell.epsilon = epsilon;
                cell.policy = policy;
                try {
                    cell.report = run(config);
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

} // namespace aoi
