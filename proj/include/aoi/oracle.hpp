#pragma once

#include "aoi/cost.hpp"
#include "aoi/ue.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace aoi {

/// Stage-cost accounting for the single-user solver.
enum class StageCostModel {
    /// Lagrangian model: a scheduled slot that succeeds is charged on the
    /// post-transmission age, v(a), plus the service charge; idle and failed
    /// slots are charged v(a+d).
    DecoupledLagrangian,
    /// System-metric accounting: every slot is charged v(a+d) on the
    /// pre-transmission state regardless of the action. This is the
    /// quantity the simulator's time average measures.
    SystemMetric,
};

/// Truncated single-user average-cost MDP over states
/// {(a, d) : 1 <= a <= a_cap, 0 <= d <= d_cap}. Transitions that would
/// leave the box clamp the offending coordinate.
///
/// From (a, d): idle moves to (1, a+d) w.p. lambda and (a+1, d) otherwise;
/// a scheduled slot behaves like idle w.p. epsilon and otherwise moves to
/// (1, a) w.p. lambda and (a+1, 0) otherwise.
struct DecoupledMdp {
    double lambda = 0.5;
    double epsilon = 0.0;
    CostFunction cost = CostFunction::linear();
    double charge = 0.0;
    int a_cap = 64;
    int d_cap = 64;
    double tol = 1e-9;
    int max_sweeps = 100'000;
    StageCostModel model = StageCostModel::DecoupledLagrangian;
};

/// Converged relative values f(a, d) with f(1, 0) = 0, the average cost per
/// slot, and the greedy policy they induce.
class ValueTable {
  public:
    const DecoupledMdp& mdp() const { return mdp_; }
    double avg_cost() const { return avg_cost_; }
    double span_residual() const { return span_residual_; }
    int sweeps() const { return sweeps_; }

    double value(int a, int d) const { return f_[index(a, d)]; }

    /// Action values (idle, schedule) at (a, d) under the converged f.
    std::pair<double, double> action_values(int a, int d) const;

    bool schedules(int a, int d) const {
        auto [idle, sched] = action_values(a, d);
        return sched < idle;
    }

    /// Smallest d with a schedule-greedy action at this a; d_cap + 1 when
    /// the whole row idles.
    int greedy_threshold(int a) const;

    /// One extra Bellman sweep; returns span(Tf - f) for residual checks.
    double bellman_residual() const;

  private:
    friend ValueTable rvi_solve(const DecoupledMdp& mdp, const ValueTable* warm);

    size_t index(int a, int d) const {
        return static_cast<size_t>(a - 1) * static_cast<size_t>(mdp_.d_cap + 1) +
               static_cast<size_t>(d);
    }

    DecoupledMdp mdp_;
    std::vector<double> f_;
    double avg_cost_ = 0.0;
    double span_residual_ = 0.0;
    int sweeps_ = 0;
};

/// Relative value iteration anchored at f(1, 0) = 0, stopping when
/// span(Tf - f) <= mdp.tol. Throws NotConverged past mdp.max_sweeps.
/// `warm` seeds the iteration with another table's values (same caps).
ValueTable rvi_solve(const DecoupledMdp& mdp, const ValueTable* warm = nullptr);

struct BisectionOptions {
    /// Positive hint (e.g. the closed-form index) seeds the bracket at
    /// [0, 2 * hint]; otherwise doubling starts from 1.
    double hint = 0.0;
    /// Bracket width target, relative to the initial upper charge.
    double rel_tol = 1e-4;
    int a_cap = 64;
    int d_cap = 64;
    double rvi_tol = 1e-9;
    int max_sweeps = 100'000;
    int max_doublings = 60;
};

/// Charge at which the greedy action at `state` flips from schedule to
/// idle under the solved Lagrangian MDP. Requires d >= 1. Throws NoFlip if
/// the state is still scheduled after the doubling cap.
double index_by_bisection(double lambda, double epsilon, const CostFunction& cost, UeState state,
                          const BisectionOptions& options = {});

/// Joint N-user MDP (N <= 3) with one transmission per slot and stage cost
/// (1/N) sum_n v_n(a_n + d_n), matching the simulator's metric.
struct JointMdp {
    std::vector<UeConfig> ues;
    int a_cap = 32;
    int d_cap = 32;
    double tol = 1e-9;
    int max_sweeps = 200'000;
    std::size_t state_limit = 8'000'000;
};

struct JointSolution;

/// Optimal stationary policy as a lookup table over the truncated joint
/// state space.
class JointPolicyTable {
  public:
    int ue_count() const { return n_; }
    int a_cap() const { return a_cap_; }
    int d_cap() const { return d_cap_; }

    /// -1 for idle, otherwise the scheduled UE id. Throws OutOfTable when a
    /// state leaves the solved box.
    int action(std::span<const UeState> states) const;

  private:
    friend JointSolution joint_rvi_solve(const JointMdp& mdp);

    int n_ = 0;
    int a_cap_ = 0;
    int d_cap_ = 0;
    std::size_t base_ = 0;
    std::vector<std::uint8_t> actions_;
};

struct JointSolution {
    JointPolicyTable policy;
    /// Minimal average cost per slot per user.
    double xi_opt = 0.0;
    double span_residual = 0.0;
    int sweeps = 0;
};

/// Relative value iteration on the joint MDP. Throws CapacityExceeded when
/// the product space is larger than mdp.state_limit, NotConverged past the
/// sweep budget.
JointSolution joint_rvi_solve(const JointMdp& mdp);

} // namespace aoi
