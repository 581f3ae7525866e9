#include "aoi/oracle.hpp"

#include "aoi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace aoi {
namespace {

struct SweepWorkspace {
    // Cost tables: age_cost[h] = v(h) for h <= a_cap + d_cap.
    std::vector<double> age_cost;
    int a_cap = 0;
    int d_cap = 0;
    int stride = 0;

    size_t idx(int a, int d) const {
        return static_cast<size_t>(a - 1) * static_cast<size_t>(stride) + static_cast<size_t>(d);
    }
};

SweepWorkspace make_workspace(const DecoupledMdp& mdp) {
    SweepWorkspace ws;
    ws.a_cap = mdp.a_cap;
    ws.d_cap = mdp.d_cap;
    ws.stride = mdp.d_cap + 1;
    ws.age_cost.resize(static_cast<size_t>(mdp.a_cap + mdp.d_cap + 1));
    for (int h = 0; h <= mdp.a_cap + mdp.d_cap; ++h)
        ws.age_cost[static_cast<size_t>(h)] = mdp.cost.evaluate(h);
    return ws;
}

// Action values at (a, d) given current relative values f.
inline std::pair<double, double> action_values_at(const DecoupledMdp& mdp,
                                                  const SweepWorkspace& ws,
                                                  const std::vector<double>& f, int a, int d) {
    const double l = mdp.lambda;
    const double e = mdp.epsilon;
    const int h = a + d;
    const int a_next = std::min(a + 1, ws.a_cap);
    const double idle_exp = l * f[ws.idx(1, std::min(h, ws.d_cap))] + (1.0 - l) * f[ws.idx(a_next, d)];
    const double succ_exp = l * f[ws.idx(1, std::min(a, ws.d_cap))] + (1.0 - l) * f[ws.idx(a_next, 0)];
    const double vh = ws.age_cost[static_cast<size_t>(h)];
    const double q_idle = vh + idle_exp;
    double q_sched;
    if (mdp.model == StageCostModel::DecoupledLagrangian) {
        const double va = ws.age_cost[static_cast<size_t>(a)];
        q_sched = mdp.charge + e * (vh + idle_exp) + (1.0 - e) * (va + succ_exp);
    } else {
        q_sched = mdp.charge + vh + e * idle_exp + (1.0 - e) * succ_exp;
    }
    return {q_idle, q_sched};
}

void check_caps(const DecoupledMdp& mdp) {
    if (mdp.a_cap < 2 || mdp.d_cap < 2) throw RejectedParameters("rvi: caps must be >= 2");
    if (!(mdp.tol > 0.0)) throw RejectedParameters("rvi: tol must be > 0");
    if (!(mdp.lambda > 0.0 && mdp.lambda <= 1.0 && mdp.epsilon >= 0.0 && mdp.epsilon <= 1.0))
        throw RejectedParameters("rvi: lambda in (0,1], epsilon in [0,1] required");
}

} // namespace

std::pair<double, double> ValueTable::action_values(int a, int d) const {
    SweepWorkspace ws = make_workspace(mdp_);
    return action_values_at(mdp_, ws, f_, a, d);
}

int ValueTable::greedy_threshold(int a) const {
    SweepWorkspace ws = make_workspace(mdp_);
    for (int d = 0; d <= mdp_.d_cap; ++d) {
        auto [idle, sched] = action_values_at(mdp_, ws, f_, a, d);
        if (sched < idle) return d;
    }
    return mdp_.d_cap + 1;
}

double ValueTable::bellman_residual() const {
    SweepWorkspace ws = make_workspace(mdp_);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int a = 1; a <= mdp_.a_cap; ++a) {
        for (int d = 0; d <= mdp_.d_cap; ++d) {
            auto [idle, sched] = action_values_at(mdp_, ws, f_, a, d);
            const double diff = std::min(idle, sched) - f_[index(a, d)];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
    }
    return hi - lo;
}

ValueTable rvi_solve(const DecoupledMdp& mdp, const ValueTable* warm) {
    check_caps(mdp);
    const SweepWorkspace ws = make_workspace(mdp);
    const size_t n = static_cast<size_t>(mdp.a_cap) * static_cast<size_t>(ws.stride);

    ValueTable out;
    out.mdp_ = mdp;
    out.f_.assign(n, 0.0);
    if (warm != nullptr && warm->f_.size() == n) out.f_ = warm->f_;

    std::vector<double> next(n, 0.0);
    const size_t ref = ws.idx(1, 0);

    for (int sweep = 1; sweep <= mdp.max_sweeps; ++sweep) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (int a = 1; a <= mdp.a_cap; ++a) {
            for (int d = 0; d <= mdp.d_cap; ++d) {
                const size_t s = ws.idx(a, d);
                auto [idle, sched] = action_values_at(mdp, ws, out.f_, a, d);
                const double t = std::min(idle, sched);
                next[s] = t;
                const double diff = t - out.f_[s];
                lo = std::min(lo, diff);
                hi = std::max(hi, diff);
            }
        }
        const double offset = next[ref];
        for (size_t s = 0; s < n; ++s) out.f_[s] = next[s] - offset;
        out.sweeps_ = sweep;
        out.span_residual_ = hi - lo;
        out.avg_cost_ = 0.5 * (hi + lo);
        if (hi - lo <= mdp.tol) return out;
    }
    std::ostringstream os;
    os << "rvi did not reach span " << mdp.tol << " within " << mdp.max_sweeps
       << " sweeps (residual " << out.span_residual_ << ")";
    throw NotConverged(os.str());
}

double index_by_bisection(double lambda, double epsilon, const CostFunction& cost, UeState state,
                          const BisectionOptions& options) {
    if (state.d < 1) throw RejectedParameters("index_by_bisection: requires d >= 1");
    if (state.a < 1) throw RejectedParameters("index_by_bisection: requires a >= 1");
    if (state.a > options.a_cap || state.d > options.d_cap)
        throw RejectedParameters("index_by_bisection: state outside caps");

    DecoupledMdp mdp;
    mdp.lambda = lambda;
    mdp.epsilon = epsilon;
    mdp.cost = cost;
    mdp.a_cap = options.a_cap;
    mdp.d_cap = options.d_cap;
    mdp.tol = options.rvi_tol;
    mdp.max_sweeps = options.max_sweeps;

    ValueTable table;
    bool have_table = false;
    auto scheduled_at = [&](double m) {
        mdp.charge = m;
        table = rvi_solve(mdp, have_table ? &table : nullptr);
        have_table = true;
        return table.schedules(state.a, state.d);
    };

    if (!scheduled_at(0.0)) return 0.0;

    double hi = options.hint > 0.0 ? 2.0 * options.hint : 1.0;
    int doublings = 0;
    while (scheduled_at(hi)) {
        hi *= 2.0;
        if (++doublings > options.max_doublings) {
            std::ostringstream os;
            os << "no idle flip found up to charge " << hi << " at state (" << state.a << ","
               << state.d << "); caps may be too small";
            throw NoFlip(os.str());
        }
    }

    double lo = 0.0;
    const double width_target = options.rel_tol * hi;
    while (hi - lo > width_target) {
        const double mid = 0.5 * (lo + hi);
        if (scheduled_at(mid))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

int JointPolicyTable::action(std::span<const UeState> states) const {
    if (static_cast<int>(states.size()) != n_)
        throw RejectedParameters("joint policy: state count mismatch");
    size_t idx = 0;
    size_t mult = 1;
    for (int i = 0; i < n_; ++i) {
        const UeState& s = states[static_cast<size_t>(i)];
        if (s.a < 1 || s.a > a_cap_ || s.d < 0 || s.d > d_cap_) {
            std::ostringstream os;
            os << "joint policy: UE " << i << " state (" << s.a << "," << s.d
               << ") outside solved box " << a_cap_ << "x" << d_cap_;
            throw OutOfTable(os.str());
        }
        idx += mult * (static_cast<size_t>(s.a - 1) * static_cast<size_t>(d_cap_ + 1) +
                       static_cast<size_t>(s.d));
        mult *= base_;
    }
    return static_cast<int>(actions_[idx]) - 1;
}

JointSolution joint_rvi_solve(const JointMdp& mdp) {
    const int n_ues = static_cast<int>(mdp.ues.size());
    if (n_ues < 1 || n_ues > 3)
        throw RejectedParameters("joint_rvi_solve: supports 1 to 3 users");
    if (mdp.a_cap < 2 || mdp.d_cap < 2) throw RejectedParameters("joint_rvi_solve: caps >= 2");

    const size_t stride = static_cast<size_t>(mdp.d_cap + 1);
    const size_t base = static_cast<size_t>(mdp.a_cap) * stride;
    size_t n_states = 1;
    for (int i = 0; i < n_ues; ++i) {
        if (n_states > mdp.state_limit / base) {
            std::ostringstream os;
            os << "joint state space " << base << "^" << n_ues << " exceeds limit "
               << mdp.state_limit;
            throw CapacityExceeded(os.str());
        }
        n_states *= base;
    }

    struct Branch {
        double p;
        size_t target; // encoded per-UE state
    };
    // Per UE, per encoded state: two idle branches and four scheduled ones.
    std::vector<std::vector<Branch>> idle_br(static_cast<size_t>(n_ues));
    std::vector<std::vector<Branch>> sched_br(static_cast<size_t>(n_ues));
    std::vector<std::vector<double>> stage(static_cast<size_t>(n_ues));
    for (int i = 0; i < n_ues; ++i) {
        const UeConfig& ue = mdp.ues[static_cast<size_t>(i)];
        idle_br[static_cast<size_t>(i)].resize(base * 2);
        sched_br[static_cast<size_t>(i)].resize(base * 4);
        stage[static_cast<size_t>(i)].resize(base);
        for (int a = 1; a <= mdp.a_cap; ++a) {
            for (int d = 0; d <= mdp.d_cap; ++d) {
                const size_t e = static_cast<size_t>(a - 1) * stride + static_cast<size_t>(d);
                const auto enc = [&](int aa, int dd) {
                    return static_cast<size_t>(std::min(aa, mdp.a_cap) - 1) * stride +
                           static_cast<size_t>(std::min(dd, mdp.d_cap));
                };
                stage[static_cast<size_t>(i)][e] = ue.cost.evaluate(a + d) / n_ues;
                const double l = ue.lambda;
                const double eps = ue.epsilon;
                idle_br[static_cast<size_t>(i)][2 * e + 0] = {l, enc(1, a + d)};
                idle_br[static_cast<size_t>(i)][2 * e + 1] = {1.0 - l, enc(a + 1, d)};
                sched_br[static_cast<size_t>(i)][4 * e + 0] = {eps * l, enc(1, a + d)};
                sched_br[static_cast<size_t>(i)][4 * e + 1] = {eps * (1.0 - l), enc(a + 1, d)};
                sched_br[static_cast<size_t>(i)][4 * e + 2] = {(1.0 - eps) * l, enc(1, a)};
                sched_br[static_cast<size_t>(i)][4 * e + 3] = {(1.0 - eps) * (1.0 - l),
                                                               enc(a + 1, 0)};
            }
        }
    }

    std::vector<double> f(n_states, 0.0);
    std::vector<double> next(n_states, 0.0);
    std::vector<std::uint8_t> actions(n_states, 0);

    std::vector<size_t> mult(static_cast<size_t>(n_ues));
    mult[0] = 1;
    for (int i = 1; i < n_ues; ++i) mult[static_cast<size_t>(i)] = mult[static_cast<size_t>(i - 1)] * base;

    // Expected next value for a given action, accumulated over the product
    // of per-UE branches (at most 4 * 2^2 = 16 combinations).
    std::vector<size_t> code(static_cast<size_t>(n_ues));
    auto expected_value = [&](int action) {
        double acc = 0.0;
        // iterative product over branch lists
        struct Cursor {
            const Branch* list;
            int count;
        };
        Cursor cur[3];
        for (int i = 0; i < n_ues; ++i) {
            if (action == i + 1) {
                cur[i] = {&sched_br[static_cast<size_t>(i)][4 * code[static_cast<size_t>(i)]], 4};
            } else {
                cur[i] = {&idle_br[static_cast<size_t>(i)][2 * code[static_cast<size_t>(i)]], 2};
            }
        }
        int pick[3] = {0, 0, 0};
        while (true) {
            double p = 1.0;
            size_t target = 0;
            for (int i = 0; i < n_ues; ++i) {
                const Branch& b = cur[i].list[pick[i]];
                p *= b.p;
                target += mult[static_cast<size_t>(i)] * b.target;
            }
            if (p > 0.0) acc += p * f[target];
            int i = 0;
            for (; i < n_ues; ++i) {
                if (++pick[i] < cur[i].count) break;
                pick[i] = 0;
            }
            if (i == n_ues) break;
        }
        return acc;
    };

    JointSolution out;
    const size_t ref = 0; // every UE at (1, 0)
    for (int sweep = 1; sweep <= mdp.max_sweeps; ++sweep) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (size_t s = 0; s < n_states; ++s) {
            size_t rem = s;
            double stage_cost = 0.0;
            for (int i = 0; i < n_ues; ++i) {
                code[static_cast<size_t>(i)] = rem % base;
                stage_cost += stage[static_cast<size_t>(i)][code[static_cast<size_t>(i)]];
                rem /= base;
            }
            double best = stage_cost + expected_value(0);
            std::uint8_t best_action = 0;
            for (int u = 1; u <= n_ues; ++u) {
                const double q = stage_cost + expected_value(u);
                if (q < best) {
                    best = q;
                    best_action = static_cast<std::uint8_t>(u);
                }
            }
            next[s] = best;
            actions[s] = best_action;
            const double diff = best - f[s];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        const double offset = next[ref];
        for (size_t s = 0; s < n_states; ++s) f[s] = next[s] - offset;
        out.sweeps = sweep;
        out.span_residual = hi - lo;
        out.xi_opt = 0.5 * (hi + lo);
        if (hi - lo <= mdp.tol) {
            out.policy.n_ = n_ues;
            out.policy.a_cap_ = mdp.a_cap;
            out.policy.d_cap_ = mdp.d_cap;
            out.policy.base_ = base;
            out.policy.actions_ = std::move(actions);
            return out;
        }
    }
    std::ostringstream os;
    os << "joint rvi did not reach span " << mdp.tol << " within " << mdp.max_sweeps
       << " sweeps (residual " << out.span_residual << ")";
    throw NotConverged(os.str());
}

} // namespace aoi
