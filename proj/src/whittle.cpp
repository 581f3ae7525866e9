#include "aoi/whittle.hpp"

#include "aoi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aoi {
namespace {

std::uint64_t state_key(int a, int d) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(d);
}

void check_state(UeState s) {
    if (s.a < 1) throw RejectedParameters("state: a must be >= 1");
    if (s.d < 0) throw RejectedParameters("state: d must be >= 0");
}

} // namespace

WhittleCalculator::WhittleCalculator(double lambda, double epsilon, CostFunction cost,
                                     IndexOptions options)
    : series_(std::make_shared<SeriesContext>(lambda, epsilon, std::move(cost), options.series)),
      options_(options) {}

double WhittleCalculator::charge_at_threshold(int threshold) const {
    const double l = lambda();
    const double beta = 1.0 - epsilon();
    return beta * (l * beta * threshold * series_->omega(threshold) -
                   series_->prefix_cost(threshold));
}

double WhittleCalculator::index_beyond_base(int a, int d) const {
    const double l = lambda();
    const double e = epsilon();
    return (1.0 - e) * (series_->psi(a + d) - series_->psi(a) +
                        l * e * (series_->omega(a + d) - series_->omega(a)));
}

int WhittleCalculator::base_threshold_from(int a, int d, int start) const {
    const double l = lambda();
    const double e = epsilon();
    const double rhs =
        l * e * series_->omega(a + d) + series_->psi(a + d) + series_->prefix_cost(a - 1);
    const double slack = 1e-9 * std::max(1.0, std::abs(rhs));
    const double outer = l * (1.0 - e) * (a + 1.0 / l - 1.0);
    for (int cand = std::max(1, start); cand <= options_.threshold_cap; ++cand) {
        const double lhs = e * series_->theta(cand + 1) + outer * series_->omega(cand);
        if (lhs >= rhs - slack) return cand;
    }
    std::ostringstream os;
    os << "base threshold scan exceeded cap " << options_.threshold_cap << " at state (" << a
       << "," << d << ")";
    throw NoSolutionWithinCap(os.str());
}

int WhittleCalculator::base_threshold(int a, int d) const {
    if (a < 2) throw RejectedParameters("base_threshold: requires a >= 2 (a = 1 fixes D1 = d)");
    if (d < 1) throw RejectedParameters("base_threshold: requires d >= 1");
    return base_threshold_from(a, d, 1);
}

double WhittleCalculator::index(UeState state) const {
    check_state(state);
    if (state.d == 0) return 0.0;
    const std::uint64_t key = state_key(state.a, state.d);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = index_memo_.find(key);
        if (it != index_memo_.end()) return it->second;
    }
    double value = 0.0;
    if (state.a == 1) {
        value = charge_at_threshold(state.d);
    } else {
        const int d1 = base_threshold_from(state.a, state.d, 1);
        value = state.a <= d1 ? charge_at_threshold(d1) : index_beyond_base(state.a, state.d);
    }
    std::lock_guard<std::mutex> lock(mutex_);
    return index_memo_.emplace(key, value).first->second;
}

WhittleIndexValue WhittleCalculator::index_detail(UeState state) const {
    check_state(state);
    WhittleIndexValue out;
    out.state = state;
    out.lambda = lambda();
    out.epsilon = epsilon();
    out.cost = cost();
    if (state.d == 0) return out;
    out.base_threshold = state.a == 1 ? state.d : base_threshold_from(state.a, state.d, 1);
    out.index = index(state);
    return out;
}

std::optional<int> WhittleCalculator::threshold_scan(double charge, int a, int d_cap) const {
    if (charge <= 0.0) return 0;
    for (int d = 1; d <= d_cap; ++d) {
        if (index({a, d}) >= charge) return d;
    }
    return std::nullopt;
}

int WhittleCalculator::threshold_for_charge(double charge, int a) const {
    if (a < 1) throw RejectedParameters("threshold_for_charge: a must be >= 1");
    if (charge < 0.0) throw RejectedParameters("threshold_for_charge: charge must be >= 0");
    auto d = threshold_scan(charge, a, options_.threshold_cap);
    if (!d) {
        std::ostringstream os;
        os << "no d <= " << options_.threshold_cap << " reaches charge " << charge << " at a="
           << a;
        throw NoSolutionWithinCap(os.str());
    }
    return *d;
}

ThresholdProfile WhittleCalculator::profile(double charge, int a_max) const {
    ThresholdProfile out;
    out.charge = charge;
    out.thresholds.reserve(static_cast<size_t>(a_max));
    for (int a = 1; a <= a_max; ++a) out.thresholds.push_back(threshold_for_charge(charge, a));
    return out;
}

IndexabilityReport WhittleCalculator::indexability(std::span<const double> charge_grid, int a_max,
                                                   int d_max) const {
    for (size_t i = 1; i < charge_grid.size(); ++i) {
        if (charge_grid[i] < charge_grid[i - 1])
            throw RejectedParameters("indexability: charge grid must be ascending");
    }
    IndexabilityReport report;
    report.pass = true;
    const int clamp = d_max + 1;
    for (double m : charge_grid) {
        std::vector<int> row(static_cast<size_t>(a_max), clamp);
        for (int a = 1; a <= a_max; ++a) {
            auto d = threshold_scan(m, a, d_max);
            if (d) row[static_cast<size_t>(a - 1)] = *d;
        }
        report.thresholds_by_charge.push_back(std::move(row));
    }
    for (size_t i = 0; i + 1 < report.thresholds_by_charge.size() && report.pass; ++i) {
        const auto& lo = report.thresholds_by_charge[i];
        const auto& hi = report.thresholds_by_charge[i + 1];
        for (int a = 1; a <= a_max; ++a) {
            if (hi[static_cast<size_t>(a - 1)] < lo[static_cast<size_t>(a - 1)]) {
                report.pass = false;
                report.violation = IndexabilityWitness{charge_grid[i], charge_grid[i + 1], a,
                                                       hi[static_cast<size_t>(a - 1)]};
                break;
            }
        }
    }
    return report;
}

double whittle_index(double lambda, double epsilon, const CostFunction& cost, UeState state,
                     const IndexOptions& options) {
    return WhittleCalculator(lambda, epsilon, cost, options).index(state);
}

int solve_d1(double lambda, double epsilon, const CostFunction& cost, int a, int d,
             const IndexOptions& options) {
    return WhittleCalculator(lambda, epsilon, cost, options).base_threshold(a, d);
}

int threshold_for_charge(double lambda, double epsilon, const CostFunction& cost, double charge,
                         int a, const IndexOptions& options) {
    return WhittleCalculator(lambda, epsilon, cost, options).threshold_for_charge(charge, a);
}

IndexabilityReport indexability_report(double lambda, double epsilon, const CostFunction& cost,
                                       std::span<const double> charge_grid, int a_max, int d_max,
                                       const IndexOptions& options) {
    return WhittleCalculator(lambda, epsilon, cost, options).indexability(charge_grid, a_max,
                                                                          d_max);
}

} // namespace aoi
