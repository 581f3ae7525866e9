#pragma once

#include "aoi/series.hpp"
#include "aoi/ue.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace aoi {

struct IndexOptions {
    /// Cap on threshold scans; NoSolutionWithinCap is raised beyond it.
    int threshold_cap = 10'000;
    SeriesOptions series;
};

/// A computed index together with the inputs it was computed for and the
/// base threshold that picked the formula branch (0 when d = 0).
struct WhittleIndexValue {
    double index = 0.0;
    UeState state;
    double lambda = 0.0;
    double epsilon = 0.0;
    CostFunction cost = CostFunction::linear();
    int base_threshold = 0;
};

/// Map a -> D_a for a fixed service charge; schedule iff d >= D_a.
struct ThresholdProfile {
    double charge = 0.0;
    std::vector<int> thresholds; // thresholds[a-1] = D_a

    int at(int a) const { return thresholds.at(static_cast<size_t>(a - 1)); }
    int a_max() const { return static_cast<int>(thresholds.size()); }
};

struct IndexabilityWitness {
    double charge_lo = 0.0;
    double charge_hi = 0.0;
    int a = 0;
    int d = 0;
};

struct IndexabilityReport {
    bool pass = false;
    std::optional<IndexabilityWitness> violation;
    /// thresholds_by_charge[i][a-1] = D_a under m_grid[i], clamped to
    /// d_max + 1 when the threshold lies beyond the sampled rectangle.
    std::vector<std::vector<int>> thresholds_by_charge;
};

/// Closed-form Whittle index of the single-user scheduling problem.
///
/// For state (a, d) with d >= 1 the index is
///   a = 1:          (1-e) (l(1-e) d w(d) - sum_{h<=d} v(h))
///   2 <= a <= D1:   the same expression evaluated at D1
///   a > D1:         (1-e) (psi(a+d) - psi(a) + l e (w(a+d) - w(a)))
/// where D1 is the smallest positive integer satisfying
///   e theta(D1+1) + l(1-e)(a + 1/l - 1) w(D1)
///     >= l e w(a+d) + psi(a+d) + sum_{h<=a-1} v(h),
/// read as first-crossing since the left side is non-decreasing in D1 and
/// exact integer equality generally has no solution. d = 0 short-circuits
/// to index 0: the buffered packet carries nothing fresher.
class WhittleCalculator {
  public:
    WhittleCalculator(double lambda, double epsilon, CostFunction cost,
                      IndexOptions options = {});

    double lambda() const { return series_->lambda(); }
    double epsilon() const { return series_->epsilon(); }
    const CostFunction& cost() const { return series_->cost(); }
    const SeriesContext& series() const { return *series_; }
    const IndexOptions& options() const { return options_; }

    double index(UeState state) const;
    WhittleIndexValue index_detail(UeState state) const;

    /// Base threshold D1 for a queried state with a >= 2, d >= 1.
    int base_threshold(int a, int d) const;

    /// Smallest d >= 0 whose index reaches m; inverts the index/threshold
    /// relationship. Throws NoSolutionWithinCap past the scan cap.
    int threshold_for_charge(double charge, int a) const;

    /// Thresholds for a = 1..a_max at a fixed charge.
    ThresholdProfile profile(double charge, int a_max) const;

    /// Nested-idle-set check over an ascending charge grid on the state
    /// rectangle [1, a_max] x [0, d_max].
    IndexabilityReport indexability(std::span<const double> charge_grid, int a_max,
                                    int d_max) const;

  private:
    double charge_at_threshold(int threshold) const; // a = 1 branch formula
    double index_beyond_base(int a, int d) const;    // a > D1 branch formula
    int base_threshold_from(int a, int d, int start) const;
    std::optional<int> threshold_scan(double charge, int a, int d_cap) const;

    std::shared_ptr<SeriesContext> series_;
    IndexOptions options_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::uint64_t, double> index_memo_;
};

/// Free-function forms for one-off evaluation.
double whittle_index(double lambda, double epsilon, const CostFunction& cost, UeState state,
                     const IndexOptions& options = {});
int solve_d1(double lambda, double epsilon, const CostFunction& cost, int a, int d,
             const IndexOptions& options = {});
int threshold_for_charge(double lambda, double epsilon, const CostFunction& cost, double charge,
                         int a, const IndexOptions& options = {});
IndexabilityReport indexability_report(double lambda, double epsilon, const CostFunction& cost,
                                       std::span<const double> charge_grid, int a_max, int d_max,
                                       const IndexOptions& options = {});

} // namespace aoi
