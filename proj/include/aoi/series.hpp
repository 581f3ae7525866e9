#pragma once

#include "aoi/cost.hpp"

#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

namespace aoi {

struct SeriesOptions {
    /// Certified absolute truncation tolerance for series evaluation.
    double truncation_tol = 1e-12;
    /// |1 - lambda - epsilon| below this flags the degenerate branch, where
    /// the quotient form of omega is numerically meaningless.
    double degenerate_eps = 1e-9;
    /// Hard cap on summed terms before NonConvergent is raised.
    long max_terms = 20'000'000;
};

/// Evaluator for the three geometric tail sums over a cost function v:
///
///   theta(h) = sum_{k>=0} epsilon^k     v(h+k)   (failure persistence)
///   psi(h)   = sum_{k>=0} (1-lambda)^k  v(h+k)   (arrival gaps)
///   omega(h) = (psi(h) - theta(h)) / (1 - lambda - epsilon), continued at
///              the removable point 1-lambda = epsilon by the double series
///              sum_{k>=1} epsilon^{k-1} theta(h+k).
///
/// Linear, StepViolation and Constant costs use exact algebraic forms; the
/// omega forms are the quotient simplified so that no cancellation occurs
/// near the degenerate line (the raw quotient loses one digit per digit of
/// |1-lambda-epsilon|). Polynomial costs fall back to certified truncation.
/// All evaluations are memoized per h; cached results are bit-reproducible.
class SeriesContext {
  public:
    /// Throws RejectedParameters unless lambda > 0 and epsilon < 1.
    SeriesContext(double lambda, double epsilon, CostFunction cost,
                  SeriesOptions options = {});

    double lambda() const { return lambda_; }
    double epsilon() const { return epsilon_; }
    const CostFunction& cost() const { return cost_; }
    const SeriesOptions& options() const { return options_; }
    bool degenerate() const { return degenerate_; }

    double theta(int h) const;
    double psi(int h) const;
    double omega(int h) const;

    /// Certified-truncation evaluation path, independent of the closed
    /// forms. theta/psi tails are bounded through the growth bound of v;
    /// omega_series sums the single always-convergent series
    /// sum_{k>=1} P_{k-1}(1-lambda, epsilon) v(h+k) with
    /// P_j(x, y) = sum_{i=0..j} x^i y^{j-i}, which equals the quotient form
    /// away from the degenerate line and the double series on it.
    double theta_series(int h) const;
    double psi_series(int h) const;
    double omega_series(int h) const;

    /// The degenerate-branch double series sum_{k>=1} epsilon^{k-1}
    /// theta(h+k), truncated with a certified tail. Only equal to omega on
    /// the degenerate line; exposed for branch-agreement checks.
    double omega_double_series(int h) const;

    /// sum_{h=1..n} v(h), memoized.
    double prefix_cost(int n) const;

  private:
    double theta_closed(int h) const;
    double psi_closed(int h) const;
    double omega_closed(int h) const;
    double geometric_tail_sum(int h, double ratio) const;
    double power_weight_sum(double ratio, int degree) const;

    double lambda_;
    double epsilon_;
    CostFunction cost_;
    SeriesOptions options_;
    bool degenerate_;
    GrowthBound bound_;

    mutable std::mutex mutex_;
    mutable std::unordered_map<int, double> theta_memo_;
    mutable std::unordered_map<int, double> psi_memo_;
    mutable std::unordered_map<int, double> omega_memo_;
    mutable std::vector<double> prefix_cum_;
};

struct SeriesValues {
    double theta = 0.0;
    double psi = 0.0;
    double omega = 0.0;
};

inline SeriesValues evaluate_series(const SeriesContext& ctx, int h) {
    return {ctx.theta(h), ctx.psi(h), ctx.omega(h)};
}

} // namespace aoi
