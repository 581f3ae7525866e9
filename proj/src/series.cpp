#include "aoi/series.hpp"

#include "aoi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aoi {
namespace {

double int_pow(double base, int exp) {
    double r = 1.0;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

// P_j(x, y) = sum_{i=0..j} x^i y^{j-i}; P_{-1} = 0. Equals
// (x^{j+1} - y^{j+1}) / (x - y) without cancellation, including x == y.
double homogeneous_power_sum(double x, double y, int j) {
    if (j < 0) return 0.0;
    double p = 1.0;
    double ypow = 1.0;
    for (int i = 1; i <= j; ++i) {
        ypow *= y;
        p = x * p + ypow;
    }
    return p;
}

} // namespace

SeriesContext::SeriesContext(double lambda, double epsilon, CostFunction cost,
                             SeriesOptions options)
    : lambda_(lambda), epsilon_(epsilon), cost_(std::move(cost)), options_(options),
      degenerate_(std::abs(1.0 - lambda - epsilon) < options.degenerate_eps),
      bound_(cost_.growth_bound()) {
    ValidationResult ok = validate(cost_, lambda_, epsilon_);
    if (!ok) throw RejectedParameters("series context: " + ok.message);
}

// sum_{j>=0} (1+j)^degree * ratio^j, certified to ~1e-16 relative.
double SeriesContext::power_weight_sum(double ratio, int degree) const {
    if (ratio <= 0.0) return 1.0;
    switch (degree) {
        case 0: return 1.0 / (1.0 - ratio);
        case 1: return 1.0 / ((1.0 - ratio) * (1.0 - ratio));
        case 2: return (1.0 + ratio) / ((1.0 - ratio) * (1.0 - ratio) * (1.0 - ratio));
        default: break;
    }
    const double q = 0.5 * (1.0 + ratio); // once term ratios fall below q the tail is geometric
    double acc = 0.0;
    double rj = 1.0;
    for (long j = 0;; ++j) {
        const double term = int_pow(1.0 + static_cast<double>(j), degree) * rj;
        acc += term;
        const double step = int_pow((2.0 + j) / (1.0 + j), degree) * ratio;
        if (step <= q && term * q / (1.0 - q) <= 1e-16 * acc) break;
        rj *= ratio;
        if (j > options_.max_terms) throw NonConvergent("power_weight_sum: term budget exhausted");
    }
    return acc;
}

double SeriesContext::geometric_tail_sum(int h, double ratio) const {
    // sum_{k>=0} ratio^k v(h+k) by truncation; the remaining tail after K
    // terms is bounded by C (1+h+K)^p ratio^K S_p(ratio).
    if (ratio <= 0.0) return cost_.evaluate(h);
    const double sp = power_weight_sum(ratio, bound_.degree);
    double acc = 0.0;
    double rk = 1.0;
    for (long k = 0;; ++k) {
        acc += rk * cost_.evaluate(h + static_cast<int>(k));
        rk *= ratio;
        const double tail = bound_.coefficient *
                            int_pow(1.0 + h + static_cast<double>(k + 1), bound_.degree) * rk * sp;
        if (tail <= options_.truncation_tol) break;
        if (k > options_.max_terms) {
            std::ostringstream os;
            os << "geometric tail sum did not certify at h=" << h << " ratio=" << ratio;
            throw NonConvergent(os.str());
        }
    }
    return acc;
}

double SeriesContext::theta_series(int h) const { return geometric_tail_sum(h, epsilon_); }

double SeriesContext::psi_series(int h) const { return geometric_tail_sum(h, 1.0 - lambda_); }

double SeriesContext::omega_series(int h) const {
    // sum_{k>=1} P_{k-1}(alpha, epsilon) v(h+k) with alpha = 1-lambda.
    // P_{k-1} <= k rho^{k-1} for rho = max(alpha, epsilon), so the tail
    // after K terms is bounded by C (K+1) (2+h+K)^p rho^K S_{p+1}(rho).
    const double alpha = 1.0 - lambda_;
    const double rho = std::max(alpha, epsilon_);
    if (rho <= 0.0) return cost_.evaluate(h + 1); // lambda = 1, epsilon = 0
    const double sp1 = power_weight_sum(rho, bound_.degree + 1);
    double acc = 0.0;
    double p = 1.0;      // P_{k-1}, starting at P_0
    double epow = 1.0;   // epsilon^{k-1}
    double rhok = rho;   // rho^k
    for (long k = 1;; ++k) {
        acc += p * cost_.evaluate(h + static_cast<int>(k));
        const double tail = bound_.coefficient * static_cast<double>(k + 1) *
                            int_pow(2.0 + h + static_cast<double>(k), bound_.degree) * rhok * sp1;
        if (tail <= options_.truncation_tol) break;
        epow *= epsilon_;
        p = alpha * p + epow;
        rhok *= rho;
        if (k > options_.max_terms) throw NonConvergent("omega_series: term budget exhausted");
    }
    return acc;
}

double SeriesContext::omega_double_series(int h) const {
    // sum_{k>=1} epsilon^{k-1} theta(h+k); theta(x) <= C (1+x)^p S_p(eps).
    const double sp = power_weight_sum(epsilon_, bound_.degree);
    if (epsilon_ <= 0.0) return theta(h + 1);
    double acc = 0.0;
    double ek = 1.0; // epsilon^{k-1}
    for (long k = 1;; ++k) {
        acc += ek * theta(h + static_cast<int>(k));
        ek *= epsilon_;
        const double tail = bound_.coefficient * sp * sp * ek *
                            int_pow(2.0 + h + static_cast<double>(k), bound_.degree);
        if (tail <= options_.truncation_tol) break;
        if (k > options_.max_terms) throw NonConvergent("omega_double_series: term budget exhausted");
    }
    return acc;
}

double SeriesContext::theta_closed(int h) const {
    const double beta = 1.0 - epsilon_;
    switch (cost_.kind()) {
        case CostFunction::Kind::Linear:
            return h / beta + epsilon_ / (beta * beta);
        case CostFunction::Kind::StepViolation: {
            const int gap = cost_.step_threshold() - h;
            if (gap <= 0) return 1.0 / beta;
            return int_pow(epsilon_, gap) / beta;
        }
        case CostFunction::Kind::Constant:
            return cost_.coefficient() / beta;
        case CostFunction::Kind::Polynomial:
            break;
    }
    return theta_series(h);
}

double SeriesContext::psi_closed(int h) const {
    const double alpha = 1.0 - lambda_;
    switch (cost_.kind()) {
        case CostFunction::Kind::Linear:
            return h / lambda_ + alpha / (lambda_ * lambda_);
        case CostFunction::Kind::StepViolation: {
            const int gap = cost_.step_threshold() - h;
            if (gap <= 0) return 1.0 / lambda_;
            return int_pow(alpha, gap) / lambda_;
        }
        case CostFunction::Kind::Constant:
            return cost_.coefficient() / lambda_;
        case CostFunction::Kind::Polynomial:
            break;
    }
    return psi_series(h);
}

double SeriesContext::omega_closed(int h) const {
    // Quotient form (psi - theta)/(1-lambda-epsilon) with the subtraction
    // carried out symbolically, so the removable point is covered exactly.
    const double alpha = 1.0 - lambda_;
    const double beta = 1.0 - epsilon_;
    const double lb = lambda_ * beta;
    switch (cost_.kind()) {
        case CostFunction::Kind::Linear:
            return h / lb + (lambda_ + beta - lambda_ * beta) / (lambda_ * lambda_ * beta * beta);
        case CostFunction::Kind::StepViolation: {
            const int gap = cost_.step_threshold() - h;
            if (gap <= 1) return 1.0 / lb;
            const double num = homogeneous_power_sum(alpha, epsilon_, gap - 1) -
                               alpha * epsilon_ * homogeneous_power_sum(alpha, epsilon_, gap - 2);
            return num / lb;
        }
        case CostFunction::Kind::Constant:
            return cost_.coefficient() / lb;
        case CostFunction::Kind::Polynomial:
            break;
    }
    return omega_series(h);
}

double SeriesContext::theta(int h) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = theta_memo_.find(h);
        if (it != theta_memo_.end()) return it->second;
    }
    const double value = theta_closed(h);
    std::lock_guard<std::mutex> lock(mutex_);
    return theta_memo_.emplace(h, value).first->second;
}

double SeriesContext::psi(int h) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = psi_memo_.find(h);
        if (it != psi_memo_.end()) return it->second;
    }
    const double value = psi_closed(h);
    std::lock_guard<std::mutex> lock(mutex_);
    return psi_memo_.emplace(h, value).first->second;
}

double SeriesContext::omega(int h) const {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = omega_memo_.find(h);
        if (it != omega_memo_.end()) return it->second;
    }
    const double value = omega_closed(h);
    std::lock_guard<std::mutex> lock(mutex_);
    return omega_memo_.emplace(h, value).first->second;
}

double SeriesContext::prefix_cost(int n) const {
    if (n <= 0) return 0.0;
    if (cost_.kind() != CostFunction::Kind::Polynomial) return cost_.prefix_sum(n);
    std::lock_guard<std::mutex> lock(mutex_);
    if (prefix_cum_.empty()) prefix_cum_.push_back(0.0);
    while (static_cast<int>(prefix_cum_.size()) <= n) {
        const int h = static_cast<int>(prefix_cum_.size());
        prefix_cum_.push_back(prefix_cum_.back() + cost_.evaluate(h));
    }
    return prefix_cum_[static_cast<size_t>(n)];
}

} // namespace aoi
