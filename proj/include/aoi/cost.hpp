#pragma once

#include <cstdint>
#include <string>

namespace aoi {

/// Pointwise bound v(h) <= coefficient * (1 + h)^degree, used to certify
/// truncation tails of the geometric series over v.
struct GrowthBound {
    int degree = 0;
    double coefficient = 0.0;
};

struct ValidationResult {
    bool ok = true;
    std::string message;
    explicit operator bool() const { return ok; }
};

/// Non-decreasing per-slot cost of age, v(h) for integer h >= 0.
///
/// The family is a closed enum so that every instance carries an analytic
/// growth bound; v(0) is defined as 0 for all kinds (age states start at 1,
/// the value at 0 only appears in empty bookkeeping sums).
class CostFunction {
  public:
    enum class Kind { Linear, StepViolation, Polynomial, Constant };

    static CostFunction linear();
    /// v(h) = 1 if h >= threshold else 0; threshold >= 1.
    static CostFunction step_violation(int threshold);
    /// v(h) = coefficient * h^degree; degree in [1, 12], coefficient > 0.
    static CostFunction polynomial(int degree, double coefficient);
    /// v(h) = value for h >= 1; value >= 0.
    static CostFunction constant(double value);

    Kind kind() const { return kind_; }
    int step_threshold() const { return threshold_; }
    int degree() const { return degree_; }
    double coefficient() const { return coefficient_; }

    double operator()(int h) const { return evaluate(h); }
    double evaluate(int h) const;

    /// sum_{h=1..n} v(h); closed form except for Polynomial.
    double prefix_sum(int n) const;

    GrowthBound growth_bound() const;

    /// True when theta/psi/omega admit exact closed forms for this kind.
    bool has_closed_form_tails() const { return kind_ != Kind::Polynomial; }

    std::string describe() const;

    friend bool operator==(const CostFunction& a, const CostFunction& b) {
        return a.kind_ == b.kind_ && a.threshold_ == b.threshold_ &&
               a.degree_ == b.degree_ && a.coefficient_ == b.coefficient_;
    }

  private:
    CostFunction(Kind kind, int threshold, int degree, double coefficient)
        : kind_(kind), threshold_(threshold), degree_(degree), coefficient_(coefficient) {}

    Kind kind_;
    int threshold_;     // StepViolation
    int degree_;        // Polynomial
    double coefficient_; // Polynomial coefficient / Constant value
};

/// Checks the two tail-sum convergence conditions for the pair (lambda,
/// epsilon): ok iff lambda > 0 and epsilon < 1. The failing condition is
/// named in the message.
ValidationResult validate(const CostFunction& v, double lambda, double epsilon);

} // namespace aoi
