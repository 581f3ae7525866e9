#include "aoi/cost.hpp"

#include "aoi/errors.hpp"

#include <cmath>
#include <sstream>

namespace aoi {
namespace {

constexpr int kMaxPolynomialDegree = 12;

double int_pow(double base, int exp) {
    double r = 1.0;
    for (int i = 0; i < exp; ++i) r *= base;
    return r;
}

} // namespace

CostFunction CostFunction::linear() {
    return CostFunction(Kind::Linear, 0, 1, 1.0);
}

CostFunction CostFunction::step_violation(int threshold) {
    if (threshold < 1) throw RejectedParameters("step_violation: threshold must be >= 1");
    return CostFunction(Kind::StepViolation, threshold, 0, 1.0);
}

CostFunction CostFunction::polynomial(int degree, double coefficient) {
    if (degree < 1 || degree > kMaxPolynomialDegree)
        throw RejectedParameters("polynomial: degree must be in [1, 12]");
    if (!(coefficient > 0.0)) throw RejectedParameters("polynomial: coefficient must be > 0");
    return CostFunction(Kind::Polynomial, 0, degree, coefficient);
}

CostFunction CostFunction::constant(double value) {
    if (!(value >= 0.0)) throw RejectedParameters("constant: value must be >= 0");
    return CostFunction(Kind::Constant, 0, 0, value);
}

double CostFunction::evaluate(int h) const {
    if (h <= 0) return 0.0;
    switch (kind_) {
        case Kind::Linear: return static_cast<double>(h);
        case Kind::StepViolation: return h >= threshold_ ? 1.0 : 0.0;
        case Kind::Polynomial: return coefficient_ * int_pow(static_cast<double>(h), degree_);
        case Kind::Constant: return coefficient_;
    }
    return 0.0;
}

double CostFunction::prefix_sum(int n) const {
    if (n <= 0) return 0.0;
    switch (kind_) {
        case Kind::Linear:
            return 0.5 * static_cast<double>(n) * static_cast<double>(n + 1);
        case Kind::StepViolation:
            return n >= threshold_ ? static_cast<double>(n - threshold_ + 1) : 0.0;
        case Kind::Constant:
            return coefficient_ * static_cast<double>(n);
        case Kind::Polynomial: {
            double acc = 0.0;
            for (int h = 1; h <= n; ++h) acc += evaluate(h);
            return acc;
        }
    }
    return 0.0;
}

GrowthBound CostFunction::growth_bound() const {
    switch (kind_) {
        case Kind::Linear: return {1, 1.0};
        case Kind::StepViolation: return {0, 1.0};
        case Kind::Polynomial: return {degree_, coefficient_};
        case Kind::Constant: return {0, coefficient_};
    }
    return {0, 0.0};
}

std::string CostFunction::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case Kind::Linear: os << "linear"; break;
        case Kind::StepViolation: os << "step_violation(" << threshold_ << ")"; break;
        case Kind::Polynomial: os << "polynomial(" << degree_ << "," << coefficient_ << ")"; break;
        case Kind::Constant: os << "constant(" << coefficient_ << ")"; break;
    }
    return os.str();
}

ValidationResult validate(const CostFunction& v, double lambda, double epsilon) {
    (void)v;
    if (!(lambda >= 0.0 && lambda <= 1.0)) return {false, "lambda outside [0, 1]"};
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) return {false, "epsilon outside [0, 1]"};
    if (lambda == 0.0)
        return {false, "lambda = 0: sum_k (1-lambda)^k v(k) diverges"};
    if (epsilon == 1.0)
        return {false, "epsilon = 1: sum_k epsilon^k v(k) diverges"};
    return {};
}

} // namespace aoi
