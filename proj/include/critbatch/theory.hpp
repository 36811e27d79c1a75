#pragma once

#include <cstdint>
#include <string>

#include "critbatch/method.hpp"

namespace critbatch {

/// Raw inputs of the optimizer performance bounds: learning rate and moment
/// decays, the oracle variance sigma2, the gradient-norm bound G (and the
/// minibatch-gradient bound B, stored but not consumed by any formula), the
/// iterate-distance bound dist, the coordinatewise squared-distance bound D,
/// the squared-gradient-component bound M, the second-moment infimum v_star,
/// the expected squared initial distance init_dist2, and the dimension d.
struct BoundConstants {
    double alpha = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double sigma2 = 1.0;
    double G = 1.0;
    double B = 1.0;
    double dist = 1.0;
    double D = 1.0;
    double M = 1.0;
    double v_star = 1.0;
    double init_dist2 = 1.0;
    std::int64_t d = 1;

    void validate() const;
};

BoundConstants bound_constants_from_json(const std::string& json_text);
std::string bound_constants_to_json(const BoundConstants& bc);

/// Coefficients of the bound  VI <= C1/K + C2/b + C3.
struct ConstantsTriple {
    double c1 = 0.0;
    double c2 = 0.0;
    double c3 = 0.0;
    Method method = Method::sgd;
};

/// dist * { G(1-beta1)/beta1 + 2 sqrt(sigma2 + G^2) (1/beta1 + 2(1-beta1)) }.
/// Strictly decreasing on beta1 in (0,1).
double h_term(double beta1, double dist, double G, double sigma2);

ConstantsTriple constants_for(Method method, const BoundConstants& bc);

/// C1/K + C2/b + C3 for K, b >= 1.
double vi_upper_bound(const ConstantsTriple& c, double K, double b);

/// Adam-only diagnostic: the tighter bound that keeps the per-step
/// sqrt(1 - beta2^(k+1)) factors instead of bounding them by 1.
/// Always <= vi_upper_bound for the adam triple.
double vi_upper_bound_adam_perstep(const BoundConstants& bc, std::int64_t K, double b);

/// Steps to reach precision eps at batch size b:
///   K(b) = C1 b / ((eps - C3) b - C2),  valid for eps > C3, b > C2/(eps-C3).
double steps_K(const ConstantsTriple& c, double eps, double b);

/// SFO complexity K(b) * b = C1 b^2 / ((eps - C3) b - C2).
double sfo(const ConstantsTriple& c, double eps, double b);

/// Batch size minimizing SFO complexity: b* = 2 C2 / (eps - C3).
/// With C2 = 0 the SFO complexity is monotone in b and +infinity is returned.
double critical_batch(const ConstantsTriple& c, double eps);

/// Minimum SFO value sfo(b*) by direct substitution: 4 C1 C2 / (eps - C3)^2.
double sfo_at_critical_batch(const ConstantsTriple& c, double eps);

struct DerivativeChecks {
    double dK;
    double d2K;
    double dSFO;
    double d2SFO;
};

/// Closed-form first and second derivatives of K(b) and of K(b) b.
DerivativeChecks derivative_checks(const ConstantsTriple& c, double eps, double b);

struct PracticalLowerBounds {
    double bS;
    double bM;
    double bA;
};

/// Estimable lower bounds on the critical batch size per optimizer:
///   bS = sigma2_S alpha / eps, bM = sigma2_M alpha / (beta1 eps),
///   bA = sigma2_A alpha / (sqrt(v_star) beta1 (1-beta1) eps).
PracticalLowerBounds practical_lower_bounds(double sigma2_S, double sigma2_M, double sigma2_A,
                                            double alpha, double beta1, double v_star,
                                            double eps);

/// Data-driven batch-size estimate sigma2 * n / (90 sqrt(d) eps^2).
double estimate_adam_batch(double sigma2, std::int64_t n, std::int64_t d, double eps);

}  // namespace critbatch
