#include "critbatch/theory.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace critbatch {

namespace {

using nlohmann::json;

void require_feasible(const ConstantsTriple& c, double eps, const char* where) {
    if (!(eps > c.c3))
        throw std::domain_error(std::string(where) + ": infeasible precision (eps <= C3)");
}

// denominator (eps - C3) b - C2, positive only above the pole
double denom(const ConstantsTriple& c, double eps, double b) {
    return (eps - c.c3) * b - c.c2;
}

void require_above_pole(const ConstantsTriple& c, double eps, double b, const char* where) {
    require_feasible(c, eps, where);
    if (!(denom(c, eps, b) > 0.0))
        throw std::domain_error(std::string(where) + ": b at or below the pole C2/(eps - C3)");
}

}  // namespace

void BoundConstants::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("bound constants: alpha must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0))
        throw std::invalid_argument("bound constants: beta1 must lie in (0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("bound constants: beta2 must lie in [0,1)");
    if (!(sigma2 >= 0.0)) throw std::invalid_argument("bound constants: sigma2 must be >= 0");
    if (!(G > 0.0)) throw std::invalid_argument("bound constants: G must be > 0");
    if (!(B > 0.0)) throw std::invalid_argument("bound constants: B must be > 0");
    if (!(dist > 0.0)) throw std::invalid_argument("bound constants: dist must be > 0");
    if (!(D > 0.0)) throw std::invalid_argument("bound constants: D must be > 0");
    if (!(M > 0.0)) throw std::invalid_argument("bound constants: M must be > 0");
    if (!(v_star > 0.0)) throw std::invalid_argument("bound constants: v_star must be > 0");
    if (!(init_dist2 >= 0.0))
        throw std::invalid_argument("bound constants: init_dist2 must be >= 0");
    if (d < 1) throw std::invalid_argument("bound constants: d must be positive");
}

BoundConstants bound_constants_from_json(const std::string& json_text) {
    json doc = json::parse(json_text);
    BoundConstants bc;
    bc.alpha = doc.value("alpha", bc.alpha);
    bc.beta1 = doc.value("beta1", bc.beta1);
    bc.beta2 = doc.value("beta2", bc.beta2);
    bc.sigma2 = doc.value("sigma2", bc.sigma2);
    bc.G = doc.value("G", bc.G);
    bc.B = doc.value("B", bc.B);
    bc.dist = doc.value("dist", bc.dist);
    bc.D = doc.value("D", bc.D);
    bc.M = doc.value("M", bc.M);
    bc.v_star = doc.value("v_star", bc.v_star);
    bc.init_dist2 = doc.value("init_dist2", bc.init_dist2);
    bc.d = doc.value("d", bc.d);
    bc.validate();
    return bc;
}

std::string bound_constants_to_json(const BoundConstants& bc) {
    json doc{{"alpha", bc.alpha},       {"beta1", bc.beta1},
             {"beta2", bc.beta2},       {"sigma2", bc.sigma2},
             {"G", bc.G},               {"B", bc.B},
             {"dist", bc.dist},         {"D", bc.D},
             {"M", bc.M},               {"v_star", bc.v_star},
             {"init_dist2", bc.init_dist2}, {"d", bc.d}};
    return doc.dump();
}

double h_term(double beta1, double dist, double G, double sigma2) {
    if (!(beta1 > 0.0 && beta1 < 1.0))
        throw std::invalid_argument("h_term: beta1 must lie in (0,1)");
    if (!(dist > 0.0) || !(G > 0.0) || !(sigma2 >= 0.0))
        throw std::invalid_argument("h_term: need dist > 0, G > 0, sigma2 >= 0");
    return dist * (G * (1.0 - beta1) / beta1 +
                   2.0 * std::sqrt(sigma2 + G * G) * (1.0 / beta1 + 2.0 * (1.0 - beta1)));
}

ConstantsTriple constants_for(Method method, const BoundConstants& bc) {
    bc.validate();
    ConstantsTriple c;
    c.method = method;
    switch (method) {
        case Method::sgd:
            c.c1 = bc.init_dist2 / (2.0 * bc.alpha);
            c.c2 = bc.sigma2 * bc.alpha / 2.0;
            c.c3 = bc.G * bc.G * bc.alpha / 2.0;
            break;
        case Method::momentum:
            c.c1 = bc.init_dist2 / (2.0 * bc.alpha * bc.beta1);
            c.c2 = bc.sigma2 * bc.alpha / (2.0 * bc.beta1);
            c.c3 = bc.G * bc.G * bc.alpha / (2.0 * bc.beta1) +
                   h_term(bc.beta1, bc.dist, bc.G, bc.sigma2);
            break;
        case Method::adam: {
            const double root = 2.0 * std::sqrt(bc.v_star) * bc.beta1 * (1.0 - bc.beta1);
            c.c1 = static_cast<double>(bc.d) * bc.D * std::sqrt(bc.M) /
                   (2.0 * bc.alpha * bc.beta1 * std::sqrt(1.0 - bc.beta2));
            c.c2 = bc.sigma2 * bc.alpha / root;
            c.c3 = bc.G * bc.G * bc.alpha / root +
                   h_term(bc.beta1, bc.dist, bc.G, bc.sigma2);
            break;
        }
    }
    if (!(c.c1 > 0.0) || !std::isfinite(c.c1) || !std::isfinite(c.c2) || !std::isfinite(c.c3))
        throw std::domain_error("constants_for: nonfinite or nonpositive constants");
    return c;
}

double vi_upper_bound(const ConstantsTriple& c, double K, double b) {
    if (!(K >= 1.0)) throw std::invalid_argument("vi_upper_bound: K must be >= 1");
    if (!(b >= 1.0)) throw std::invalid_argument("vi_upper_bound: b must be >= 1");
    return c.c1 / K + c.c2 / b + c.c3;
}

double vi_upper_bound_adam_perstep(const BoundConstants& bc, std::int64_t K, double b) {
    bc.validate();
    if (K < 1) throw std::invalid_argument("vi_upper_bound_adam_perstep: K must be >= 1");
    if (!(b >= 1.0)) throw std::invalid_argument("vi_upper_bound_adam_perstep: b must be >= 1");
    const double root = 2.0 * std::sqrt(bc.v_star) * bc.beta1 * (1.0 - bc.beta1);
    double partial = 0.0;
    for (std::int64_t k = 1; k <= K; ++k)
        partial += std::sqrt(1.0 - std::pow(bc.beta2, static_cast<double>(k) + 1.0));
    const double c1 = static_cast<double>(bc.d) * bc.D * std::sqrt(bc.M) /
                      (2.0 * bc.alpha * bc.beta1 * std::sqrt(1.0 - bc.beta2));
    return c1 / static_cast<double>(K) +
           bc.alpha * (bc.sigma2 / b + bc.G * bc.G) / root * partial / static_cast<double>(K) +
           h_term(bc.beta1, bc.dist, bc.G, bc.sigma2);
}

double steps_K(const ConstantsTriple& c, double eps, double b) {
    require_above_pole(c, eps, b, "steps_K");
    return c.c1 * b / denom(c, eps, b);
}

double sfo(const ConstantsTriple& c, double eps, double b) {
    require_above_pole(c, eps, b, "sfo");
    return c.c1 * b * b / denom(c, eps, b);
}

double critical_batch(const ConstantsTriple& c, double eps) {
    require_feasible(c, eps, "critical_batch");
    if (c.c2 == 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 * c.c2 / (eps - c.c3);
}

double sfo_at_critical_batch(const ConstantsTriple& c, double eps) {
    require_feasible(c, eps, "sfo_at_critical_batch");
    const double gap = eps - c.c3;
    return 4.0 * c.c1 * c.c2 / (gap * gap);
}

DerivativeChecks derivative_checks(const ConstantsTriple& c, double eps, double b) {
    require_above_pole(c, eps, b, "derivative_checks");
    const double gap = eps - c.c3;
    const double den = denom(c, eps, b);
    DerivativeChecks out;
    out.dK = -c.c1 * c.c2 / (den * den);
    out.d2K = 2.0 * c.c1 * c.c2 * gap / (den * den * den);
    out.dSFO = c.c1 * b * (gap * b - 2.0 * c.c2) / (den * den);
    out.d2SFO = 2.0 * c.c1 * c.c2 * c.c2 / (den * den * den);
    return out;
}

PracticalLowerBounds practical_lower_bounds(double sigma2_S, double sigma2_M, double sigma2_A,
                                            double alpha, double beta1, double v_star,
                                            double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("practical_lower_bounds: eps must be > 0");
    if (!(v_star > 0.0)) throw std::invalid_argument("practical_lower_bounds: v_star must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0))
        throw std::invalid_argument("practical_lower_bounds: beta1 must lie in (0,1)");
    if (!(alpha > 0.0)) throw std::invalid_argument("practical_lower_bounds: alpha must be > 0");
    if (sigma2_S < 0.0 || sigma2_M < 0.0 || sigma2_A < 0.0)
        throw std::invalid_argument("practical_lower_bounds: sigma2 must be >= 0");
    PracticalLowerBounds out;
    out.bS = sigma2_S * alpha / eps;
    out.bM = sigma2_M * alpha / (beta1 * eps);
    out.bA = sigma2_A * alpha / (std::sqrt(v_star) * beta1 * (1.0 - beta1) * eps);
    return out;
}

double estimate_adam_batch(double sigma2, std::int64_t n, std::int64_t d, double eps) {
    if (!(sigma2 > 0.0) || n < 1 || d < 1 || !(eps > 0.0))
        throw std::invalid_argument("estimate_adam_batch: all inputs must be positive");
    return sigma2 * static_cast<double>(n) /
           (90.0 * std::sqrt(static_cast<double>(d)) * eps * eps);
}

}  // namespace critbatch
