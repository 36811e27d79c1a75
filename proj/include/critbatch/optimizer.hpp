#pragma once

#include <cstdint>
#include <string>

#include "critbatch/method.hpp"
#include "critbatch/vec.hpp"

namespace critbatch {

struct OptimizerConfig {
    Method method = Method::sgd;
    double alpha = 1e-3;   // constant learning rate
    double beta1 = 0.9;    // first-moment decay, in (0,1); unused by sgd
    double beta2 = 0.999;  // second-moment decay, in [0,1); adam only
    double delta = 1e-8;   // denominator stabilizer; 0 gives the bare update
    bool amsgrad = false;
    bool momentum_bias_correction = false;

    void validate() const;
};

OptimizerConfig optimizer_config_from_json(const std::string& json_text);
std::string optimizer_config_to_json(const OptimizerConfig& cfg);

/// Mutable per-run optimizer state. m and v start at zero; k counts completed
/// steps and bias corrections use exponent k+1.
struct OptimizerState {
    Vec theta;
    Vec m;
    Vec v;
    Vec v_hat_max;  // running max of bias-corrected v, amsgrad only
    std::int64_t k = 0;

    static OptimizerState init(Vec theta0);
};

OptimizerState sgd_step(const OptimizerState& s, const Vec& grad, const OptimizerConfig& cfg);
OptimizerState momentum_step(const OptimizerState& s, const Vec& grad, const OptimizerConfig& cfg);
OptimizerState adam_step(const OptimizerState& s, const Vec& grad, const OptimizerConfig& cfg);

/// Dispatch on cfg.method.
OptimizerState optimizer_step(const OptimizerState& s, const Vec& grad,
                              const OptimizerConfig& cfg);

}  // namespace critbatch
