#include "critbatch/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace critbatch {

namespace {

using nlohmann::json;

void check_step_inputs(const OptimizerState& s, const Vec& grad, const char* where) {
    require_same_dim(s.theta, grad, where);
    require_finite(grad, where);
}

}  // namespace

void OptimizerConfig::validate() const {
    if (!(alpha > 0.0)) throw std::invalid_argument("optimizer: alpha must be > 0");
    if (method != Method::sgd && !(beta1 > 0.0 && beta1 < 1.0))
        throw std::invalid_argument("optimizer: beta1 must lie in (0,1)");
    if (method == Method::adam && !(beta2 >= 0.0 && beta2 < 1.0))
        throw std::invalid_argument("optimizer: beta2 must lie in [0,1)");
    if (!(delta >= 0.0)) throw std::invalid_argument("optimizer: delta must be >= 0");
}

OptimizerConfig optimizer_config_from_json(const std::string& json_text) {
    json doc = json::parse(json_text);
    OptimizerConfig cfg;
    cfg.method = method_from_name(doc.at("method").get<std::string>());
    cfg.alpha = doc.value("alpha", cfg.alpha);
    cfg.beta1 = doc.value("beta1", cfg.beta1);
    cfg.beta2 = doc.value("beta2", cfg.beta2);
    cfg.delta = doc.value("delta", cfg.delta);
    cfg.amsgrad = doc.value("amsgrad", cfg.amsgrad);
    cfg.momentum_bias_correction = doc.value("momentum_bias_correction", cfg.momentum_bias_correction);
    cfg.validate();
    return cfg;
}

std::string optimizer_config_to_json(const OptimizerConfig& cfg) {
    json doc{{"method", method_name(cfg.method)},
             {"alpha", cfg.alpha},
             {"beta1", cfg.beta1},
             {"beta2", cfg.beta2},
             {"delta", cfg.delta},
             {"amsgrad", cfg.amsgrad},
             {"momentum_bias_correction", cfg.momentum_bias_correction}};
    return doc.dump();
}

OptimizerState OptimizerState::init(Vec theta0) {
    require_finite(theta0, "OptimizerState::init");
    OptimizerState s;
    const std::size_t d = theta0.size();
    s.theta = std::move(theta0);
    s.m = zeros(d);
    s.v = zeros(d);
    s.v_hat_max = zeros(d);
    s.k = 0;
    return s;
}

OptimizerState sgd_step(const OptimizerState& s, const Vec& grad, const OptimizerConfig& cfg) {
    if (cfg.method != Method::sgd) throw std::invalid_argument("sgd_step: config method is not sgd");
    cfg.validate();
    check_step_inputs(s, grad, "sgd_step");
    OptimizerState out = s;
    for (std::size_t i = 0; i < grad.size(); ++i) out.theta[i] -= cfg.alpha * grad[i];
    out.k = s.k + 1;
    return out;
}

OptimizerState momentum_step(const OptimizerState& s, const Vec& grad,
                             const OptimizerConfig& cfg) {
    if (cfg.method != Method::momentum)
        throw std::invalid_argument("momentum_step: config method is not momentum");
    cfg.validate();
    check_step_inputs(s, grad, "momentum_step");
    OptimizerState out = s;
    const double corr =
        cfg.momentum_bias_correction
            ? 1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(s.k) + 1.0))
            : 1.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        out.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grad[i];
        out.theta[i] -= cfg.alpha * corr * out.m[i];
    }
    out.k = s.k + 1;
    return out;
}

OptimizerState adam_step(const OptimizerState& s, const Vec& grad, const OptimizerConfig& cfg) {
    if (cfg.method != Method::adam) throw std::invalid_argument("adam_step: config method is not adam");
    cfg.validate();
    check_step_inputs(s, grad, "adam_step");
    OptimizerState out = s;
    const double kp1 = static_cast<double>(s.k) + 1.0;
    const double m_corr = 1.0 - std::pow(cfg.beta1, kp1);
    const double v_corr = 1.0 - std::pow(cfg.beta2, kp1);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        out.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grad[i];
        out.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = out.m[i] / m_corr;
        double v_hat = out.v[i] / v_corr;
        if (cfg.amsgrad) {
            // corrected second moment is kept componentwise nondecreasing
            v_hat = std::max(v_hat, s.v_hat_max[i]);
            out.v_hat_max[i] = v_hat;
        }
        const double update = cfg.alpha * m_hat / (std::sqrt(v_hat) + cfg.delta);
        if (!std::isfinite(update))
            throw std::domain_error("adam_step: nonfinite update (zero denominator with delta=0)");
        out.theta[i] -= update;
    }
    out.k = s.k + 1;
    return out;
}

OptimizerState optimizer_step(const OptimizerState& s, const Vec& grad,
                              const OptimizerConfig& cfg) {
    switch (cfg.method) {
        case Method::sgd: return sgd_step(s, grad, cfg);
        case Method::momentum: return momentum_step(s, grad, cfg);
        case Method::adam: return adam_step(s, grad, cfg);
    }
    throw std::logic_error("unreachable");
}

}  // namespace critbatch
