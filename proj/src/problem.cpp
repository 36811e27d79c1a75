#include "critbatch/problem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace critbatch {

namespace {

using nlohmann::json;

constexpr std::uint64_t kDataStream = 0xDA7A;
constexpr std::uint64_t kCenterStreamBase = 0xCE000000ULL;

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// ln(1 + e^z), stable for large |z|
double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

// Per-example quadratic center; examples 2p and 2p+1 share a draw with
// opposite sign so the centers sum to exactly zero (odd n gets a zero tail).
Vec quad_center(const Problem& p, std::int64_t i) {
    Vec c(static_cast<std::size_t>(p.d), 0.0);
    if (p.center_scale == 0.0) return c;
    if ((p.n % 2) != 0 && i == p.n - 1) return c;
    const std::int64_t pair = i / 2;
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    RngStream rs(p.seed, kCenterStreamBase + static_cast<std::uint64_t>(pair));
    for (auto& x : c) x = sign * p.center_scale * rs.normal();
    return c;
}

void check_theta(const Problem& p, const Vec& theta, const char* where) {
    if (static_cast<std::int64_t>(theta.size()) != p.d)
        throw std::invalid_argument(std::string(where) + ": dimension mismatch (theta has " +
                                    std::to_string(theta.size()) + ", problem has d=" +
                                    std::to_string(p.d) + ")");
}

struct MlpShape {
    std::int64_t p, h;
    std::int64_t w1_off = 0;
    std::int64_t b1_off() const { return h * p; }
    std::int64_t w2_off() const { return h * p + h; }
    std::int64_t b2_off() const { return h * p + 2 * h; }
    std::int64_t dim() const { return h * p + 2 * h + 1; }
};

double mlp_forward(const MlpShape& s, const Vec& theta, const double* x, Vec* act) {
    double out = theta[static_cast<std::size_t>(s.b2_off())];
    for (std::int64_t j = 0; j < s.h; ++j) {
        double u = theta[static_cast<std::size_t>(s.b1_off() + j)];
        const double* w1row = theta.data() + s.w1_off + j * s.p;
        for (std::int64_t k = 0; k < s.p; ++k) u += w1row[k] * x[k];
        const double a = std::tanh(u);
        if (act) (*act)[static_cast<std::size_t>(j)] = a;
        out += theta[static_cast<std::size_t>(s.w2_off() + j)] * a;
    }
    return out;
}

}  // namespace

const char* problem_kind_name(ProblemKind k) {
    switch (k) {
        case ProblemKind::noisy_quadratic: return "noisy_quadratic";
        case ProblemKind::logistic_finite_sum: return "logistic_finite_sum";
        case ProblemKind::mlp_synthetic: return "mlp_synthetic";
    }
    return "?";
}

ProblemKind problem_kind_from_name(const std::string& s) {
    if (s == "noisy_quadratic") return ProblemKind::noisy_quadratic;
    if (s == "logistic_finite_sum") return ProblemKind::logistic_finite_sum;
    if (s == "mlp_synthetic") return ProblemKind::mlp_synthetic;
    throw std::invalid_argument("unknown problem kind: " + s);
}

double Problem::per_example_loss(std::int64_t i, const Vec& theta) const {
    check_theta(*this, theta, "per_example_loss");
    if (i < 0 || i >= n) throw std::invalid_argument("per_example_loss: index out of range");
    switch (kind) {
        case ProblemKind::noisy_quadratic: {
            const Vec c = quad_center(*this, i);
            double s = 0.0;
            for (std::int64_t j = 0; j < d; ++j) {
                const double t = theta[static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)];
                // the per-example constant 0.5*lambda*c^2 is subtracted so the
                // average loss is exactly 0.5 * sum lambda * theta^2
                s += 0.5 * curvature[static_cast<std::size_t>(j)] *
                     (t * t - c[static_cast<std::size_t>(j)] * c[static_cast<std::size_t>(j)]);
            }
            return s;
        }
        case ProblemKind::logistic_finite_sum: {
            const double* x = features.data() + i * d;
            double z = 0.0;
            for (std::int64_t j = 0; j < d; ++j) z += x[j] * theta[static_cast<std::size_t>(j)];
            return softplus(z) - static_cast<double>(labels[static_cast<std::size_t>(i)]) * z;
        }
        case ProblemKind::mlp_synthetic: {
            const MlpShape s{input_dim, hidden};
            const double* x = inputs.data() + i * input_dim;
            const double r = mlp_forward(s, theta, x, nullptr) - targets[static_cast<std::size_t>(i)];
            return 0.5 * r * r;
        }
    }
    throw std::logic_error("unreachable");
}

void Problem::per_example_gradient_accum(std::int64_t i, const Vec& theta, double w,
                                         Vec& out) const {
    check_theta(*this, theta, "per_example_gradient");
    require_same_dim(theta, out, "per_example_gradient");
    if (i < 0 || i >= n) throw std::invalid_argument("per_example_gradient: index out of range");
    switch (kind) {
        case ProblemKind::noisy_quadratic: {
            const Vec c = quad_center(*this, i);
            for (std::int64_t j = 0; j < d; ++j)
                out[static_cast<std::size_t>(j)] +=
                    w * curvature[static_cast<std::size_t>(j)] *
                    (theta[static_cast<std::size_t>(j)] - c[static_cast<std::size_t>(j)]);
            return;
        }
        case ProblemKind::logistic_finite_sum: {
            const double* x = features.data() + i * d;
            double z = 0.0;
            for (std::int64_t j = 0; j < d; ++j) z += x[j] * theta[static_cast<std::size_t>(j)];
            const double r = sigmoid(z) - static_cast<double>(labels[static_cast<std::size_t>(i)]);
            for (std::int64_t j = 0; j < d; ++j) out[static_cast<std::size_t>(j)] += w * r * x[j];
            return;
        }
        case ProblemKind::mlp_synthetic: {
            const MlpShape s{input_dim, hidden};
            const double* x = inputs.data() + i * input_dim;
            Vec act(static_cast<std::size_t>(hidden));
            const double r = mlp_forward(s, theta, x, &act) - targets[static_cast<std::size_t>(i)];
            out[static_cast<std::size_t>(s.b2_off())] += w * r;
            for (std::int64_t j = 0; j < s.h; ++j) {
                const double a = act[static_cast<std::size_t>(j)];
                out[static_cast<std::size_t>(s.w2_off() + j)] += w * r * a;
                const double gu = r * theta[static_cast<std::size_t>(s.w2_off() + j)] * (1.0 - a * a);
                out[static_cast<std::size_t>(s.b1_off() + j)] += w * gu;
                double* gw1 = out.data() + s.w1_off + j * s.p;
                for (std::int64_t k = 0; k < s.p; ++k) gw1[k] += w * gu * x[k];
            }
            return;
        }
    }
    throw std::logic_error("unreachable");
}

Problem problem_from_json(const std::string& json_text) {
    json doc = json::parse(json_text);
    Problem p;
    p.kind = problem_kind_from_name(doc.at("kind").get<std::string>());
    p.n = doc.at("n").get<std::int64_t>();
    p.d = doc.at("d").get<std::int64_t>();
    p.seed = doc.value("seed", std::uint64_t{0});
    if (p.n < 1) throw std::invalid_argument("problem: n must be positive");
    if (p.d < 1) throw std::invalid_argument("problem: d must be positive");
    const json params = doc.value("params", json::object());

    RngStream gen(p.seed, kDataStream);
    switch (p.kind) {
        case ProblemKind::noisy_quadratic: {
            const double cmin = params.value("curvature_min", 1.0);
            const double cmax = params.value("curvature_max", cmin);
            if (cmin <= 0.0 || cmax < cmin)
                throw std::invalid_argument("problem: need 0 < curvature_min <= curvature_max");
            p.center_scale = params.value("center_scale", 0.0);
            p.curvature.resize(static_cast<std::size_t>(p.d));
            // log-spaced spectrum from cmin to cmax
            for (std::int64_t j = 0; j < p.d; ++j) {
                const double t = (p.d == 1) ? 0.0
                                            : static_cast<double>(j) / static_cast<double>(p.d - 1);
                p.curvature[static_cast<std::size_t>(j)] =
                    std::exp(std::log(cmin) + t * (std::log(cmax) - std::log(cmin)));
            }
            p.minimizer_hint = zeros(static_cast<std::size_t>(p.d));
            break;
        }
        case ProblemKind::logistic_finite_sum: {
            p.feature_scale = params.value("feature_scale", 1.0);
            if (p.feature_scale <= 0.0)
                throw std::invalid_argument("problem: feature_scale must be positive");
            p.features.resize(static_cast<std::size_t>(p.n * p.d));
            p.labels.resize(static_cast<std::size_t>(p.n));
            Vec theta_true(static_cast<std::size_t>(p.d));
            for (auto& t : theta_true) t = gen.normal();
            for (std::int64_t i = 0; i < p.n; ++i) {
                double z = 0.0;
                for (std::int64_t j = 0; j < p.d; ++j) {
                    const double x = p.feature_scale * gen.normal();
                    p.features[static_cast<std::size_t>(i * p.d + j)] = x;
                    z += x * theta_true[static_cast<std::size_t>(j)];
                }
                p.labels[static_cast<std::size_t>(i)] = (gen.uniform() < sigmoid(z)) ? 1 : 0;
            }
            break;
        }
        case ProblemKind::mlp_synthetic: {
            p.input_dim = params.value("input_dim", std::int64_t{4});
            p.hidden = params.value("hidden", std::int64_t{6});
            p.target_noise = params.value("target_noise", 0.1);
            if (p.input_dim < 1 || p.hidden < 1)
                throw std::invalid_argument("problem: input_dim and hidden must be positive");
            const MlpShape s{p.input_dim, p.hidden};
            if (p.d != s.dim())
                throw std::invalid_argument("problem: mlp d must equal hidden*(input_dim+2)+1 = " +
                                            std::to_string(s.dim()));
            Vec teacher(static_cast<std::size_t>(p.d));
            for (auto& t : teacher) t = gen.normal();
            p.inputs.resize(static_cast<std::size_t>(p.n * p.input_dim));
            p.targets.resize(static_cast<std::size_t>(p.n));
            for (std::int64_t i = 0; i < p.n; ++i) {
                double* x = p.inputs.data() + i * p.input_dim;
                for (std::int64_t k = 0; k < p.input_dim; ++k) x[k] = gen.normal();
                p.targets[static_cast<std::size_t>(i)] =
                    mlp_forward(s, teacher, x, nullptr) + p.target_noise * gen.normal();
            }
            break;
        }
    }
    return p;
}

std::string problem_to_json(const Problem& p) {
    json params;
    switch (p.kind) {
        case ProblemKind::noisy_quadratic:
            params["curvature_min"] = p.curvature.front();
            params["curvature_max"] = p.curvature.back();
            params["center_scale"] = p.center_scale;
            break;
        case ProblemKind::logistic_finite_sum:
            params["feature_scale"] = p.feature_scale;
            break;
        case ProblemKind::mlp_synthetic:
            params["input_dim"] = p.input_dim;
            params["hidden"] = p.hidden;
            params["target_noise"] = p.target_noise;
            break;
    }
    json doc{{"kind", problem_kind_name(p.kind)},
             {"n", p.n},
             {"d", p.d},
             {"seed", p.seed},
             {"params", params}};
    return doc.dump();
}

BatchIndices sample_batch(const Problem& p, std::int64_t b, RngStream& rng) {
    if (b < 1) throw std::invalid_argument("sample_batch: b must be positive");
    if (p.n < 1) throw std::invalid_argument("sample_batch: empty problem");
    BatchIndices out(static_cast<std::size_t>(b));
    for (auto& i : out)
        i = static_cast<std::int64_t>(rng.uniform_below(static_cast<std::uint64_t>(p.n)));
    return out;
}

EpochSampler::EpochSampler(std::int64_t n, RngStream rng) : n_(n), pos_(0), rng_(rng) {
    if (n < 1) throw std::invalid_argument("EpochSampler: n must be positive");
    order_.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) order_[static_cast<std::size_t>(i)] = i;
    reshuffle();
}

void EpochSampler::reshuffle() {
    // Fisher-Yates with the stream's own draws, independent of std::shuffle
    for (std::int64_t i = n_ - 1; i > 0; --i) {
        const auto j = static_cast<std::int64_t>(
            rng_.uniform_below(static_cast<std::uint64_t>(i + 1)));
        std::swap(order_[static_cast<std::size_t>(i)], order_[static_cast<std::size_t>(j)]);
    }
    pos_ = 0;
}

BatchIndices EpochSampler::next(std::int64_t b) {
    if (b < 1) throw std::invalid_argument("EpochSampler: b must be positive");
    BatchIndices out;
    out.reserve(static_cast<std::size_t>(b));
    while (static_cast<std::int64_t>(out.size()) < b) {
        if (pos_ >= n_) reshuffle();
        out.push_back(order_[static_cast<std::size_t>(pos_++)]);
    }
    return out;
}

Vec minibatch_gradient(const Problem& p, const Vec& theta, const BatchIndices& batch) {
    check_theta(p, theta, "minibatch_gradient");
    if (batch.empty()) throw std::invalid_argument("minibatch_gradient: empty batch");
    Vec g = zeros(theta.size());
    const double w = 1.0 / static_cast<double>(batch.size());
    for (const auto i : batch) p.per_example_gradient_accum(i, theta, w, g);
    return g;
}

Vec full_gradient(const Problem& p, const Vec& theta) {
    check_theta(p, theta, "full_gradient");
    if (p.kind == ProblemKind::noisy_quadratic) {
        // centers average to zero, so the full gradient is curvature (.) theta
        Vec g(theta.size());
        for (std::size_t j = 0; j < theta.size(); ++j) g[j] = p.curvature[j] * theta[j];
        return g;
    }
    Vec g = zeros(theta.size());
    const double w = 1.0 / static_cast<double>(p.n);
    for (std::int64_t i = 0; i < p.n; ++i) p.per_example_gradient_accum(i, theta, w, g);
    return g;
}

double full_loss(const Problem& p, const Vec& theta) {
    check_theta(p, theta, "full_loss");
    if (p.kind == ProblemKind::noisy_quadratic) {
        double s = 0.0;
        for (std::size_t j = 0; j < theta.size(); ++j)
            s += 0.5 * p.curvature[j] * theta[j] * theta[j];
        return s;
    }
    double s = 0.0;
    for (std::int64_t i = 0; i < p.n; ++i) s += p.per_example_loss(i, theta);
    return s / static_cast<double>(p.n);
}

Vec controlled_oracle_gradient(const Problem& p, const Vec& theta, double sigma2,
                               std::int64_t b, RngStream& rng) {
    if (sigma2 < 0.0) throw std::invalid_argument("controlled_oracle_gradient: sigma2 < 0");
    if (b < 1) throw std::invalid_argument("controlled_oracle_gradient: b must be positive");
    Vec g = full_gradient(p, theta);
    if (sigma2 == 0.0) return g;
    const double scale =
        std::sqrt(sigma2 / (static_cast<double>(b) * static_cast<double>(p.d)));
    for (auto& x : g) x += scale * rng.normal();
    return g;
}

}  // namespace critbatch
