#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "critbatch/rng.hpp"
#include "critbatch/vec.hpp"

namespace critbatch {

enum class ProblemKind { noisy_quadratic, logistic_finite_sum, mlp_synthetic };

const char* problem_kind_name(ProblemKind k);
ProblemKind problem_kind_from_name(const std::string& s);

/// Finite-sum differentiable loss f(theta) = (1/n) sum_i loss_i(theta) with
/// per-example gradients. All evaluations are deterministic in theta.
struct Problem {
    ProblemKind kind = ProblemKind::noisy_quadratic;
    std::int64_t n = 0;
    std::int64_t d = 0;
    std::uint64_t seed = 0;

    // noisy_quadratic: per-coordinate curvature spectrum and the scale of the
    // per-example center spread. Centers come in +/- pairs so their mean is
    // exactly zero and f(theta) = 0.5 * sum_j curvature[j] * theta[j]^2.
    Vec curvature;
    double center_scale = 0.0;

    // logistic_finite_sum: row-major feature matrix (n x d), labels in {0,1}.
    Vec features;
    std::vector<int> labels;
    double feature_scale = 1.0;

    // mlp_synthetic: two-layer tanh regression net. theta packs
    // [W1 (hidden x input_dim), b1 (hidden), w2 (hidden), b2 (1)].
    std::int64_t input_dim = 0;
    std::int64_t hidden = 0;
    Vec inputs;   // row-major n x input_dim
    Vec targets;  // n
    double target_noise = 0.0;

    std::optional<Vec> minimizer_hint;

    double per_example_loss(std::int64_t i, const Vec& theta) const;
    void per_example_gradient_accum(std::int64_t i, const Vec& theta, double w,
                                    Vec& out) const;
};

/// Build a problem from its JSON document
/// {"kind": ..., "n": ..., "d": ..., "seed": ..., "params": {...}}.
Problem problem_from_json(const std::string& json_text);
std::string problem_to_json(const Problem& p);

using BatchIndices = std::vector<std::int64_t>;

/// b i.i.d. uniform draws over [0, n); duplicates permitted.
BatchIndices sample_batch(const Problem& p, std::int64_t b, RngStream& rng);

/// One pass over [0, n) in a seeded random order, dealt b indices at a time.
/// Reshuffles when a pass is exhausted. Off by default in sweeps.
class EpochSampler {
public:
    EpochSampler(std::int64_t n, RngStream rng);
    BatchIndices next(std::int64_t b);

private:
    std::int64_t n_;
    std::int64_t pos_;
    RngStream rng_;
    std::vector<std::int64_t> order_;
    void reshuffle();
};

Vec minibatch_gradient(const Problem& p, const Vec& theta, const BatchIndices& batch);
Vec full_gradient(const Problem& p, const Vec& theta);
double full_loss(const Problem& p, const Vec& theta);

/// Exact gradient plus isotropic Gaussian noise with E||noise||^2 = sigma2 / b
/// (per-coordinate variance sigma2 / (b * d)).
Vec controlled_oracle_gradient(const Problem& p, const Vec& theta, double sigma2,
                               std::int64_t b, RngStream& rng);

}  // namespace critbatch
