#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "critbatch/optimizer.hpp"
#include "critbatch/problem.hpp"

namespace critbatch {

enum class OracleMode { finite_sum, controlled };
enum class SamplingMode { with_replacement, epoch_shuffle };
enum class RunStatus { reached, unreached, diverged };

const char* run_status_name(RunStatus s);
RunStatus run_status_from_name(const std::string& s);

struct SweepConfig {
    Problem problem;
    OptimizerConfig optimizer;
    std::vector<std::int64_t> batch_grid;  // strictly increasing
    double threshold = 0.1;
    std::int64_t max_epochs = 200;  // cap: max_epochs * ceil(n / b) steps
    std::int64_t eval_every = 1;
    std::vector<std::uint64_t> seeds;
    OracleMode oracle_mode = OracleMode::finite_sum;
    double sigma2 = 0.0;  // controlled-oracle noise level
    SamplingMode sampling = SamplingMode::with_replacement;
    double init_scale = 0.5;          // theta0 ~ init_scale * N(0, I), per seed
    std::optional<Vec> theta0;        // fixed initial point override

    void validate() const;
};

SweepConfig sweep_config_from_json(const std::string& json_text);
std::string sweep_config_to_json(const SweepConfig& cfg);

/// One measured cell of the (optimizer, batch size) sweep.
struct SweepRecord {
    Method method = Method::sgd;
    std::int64_t b = 0;
    std::int64_t steps = 0;  // K when reached, executed steps otherwise
    std::int64_t sfo = 0;    // steps * b
    double final_loss = 0.0;
    std::uint64_t seed = 0;
    RunStatus status = RunStatus::unreached;
    std::int64_t wall_ms = 0;
};

/// Optional per-run capture for diagnostics and estimators.
struct RunTrace {
    std::int64_t capture_every = 1;
    std::vector<Vec> thetas;          // captured iterates, theta_0 first
    std::vector<double> losses;       // full loss at captured iterates
    std::vector<double> m_norm_sq;    // ||m_k||^2 after every step
    double max_grad_sq_comp = 0.0;    // max over steps and coords of g^2
    double min_v = std::numeric_limits<double>::infinity();  // adam second moment
};

/// Run one cell: seeded theta0, configured oracle, step until full loss
/// crosses cfg.threshold or the epoch cap max_epochs * ceil(n/b) elapses.
/// K counts optimizer steps and is checked at eval_every boundaries (and at
/// the cap), with step 0 included.
SweepRecord run_to_threshold(const SweepConfig& cfg, std::int64_t b, std::uint64_t seed,
                             RunTrace* trace = nullptr);

/// All (b, seed) cells, in batch-grid-major order. Cells are independent;
/// jobs > 1 runs them on a small thread pool with identical results.
std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, int jobs = 1);

struct BatchAggregate {
    Method method = Method::sgd;
    std::int64_t b = 0;
    double median_steps = 0.0;  // defined only when has_median
    double median_sfo = 0.0;
    int reached = 0;
    int unreached = 0;
    int diverged = 0;
    // a median over seeds is an observed order statistic only when a majority
    // of the cells reached; otherwise it is censored from above
    bool has_median = false;
};

/// Per-b medians over reached records; unreached and diverged cells are
/// counted but never enter the medians, and a batch size whose median is
/// censored (fewer than half its cells reached) carries no median at all.
std::vector<BatchAggregate> aggregate_records(const std::vector<SweepRecord>& records);

/// Empirical performance measure (1/K) sum_k grad f(theta_k)^T (theta_k - ref).
double vi_metric(const std::vector<Vec>& trajectory, const Vec& theta_ref, const Problem& p);

/// Stochastic gradient source for a fixed batch size.
using GradOracle = std::function<Vec(const Vec& theta, RngStream& rng)>;

GradOracle make_minibatch_oracle(const Problem& p, std::int64_t b);
GradOracle make_controlled_oracle(const Problem& p, double sigma2, std::int64_t b);

struct BoundEstimates {
    double G_hat = 0.0;        // max_k ||grad f(theta_k)||
    double sigma2_hat = 0.0;   // b * mean ||g - grad f||^2 over resamples
    double M_hat = 0.0;        // max sampled squared gradient component
    double v_star_hat = 0.0;   // min adam second-moment entry (0 without a trace)
    double dist_hat = 0.0;     // max_k ||theta_k - ref||
    double D_hat = 0.0;        // max_k max_i (theta_k,i - ref_i)^2
    double init_dist2_hat = 0.0;
};

/// Empirical estimators for the bound inputs, measured on a trajectory.
/// The reference point defaults to the problem's known minimizer when there
/// is one and to the last iterate otherwise.
BoundEstimates estimate_bound_inputs(const std::vector<Vec>& trajectory, const Problem& p,
                                     std::int64_t b, std::int64_t num_var_samples,
                                     const GradOracle& oracle, RngStream& rng,
                                     const Vec* theta_ref = nullptr);

/// Fold exact per-run statistics from a trace into the estimates.
void apply_trace_stats(BoundEstimates& est, const RunTrace& trace);

/// CSV round trip; header is exactly
/// method,batch_size,steps,sfo,final_loss,seed,status,wall_ms
std::string records_to_csv(const std::vector<SweepRecord>& records, bool include_timing = false);
std::vector<SweepRecord> records_from_csv(const std::string& csv_text);

}  // namespace critbatch
