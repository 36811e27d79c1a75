#include <doctest.h>

#include <cmath>

#include "critbatch/fit.hpp"
#include "critbatch/sweep.hpp"

using namespace critbatch;

namespace {

// 1-d quadratic f(t) = t^2/2 with a controlled oracle
SweepConfig quadratic_config(double sigma2, double threshold, double alpha = 0.1) {
    SweepConfig cfg;
    cfg.problem = problem_from_json(
        R"({"kind":"noisy_quadratic","n":64,"d":1,"seed":3,"params":{"curvature_min":1.0}})");
    cfg.optimizer.method = Method::sgd;
    cfg.optimizer.alpha = alpha;
    cfg.batch_grid = {1, 2, 4};
    cfg.threshold = threshold;
    cfg.max_epochs = 200;
    cfg.eval_every = 1;
    cfg.seeds = {1};
    cfg.oracle_mode = OracleMode::controlled;
    cfg.sigma2 = sigma2;
    cfg.theta0 = Vec{1.0};
    return cfg;
}

}  // namespace

TEST_CASE("noiseless quadratic crosses the threshold at the analytic step count") {
    // theta_k = 0.9^k from theta0 = 1: smallest k with 0.5 * 0.81^k <= 0.005 is 22
    auto cfg = quadratic_config(0.0, 0.005);
    const auto rec = run_to_threshold(cfg, 1, 1);
    CHECK(rec.status == RunStatus::reached);
    CHECK(rec.steps == 22);
    CHECK(rec.sfo == 22);
    CHECK(rec.final_loss <= 0.005);
}

TEST_CASE("threshold at or above the initial loss means zero steps") {
    auto cfg = quadratic_config(0.0, 0.6);  // f(theta0) = 0.5
    const auto rec = run_to_threshold(cfg, 1, 1);
    CHECK(rec.status == RunStatus::reached);
    CHECK(rec.steps == 0);
    CHECK(rec.sfo == 0);
}

TEST_CASE("noise floor above the threshold yields the unreached sentinel at the cap") {
    auto cfg = quadratic_config(1e4, 1e-6);
    cfg.max_epochs = 2;
    const auto rec = run_to_threshold(cfg, 1, 1);
    CHECK(rec.status == RunStatus::unreached);
    CHECK(rec.steps == 2 * 64);  // max_epochs * ceil(n/b)
    CHECK(rec.final_loss > 1e-6);
}

TEST_CASE("divergence is recorded, distinguishable from unreached") {
    auto cfg = quadratic_config(0.0, 1e-6, /*alpha=*/3.0);  // |1 - alpha| > 1 diverges
    const auto rec = run_to_threshold(cfg, 1, 1);
    CHECK(rec.status == RunStatus::diverged);
    CHECK(rec.steps >= 1);
}

TEST_CASE("epoch cap honors ceil(n/b)") {
    auto cfg = quadratic_config(1e4, 1e-9);
    cfg.problem = problem_from_json(
        R"({"kind":"noisy_quadratic","n":10,"d":1,"seed":3,"params":{"curvature_min":1.0}})");
    cfg.batch_grid = {1, 2, 3};
    cfg.max_epochs = 5;
    const auto rec = run_to_threshold(cfg, 3, 1);
    CHECK(rec.status == RunStatus::unreached);
    CHECK(rec.steps == 5 * 4);  // ceil(10/3) = 4 steps per epoch
}

TEST_CASE("noiseless sweep produces b-independent step counts") {
    auto cfg = quadratic_config(0.0, 0.005);
    cfg.seeds = {1, 2};
    const auto records = run_sweep(cfg);
    REQUIRE(records.size() == 6);  // 3 batch sizes x 2 seeds
    for (const auto& r : records) {
        CHECK(r.status == RunStatus::reached);
        CHECK(r.steps == records.front().steps);
        CHECK(r.sfo == r.steps * r.b);
    }
}

TEST_CASE("sweep cells are reproducible and parallel execution matches serial") {
    auto cfg = quadratic_config(0.5, 0.01);
    cfg.seeds = {1, 2, 3};
    const auto a = run_sweep(cfg, 1);
    const auto b = run_sweep(cfg, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].steps == b[i].steps);
        CHECK(a[i].final_loss == b[i].final_loss);
        CHECK(a[i].status == b[i].status);
    }
}

TEST_CASE("median steps do not increase with batch size under the controlled oracle") {
    SweepConfig cfg;
    cfg.problem = problem_from_json(
        R"({"kind":"noisy_quadratic","n":256,"d":5,"seed":5,"params":{"curvature_min":1.0}})");
    cfg.optimizer.method = Method::sgd;
    cfg.optimizer.alpha = 0.05;
    cfg.batch_grid = {1, 2, 4};
    cfg.threshold = 0.02;
    cfg.max_epochs = 200;
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.oracle_mode = OracleMode::controlled;
    cfg.sigma2 = 1.0;
    const auto aggs = aggregate_records(run_sweep(cfg));
    REQUIRE(aggs.size() == 3);
    for (const auto& a : aggs) CHECK(a.reached == 5);
    CHECK(aggs[1].median_steps <= aggs[0].median_steps);
    CHECK(aggs[2].median_steps <= aggs[1].median_steps);
}

TEST_CASE("csv round trip is byte exact") {
    auto cfg = quadratic_config(0.3, 0.02);
    cfg.seeds = {1, 2};
    const auto records = run_sweep(cfg);
    const std::string csv = records_to_csv(records);
    const auto parsed = records_from_csv(csv);
    CHECK(records_to_csv(parsed) == csv);
    REQUIRE(parsed.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(parsed[i].b == records[i].b);
        CHECK(parsed[i].steps == records[i].steps);
        CHECK(parsed[i].final_loss == records[i].final_loss);
        CHECK(parsed[i].seed == records[i].seed);
        CHECK(parsed[i].status == records[i].status);
    }
    CHECK_THROWS_AS(records_from_csv("bogus header\n"), std::invalid_argument);
}

TEST_CASE("vi metric trivial and brute-force values") {
    auto p = problem_from_json(
        R"({"kind":"noisy_quadratic","n":4,"d":2,"seed":1,"params":{"curvature_min":1.0}})");
    const Vec ref{0.3, -0.2};
    CHECK(vi_metric({ref}, ref, p) == doctest::Approx(0.0).epsilon(1e-15));

    // single point, f = ||theta||^2/2, ref = 0: the metric equals ||theta||^2
    const Vec theta{0.6, -0.8};
    CHECK(vi_metric({theta}, Vec{0.0, 0.0}, p) == doctest::Approx(1.0).epsilon(1e-12));

    RngStream rng(7, 7);
    std::vector<Vec> traj;
    for (int k = 0; k < 100; ++k) {
        Vec t(2);
        for (auto& x : t) x = rng.normal();
        traj.push_back(t);
    }
    double manual = 0.0;
    for (const auto& t : traj) {
        const Vec g = full_gradient(p, t);
        manual += g[0] * (t[0] - ref[0]) + g[1] * (t[1] - ref[1]);
    }
    manual /= 100.0;
    CHECK(vi_metric(traj, ref, p) == doctest::Approx(manual).epsilon(1e-12));
    CHECK_THROWS_AS(vi_metric({}, ref, p), std::invalid_argument);
}

TEST_CASE("bound-input estimators: noiseless, controlled, and geometry") {
    auto p = problem_from_json(
        R"({"kind":"noisy_quadratic","n":16,"d":4,"seed":9,"params":{"curvature_min":1.0}})");
    std::vector<Vec> traj{Vec{0.5, 0.0, 0.0, 0.0}, Vec{0.25, 0.1, 0.0, 0.0},
                          Vec{0.1, 0.05, 0.02, 0.0}};
    RngStream rng(10, 10);

    const auto noiseless = estimate_bound_inputs(traj, p, 4, 100,
                                                 make_controlled_oracle(p, 0.0, 4), rng);
    CHECK(noiseless.sigma2_hat == 0.0);
    CHECK(noiseless.G_hat == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(noiseless.dist_hat <= 1.0);  // trajectory stays inside the unit ball
    CHECK(noiseless.D_hat == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(noiseless.init_dist2_hat == doctest::Approx(0.25).epsilon(1e-12));

    const auto controlled = estimate_bound_inputs(traj, p, 4, 100000,
                                                  make_controlled_oracle(p, 1.0, 4), rng);
    CHECK(controlled.sigma2_hat == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("finite-sum variance estimator recovers the oracle-mode level") {
    auto p = problem_from_json(
        R"({"kind":"logistic_finite_sum","n":64,"d":5,"seed":12,"params":{}})");
    const Vec theta(5, 0.2);
    RngStream rng(11, 11);
    const std::int64_t b = 8;
    // reference: direct variance of the minibatch gradient around the mean
    const Vec mean = full_gradient(p, theta);
    double ref = 0.0;
    const int n_ref = 20000;
    for (int s = 0; s < n_ref; ++s) {
        const Vec g = minibatch_gradient(p, theta, sample_batch(p, b, rng));
        double d2 = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            const double dj = g[j] - mean[j];
            d2 += dj * dj;
        }
        ref += d2;
    }
    ref = ref / n_ref * static_cast<double>(b);

    const auto est = estimate_bound_inputs({theta}, p, b, 20000,
                                           make_minibatch_oracle(p, b), rng);
    CHECK(est.sigma2_hat == doctest::Approx(ref).epsilon(0.05));
}

TEST_CASE("trace capture records momentum norms and adam second-moment range") {
    SweepConfig cfg;
    cfg.problem = problem_from_json(
        R"({"kind":"noisy_quadratic","n":32,"d":3,"seed":2,"params":{"curvature_min":1.0}})");
    cfg.optimizer.method = Method::adam;
    cfg.optimizer.alpha = 0.01;
    cfg.optimizer.delta = 1e-8;
    cfg.batch_grid = {4};
    cfg.threshold = -1.0;  // never reached: run to the cap
    cfg.max_epochs = 3;
    cfg.seeds = {1};
    cfg.oracle_mode = OracleMode::controlled;
    cfg.sigma2 = 0.5;
    RunTrace trace;
    const auto rec = run_to_threshold(cfg, 4, 1, &trace);
    CHECK(rec.status == RunStatus::unreached);
    CHECK(trace.thetas.size() == static_cast<std::size_t>(rec.steps) + 1);
    CHECK(trace.m_norm_sq.size() == static_cast<std::size_t>(rec.steps));
    CHECK(trace.min_v >= 0.0);
    CHECK(trace.max_grad_sq_comp > 0.0);

    BoundEstimates est;
    apply_trace_stats(est, trace);
    CHECK(est.v_star_hat == trace.min_v);
    CHECK(est.M_hat == trace.max_grad_sq_comp);
}

TEST_CASE("sweep config json round trip and validation") {
    auto cfg = quadratic_config(1.0, 0.01);
    const auto cfg2 = sweep_config_from_json(sweep_config_to_json(cfg));
    CHECK(cfg2.threshold == cfg.threshold);
    CHECK(cfg2.batch_grid == cfg.batch_grid);
    CHECK(cfg2.sigma2 == cfg.sigma2);
    CHECK(cfg2.theta0.has_value());

    auto bad = cfg;
    bad.batch_grid = {4, 2};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.seeds = {};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = cfg;
    bad.oracle_mode = OracleMode::finite_sum;
    bad.batch_grid = {1, 128};  // exceeds n = 64
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("epoch shuffle with b = n reproduces the full gradient each step") {
    SweepConfig cfg;
    cfg.problem = problem_from_json(
        R"({"kind":"logistic_finite_sum","n":8,"d":3,"seed":4,"params":{}})");
    cfg.optimizer.method = Method::sgd;
    cfg.optimizer.alpha = 0.5;
    cfg.batch_grid = {8};
    cfg.threshold = -1.0;
    cfg.max_epochs = 4;
    cfg.seeds = {1};
    cfg.oracle_mode = OracleMode::finite_sum;
    cfg.sampling = SamplingMode::epoch_shuffle;
    cfg.theta0 = Vec{0.1, 0.2, -0.1};

    RunTrace trace;
    run_to_threshold(cfg, 8, 1, &trace);
    // replay: full-gradient descent from the same start
    Vec theta = *cfg.theta0;
    for (std::size_t k = 1; k < trace.thetas.size(); ++k) {
        const Vec g = full_gradient(cfg.problem, theta);
        for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= 0.5 * g[j];
        for (std::size_t j = 0; j < theta.size(); ++j)
            CHECK(trace.thetas[k][j] == doctest::Approx(theta[j]).epsilon(1e-12));
    }
}

TEST_CASE("aggregation censors batch sizes where most cells never reached") {
    std::vector<SweepRecord> records;
    auto add = [&](std::int64_t b, std::int64_t steps, RunStatus st, std::uint64_t seed) {
        SweepRecord r;
        r.method = Method::sgd;
        r.b = b;
        r.steps = steps;
        r.sfo = steps * b;
        r.seed = seed;
        r.status = st;
        records.push_back(r);
    };
    // b=2: only 1 of 5 reached -> the median is censored
    add(2, 9000, RunStatus::reached, 1);
    for (std::uint64_t s = 2; s <= 5; ++s) add(2, 20000, RunStatus::unreached, s);
    // b=4: 3 of 5 reached -> median well defined
    add(4, 100, RunStatus::reached, 1);
    add(4, 120, RunStatus::reached, 2);
    add(4, 140, RunStatus::reached, 3);
    add(4, 20000, RunStatus::unreached, 4);
    add(4, 50, RunStatus::diverged, 5);

    const auto aggs = aggregate_records(records);
    REQUIRE(aggs.size() == 2);
    CHECK(!aggs[0].has_median);
    CHECK(aggs[0].reached == 1);
    CHECK(aggs[1].has_median);
    CHECK(aggs[1].median_steps == doctest::Approx(120.0));
    CHECK(aggs[1].diverged == 1);

    // the censored cell contributes neither to the argmin nor to the fit
    const auto am = empirical_argmin_sfo(records);
    CHECK(am.b == 4);
}

TEST_CASE("steps roughly halve from b=2 to b=4 near the critical batch") {
    // same protocol as the scaling-law acceptance sweep, knee at b in [1, 2]
    SweepConfig cfg;
    cfg.problem = problem_from_json(
        R"({"kind":"noisy_quadratic","n":4096,"d":20,"seed":7,)"
        R"("params":{"curvature_min":0.0677745,"curvature_max":0.0677745}})");
    cfg.optimizer.method = Method::sgd;
    cfg.optimizer.alpha = 0.05;
    cfg.batch_grid = {2, 4};
    cfg.threshold = 4.62963e-3;
    cfg.max_epochs = 200;
    cfg.eval_every = 16;
    cfg.seeds = {10, 11, 12, 13, 14};
    cfg.oracle_mode = OracleMode::controlled;
    cfg.sigma2 = 1.0;
    const auto aggs = aggregate_records(run_sweep(cfg, 2));
    REQUIRE(aggs.size() == 2);
    REQUIRE(aggs[0].has_median);
    REQUIRE(aggs[1].has_median);
    const double half = 0.5 * aggs[0].median_steps;
    CHECK(std::abs(aggs[1].median_steps - half) <= 0.35 * half);
}

TEST_CASE("csv round trip preserves every status and nonfinite losses") {
    std::vector<SweepRecord> records(3);
    records[0].method = Method::adam;
    records[0].b = 4;
    records[0].steps = 17;
    records[0].sfo = 68;
    records[0].final_loss = 0.1250000000000001;
    records[0].seed = 9;
    records[0].status = RunStatus::reached;
    records[1] = records[0];
    records[1].status = RunStatus::unreached;
    records[1].final_loss = 3.75;
    records[2] = records[0];
    records[2].status = RunStatus::diverged;
    records[2].final_loss = std::numeric_limits<double>::infinity();

    const std::string csv = records_to_csv(records);
    const auto parsed = records_from_csv(csv);
    REQUIRE(parsed.size() == 3);
    CHECK(parsed[0].status == RunStatus::reached);
    CHECK(parsed[1].status == RunStatus::unreached);
    CHECK(parsed[2].status == RunStatus::diverged);
    CHECK(parsed[0].final_loss == records[0].final_loss);
    CHECK(std::isinf(parsed[2].final_loss));
    CHECK(records_to_csv(parsed) == csv);
}
