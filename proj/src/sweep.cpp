#include "critbatch/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "critbatch/io.hpp"

namespace critbatch {

namespace {

using nlohmann::json;

// Stream ids. theta0 and the controlled-oracle noise depend on the seed only,
// so every batch size of a given seed starts from the same point and sees the
// same noise sequence (the noise enters scaled by 1/sqrt(b)). Finite-sum index
// sampling consumes draws at a b-dependent rate and gets a per-cell stream.
constexpr std::uint64_t kInitStream = 0x7E7A0;
constexpr std::uint64_t kNoiseStream = 0x40153;
constexpr std::uint64_t kSampleStreamBase = 0xBA7C000;

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

const char* run_status_name(RunStatus s) {
    switch (s) {
        case RunStatus::reached: return "reached";
        case RunStatus::unreached: return "unreached";
        case RunStatus::diverged: return "diverged";
    }
    return "?";
}

RunStatus run_status_from_name(const std::string& s) {
    if (s == "reached") return RunStatus::reached;
    if (s == "unreached") return RunStatus::unreached;
    if (s == "diverged") return RunStatus::diverged;
    throw std::invalid_argument("unknown run status: " + s);
}

void SweepConfig::validate() const {
    optimizer.validate();
    if (batch_grid.empty()) throw std::invalid_argument("sweep: batch_grid is empty");
    for (std::size_t i = 0; i < batch_grid.size(); ++i) {
        if (batch_grid[i] < 1) throw std::invalid_argument("sweep: batch sizes must be positive");
        if (i > 0 && batch_grid[i] <= batch_grid[i - 1])
            throw std::invalid_argument("sweep: batch_grid must be strictly increasing");
        if (oracle_mode == OracleMode::finite_sum && batch_grid[i] > problem.n)
            throw std::invalid_argument("sweep: batch size exceeds n in finite_sum mode");
    }
    if (!std::isfinite(threshold)) throw std::invalid_argument("sweep: threshold must be finite");
    if (max_epochs < 1) throw std::invalid_argument("sweep: max_epochs must be positive");
    if (eval_every < 1) throw std::invalid_argument("sweep: eval_every must be positive");
    if (seeds.empty()) throw std::invalid_argument("sweep: seeds list is empty");
    if (oracle_mode == OracleMode::controlled && sigma2 < 0.0)
        throw std::invalid_argument("sweep: sigma2 must be >= 0");
    if (theta0 && static_cast<std::int64_t>(theta0->size()) != problem.d)
        throw std::invalid_argument("sweep: theta0 dimension mismatch");
}

SweepConfig sweep_config_from_json(const std::string& json_text) {
    json doc = json::parse(json_text);
    SweepConfig cfg;
    cfg.problem = problem_from_json(doc.at("problem").dump());
    cfg.optimizer = optimizer_config_from_json(doc.at("optimizer").dump());
    cfg.batch_grid = doc.at("batch_grid").get<std::vector<std::int64_t>>();
    cfg.threshold = doc.at("threshold").get<double>();
    cfg.max_epochs = doc.value("max_epochs", cfg.max_epochs);
    cfg.eval_every = doc.value("eval_every", cfg.eval_every);
    cfg.seeds = doc.value("seeds", std::vector<std::uint64_t>{});
    const std::string mode = doc.value("oracle_mode", std::string("finite_sum"));
    if (mode == "finite_sum") {
        cfg.oracle_mode = OracleMode::finite_sum;
    } else if (mode == "controlled") {
        cfg.oracle_mode = OracleMode::controlled;
    } else {
        throw std::invalid_argument("sweep: unknown oracle_mode " + mode);
    }
    cfg.sigma2 = doc.value("sigma2", cfg.sigma2);
    const std::string sampling = doc.value("sampling", std::string("with_replacement"));
    if (sampling == "with_replacement") {
        cfg.sampling = SamplingMode::with_replacement;
    } else if (sampling == "epoch_shuffle") {
        cfg.sampling = SamplingMode::epoch_shuffle;
    } else {
        throw std::invalid_argument("sweep: unknown sampling mode " + sampling);
    }
    cfg.init_scale = doc.value("init_scale", cfg.init_scale);
    if (doc.contains("theta0")) cfg.theta0 = doc.at("theta0").get<Vec>();
    cfg.validate();
    return cfg;
}

std::string sweep_config_to_json(const SweepConfig& cfg) {
    json doc;
    doc["problem"] = json::parse(problem_to_json(cfg.problem));
    doc["optimizer"] = json::parse(optimizer_config_to_json(cfg.optimizer));
    doc["batch_grid"] = cfg.batch_grid;
    doc["threshold"] = cfg.threshold;
    doc["max_epochs"] = cfg.max_epochs;
    doc["eval_every"] = cfg.eval_every;
    doc["seeds"] = cfg.seeds;
    doc["oracle_mode"] = cfg.oracle_mode == OracleMode::controlled ? "controlled" : "finite_sum";
    doc["sigma2"] = cfg.sigma2;
    doc["sampling"] =
        cfg.sampling == SamplingMode::epoch_shuffle ? "epoch_shuffle" : "with_replacement";
    doc["init_scale"] = cfg.init_scale;
    if (cfg.theta0) doc["theta0"] = *cfg.theta0;
    return doc.dump();
}

GradOracle make_minibatch_oracle(const Problem& p, std::int64_t b) {
    return [&p, b](const Vec& theta, RngStream& rng) {
        const BatchIndices batch = sample_batch(p, b, rng);
        return minibatch_gradient(p, theta, batch);
    };
}

GradOracle make_controlled_oracle(const Problem& p, double sigma2, std::int64_t b) {
    return [&p, sigma2, b](const Vec& theta, RngStream& rng) {
        return controlled_oracle_gradient(p, theta, sigma2, b, rng);
    };
}

SweepRecord run_to_threshold(const SweepConfig& cfg, std::int64_t b, std::uint64_t seed,
                             RunTrace* trace) {
    cfg.validate();
    if (b < 1) throw std::invalid_argument("run_to_threshold: b must be positive");
    const auto t_start = std::chrono::steady_clock::now();

    const Problem& p = cfg.problem;
    Vec theta0;
    if (cfg.theta0) {
        theta0 = *cfg.theta0;
    } else {
        RngStream init_rng(seed, kInitStream);
        theta0.resize(static_cast<std::size_t>(p.d));
        for (auto& x : theta0) x = cfg.init_scale * init_rng.normal();
    }

    const std::int64_t steps_per_epoch = (p.n + b - 1) / b;
    const std::int64_t cap = cfg.max_epochs * steps_per_epoch;

    RngStream cell_rng(seed, cfg.oracle_mode == OracleMode::controlled
                                 ? kNoiseStream
                                 : kSampleStreamBase + static_cast<std::uint64_t>(b));
    std::optional<EpochSampler> epoch_sampler;
    if (cfg.oracle_mode == OracleMode::finite_sum && cfg.sampling == SamplingMode::epoch_shuffle)
        epoch_sampler.emplace(p.n, cell_rng);

    OptimizerState state = OptimizerState::init(std::move(theta0));

    SweepRecord rec;
    rec.method = cfg.optimizer.method;
    rec.b = b;
    rec.seed = seed;

    auto capture = [&](std::int64_t step) {
        if (!trace) return;
        if (step % trace->capture_every != 0) return;
        trace->thetas.push_back(state.theta);
        trace->losses.push_back(full_loss(p, state.theta));
    };

    auto finish = [&](std::int64_t steps, double loss, RunStatus status) {
        rec.steps = steps;
        rec.sfo = steps * b;
        rec.final_loss = loss;
        rec.status = status;
        rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t_start)
                          .count();
        return rec;
    };

    double loss = full_loss(p, state.theta);
    capture(0);
    if (loss <= cfg.threshold) return finish(0, loss, RunStatus::reached);

    double last_loss = loss;
    for (std::int64_t step = 1; step <= cap; ++step) {
        Vec grad;
        try {
            if (cfg.oracle_mode == OracleMode::controlled) {
                grad = controlled_oracle_gradient(p, state.theta, cfg.sigma2, b, cell_rng);
            } else if (epoch_sampler) {
                grad = minibatch_gradient(p, state.theta, epoch_sampler->next(b));
            } else {
                grad = minibatch_gradient(p, state.theta, sample_batch(p, b, cell_rng));
            }
            state = optimizer_step(state, grad, cfg.optimizer);
        } catch (const std::domain_error&) {
            // nonfinite gradient or update: the run has diverged
            return finish(step, last_loss, RunStatus::diverged);
        }

        if (trace) {
            trace->m_norm_sq.push_back(norm_sq(state.m));
            for (double g : grad)
                trace->max_grad_sq_comp = std::max(trace->max_grad_sq_comp, g * g);
            if (cfg.optimizer.method == Method::adam)
                for (double v : state.v) trace->min_v = std::min(trace->min_v, v);
        }

        if (step % cfg.eval_every == 0 || step == cap) {
            loss = full_loss(p, state.theta);
            capture(step);
            if (!std::isfinite(loss)) return finish(step, loss, RunStatus::diverged);
            last_loss = loss;
            if (loss <= cfg.threshold) return finish(step, loss, RunStatus::reached);
        } else {
            capture(step);
        }
    }
    return finish(cap, last_loss, RunStatus::unreached);
}

std::vector<SweepRecord> run_sweep(const SweepConfig& cfg, int jobs) {
    cfg.validate();
    const std::size_t nb = cfg.batch_grid.size();
    const std::size_t ns = cfg.seeds.size();
    std::vector<SweepRecord> records(nb * ns);

    auto run_cell = [&](std::size_t idx) {
        const std::int64_t b = cfg.batch_grid[idx / ns];
        const std::uint64_t seed = cfg.seeds[idx % ns];
        records[idx] = run_to_threshold(cfg, b, seed);
    };

    if (jobs <= 1) {
        for (std::size_t i = 0; i < records.size(); ++i) run_cell(i);
        return records;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1))
            run_cell(i);
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(jobs, static_cast<int>(records.size()));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    return records;
}

std::vector<BatchAggregate> aggregate_records(const std::vector<SweepRecord>& records) {
    std::vector<std::int64_t> bs;
    for (const auto& r : records)
        if (std::find(bs.begin(), bs.end(), r.b) == bs.end()) bs.push_back(r.b);
    std::sort(bs.begin(), bs.end());

    std::vector<BatchAggregate> out;
    out.reserve(bs.size());
    for (const auto b : bs) {
        BatchAggregate agg;
        agg.b = b;
        std::vector<double> ks, sfos;
        for (const auto& r : records) {
            if (r.b != b) continue;
            agg.method = r.method;
            switch (r.status) {
                case RunStatus::reached:
                    ++agg.reached;
                    ks.push_back(static_cast<double>(r.steps));
                    sfos.push_back(static_cast<double>(r.sfo));
                    break;
                case RunStatus::unreached: ++agg.unreached; break;
                case RunStatus::diverged: ++agg.diverged; break;
            }
        }
        const int total = agg.reached + agg.unreached + agg.diverged;
        agg.has_median = agg.reached > 0 && 2 * agg.reached > total;
        if (agg.has_median) {
            agg.median_steps = median_of(ks);
            agg.median_sfo = median_of(sfos);
        }
        out.push_back(agg);
    }
    return out;
}

double vi_metric(const std::vector<Vec>& trajectory, const Vec& theta_ref, const Problem& p) {
    if (trajectory.empty()) throw std::invalid_argument("vi_metric: empty trajectory");
    double s = 0.0;
    Vec diff(theta_ref.size());
    for (const auto& theta : trajectory) {
        require_same_dim(theta, theta_ref, "vi_metric");
        const Vec g = full_gradient(p, theta);
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = theta[i] - theta_ref[i];
        s += dot(g, diff);
    }
    return s / static_cast<double>(trajectory.size());
}

BoundEstimates estimate_bound_inputs(const std::vector<Vec>& trajectory, const Problem& p,
                                     std::int64_t b, std::int64_t num_var_samples,
                                     const GradOracle& oracle, RngStream& rng,
                                     const Vec* theta_ref) {
    if (trajectory.empty()) throw std::invalid_argument("estimate_bound_inputs: empty trajectory");
    if (b < 1) throw std::invalid_argument("estimate_bound_inputs: b must be positive");

    const Vec& ref = theta_ref               ? *theta_ref
                     : p.minimizer_hint      ? *p.minimizer_hint
                                             : trajectory.back();

    BoundEstimates est;
    for (const auto& theta : trajectory) {
        est.G_hat = std::max(est.G_hat, norm(full_gradient(p, theta)));
        double d2 = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double di = theta[i] - ref[i];
            d2 += di * di;
            est.D_hat = std::max(est.D_hat, di * di);
        }
        est.dist_hat = std::max(est.dist_hat, std::sqrt(d2));
    }
    {
        double d2 = 0.0;
        for (std::size_t i = 0; i < trajectory.front().size(); ++i) {
            const double di = trajectory.front()[i] - ref[i];
            d2 += di * di;
        }
        est.init_dist2_hat = d2;
    }

    double var_sum = 0.0;
    for (std::int64_t s = 0; s < num_var_samples; ++s) {
        const Vec& theta = trajectory[static_cast<std::size_t>(s) % trajectory.size()];
        const Vec exact = full_gradient(p, theta);
        const Vec g = oracle(theta, rng);
        double d2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double di = g[i] - exact[i];
            d2 += di * di;
            est.M_hat = std::max(est.M_hat, g[i] * g[i]);
        }
        var_sum += d2;
    }
    if (num_var_samples > 0)
        est.sigma2_hat = static_cast<double>(b) * var_sum / static_cast<double>(num_var_samples);
    return est;
}

void apply_trace_stats(BoundEstimates& est, const RunTrace& trace) {
    est.M_hat = std::max(est.M_hat, trace.max_grad_sq_comp);
    if (std::isfinite(trace.min_v)) est.v_star_hat = trace.min_v;
}

std::string records_to_csv(const std::vector<SweepRecord>& records, bool include_timing) {
    std::ostringstream out;
    out << "method,batch_size,steps,sfo,final_loss,seed,status,wall_ms\n";
    for (const auto& r : records) {
        out << method_name(r.method) << ',' << r.b << ',' << r.steps << ',' << r.sfo << ','
            << fmt17(r.final_loss) << ',' << r.seed << ',' << run_status_name(r.status) << ','
            << (include_timing ? r.wall_ms : 0) << '\n';
    }
    return out.str();
}

std::vector<SweepRecord> records_from_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("records_from_csv: empty input");
    if (line != "method,batch_size,steps,sfo,final_loss,seed,status,wall_ms")
        throw std::invalid_argument("records_from_csv: unexpected header: " + line);
    std::vector<SweepRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 8)
            throw std::invalid_argument("records_from_csv: line " + std::to_string(lineno) +
                                        ": expected 8 fields, got " + std::to_string(f.size()));
        SweepRecord r;
        r.method = method_from_name(f[0]);
        r.b = std::stoll(f[1]);
        r.steps = std::stoll(f[2]);
        r.sfo = std::stoll(f[3]);
        r.final_loss = parse_double(f[4]);
        r.seed = std::stoull(f[5]);
        r.status = run_status_from_name(f[6]);
        r.wall_ms = std::stoll(f[7]);
        records.push_back(r);
    }
    return records;
}

}  // namespace critbatch
