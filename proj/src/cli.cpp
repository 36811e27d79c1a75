#include "critbatch/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "critbatch/fit.hpp"
#include "critbatch/io.hpp"
#include "critbatch/sweep.hpp"
#include "critbatch/theory.hpp"

namespace critbatch {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_path, const std::vector<std::string>& outputs,
                    const json& resolved_config) {
    json doc{{"command", command},
             {"config_path", config_path},
             {"output_paths", outputs},
             {"timestamp", utc_timestamp()},
             {"tool_version", kToolVersion},
             {"config", resolved_config}};
    write_file(path, doc.dump(2) + "\n");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok.empty()) continue;
        seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw std::invalid_argument("empty seed list: " + text);
    return seeds;
}

struct TheoryMethodPlan {
    Method method;
    ConstantsTriple triple;
};

}  // namespace

int cmd_theory(const TheoryOptions& opt) {
    json config;
    double epsilon = 0.0;
    std::vector<std::string> method_names;
    std::map<std::string, ConstantsTriple> triples;
    std::vector<double> explicit_grid;
    int grid_points = 200;
    try {
        config = json::parse(read_file(opt.config_path));
        epsilon = config.at("epsilon").get<double>();
        if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
        method_names =
            config.value("methods", std::vector<std::string>{"sgd", "momentum", "adam"});
        grid_points = config.value("grid_points", grid_points);
        if (grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
        if (config.contains("grid")) {
            explicit_grid = config.at("grid").get<std::vector<double>>();
            for (double b : explicit_grid)
                if (!(b >= 1.0)) throw std::invalid_argument("grid entries must be >= 1");
            std::sort(explicit_grid.begin(), explicit_grid.end());
        }
        std::optional<BoundConstants> bc;
        if (config.contains("constants"))
            bc = bound_constants_from_json(config.at("constants").dump());
        const json triples_doc = config.value("triples", json::object());
        for (const auto& name : method_names) {
            const Method m = method_from_name(name);
            if (triples_doc.contains(name)) {
                const auto t = triples_doc.at(name).get<std::vector<double>>();
                if (t.size() != 3) throw std::invalid_argument("triples entries need [C1,C2,C3]");
                if (!(t[0] > 0.0) || t[1] < 0.0 || !(t[2] > 0.0))
                    throw std::invalid_argument("triple for " + name + " out of range");
                triples[name] = ConstantsTriple{t[0], t[1], t[2], m};
            } else if (bc) {
                triples[name] = constants_for(m, *bc);
            } else {
                throw std::invalid_argument("no constants or triple given for method " + name);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "critbatch theory: config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    fs::create_directories(opt.out_dir);
    std::ostringstream curves;
    curves << "method,b,k,sfo,dk_db,dsfo_db\n";
    json summary_methods = json::object();
    int feasible = 0;
    for (const auto& name : method_names) {
        const ConstantsTriple& c = triples.at(name);
        if (!(epsilon > c.c3)) {
            summary_methods[name] = json{{"error", "infeasible_epsilon"}};
            std::cerr << "critbatch theory: " << name << ": infeasible epsilon (eps <= C3)\n";
            continue;
        }
        ++feasible;
        const double pole = c.c2 / (epsilon - c.c3);
        const double b_star = critical_batch(c, epsilon);
        std::vector<double> grid;
        if (!explicit_grid.empty()) {
            for (double b : explicit_grid)
                if (b > pole) grid.push_back(b);
        } else {
            // log-spaced from just above the pole to 1000 * b_star
            const double lo = std::max(1.05 * pole, 1e-12);
            const double hi = std::max(1000.0 * b_star, lo * 10.0);
            for (int i = 0; i < grid_points; ++i) {
                const double t = static_cast<double>(i) / static_cast<double>(grid_points - 1);
                grid.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
            }
            if (std::isfinite(b_star)) grid.push_back(b_star);
            std::sort(grid.begin(), grid.end());
        }
        for (double b : grid) {
            const double k = steps_K(c, epsilon, b);
            const double kb = sfo(c, epsilon, b);
            const auto der = derivative_checks(c, epsilon, b);
            curves << name << ',' << fmt17(b) << ',' << fmt17(k) << ',' << fmt17(kb) << ','
                   << fmt17(der.dK) << ',' << fmt17(der.dSFO) << '\n';
        }
        json entry{{"c1", c.c1}, {"c2", c.c2}, {"c3", c.c3}, {"b_star", b_star}};
        if (std::isfinite(b_star)) {
            entry["sfo_at_b_star"] = sfo_at_critical_batch(c, epsilon);
            entry["k_at_b_star"] = steps_K(c, epsilon, b_star);
        } else {
            entry["sfo_at_b_star"] = nullptr;
            entry["k_at_b_star"] = nullptr;
        }
        summary_methods[name] = entry;
    }

    json summary{{"epsilon", epsilon}, {"methods", summary_methods}};
    if (!explicit_grid.empty()) summary["grid"] = explicit_grid;

    const std::string curves_path = join_path(opt.out_dir, "curves.csv");
    const std::string summary_path = join_path(opt.out_dir, "summary.json");
    const std::string manifest_path = join_path(opt.out_dir, "manifest.json");
    write_file(curves_path, curves.str());
    write_file(summary_path, summary.dump(2) + "\n");
    write_manifest(manifest_path, "theory", opt.config_path,
                   {curves_path, summary_path, manifest_path}, config);
    return feasible > 0 ? kExitOk : kExitInfeasibleEpsilon;
}

int cmd_sweep(const SweepOptions& opt) {
    SweepConfig cfg;
    try {
        json doc = json::parse(read_file(opt.config_path));
        // precedence: CLI flag, then CRITBATCH_SEED, then the config file
        if (const char* env_seeds = std::getenv("CRITBATCH_SEED"))
            doc["seeds"] = parse_seed_list(env_seeds);
        if (opt.seeds) doc["seeds"] = parse_seed_list(*opt.seeds);
        if (opt.threshold) doc["threshold"] = *opt.threshold;
        if (opt.max_epochs) doc["max_epochs"] = *opt.max_epochs;
        cfg = sweep_config_from_json(doc.dump());
    } catch (const std::exception& e) {
        std::cerr << "critbatch sweep: config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    const auto records = run_sweep(cfg, opt.jobs);
    const auto aggs = aggregate_records(records);

    fs::create_directories(opt.out_dir);
    const std::string csv_path = join_path(opt.out_dir, "sweep.csv");
    const std::string agg_path = join_path(opt.out_dir, "aggregate.csv");
    const std::string manifest_path = join_path(opt.out_dir, "manifest.json");
    write_file(csv_path, records_to_csv(records, opt.timing));

    std::ostringstream agg_csv;
    agg_csv << "method,batch_size,median_steps,median_sfo,reached,unreached,diverged\n";
    const double nan = std::nan("");
    for (const auto& a : aggs)
        agg_csv << method_name(a.method) << ',' << a.b << ','
                << fmt17(a.has_median ? a.median_steps : nan) << ','
                << fmt17(a.has_median ? a.median_sfo : nan) << ',' << a.reached << ','
                << a.unreached << ',' << a.diverged << '\n';
    write_file(agg_path, agg_csv.str());

    write_manifest(manifest_path, "sweep", opt.config_path,
                   {csv_path, agg_path, manifest_path},
                   json::parse(sweep_config_to_json(cfg)));
    return kExitOk;
}

int cmd_fit(const FitOptions& opt) {
    std::vector<SweepRecord> records;
    try {
        records = records_from_csv(read_file(opt.in_csv));
    } catch (const std::exception& e) {
        std::cerr << "critbatch fit: input error: " << e.what() << "\n";
        return kExitConfigError;
    }
    FitResult fit;
    ArgminResult argmin;
    try {
        fit = fit_k_model(records);
        argmin = empirical_argmin_sfo(records);
    } catch (const std::exception& e) {
        std::cerr << "critbatch fit: " << e.what() << "\n";
        return kExitConfigError;
    }
    write_file(opt.out_json, fit_result_to_json(fit, argmin));
    if (fit.degenerate) {
        std::cerr << "critbatch fit: degenerate fit (pole at search boundary)\n";
        return kExitDegenerateFit;
    }
    return kExitOk;
}

int cmd_report(const ReportOptions& opt) {
    json summary, fitdoc;
    try {
        summary = json::parse(read_file(opt.theory_json));
        fitdoc = json::parse(read_file(opt.fit_json));
    } catch (const std::exception& e) {
        std::cerr << "critbatch report: input error: " << e.what() << "\n";
        return kExitConfigError;
    }
    if (!summary.contains("grid")) {
        std::cerr << "critbatch report: theory summary has no grid; rerun theory with an "
                     "explicit \"grid\" matching the sweep\n";
        return kExitConfigError;
    }
    const auto grid = summary.at("grid").get<std::vector<double>>();
    std::map<double, double> measured;  // b -> median K
    for (const auto& p : fitdoc.at("points"))
        measured[p.at("b").get<double>()] = p.at("k").get<double>();
    const double a = fitdoc.at("a").get<double>();
    const double c = fitdoc.at("c").get<double>();

    std::vector<double> rows;
    for (double b : grid)
        if (measured.count(b)) rows.push_back(b);
    if (rows.size() != grid.size() || rows.size() != measured.size())
        std::cerr << "critbatch report: batch grids differ (theory " << grid.size()
                  << ", measured " << measured.size() << ", intersection " << rows.size()
                  << "); using the intersection\n";
    if (rows.empty()) {
        std::cerr << "critbatch report: empty grid intersection\n";
        return kExitConfigError;
    }

    std::ostringstream out;
    out << "b,k_measured,k_fitted,sfo_measured,sfo_fitted\n";
    for (double b : rows) {
        const double k_meas = measured.at(b);
        const double k_fit = a * b / (b - c);
        out << fmt17(b) << ',' << fmt17(k_meas) << ',' << fmt17(k_fit) << ','
            << fmt17(k_meas * b) << ',' << fmt17(k_fit * b) << '\n';
    }
    write_file(opt.out_csv, out.str());
    return kExitOk;
}

}  // namespace critbatch
