#include <iostream>

#include <CLI11.hpp>

#include "critbatch/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"critbatch: optimizer batch-size scaling curves, sweeps, and fits"};
    app.require_subcommand(1);

    critbatch::TheoryOptions theory_opt;
    auto* theory = app.add_subcommand(
        "theory", "Evaluate K(b), SFO complexity, and the critical batch size from constants");
    theory->add_option("--config", theory_opt.config_path, "theory config JSON")->required();
    theory->add_option("--out", theory_opt.out_dir, "output directory")->required();

    critbatch::SweepOptions sweep_opt;
    auto* sweep = app.add_subcommand(
        "sweep", "Run a batch-size sweep: steps to a loss threshold per (b, seed) cell");
    sweep->add_option("--config", sweep_opt.config_path, "sweep config JSON")->required();
    sweep->add_option("--out", sweep_opt.out_dir, "output directory")->required();
    double threshold = 0.0;
    std::int64_t max_epochs = 0;
    std::string seeds;
    auto* thr = sweep->add_option("--threshold", threshold, "override config threshold");
    auto* epochs = sweep->add_option("--max-epochs", max_epochs, "override config max_epochs");
    auto* seeds_opt = sweep->add_option("--seeds", seeds, "override seeds (comma separated)");
    sweep->add_option("--jobs", sweep_opt.jobs, "parallel cells")->default_val(1);
    sweep->add_flag("--timing", sweep_opt.timing, "emit measured wall_ms (not reproducible)");

    critbatch::FitOptions fit_opt;
    auto* fit = app.add_subcommand("fit", "Fit K(b) = a b / (b - c) to a sweep CSV");
    fit->add_option("--in", fit_opt.in_csv, "sweep CSV")->required();
    fit->add_option("--out", fit_opt.out_json, "fit result JSON")->required();

    critbatch::ReportOptions report_opt;
    auto* report = app.add_subcommand(
        "report", "Merge theory summary and fit into one plot-ready table");
    report->add_option("--theory", report_opt.theory_json, "theory summary JSON")->required();
    report->add_option("--fit", report_opt.fit_json, "fit result JSON")->required();
    report->add_option("--out", report_opt.out_csv, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (theory->parsed()) return critbatch::cmd_theory(theory_opt);
        if (sweep->parsed()) {
            if (thr->count()) sweep_opt.threshold = threshold;
            if (epochs->count()) sweep_opt.max_epochs = max_epochs;
            if (seeds_opt->count()) sweep_opt.seeds = seeds;
            return critbatch::cmd_sweep(sweep_opt);
        }
        if (fit->parsed()) return critbatch::cmd_fit(fit_opt);
        if (report->parsed()) return critbatch::cmd_report(report_opt);
    } catch (const std::exception& e) {
        std::cerr << "critbatch: " << e.what() << "\n";
        return critbatch::kExitFailure;
    }
    return critbatch::kExitFailure;
}
