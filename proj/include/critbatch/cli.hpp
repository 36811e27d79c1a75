#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace critbatch {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitInfeasibleEpsilon = 3;
inline constexpr int kExitDegenerateFit = 4;

struct TheoryOptions {
    std::string config_path;
    std::string out_dir;
};

struct SweepOptions {
    std::string config_path;
    std::string out_dir;
    std::optional<double> threshold;
    std::optional<std::int64_t> max_epochs;
    std::optional<std::string> seeds;  // comma-separated override
    int jobs = 1;
    bool timing = false;  // emit measured wall_ms instead of 0
};

struct FitOptions {
    std::string in_csv;
    std::string out_json;
};

struct ReportOptions {
    std::string theory_json;
    std::string fit_json;
    std::string out_csv;
};

int cmd_theory(const TheoryOptions& opt);
int cmd_sweep(const SweepOptions& opt);
int cmd_fit(const FitOptions& opt);
int cmd_report(const ReportOptions& opt);

}  // namespace critbatch
