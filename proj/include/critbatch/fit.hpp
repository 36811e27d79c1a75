#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "critbatch/sweep.hpp"

namespace critbatch {

struct FitPoint {
    double b = 0.0;
    double k = 0.0;
};

/// Result of fitting K(b) = a b / (b - c). The pole estimate c_hat sits below
/// the smallest measured b by construction and b_star_hat = 2 c_hat.
struct FitResult {
    double a_hat = 0.0;
    double c_hat = 0.0;
    double b_star_hat = 0.0;
    double rel_rmse = 0.0;
    std::int64_t n_points = 0;
    bool degenerate = false;
    std::vector<FitPoint> points;  // per-b (b, median K) pairs entering the fit
};

/// Least squares on relative residuals (K_i - a b_i/(b_i - c))/K_i with the
/// conditionally optimal a in closed form and golden-section search for
/// c in (0, 0.999 min b). A c_hat pinned to either search boundary marks the
/// fit degenerate (pole unidentifiable).
FitResult fit_k_points(const std::vector<FitPoint>& points);

/// Aggregates reached records to per-b median K, then fits those points.
FitResult fit_k_model(const std::vector<SweepRecord>& records);

struct ArgminResult {
    std::int64_t b = 0;
    double sfo = 0.0;
};

/// Grid point with minimal median SFO over reached records; ties break toward
/// the smaller batch size.
ArgminResult empirical_argmin_sfo(const std::vector<SweepRecord>& records);

std::string fit_result_to_json(const FitResult& fit, const ArgminResult& argmin);

}  // namespace critbatch
