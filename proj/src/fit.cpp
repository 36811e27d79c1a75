#include "critbatch/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "critbatch/io.hpp"

namespace critbatch {

namespace {

using nlohmann::json;

// Residual sum of squares profile in c, with the optimal a substituted.
// u_i = (b_i/(b_i - c)) / K_i; S(c) = min_a sum (1 - a u_i)^2 at a = su/suu.
double profile_rss(const std::vector<FitPoint>& pts, double c, double* a_out) {
    double su = 0.0, suu = 0.0;
    for (const auto& p : pts) {
        const double u = (p.b / (p.b - c)) / p.k;
        su += u;
        suu += u * u;
    }
    const double a = su / suu;
    if (a_out) *a_out = a;
    double s = 0.0;
    for (const auto& p : pts) {
        const double r = 1.0 - a * (p.b / (p.b - c)) / p.k;
        s += r * r;
    }
    return s;
}

}  // namespace

FitResult fit_k_points(const std::vector<FitPoint>& points) {
    std::vector<FitPoint> pts = points;
    std::sort(pts.begin(), pts.end(), [](const FitPoint& x, const FitPoint& y) { return x.b < y.b; });
    for (const auto& p : pts)
        if (!(p.b > 0.0) || !(p.k > 0.0))
            throw std::invalid_argument("fit_k_points: points must have positive b and K");
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        if (i == 0 || pts[i].b != pts[i - 1].b) ++distinct;
    if (distinct < 3)
        throw std::invalid_argument("fit_k_points: need at least 3 distinct batch sizes");

    const double b_min = pts.front().b;
    const double lo = 0.0;
    const double hi = 0.999 * b_min;

    // golden-section search; 200 iterations shrink the interval far below
    // any meaningful tolerance
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - invphi * (hi - lo);
    double x2 = lo + invphi * (hi - lo);
    double a = lo, b = hi;
    double f1 = profile_rss(pts, x1, nullptr);
    double f2 = profile_rss(pts, x2, nullptr);
    for (int it = 0; it < 200; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - invphi * (b - a);
            f1 = profile_rss(pts, x1, nullptr);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + invphi * (b - a);
            f2 = profile_rss(pts, x2, nullptr);
        }
    }
    const double c_hat = 0.5 * (a + b);

    FitResult out;
    double a_hat = 0.0;
    const double rss = profile_rss(pts, c_hat, &a_hat);
    out.a_hat = a_hat;
    out.c_hat = c_hat;
    out.b_star_hat = 2.0 * c_hat;
    out.rel_rmse = std::sqrt(rss / static_cast<double>(pts.size()));
    out.n_points = static_cast<std::int64_t>(pts.size());
    out.points = pts;
    // pole pinned to a search boundary: the model cannot identify it
    const double tol = 1e-6 * b_min;
    out.degenerate = (c_hat <= lo + tol) || (c_hat >= hi - tol);
    return out;
}

FitResult fit_k_model(const std::vector<SweepRecord>& records) {
    const auto aggs = aggregate_records(records);
    std::vector<FitPoint> pts;
    for (const auto& a : aggs)
        if (a.has_median && a.median_steps > 0.0)
            pts.push_back({static_cast<double>(a.b), a.median_steps});
    if (pts.size() < 3)
        throw std::invalid_argument("fit_k_model: need at least 3 reached batch sizes");
    return fit_k_points(pts);
}

ArgminResult empirical_argmin_sfo(const std::vector<SweepRecord>& records) {
    const auto aggs = aggregate_records(records);
    ArgminResult best;
    best.sfo = std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& a : aggs) {
        if (!a.has_median) continue;
        any = true;
        if (a.median_sfo < best.sfo) {  // strict: ties keep the smaller b
            best.sfo = a.median_sfo;
            best.b = a.b;
        }
    }
    if (!any) throw std::invalid_argument("empirical_argmin_sfo: no reached records");
    return best;
}

std::string fit_result_to_json(const FitResult& fit, const ArgminResult& argmin) {
    json pts = json::array();
    for (const auto& p : fit.points) pts.push_back({{"b", p.b}, {"k", p.k}});
    json doc{{"a", fit.a_hat},
             {"c", fit.c_hat},
             {"b_star", fit.b_star_hat},
             {"rel_rmse", fit.rel_rmse},
             {"n_points", fit.n_points},
             {"argmin_b", argmin.b},
             {"argmin_sfo", argmin.sfo},
             {"degenerate", fit.degenerate},
             {"points", pts}};
    return doc.dump(2) + "\n";
}

}  // namespace critbatch
