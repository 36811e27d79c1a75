#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace critbatch {

// Dense parameter vector. Dimension is fixed for the lifetime of a run.
using Vec = std::vector<double>;

inline void require_same_dim(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
}

inline bool all_finite(const Vec& v) noexcept {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_finite(const Vec& v, const char* where) {
    if (!all_finite(v))
        throw std::domain_error(std::string(where) + ": nonfinite entry");
}

inline double dot(const Vec& a, const Vec& b) {
    require_same_dim(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(const Vec& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(norm_sq(a)); }

// y += alpha * x
inline void axpy(double alpha, const Vec& x, Vec& y) {
    require_same_dim(x, y, "axpy");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Vec zeros(std::size_t d) { return Vec(d, 0.0); }

}  // namespace critbatch
