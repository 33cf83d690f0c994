#pragma once

#include <cmath>
#include <vector>

#include "collar/errors.hpp"

namespace collar {

/// Rows sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]; sub[0] and sup[n-1] are ignored.
struct Tridiagonal {
    std::vector<double> sub, diag, sup;

    explicit Tridiagonal(std::size_t n = 0) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
    std::size_t size() const noexcept { return diag.size(); }

    std::vector<double> multiply(const std::vector<double>& x) const {
        const auto n = size();
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            double v = diag[i] * x[i];
            if (i > 0) v += sub[i] * x[i - 1];
            if (i + 1 < n) v += sup[i] * x[i + 1];
            y[i] = v;
        }
        return y;
    }
};

/// Thomas algorithm. Stable for the diagonally dominant M-matrices produced here.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& m, std::vector<double> rhs) {
    const auto n = m.size();
    require(rhs.size() == n && n > 0, ErrorKind::solve, "tridiagonal system has mismatched sizes");
    std::vector<double> c(n);
    double pivot = m.diag[0];
    require(std::abs(pivot) > 0.0 && std::isfinite(pivot), ErrorKind::solve, "singular tridiagonal pivot");
    c[0] = m.sup[0] / pivot;
    rhs[0] /= pivot;
    for (std::size_t i = 1; i < n; ++i) {
        pivot = m.diag[i] - m.sub[i] * c[i - 1];
        require(std::abs(pivot) > 0.0 && std::isfinite(pivot), ErrorKind::solve, "singular tridiagonal pivot");
        c[i] = (i + 1 < n) ? m.sup[i] / pivot : 0.0;
        rhs[i] = (rhs[i] - m.sub[i] * rhs[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
    return rhs;
}

} // namespace collar
