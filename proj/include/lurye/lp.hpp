#pragma once

// Small dense linear programs: feasibility of A x <= b, E x = f, x >= 0 by a
// two-phase tableau simplex with Bland's rule.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "lurye/error.hpp"

namespace lurye::lp {

struct Problem {
    std::size_t num_vars = 0;
    std::vector<std::vector<double>> A_le;  // rows of A x <= b
    std::vector<double> b_le;
    std::vector<std::vector<double>> A_eq;  // rows of E x = f
    std::vector<double> b_eq;
};

struct Result {
    bool feasible = false;
    std::vector<double> x;
    double infeasibility = 0.0;  // phase-one optimum (sum of artificials)
    std::size_t iterations = 0;
};

/// Phase one of the simplex method. Each row is brought to b >= 0, given a
/// slack (<= rows) and an artificial variable; the artificial sum is minimized.
[[nodiscard]] inline Result find_feasible(const Problem& p, double tol = 1e-10, std::size_t max_iter = 100000) {
    const std::size_t n = p.num_vars;
    const std::size_t m_le = p.A_le.size();
    const std::size_t m = m_le + p.A_eq.size();
    if (p.b_le.size() != m_le || p.b_eq.size() != p.A_eq.size())
        throw Error(ErrorCode::InvalidArgument, "constraint row and rhs counts differ");
    Result result;
    if (m == 0) {
        result.feasible = true;
        result.x.assign(n, 0.0);
        return result;
    }

    // Columns: x (n), slacks (m_le), artificials (m), rhs.
    const std::size_t cols = n + m_le + m + 1;
    const std::size_t rhs = cols - 1;
    std::vector<std::vector<double>> T(m + 1, std::vector<double>(cols, 0.0));
    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) {
        const bool le = i < m_le;
        const auto& row = le ? p.A_le[i] : p.A_eq[i - m_le];
        if (row.size() != n) throw Error(ErrorCode::InvalidArgument, "constraint row has the wrong length");
        double b = le ? p.b_le[i] : p.b_eq[i - m_le];
        const double sign = b < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) T[i][j] = sign * row[j];
        if (le) T[i][n + i] = sign;
        T[i][n + m_le + i] = 1.0;
        T[i][rhs] = sign * b;
        basis[i] = n + m_le + i;
    }
    // Objective row holds reduced costs of minimizing the artificial sum.
    auto& obj = T[m];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            if (j < n + m_le || j == rhs) obj[j] -= T[i][j];

    for (;;) {
        if (result.iterations++ > max_iter) throw Error(ErrorCode::InvalidArgument, "simplex iteration limit reached");
        std::optional<std::size_t> enter;
        for (std::size_t j = 0; j < rhs; ++j)
            if (obj[j] < -tol) {
                enter = j;
                break;
            }
        if (!enter) break;
        std::optional<std::size_t> leave;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            const double a = T[i][*enter];
            if (a > tol) {
                const double ratio = T[i][rhs] / a;
                if (ratio < best - tol || (std::abs(ratio - best) <= tol && leave && basis[i] < basis[*leave])) {
                    best = ratio;
                    leave = i;
                }
            }
        }
        if (!leave) break;  // unbounded direction cannot occur in phase one
        const std::size_t r = *leave;
        const double pivot = T[r][*enter];
        for (double& v : T[r]) v /= pivot;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == r) continue;
            const double f = T[i][*enter];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) T[i][j] -= f * T[r][j];
        }
        basis[r] = *enter;
    }

    result.infeasibility = -obj[rhs];
    result.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) result.x[basis[i]] = T[i][rhs];
    result.feasible = result.infeasibility <= 1e-9;
    return result;
}

}  // namespace lurye::lp
