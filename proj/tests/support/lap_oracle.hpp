#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "mlci/lap.hpp"

namespace mlci::test {

/// Exhaustive minimum over all partial matchings. The cost of a candidate is
/// summed in the solver's canonical order (rows in index order, then
/// unmatched columns) so dyadic inputs compare exactly.
inline double brute_force_lap(const CostMatrix& cost, double no_assign) {
    const std::size_t R = cost.rows(), C = cost.cols();
    std::vector<int> row_to_col(R, -1);
    std::vector<char> used(C, 0);
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t)> rec = [&](std::size_t r) {
        if (r == R) {
            double total = 0.0;
            for (std::size_t i = 0; i < R; ++i) {
                total += row_to_col[i] >= 0 ? cost(i, static_cast<std::size_t>(row_to_col[i])) : no_assign;
            }
            for (std::size_t c = 0; c < C; ++c) {
                if (!used[c]) total += no_assign;
            }
            best = std::min(best, total);
            return;
        }
        row_to_col[r] = -1;
        rec(r + 1);
        for (std::size_t c = 0; c < C; ++c) {
            if (used[c]) continue;
            used[c] = 1;
            row_to_col[r] = static_cast<int>(c);
            rec(r + 1);
            used[c] = 0;
        }
        row_to_col[r] = -1;
    };
    rec(0);
    return best;
}

} // namespace mlci::test
