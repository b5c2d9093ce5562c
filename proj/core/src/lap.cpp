#include "mlci/lap.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mlci/error.hpp"

namespace mlci {

CostMatrix::CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) throw InvalidInput("cost matrix data does not match its shape");
}

std::size_t Assignment::matched() const noexcept {
    std::size_t n = 0;
    for (const int c : row_to_col) n += c >= 0 ? 1 : 0;
    return n;
}

std::vector<int> solve_square_assignment(const CostMatrix& cost) {
    const std::size_t n = cost.rows();
    if (cost.cols() != n) throw InvalidInput("square assignment needs a square matrix");
    constexpr double inf = std::numeric_limits<double>::infinity();

    // Potentials u (rows) and v (cols), 1-based with a virtual column 0.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> owner(n + 1, 0), via(n + 1, 0);
    for (std::size_t row = 1; row <= n; ++row) {
        owner[0] = row;
        std::size_t col0 = 0;
        std::vector<double> dist(n + 1, inf);
        std::vector<char> done(n + 1, 0);
        do {
            done[col0] = 1;
            const std::size_t r0 = owner[col0];
            double delta = inf;
            std::size_t col1 = 0;
            for (std::size_t c = 1; c <= n; ++c) {
                if (done[c]) continue;
                const double reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if (reduced < dist[c]) {
                    dist[c] = reduced;
                    via[c] = col0;
                }
                if (dist[c] < delta) {
                    delta = dist[c];
                    col1 = c;
                }
            }
            if (col1 == 0) throw InvalidInput("assignment problem has no finite solution");
            for (std::size_t c = 0; c <= n; ++c) {
                if (done[c]) {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    dist[c] -= delta;
                }
            }
            col0 = col1;
        } while (owner[col0] != 0);
        do {
            const std::size_t prev = via[col0];
            owner[col0] = owner[prev];
            col0 = prev;
        } while (col0 != 0);
    }

    std::vector<int> row_to_col(n, -1);
    for (std::size_t c = 1; c <= n; ++c) {
        if (owner[c] != 0) row_to_col[owner[c] - 1] = static_cast<int>(c - 1);
    }
    return row_to_col;
}

Assignment lap_solve(const CostMatrix& cost, double no_assign_cost) {
    if (!std::isfinite(no_assign_cost) || no_assign_cost < 0.0) {
        throw InvalidInput("no_assign_cost must be finite and non-negative");
    }
    const std::size_t rows = cost.rows(), cols = cost.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (!std::isfinite(cost(r, c))) {
                throw InvalidInput("cost(" + std::to_string(r) + "," + std::to_string(c) + ") is not finite");
            }
        }
    }

    // [ cost          | diag(no_assign) ]
    // [ diag(no_ass.) | 0 (transpose)   ]
    constexpr double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = rows + cols;
    CostMatrix big(n, n, inf);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            big(r, c) = cost(r, c);
            big(rows + c, cols + r) = 0.0;
        }
        big(r, cols + r) = no_assign_cost;
    }
    for (std::size_t c = 0; c < cols; ++c) big(rows + c, c) = no_assign_cost;

    const std::vector<int> full = solve_square_assignment(big);

    Assignment out;
    out.row_to_col.assign(rows, -1);
    out.col_to_row.assign(cols, -1);
    for (std::size_t r = 0; r < rows; ++r) {
        const int c = full[r];
        if (c >= 0 && static_cast<std::size_t>(c) < cols) {
            out.row_to_col[r] = c;
            out.col_to_row[static_cast<std::size_t>(c)] = static_cast<int>(r);
        }
    }
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const int c = out.row_to_col[r];
        total += c >= 0 ? cost(r, static_cast<std::size_t>(c)) : no_assign_cost;
    }
    for (std::size_t c = 0; c < cols; ++c) {
        if (out.col_to_row[c] < 0) total += no_assign_cost;
    }
    out.total_cost = total;
    return out;
}

} // namespace mlci
