#pragma once

#include <cstddef>
#include <vector>

namespace mlci {

/// Dense row-major cost matrix.
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Partial matching of rows to columns; -1 marks "not assigned".
struct Assignment {
    std::vector<int> row_to_col;
    std::vector<int> col_to_row;
    /// Matched costs summed over rows in index order, each unmatched row
    /// adding no_assign_cost, then unmatched columns in index order.
    double total_cost = 0.0;

    std::size_t matched() const noexcept;
};

/// Globally optimal partial assignment where every unmatched row and every
/// unmatched column costs `no_assign_cost`. Solved exactly on the
/// (R+C) x (R+C) augmented problem with a shortest-augmenting-path
/// Hungarian method; ties go to the lowest row, then lowest column, in scan
/// order. InvalidInput on non-finite costs or a negative no_assign_cost.
Assignment lap_solve(const CostMatrix& cost, double no_assign_cost);

/// Square assignment (every row to a distinct column) minimizing the sum.
/// Entries may be +infinity to forbid a pair; a feasible finite assignment
/// must exist. Returns row_to_col.
std::vector<int> solve_square_assignment(const CostMatrix& cost);

} // namespace mlci
