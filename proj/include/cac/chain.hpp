#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cac {

/// Raised when a chain has no unique stationary law or the iteration fails.
class ChainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-stochastic sparse matrix in CSR form.
class SparseChain {
public:
    SparseChain() = default;
    explicit SparseChain(std::size_t n) { row_ptr_.assign(n + 1, 0); }

    /// Rows must be appended in order.
    void add_row(std::span<const std::size_t> cols, std::span<const double> vals);

    std::size_t size() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    std::size_t nonzeros() const { return cols_.size(); }

    std::span<const std::size_t> cols(std::size_t row) const {
        return {cols_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
    }
    std::span<const double> vals(std::size_t row) const {
        return {vals_.data() + row_ptr_[row], row_ptr_[row + 1] - row_ptr_[row]};
    }

    double row_sum(std::size_t row) const;

    /// out = pi * P
    void left_multiply(std::span<const double> pi, std::span<double> out) const;

    static SparseChain from_dense(const std::vector<std::vector<double>>& rows);

private:
    std::vector<std::size_t> row_ptr_{0};
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
    std::size_t rows_added_ = 0;
};

/// Closed communicating classes (bottom strongly connected components).
std::vector<std::vector<std::size_t>> recurrent_classes(const SparseChain& chain);

struct StationaryOptions {
    double tolerance = 1e-10;       ///< L1 change between iterates
    double residual_bound = 1e-8;   ///< required ||pi P - pi||_1
    int max_iterations = 2000000;
    double laziness = 0.1;          ///< pi <- l pi + (1 - l) pi P; removes periodicity
};

/// Power iteration on the lazy chain. Throws ChainError on multiple recurrent
/// classes, non-convergence, or a residual above the bound.
std::vector<double> stationary_distribution(const SparseChain& chain,
                                            const StationaryOptions& options = {},
                                            std::span<const double> start = {});

double stationary_residual(const SparseChain& chain, std::span<const double> pi);

}  // namespace cac
