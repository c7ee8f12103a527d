#include "cac/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cac {

void SparseChain::add_row(std::span<const std::size_t> cols, std::span<const double> vals) {
    if (rows_added_ + 1 >= row_ptr_.size()) {
        row_ptr_.push_back(0);
    }
    cols_.insert(cols_.end(), cols.begin(), cols.end());
    vals_.insert(vals_.end(), vals.begin(), vals.end());
    ++rows_added_;
    row_ptr_[rows_added_] = cols_.size();
}

double SparseChain::row_sum(std::size_t row) const {
    const auto v = vals(row);
    return std::accumulate(v.begin(), v.end(), 0.0);
}

void SparseChain::left_multiply(std::span<const double> pi, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
        const double w = pi[i];
        if (w == 0.0) continue;
        for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
            out[cols_[k]] += w * vals_[k];
        }
    }
}

SparseChain SparseChain::from_dense(const std::vector<std::vector<double>>& rows) {
    SparseChain chain(rows.size());
    for (const auto& r : rows) {
        if (r.size() != rows.size()) throw ChainError("from_dense: matrix is not square");
        if (std::abs(std::accumulate(r.begin(), r.end(), 0.0) - 1.0) > 1e-9) {
            throw ChainError("from_dense: row does not sum to 1");
        }
        std::vector<std::size_t> c;
        std::vector<double> v;
        for (std::size_t j = 0; j < r.size(); ++j) {
            if (r[j] != 0.0) {
                c.push_back(j);
                v.push_back(r[j]);
            }
        }
        chain.add_row(c, v);
    }
    return chain;
}

std::vector<std::vector<std::size_t>> recurrent_classes(const SparseChain& chain) {
    // Iterative Tarjan.
    const std::size_t n = chain.size();
    constexpr std::size_t unvisited = static_cast<std::size_t>(-1);
    std::vector<std::size_t> index(n, unvisited), low(n, 0), comp(n, unvisited);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::pair<std::size_t, std::size_t>> call;  // (node, next edge offset)
    std::size_t counter = 0, num_comp = 0;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            auto& [v, edge] = call.back();
            const auto cols = chain.cols(v);
            const auto vals = chain.vals(v);
            if (edge < cols.size()) {
                const std::size_t w = cols[edge];
                const double p = vals[edge];
                ++edge;
                if (p <= 0.0) continue;
                if (index[w] == unvisited) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            const std::size_t node = v;
            if (low[node] == index[node]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp[w] = num_comp;
                } while (w != node);
                ++num_comp;
            }
            call.pop_back();
            if (!call.empty()) {
                const std::size_t parent = call.back().first;
                low[parent] = std::min(low[parent], low[node]);
            }
        }
    }

    std::vector<bool> closed(num_comp, true);
    for (std::size_t v = 0; v < n; ++v) {
        const auto cols = chain.cols(v);
        const auto vals = chain.vals(v);
        for (std::size_t e = 0; e < cols.size(); ++e) {
            if (vals[e] > 0.0 && comp[cols[e]] != comp[v]) {
                closed[comp[v]] = false;
            }
        }
    }
    std::vector<std::vector<std::size_t>> classes(num_comp);
    for (std::size_t v = 0; v < n; ++v) {
        if (closed[comp[v]]) classes[comp[v]].push_back(v);
    }
    std::erase_if(classes, [](const auto& c) { return c.empty(); });
    std::sort(classes.begin(), classes.end());
    return classes;
}

double stationary_residual(const SparseChain& chain, std::span<const double> pi) {
    std::vector<double> next(chain.size());
    chain.left_multiply(pi, next);
    double r = 0.0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        r += std::abs(next[i] - pi[i]);
    }
    return r;
}

std::vector<double> stationary_distribution(const SparseChain& chain, const StationaryOptions& options,
                                            std::span<const double> start) {
    const std::size_t n = chain.size();
    if (n == 0) {
        throw ChainError("stationary_distribution: empty chain");
    }
    const auto classes = recurrent_classes(chain);
    if (classes.size() != 1) {
        throw ChainError("stationary_distribution: chain has " + std::to_string(classes.size()) +
                         " recurrent classes; the stationary law is not unique");
    }

    std::vector<double> pi(n, 0.0), next(n);
    if (start.size() == n) {
        std::copy(start.begin(), start.end(), pi.begin());
    } else {
        // Start on the recurrent class: transient states only lose mass.
        for (std::size_t s : classes.front()) {
            pi[s] = 1.0 / static_cast<double>(classes.front().size());
        }
    }

    const double lazy = options.laziness;
    for (int it = 0; it < options.max_iterations; ++it) {
        chain.left_multiply(pi, next);
        double change = 0.0, total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = lazy * pi[i] + (1.0 - lazy) * next[i];
            change += std::abs(v - pi[i]);
            next[i] = v;
            total += v;
        }
        for (auto& v : next) v /= total;
        pi.swap(next);
        if (change < options.tolerance) {
            const double residual = stationary_residual(chain, pi);
            if (residual >= options.residual_bound) {
                throw ChainError("stationary_distribution: residual " + std::to_string(residual) +
                                 " above bound after " + std::to_string(it + 1) + " iterations");
            }
            return pi;
        }
    }
    throw ChainError("stationary_distribution: power iteration did not converge in " +
                     std::to_string(options.max_iterations) + " iterations");
}

}  // namespace cac
