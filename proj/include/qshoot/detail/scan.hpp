#pragma once

#include "qshoot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <optional>
#include <string>
#include <vector>

namespace qshoot::detail {

/// Lazily evaluated node counts on the scan grid E_j = e_min + j*step, last point clamped to
/// e_max. Blocks of up to `threads` energies are evaluated concurrently; counts are stored in
/// grid order, so every query sees the same answer whatever the thread count.
template <typename Count>
class EnergyScan {
public:
    EnergyScan(const ShootingConfig& cfg, Count count)
        : cfg_(cfg), count_(std::move(count))
    {
        cfg_.validate();
        const double span = (cfg_.e_max - cfg_.e_min) / cfg_.scan_step;
        size_ = static_cast<std::size_t>(std::ceil(span - 1e-12)) + 1;
        size_ = std::max<std::size_t>(size_, 2);
    }

    double energy(std::size_t j) const
    {
        if (j + 1 >= size_)
            return cfg_.e_max;
        return cfg_.e_min + static_cast<double>(j) * cfg_.scan_step;
    }

    /// First grid interval with count(lower) <= n < count(upper); nullopt when none exists.
    std::optional<Bracket> find(std::size_t n)
    {
        std::size_t j = 0;
        while (true) {
            while (j >= counts_.size()) {
                if (counts_.size() == size_)
                    return std::nullopt;
                extend();
            }
            if (counts_[j] > n) {
                if (j == 0)
                    return std::nullopt;
                return Bracket{energy(j - 1), energy(j), counts_[j - 1], counts_[j]};
            }
            ++j;
        }
    }

private:
    void extend()
    {
        const std::size_t start = counts_.size();
        const std::size_t block = std::min<std::size_t>(std::max(1u, cfg_.threads), size_ - start);
        if (block == 1) {
            counts_.push_back(count_(energy(start)));
            return;
        }
        std::vector<std::future<std::size_t>> jobs;
        jobs.reserve(block);
        for (std::size_t k = 0; k < block; ++k)
            jobs.push_back(std::async(std::launch::async, [this, e = energy(start + k)] { return count_(e); }));
        for (auto& job : jobs)
            counts_.push_back(job.get());
    }

    ShootingConfig cfg_;
    Count count_;
    std::size_t size_ = 0;
    std::vector<std::size_t> counts_;
};

template <typename Count>
Bracket scan_for_transition(const ShootingConfig& cfg, int n, Count&& count)
{
    EnergyScan scan(cfg, std::forward<Count>(count));
    auto b = scan.find(static_cast<std::size_t>(n));
    if (!b)
        throw NotBracketedError("eigenvalue not bracketed: no node-count transition for n = " + std::to_string(n)
                                + " in [" + std::to_string(cfg.e_min) + ", " + std::to_string(cfg.e_max) + "]");
    return *b;
}

/// Bisects the node-count transition n -> n+1 inside `b` down to cfg.bisect_tol.
template <typename Count>
Bracket bisect_transition(const ShootingConfig& cfg, int n, Bracket b, Count&& count, int& iterations)
{
    iterations = 0;
    const auto target = static_cast<std::size_t>(n);
    while (b.upper - b.lower > cfg.bisect_tol) {
        if (iterations >= cfg.max_bisect)
            throw ConvergenceError("bisection did not reach tolerance " + std::to_string(cfg.bisect_tol) + " in "
                                       + std::to_string(cfg.max_bisect) + " steps",
                                   b.lower, b.upper);
        const double mid = 0.5 * (b.lower + b.upper);
        if (mid <= b.lower || mid >= b.upper)
            break;  // interval is down to adjacent doubles
        const std::size_t c = count(mid);
        if (c <= target) {
            b.lower = mid;
            b.lower_nodes = c;
        } else {
            b.upper = mid;
            b.upper_nodes = c;
        }
        ++iterations;
    }
    return b;
}

} // namespace qshoot::detail
