#pragma once

// Replicated level/power experiments: simulate -> run_test, repeated with
// per-replication seeds, reduced in replication order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cdfspec/estimators.hpp"
#include "cdfspec/process.hpp"
#include "cdfspec/rng.hpp"
#include "cdfspec/spectest.hpp"

namespace cdfspec {

inline constexpr std::size_t kDeskReplications = 300;

struct ExperimentPlan {
    std::string label;
    SimSpec sim{};      ///< seed is replaced per replication
    TestConfig test{};  ///< seed is replaced per replication
    std::size_t replications = kDeskReplications;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (replications == 0) {
            throw std::invalid_argument("replications must be at least 1");
        }
        sim.validate();
        test.validate();
        if (test.block_length > sim.length) {
            throw std::invalid_argument("block length exceeds the series length");
        }
    }
};

/// Seeds of replication `index`: simulation and bootstrap draw from disjoint sub-streams.
struct ReplicationSeeds {
    std::uint64_t simulation = 0;
    std::uint64_t bootstrap = 0;
};

[[nodiscard]] inline ReplicationSeeds replication_seeds(std::uint64_t master_seed, std::size_t index) {
    return {derive_seed(master_seed, 2 * static_cast<std::uint64_t>(index)),
            derive_seed(master_seed, 2 * static_cast<std::uint64_t>(index) + 1)};
}

struct ExperimentResult {
    ExperimentPlan plan;
    std::vector<std::size_t> rejection_count;  ///< aligned with plan.test.alphas
    std::vector<double> rejection_rate;
    double elapsed_seconds = 0.0;
};

class ReplicationError : public std::runtime_error {
public:
    ReplicationError(std::size_t index, ReplicationSeeds seeds, const std::string& what)
        : std::runtime_error("replication " + std::to_string(index) + " (simulation seed " +
                             std::to_string(seeds.simulation) + ", bootstrap seed " +
                             std::to_string(seeds.bootstrap) + ") failed: " + what),
          index_(index),
          seeds_(seeds) {}

    [[nodiscard]] std::size_t index() const noexcept { return index_; }
    [[nodiscard]] ReplicationSeeds seeds() const noexcept { return seeds_; }

private:
    std::size_t index_;
    ReplicationSeeds seeds_;
};

struct RunOptions {
    std::size_t workers = 1;
    /// Called with (label, completed, total); may be invoked from worker threads.
    std::function<void(const std::string&, std::size_t, std::size_t)> progress;
};

[[nodiscard]] inline std::size_t default_workers() {
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on `workers` threads. Exceptions are
/// collected per index; the one with the smallest index is rethrown.
template <typename Body>
void parallel_for_index(std::size_t count, std::size_t workers, Body&& body) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    const auto drain = [&] {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        drain();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(drain);
        }
    }
    for (const auto& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
}

template <typename Fitter = LeastSquaresFitter>
[[nodiscard]] ExperimentResult run_experiment(const ExperimentPlan& plan, const MeanFamily& family,
                                              const RunOptions& options = {}, const Fitter& fitter = Fitter{}) {
    plan.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::size_t levels = plan.test.alphas.size();
    std::vector<std::vector<char>> decisions(plan.replications);
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;

    parallel_for_index(plan.replications, options.workers, [&](std::size_t r) {
        const ReplicationSeeds seeds = replication_seeds(plan.master_seed, r);
        try {
            SimSpec sim = plan.sim;
            sim.seed = seeds.simulation;
            TestConfig test = plan.test;
            test.seed = seeds.bootstrap;
            const TestOutcome outcome = run_test(simulate(sim), family, test, fitter);
            std::vector<char> row(levels);
            for (std::size_t k = 0; k < levels; ++k) {
                row[k] = outcome.decisions[k].reject ? 1 : 0;
            }
            decisions[r] = std::move(row);
        } catch (const std::exception& e) {
            throw ReplicationError(r, seeds, e.what());
        }
        const std::size_t completed = done.fetch_add(1) + 1;
        if (options.progress) {
            const std::scoped_lock lock(progress_mutex);
            options.progress(plan.label, completed, plan.replications);
        }
    });

    ExperimentResult result;
    result.plan = plan;
    result.rejection_count.assign(levels, 0);
    for (std::size_t r = 0; r < plan.replications; ++r) {
        // alphas descend, so a rejection at alphas[k] implies one at every alphas[j], j < k.
        for (std::size_t k = 1; k < levels; ++k) {
            if (decisions[r][k] && !decisions[r][k - 1]) {
                throw std::logic_error("replication " + std::to_string(r) +
                                       " rejects at a smaller alpha but not at a larger one");
            }
        }
        for (std::size_t k = 0; k < levels; ++k) {
            result.rejection_count[k] += static_cast<std::size_t>(decisions[r][k]);
        }
    }
    result.rejection_rate.resize(levels);
    for (std::size_t k = 0; k < levels; ++k) {
        result.rejection_rate[k] =
            static_cast<double>(result.rejection_count[k]) / static_cast<double>(plan.replications);
    }
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

/// One row per plan, in input order; a failed plan carries its error instead of a result.
struct TableRow {
    std::optional<ExperimentResult> result;
    std::string error;
    ExperimentPlan plan;
};

[[nodiscard]] inline std::vector<TableRow> run_table(const std::vector<ExperimentPlan>& plans, const MeanFamily& family,
                                                     const RunOptions& options = {}) {
    if (plans.empty()) {
        throw std::invalid_argument("run_table needs at least one plan");
    }
    std::vector<TableRow> rows;
    rows.reserve(plans.size());
    for (const ExperimentPlan& plan : plans) {
        TableRow row;
        row.plan = plan;
        try {
            row.result = run_experiment(plan, family, options);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace cdfspec
