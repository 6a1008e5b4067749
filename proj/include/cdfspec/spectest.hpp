#pragma once

// Specification test for the parametric mean: the weighted integral of
// V(u)^2, V(u) = sqrt(n) (F_k(u) - F_c(u)), calibrated by a moving-block
// bootstrap of V*(u) - V(u).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdfspec/estimators.hpp"
#include "cdfspec/kernel.hpp"
#include "cdfspec/process.hpp"
#include "cdfspec/rng.hpp"

namespace cdfspec {

/// Discretized weight function pi(u) on the region U.
struct WeightGrid {
    std::vector<double> points;
    std::vector<double> weights;

    void validate() const {
        if (points.empty() || points.size() != weights.size()) {
            throw std::invalid_argument("weight grid needs equally many points and weights (at least one)");
        }
        double total = 0.0;
        for (std::size_t m = 0; m < points.size(); ++m) {
            if (!std::isfinite(points[m])) {
                throw std::invalid_argument("weight grid points must be finite");
            }
            if (m > 0 && !(points[m] > points[m - 1])) {
                throw std::invalid_argument("weight grid points must be strictly increasing");
            }
            if (!(weights[m] >= 0.0)) {
                throw std::invalid_argument("weight grid weights must be nonnegative");
            }
            total += weights[m];
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw std::invalid_argument("weight grid weights must sum to 1");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }

    friend bool operator==(const WeightGrid&, const WeightGrid&) = default;
};

/// M equally spaced points on [lo, hi] with weights 1/M.
[[nodiscard]] inline WeightGrid uniform_grid(double lo, double hi, std::size_t count) {
    if (count == 0) {
        throw std::invalid_argument("weight grid needs at least one point");
    }
    if (count > 1 && !(hi > lo)) {
        throw std::invalid_argument("weight grid range is empty");
    }
    WeightGrid grid;
    grid.points.resize(count);
    grid.weights.assign(count, 1.0 / static_cast<double>(count));
    for (std::size_t m = 0; m < count; ++m) {
        grid.points[m] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(m) / static_cast<double>(count - 1);
    }
    return grid;
}

/// Linearly interpolated sample quantile (Hyndman-Fan type 7).
[[nodiscard]] inline double sample_quantile(std::span<const double> sample, double prob) {
    if (sample.empty()) {
        throw std::invalid_argument("quantile of an empty sample");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = prob * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// How the weight grid is derived from the observed series when none is given.
struct GridRule {
    enum class Spacing { Uniform, Quantile };

    std::size_t points = 101;
    double lower_quantile = 0.01;
    double upper_quantile = 0.99;
    /// Uniform: equally spaced in u. Quantile: equally spaced in probability,
    /// which weights u by the sample density.
    Spacing spacing = Spacing::Uniform;

    [[nodiscard]] WeightGrid build(std::span<const double> series) const {
        if (!(lower_quantile >= 0.0 && lower_quantile < upper_quantile && upper_quantile <= 1.0)) {
            throw std::invalid_argument("grid quantiles must satisfy 0 <= lower < upper <= 1");
        }
        if (spacing == Spacing::Uniform) {
            return uniform_grid(sample_quantile(series, lower_quantile), sample_quantile(series, upper_quantile),
                                points);
        }
        const WeightGrid probs = uniform_grid(lower_quantile, upper_quantile, points);
        WeightGrid grid = probs;
        for (std::size_t m = 0; m < points; ++m) {
            grid.points[m] = sample_quantile(series, probs.points[m]);
        }
        grid.validate();
        return grid;
    }

    friend bool operator==(const GridRule&, const GridRule&) = default;
};

inline const std::vector<double> kDefaultAlphas{0.1, 0.075, 0.05, 0.025, 0.01};

struct TestConfig {
    KernelSpec kernel{};
    std::size_t block_length = 10;
    std::size_t bootstrap_iterations = 200;
    GridRule grid_rule{};
    std::vector<double> alphas = kDefaultAlphas;  ///< strictly descending
    std::uint64_t seed = 0;
    bool refit = false;  ///< re-estimate theta on every bootstrap resample

    void validate() const {
        kernel.validate();
        if (block_length == 0) {
            throw std::invalid_argument("block length must be positive");
        }
        if (bootstrap_iterations == 0) {
            throw std::invalid_argument("bootstrap iterations must be positive");
        }
        if (alphas.empty()) {
            throw std::invalid_argument("at least one significance level is required");
        }
        for (std::size_t k = 0; k < alphas.size(); ++k) {
            if (!(alphas[k] > 0.0 && alphas[k] < 1.0)) {
                throw std::invalid_argument("significance levels must lie in (0, 1)");
            }
            if (k > 0 && !(alphas[k] < alphas[k - 1])) {
                throw std::invalid_argument("significance levels must be strictly descending");
            }
        }
    }
};

struct AlphaDecision {
    double alpha = 0.0;
    double critical_value = 0.0;  ///< q*_{1-alpha}
    bool reject = false;
};

struct TestOutcome {
    double statistic = 0.0;
    double theta_hat = 0.0;
    std::vector<double> bootstrap_stats;  ///< in round order
    std::vector<AlphaDecision> decisions;  ///< same order as TestConfig::alphas
    WeightGrid grid;
    std::vector<std::string> warnings;
};

/// V(u_m) = sqrt(n) (F_k(u_m) - F_c(u_m)) on every grid point, n = T - 1.
[[nodiscard]] inline std::vector<double> statistic_profile(std::span<const double> series, const FittedModel& fit,
                                                           const KernelSpec& kernel, const WeightGrid& grid) {
    if (series.size() < 2 || fit.size() + 1 != series.size() || fit.fitted_means.size() != fit.size()) {
        throw std::invalid_argument("fit does not match the series: expected " +
                                    std::to_string(series.empty() ? 0 : series.size() - 1) + " residuals, got " +
                                    std::to_string(fit.size()));
    }
    kernel.validate();
    const auto scale = std::sqrt(static_cast<double>(fit.size()));
    std::vector<double> profile(grid.size());
    if (kernel.kind == KernelKind::Uniform) {
        const SortedKernelCdf kernel_estimate(series, kernel.bandwidth);
        const ConvolutionCdf convolution(fit, kernel);
        convolution.evaluate(grid.points, profile);
        for (std::size_t m = 0; m < grid.size(); ++m) {
            profile[m] = scale * (kernel_estimate(grid.points[m]) - profile[m]);
        }
    } else {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double u = grid.points[m];
            profile[m] = scale * (kernel_cdf(series, kernel, u) - convolution_cdf_oracle(fit, kernel, u));
        }
    }
    return profile;
}

[[nodiscard]] inline std::vector<double> statistic_profile(const TimeSeries& series, const FittedModel& fit,
                                                           const KernelSpec& kernel, const WeightGrid& grid) {
    return statistic_profile(std::span<const double>(series.values), fit, kernel, grid);
}

/// sum_m w_m profile_m^2
[[nodiscard]] inline double integrate_statistic(std::span<const double> profile, const WeightGrid& grid) {
    if (profile.size() != grid.size()) {
        throw std::invalid_argument("profile has " + std::to_string(profile.size()) + " values but the grid has " +
                                    std::to_string(grid.size()) + " points");
    }
    double acc = 0.0;
    for (std::size_t m = 0; m < profile.size(); ++m) {
        acc += grid.weights[m] * profile[m] * profile[m];
    }
    return acc;
}

/// Moving-block bootstrap: ceil(T / l) blocks of l consecutive values with
/// uniformly drawn starts, concatenated and truncated to T.
[[nodiscard]] inline std::vector<double> block_resample(std::span<const double> series, std::size_t block_length,
                                                        Rng& rng) {
    const std::size_t total = series.size();
    if (block_length == 0 || block_length > total) {
        throw std::invalid_argument("block length must lie in [1, T], got " + std::to_string(block_length) +
                                    " with T = " + std::to_string(total));
    }
    const std::size_t starts = total - block_length + 1;
    std::vector<double> out;
    out.reserve(total + block_length);
    while (out.size() < total) {
        const auto start = static_cast<std::size_t>(rng.uniform_index(starts));
        out.insert(out.end(), series.begin() + static_cast<std::ptrdiff_t>(start),
                   series.begin() + static_cast<std::ptrdiff_t>(start + block_length));
    }
    out.resize(total);
    return out;
}

/// Index (1-based) of the order statistic used as q*_{1-alpha}: ceil((1 - alpha) B).
[[nodiscard]] inline std::size_t percentile_rank(double alpha, std::size_t count) {
    // The guard absorbs rounding in (1 - alpha) * B for exact products such as 0.9 * 200.
    const double raw = std::ceil((1.0 - alpha) * static_cast<double>(count) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, count);
}

/// Full bootstrap test of `family` on `series`. `fitter` is called exactly
/// B + 1 times when refitting is on, once otherwise.
template <typename Fitter = LeastSquaresFitter>
[[nodiscard]] TestOutcome run_test(std::span<const double> series, const MeanFamily& family, const TestConfig& config,
                                   const Fitter& fitter = Fitter{}) {
    config.validate();
    if (series.size() < 3) {
        throw std::invalid_argument("the test needs at least 3 observations, got " + std::to_string(series.size()));
    }
    if (config.block_length > series.size()) {
        throw std::invalid_argument("block length " + std::to_string(config.block_length) +
                                    " exceeds the series length " + std::to_string(series.size()));
    }

    TestOutcome outcome;
    outcome.grid = config.grid_rule.build(series);
    const WeightGrid& grid = outcome.grid;

    const FittedModel fit = fitter(series, family);
    outcome.theta_hat = fit.theta_hat;
    const std::vector<double> profile = statistic_profile(series, fit, config.kernel, grid);
    outcome.statistic = integrate_statistic(profile, grid);

    const std::size_t rounds = config.bootstrap_iterations;
    outcome.bootstrap_stats.resize(rounds);
    std::vector<double> diff(grid.size());
    for (std::size_t r = 0; r < rounds; ++r) {
        Rng rng(derive_seed(config.seed, r));
        const std::vector<double> resampled = block_resample(series, config.block_length, rng);
        const FittedModel refit =
            config.refit ? fitter(std::span<const double>(resampled), family)
                         : evaluate_fit(resampled, family, fit.theta_hat);
        const std::vector<double> boot_profile = statistic_profile(resampled, refit, config.kernel, grid);
        for (std::size_t m = 0; m < grid.size(); ++m) {
            diff[m] = boot_profile[m] - profile[m];
        }
        outcome.bootstrap_stats[r] = integrate_statistic(diff, grid);
    }

    std::vector<double> sorted = outcome.bootstrap_stats;
    std::sort(sorted.begin(), sorted.end());
    for (double alpha : config.alphas) {
        if (static_cast<double>(rounds) * alpha < 1.0) {
            outcome.warnings.push_back("B_Iter * alpha < 1 for alpha = " + std::to_string(alpha) +
                                       ": the critical value is the bootstrap maximum");
        }
        const double q = sorted[percentile_rank(alpha, rounds) - 1];
        outcome.decisions.push_back({alpha, q, outcome.statistic > q});
    }
    return outcome;
}

template <typename Fitter = LeastSquaresFitter>
[[nodiscard]] TestOutcome run_test(const TimeSeries& series, const MeanFamily& family, const TestConfig& config,
                                   const Fitter& fitter = Fitter{}) {
    return run_test(std::span<const double>(series.values), family, config, fitter);
}

}  // namespace cdfspec
