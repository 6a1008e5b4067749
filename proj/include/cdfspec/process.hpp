#pragma once

// Sample paths of the absolute-value autoregression
//
//   null:         X_i = theta0 |X_{i-1}| + e_i
//   alternative:  X_i = theta0 |X_{i-1}| + e_i sqrt(theta0^2 + theta1^2 X_{i-1}^2)
//
// with e_i iid N(0, 1), X_0 = 0 and a discarded burn-in prefix.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cdfspec/rng.hpp"

namespace cdfspec {

enum class Hypothesis { Null, Alternative };

[[nodiscard]] inline std::string_view to_string(Hypothesis h) noexcept {
    return h == Hypothesis::Null ? "null" : "alternative";
}

[[nodiscard]] inline Hypothesis parse_hypothesis(std::string_view text) {
    if (text == "null" || text == "Null" || text == "H0") {
        return Hypothesis::Null;
    }
    if (text == "alternative" || text == "Alternative" || text == "alt" || text == "Ha") {
        return Hypothesis::Alternative;
    }
    throw std::invalid_argument("unknown hypothesis '" + std::string(text) + "' (expected null or alternative)");
}

inline constexpr std::size_t kDefaultBurnIn = 500;

struct SimSpec {
    double theta0 = 0.3;
    double theta1 = 0.9;  ///< ignored under the null
    std::size_t length = 400;
    Hypothesis hypothesis = Hypothesis::Null;
    std::uint64_t seed = 0;
    std::size_t burn_in = kDefaultBurnIn;

    /// Throws std::invalid_argument naming the violated constraint.
    void validate() const {
        if (!std::isfinite(theta0) || std::abs(theta0) >= 1.0) {
            throw std::invalid_argument("theta0 must satisfy |theta0| < 1 (contraction condition), got " +
                                        std::to_string(theta0));
        }
        if (!std::isfinite(theta1)) {
            throw std::invalid_argument("theta1 must be finite");
        }
        if (length < 2) {
            throw std::invalid_argument("series length must be at least 2, got " + std::to_string(length));
        }
    }

    friend bool operator==(const SimSpec&, const SimSpec&) = default;
};

struct TimeSeries {
    std::vector<double> values;
    std::optional<SimSpec> spec;

    TimeSeries() = default;
    explicit TimeSeries(std::vector<double> v, std::optional<SimSpec> provenance = std::nullopt)
        : values(std::move(v)), spec(std::move(provenance)) {
        for (double x : values) {
            if (!std::isfinite(x)) {
                throw std::invalid_argument("time series values must be finite");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
};

/// Draws one path of `spec.length` values after `spec.burn_in` transient steps.
[[nodiscard]] inline TimeSeries simulate(const SimSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const bool alternative = spec.hypothesis == Hypothesis::Alternative;
    const double theta0_sq = spec.theta0 * spec.theta0;
    const double theta1_sq = spec.theta1 * spec.theta1;

    std::vector<double> out;
    out.reserve(spec.length);
    double prev = 0.0;
    const std::size_t total = spec.burn_in + spec.length;
    for (std::size_t step = 0; step < total; ++step) {
        const double shock = rng.normal();
        const double mean = spec.theta0 * std::abs(prev);
        const double scale = alternative ? std::sqrt(theta0_sq + theta1_sq * prev * prev) : 1.0;
        const double next = mean + shock * scale;
        if (step >= spec.burn_in) {
            out.push_back(next);
        }
        prev = next;
    }
    return TimeSeries(std::move(out), spec);
}

}  // namespace cdfspec
