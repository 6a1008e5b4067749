#pragma once

// Least-squares fitting of the parametric mean and the distribution-function
// estimators built on it:
//
//   kernel CDF       F_k(x) = (1/T) sum_i G((x - X_i) / b)
//   residual CDF     F_e(x) = (1/n) sum_i G((x - e_i) / b)
//   convolution CDF  F_c(x) = int F_e(x - t) f_g(t) dt,
//                    f_g(t) = (1/(n b)) sum_j K((t - g_j) / b),  g_j = m(X_{j-1})
//
// with n = T - 1 lagged pairs (X_{i-1}, X_i).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdfspec/kernel.hpp"
#include "cdfspec/process.hpp"

namespace cdfspec {

/// Parametric conditional mean m_theta(x) with its theta-derivative.
struct MeanFamily {
    std::string name;
    std::function<double(double theta, double x)> eval;
    std::function<double(double theta, double x)> grad;
    /// m_theta(x) = theta * grad(x): least squares has a closed form.
    bool linear_in_theta = false;
};

/// m_theta(x) = theta |x|.
[[nodiscard]] inline MeanFamily abs_autoregression() {
    return MeanFamily{
        "theta*|x|",
        [](double theta, double x) { return theta * std::abs(x); },
        [](double, double x) { return std::abs(x); },
        true,
    };
}

struct FittedModel {
    double theta_hat = 0.0;
    std::vector<double> residuals;     ///< e_i = X_i - m(X_{i-1}), i = 2..T
    std::vector<double> fitted_means;  ///< m(X_{i-1}), same indexing

    [[nodiscard]] std::size_t size() const noexcept { return residuals.size(); }
};

class DegenerateFit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedKernel : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Residuals and fitted means of `family` at `theta` on the lagged pairs of `series`.
[[nodiscard]] inline FittedModel evaluate_fit(std::span<const double> series, const MeanFamily& family, double theta) {
    FittedModel fit;
    fit.theta_hat = theta;
    const std::size_t n = series.size() - 1;
    fit.residuals.resize(n);
    fit.fitted_means.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mean = family.eval(theta, series[i]);
        fit.fitted_means[i] = mean;
        fit.residuals[i] = series[i + 1] - mean;
    }
    return fit;
}

/// Minimizes sum_i (X_i - m_theta(X_{i-1}))^2. Closed form for families linear
/// in theta, Gauss-Newton from theta = 0 otherwise.
[[nodiscard]] inline FittedModel fit_least_squares(std::span<const double> series, const MeanFamily& family) {
    if (series.size() < 2) {
        throw std::invalid_argument("least squares needs at least one lagged pair (T >= 2)");
    }
    const std::size_t n = series.size() - 1;

    double theta = 0.0;
    if (family.linear_in_theta) {
        double cross = 0.0;
        double gram = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double regressor = family.grad(0.0, series[i]);
            cross += series[i + 1] * regressor;
            gram += regressor * regressor;
        }
        if (!(gram > 0.0)) {
            throw DegenerateFit("degenerate regressor: every lagged value has zero gradient");
        }
        theta = cross / gram;
    } else {
        constexpr int kMaxIterations = 200;
        bool converged = false;
        for (int iter = 0; iter < kMaxIterations && !converged; ++iter) {
            double cross = 0.0;
            double gram = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double g = family.grad(theta, series[i]);
                cross += (series[i + 1] - family.eval(theta, series[i])) * g;
                gram += g * g;
            }
            if (!(gram > 0.0)) {
                throw DegenerateFit("degenerate regressor: gradient vanishes on every lagged value");
            }
            const double step = cross / gram;
            theta += step;
            converged = std::abs(step) <= 1e-13 * (1.0 + std::abs(theta));
        }
        if (!converged || !std::isfinite(theta)) {
            throw DegenerateFit("Gauss-Newton did not converge for family " + family.name);
        }
    }
    return evaluate_fit(series, family, theta);
}

[[nodiscard]] inline FittedModel fit_least_squares(const TimeSeries& series, const MeanFamily& family) {
    return fit_least_squares(std::span<const double>(series.values), family);
}

/// Default fitter used by the bootstrap; a callable so tests can wrap it.
struct LeastSquaresFitter {
    [[nodiscard]] FittedModel operator()(std::span<const double> series, const MeanFamily& family) const {
        return fit_least_squares(series, family);
    }
};

/// Smoothed empirical CDF of `sample` at x.
[[nodiscard]] inline double kernel_cdf(std::span<const double> sample, const KernelSpec& kernel, double x) {
    if (sample.empty()) {
        throw std::invalid_argument("kernel_cdf of an empty sample");
    }
    kernel.validate();
    double acc = 0.0;
    for (double v : sample) {
        acc += kernel.integrated((x - v) / kernel.bandwidth);
    }
    return acc / static_cast<double>(sample.size());
}

[[nodiscard]] inline double kernel_cdf(const TimeSeries& series, const KernelSpec& kernel, double x) {
    return kernel_cdf(std::span<const double>(series.values), kernel, x);
}

[[nodiscard]] inline double residual_cdf(const FittedModel& fit, const KernelSpec& kernel, double x) {
    return kernel_cdf(std::span<const double>(fit.residuals), kernel, x);
}

/// Convolution CDF for the uniform kernel, evaluated pair by pair with the
/// four-branch closed form of the inner integral. O(n^2) per point.
[[nodiscard]] inline double convolution_cdf(const FittedModel& fit, const KernelSpec& kernel, double x) {
    if (kernel.kind != KernelKind::Uniform) {
        throw UnsupportedKernel("closed-form convolution CDF is only available for the uniform kernel; use "
                                "convolution_cdf_oracle for " +
                                std::string(to_string(kernel.kind)));
    }
    kernel.validate();
    const std::size_t n = fit.size();
    if (n == 0 || fit.fitted_means.size() != n) {
        throw std::invalid_argument("convolution_cdf needs a fit with at least one residual");
    }
    const double b = kernel.bandwidth;
    double acc = 0.0;
    for (double e : fit.residuals) {
        const double c = x + b - e;
        const auto h = [b, c](double t) { return (-t * t + 2.0 * c * t) / (8.0 * b); };
        for (double g : fit.fitted_means) {
            const double a = g + e;
            if (x < a - 2.0 * b) {
                continue;
            }
            if (x < a) {
                acc += h(x - e + b) - h(g - b);
            } else if (x < a + 2.0 * b) {
                acc += b * kernel.integrated((x - g - e - b) / b) + h(g + b) - h(x - e - b);
            } else {
                acc += b;
            }
        }
    }
    const double value = acc / (static_cast<double>(n) * static_cast<double>(n) * b);
    return std::clamp(value, 0.0, 1.0);
}

inline constexpr int kDefaultOraclePanels = 4096;

/// Direct numerical evaluation of int F_e(x - t) f_g(t) dt over the support
/// [min g - b, max g + b] of f_g, for any kernel.
///
/// The support is cut into `quad_points` equal panels, further split at every
/// kink or jump of the integrand (g_j +- b and x - e_i +- b), and each piece is
/// integrated by 3-point Gauss-Legendre. Pieces are polynomial of degree <= 5
/// for the uniform and Epanechnikov kernels, so the result is exact up to
/// rounding; for a smooth integrand the error is O(h^6).
[[nodiscard]] inline double convolution_cdf_oracle(const FittedModel& fit, const KernelSpec& kernel, double x,
                                                   int quad_points = kDefaultOraclePanels) {
    if (quad_points < 100) {
        throw std::invalid_argument("convolution_cdf_oracle needs at least 100 panels");
    }
    kernel.validate();
    const std::size_t n = fit.size();
    if (n == 0 || fit.fitted_means.size() != n) {
        throw std::invalid_argument("convolution_cdf_oracle needs a fit with at least one residual");
    }
    const double b = kernel.bandwidth;
    const auto [gmin, gmax] = std::minmax_element(fit.fitted_means.begin(), fit.fitted_means.end());
    const double lo = *gmin - b;
    const double hi = *gmax + b;

    std::vector<double> cuts;
    cuts.reserve(static_cast<std::size_t>(quad_points) + 1 + 4 * n);
    for (int k = 0; k <= quad_points; ++k) {
        cuts.push_back(lo + (hi - lo) * static_cast<double>(k) / quad_points);
    }
    const auto add_cut = [&](double t) {
        if (t > lo && t < hi) {
            cuts.push_back(t);
        }
    };
    for (std::size_t k = 0; k < n; ++k) {
        add_cut(fit.fitted_means[k] - b);
        add_cut(fit.fitted_means[k] + b);
        add_cut(x - fit.residuals[k] - b);
        add_cut(x - fit.residuals[k] + b);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const double inv_n = 1.0 / static_cast<double>(n);
    const auto integrand = [&](double t) {
        double cdf = 0.0;
        double density = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            cdf += kernel.integrated((x - t - fit.residuals[k]) / b);
            density += kernel.density((t - fit.fitted_means[k]) / b);
        }
        return (cdf * inv_n) * (density * inv_n / b);
    };

    // 3-point Gauss-Legendre on [-1, 1].
    const double node = std::sqrt(0.6);
    constexpr double w_outer = 5.0 / 9.0;
    constexpr double w_center = 8.0 / 9.0;
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double half = 0.5 * (cuts[k + 1] - cuts[k]);
        const double mid = 0.5 * (cuts[k + 1] + cuts[k]);
        total += half * (w_outer * integrand(mid - half * node) + w_center * integrand(mid) +
                         w_outer * integrand(mid + half * node));
    }
    return total;
}

/// Uniform-kernel CDF estimate over a fixed sample, O(log n) per point via
/// prefix sums of the sorted sample.
class SortedKernelCdf {
public:
    SortedKernelCdf(std::span<const double> sample, double bandwidth)
        : sorted_(sample.begin(), sample.end()), bandwidth_(bandwidth) {
        if (sorted_.empty()) {
            throw std::invalid_argument("SortedKernelCdf of an empty sample");
        }
        std::sort(sorted_.begin(), sorted_.end());
        prefix_.resize(sorted_.size() + 1, 0.0);
        std::partial_sum(sorted_.begin(), sorted_.end(), prefix_.begin() + 1);
    }

    [[nodiscard]] double operator()(double x) const {
        const double b = bandwidth_;
        // X <= x - b contributes 1; x - b < X < x + b contributes (x + b - X) / (2b).
        const auto full = static_cast<std::size_t>(
            std::upper_bound(sorted_.begin(), sorted_.end(), x - b) - sorted_.begin());
        const auto partial_end = static_cast<std::size_t>(
            std::lower_bound(sorted_.begin() + static_cast<std::ptrdiff_t>(full), sorted_.end(), x + b) -
            sorted_.begin());
        const auto count = static_cast<double>(partial_end - full);
        const double window_sum = prefix_[partial_end] - prefix_[full];
        const double ramp = (count * (x + b) - window_sum) / (2.0 * b);
        const double value = (static_cast<double>(full) + ramp) / static_cast<double>(sorted_.size());
        return std::clamp(value, 0.0, 1.0);
    }

private:
    std::vector<double> sorted_;
    std::vector<double> prefix_;
    double bandwidth_;
};

/// Uniform-kernel convolution CDF in O(n) per point after an O(n log n) setup.
///
/// The inner integral for pair (i, j) depends only on s = (x - e_i - g_j) / b:
/// it equals b * P(s), where P is the CDF of the sum of two independent
/// U[-1, 1] variables. Summing over j for fixed i needs only the count, sum
/// and sum of squares of the g_j falling in each quadratic piece, read from
/// prefix sums of the sorted fitted means.
class ConvolutionCdf {
public:
    ConvolutionCdf(const FittedModel& fit, const KernelSpec& kernel)
        : residuals_desc_(fit.residuals), means_(fit.fitted_means), bandwidth_(kernel.bandwidth) {
        if (kernel.kind != KernelKind::Uniform) {
            throw UnsupportedKernel("ConvolutionCdf requires the uniform kernel");
        }
        kernel.validate();
        if (means_.empty() || residuals_desc_.size() != means_.size()) {
            throw std::invalid_argument("ConvolutionCdf needs a fit with at least one residual");
        }
        std::sort(residuals_desc_.begin(), residuals_desc_.end(), std::greater<>{});
        std::sort(means_.begin(), means_.end());
        center_ = means_[means_.size() / 2];
        for (double& g : means_) {
            g -= center_;
        }
        sum1_.assign(means_.size() + 1, 0.0);
        sum2_.assign(means_.size() + 1, 0.0);
        for (std::size_t k = 0; k < means_.size(); ++k) {
            sum1_[k + 1] = sum1_[k] + means_[k];
            sum2_[k + 1] = sum2_[k] + means_[k] * means_[k];
        }
    }

    [[nodiscard]] double operator()(double x) const {
        const double xs[] = {x};
        double out = 0.0;
        evaluate(xs, std::span<double>(&out, 1));
        return out;
    }

    /// Writes F_c(xs[k]) to out[k].
    void evaluate(std::span<const double> xs, std::span<double> out) const {
        if (xs.size() != out.size()) {
            throw std::invalid_argument("ConvolutionCdf::evaluate size mismatch");
        }
        const std::size_t n = means_.size();
        const double b = bandwidth_;
        const double two_b = 2.0 * b;
        const double inv_8b2 = 1.0 / (8.0 * b * b);
        const auto count = static_cast<double>(n);

        for (std::size_t m = 0; m < xs.size(); ++m) {
            const double x = xs[m] - center_;
            // Residuals descend, so y = x - e ascends and the window edges only move right.
            std::size_t full = 0;   // g <= y - 2b
            std::size_t upper = 0;  // g <= y
            std::size_t tail = 0;   // g < y + 2b
            double acc = 0.0;
            for (double e : residuals_desc_) {
                const double y = x - e;
                while (full < n && means_[full] <= y - two_b) {
                    ++full;
                }
                upper = std::max(upper, full);
                while (upper < n && means_[upper] <= y) {
                    ++upper;
                }
                tail = std::max(tail, upper);
                while (tail < n && means_[tail] < y + two_b) {
                    ++tail;
                }
                // 0 <= s < 2: 1 - (2b - y + g)^2 / (8b^2)
                const double a = two_b - y;
                const auto k_upper = static_cast<double>(upper - full);
                const double s1_upper = sum1_[upper] - sum1_[full];
                const double s2_upper = sum2_[upper] - sum2_[full];
                const double upper_sq = k_upper * a * a + 2.0 * a * s1_upper + s2_upper;
                // -2 < s < 0: (y + 2b - g)^2 / (8b^2)
                const double c = y + two_b;
                const auto k_lower = static_cast<double>(tail - upper);
                const double s1_lower = sum1_[tail] - sum1_[upper];
                const double s2_lower = sum2_[tail] - sum2_[upper];
                const double lower_sq = k_lower * c * c - 2.0 * c * s1_lower + s2_lower;

                acc += static_cast<double>(full) + k_upper + (lower_sq - upper_sq) * inv_8b2;
            }
            out[m] = std::clamp(acc / (count * count), 0.0, 1.0);
        }
    }

private:
    std::vector<double> residuals_desc_;
    std::vector<double> means_;  // sorted, shifted by center_
    std::vector<double> sum1_;
    std::vector<double> sum2_;
    double bandwidth_;
    double center_ = 0.0;
};

}  // namespace cdfspec
