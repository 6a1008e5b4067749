#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cdfspec {

/// Kernels supported on [-1, 1]. Only Uniform has a closed-form
/// convolution estimator; the others go through the quadrature route.
enum class KernelKind { Uniform, Epanechnikov };

[[nodiscard]] inline std::string_view to_string(KernelKind k) noexcept {
    return k == KernelKind::Uniform ? "uniform" : "epanechnikov";
}

inline constexpr double kDefaultBandwidth = 0.1;

struct KernelSpec {
    KernelKind kind = KernelKind::Uniform;
    double bandwidth = kDefaultBandwidth;

    void validate() const {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
            throw std::invalid_argument("bandwidth must be positive and finite, got " + std::to_string(bandwidth));
        }
    }

    /// K(u)
    [[nodiscard]] double density(double u) const noexcept {
        if (u < -1.0 || u > 1.0) {
            return 0.0;
        }
        switch (kind) {
            case KernelKind::Uniform:
                return 0.5;
            case KernelKind::Epanechnikov:
                return 0.75 * (1.0 - u * u);
        }
        return 0.0;
    }

    /// G(u), the antiderivative of K with G(-inf) = 0.
    [[nodiscard]] double integrated(double u) const noexcept {
        if (u < -1.0) {
            return 0.0;
        }
        if (u >= 1.0) {
            return 1.0;
        }
        switch (kind) {
            case KernelKind::Uniform:
                return 0.5 * (u + 1.0);
            case KernelKind::Epanechnikov:
                return 0.25 * (2.0 + 3.0 * u - u * u * u);
        }
        return 0.0;
    }

    friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

}  // namespace cdfspec
