#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "cdfspec/estimators.hpp"
#include "cdfspec/spectest.hpp"
#include "test_support.hpp"

using cdfspec::KernelKind;
using cdfspec::KernelSpec;
using cdfspec::TestConfig;
using cdfspec::WeightGrid;

namespace {

const KernelSpec kUniform{KernelKind::Uniform, 0.1};

TestConfig small_config(std::size_t rounds, std::uint64_t seed = 1) {
    TestConfig config;
    config.bootstrap_iterations = rounds;
    config.seed = seed;
    return config;
}

struct CountingFitter {
    std::size_t* calls;
    cdfspec::FittedModel operator()(std::span<const double> series, const cdfspec::MeanFamily& family) const {
        ++*calls;
        return cdfspec::fit_least_squares(series, family);
    }
};

}  // namespace

// ---------------------------------------------------------------- grids

TEST(WeightGrid, UniformGridIsValid) {
    const WeightGrid grid = cdfspec::uniform_grid(-1.0, 2.0, 101);
    EXPECT_NO_THROW(grid.validate());
    EXPECT_EQ(grid.points.front(), -1.0);
    EXPECT_EQ(grid.points.back(), 2.0);
    double total = 0.0;
    for (double w : grid.weights) {
        total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(WeightGrid, ValidationCatchesBadGrids) {
    WeightGrid grid{{0.0, 1.0, 1.0}, {0.2, 0.3, 0.5}};
    EXPECT_THROW(grid.validate(), std::invalid_argument);
    grid = WeightGrid{{0.0, 1.0}, {0.6, 0.6}};
    EXPECT_THROW(grid.validate(), std::invalid_argument);
    grid = WeightGrid{{0.0, 1.0}, {1.5, -0.5}};
    EXPECT_THROW(grid.validate(), std::invalid_argument);
    EXPECT_THROW((void)cdfspec::uniform_grid(1.0, 1.0, 5), std::invalid_argument);
}

TEST(WeightGrid, QuantileRuleSpansTheCentralRange) {
    const auto x = cdfspec::testing::null_path(3, 400).values;
    const WeightGrid grid = cdfspec::GridRule{}.build(x);
    EXPECT_EQ(grid.size(), 101U);
    EXPECT_EQ(grid.points.front(), cdfspec::sample_quantile(x, 0.01));
    EXPECT_EQ(grid.points.back(), cdfspec::sample_quantile(x, 0.99));
    EXPECT_NO_THROW(grid.validate());

    cdfspec::GridRule by_probability;
    by_probability.spacing = cdfspec::GridRule::Spacing::Quantile;
    const WeightGrid alt = by_probability.build(x);
    EXPECT_EQ(alt.points.front(), grid.points.front());
    EXPECT_EQ(alt.points.back(), grid.points.back());
    EXPECT_NO_THROW(alt.validate());
}

TEST(SampleQuantile, LinearInterpolation) {
    const std::vector<double> x{4.0, 1.0, 3.0, 2.0};
    EXPECT_DOUBLE_EQ(cdfspec::sample_quantile(x, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(cdfspec::sample_quantile(x, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(cdfspec::sample_quantile(x, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(cdfspec::sample_quantile(x, 0.25), 1.75);
}

// ---------------------------------------------------------------- profile

TEST(StatisticProfile, ZeroWhereBothEstimatesAreSaturated) {
    const std::vector<double> x{1.5, 1.5};
    const auto fit = cdfspec::fit_least_squares(x, cdfspec::abs_autoregression());
    ASSERT_EQ(fit.theta_hat, 1.0);
    ASSERT_EQ(fit.residuals[0], 0.0);
    const WeightGrid grid{{0.5, 1.0, 2.0, 2.5}, {0.25, 0.25, 0.25, 0.25}};
    for (double v : cdfspec::statistic_profile(x, fit, kUniform, grid)) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(StatisticProfile, BoundedAndFinite) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        cdfspec::SimSpec spec;
        spec.length = 150;
        spec.seed = seed;
        spec.hypothesis = seed % 2 ? cdfspec::Hypothesis::Alternative : cdfspec::Hypothesis::Null;
        const auto x = cdfspec::simulate(spec).values;
        const auto fit = cdfspec::fit_least_squares(x, cdfspec::abs_autoregression());
        const WeightGrid grid = cdfspec::uniform_grid(-5.0, 5.0, 201);
        const double bound = std::sqrt(static_cast<double>(x.size() - 1));
        for (double v : cdfspec::statistic_profile(x, fit, kUniform, grid)) {
            ASSERT_TRUE(std::isfinite(v));
            ASSERT_LE(std::abs(v), bound);
        }
    }
}

TEST(StatisticProfile, MatchesDirectEstimators) {
    const auto x = cdfspec::testing::null_path(12, 120).values;
    const auto fit = cdfspec::fit_least_squares(x, cdfspec::abs_autoregression());
    const WeightGrid grid = cdfspec::GridRule{}.build(x);
    const auto profile = cdfspec::statistic_profile(x, fit, kUniform, grid);
    const double scale = std::sqrt(119.0);
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const double u = grid.points[m];
        const double direct = scale * (cdfspec::kernel_cdf(x, kUniform, u) - cdfspec::convolution_cdf(fit, kUniform, u));
        EXPECT_NEAR(profile[m], direct, 1e-11);
    }
}

TEST(StatisticProfile, DeterministicOnANullPath) {
    const auto x = cdfspec::testing::null_path(400, 400).values;
    const auto run = [&] {
        const auto fit = cdfspec::fit_least_squares(x, cdfspec::abs_autoregression());
        const auto profile = cdfspec::statistic_profile(x, fit, kUniform, cdfspec::GridRule{}.build(x));
        double worst = 0.0;
        for (double v : profile) {
            worst = std::max(worst, std::abs(v));
        }
        return worst;
    };
    EXPECT_EQ(run(), run());
}

TEST(StatisticProfile, EpanechnikovGoesThroughTheOracle) {
    const auto x = cdfspec::testing::null_path(6, 40).values;
    const auto fit = cdfspec::fit_least_squares(x, cdfspec::abs_autoregression());
    const KernelSpec epan{KernelKind::Epanechnikov, 0.2};
    const WeightGrid grid = cdfspec::GridRule{11, 0.05, 0.95}.build(x);
    const auto profile = cdfspec::statistic_profile(x, fit, epan, grid);
    const double scale = std::sqrt(39.0);
    for (std::size_t m = 0; m < grid.size(); ++m) {
        const double u = grid.points[m];
        EXPECT_NEAR(profile[m],
                    scale * (cdfspec::kernel_cdf(x, epan, u) - cdfspec::convolution_cdf_oracle(fit, epan, u)), 1e-12);
    }
}

TEST(StatisticProfile, RejectsMismatchedFit) {
    const auto x = cdfspec::testing::null_path(1, 50).values;
    const auto fit = cdfspec::fit_least_squares(x, cdfspec::abs_autoregression());
    const std::vector<double> shorter(x.begin(), x.end() - 1);
    EXPECT_THROW((void)cdfspec::statistic_profile(shorter, fit, kUniform, cdfspec::uniform_grid(-1, 1, 5)),
                 std::invalid_argument);
}

// ---------------------------------------------------------------- integration

TEST(IntegrateStatistic, Arithmetic) {
    const WeightGrid third{{0.0, 1.0, 2.0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    const std::vector<double> zeros(3, 0.0);
    EXPECT_EQ(cdfspec::integrate_statistic(zeros, third), 0.0);
    const std::vector<double> profile{1.0, 2.0, 3.0};
    EXPECT_NEAR(cdfspec::integrate_statistic(profile, third), 14.0 / 3.0, 1e-15);

    const WeightGrid skewed{{0.0, 1.0, 2.0, 3.0}, {0.1, 0.2, 0.3, 0.4}};
    const std::vector<double> constant(4, -1.7);
    EXPECT_NEAR(cdfspec::integrate_statistic(constant, skewed), 1.7 * 1.7, 1e-15);
}

TEST(IntegrateStatistic, LengthMismatch) {
    const WeightGrid grid{{0.0, 1.0}, {0.5, 0.5}};
    const std::vector<double> profile{1.0, 2.0, 3.0};
    EXPECT_THROW((void)cdfspec::integrate_statistic(profile, grid), std::invalid_argument);
}

// ---------------------------------------------------------------- block bootstrap

TEST(BlockResample, FullLengthBlockIsTheIdentity) {
    const auto x = cdfspec::testing::null_path(2, 37).values;
    cdfspec::Rng rng(1);
    EXPECT_EQ(cdfspec::block_resample(x, x.size(), rng), x);
}

TEST(BlockResample, UnitBlocksDrawValuesWithReplacement) {
    const auto x = cdfspec::testing::null_path(2, 50).values;
    cdfspec::Rng rng(4);
    const auto out = cdfspec::block_resample(x, 1, rng);
    ASSERT_EQ(out.size(), x.size());
    for (double v : out) {
        EXPECT_NE(std::find(x.begin(), x.end(), v), x.end());
    }
    EXPECT_NE(out, x);
}

TEST(BlockResample, ConcatenatesContiguousBlocks) {
    const auto x = cdfspec::testing::null_path(9, 400).values;
    cdfspec::Rng rng(10);
    const auto out = cdfspec::block_resample(x, 10, rng);
    ASSERT_EQ(out.size(), 400U);
    for (std::size_t block = 0; block < 40; ++block) {
        const auto first = std::find(x.begin(), x.end(), out[block * 10]);
        ASSERT_NE(first, x.end());
        ASSERT_LE(first + 10, x.end());
        EXPECT_TRUE(std::equal(first, first + 10, out.begin() + static_cast<std::ptrdiff_t>(block * 10)));
    }
}

TEST(BlockResample, TruncatesWhenLengthIsNotAMultiple) {
    const auto x = cdfspec::testing::null_path(9, 25).values;
    cdfspec::Rng rng(3);
    const auto out = cdfspec::block_resample(x, 10, rng);
    ASSERT_EQ(out.size(), 25U);
    for (double v : out) {
        EXPECT_NE(std::find(x.begin(), x.end(), v), x.end());
    }
}

TEST(BlockResample, StartsAreUniform) {
    std::vector<double> x(12);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<double>(i);
    }
    cdfspec::Rng rng(77);
    std::map<double, int> starts;
    const int draws = 30000;
    for (int k = 0; k < draws; ++k) {
        ++starts[cdfspec::block_resample(x, 9, rng)[0]];
    }
    ASSERT_EQ(starts.size(), 4U);  // T - l + 1 admissible starts
    for (const auto& [start, count] : starts) {
        EXPECT_NEAR(count, draws / 4, 400) << "start " << start;
    }
}

TEST(BlockResample, RejectsOversizedBlocks) {
    const std::vector<double> x{1.0, 2.0, 3.0};
    cdfspec::Rng rng(1);
    EXPECT_THROW((void)cdfspec::block_resample(x, 4, rng), std::invalid_argument);
    EXPECT_THROW((void)cdfspec::block_resample(x, 0, rng), std::invalid_argument);
}

// ---------------------------------------------------------------- run_test

TEST(PercentileRank, OrderStatistics) {
    EXPECT_EQ(cdfspec::percentile_rank(0.1, 200), 180U);
    EXPECT_EQ(cdfspec::percentile_rank(0.075, 200), 185U);
    EXPECT_EQ(cdfspec::percentile_rank(0.05, 200), 190U);
    EXPECT_EQ(cdfspec::percentile_rank(0.025, 200), 195U);
    EXPECT_EQ(cdfspec::percentile_rank(0.01, 200), 198U);
    EXPECT_EQ(cdfspec::percentile_rank(0.05, 1), 1U);
    EXPECT_EQ(cdfspec::percentile_rank(0.1, 40), 36U);
    EXPECT_EQ(cdfspec::percentile_rank(0.01, 40), 40U);
}

TEST(RunTest, SingleBootstrapRound) {
    const auto x = cdfspec::testing::null_path(31, 200);
    const auto outcome = cdfspec::run_test(x, cdfspec::abs_autoregression(), small_config(1));
    ASSERT_EQ(outcome.bootstrap_stats.size(), 1U);
    for (const auto& d : outcome.decisions) {
        EXPECT_EQ(d.critical_value, outcome.bootstrap_stats[0]);
        EXPECT_EQ(d.reject, outcome.statistic > outcome.bootstrap_stats[0]);
    }
    EXPECT_FALSE(outcome.warnings.empty());
}

TEST(RunTest, OutcomeInvariants) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        cdfspec::SimSpec spec;
        spec.length = 200;
        spec.seed = seed;
        spec.hypothesis = seed % 2 ? cdfspec::Hypothesis::Alternative : cdfspec::Hypothesis::Null;
        const auto outcome =
            cdfspec::run_test(cdfspec::simulate(spec), cdfspec::abs_autoregression(), small_config(60, seed));
        EXPECT_GE(outcome.statistic, 0.0);
        ASSERT_EQ(outcome.bootstrap_stats.size(), 60U);
        for (double v : outcome.bootstrap_stats) {
            EXPECT_GE(v, 0.0);
        }
        ASSERT_EQ(outcome.decisions.size(), 5U);
        for (std::size_t k = 0; k < outcome.decisions.size(); ++k) {
            const auto& d = outcome.decisions[k];
            EXPECT_EQ(d.reject, outcome.statistic > d.critical_value);
            if (k > 0) {
                // alphas descend, so thresholds ascend
                EXPECT_LE(outcome.decisions[k - 1].critical_value, d.critical_value);
                EXPECT_TRUE(!d.reject || outcome.decisions[k - 1].reject);
            }
        }
    }
}

TEST(RunTest, DeterministicGivenSeed) {
    const auto x = cdfspec::testing::null_path(8, 200);
    const auto a = cdfspec::run_test(x, cdfspec::abs_autoregression(), small_config(50, 5));
    const auto b = cdfspec::run_test(x, cdfspec::abs_autoregression(), small_config(50, 5));
    EXPECT_EQ(a.statistic, b.statistic);
    EXPECT_EQ(a.bootstrap_stats, b.bootstrap_stats);
    const auto c = cdfspec::run_test(x, cdfspec::abs_autoregression(), small_config(50, 6));
    EXPECT_EQ(a.statistic, c.statistic);
    EXPECT_NE(a.bootstrap_stats, c.bootstrap_stats);
}

TEST(RunTest, FitterCallCount) {
    const auto x = cdfspec::testing::null_path(8, 120);
    std::size_t calls = 0;
    TestConfig config = small_config(25);
    config.refit = true;
    (void)cdfspec::run_test(x, cdfspec::abs_autoregression(), config, CountingFitter{&calls});
    EXPECT_EQ(calls, 26U);

    calls = 0;
    config.refit = false;
    (void)cdfspec::run_test(x, cdfspec::abs_autoregression(), config, CountingFitter{&calls});
    EXPECT_EQ(calls, 1U);
}

TEST(RunTest, RefitModesDiffer) {
    const auto x = cdfspec::testing::null_path(8, 150);
    TestConfig config = small_config(20);
    const auto fixed = cdfspec::run_test(x, cdfspec::abs_autoregression(), config);
    config.refit = true;
    const auto refit = cdfspec::run_test(x, cdfspec::abs_autoregression(), config);
    EXPECT_EQ(fixed.statistic, refit.statistic);
    EXPECT_NE(fixed.bootstrap_stats, refit.bootstrap_stats);
}

TEST(RunTest, RejectsInvalidInput) {
    const auto family = cdfspec::abs_autoregression();
    const std::vector<double> tiny{1.0, 2.0};
    EXPECT_THROW((void)cdfspec::run_test(tiny, family, small_config(5)), std::invalid_argument);

    const auto x = cdfspec::testing::null_path(1, 20);
    TestConfig config = small_config(5);
    config.block_length = 21;
    EXPECT_THROW((void)cdfspec::run_test(x, family, config), std::invalid_argument);
    config = small_config(5);
    config.alphas = {0.05, 0.1};
    EXPECT_THROW((void)cdfspec::run_test(x, family, config), std::invalid_argument);
    config.alphas = {1.0};
    EXPECT_THROW((void)cdfspec::run_test(x, family, config), std::invalid_argument);
    config = small_config(0);
    EXPECT_THROW((void)cdfspec::run_test(x, family, config), std::invalid_argument);

    const std::vector<double> zeros{0.0, 0.0, 0.0, 0.0, 2.0};
    config = small_config(5);
    config.block_length = 2;
    EXPECT_THROW((void)cdfspec::run_test(zeros, family, config), cdfspec::DegenerateFit);
}
