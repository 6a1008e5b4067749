#pragma once

// Declarative experiment plans.
//
//   {
//     "schema": "cdfspec.plan/1",
//     "defaults": { "theta0": 0.3, "replications": 300, ... },
//     "experiments": [
//       { "label": "levels", "hypothesis": "null", "t": 400,
//         "block_length": [8, 10, 16, 20], "bootstrap_iters": [40, 80, 120, 160, 200] }
//     ]
//   }
//
// Any array-valued field except "alphas" is a grid axis. Axes expand in
// row-major order of declaration: the first declared axis varies slowest.
// Experiment fields come first in declaration order, then defaults not
// overridden by the experiment.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cdfspec/io.hpp"
#include "cdfspec/montecarlo.hpp"

namespace cdfspec {

inline constexpr const char* kPlanSchema = "cdfspec.plan/1";

class PlanError : public std::invalid_argument {
public:
    PlanError(std::string field, const std::string& message)
        : std::invalid_argument("plan field '" + field + "': " + message), field_(std::move(field)) {}

    [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

namespace detail {

inline const std::vector<std::string>& plan_fields() {
    static const std::vector<std::string> fields{
        "label",         "hypothesis",  "t",           "theta0",         "theta1",
        "burn_in",       "bandwidth",   "block_length", "bootstrap_iters", "alphas",
        "replications",  "grid_points", "grid_lower_quantile", "grid_upper_quantile", "grid_spacing",
        "refit",         "master_seed"};
    return fields;
}

inline double as_number(const std::string& field, const Json& value) {
    if (!value.is_number()) {
        throw PlanError(field, "expected a number, got " + value.dump());
    }
    return value.get<double>();
}

inline std::uint64_t as_count(const std::string& field, const Json& value) {
    if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0)) {
        throw PlanError(field, "expected a nonnegative integer, got " + value.dump());
    }
    return value.get<std::uint64_t>();
}

inline void require(const std::string& field, bool ok, const std::string& message) {
    if (!ok) {
        throw PlanError(field, message);
    }
}

inline void apply_field(ExperimentPlan& plan, const std::string& field, const Json& value) {
    if (field == "label") {
        if (!value.is_string()) {
            throw PlanError(field, "expected a string");
        }
        plan.label = value.get<std::string>();
    } else if (field == "hypothesis") {
        if (!value.is_string()) {
            throw PlanError(field, "expected \"null\" or \"alternative\"");
        }
        try {
            plan.sim.hypothesis = parse_hypothesis(value.get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw PlanError(field, e.what());
        }
    } else if (field == "t") {
        plan.sim.length = as_count(field, value);
        require(field, plan.sim.length >= 3, "t must be at least 3");
    } else if (field == "theta0") {
        plan.sim.theta0 = as_number(field, value);
        require(field, std::abs(plan.sim.theta0) < 1.0, "|theta0| < 1 is required (contraction condition)");
    } else if (field == "theta1") {
        plan.sim.theta1 = as_number(field, value);
    } else if (field == "burn_in") {
        plan.sim.burn_in = as_count(field, value);
    } else if (field == "bandwidth") {
        plan.test.kernel.bandwidth = as_number(field, value);
        require(field, plan.test.kernel.bandwidth > 0.0, "bandwidth must be positive");
    } else if (field == "block_length") {
        plan.test.block_length = as_count(field, value);
        require(field, plan.test.block_length >= 1, "block length must be positive");
    } else if (field == "bootstrap_iters") {
        plan.test.bootstrap_iterations = as_count(field, value);
        require(field, plan.test.bootstrap_iterations >= 1, "at least one bootstrap iteration is required");
    } else if (field == "alphas") {
        if (!value.is_array() || value.empty()) {
            throw PlanError(field, "expected a nonempty array of numbers");
        }
        plan.test.alphas.clear();
        for (const Json& a : value) {
            const double alpha = as_number(field, a);
            require(field, alpha > 0.0 && alpha < 1.0, "every alpha must lie in (0, 1)");
            require(field, plan.test.alphas.empty() || alpha < plan.test.alphas.back(),
                    "alphas must be strictly descending");
            plan.test.alphas.push_back(alpha);
        }
    } else if (field == "replications") {
        plan.replications = as_count(field, value);
        require(field, plan.replications >= 1, "at least one replication is required");
    } else if (field == "grid_points") {
        plan.test.grid_rule.points = as_count(field, value);
        require(field, plan.test.grid_rule.points >= 1, "at least one grid point is required");
    } else if (field == "grid_lower_quantile") {
        plan.test.grid_rule.lower_quantile = as_number(field, value);
        require(field, plan.test.grid_rule.lower_quantile >= 0.0 && plan.test.grid_rule.lower_quantile < 1.0,
                "quantile must lie in [0, 1)");
    } else if (field == "grid_upper_quantile") {
        plan.test.grid_rule.upper_quantile = as_number(field, value);
        require(field, plan.test.grid_rule.upper_quantile > 0.0 && plan.test.grid_rule.upper_quantile <= 1.0,
                "quantile must lie in (0, 1]");
    } else if (field == "grid_spacing") {
        if (value == "uniform") {
            plan.test.grid_rule.spacing = GridRule::Spacing::Uniform;
        } else if (value == "quantile") {
            plan.test.grid_rule.spacing = GridRule::Spacing::Quantile;
        } else {
            throw PlanError(field, "expected \"uniform\" or \"quantile\"");
        }
    } else if (field == "refit") {
        if (!value.is_boolean()) {
            throw PlanError(field, "expected true or false");
        }
        plan.test.refit = value.get<bool>();
    } else if (field == "master_seed") {
        plan.master_seed = as_count(field, value);
    } else {
        throw PlanError(field, "unknown field");
    }
}

struct Axis {
    std::string field;
    std::vector<Json> values;
};

}  // namespace detail

/// Expands a plan document into concrete plans. Throws PlanError naming the
/// offending field; every expanded plan is validated.
[[nodiscard]] inline std::vector<ExperimentPlan> parse_plan_document(const Json& doc) {
    if (!doc.is_object()) {
        throw PlanError("<root>", "expected a JSON object");
    }
    for (const auto& [key, _] : doc.items()) {
        if (key != "schema" && key != "defaults" && key != "experiments") {
            throw PlanError(key, "unknown top-level field");
        }
    }
    if (!doc.contains("schema") || doc["schema"] != kPlanSchema) {
        throw PlanError("schema", std::string("expected \"") + kPlanSchema + "\"");
    }
    const Json defaults = doc.value("defaults", Json::object());
    if (!defaults.is_object()) {
        throw PlanError("defaults", "expected an object");
    }
    if (!doc.contains("experiments") || !doc["experiments"].is_array()) {
        throw PlanError("experiments", "expected an array");
    }
    if (doc["experiments"].empty()) {
        throw PlanError("experiments", "no experiments listed");
    }

    const auto known = [](const std::string& key) {
        const auto& fields = detail::plan_fields();
        return std::find(fields.begin(), fields.end(), key) != fields.end();
    };

    std::vector<ExperimentPlan> plans;
    for (const Json& experiment : doc["experiments"]) {
        if (!experiment.is_object()) {
            throw PlanError("experiments", "every experiment must be an object");
        }
        Json merged = Json::object();
        for (const auto& [key, value] : experiment.items()) {
            merged[key] = value;
        }
        for (const auto& [key, value] : defaults.items()) {
            if (!merged.contains(key)) {
                merged[key] = value;
            }
        }

        ExperimentPlan base;
        std::vector<detail::Axis> axes;
        for (const auto& [key, value] : merged.items()) {
            if (!known(key)) {
                throw PlanError(key, "unknown field");
            }
            if (value.is_array() && key != "alphas") {
                if (value.empty()) {
                    throw PlanError(key, "grid axis has no values");
                }
                axes.push_back({key, std::vector<Json>(value.begin(), value.end())});
            } else {
                detail::apply_field(base, key, value);
            }
        }

        std::vector<std::size_t> index(axes.size(), 0);
        const auto advance = [&] {
            for (std::size_t a = axes.size(); a-- > 0;) {
                if (++index[a] < axes[a].values.size()) {
                    return true;
                }
                index[a] = 0;
            }
            return false;
        };
        do {
            ExperimentPlan plan = base;
            for (std::size_t a = 0; a < axes.size(); ++a) {
                detail::apply_field(plan, axes[a].field, axes[a].values[index[a]]);
            }
            if (plan.test.block_length > plan.sim.length) {
                throw PlanError("block_length", "block length " + std::to_string(plan.test.block_length) +
                                                    " exceeds t = " + std::to_string(plan.sim.length));
            }
            plan.validate();
            plans.push_back(std::move(plan));
        } while (advance());
    }
    return plans;
}

[[nodiscard]] inline std::vector<ExperimentPlan> read_plan_document(std::istream& in) {
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw PlanError("<document>", std::string("malformed JSON: ") + e.what());
    }
    return parse_plan_document(doc);
}

}  // namespace cdfspec
