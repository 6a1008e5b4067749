#pragma once

// Series files, result tables and JSON documents.

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cdfspec/montecarlo.hpp"
#include "cdfspec/process.hpp"
#include "cdfspec/spectest.hpp"

namespace cdfspec {

using Json = nlohmann::ordered_json;

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One float per line; blank lines and text after '#' are ignored.
[[nodiscard]] inline std::vector<double> read_series(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) {
            continue;
        }
        const auto last = line.find_last_not_of(" \t\r");
        const std::string token = line.substr(first, last - first + 1);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(token, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != token.size() || !std::isfinite(value)) {
            throw InputError("line " + std::to_string(line_no) + ": '" + token + "' is not a finite number");
        }
        values.push_back(value);
    }
    return values;
}

/// Round-trippable decimal form.
[[nodiscard]] inline std::string format_exact(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

/// Six significant digits, as used in result tables.
[[nodiscard]] inline std::string format_g6(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", value);
    return buf;
}

inline void write_series(std::ostream& out, std::span<const double> values) {
    for (double v : values) {
        out << format_exact(v) << '\n';
    }
}

[[nodiscard]] inline Json to_json(const SimSpec& spec) {
    return Json{{"t", spec.length},
                {"theta0", spec.theta0},
                {"theta1", spec.theta1},
                {"hypothesis", to_string(spec.hypothesis)},
                {"seed", spec.seed},
                {"burn_in", spec.burn_in},
                {"x0", 0.0},
                {"innovations", "N(0,1), Marsaglia polar on mt19937_64"}};
}

[[nodiscard]] inline Json to_json(const WeightGrid& grid) {
    return Json{{"points", grid.points}, {"weights", grid.weights}};
}

[[nodiscard]] inline Json to_json(const TestConfig& config) {
    return Json{{"kernel", to_string(config.kernel.kind)},
                {"bandwidth", config.kernel.bandwidth},
                {"block_length", config.block_length},
                {"bootstrap_iters", config.bootstrap_iterations},
                {"alphas", config.alphas},
                {"refit", config.refit},
                {"grid_points", config.grid_rule.points},
                {"grid_lower_quantile", config.grid_rule.lower_quantile},
                {"grid_upper_quantile", config.grid_rule.upper_quantile},
                {"grid_spacing", config.grid_rule.spacing == GridRule::Spacing::Uniform ? "uniform" : "quantile"},
                {"seed", config.seed}};
}

[[nodiscard]] inline Json to_json(const TestOutcome& outcome, const TestConfig& config) {
    Json decisions = Json::array();
    for (const AlphaDecision& d : outcome.decisions) {
        decisions.push_back({{"alpha", d.alpha}, {"critical_value", d.critical_value}, {"reject", d.reject}});
    }
    return Json{{"statistic", outcome.statistic},
                {"theta_hat", outcome.theta_hat},
                {"decisions", decisions},
                {"bootstrap_stats", outcome.bootstrap_stats},
                {"grid", to_json(outcome.grid)},
                {"config", to_json(config)},
                {"warnings", outcome.warnings}};
}

[[nodiscard]] inline Json to_json(const ExperimentPlan& plan) {
    Json sim = to_json(plan.sim);
    sim.erase("seed");
    Json test = to_json(plan.test);
    test.erase("seed");
    return Json{{"label", plan.label},
                {"replications", plan.replications},
                {"master_seed", plan.master_seed},
                {"sim", sim},
                {"test", test}};
}

[[nodiscard]] inline Json to_json(const ExperimentResult& result) {
    Json seeds = Json::array();
    for (std::size_t r = 0; r < result.plan.replications; ++r) {
        const ReplicationSeeds s = replication_seeds(result.plan.master_seed, r);
        seeds.push_back({s.simulation, s.bootstrap});
    }
    Json levels = Json::array();
    for (std::size_t k = 0; k < result.rejection_count.size(); ++k) {
        levels.push_back({{"alpha", result.plan.test.alphas[k]},
                          {"rejection_count", result.rejection_count[k]},
                          {"rejection_rate", result.rejection_rate[k]}});
    }
    return Json{{"plan", to_json(result.plan)},
                {"results", levels},
                {"elapsed_seconds", result.elapsed_seconds},
                {"replication_seeds", seeds}};
}

[[nodiscard]] inline Json to_json(std::span<const TableRow> rows) {
    Json out = Json::array();
    for (const TableRow& row : rows) {
        if (row.result) {
            out.push_back(to_json(*row.result));
        } else {
            out.push_back({{"plan", to_json(row.plan)}, {"error", row.error}});
        }
    }
    return out;
}

inline constexpr std::string_view kCsvHeader =
    "label,T,hypothesis,theta0,theta1,b,l_B,B_Iter,replications,alpha,rejection_count,rejection_rate";

[[nodiscard]] inline std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(text);
    }
    std::string quoted = "\"";
    for (char c : text) {
        quoted += c;
        if (c == '"') {
            quoted += '"';
        }
    }
    return quoted + '"';
}

/// One row per plan and significance level. Failed plans produce no rows.
inline void write_csv(std::ostream& out, std::span<const ExperimentResult> results) {
    out << kCsvHeader << '\n';
    for (const ExperimentResult& r : results) {
        const ExperimentPlan& p = r.plan;
        for (std::size_t k = 0; k < p.test.alphas.size(); ++k) {
            out << csv_field(p.label) << ',' << p.sim.length << ',' << to_string(p.sim.hypothesis) << ','
                << format_g6(p.sim.theta0) << ',' << format_g6(p.sim.theta1) << ','
                << format_g6(p.test.kernel.bandwidth) << ',' << p.test.block_length << ','
                << p.test.bootstrap_iterations << ',' << p.replications << ',' << format_g6(p.test.alphas[k]) << ','
                << r.rejection_count[k] << ',' << format_g6(r.rejection_rate[k]) << '\n';
        }
    }
}

inline void write_csv(std::ostream& out, std::span<const TableRow> rows) {
    std::vector<ExperimentResult> ok;
    for (const TableRow& row : rows) {
        if (row.result) {
            ok.push_back(*row.result);
        }
    }
    write_csv(out, std::span<const ExperimentResult>(ok));
}

}  // namespace cdfspec
