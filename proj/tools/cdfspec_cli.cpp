// cdfspec: simulate paths, test a series, run experiment plans.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid arguments or input.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdfspec/estimators.hpp"
#include "cdfspec/io.hpp"
#include "cdfspec/montecarlo.hpp"
#include "cdfspec/plan.hpp"
#include "cdfspec/process.hpp"
#include "cdfspec/spectest.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Raised for anything the user can fix by changing arguments or input files.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimulateArgs {
    std::size_t t = 400;
    double theta0 = 0.3;
    double theta1 = 0.9;
    std::string hypothesis = "null";
    std::uint64_t seed = 0;
    std::size_t burn_in = cdfspec::kDefaultBurnIn;
    std::string output;
};

struct TestArgs {
    std::string input;
    double bandwidth = cdfspec::kDefaultBandwidth;
    std::size_t block_length = 10;
    std::size_t bootstrap_iters = 200;
    std::vector<double> alphas = cdfspec::kDefaultAlphas;
    std::size_t grid_points = 101;
    bool refit = false;
    std::uint64_t seed = 0;
    std::string format = "csv";
    std::string output;
};

struct ExperimentArgs {
    std::string input;
    std::string output;
    std::string format = "csv";
    std::size_t replications = 0;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    bool quiet = false;
};

template <typename Fn>
auto as_usage(Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    } catch (const cdfspec::InputError& e) {
        throw UsageError(e.what());
    }
}

std::vector<double> descending_alphas(std::vector<double> alphas) {
    std::sort(alphas.begin(), alphas.end(), std::greater<>{});
    alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
    return alphas;
}

/// Writes through `emit` to `path`, or to stdout when the path is empty.
void write_output(const std::string& path, const std::function<void(std::ostream&)>& emit) {
    if (path.empty()) {
        emit(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    emit(out);
    if (!out) {
        throw std::runtime_error("write to '" + path + "' failed");
    }
}

int cmd_simulate(const SimulateArgs& args) {
    cdfspec::SimSpec spec;
    as_usage([&] {
        spec.length = args.t;
        spec.theta0 = args.theta0;
        spec.theta1 = args.theta1;
        spec.hypothesis = cdfspec::parse_hypothesis(args.hypothesis);
        spec.seed = args.seed;
        spec.burn_in = args.burn_in;
        spec.validate();
        return 0;
    });
    const cdfspec::TimeSeries series = cdfspec::simulate(spec);
    write_output(args.output, [&](std::ostream& out) { cdfspec::write_series(out, series.values); });
    if (!args.output.empty()) {
        write_output(args.output + ".json",
                     [&](std::ostream& out) { out << cdfspec::to_json(spec).dump(2) << '\n'; });
    }
    return kExitOk;
}

int cmd_test(const TestArgs& args) {
    cdfspec::TestConfig config;
    const std::vector<double> series = as_usage([&] {
        if (args.format != "csv" && args.format != "json") {
            throw std::invalid_argument("--format must be csv or json");
        }
        config.kernel.bandwidth = args.bandwidth;
        config.block_length = args.block_length;
        config.bootstrap_iterations = args.bootstrap_iters;
        config.alphas = descending_alphas(args.alphas);
        config.grid_rule.points = args.grid_points;
        config.refit = args.refit;
        config.seed = args.seed;
        config.validate();

        std::ifstream in(args.input);
        if (!in) {
            throw std::invalid_argument("cannot read input file '" + args.input + "'");
        }
        std::vector<double> values = cdfspec::read_series(in);
        if (values.size() < 3) {
            throw std::invalid_argument("input series has " + std::to_string(values.size()) +
                                        " values; at least 3 are required");
        }
        if (config.block_length > values.size()) {
            throw std::invalid_argument("--block-length exceeds the series length");
        }
        return values;
    });

    const cdfspec::TestOutcome outcome = cdfspec::run_test(series, cdfspec::abs_autoregression(), config);
    for (const std::string& warning : outcome.warnings) {
        std::cerr << "warning: " << warning << '\n';
    }
    write_output(args.output, [&](std::ostream& out) {
        if (args.format == "json") {
            out << cdfspec::to_json(outcome, config).dump(2) << '\n';
            return;
        }
        out << "alpha,statistic,critical_value,reject\n";
        for (const cdfspec::AlphaDecision& d : outcome.decisions) {
            out << cdfspec::format_g6(d.alpha) << ',' << cdfspec::format_g6(outcome.statistic) << ','
                << cdfspec::format_g6(d.critical_value) << ',' << (d.reject ? 1 : 0) << '\n';
        }
    });
    return kExitOk;
}

int cmd_experiment(const ExperimentArgs& args, bool seed_given, bool replications_given) {
    std::vector<cdfspec::ExperimentPlan> plans = as_usage([&] {
        if (args.format != "csv" && args.format != "json") {
            throw std::invalid_argument("--format must be csv or json");
        }
        std::ifstream in(args.input);
        if (!in) {
            throw std::invalid_argument("cannot read plan file '" + args.input + "'");
        }
        auto parsed = cdfspec::read_plan_document(in);
        for (auto& plan : parsed) {
            if (replications_given) {
                if (args.replications == 0) {
                    throw std::invalid_argument("--replications must be at least 1");
                }
                plan.replications = args.replications;
            }
            if (seed_given) {
                plan.master_seed = args.seed;
            }
        }
        return parsed;
    });

    cdfspec::RunOptions options;
    options.workers = args.workers == 0 ? cdfspec::default_workers() : args.workers;
    if (!args.quiet) {
        options.progress = [](const std::string& label, std::size_t done, std::size_t total) {
            if (done == total || done % 50 == 0) {
                std::cerr << "[" << label << "] " << done << "/" << total << " replications\n";
            }
        };
    }
    const std::vector<cdfspec::TableRow> rows = cdfspec::run_table(plans, cdfspec::abs_autoregression(), options);

    bool failed = false;
    for (const cdfspec::TableRow& row : rows) {
        if (!row.result) {
            failed = true;
            std::cerr << "error: plan '" << row.plan.label << "': " << row.error << '\n';
        }
    }

    const auto emit_csv = [&](std::ostream& out) { cdfspec::write_csv(out, std::span<const cdfspec::TableRow>(rows)); };
    const auto emit_json = [&](std::ostream& out) {
        out << cdfspec::to_json(std::span<const cdfspec::TableRow>(rows)).dump(2) << '\n';
    };
    if (args.output.empty()) {
        write_output("", args.format == "json" ? std::function<void(std::ostream&)>(emit_json)
                                               : std::function<void(std::ostream&)>(emit_csv));
    } else {
        write_output(args.output + ".csv", emit_csv);
        write_output(args.output + ".json", emit_json);
    }
    return failed ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bootstrap specification test for nonlinear autoregressions"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Simulate a sample path");
    simulate->add_option("--t", sim.t, "Series length")->capture_default_str();
    simulate->add_option("--theta0", sim.theta0, "Mean parameter, |theta0| < 1")->capture_default_str();
    simulate->add_option("--theta1", sim.theta1, "Heteroskedasticity parameter (alternative only)")
        ->capture_default_str();
    simulate->add_option("--hypothesis", sim.hypothesis, "null or alternative")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--burn-in", sim.burn_in, "Discarded transient steps")->capture_default_str();
    simulate->add_option("--output", sim.output, "Output file (one value per line); writes <output>.json too");

    TestArgs test;
    auto* test_cmd = app.add_subcommand("test", "Test theta*|x| on a series file");
    test_cmd->add_option("--input", test.input, "Series file: one number per line, '#' comments")->required();
    test_cmd->add_option("--bandwidth", test.bandwidth, "Kernel bandwidth b")->capture_default_str();
    test_cmd->add_option("--block-length", test.block_length, "Bootstrap block length")->capture_default_str();
    test_cmd->add_option("--bootstrap-iters", test.bootstrap_iters, "Bootstrap rounds")->capture_default_str();
    test_cmd->add_option("--alphas", test.alphas, "Significance levels")->delimiter(',')->capture_default_str();
    test_cmd->add_option("--grid-points", test.grid_points, "Weight grid size")->capture_default_str();
    test_cmd->add_flag("--refit,!--no-refit", test.refit, "Re-estimate theta on every resample");
    test_cmd->add_option("--seed", test.seed, "Bootstrap seed")->capture_default_str();
    test_cmd->add_option("--format", test.format, "csv or json")->capture_default_str();
    test_cmd->add_option("--output", test.output, "Report file (default stdout)");

    ExperimentArgs exp;
    auto* experiment = app.add_subcommand("experiment", "Run an experiment plan file");
    experiment->add_option("--input", exp.input, "Plan file (JSON)")->required();
    experiment->add_option("--output", exp.output, "Output prefix: writes <prefix>.csv and <prefix>.json");
    experiment->add_option("--format", exp.format, "stdout format when --output is absent: csv or json")
        ->capture_default_str();
    auto* reps_opt = experiment->add_option("--replications", exp.replications, "Override replications per plan");
    auto* seed_opt = experiment->add_option("--seed", exp.seed, "Override the master seed");
    experiment->add_option("--workers", exp.workers, "Worker threads (0 = hardware concurrency)");
    experiment->add_flag("--quiet", exp.quiet, "No progress on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(sim);
        }
        if (test_cmd->parsed()) {
            return cmd_test(test);
        }
        return cmd_experiment(exp, seed_opt->count() > 0, reps_opt->count() > 0);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}
