#include "aoi/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

int run_command(const std::string& config, const std::string& out_dir,
                std::optional<std::uint64_t> seed, std::optional<int> threads,
                const std::string& format) {
    aoi::RunOverrides overrides;
    overrides.seed = seed;
    overrides.threads = threads;
    if (!format.empty()) {
        if (format == "csv")
            overrides.format = aoi::OutputFormat::Csv;
        else if (format == "json")
            overrides.format = aoi::OutputFormat::Json;
        else {
            std::cerr << "error: --format must be csv or json\n";
            return 2;
        }
    }
    const aoi::ExperimentOutcome outcome = aoi::run_experiment(config, out_dir, overrides);
    if (outcome.exit_code != 0) {
        std::cerr << "error: " << outcome.message << "\n";
        return outcome.exit_code;
    }
    std::cout << "wrote " << outcome.results_file.string() << "\n"
              << "wrote " << outcome.metadata_file.string() << "\n";
    return 0;
}

int compare_command(const std::string& file_a, const std::string& file_b,
                    const std::string& policy_a, const std::string& policy_b,
                    const std::string& out_file) {
    try {
        auto table_a = aoi::read_sweep_csv(file_a);
        auto table_b = file_b.empty() ? table_a : aoi::read_sweep_csv(file_b);
        auto rows_a = policy_a.empty() ? table_a : aoi::select_policy(table_a, policy_a);
        auto rows_b = policy_b.empty() ? table_b : aoi::select_policy(table_b, policy_b);
        if (rows_a.empty() || rows_b.empty()) {
            std::cerr << "error: no rows selected for comparison\n";
            return 2;
        }
        const aoi::ComparisonReport report = aoi::compare_policies(rows_a, rows_b);
        if (!out_file.empty()) aoi::write_comparison_csv(report, out_file);
        int le = 0;
        for (const auto& cell : report.cells)
            if (cell.a_leq_b) ++le;
        std::cout << "grid points: " << report.cells.size() << "\n"
                  << "a <= b at: " << le << "\n"
                  << "ci separated fraction: " << aoi::format_double(report.separated_fraction)
                  << "\n"
                  << (report.all_a_leq_b ? "ordering holds everywhere" : "ordering violated")
                  << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

int plot_command(const std::string& input, const std::string& output) {
    try {
        const auto rows = aoi::read_sweep_csv(input);
        aoi::write_sweep_chart_svg(rows, output);
        std::cout << "wrote " << output << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"age-of-information scheduling experiments"};
    app.require_subcommand(0, 1);

    std::string config;
    std::string out_dir = ".";
    std::string format;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config, "experiment config file (json)");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--format", format, "csv or json");

    auto* compare = app.add_subcommand("compare", "order two policy result tables");
    std::string file_a, file_b, policy_a, policy_b, report_file;
    compare->add_option("--a", file_a, "first sweep csv")->required();
    compare->add_option("--b", file_b, "second sweep csv (defaults to --a)");
    compare->add_option("--policy-a", policy_a, "policy name to select from --a");
    compare->add_option("--policy-b", policy_b, "policy name to select from --b");
    compare->add_option("--report", report_file, "write the per-point report csv here");

    auto* plot = app.add_subcommand("plot", "render a sweep csv as an svg line chart");
    std::string plot_in, plot_out = "chart.svg";
    plot->add_option("--input", plot_in, "sweep csv")->required();
    plot->add_option("--output", plot_out, "svg file");

    CLI11_PARSE(app, argc, argv);

    if (compare->parsed()) return compare_command(file_a, file_b, policy_a, policy_b, report_file);
    if (plot->parsed()) return plot_command(plot_in, plot_out);
    if (config.empty()) {
        std::cerr << "error: --config is required (see --help)\n";
        return 2;
    }
    return run_command(config, out_dir, seed, threads, format);
}
