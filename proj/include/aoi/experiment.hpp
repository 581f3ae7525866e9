#pragma once

#include "aoi/oracle.hpp"
#include "aoi/sim.hpp"
#include "aoi/whittle.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aoi {

inline constexpr std::string_view kLibraryVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

enum class OutputFormat { Csv, Json };

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<OutputFormat> format;
};

struct ExperimentOutcome {
    /// 0 success, 2 invalid config, 3 runtime failure.
    int exit_code = 0;
    std::string message;
    std::filesystem::path results_file;
    std::filesystem::path metadata_file;
};

/// Parse, validate and execute one experiment config, writing the results
/// file and a metadata file (resolved config, seed, version, wall time)
/// into out_dir. Outputs are written atomically or not at all.
ExperimentOutcome run_experiment(const std::filesystem::path& config_path,
                                 const std::filesystem::path& out_dir,
                                 const RunOverrides& overrides = {});

/// Same, for an in-memory config text (used for re-running a resolved
/// config from a metadata file).
ExperimentOutcome run_experiment_text(const std::string& config_text,
                                      const std::filesystem::path& out_dir,
                                      const RunOverrides& overrides = {});

/// One row of a sweep results table.
struct SweepRow {
    double lambda = 0.0;
    double epsilon = 0.0;
    std::string policy;
    double mean_cost = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    int replications = 0;
};

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

struct ComparisonCell {
    double lambda = 0.0;
    double epsilon = 0.0;
    double a_mean = 0.0, a_lo = 0.0, a_hi = 0.0;
    double b_mean = 0.0, b_lo = 0.0, b_hi = 0.0;
    bool a_leq_b = false;
    bool ci_separated = false; // a's upper CI bound below b's lower bound
};

struct ComparisonReport {
    std::vector<ComparisonCell> cells;
    bool all_a_leq_b = true;
    double separated_fraction = 0.0;
};

/// Per-grid-point ordering of two single-policy tables over the same
/// (lambda, epsilon) grid. Throws GridMismatch when grids differ.
ComparisonReport compare_policies(std::span<const SweepRow> a, std::span<const SweepRow> b);

/// Select one policy's rows out of a mixed table, preserving grid order.
std::vector<SweepRow> select_policy(std::span<const SweepRow> table, const std::string& policy);

void write_comparison_csv(const ComparisonReport& report, const std::filesystem::path& path);

/// Minimal line chart (mean_cost vs lambda, one series per policy/epsilon
/// pair) rendered as a standalone SVG file.
void write_sweep_chart_svg(std::span<const SweepRow> rows, const std::filesystem::path& path);

/// Experiment presets shared by the CLI and the acceptance suite.
struct Fig2Preset {
    SimConfig sim;   // two users, violation cost at age 6
    JointMdp joint;  // matching joint model for the optimal baseline
};
Fig2Preset make_fig2_preset();

struct FigSweepPreset {
    SimConfig sim;
    SweepSpec spec;
};
FigSweepPreset make_fig3_preset(); // six users, homogeneous violation cost at age 10
FigSweepPreset make_fig4_preset(); // six users, half at age 10 and half at age 15

} // namespace aoi
