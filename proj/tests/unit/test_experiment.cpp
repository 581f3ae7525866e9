#include "aoi/experiment.hpp"
#include "aoi/errors.hpp"

#include <doctest.h>

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace aoi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("aoi_test_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    os << text;
}

} // namespace

TEST_CASE("format_double round-trips") {
    for (double x : {0.0, 1.0, 0.1, 1.0 / 3.0, 4.25, 1e-9, 123456.789, -2.5e-17}) {
        const std::string s = format_double(x);
        double back = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), back);
        CHECK(ec == std::errc());
        CHECK(ptr == s.data() + s.size());
        CHECK(back == x);
    }
}

TEST_CASE("invalid configs exit 2 with the field named and write nothing") {
    const fs::path dir = fresh_dir("invalid");
    const std::string bad_lambda = R"({
      "schema_version": 1, "kind": "sim_run",
      "sim": {"ues": [{"lambda": 1.5, "epsilon": 0.2, "cost": {"kind": "linear"}}]}
    })";
    const ExperimentOutcome outcome = run_experiment_text(bad_lambda, dir);
    CHECK(outcome.exit_code == 2);
    CHECK(outcome.message.find("lambda") != std::string::npos);
    CHECK(fs::is_empty(dir));

    CHECK(run_experiment_text("{not json", dir).exit_code == 2);
    CHECK(run_experiment_text(R"({"schema_version": 99, "kind": "sim_run"})", dir).exit_code == 2);
    CHECK(run_experiment_text(R"({"schema_version": 1, "kind": "mystery"})", dir).exit_code == 2);
    const std::string bad_policy = R"({
      "schema_version": 1, "kind": "sim_run",
      "sim": {"ues": [{"lambda": 0.5, "epsilon": 0.2, "cost": {"kind": "linear"}}],
              "policy": "mystery"}
    })";
    const ExperimentOutcome po = run_experiment_text(bad_policy, dir);
    CHECK(po.exit_code == 2);
    CHECK(po.message.find("policy") != std::string::npos);
    CHECK(fs::is_empty(dir));
}

TEST_CASE("index_table emits the pinned closed-form row") {
    const fs::path dir = fresh_dir("index_table");
    const std::string config = R"({
      "schema_version": 1, "kind": "index_table",
      "index_table": {"lambda": 0.5, "epsilon": 0.25, "cost": {"kind": "linear"},
                       "a_max": 4, "d_max": 4}
    })";
    const ExperimentOutcome outcome = run_experiment_text(config, dir);
    REQUIRE(outcome.exit_code == 0);
    const std::string body = slurp(outcome.results_file);
    CHECK(body.find("lambda,epsilon,cost,a,d,index,base_threshold") == 0);
    CHECK(body.find("0.5,0.25,linear,1,2,4.25,2") != std::string::npos);

    const json meta = json::parse(slurp(outcome.metadata_file));
    CHECK(meta.at("seed").get<int>() == 1);
    CHECK(meta.at("library_version").get<std::string>() == std::string(kLibraryVersion));
    CHECK(meta.contains("resolved_config"));
    CHECK(meta.at("wall_time_seconds").is_number());
}

TEST_CASE("sim_run emits fleet and per-ue rows") {
    const fs::path dir = fresh_dir("sim_run");
    const std::string config = R"({
      "schema_version": 1, "kind": "sim_run", "seed": 4,
      "sim": {"ues": [{"lambda": 1.0, "epsilon": 0.0, "cost": {"kind": "linear"}}],
              "horizon": 5000, "warmup": 500, "replications": 2, "policy": "whittle"}
    })";
    const ExperimentOutcome outcome = run_experiment_text(config, dir);
    REQUIRE(outcome.exit_code == 0);
    const std::string body = slurp(outcome.results_file);
    CHECK(body.find("target,mean_cost,ci_low,ci_high,mean_age,throughput,replications") == 0);
    CHECK(body.find("fleet,2,") != std::string::npos);
    CHECK(body.find("ue0,2,") != std::string::npos);
}

TEST_CASE("sweep results round-trip bit-identically from the resolved config") {
    const fs::path dir_a = fresh_dir("roundtrip_a");
    const std::string config = R"({
      "schema_version": 1, "kind": "sweep", "seed": 11,
      "sim": {"ues": [{"lambda": 0.5, "epsilon": 0.2, "cost": {"kind": "step_violation", "threshold": 4}},
                       {"lambda": 0.5, "epsilon": 0.2, "cost": {"kind": "step_violation", "threshold": 4}}],
              "horizon": 3000, "warmup": 100, "replications": 2},
      "sweep": {"lambda_grid": [0.4, 0.8], "epsilon_grid": [0.2], "policies": ["whittle", "age_greedy"]}
    })";
    const ExperimentOutcome first = run_experiment_text(config, dir_a);
    REQUIRE(first.exit_code == 0);

    const json meta = json::parse(slurp(first.metadata_file));
    const std::string resolved = meta.at("resolved_config").dump();
    const fs::path dir_b = fresh_dir("roundtrip_b");
    const ExperimentOutcome second = run_experiment_text(resolved, dir_b);
    REQUIRE(second.exit_code == 0);
    CHECK(slurp(first.results_file) == slurp(second.results_file));
}

TEST_CASE("json output format parses and matches the csv schema") {
    const fs::path dir = fresh_dir("json_fmt");
    const std::string config = R"({
      "schema_version": 1, "kind": "index_table", "format": "json",
      "index_table": {"lambda": 0.5, "epsilon": 0.25, "cost": {"kind": "linear"},
                       "a_max": 2, "d_max": 2}
    })";
    const ExperimentOutcome outcome = run_experiment_text(config, dir);
    REQUIRE(outcome.exit_code == 0);
    const json rows = json::parse(slurp(outcome.results_file));
    REQUIRE(rows.is_array());
    bool found = false;
    for (const json& row : rows) {
        if (row.at("a") == 1 && row.at("d") == 2) {
            CHECK(row.at("index").get<double>() == doctest::Approx(4.25));
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("sim_run resolves the optimal policy through a joint solve") {
    const fs::path dir = fresh_dir("sim_optimal");
    const std::string config = R"({
      "schema_version": 1, "kind": "sim_run", "seed": 5,
      "sim": {"ues": [{"lambda": 0.5, "epsilon": 0.25, "cost": {"kind": "linear"}}],
              "horizon": 20000, "warmup": 1000, "replications": 2, "policy": "optimal"},
      "joint": {"a_cap": 16, "d_cap": 16}
    })";
    const ExperimentOutcome outcome = run_experiment_text(config, dir);
    REQUIRE(outcome.exit_code == 0);
    const auto body = slurp(outcome.results_file);
    CHECK(body.find("fleet,") != std::string::npos);
}

TEST_CASE("oracle_check compares closed form against bisection") {
    const fs::path dir = fresh_dir("oracle_check");
    const std::string config = R"({
      "schema_version": 1, "kind": "oracle_check",
      "oracle_check": {"lambda": 0.6, "epsilon": 0.3, "cost": {"kind": "linear"},
                        "a_max": 1, "d_max": 1, "oracle_a_cap": 48, "oracle_d_cap": 48}
    })";
    const ExperimentOutcome outcome = run_experiment_text(config, dir);
    REQUIRE(outcome.exit_code == 0);
    const std::string body = slurp(outcome.results_file);
    CHECK(body.find("lambda,epsilon,cost,a,d,closed_form,bisection,rel_err") == 0);
    // (1,1) is a state where the closed form is tight
    CHECK(body.find("0.6,0.3,linear,1,1,1.46666") != std::string::npos);
}

TEST_CASE("seed override changes the resolved config") {
    const fs::path dir = fresh_dir("seed_override");
    const std::string config = R"({
      "schema_version": 1, "kind": "sim_run", "seed": 3,
      "sim": {"ues": [{"lambda": 0.5, "epsilon": 0.2, "cost": {"kind": "linear"}}],
              "horizon": 2000, "warmup": 100, "replications": 2, "policy": "age_greedy"}
    })";
    RunOverrides overrides;
    overrides.seed = 99;
    const ExperimentOutcome outcome = run_experiment_text(config, dir, overrides);
    REQUIRE(outcome.exit_code == 0);
    const json meta = json::parse(slurp(outcome.metadata_file));
    CHECK(meta.at("seed").get<std::uint64_t>() == 99);
    CHECK(meta.at("resolved_config").at("seed").get<std::uint64_t>() == 99);
}

TEST_CASE("compare_policies: identical tables show no separation") {
    std::vector<SweepRow> rows = {{0.1, 0.2, "whittle", 0.5, 0.49, 0.51, 4},
                                  {0.2, 0.2, "whittle", 0.4, 0.39, 0.41, 4}};
    const ComparisonReport report = compare_policies(rows, rows);
    CHECK(report.all_a_leq_b);
    CHECK(report.separated_fraction == 0.0);
    for (const auto& cell : report.cells) {
        CHECK(cell.a_leq_b);
        CHECK_FALSE(cell.ci_separated);
        CHECK(cell.a_mean == cell.b_mean);
    }
}

TEST_CASE("compare_policies: separation and grid mismatch") {
    std::vector<SweepRow> a = {{0.1, 0.2, "whittle", 0.30, 0.29, 0.31, 4}};
    std::vector<SweepRow> b = {{0.1, 0.2, "age_greedy", 0.40, 0.38, 0.42, 4}};
    const ComparisonReport report = compare_policies(a, b);
    CHECK(report.all_a_leq_b);
    CHECK(report.cells[0].ci_separated);
    CHECK(report.separated_fraction == 1.0);

    std::vector<SweepRow> c = {{0.2, 0.2, "age_greedy", 0.40, 0.38, 0.42, 4}};
    CHECK_THROWS_AS(compare_policies(a, c), GridMismatch);
    std::vector<SweepRow> d;
    CHECK_THROWS_AS(compare_policies(a, d), GridMismatch);
}

TEST_CASE("sweep csv reader and policy selection") {
    const fs::path dir = fresh_dir("reader");
    const fs::path file = dir / "table.csv";
    spit(file,
         "lambda,epsilon,policy,mean_cost,ci_low,ci_high,replications\n"
         "0.1,0.2,whittle,0.5,0.49,0.51,4\n"
         "0.1,0.2,age_greedy,0.6,0.59,0.61,4\n");
    const auto rows = read_sweep_csv(file);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].policy == "whittle");
    CHECK(rows[1].mean_cost == 0.6);
    const auto selected = select_policy(rows, "age_greedy");
    REQUIRE(selected.size() == 1);
    CHECK(selected[0].ci_low == 0.59);

    spit(file, "wrong,header\n");
    CHECK_THROWS(read_sweep_csv(file));
}

TEST_CASE("chart rendering produces an svg") {
    const fs::path dir = fresh_dir("chart");
    std::vector<SweepRow> rows = {{0.1, 0.2, "whittle", 0.5, 0.49, 0.51, 4},
                                  {0.5, 0.2, "whittle", 0.3, 0.29, 0.31, 4},
                                  {0.1, 0.2, "age_greedy", 0.6, 0.59, 0.61, 4},
                                  {0.5, 0.2, "age_greedy", 0.4, 0.39, 0.41, 4}};
    const fs::path file = dir / "chart.svg";
    write_sweep_chart_svg(rows, file);
    const std::string svg = slurp(file);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("whittle") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("presets materialize the documented defaults") {
    const Fig2Preset fig2 = make_fig2_preset();
    CHECK(fig2.sim.ues.size() == 2);
    CHECK(fig2.sim.ues[0].cost.step_threshold() == 6);
    CHECK(fig2.sim.ues[0].lambda == 0.6);
    CHECK(fig2.sim.ues[0].epsilon == 0.2);
    CHECK(fig2.sim.horizon == 1'000'000);
    CHECK(fig2.sim.replications == 20);

    const FigSweepPreset fig3 = make_fig3_preset();
    CHECK(fig3.sim.ues.size() == 6);
    for (const UeConfig& ue : fig3.sim.ues) CHECK(ue.cost.step_threshold() == 10);
    CHECK(fig3.spec.lambda_grid.size() == 10);
    CHECK(fig3.spec.epsilon_grid == std::vector<double>{0.2, 0.5});
    CHECK(fig3.spec.policies ==
          std::vector<std::string>{"whittle", "age_greedy", "on_demand_whittle"});

    const FigSweepPreset fig4 = make_fig4_preset();
    CHECK(fig4.sim.ues[0].cost.step_threshold() == 10);
    CHECK(fig4.sim.ues[5].cost.step_threshold() == 15);
}

TEST_CASE("preset overrides run end to end at a reduced size") {
    const fs::path dir = fresh_dir("fig3_small");
    const std::string config = R"({
      "schema_version": 1, "kind": "preset_fig3", "seed": 2,
      "preset": {"horizon": 2000, "warmup": 100, "replications": 2,
                  "lambda_grid": [0.4], "epsilon_grid": [0.2]}
    })";
    const ExperimentOutcome outcome = run_experiment_text(config, dir);
    REQUIRE(outcome.exit_code == 0);
    const auto rows = read_sweep_csv(outcome.results_file);
    CHECK(rows.size() == 3); // one grid point, three policies
    for (const auto& row : rows) CHECK(row.lambda == 0.4);
}
