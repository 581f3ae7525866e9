#include "aoi/experiment.hpp"

#include "aoi/errors.hpp"
#include "aoi/policies.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace aoi {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Invalid-config failures carry the offending field path.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field + ": " + what) {}
};

const json& require(const json& j, const char* key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "." + key, "missing required field");
    return *it;
}

double require_number(const json& j, const char* key, const std::string& path) {
    const json& v = require(j, key, path);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<double>();
}

double number_or(const json& j, const char* key, double fallback) {
    auto it = j.find(key);
    return it == j.end() ? fallback : it->get<double>();
}

long integer_or(const json& j, const char* key, long fallback, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    return it->get<long>();
}

double require_probability(const json& j, const char* key, const std::string& path) {
    const double x = require_number(j, key, path);
    if (!(x >= 0.0 && x <= 1.0)) throw ConfigError(path + "." + key, "must lie in [0, 1]");
    return x;
}

CostFunction parse_cost(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object {kind, params}");
    const json& kind = require(j, "kind", path);
    if (!kind.is_string()) throw ConfigError(path + ".kind", "expected a string");
    const std::string name = kind.get<std::string>();
    try {
        if (name == "linear") return CostFunction::linear();
        if (name == "step_violation") {
            const long h = integer_or(j, "threshold", -1, path);
            if (h < 1) throw ConfigError(path + ".threshold", "must be an integer >= 1");
            return CostFunction::step_violation(static_cast<int>(h));
        }
        if (name == "polynomial") {
            const long p = integer_or(j, "degree", -1, path);
            const double c = number_or(j, "coefficient", 1.0);
            if (p < 1) throw ConfigError(path + ".degree", "must be an integer >= 1");
            return CostFunction::polynomial(static_cast<int>(p), c);
        }
        if (name == "constant") return CostFunction::constant(number_or(j, "value", 0.0));
    } catch (const RejectedParameters& e) {
        throw ConfigError(path, e.what());
    }
    throw ConfigError(path + ".kind", "unknown cost kind '" + name + "'");
}

json cost_to_json(const CostFunction& v) {
    switch (v.kind()) {
        case CostFunction::Kind::Linear: return {{"kind", "linear"}};
        case CostFunction::Kind::StepViolation:
            return {{"kind", "step_violation"}, {"threshold", v.step_threshold()}};
        case CostFunction::Kind::Polynomial:
            return {{"kind", "polynomial"}, {"degree", v.degree()}, {"coefficient", v.coefficient()}};
        case CostFunction::Kind::Constant:
            return {{"kind", "constant"}, {"value", v.coefficient()}};
    }
    return {};
}

UeConfig parse_ue(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    UeConfig ue;
    ue.lambda = require_probability(j, "lambda", path);
    ue.epsilon = require_probability(j, "epsilon", path);
    ue.cost = parse_cost(require(j, "cost", path), path + ".cost");
    return ue;
}

json ue_to_json(const UeConfig& ue) {
    return {{"lambda", ue.lambda}, {"epsilon", ue.epsilon}, {"cost", cost_to_json(ue.cost)}};
}

std::vector<UeConfig> parse_ues(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
    std::vector<UeConfig> ues;
    for (size_t i = 0; i < j.size(); ++i)
        ues.push_back(parse_ue(j[i], path + "[" + std::to_string(i) + "]"));
    return ues;
}

void check_policy_feasible(const std::string& policy, std::span<const UeConfig> ues,
                           const std::string& path) {
    if (std::find(known_policies().begin(), known_policies().end(), policy) ==
        known_policies().end())
        throw ConfigError(path, "unknown policy '" + policy + "'");
    if (!policy_uses_index(policy)) return;
    for (size_t n = 0; n < ues.size(); ++n) {
        const double lambda = policy == "on_demand_whittle" ? 1.0 : ues[n].lambda;
        ValidationResult ok = validate(ues[n].cost, lambda, ues[n].epsilon);
        if (!ok)
            throw ConfigError(path, "policy '" + policy + "' cannot index UE " +
                                        std::to_string(n) + " (" + ok.message + ")");
    }
}

SimConfig parse_sim(const json& j, const std::string& path, std::uint64_t seed, int threads) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    SimConfig config;
    config.ues = parse_ues(require(j, "ues", path), path + ".ues");
    config.horizon = integer_or(j, "horizon", 100'000, path);
    config.warmup = integer_or(j, "warmup", std::max(1000L, config.horizon / 100), path);
    config.replications = static_cast<int>(integer_or(j, "replications", 1, path));
    config.charge = number_or(j, "charge", 0.0);
    config.policy = j.value("policy", std::string("whittle"));
    config.seed = seed;
    config.threads = threads;
    if (config.horizon <= config.warmup || config.warmup < 0)
        throw ConfigError(path + ".horizon", "requires horizon > warmup >= 0");
    if (config.replications < 1)
        throw ConfigError(path + ".replications", "must be >= 1");
    if (config.charge < 0.0) throw ConfigError(path + ".charge", "must be >= 0");
    return config;
}

json sim_to_json(const SimConfig& config) {
    json ues = json::array();
    for (const UeConfig& ue : config.ues) ues.push_back(ue_to_json(ue));
    return {{"ues", std::move(ues)}, {"horizon", config.horizon},    {"warmup", config.warmup},
            {"replications", config.replications}, {"charge", config.charge},
            {"policy", config.policy}};
}

std::vector<double> parse_grid(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
    std::vector<double> grid;
    for (const json& v : j) {
        if (!v.is_number()) throw ConfigError(path, "expected numbers");
        const double x = v.get<double>();
        if (!(x >= 0.0 && x <= 1.0)) throw ConfigError(path, "grid values must lie in [0, 1]");
        grid.push_back(x);
    }
    return grid;
}

SweepSpec parse_sweep(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
    SweepSpec spec;
    spec.lambda_grid = parse_grid(require(j, "lambda_grid", path), path + ".lambda_grid");
    spec.epsilon_grid = parse_grid(require(j, "epsilon_grid", path), path + ".epsilon_grid");
    const json& pol = require(j, "policies", path);
    if (!pol.is_array() || pol.empty())
        throw ConfigError(path + ".policies", "expected a non-empty array");
    for (const json& p : pol) spec.policies.push_back(p.get<std::string>());
    return spec;
}

json sweep_to_json(const SweepSpec& spec) {
    return {{"lambda_grid", spec.lambda_grid},
            {"epsilon_grid", spec.epsilon_grid},
            {"policies", spec.policies}};
}

// ---------------------------------------------------------------------------
// Result tables

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string to_csv(const Table& table) {
    std::ostringstream os;
    for (size_t c = 0; c < table.columns.size(); ++c)
        os << (c ? "," : "") << csv_escape(table.columns[c]);
    os << "\n";
    for (const auto& row : table.rows) {
        for (size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_escape(row[c]);
        os << "\n";
    }
    return os.str();
}

std::string to_json_text(const Table& table) {
    json rows = json::array();
    for (const auto& row : table.rows) {
        json obj;
        for (size_t c = 0; c < row.size(); ++c) {
            // numbers stay numbers in the json output
            const std::string& cell = row[c];
            double x = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
            if (ec == std::errc() && ptr == cell.data() + cell.size())
                obj[table.columns[c]] = x;
            else
                obj[table.columns[c]] = cell;
        }
        rows.push_back(std::move(obj));
    }
    return rows.dump(2) + "\n";
}

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        os << content;
        if (!os) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw std::runtime_error("failed to write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Experiment definition after parsing

struct Experiment {
    std::string kind;
    std::string name;
    std::uint64_t seed = 1;
    int threads = 1;
    OutputFormat format = OutputFormat::Csv;
    json resolved; // full config with defaults materialized

    // kind-specific payloads
    SimConfig sim;
    SweepSpec spec;
    // index_table / oracle_check
    double lambda = 0.5;
    double epsilon = 0.0;
    CostFunction cost = CostFunction::linear();
    int a_max = 4;
    int d_max = 4;
    int oracle_a_cap = 64;
    int oracle_d_cap = 64;
    double rvi_tol = 1e-9;
    // fig2
    JointMdp joint;
};

std::string row_target(int ue) { return ue < 0 ? "fleet" : "ue" + std::to_string(ue); }

void append_sim_rows(Table& table, const SimReport& report) {
    table.rows.push_back({row_target(-1), format_double(report.mean_cost),
                          format_double(report.ci_low), format_double(report.ci_high),
                          format_double(report.mean_age), format_double(report.throughput),
                          std::to_string(report.replications)});
    for (size_t n = 0; n < report.per_ue.size(); ++n) {
        const UeStats& u = report.per_ue[n];
        table.rows.push_back({row_target(static_cast<int>(n)), format_double(u.mean_cost), "",
                              "", format_double(u.mean_age), format_double(u.throughput),
                              std::to_string(report.replications)});
    }
}

Table run_sim_kind(const Experiment& ex) {
    Table table;
    table.columns = {"target", "mean_cost", "ci_low", "ci_high", "mean_age", "throughput",
                     "replications"};
    SimReport report;
    if (ex.sim.policy == "optimal") {
        JointMdp mdp = ex.joint;
        mdp.ues = ex.sim.ues;
        auto solution = joint_rvi_solve(mdp);
        auto table_ptr = std::make_shared<const JointPolicyTable>(std::move(solution.policy));
        report = run(ex.sim, [&](int) {
            return make_policy("optimal", ex.sim.ues, ex.sim.policy_options, table_ptr);
        });
    } else {
        report = run(ex.sim);
    }
    append_sim_rows(table, report);
    return table;
}

Table run_sweep_kind(const Experiment& ex) {
    Table table;
    table.columns = {"lambda", "epsilon", "policy", "mean_cost", "ci_low", "ci_high",
                     "replications"};
    for (const SweepCell& cell : sweep(ex.sim, ex.spec)) {
        if (!cell.ok())
            throw std::runtime_error("sweep cell lambda=" + format_double(cell.lambda) +
                                     " epsilon=" + format_double(cell.epsilon) + " policy=" +
                                     cell.policy + " failed: " + cell.error);
        table.rows.push_back({format_double(cell.lambda), format_double(cell.epsilon),
                              cell.policy, format_double(cell.report.mean_cost),
                              format_double(cell.report.ci_low),
                              format_double(cell.report.ci_high),
                              std::to_string(cell.report.replications)});
    }
    return table;
}

Table run_index_table(const Experiment& ex) {
    Table table;
    table.columns = {"lambda", "epsilon", "cost", "a", "d", "index", "base_threshold"};
    WhittleCalculator calc(ex.lambda, ex.epsilon, ex.cost);
    for (int a = 1; a <= ex.a_max; ++a) {
        for (int d = 0; d <= ex.d_max; ++d) {
            const WhittleIndexValue detail = calc.index_detail({a, d});
            table.rows.push_back({format_double(ex.lambda), format_double(ex.epsilon),
                                  ex.cost.describe(), std::to_string(a), std::to_string(d),
                                  format_double(detail.index),
                                  std::to_string(detail.base_threshold)});
        }
    }
    return table;
}

Table run_oracle_check(const Experiment& ex) {
    Table table;
    table.columns = {"lambda", "epsilon", "cost", "a", "d", "closed_form", "bisection",
                     "rel_err"};
    WhittleCalculator calc(ex.lambda, ex.epsilon, ex.cost);
    for (int a = 1; a <= ex.a_max; ++a) {
        for (int d = 1; d <= ex.d_max; ++d) {
            const double closed = calc.index({a, d});
            BisectionOptions opts;
            opts.hint = closed;
            opts.a_cap = ex.oracle_a_cap;
            opts.d_cap = ex.oracle_d_cap;
            opts.rvi_tol = ex.rvi_tol;
            const double bis = index_by_bisection(ex.lambda, ex.epsilon, ex.cost, {a, d}, opts);
            const double rel = std::abs(closed - bis) / std::max(std::abs(bis), 0.01);
            table.rows.push_back({format_double(ex.lambda), format_double(ex.epsilon),
                                  ex.cost.describe(), std::to_string(a), std::to_string(d),
                                  format_double(closed), format_double(bis),
                                  format_double(rel)});
        }
    }
    return table;
}

Table run_fig2(const Experiment& ex) {
    Table table;
    table.columns = {"policy", "mean_cost", "ci_low", "ci_high", "xi_opt", "rel_gap"};
    JointMdp mdp = ex.joint;
    mdp.ues = ex.sim.ues;
    auto solution = joint_rvi_solve(mdp);
    const double xi_opt = solution.xi_opt;
    auto table_ptr = std::make_shared<const JointPolicyTable>(std::move(solution.policy));

    SimConfig whittle_sim = ex.sim;
    whittle_sim.policy = "whittle";
    const SimReport whittle_report = run(whittle_sim);

    SimConfig optimal_sim = ex.sim;
    optimal_sim.policy = "optimal";
    const SimReport optimal_report = run(optimal_sim, [&](int) {
        return make_policy("optimal", optimal_sim.ues, optimal_sim.policy_options, table_ptr);
    });

    auto add_row = [&](const std::string& name, const SimReport& report) {
        const double gap = xi_opt > 0.0 ? (report.mean_cost - xi_opt) / xi_opt : 0.0;
        table.rows.push_back({name, format_double(report.mean_cost),
                              format_double(report.ci_low), format_double(report.ci_high),
                              format_double(xi_opt), format_double(gap)});
    };
    add_row("whittle", whittle_report);
    add_row("optimal", optimal_report);
    return table;
}

// ---------------------------------------------------------------------------
// Parsing the top-level config

Experiment parse_experiment(const json& j, const RunOverrides& overrides) {
    if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
    const long version = integer_or(j, "schema_version", -1, "config");
    if (version != kConfigSchemaVersion)
        throw ConfigError("config.schema_version",
                          "expected " + std::to_string(kConfigSchemaVersion));
    Experiment ex;
    const json& kind = require(j, "kind", "config");
    if (!kind.is_string()) throw ConfigError("config.kind", "expected a string");
    ex.kind = kind.get<std::string>();

    ex.seed = overrides.seed.value_or(
        static_cast<std::uint64_t>(integer_or(j, "seed", 1, "config")));
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    ex.threads = overrides.threads.value_or(
        static_cast<int>(integer_or(j, "threads", std::max(1, hw), "config")));
    if (ex.threads < 1) throw ConfigError("config.threads", "must be >= 1");

    std::string format = j.value("format", std::string("csv"));
    if (overrides.format) format = *overrides.format == OutputFormat::Csv ? "csv" : "json";
    if (format == "csv")
        ex.format = OutputFormat::Csv;
    else if (format == "json")
        ex.format = OutputFormat::Json;
    else
        throw ConfigError("config.format", "expected 'csv' or 'json'");

    ex.name = j.value("name", ex.kind);

    auto parse_states_block = [&](const json& block, const std::string& path) {
        ex.lambda = require_probability(block, "lambda", path);
        ex.epsilon = require_probability(block, "epsilon", path);
        ex.cost = parse_cost(require(block, "cost", path), path + ".cost");
        ex.a_max = static_cast<int>(integer_or(block, "a_max", 4, path));
        ex.d_max = static_cast<int>(integer_or(block, "d_max", 4, path));
        if (ex.a_max < 1 || ex.d_max < 0)
            throw ConfigError(path, "requires a_max >= 1 and d_max >= 0");
        ValidationResult ok = validate(ex.cost, ex.lambda, ex.epsilon);
        if (!ok) throw ConfigError(path, ok.message);
    };

    if (ex.kind == "sim_run") {
        ex.sim = parse_sim(require(j, "sim", "config"), "config.sim", ex.seed, ex.threads);
        check_policy_feasible(ex.sim.policy, ex.sim.ues, "config.sim.policy");
        if (ex.sim.policy == "optimal") {
            const json empty = json::object();
            const json& joint = j.contains("joint") ? j.at("joint") : empty;
            ex.joint.a_cap = static_cast<int>(integer_or(joint, "a_cap", 32, "config.joint"));
            ex.joint.d_cap = static_cast<int>(integer_or(joint, "d_cap", 32, "config.joint"));
            ex.joint.tol = number_or(joint, "tol", 1e-9);
            if (ex.sim.ues.size() > 3)
                throw ConfigError("config.sim.ues", "optimal policy supports at most 3 UEs");
        }
        ex.resolved = {{"schema_version", kConfigSchemaVersion}, {"kind", "sim_run"},
                       {"seed", ex.seed},   {"threads", ex.threads},
                       {"format", format},  {"name", ex.name},
                       {"sim", sim_to_json(ex.sim)}};
        if (ex.sim.policy == "optimal")
            ex.resolved["joint"] = {{"a_cap", ex.joint.a_cap},
                                    {"d_cap", ex.joint.d_cap},
                                    {"tol", ex.joint.tol}};
        return ex;
    }
    if (ex.kind == "sweep") {
        ex.sim = parse_sim(require(j, "sim", "config"), "config.sim", ex.seed, ex.threads);
        ex.spec = parse_sweep(require(j, "sweep", "config"), "config.sweep");
        for (const std::string& p : ex.spec.policies) {
            if (p == "optimal")
                throw ConfigError("config.sweep.policies", "optimal policy is not sweepable");
            // feasibility depends on the swept epsilon values
            std::vector<UeConfig> probe = ex.sim.ues;
            for (double eps : ex.spec.epsilon_grid) {
                for (double lam : ex.spec.lambda_grid) {
                    for (UeConfig& ue : probe) {
                        ue.lambda = lam;
                        ue.epsilon = eps;
                    }
                    check_policy_feasible(p, probe, "config.sweep.policies");
                }
            }
        }
        ex.resolved = {{"schema_version", kConfigSchemaVersion}, {"kind", "sweep"},
                       {"seed", ex.seed},   {"threads", ex.threads},
                       {"format", format},  {"name", ex.name},
                       {"sim", sim_to_json(ex.sim)}, {"sweep", sweep_to_json(ex.spec)}};
        return ex;
    }
    if (ex.kind == "index_table" || ex.kind == "oracle_check") {
        const json& block = require(j, ex.kind.c_str(), "config");
        parse_states_block(block, "config." + ex.kind);
        if (ex.kind == "oracle_check") {
            ex.oracle_a_cap = static_cast<int>(integer_or(block, "oracle_a_cap", 64,
                                                          "config.oracle_check"));
            ex.oracle_d_cap = static_cast<int>(integer_or(block, "oracle_d_cap", 64,
                                                          "config.oracle_check"));
            ex.rvi_tol = number_or(block, "rvi_tol", 1e-9);
        }
        json block_out = {{"lambda", ex.lambda}, {"epsilon", ex.epsilon},
                          {"cost", cost_to_json(ex.cost)}, {"a_max", ex.a_max},
                          {"d_max", ex.d_max}};
        if (ex.kind == "oracle_check") {
            block_out["oracle_a_cap"] = ex.oracle_a_cap;
            block_out["oracle_d_cap"] = ex.oracle_d_cap;
            block_out["rvi_tol"] = ex.rvi_tol;
        }
        ex.resolved = {{"schema_version", kConfigSchemaVersion}, {"kind", ex.kind},
                       {"seed", ex.seed},   {"threads", ex.threads},
                       {"format", format},  {"name", ex.name},
                       {ex.kind, std::move(block_out)}};
        return ex;
    }
    if (ex.kind == "preset_fig2" || ex.kind == "preset_fig3" || ex.kind == "preset_fig4") {
        const json empty = json::object();
        const json& preset = j.contains("preset") ? j.at("preset") : empty;
        if (ex.kind == "preset_fig2") {
            Fig2Preset fig2 = make_fig2_preset();
            ex.sim = fig2.sim;
            ex.joint = fig2.joint;
            if (preset.contains("ues")) ex.sim.ues = parse_ues(preset.at("ues"), "config.preset.ues");
            ex.sim.horizon = integer_or(preset, "horizon", ex.sim.horizon, "config.preset");
            ex.sim.warmup = integer_or(preset, "warmup", ex.sim.warmup, "config.preset");
            ex.sim.replications = static_cast<int>(
                integer_or(preset, "replications", ex.sim.replications, "config.preset"));
            ex.joint.a_cap = static_cast<int>(
                integer_or(preset, "joint_a_cap", ex.joint.a_cap, "config.preset"));
            ex.joint.d_cap = static_cast<int>(
                integer_or(preset, "joint_d_cap", ex.joint.d_cap, "config.preset"));
            ex.joint.tol = number_or(preset, "joint_tol", ex.joint.tol);
            if (ex.sim.ues.size() != 2)
                throw ConfigError("config.preset.ues", "the two-user preset needs exactly 2 UEs");
            if (ex.sim.horizon <= ex.sim.warmup)
                throw ConfigError("config.preset.horizon", "requires horizon > warmup");
            ex.sim.seed = ex.seed;
            ex.sim.threads = ex.threads;
            json ues = json::array();
            for (const UeConfig& ue : ex.sim.ues) ues.push_back(ue_to_json(ue));
            ex.resolved = {{"schema_version", kConfigSchemaVersion}, {"kind", "preset_fig2"},
                           {"seed", ex.seed},  {"threads", ex.threads},
                           {"format", format}, {"name", ex.name},
                           {"preset",
                            {{"ues", std::move(ues)},
                             {"horizon", ex.sim.horizon},
                             {"warmup", ex.sim.warmup},
                             {"replications", ex.sim.replications},
                             {"joint_a_cap", ex.joint.a_cap},
                             {"joint_d_cap", ex.joint.d_cap},
                             {"joint_tol", ex.joint.tol}}}};
            return ex;
        }
        FigSweepPreset fig = ex.kind == "preset_fig3" ? make_fig3_preset() : make_fig4_preset();
        ex.sim = fig.sim;
        ex.spec = fig.spec;
        if (preset.contains("ues")) ex.sim.ues = parse_ues(preset.at("ues"), "config.preset.ues");
        ex.sim.horizon = integer_or(preset, "horizon", ex.sim.horizon, "config.preset");
        ex.sim.warmup = integer_or(preset, "warmup", ex.sim.warmup, "config.preset");
        ex.sim.replications = static_cast<int>(
            integer_or(preset, "replications", ex.sim.replications, "config.preset"));
        if (preset.contains("lambda_grid"))
            ex.spec.lambda_grid = parse_grid(preset.at("lambda_grid"), "config.preset.lambda_grid");
        if (preset.contains("epsilon_grid"))
            ex.spec.epsilon_grid =
                parse_grid(preset.at("epsilon_grid"), "config.preset.epsilon_grid");
        if (ex.sim.horizon <= ex.sim.warmup)
            throw ConfigError("config.preset.horizon", "requires horizon > warmup");
        for (const std::string& p : ex.spec.policies) {
            std::vector<UeConfig> probe = ex.sim.ues;
            for (double eps : ex.spec.epsilon_grid) {
                for (double lam : ex.spec.lambda_grid) {
                    for (UeConfig& ue : probe) {
                        ue.lambda = lam;
                        ue.epsilon = eps;
                    }
                    check_policy_feasible(p, probe, "config.preset");
                }
            }
        }
        ex.sim.seed = ex.seed;
        ex.sim.threads = ex.threads;
        json ues = json::array();
        for (const UeConfig& ue : ex.sim.ues) ues.push_back(ue_to_json(ue));
        ex.resolved = {{"schema_version", kConfigSchemaVersion}, {"kind", ex.kind},
                       {"seed", ex.seed},  {"threads", ex.threads},
                       {"format", format}, {"name", ex.name},
                       {"preset",
                        {{"ues", std::move(ues)},
                         {"horizon", ex.sim.horizon},
                         {"warmup", ex.sim.warmup},
                         {"replications", ex.sim.replications},
                         {"lambda_grid", ex.spec.lambda_grid},
                         {"epsilon_grid", ex.spec.epsilon_grid}}}};
        return ex;
    }
    throw ConfigError("config.kind", "unknown experiment kind '" + ex.kind + "'");
}

ExperimentOutcome execute(const json& config_json, const fs::path& out_dir,
                          const RunOverrides& overrides) {
    ExperimentOutcome outcome;
    Experiment ex;
    try {
        ex = parse_experiment(config_json, overrides);
    } catch (const ConfigError& e) {
        outcome.exit_code = 2;
        outcome.message = e.what();
        return outcome;
    } catch (const json::exception& e) {
        outcome.exit_code = 2;
        outcome.message = std::string("config: ") + e.what();
        return outcome;
    }

    const auto started = std::chrono::steady_clock::now();
    Table table;
    try {
        if (ex.kind == "sim_run")
            table = run_sim_kind(ex);
        else if (ex.kind == "sweep" || ex.kind == "preset_fig3" || ex.kind == "preset_fig4")
            table = run_sweep_kind(ex);
        else if (ex.kind == "index_table")
            table = run_index_table(ex);
        else if (ex.kind == "oracle_check")
            table = run_oracle_check(ex);
        else if (ex.kind == "preset_fig2")
            table = run_fig2(ex);
    } catch (const std::exception& e) {
        outcome.exit_code = 3;
        outcome.message = e.what();
        return outcome;
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                            .count();

    try {
        fs::create_directories(out_dir);
        const std::string extension = ex.format == OutputFormat::Csv ? ".csv" : ".json";
        outcome.results_file = out_dir / (ex.name + extension);
        outcome.metadata_file = out_dir / (ex.name + "_meta.json");
        const std::string body =
            ex.format == OutputFormat::Csv ? to_csv(table) : to_json_text(table);
        json meta = {{"schema_version", kConfigSchemaVersion},
                     {"kind", ex.kind},
                     {"library_version", std::string(kLibraryVersion)},
                     {"seed", ex.seed},
                     {"wall_time_seconds", wall},
                     {"results_file", outcome.results_file.filename().string()},
                     {"resolved_config", ex.resolved}};
        write_atomic(outcome.results_file, body);
        write_atomic(outcome.metadata_file, meta.dump(2) + "\n");
    } catch (const std::exception& e) {
        outcome.exit_code = 3;
        outcome.message = e.what();
        return outcome;
    }
    outcome.message = "ok";
    return outcome;
}

} // namespace

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

ExperimentOutcome run_experiment(const fs::path& config_path, const fs::path& out_dir,
                                 const RunOverrides& overrides) {
    std::ifstream is(config_path);
    if (!is) {
        ExperimentOutcome outcome;
        outcome.exit_code = 2;
        outcome.message = "config: cannot open " + config_path.string();
        return outcome;
    }
    std::ostringstream buffer;
    buffer << is.rdbuf();
    return run_experiment_text(buffer.str(), out_dir, overrides);
}

ExperimentOutcome run_experiment_text(const std::string& config_text, const fs::path& out_dir,
                                      const RunOverrides& overrides) {
    json parsed;
    try {
        parsed = json::parse(config_text);
    } catch (const json::exception& e) {
        ExperimentOutcome outcome;
        outcome.exit_code = 2;
        outcome.message = std::string("config: invalid JSON: ") + e.what();
        return outcome;
    }
    return execute(parsed, out_dir, overrides);
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty results file " + path.string());
    const std::string expected = "lambda,epsilon,policy,mean_cost,ci_low,ci_high,replications";
    if (line != expected)
        throw std::runtime_error(path.string() + ": unexpected header '" + line + "'");
    std::vector<SweepRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 7)
            throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
        SweepRow row;
        auto num = [&](const std::string& s) {
            double x = 0.0;
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
            if (ec != std::errc() || ptr != s.data() + s.size())
                throw std::runtime_error(path.string() + ": bad number '" + s + "'");
            return x;
        };
        row.lambda = num(cells[0]);
        row.epsilon = num(cells[1]);
        row.policy = cells[2];
        row.mean_cost = num(cells[3]);
        row.ci_low = num(cells[4]);
        row.ci_high = num(cells[5]);
        row.replications = static_cast<int>(num(cells[6]));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SweepRow> select_policy(std::span<const SweepRow> table, const std::string& policy) {
    std::vector<SweepRow> out;
    for (const SweepRow& row : table)
        if (row.policy == policy) out.push_back(row);
    return out;
}

ComparisonReport compare_policies(std::span<const SweepRow> a, std::span<const SweepRow> b) {
    if (a.size() != b.size())
        throw GridMismatch("tables have " + std::to_string(a.size()) + " and " +
                           std::to_string(b.size()) + " grid points");
    ComparisonReport report;
    int separated = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].lambda != b[i].lambda || a[i].epsilon != b[i].epsilon)
            throw GridMismatch("grid point " + std::to_string(i) + " differs between tables");
        ComparisonCell cell;
        cell.lambda = a[i].lambda;
        cell.epsilon = a[i].epsilon;
        cell.a_mean = a[i].mean_cost;
        cell.a_lo = a[i].ci_low;
        cell.a_hi = a[i].ci_high;
        cell.b_mean = b[i].mean_cost;
        cell.b_lo = b[i].ci_low;
        cell.b_hi = b[i].ci_high;
        cell.a_leq_b = cell.a_mean <= cell.b_mean;
        cell.ci_separated = cell.a_hi < cell.b_lo;
        report.all_a_leq_b = report.all_a_leq_b && cell.a_leq_b;
        if (cell.ci_separated) ++separated;
        report.cells.push_back(cell);
    }
    report.separated_fraction =
        report.cells.empty() ? 0.0 : static_cast<double>(separated) / report.cells.size();
    return report;
}

void write_comparison_csv(const ComparisonReport& report, const fs::path& path) {
    Table table;
    table.columns = {"lambda", "epsilon", "a_mean", "b_mean", "diff", "a_leq_b", "ci_separated"};
    for (const ComparisonCell& cell : report.cells) {
        table.rows.push_back({format_double(cell.lambda), format_double(cell.epsilon),
                              format_double(cell.a_mean), format_double(cell.b_mean),
                              format_double(cell.b_mean - cell.a_mean),
                              cell.a_leq_b ? "1" : "0", cell.ci_separated ? "1" : "0"});
    }
    write_atomic(path, to_csv(table));
}

void write_sweep_chart_svg(std::span<const SweepRow> rows, const fs::path& path) {
    if (rows.empty()) throw std::runtime_error("chart: no rows");
    const double width = 720, height = 460;
    const double ml = 70, mr = 180, mt = 30, mb = 50;
    double x_min = rows[0].lambda, x_max = rows[0].lambda, y_max = 0.0;
    for (const SweepRow& r : rows) {
        x_min = std::min(x_min, r.lambda);
        x_max = std::max(x_max, r.lambda);
        y_max = std::max(y_max, r.mean_cost);
    }
    if (x_max == x_min) x_max = x_min + 1.0;
    if (y_max <= 0.0) y_max = 1.0;
    y_max *= 1.05;
    auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr); };
    auto sy = [&](double y) { return height - mb - y / y_max * (height - mt - mb); };

    // series keyed by (policy, epsilon), in first-appearance order
    std::vector<std::pair<std::string, double>> keys;
    std::map<std::pair<std::string, double>, std::vector<const SweepRow*>> series;
    for (const SweepRow& r : rows) {
        auto key = std::make_pair(r.policy, r.epsilon);
        if (!series.count(key)) keys.push_back(key);
        series[key].push_back(&r);
    }
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                             "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
       << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    os << "<line x1='" << ml << "' y1='" << height - mb << "' x2='" << width - mr << "' y2='"
       << height - mb << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << height - mb
       << "' stroke='black'/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double xv = x_min + (x_max - x_min) * t / 5.0;
        const double yv = y_max * t / 5.0;
        os << "<text x='" << sx(xv) << "' y='" << height - mb + 18
           << "' font-size='11' text-anchor='middle'>" << format_double(std::round(xv * 100) / 100)
           << "</text>\n";
        os << "<text x='" << ml - 8 << "' y='" << sy(yv) + 4
           << "' font-size='11' text-anchor='end'>" << format_double(std::round(yv * 1000) / 1000)
           << "</text>\n";
        os << "<line x1='" << ml << "' y1='" << sy(yv) << "' x2='" << width - mr << "' y2='"
           << sy(yv) << "' stroke='#dddddd'/>\n";
    }
    os << "<text x='" << (ml + width - mr) / 2 << "' y='" << height - 12
       << "' font-size='12' text-anchor='middle'>packet generation probability</text>\n";
    os << "<text x='16' y='" << (mt + height - mb) / 2
       << "' font-size='12' text-anchor='middle' transform='rotate(-90 16 "
       << (mt + height - mb) / 2 << ")'>average cost of age</text>\n";

    int color = 0;
    double legend_y = mt + 10;
    for (const auto& key : keys) {
        const auto& pts = series[key];
        std::ostringstream poly;
        for (const SweepRow* r : pts) poly << sx(r->lambda) << "," << sy(r->mean_cost) << " ";
        const char* stroke = palette[color % 8];
        os << "<polyline fill='none' stroke='" << stroke << "' stroke-width='1.8' points='"
           << poly.str() << "'/>\n";
        for (const SweepRow* r : pts)
            os << "<circle cx='" << sx(r->lambda) << "' cy='" << sy(r->mean_cost)
               << "' r='2.4' fill='" << stroke << "'/>\n";
        os << "<line x1='" << width - mr + 10 << "' y1='" << legend_y << "' x2='"
           << width - mr + 34 << "' y2='" << legend_y << "' stroke='" << stroke
           << "' stroke-width='2'/>\n";
        os << "<text x='" << width - mr + 40 << "' y='" << legend_y + 4 << "' font-size='11'>"
           << key.first << " (eps=" << format_double(key.second) << ")</text>\n";
        legend_y += 18;
        ++color;
    }
    os << "</svg>\n";
    write_atomic(path, os.str());
}

Fig2Preset make_fig2_preset() {
    Fig2Preset preset;
    const CostFunction cost = CostFunction::step_violation(6);
    preset.sim.ues = {UeConfig{0.6, 0.2, cost}, UeConfig{0.6, 0.2, cost}};
    preset.sim.horizon = 1'000'000;
    preset.sim.warmup = 10'000;
    preset.sim.replications = 20;
    preset.joint.ues = preset.sim.ues;
    preset.joint.a_cap = 32;
    preset.joint.d_cap = 32;
    preset.joint.tol = 1e-9;
    return preset;
}

FigSweepPreset make_fig3_preset() {
    FigSweepPreset preset;
    const CostFunction cost = CostFunction::step_violation(10);
    preset.sim.ues.assign(6, UeConfig{0.5, 0.2, cost});
    preset.sim.horizon = 1'000'000;
    preset.sim.warmup = 10'000;
    preset.sim.replications = 20;
    preset.spec.lambda_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    preset.spec.epsilon_grid = {0.2, 0.5};
    preset.spec.policies = {"whittle", "age_greedy", "on_demand_whittle"};
    return preset;
}

FigSweepPreset make_fig4_preset() {
    FigSweepPreset preset = make_fig3_preset();
    const CostFunction late = CostFunction::step_violation(15);
    for (size_t n = 3; n < preset.sim.ues.size(); ++n) preset.sim.ues[n].cost = late;
    return preset;
}

} // namespace aoi
