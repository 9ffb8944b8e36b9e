#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <roughbsde/bsde_mc.hpp>
#include <roughbsde/io.hpp>
#include <roughbsde/presets.hpp>
#include <roughbsde/rough_path.hpp>
#include <roughbsde/rpde.hpp>

namespace rbsde::cli {

/// Preset name plus optional scalar overrides of its coefficients.
struct ProblemConfig {
    std::string preset = "heat";
    std::optional<double> horizon;
    std::optional<double> x0;
    std::optional<double> sigma;  // constant diffusion coefficient
    std::optional<double> drift;  // constant drift
};

/// How the driving signal is generated.
///
///   smooth       zeta(t) = slope * t, or explicit knots
///   zero         zeta = 0
///   brownian     Brownian sample on `intervals` uniform steps, canonically lifted
///   wong_zakai   interpolations of one Brownian sample at `levels` (dyadic, triadic or both)
///   pure_area    loop sequence of index `index` and its pure-area limit
struct DriverConfig {
    std::string kind = "smooth";
    std::vector<double> slope;               // default: 1 in every component
    std::vector<double> knot_times;          // explicit knots (smooth only)
    std::vector<std::vector<double>> knot_values;
    std::uint64_t seed = 42;
    std::size_t intervals = 256;
    std::vector<int> levels{3, 4, 5, 6};
    std::string scheme = "dyadic";           // dyadic | triadic | both
    int index = 8;
    double scale = 0.25;
    double p = 2.5;
};

struct FlowConfig {
    std::size_t nx = 21;
    std::size_t ny = 21;
    double y_lo = -2.0;
    double y_hi = 2.0;
    double max_step = 0.02;
    std::size_t identity_samples = 3;  // per axis
};

struct Tolerances {
    double fd = kFdTolerance;
    double identity = 1e-4;
    double chen = 1e-12;
    double bound_slack = 1e-6;
    double radius = 1.0;  // |x - x0| <= radius for sup-norm distances
};

struct ConvergeConfig {
    std::string times = "initial";  // initial: t0 slice only; all: every time node
};

struct OutputConfig {
    std::size_t csv_paths = 20;
};

struct ExperimentConfig {
    ProblemConfig problem;
    DriverConfig driver;
    std::string solver = "rough";  // rough | smooth, for rpde solve
    PdeGrids grid;
    McConfig mc;
    FlowConfig flow;
    Tolerances tolerances;
    ConvergeConfig converge;
    OutputConfig output;

    /// Strict parse: unknown keys and out-of-range values raise ConfigError with a dotted path.
    static ExperimentConfig from_json(const Json& j);
    Json to_json() const;
};

ExperimentConfig load_config(const std::filesystem::path& file);

enum class Command {
    lift,
    flow_solve,
    flow_check_identities,
    transform_constants,
    rpde_solve,
    rpde_converge,
    bsde_solve,
    bsde_check_fk,
    converge,
};

std::string to_string(Command c);

struct RunOptions {
    Command command = Command::rpde_solve;
    std::filesystem::path out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool check = false;
};

struct RunResult {
    Json report;
    bool pass = true;  // every requested check passed
};

/// Executes one pipeline and writes report.json plus the CSV artifacts into `out_dir`.
/// Library errors propagate to the caller.
RunResult run(ExperimentConfig config, const RunOptions& options);

/// Problem after preset lookup and overrides.
ProblemSpec build_problem(const ProblemConfig& pc);

}  // namespace rbsde::cli
