#pragma once

#include "dynamics.hpp"
#include "ini.hpp"
#include "spectral.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epi {

/// Parsed "name(arg, ...)" or a bare number (which reads as constant(value)).
struct Preset {
    std::string name;
    std::vector<double> args;
};

Preset parse_preset(const std::string& text, const std::string& where);

/// Age profile presets: constant(c), exp(c, rate), linear(c0, c1), pulse(c, a0, a1).
AgeFunction age_preset(const Preset& p, const std::string& where);

/// Spatial presets: constant(c), cosine(amp, j[, base]), gaussian(amp, center, width[, base]).
/// random(lo, hi) is accepted when `seed` is given.
Field space_preset(const Preset& p, const SpatialGrid& grid, const std::string& where,
                   std::optional<std::uint64_t> seed = std::nullopt);

struct SweepConfig {
    std::string parameter;
    std::vector<double> values;
};

using SpaceFunction = std::function<double(double)>;

/// Everything a scenario file defines. Rates are kept as age parts times
/// optional space factors so that sweeps can rebuild them.
struct ScenarioConfig {
    ScenarioConfig(std::string origin_, SpatialGrid grid_, AgeGrid ages_)
        : origin(std::move(origin_)), grid(std::move(grid_)), ages(std::move(ages_)) {}

    std::string origin;
    SpatialGrid grid;
    AgeGrid ages;
    double kappa1 = 1.0;
    double kappa2 = 1.0;
    std::map<std::string, AgeFunction> age_parts;      // d, m, r, b
    std::map<std::string, SpaceFunction> space_parts;  // m, r, b
    Field S0;
    AgeProfile I0;
    double T_end = 0.0;
    int output_stride = 1;
    std::optional<std::string> out_dir;
    std::optional<SweepConfig> sweep;
    StabilityOptions stability;
    std::uint64_t seed = 0;

    RateFunctions rate_functions() const;
    /// Rates with `parameter` replaced by the constant `value`; space factors are kept.
    RateFunctions with_parameter(const std::string& parameter, double value) const;
    RateSet rates() const;
    Scenario scenario() const;
};

ScenarioConfig load_scenario_config(const std::string& path, std::uint64_t seed = 0);
ScenarioConfig parse_scenario_config(const IniFile& ini, std::uint64_t seed = 0);
Scenario load_scenario(const std::string& path, std::uint64_t seed = 0);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// %.17g formatting used for every numeric CSV cell.
std::string format_number(double v);

/// Writes header and rows with LF line endings; throws IoError.
void emit_csv(const CsvTable& table, const std::string& path);

struct RunOptions {
    std::string command;
    std::string scenario_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

/// Output directory: explicit flag, then EPI_OUT_DIR, then [run].out_dir, then "out".
std::string resolve_out_dir(const RunOptions& options, const ScenarioConfig& cfg);

struct RunSummary {
    std::string out_dir;
    std::vector<std::string> files;
};

/// Executes one command; throws the library's exception types on failure.
RunSummary run_command(const RunOptions& options);

/// 0 ok, 1 numerical or I/O failure, 2 configuration error.
int exit_code_for_current_exception();

}  // namespace epi
