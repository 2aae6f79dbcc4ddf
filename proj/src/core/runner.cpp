#include "runner.hpp"

#include "diagnostics.hpp"
#include "errors.hpp"
#include "steadystate.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <thread>

namespace epi {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return "";
    return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

void expect_args(const Preset& p, std::size_t lo, std::size_t hi, const std::string& where) {
    if (p.args.size() < lo || p.args.size() > hi) {
        throw ConfigError(where + ": " + p.name + "(...) takes " + std::to_string(lo) +
                          (lo == hi ? "" : " to " + std::to_string(hi)) + " arguments, got " +
                          std::to_string(p.args.size()));
    }
}

SpaceFunction space_function(const Preset& p, const SpatialGrid& grid, const std::string& where) {
    const double x0 = grid.x_min();
    const double L = grid.length();
    if (p.name == "constant") {
        expect_args(p, 1, 1, where);
        const double c = p.args[0];
        return [c](double) { return c; };
    }
    if (p.name == "cosine") {
        expect_args(p, 2, 3, where);
        const double amp = p.args[0];
        const double j = p.args[1];
        const double base = p.args.size() > 2 ? p.args[2] : 1.0;
        return [=](double x) { return base + amp * std::cos(j * std::numbers::pi * (x - x0) / L); };
    }
    if (p.name == "gaussian") {
        expect_args(p, 3, 4, where);
        const double amp = p.args[0];
        const double centre = p.args[1];
        const double width = p.args[2];
        const double base = p.args.size() > 3 ? p.args[3] : 0.0;
        if (!(width > 0.0)) throw ConfigError(where + ": gaussian width must be positive");
        return [=](double x) {
            const double z = (x - centre) / width;
            return base + amp * std::exp(-0.5 * z * z);
        };
    }
    throw ConfigError(where + ": unknown spatial preset '" + p.name + "'");
}

Field sample_space(const SpaceFunction& f, const SpatialGrid& grid) {
    Field u(grid.size());
    for (int i = 0; i < grid.size(); ++i) u(i) = f(grid.node(i));
    return u;
}

Field random_field(const Preset& p, const SpatialGrid& grid, std::uint64_t seed, std::uint64_t stream,
                   const std::string& where) {
    expect_args(p, 2, 2, where);
    const double lo = p.args[0];
    const double hi = p.args[1];
    if (!(lo <= hi)) throw ConfigError(where + ": random(lo, hi) needs lo <= hi");
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + stream);
    Field u(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        u(i) = lo + (hi - lo) * unit;
    }
    return u;
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"domain", {"x_min", "x_max", "n", "delta"}},
        {"age", {"a_m", "Na"}},
        {"rates", {"kappa1", "kappa2", "d", "m", "r", "b", "m_space", "r_space", "b_space"}},
        {"init", {"S0", "I0", "I0_age", "I0_space"}},
        {"run", {"T_end", "output_stride", "out_dir"}},
        {"sweep", {"parameter", "values"}},
        {"stability", {"J_max", "re_min", "re_max", "im_max", "zero_tolerance"}},
    };
    return keys;
}

std::vector<double> parse_values(const std::string& raw, const std::string& where) {
    std::vector<double> out;
    if (raw.find(':') != std::string::npos) {
        std::vector<double> parts;
        std::size_t start = 0;
        while (true) {
            const auto colon = raw.find(':', start);
            const auto v = parse_number(raw.substr(start, colon == std::string::npos ? std::string::npos : colon - start));
            if (!v) throw ConfigError(where + ": expected start:step:stop");
            parts.push_back(*v);
            if (colon == std::string::npos) break;
            start = colon + 1;
        }
        if (parts.size() != 3 || !(parts[1] > 0.0) || parts[2] < parts[0]) {
            throw ConfigError(where + ": expected start:step:stop with step > 0 and stop >= start");
        }
        const int count = static_cast<int>(std::floor((parts[2] - parts[0]) / parts[1] + 1e-9)) + 1;
        for (int i = 0; i < count; ++i) out.push_back(parts[0] + i * parts[1]);
        return out;
    }
    std::size_t start = 0;
    while (start <= raw.size()) {
        const auto comma = raw.find(',', start);
        const auto v = parse_number(raw.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        if (!v) throw ConfigError(where + ": expected a comma-separated list of numbers");
        out.push_back(*v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

Preset parse_preset(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    if (const auto v = parse_number(t)) return {"constant", {*v}};
    const auto open = t.find('(');
    if (open == std::string::npos || t.back() != ')' || open == 0) {
        throw ConfigError(where + ": expected a number or name(args), got '" + t + "'");
    }
    Preset p;
    p.name = trim(t.substr(0, open));
    const std::string inner = t.substr(open + 1, t.size() - open - 2);
    if (!trim(inner).empty()) {
        std::size_t start = 0;
        while (true) {
            const auto comma = inner.find(',', start);
            const std::string piece = inner.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            const auto v = parse_number(piece);
            if (!v) throw ConfigError(where + ": argument '" + trim(piece) + "' is not a finite number");
            p.args.push_back(*v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return p;
}

AgeFunction age_preset(const Preset& p, const std::string& where) {
    if (p.name == "constant") {
        expect_args(p, 1, 1, where);
        const double c = p.args[0];
        return [c](double) { return c; };
    }
    if (p.name == "exp") {
        expect_args(p, 2, 2, where);
        const double c = p.args[0];
        const double rate = p.args[1];
        return [c, rate](double a) { return c * std::exp(-rate * a); };
    }
    if (p.name == "linear") {
        expect_args(p, 2, 2, where);
        const double c0 = p.args[0];
        const double c1 = p.args[1];
        return [c0, c1](double a) { return c0 + c1 * a; };
    }
    if (p.name == "pulse") {
        expect_args(p, 3, 3, where);
        const double c = p.args[0];
        const double a0 = p.args[1];
        const double a1 = p.args[2];
        if (!(a0 <= a1)) throw ConfigError(where + ": pulse(c, a0, a1) needs a0 <= a1");
        return [=](double a) { return a >= a0 && a <= a1 ? c : 0.0; };
    }
    throw ConfigError(where + ": unknown age preset '" + p.name + "'");
}

Field space_preset(const Preset& p, const SpatialGrid& grid, const std::string& where,
                   std::optional<std::uint64_t> seed) {
    if (p.name == "random") {
        if (!seed) throw ConfigError(where + ": random(...) is only allowed for initial data");
        return random_field(p, grid, *seed, 0, where);
    }
    return sample_space(space_function(p, grid, where), grid);
}


RateFunctions ScenarioConfig::rate_functions() const {
    RateFunctions f;
    f.kappa1 = kappa1;
    f.kappa2 = kappa2;
    f.d = age_parts.at("d");
    auto combine = [&](const std::string& key) -> AgeSpaceFunction {
        const AgeFunction a = age_parts.at(key);
        const auto it = space_parts.find(key);
        if (it == space_parts.end()) return [a](double age, double) { return a(age); };
        const SpaceFunction s = it->second;
        return [a, s](double age, double x) { return a(age) * s(x); };
    };
    f.m = combine("m");
    f.r = combine("r");
    f.b = combine("b");
    f.homogeneous = space_parts.empty();
    return f;
}

RateFunctions ScenarioConfig::with_parameter(const std::string& parameter, double value) const {
    ScenarioConfig copy = *this;
    if (parameter == "kappa1") {
        copy.kappa1 = value;
    } else if (parameter == "kappa2") {
        copy.kappa2 = value;
    } else if (copy.age_parts.count(parameter)) {
        copy.age_parts[parameter] = [value](double) { return value; };
    } else {
        throw ConfigError(qualified("sweep", "parameter") + ": unknown parameter '" + parameter +
                          "' (expected kappa1, kappa2, d, m, r or b)");
    }
    return copy.rate_functions();
}

RateSet ScenarioConfig::rates() const { return RateSet(rate_functions(), ages, grid); }

Scenario ScenarioConfig::scenario() const {
    return Scenario(grid, ages, rates(), S0, I0, T_end, output_stride);
}

namespace {

void check_keys(const IniFile& ini) {
    const auto& allowed = allowed_keys();
    for (const auto& [section, keys] : allowed) {
        for (const std::string& key : ini.keys(section)) {
            if (!keys.count(key)) throw ConfigError(ini.origin() + ": unknown key " + qualified(section, key));
        }
    }
}

void validate_rate_samples(const std::string& origin, const RateFunctions& f, const AgeGrid& ages,
                           const SpatialGrid& grid) {
    for (int k = 0; k < ages.size(); ++k) {
        const double d = f.d(ages.node(k));
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw ConfigError(origin + ": " + qualified("rates", "d") + " must be positive at every age node");
        }
    }
    const std::pair<const char*, const AgeSpaceFunction*> fields[] = {{"m", &f.m}, {"r", &f.r}, {"b", &f.b}};
    for (const auto& [name, fn] : fields) {
        bool nonzero = false;
        for (int k = 0; k < ages.size(); ++k) {
            for (int i = 0; i < grid.size(); ++i) {
                const double v = (*fn)(ages.node(k), grid.node(i));
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw ConfigError(origin + ": " + qualified("rates", name) +
                                      " must be finite and nonnegative on the lattice");
                }
                nonzero = nonzero || v > 0.0;
            }
        }
        if (std::string(name) == "b" && !nonzero) {
            throw ConfigError(origin + ": " + qualified("rates", "b") + " vanishes identically");
        }
    }
}

bool is_preset(const std::string& raw, const char* name) {
    const std::string t = trim(raw);
    return t.rfind(name, 0) == 0 && t.size() > std::strlen(name) && trim(t.substr(std::strlen(name))).front() == '(';
}

double endemic_factor(const IniFile& ini, const std::string& key) {
    const Preset p = parse_preset(*ini.get("init", key), ini.origin() + ": " + qualified("init", key));
    if (p.args.size() > 1) throw ConfigError(ini.origin() + ": " + qualified("init", key) + ": endemic takes at most one argument");
    return p.args.empty() ? 1.0 : p.args[0];
}

}  // namespace

ScenarioConfig parse_scenario_config(const IniFile& ini, std::uint64_t seed) {
    const std::string& origin = ini.origin();
    for (const char* section : {"domain", "age", "rates", "init"}) {
        if (!ini.has_section(section)) throw ConfigError(origin + ": missing section [" + std::string(section) + "]");
    }
    check_keys(ini);
    auto where = [&](const char* section, const char* key) { return origin + ": " + qualified(section, key); };

    const double x_min = ini.number("domain", "x_min", 0.0);
    const double x_max = ini.number("domain", "x_max", 1.0);
    const long n = ini.integer("domain", "n");
    const long delta = ini.integer("domain", "delta");
    if (delta != 0 && delta != 1) throw ConfigError(where("domain", "delta") + " must be 0 or 1");
    if (n < 3) throw ConfigError(where("domain", "n") + " must be at least 3");
    if (!(x_min < x_max)) throw ConfigError(where("domain", "x_max") + " must exceed x_min");
    const double a_m = ini.number("age", "a_m");
    if (!(a_m > 0.0)) throw ConfigError(where("age", "a_m") + " must be positive");
    const long na = ini.integer("age", "Na");
    if (na < 2) throw ConfigError(where("age", "Na") + " must be at least 2");

    ScenarioConfig cfg(origin, SpatialGrid::build(x_min, x_max, static_cast<int>(n), static_cast<int>(delta)),
                      AgeGrid(a_m, static_cast<int>(na)));
    cfg.seed = seed;
    cfg.kappa1 = ini.number("rates", "kappa1");
    cfg.kappa2 = ini.number("rates", "kappa2");
    if (!(cfg.kappa1 > 0.0)) throw ConfigError(where("rates", "kappa1") + " must be positive");
    if (!(cfg.kappa2 > 0.0)) throw ConfigError(where("rates", "kappa2") + " must be positive");
    for (const char* key : {"d", "m", "b", "r"}) {
        const std::string raw = key == std::string("r") && !ini.has("rates", "r") ? "0" : ini.require("rates", key);
        cfg.age_parts[key] = age_preset(parse_preset(raw, where("rates", key)), where("rates", key));
    }
    for (const char* key : {"m", "r", "b"}) {
        const std::string skey = std::string(key) + "_space";
        if (auto raw = ini.get("rates", skey)) {
            const std::string w = origin + ": " + qualified("rates", skey);
            cfg.space_parts[key] = space_function(parse_preset(*raw, w), cfg.grid, w);
        }
    }
    const RateFunctions fns = cfg.rate_functions();
    validate_rate_samples(origin, fns, cfg.ages, cfg.grid);

    std::optional<SteadyState> endemic;
    auto need_endemic = [&](const char* key) -> const SteadyState& {
        if (!endemic) {
            try {
                endemic = endemic_closed_form(cfg.grid, cfg.ages, cfg.rates());
            } catch (const DomainError& e) {
                throw ConfigError(where("init", key) + ": endemic(...) unavailable: " + e.what());
            }
        }
        return *endemic;
    };

    const std::string S0_raw = ini.require("init", "S0");
    if (is_preset(S0_raw, "endemic")) {
        cfg.S0 = endemic_factor(ini, "S0") * need_endemic("S0").S_star;
    } else if (is_preset(S0_raw, "random")) {
        cfg.S0 = random_field(parse_preset(S0_raw, where("init", "S0")), cfg.grid, seed, 1, where("init", "S0"));
    } else {
        cfg.S0 = space_preset(parse_preset(S0_raw, where("init", "S0")), cfg.grid, where("init", "S0"));
    }

    if (auto raw = ini.get("init", "I0")) {
        if (!is_preset(*raw, "endemic")) throw ConfigError(where("init", "I0") + " only accepts endemic(factor)");
        if (ini.has("init", "I0_age") || ini.has("init", "I0_space")) {
            throw ConfigError(where("init", "I0") + " excludes I0_age and I0_space");
        }
        cfg.I0 = endemic_factor(ini, "I0") * need_endemic("I0").I_star;
    } else {
        const std::string age_raw = ini.require("init", "I0_age");
        const AgeFunction g = age_preset(parse_preset(age_raw, where("init", "I0_age")), where("init", "I0_age"));
        Field h = cfg.grid.constant(1.0);
        if (auto space_raw = ini.get("init", "I0_space")) {
            const Preset p = parse_preset(*space_raw, where("init", "I0_space"));
            h = p.name == "random" ? random_field(p, cfg.grid, seed, 2, where("init", "I0_space"))
                                   : space_preset(p, cfg.grid, where("init", "I0_space"));
        }
        cfg.I0 = AgeProfile(cfg.grid.size(), cfg.ages.size());
        for (int k = 0; k < cfg.ages.size(); ++k) cfg.I0.col(k) = g(cfg.ages.node(k)) * h;
    }
    if (!cfg.S0.allFinite() || cfg.S0.minCoeff() < 0.0) throw ConfigError(where("init", "S0") + " must be nonnegative");
    if (!cfg.I0.allFinite() || cfg.I0.minCoeff() < 0.0) {
        throw ConfigError(origin + ": [init] infected initial data must be nonnegative");
    }

    cfg.T_end = ini.number("run", "T_end", 0.0);
    if (!(cfg.T_end >= 0.0)) throw ConfigError(where("run", "T_end") + " must be nonnegative");
    const long stride = ini.integer("run", "output_stride", 1);
    if (stride < 1) throw ConfigError(where("run", "output_stride") + " must be at least 1");
    cfg.output_stride = static_cast<int>(stride);
    if (auto dir = ini.get("run", "out_dir")) cfg.out_dir = *dir;

    if (ini.has_section("sweep")) {
        SweepConfig sweep;
        sweep.parameter = ini.require("sweep", "parameter");
        sweep.values = parse_values(ini.require("sweep", "values"), where("sweep", "values"));
        cfg.with_parameter(sweep.parameter, 1.0);
        cfg.sweep = std::move(sweep);
    }
    if (ini.has_section("stability")) {
        const long J = ini.integer("stability", "J_max", cfg.stability.J_max);
        if (J < 1 || J > cfg.grid.size()) throw ConfigError(where("stability", "J_max") + " must lie in [1, n]");
        cfg.stability.J_max = static_cast<int>(J);
        cfg.stability.zero_tolerance = ini.number("stability", "zero_tolerance", cfg.stability.zero_tolerance);
        if (ini.has("stability", "re_min") || ini.has("stability", "re_max") || ini.has("stability", "im_max")) {
            RootRegion r = RootRegion::defaults(cfg.kappa1, cfg.ages.a_max());
            r.re_min = ini.number("stability", "re_min", r.re_min);
            r.re_max = ini.number("stability", "re_max", r.re_max);
            r.im_max = ini.number("stability", "im_max", r.im_max);
            if (!(r.re_min < r.re_max) || !(r.im_max > 0.0)) {
                throw ConfigError(origin + ": [stability] root region is empty");
            }
            cfg.stability.region = r;
        }
    }
    return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path, std::uint64_t seed) {
    return parse_scenario_config(IniFile::load(path), seed);
}

Scenario load_scenario(const std::string& path, std::uint64_t seed) {
    return load_scenario_config(path, seed).scenario();
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void emit_csv(const CsvTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    line(table.header);
    for (const auto& row : table.rows) line(row);
    out.flush();
    if (!out) throw IoError("write to '" + path + "' failed");
}

std::string resolve_out_dir(const RunOptions& options, const ScenarioConfig& cfg) {
    if (options.out_dir && !options.out_dir->empty()) return *options.out_dir;
    if (const char* env = std::getenv("EPI_OUT_DIR"); env && *env) return env;
    if (cfg.out_dir && !cfg.out_dir->empty()) return *cfg.out_dir;
    return "out";
}

namespace {

namespace fs = std::filesystem;

std::string optional_cell(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

CsvTable field_table(const SpatialGrid& grid, const Field& S, const AgeProfile& I) {
    CsvTable t;
    t.header = {"x", "S"};
    for (int k = 0; k < I.cols(); ++k) t.header.push_back("I_" + std::to_string(k));
    for (int i = 0; i < grid.size(); ++i) {
        std::vector<std::string> row = {format_number(grid.node(i)), format_number(S(i))};
        for (int k = 0; k < I.cols(); ++k) row.push_back(format_number(I(i, k)));
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable summary_table(const Trajectory& tr) {
    CsvTable t;
    t.header = {"t", "mass_S", "mass_I", "sup_S", "renewal_norm"};
    for (const StepRecord& r : tr.summary) {
        t.rows.push_back({format_number(r.t), format_number(r.mass_S), format_number(r.mass_I),
                          format_number(r.sup_S), format_number(r.renewal_norm)});
    }
    return t;
}

class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_ + "': " + ec.message());
    }
    void csv(const std::string& name, const CsvTable& table) {
        const std::string path = (fs::path(dir_) / name).string();
        emit_csv(table, path);
        files_.push_back(path);
    }
    void lines(const std::string& name, const std::vector<std::string>& rows) {
        const std::string path = (fs::path(dir_) / name).string();
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + path + "' for writing");
        for (const auto& r : rows) out << r << '\n';
        if (!out) throw IoError("write to '" + path + "' failed");
        files_.push_back(path);
    }
    RunSummary summary() const { return {dir_, files_}; }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

void write_trajectory(Outputs& out, const Scenario& sc, const Trajectory& tr) {
    out.csv("summary.csv", summary_table(tr));
    for (std::size_t i = 0; i < tr.snapshots.size(); ++i) {
        char name[40];
        std::snprintf(name, sizeof name, "snapshot_%06d.csv", tr.snapshot_steps[i]);
        out.csv(name, field_table(sc.grid, tr.snapshots[i].S, tr.snapshots[i].I));
    }
}

void cmd_simulate(const ScenarioConfig& cfg, Outputs& out) {
    const Scenario sc = cfg.scenario();
    write_trajectory(out, sc, simulate(sc));
}

void cmd_ledger(const ScenarioConfig& cfg, Outputs& out) {
    const Scenario sc = cfg.scenario();
    const Trajectory tr = simulate(sc);
    const MassLedger L = mass_ledger(tr, sc);
    CsvTable t;
    t.header = {"t", "total_mass", "logistic_gain", "mortality_sink", "aged_out", "boundary_flux", "residual"};
    for (std::size_t i = 0; i < L.t.size(); ++i) {
        t.rows.push_back({format_number(L.t[i]), format_number(L.total_mass[i]),
                          format_number(L.logistic_gain_integral[i]), format_number(L.mortality_sink_integral[i]),
                          format_number(L.aged_out_term[i]), format_number(L.boundary_flux_term[i]),
                          format_number(L.residual[i])});
    }
    out.csv("summary.csv", summary_table(tr));
    out.csv("ledger.csv", t);
}

bool closed_form_applicable(const SpatialGrid& grid, const RateSet& rates) {
    return grid.neumann() && rates.homogeneous() && rates.recovery_free();
}

std::optional<SteadyState> endemic_state(const SpatialGrid& grid, const AgeGrid& ages, const RateSet& rates) {
    if (closed_form_applicable(grid, rates)) {
        if (!(homogeneous_r0(ages, rates) > 1.0)) return std::nullopt;
        return endemic_closed_form(grid, ages, rates);
    }
    ProbeResult probe = endemic_probe(grid, ages, rates);
    return probe.state;
}

void cmd_steady(const ScenarioConfig& cfg, Outputs& out) {
    const RateSet rates = cfg.rates();
    std::vector<SteadyState> states;
    states.push_back(trivial_state(cfg.grid, cfg.ages));
    states.push_back(disease_free(cfg.grid, cfg.ages, rates));
    if (auto e = endemic_state(cfg.grid, cfg.ages, rates)) {
        states.push_back(*e);
    } else {
        SteadyState none;
        none.kind = SteadyKind::kEndemic;
        none.exists = false;
        states.push_back(none);
    }
    CsvTable t;
    t.header = {"kind", "exists", "R0", "residual_S", "residual_I", "drift_S", "drift_I", "iterations"};
    for (const SteadyState& s : states) {
        std::string R0, drift_S, drift_I;
        if (s.exists) {
            const auto [dS, dI] = steady_residual(s, cfg.grid, cfg.ages, rates);
            drift_S = format_number(dS);
            drift_I = format_number(dI);
            if (s.kind == SteadyKind::kDiseaseFree) {
                R0 = format_number(basic_reproduction_number(s, cfg.grid, cfg.ages, rates).value);
            } else if (s.kind == SteadyKind::kEndemic && std::isfinite(s.R0)) {
                R0 = format_number(s.R0);
            }
            out.csv(std::string("steady_") + to_string(s.kind) + ".csv", field_table(cfg.grid, s.S_star, s.I_star));
        }
        t.rows.push_back({to_string(s.kind), s.exists ? "1" : "0", R0,
                          s.exists ? format_number(s.residual_S) : "", s.exists ? format_number(s.residual_I) : "",
                          drift_S, drift_I, std::to_string(s.iterations)});
    }
    out.csv("steady.csv", t);
}

nlohmann::json report_json(const SpectralReport& r) {
    nlohmann::json j;
    j["kind"] = to_string(r.kind);
    j["R0"] = r.kind == SteadyKind::kTrivial ? nlohmann::json() : nlohmann::json(r.R0);
    j["s0"] = r.s0 ? nlohmann::json(*r.s0) : nlohmann::json();
    j["lambda0"] = r.lambda0 ? nlohmann::json(*r.lambda0) : nlohmann::json();
    j["verdict"] = to_string(r.verdict);
    j["note"] = r.note;
    nlohmann::json roots = nlohmann::json::array();
    for (const CharRoot& c : r.char_roots) {
        roots.push_back({{"j", c.j}, {"mu", c.mu}, {"re", c.root.real()}, {"im", c.root.imag()}, {"residual", c.residual}});
    }
    j["roots"] = roots;
    return j;
}

void cmd_stability(const ScenarioConfig& cfg, Outputs& out) {
    const RateSet rates = cfg.rates();
    std::vector<SpectralReport> reports;
    reports.push_back(classify_stability(trivial_state(cfg.grid, cfg.ages), cfg.grid, cfg.ages, rates, cfg.stability));
    reports.push_back(classify_stability(disease_free(cfg.grid, cfg.ages, rates), cfg.grid, cfg.ages, rates, cfg.stability));
    if (auto e = endemic_state(cfg.grid, cfg.ages, rates)) {
        reports.push_back(classify_stability(*e, cfg.grid, cfg.ages, rates, cfg.stability));
    }
    CsvTable t;
    t.header = {"kind", "R0", "s0", "root_re", "root_im", "verdict"};
    std::vector<std::string> jsonl;
    for (const SpectralReport& r : reports) {
        const std::string R0 = r.kind == SteadyKind::kTrivial ? "" : format_number(r.R0);
        if (r.char_roots.empty()) {
            t.rows.push_back({to_string(r.kind), R0, optional_cell(r.s0), "", "", to_string(r.verdict)});
        }
        for (const CharRoot& c : r.char_roots) {
            t.rows.push_back({to_string(r.kind), R0, optional_cell(r.s0), format_number(c.root.real()),
                              format_number(c.root.imag()), to_string(r.verdict)});
        }
        jsonl.push_back(report_json(r).dump());
    }
    out.csv("stability.csv", t);
    out.lines("stability.jsonl", jsonl);
}

template <class F>
void parallel_for(int count, int threads, const F& body) {
    const int workers = std::max(1, std::min(threads, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void cmd_sweep(const ScenarioConfig& cfg, Outputs& out, int threads) {
    if (!cfg.sweep) throw ConfigError(cfg.origin + ": sweep needs a [sweep] section");
    const SweepConfig& sw = *cfg.sweep;
    const int count = static_cast<int>(sw.values.size());
    std::vector<std::vector<std::string>> rows(count);
    parallel_for(count, threads, [&](int i) {
        const double value = sw.values[i];
        const RateSet rates(cfg.with_parameter(sw.parameter, value), cfg.ages, cfg.grid, true);
        const SteadyState dfe = disease_free(cfg.grid, cfg.ages, rates);
        std::string R0, s0, verdict = to_string(Verdict::kInconclusive), endemic = "none", lead;
        if (dfe.exists) {
            const SpectralReport rep = classify_stability(dfe, cfg.grid, cfg.ages, rates, cfg.stability);
            R0 = format_number(rep.R0);
            s0 = optional_cell(rep.s0);
            verdict = to_string(rep.verdict);
            if (closed_form_applicable(cfg.grid, rates) && !rates.infection_free() &&
                homogeneous_r0(cfg.ages, rates) > 1.0) {
                const SteadyState e = endemic_closed_form(cfg.grid, cfg.ages, rates);
                const SpectralReport er = classify_stability(e, cfg.grid, cfg.ages, rates, cfg.stability);
                endemic = to_string(er.verdict);
                double best = -std::numeric_limits<double>::infinity();
                for (const CharRoot& c : er.char_roots) best = std::max(best, c.root.real());
                if (!er.char_roots.empty()) lead = format_number(best);
            }
        }
        rows[i] = {sw.parameter, format_number(value), R0, s0, verdict, endemic, lead};
    });
    CsvTable t;
    t.header = {"parameter", "value", "R0", "s0", "verdict", "endemic_verdict", "leading_root_re"};
    t.rows = std::move(rows);
    out.csv("sweep.csv", t);
}

}  // namespace

RunSummary run_command(const RunOptions& options) {
    static const std::set<std::string> commands = {"simulate", "steady", "stability", "ledger", "sweep"};
    if (!commands.count(options.command)) {
        throw ConfigError("unknown command '" + options.command + "' (simulate, steady, stability, ledger, sweep)");
    }
    if (options.threads < 1) throw ConfigError("--threads must be at least 1");
    const ScenarioConfig cfg = load_scenario_config(options.scenario_path, options.seed.value_or(0));
    Outputs out(resolve_out_dir(options, cfg));
    if (options.command == "simulate") cmd_simulate(cfg, out);
    if (options.command == "ledger") cmd_ledger(cfg, out);
    if (options.command == "steady") cmd_steady(cfg, out);
    if (options.command == "stability") cmd_stability(cfg, out);
    if (options.command == "sweep") cmd_sweep(cfg, out, options.threads);
    return out.summary();
}

int exit_code_for_current_exception() {
    try {
        throw;
    } catch (const ConfigError&) {
        return 2;
    } catch (const DomainError&) {
        return 2;
    } catch (const NumericalError&) {
        return 1;
    } catch (const IoError&) {
        return 1;
    } catch (...) {
        return 1;
    }
}

}  // namespace epi
