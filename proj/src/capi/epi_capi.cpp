#include "epi/epi.h"

#include "errors.hpp"
#include "runner.hpp"
#include "spectral.hpp"

#include <memory>
#include <string>

struct epi_scenario {
    epi::ScenarioConfig cfg;
    epi::RateSet rates;
};

struct epi_trajectory {
    epi::Trajectory trajectory;
};

namespace {

thread_local std::string last_error;

int fail(int status, const char* what) {
    last_error = what;
    return status;
}

template <class F>
int guarded(F&& body) {
    try {
        last_error.clear();
        body();
        return EPI_OK;
    } catch (const epi::ConfigError& e) {
        return fail(EPI_ERR_CONFIG, e.what());
    } catch (const epi::DomainError& e) {
        return fail(EPI_ERR_DOMAIN, e.what());
    } catch (const epi::NumericalError& e) {
        return fail(EPI_ERR_NUMERICAL, e.what());
    } catch (const epi::IoError& e) {
        return fail(EPI_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(EPI_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(EPI_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(EPI_ERR_INTERNAL, "unknown error");
    }
}

int null_argument(const char* name) {
    last_error = std::string("null argument: ") + name;
    return EPI_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

const char* epi_last_error(void) { return last_error.c_str(); }

const char* epi_status_string(int status) {
    switch (status) {
        case EPI_OK: return "ok";
        case EPI_ERR_NUMERICAL: return "numerical failure";
        case EPI_ERR_CONFIG: return "configuration error";
        case EPI_ERR_IO: return "i/o error";
        case EPI_ERR_DOMAIN: return "precondition violated";
        case EPI_ERR_ARGUMENT: return "invalid argument";
        case EPI_ERR_INTERNAL: return "internal error";
        default: return "unknown status";
    }
}

int epi_exit_code(int status) {
    switch (status) {
        case EPI_OK: return 0;
        case EPI_ERR_CONFIG:
        case EPI_ERR_DOMAIN:
        case EPI_ERR_ARGUMENT: return 2;
        default: return 1;
    }
}

int epi_run(const epi_run_options* options) {
    if (!options) return null_argument("options");
    if (!options->command) return null_argument("options->command");
    if (!options->scenario_path) return null_argument("options->scenario_path");
    return guarded([&] {
        epi::RunOptions opt;
        opt.command = options->command;
        opt.scenario_path = options->scenario_path;
        if (options->out_dir) opt.out_dir = options->out_dir;
        if (options->has_seed) opt.seed = options->seed;
        opt.threads = options->threads;
        epi::run_command(opt);
    });
}

int epi_scenario_load(const char* path, uint64_t seed, epi_scenario** out) {
    if (!path) return null_argument("path");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        epi::ScenarioConfig cfg = epi::load_scenario_config(path, seed);
        epi::RateSet rates = cfg.rates();
        *out = new epi_scenario{std::move(cfg), std::move(rates)};
    });
}

void epi_scenario_free(epi_scenario* scenario) { delete scenario; }

int epi_scenario_get_info(const epi_scenario* s, epi_scenario_info* out) {
    if (!s) return null_argument("scenario");
    if (!out) return null_argument("out");
    return guarded([&] {
        out->n = s->cfg.grid.size();
        out->delta = s->cfg.grid.delta();
        out->age_intervals = s->cfg.ages.intervals();
        out->a_max = s->cfg.ages.a_max();
        out->T_end = s->cfg.T_end;
        out->steps = s->cfg.scenario().steps();
    });
}

int epi_basic_reproduction_number(const epi_scenario* s, double* out) {
    if (!s) return null_argument("scenario");
    if (!out) return null_argument("out");
    return guarded([&] {
        const epi::SteadyState dfe = epi::disease_free(s->cfg.grid, s->cfg.ages, s->rates);
        *out = epi::basic_reproduction_number(dfe, s->cfg.grid, s->cfg.ages, s->rates).value;
    });
}

int epi_spectral_bound(const epi_scenario* s, double* out) {
    if (!s) return null_argument("scenario");
    if (!out) return null_argument("out");
    return guarded([&] {
        const epi::SteadyState dfe = epi::disease_free(s->cfg.grid, s->cfg.ages, s->rates);
        if (!dfe.exists) throw epi::DomainError("spectral bound: no disease-free state");
        *out = epi::spectral_bound(dfe.S_star, s->cfg.grid, s->cfg.ages, s->rates);
    });
}

int epi_simulate(const epi_scenario* s, epi_trajectory** out) {
    if (!s) return null_argument("scenario");
    if (!out) return null_argument("out");
    *out = nullptr;
    return guarded([&] {
        const epi::Scenario sc = s->cfg.scenario();
        *out = new epi_trajectory{epi::simulate(sc)};
    });
}

void epi_trajectory_free(epi_trajectory* trajectory) { delete trajectory; }

size_t epi_trajectory_length(const epi_trajectory* trajectory) {
    return trajectory ? trajectory->trajectory.summary.size() : 0;
}

int epi_trajectory_summary(const epi_trajectory* trajectory, size_t index, epi_step_summary* out) {
    if (!trajectory) return null_argument("trajectory");
    if (!out) return null_argument("out");
    if (index >= trajectory->trajectory.summary.size()) {
        last_error = "trajectory index out of range";
        return EPI_ERR_ARGUMENT;
    }
    const epi::StepRecord& r = trajectory->trajectory.summary[index];
    *out = {r.t, r.mass_S, r.mass_I, r.sup_S, r.renewal_norm};
    return EPI_OK;
}

}  // extern "C"
