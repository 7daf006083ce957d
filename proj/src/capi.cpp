#include "parrotgate.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/loss.hpp"
#include "core/pipeline.hpp"

struct pg_run {
    pg::RunConfig config;
    std::string fingerprint;
    std::string config_json;
    pg_log_fn log_fn = nullptr;
    void* log_user = nullptr;

    void refresh() {
        fingerprint = pg::config_fingerprint(config);
        config_json = pg::to_json(config).dump();
    }

    pg::Logger logger() const {
        if (!log_fn) return {};
        return [fn = log_fn, user = log_user](const std::string& m) { fn(m.c_str(), user); };
    }
};

namespace {

thread_local std::string g_last_error;

pg_status status_of(pg::ErrorKind kind) {
    switch (kind) {
        case pg::ErrorKind::Config: return PG_ERR_CONFIG;
        case pg::ErrorKind::Incompatible: return PG_ERR_INCOMPATIBLE;
        case pg::ErrorKind::Io: return PG_ERR_IO;
        case pg::ErrorKind::Numeric: return PG_ERR_NUMERIC;
        case pg::ErrorKind::Dimension: return PG_ERR_DIMENSION;
        case pg::ErrorKind::Contract: return PG_ERR_CONTRACT;
        case pg::ErrorKind::DegenerateInput: return PG_ERR_DEGENERATE_INPUT;
        case pg::ErrorKind::UnsatisfiableConstraint: return PG_ERR_UNSATISFIABLE;
        case pg::ErrorKind::NoDrawingPixels: return PG_ERR_NO_DRAWING_PIXELS;
    }
    return PG_ERR_INTERNAL;
}

template <typename F>
pg_status guarded(F&& body) {
    g_last_error.clear();
    try {
        body();
        return PG_OK;
    } catch (const pg::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return PG_ERR_INTERNAL;
}

pg_status invalid(const char* what) {
    g_last_error = what;
    return PG_ERR_INVALID_ARGUMENT;
}

std::vector<pg::Split> parse_splits(const char* text) {
    std::vector<pg::Split> out;
    if (!text) return out;
    std::string s(text);
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto part = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!part.empty()) {
            const auto split = pg::parse_split(part);
            if (std::find(out.begin(), out.end(), split) == out.end()) out.push_back(split);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

pg_status open_with(pg::RunConfig (*make)(const std::string&), const char* arg, pg_run** out) {
    if (!arg || !out) return invalid("null argument");
    *out = nullptr;
    return guarded([&] {
        auto run = std::make_unique<pg_run>();
        run->config = make(arg);
        run->refresh();
        *out = run.release();
    });
}

}  // namespace

extern "C" {

const char* pg_version(void) { return "0.1.0"; }

const char* pg_last_error(void) { return g_last_error.c_str(); }

const char* pg_status_string(pg_status status) {
    switch (status) {
        case PG_OK: return "ok";
        case PG_ERR_CONFIG: return "configuration error";
        case PG_ERR_INCOMPATIBLE: return "incompatible artifact";
        case PG_ERR_IO: return "i/o error";
        case PG_ERR_NUMERIC: return "numeric failure";
        case PG_ERR_DIMENSION: return "dimension error";
        case PG_ERR_CONTRACT: return "contract violation";
        case PG_ERR_DEGENERATE_INPUT: return "degenerate input";
        case PG_ERR_UNSATISFIABLE: return "unsatisfiable constraint";
        case PG_ERR_NO_DRAWING_PIXELS: return "no drawing pixels";
        case PG_ERR_INVALID_ARGUMENT: return "invalid argument";
        case PG_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

pg_status pg_run_open(const char* config_path, pg_run** out) {
    return open_with([](const std::string& p) { return pg::load_run_config(p); }, config_path, out);
}

pg_status pg_run_open_json(const char* config_json, pg_run** out) {
    return open_with(
        [](const std::string& text) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const nlohmann::json::exception& ex) {
                pg::fail(pg::ErrorKind::Config, std::string("config is not valid JSON: ") + ex.what());
            }
            return pg::run_config_from_json(j);
        },
        config_json, out);
}

void pg_run_close(pg_run* run) { delete run; }

pg_status pg_run_set(pg_run* run, const char* dotted_key, const char* json_value) {
    if (!run || !dotted_key || !json_value) return invalid("null argument");
    return guarded([&] {
        nlohmann::json value;
        try {
            value = nlohmann::json::parse(json_value);
        } catch (const nlohmann::json::exception&) {
            // Bare words are taken as strings so that `output_dir=runs/a` works.
            value = std::string(json_value);
        }
        pg::RunConfig next = run->config;
        pg::apply_override(next, dotted_key, value);
        run->config = std::move(next);
        run->refresh();
    });
}

void pg_run_set_logger(pg_run* run, pg_log_fn fn, void* user_data) {
    if (!run) return;
    run->log_fn = fn;
    run->log_user = user_data;
}

const char* pg_run_fingerprint(const pg_run* run) { return run ? run->fingerprint.c_str() : ""; }

const char* pg_run_config_json(const pg_run* run) { return run ? run->config_json.c_str() : ""; }

pg_status pg_gen_data(pg_run* run, pg_split_counts* counts) {
    if (!run) return invalid("null run handle");
    return guarded([&] {
        const auto c = pg::cmd_gen_data(run->config, run->logger());
        if (counts) *counts = {c.train, c.mod1, c.mod2, c.novel};
    });
}

pg_status pg_train(pg_run* run, int resume, double* final_loss) {
    if (!run) return invalid("null run handle");
    return guarded([&] {
        const auto state = pg::cmd_train(run->config, {resume != 0}, run->logger());
        if (final_loss)
            *final_loss = state.loss_curve.empty() ? std::numeric_limits<double>::quiet_NaN() : state.loss_curve.back();
    });
}

pg_status pg_calibrate(pg_run* run, const char* checkpoint, double* tau) {
    if (!run) return invalid("null run handle");
    return guarded([&] {
        std::optional<std::filesystem::path> ckpt;
        if (checkpoint && *checkpoint) ckpt = checkpoint;
        const auto t = pg::cmd_calibrate(run->config, ckpt, run->logger());
        if (tau) *tau = t.tau;
    });
}

pg_status pg_eval(pg_run* run, const pg_eval_options* options, pg_eval_result* result) {
    if (!run) return invalid("null run handle");
    return guarded([&] {
        pg::EvalOptions opts;
        if (options) {
            if (options->checkpoint && *options->checkpoint) opts.checkpoint = options->checkpoint;
            if (options->threshold && *options->threshold) opts.threshold = options->threshold;
            opts.splits = parse_splits(options->splits);
            opts.plot = options->plot != 0;
        }
        const auto report = pg::cmd_eval(run->config, opts, run->logger());
        if (result) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            result->tau = report.tau;
            result->train_rate = report.detection_rate(pg::Split::Train).value_or(nan);
            result->mod1_rate = report.detection_rate(pg::Split::Mod1).value_or(nan);
            result->mod2_rate = report.detection_rate(pg::Split::Mod2).value_or(nan);
            result->nov_pass_rate = report.nov_pass_rate().value_or(nan);
        }
    });
}

pg_status pg_sweep(pg_run* run, const pg_sweep_grid* grid, size_t* n_rows) {
    if (!run) return invalid("null run handle");
    return guarded([&] {
        pg::SweepGrid g;
        if (grid) {
            if (grid->p_mask) g.p_mask.assign(grid->p_mask, grid->p_mask + grid->n_p_mask);
            if (grid->weight_decay)
                for (size_t i = 0; i < grid->n_weight_decay; ++i) g.weight_decay.push_back(grid->weight_decay[i] != 0);
            if (grid->augmentation)
                for (size_t i = 0; i < grid->n_augmentation; ++i) g.augmentation.push_back(grid->augmentation[i] != 0);
            if (grid->epochs)
                for (size_t i = 0; i < grid->n_epochs; ++i) g.epochs.push_back(static_cast<std::size_t>(grid->epochs[i]));
        }
        const auto rows = pg::cmd_sweep(run->config, g, run->logger());
        if (n_rows) *n_rows = rows.size();
    });
}

pg_status pg_detect(double loss, double tau, int* parroted) {
    if (!parroted) return invalid("null output pointer");
    return guarded([&] { *parroted = pg::detect(loss, tau) ? 1 : 0; });
}

pg_status pg_masked_mse(const double* x, const double* x_hat, size_t width, size_t height, double white_threshold,
                        double* loss) {
    if (!x || !x_hat || !loss) return invalid("null argument");
    return guarded([&] {
        pg::RasterImage a(width, height), b(width, height);
        std::copy(x, x + width * height, a.pixels.begin());
        std::copy(x_hat, x_hat + width * height, b.pixels.begin());
        *loss = pg::masked_mse(a, b, pg::drawing_mask(a, white_threshold));
    });
}

pg_status pg_mean_threshold(const double* scores, size_t n, double* tau) {
    if (!tau || (n > 0 && !scores)) return invalid("null argument");
    return guarded([&] { *tau = pg::calibrate_tau(std::span<const double>(scores, n), "").tau; });
}

}  // extern "C"
