#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parrotgate.h"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

int exit_code(pg_status s) {
    switch (s) {
        case PG_OK: return 0;
        case PG_ERR_CONFIG:
        case PG_ERR_INCOMPATIBLE:
        case PG_ERR_INVALID_ARGUMENT: return kExitConfig;
        default: return kExitRuntime;
    }
}

int report_failure(pg_status s) {
    std::fprintf(stderr, "parrotgate: %s: %s\n", pg_status_string(s), pg_last_error());
    return exit_code(s);
}

void print_line(const char* message, void*) {
    std::fputs(message, stdout);
    const std::string m(message);
    if (m.empty() || m.back() != '\n') std::fputc('\n', stdout);
    std::fflush(stdout);
}

// Turns "a.b=v" into (key, value); the value is passed through as JSON text.
bool split_override(const std::string& arg, std::string& key, std::string& value) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0) return false;
    key = arg.substr(0, eq);
    value = arg.substr(eq + 1);
    return true;
}

struct Common {
    std::string config;
    std::string output_dir;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--output-dir", c.output_dir, "Override output_dir");
    cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set train.seed=3");
    cmd->add_option("overrides", c.overrides, "Config overrides as key=value");
}

class Run {
public:
    ~Run() { pg_run_close(run_); }

    pg_status open(const Common& c) {
        pg_status s = pg_run_open(c.config.c_str(), &run_);
        if (s != PG_OK) return s;
        pg_run_set_logger(run_, print_line, nullptr);
        for (const auto& o : c.overrides) {
            std::string key, value;
            if (!split_override(o, key, value)) {
                std::fprintf(stderr, "parrotgate: override '%s' is not of the form key=value\n", o.c_str());
                return PG_ERR_INVALID_ARGUMENT;
            }
            if ((s = pg_run_set(run_, key.c_str(), value.c_str())) != PG_OK) return s;
        }
        if (!c.output_dir.empty()) {
            const std::string quoted = "\"" + c.output_dir + "\"";
            if ((s = pg_run_set(run_, "output_dir", quoted.c_str())) != PG_OK) return s;
        }
        return PG_OK;
    }

    pg_status set(const char* key, const std::string& json) { return pg_run_set(run_, key, json.c_str()); }

    pg_run* get() { return run_; }

private:
    pg_run* run_ = nullptr;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parroting detection with an overfit masked autoencoder"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pg_version());

    Common gen_c, train_c, cal_c, eval_c, sweep_c;

    auto* gen = app.add_subcommand("gen-data", "Generate the train/mod1/mod2/novel sketch images");
    add_common(gen, gen_c);

    auto* trn = app.add_subcommand("train", "Overfit the autoencoder on the training split");
    add_common(trn, train_c);
    long long epochs = -1;
    bool resume = false;
    trn->add_option("--epochs", epochs, "Total epoch budget (overrides train.epochs)")->check(CLI::PositiveNumber);
    trn->add_flag("--resume", resume, "Continue from the latest checkpoint");

    auto* cal = app.add_subcommand("calibrate", "Score the training split and write threshold.json");
    add_common(cal, cal_c);
    std::string cal_ckpt;
    cal->add_option("--checkpoint", cal_ckpt, "Checkpoint (default checkpoints/final.ckpt)");

    auto* evl = app.add_subcommand("eval", "Apply the threshold to every split and write report.*");
    add_common(evl, eval_c);
    std::string eval_ckpt, eval_threshold, splits;
    bool plot = false;
    evl->add_option("--checkpoint", eval_ckpt, "Checkpoint (default checkpoints/final.ckpt)");
    evl->add_option("--threshold", eval_threshold, "Threshold file (default threshold.json)");
    evl->add_option("--splits", splits, "Comma-separated subset of train,mod1,mod2,novel");
    evl->add_flag("--plot", plot, "Write per-split loss histograms as SVG");

    auto* swp = app.add_subcommand("sweep", "Run the full pipeline over a grid and write one table");
    add_common(swp, sweep_c);
    std::vector<double> grid_pm;
    std::vector<int> grid_wd, grid_aug;
    std::vector<std::uint64_t> grid_ep;
    swp->add_option("--p-mask", grid_pm, "Masking ratios")->delimiter(',');
    swp->add_option("--wd", grid_wd, "Weight decay toggles (0/1)")->delimiter(',');
    swp->add_option("--aug", grid_aug, "Augmentation toggles (0/1)")->delimiter(',');
    swp->add_option("--epochs", grid_ep, "Epoch budgets")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    Run run;
    pg_status s = PG_OK;
    if (*gen) {
        if ((s = run.open(gen_c)) != PG_OK) return report_failure(s);
        pg_split_counts counts{};
        s = pg_gen_data(run.get(), &counts);
    } else if (*trn) {
        if ((s = run.open(train_c)) != PG_OK) return report_failure(s);
        if (epochs > 0 && (s = run.set("train.epochs", std::to_string(epochs))) != PG_OK) return report_failure(s);
        s = pg_train(run.get(), resume ? 1 : 0, nullptr);
    } else if (*cal) {
        if ((s = run.open(cal_c)) != PG_OK) return report_failure(s);
        s = pg_calibrate(run.get(), cal_ckpt.c_str(), nullptr);
    } else if (*evl) {
        if ((s = run.open(eval_c)) != PG_OK) return report_failure(s);
        const pg_eval_options opts{eval_ckpt.c_str(), eval_threshold.c_str(), splits.c_str(), plot ? 1 : 0};
        s = pg_eval(run.get(), &opts, nullptr);
    } else if (*swp) {
        if ((s = run.open(sweep_c)) != PG_OK) return report_failure(s);
        const pg_sweep_grid grid{grid_pm.data(),  grid_pm.size(),  grid_wd.data(), grid_wd.size(),
                                 grid_aug.data(), grid_aug.size(), grid_ep.data(), grid_ep.size()};
        s = pg_sweep(run.get(), &grid, nullptr);
    }
    return s == PG_OK ? 0 : report_failure(s);
}
