#include "core/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "core/error.hpp"
#include "core/train.hpp"

namespace pg {

namespace fs = std::filesystem;

namespace {

void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << text;
    require(out.good(), ErrorKind::Io, "failed while writing " + path.string());
}

nlohmann::json read_json(const fs::path& path, const std::string& what) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, what + " not found: " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Io, what + " " + path.string() + " is not valid JSON: " + ex.what());
    }
}

void require_fingerprint(const std::string& found, const std::string& expected, const std::string& what) {
    require(found == expected, ErrorKind::Incompatible,
            what + " has config fingerprint " + found + " but the current config has " + expected);
}

void check_dataset(const RunPaths& paths, const std::string& fingerprint) {
    const auto info = read_json(paths.dataset_info(), "dataset (run gen-data first)");
    require(info.contains("config_fingerprint"), ErrorKind::Io, "dataset info lacks a config fingerprint");
    require_fingerprint(info["config_fingerprint"].get<std::string>(), fingerprint, "dataset " + paths.data().string());
}

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::optional<fs::path> latest_checkpoint(const RunPaths& paths) {
    if (fs::exists(paths.final_checkpoint())) return paths.final_checkpoint();
    std::optional<fs::path> best;
    if (!fs::exists(paths.checkpoints())) return best;
    for (const auto& entry : fs::directory_iterator(paths.checkpoints())) {
        const auto name = entry.path().filename().string();
        if (name.starts_with("epoch_") && name.ends_with(".ckpt") && (!best || name > best->filename().string()))
            best = entry.path();
    }
    return best;
}

LoadedState load_checked(const fs::path& ckpt, const std::string& fingerprint) {
    require(fs::exists(ckpt), ErrorKind::Io, "checkpoint not found: " + ckpt.string());
    auto loaded = load_train_state(ckpt);
    require_fingerprint(loaded.fingerprint, fingerprint, "checkpoint " + ckpt.string());
    return loaded;
}

std::vector<RasterImage> images_of(const std::vector<Sample>& samples) {
    std::vector<RasterImage> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.image);
    return out;
}

std::string summary_line(const DetectionReport& r) {
    std::ostringstream os;
    os << "tau " << g17(r.tau);
    for (Split s : kAllSplits)
        if (auto rate = r.detection_rate(s)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", *rate);
            os << ", " << to_string(s) << ' ' << buf << '%';
        }
    return os.str();
}

RunSummary run_summary(const RunConfig& c, std::size_t epochs) {
    return {c.train.weight_decay_enabled, c.train.augmentation_enabled, c.model.p_mask, epochs};
}

std::string cell_name(std::size_t index, const RunConfig& c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "cell_%03zu_pm%.2f_wd%d_aug%d_ep%zu", index, c.model.p_mask,
                  c.train.weight_decay_enabled ? 1 : 0, c.train.augmentation_enabled ? 1 : 0, c.train.epochs);
    return buf;
}

}  // namespace

fs::path RunPaths::epoch_checkpoint(std::size_t epoch) const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%06zu.ckpt", epoch);
    return checkpoints() / buf;
}

SplitCounts cmd_gen_data(const RunConfig& config, const Logger& log) {
    validate(config);
    const RunPaths paths(config.output_dir);
    const auto fingerprint = config_fingerprint(config);
    fs::create_directories(paths.root);
    write_text(paths.config(), to_json(config).dump(2) + "\n");

    const auto counts = gen_dataset(config.dataset, paths.data());
    const nlohmann::json info = {{"config_fingerprint", fingerprint},
                                 {"counts",
                                  {{"train", counts.train},
                                   {"mod1", counts.mod1},
                                   {"mod2", counts.mod2},
                                   {"novel", counts.novel}}}};
    write_text(paths.dataset_info(), info.dump(2) + "\n");
    say(log, "train " + std::to_string(counts.train) + ", mod1 " + std::to_string(counts.mod1) + ", mod2 " +
                 std::to_string(counts.mod2) + ", novel " + std::to_string(counts.novel));
    return counts;
}

TrainState cmd_train(const RunConfig& config, const TrainOptions& options, const Logger& log) {
    validate(config);
    const RunPaths paths(config.output_dir);
    const auto fingerprint = config_fingerprint(config);
    check_dataset(paths, fingerprint);

    TrainState state;
    if (options.resume) {
        const auto ckpt = latest_checkpoint(paths);
        require(ckpt.has_value(), ErrorKind::Io, "nothing to resume in " + paths.checkpoints().string());
        state = load_checked(*ckpt, fingerprint).state;
        say(log, "resuming from " + ckpt->string() + " at epoch " + std::to_string(state.epochs_completed()));
    } else {
        state = init_training(config.model, config.train);
    }
    require(state.epochs_completed() <= config.train.epochs, ErrorKind::Config,
            "checkpoint already has " + std::to_string(state.epochs_completed()) + " epochs, more than train.epochs = " +
                std::to_string(config.train.epochs));

    const auto train_images = images_of(load_split(paths.data(), Split::Train));
    fs::create_directories(paths.checkpoints());
    const std::size_t remaining = config.train.epochs - state.epochs_completed();
    const std::size_t every = config.train.checkpoint_every;
    const std::size_t report_every = std::max<std::size_t>(1, config.train.epochs / 20);
    if (remaining > 0) {
        train(state, train_images, config.train, remaining, [&](const TrainState& s, std::size_t epoch) {
            if (epoch % every == 0) save_train_state(paths.epoch_checkpoint(epoch), s, fingerprint);
            if (epoch % report_every == 0 || epoch == 1)
                say(log, "epoch " + std::to_string(epoch) + " loss " + g17(s.loss_curve.back()));
        });
    }
    save_train_state(paths.final_checkpoint(), state, fingerprint);
    write_loss_curve(paths.loss_curve(), state.loss_curve);
    say(log, "wrote " + paths.final_checkpoint().string());
    return state;
}

Threshold cmd_calibrate(const RunConfig& config, const std::optional<fs::path>& checkpoint, const Logger& log) {
    validate(config);
    const RunPaths paths(config.output_dir);
    const auto fingerprint = config_fingerprint(config);
    const auto loaded = load_checked(checkpoint.value_or(paths.final_checkpoint()), fingerprint);
    check_dataset(paths, fingerprint);

    const auto samples = load_split(paths.data(), Split::Train);
    const auto scored = score_split(loaded.state.params, Split::Train, samples, config.scoring.options, config.scoring.seed);
    std::vector<double> aggregates;
    std::ostringstream csv;
    csv << "id,loss";
    for (std::size_t k = 0; k < config.scoring.options.repeats; ++k) csv << ",repeat_" << k;
    csv << ",config_fingerprint\n";
    for (const auto& s : scored) {
        aggregates.push_back(s.score.aggregate);
        csv << s.id << ',' << g17(s.score.aggregate);
        for (double l : s.score.losses) csv << ',' << g17(l);
        csv << ',' << fingerprint << '\n';
    }
    Threshold t = calibrate_tau(aggregates, fingerprint);
    t.white_threshold = config.scoring.options.white_threshold;
    t.repeats = config.scoring.options.repeats;

    fs::create_directories(paths.scores());
    write_text(paths.scores() / "calibration.csv", csv.str());
    save_threshold(paths.threshold(), t);
    say(log, "tau " + g17(t.tau) + " over " + std::to_string(t.n_samples) + " training samples");
    return t;
}

DetectionReport cmd_eval(const RunConfig& config, const EvalOptions& options, const Logger& log) {
    validate(config);
    const RunPaths paths(config.output_dir);
    const auto fingerprint = config_fingerprint(config);
    const auto loaded = load_checked(options.checkpoint.value_or(paths.final_checkpoint()), fingerprint);
    const auto threshold_path = options.threshold.value_or(paths.threshold());
    require(fs::exists(threshold_path), ErrorKind::Io, "threshold not found: " + threshold_path.string());
    const Threshold threshold = load_threshold(threshold_path);
    require_fingerprint(threshold.config_fingerprint, fingerprint, "threshold " + threshold_path.string());
    check_dataset(paths, fingerprint);

    std::vector<Split> splits = options.splits;
    if (splits.empty()) splits.assign(std::begin(kAllSplits), std::end(kAllSplits));
    SplitSamples data;
    for (Split s : splits) data[s] = load_split(paths.data(), s);

    const auto report = evaluate(loaded.state.params, threshold, fingerprint, data, config.scoring.options,
                                 config.scoring.seed, run_summary(config, loaded.state.epochs_completed()));

    fs::create_directories(paths.scores());
    for (Split s : splits) {
        std::ostringstream csv;
        csv << "id,loss,tau,parroted,config_fingerprint\n";
        std::vector<double> losses;
        for (const auto& v : report.verdicts) {
            if (v.split != s) continue;
            csv << v.id << ',' << g17(v.loss) << ',' << g17(v.tau) << ',' << (v.parroted ? 1 : 0) << ',' << fingerprint
                << '\n';
            losses.push_back(v.loss);
        }
        write_text(paths.scores() / (std::string(to_string(s)) + ".csv"), csv.str());
        if (options.plot) {
            fs::create_directories(paths.plots());
            write_text(paths.plots() / (std::string(to_string(s)) + ".svg"),
                       render_histogram_svg(losses, report.tau, std::string(to_string(s)) + " loss"));
        }
    }
    write_text(paths.report("json"), render_report(report, ReportFormat::Json));
    write_text(paths.report("csv"), render_report(report, ReportFormat::Csv));
    write_text(paths.report("md"), render_report(report, ReportFormat::Markdown));
    say(log, summary_line(report));
    say(log, render_report(report, ReportFormat::Markdown));
    return report;
}

std::vector<DetectionReport> cmd_sweep(const RunConfig& config, const SweepGrid& grid, const Logger& log) {
    validate(config);
    const std::vector<double> pms = grid.p_mask.empty() ? std::vector<double>{config.model.p_mask} : grid.p_mask;
    const std::vector<bool> wds =
        grid.weight_decay.empty() ? std::vector<bool>{config.train.weight_decay_enabled} : grid.weight_decay;
    const std::vector<bool> augs =
        grid.augmentation.empty() ? std::vector<bool>{config.train.augmentation_enabled} : grid.augmentation;
    const std::vector<std::size_t> eps = grid.epochs.empty() ? std::vector<std::size_t>{config.train.epochs} : grid.epochs;

    const fs::path base = config.output_dir;
    std::vector<DetectionReport> reports;
    std::size_t index = 0;
    for (bool wd : wds)
        for (bool aug : augs)
            for (double pm : pms)
                for (std::size_t ep : eps) {
                    RunConfig cell = config;
                    apply_override(cell, "model.p_mask", pm);
                    apply_override(cell, "train.weight_decay", wd);
                    apply_override(cell, "train.augmentation", aug);
                    apply_override(cell, "train.epochs", ep);
                    cell.output_dir = (base / "sweep" / cell_name(index++, cell)).string();
                    say(log, "cell " + cell.output_dir);
                    cmd_gen_data(cell, log);
                    cmd_train(cell, {}, log);
                    cmd_calibrate(cell, {}, log);
                    reports.push_back(cmd_eval(cell, {}, log));
                }

    fs::create_directories(base);
    nlohmann::json rows = nlohmann::json::array();
    std::string csv;
    for (const auto& r : reports) {
        rows.push_back(to_json(r));
        const auto one = render_report(r, ReportFormat::Csv);
        csv += csv.empty() ? one : one.substr(one.find('\n') + 1);
    }
    write_text(base / "sweep_report.json", rows.dump(2) + "\n");
    write_text(base / "sweep_report.csv", csv);
    const auto md = render_markdown_table(reports);
    write_text(base / "sweep_report.md", md);
    say(log, md);
    return reports;
}

std::string render_histogram_svg(const std::vector<double>& losses, double tau, const std::string& title) {
    constexpr int kW = 480, kH = 300, kLeft = 50, kRight = 20, kTop = 30, kBottom = 40, kBins = 20;
    double lo = tau, hi = tau;
    for (double l : losses) {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    if (hi - lo < 1e-12) {
        lo -= 0.5e-3;
        hi += 0.5e-3;
    }
    std::vector<std::size_t> counts(kBins, 0);
    for (double l : losses) {
        auto b = static_cast<std::size_t>((l - lo) / (hi - lo) * kBins);
        counts[std::min<std::size_t>(b, kBins - 1)] += 1;
    }
    const std::size_t peak = std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
    auto x_of = [&](double v) { return kLeft + (v - lo) / (hi - lo) * plot_w; };

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    for (int b = 0; b < kBins; ++b) {
        const double h = plot_h * static_cast<double>(counts[b]) / static_cast<double>(peak);
        os << "<rect x=\"" << kLeft + b * plot_w / kBins << "\" y=\"" << kTop + plot_h - h << "\" width=\""
           << plot_w / kBins - 1 << "\" height=\"" << h << "\" fill=\"#4a78b5\"/>\n";
    }
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kW - kRight << "\" y2=\""
       << kTop + plot_h << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << x_of(tau) << "\" y1=\"" << kTop << "\" x2=\"" << x_of(tau) << "\" y2=\"" << kTop + plot_h
       << "\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << x_of(tau) + 4 << "\" y=\"" << kTop + 12 << "\" font-size=\"11\" fill=\"#c0392b\">tau</text>\n"
       << "<text x=\"" << kLeft << "\" y=\"" << kH - 12 << "\" font-size=\"11\">" << lo << "</text>\n"
       << "<text x=\"" << kW - kRight << "\" y=\"" << kH - 12 << "\" font-size=\"11\" text-anchor=\"end\">" << hi
       << "</text>\n"
       << "</svg>\n";
    return os.str();
}

}  // namespace pg
