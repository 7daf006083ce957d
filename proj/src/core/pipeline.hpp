#pragma once

// Pipeline stages over a run directory:
//
//   <output_dir>/run_config.json
//   <output_dir>/data/{train,mod1,mod2,novel}/, data/manifest.jsonl, data/dataset.json
//   <output_dir>/checkpoints/epoch_NNNNNN.ckpt, checkpoints/final.ckpt
//   <output_dir>/loss_curve.csv
//   <output_dir>/threshold.json
//   <output_dir>/scores/calibration.csv, scores/<split>.csv
//   <output_dir>/report.{json,csv,md}
//   <output_dir>/plots/<split>.svg
//
// Every stage checks that the fingerprints of its inputs equal the fingerprint
// of the current configuration before doing any work.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/detect.hpp"

namespace pg {

using Logger = std::function<void(const std::string&)>;

struct RunPaths {
    std::filesystem::path root;

    explicit RunPaths(std::filesystem::path r) : root(std::move(r)) {}

    std::filesystem::path config() const { return root / "run_config.json"; }
    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path dataset_info() const { return data() / "dataset.json"; }
    std::filesystem::path checkpoints() const { return root / "checkpoints"; }
    std::filesystem::path final_checkpoint() const { return checkpoints() / "final.ckpt"; }
    std::filesystem::path epoch_checkpoint(std::size_t epoch) const;
    std::filesystem::path loss_curve() const { return root / "loss_curve.csv"; }
    std::filesystem::path threshold() const { return root / "threshold.json"; }
    std::filesystem::path scores() const { return root / "scores"; }
    std::filesystem::path plots() const { return root / "plots"; }
    std::filesystem::path report(const std::string& ext) const { return root / ("report." + ext); }
};

SplitCounts cmd_gen_data(const RunConfig& config, const Logger& log = {});

struct TrainOptions {
    bool resume = false;  // continue from the latest checkpoint up to train.epochs in total
};

TrainState cmd_train(const RunConfig& config, const TrainOptions& options = {}, const Logger& log = {});

// Defaults to checkpoints/final.ckpt.
Threshold cmd_calibrate(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint = {},
                        const Logger& log = {});

struct EvalOptions {
    std::optional<std::filesystem::path> checkpoint;  // default checkpoints/final.ckpt
    std::optional<std::filesystem::path> threshold;   // default threshold.json
    std::vector<Split> splits;                        // empty = all four
    bool plot = false;
};

DetectionReport cmd_eval(const RunConfig& config, const EvalOptions& options = {}, const Logger& log = {});

struct SweepGrid {
    std::vector<double> p_mask;
    std::vector<bool> weight_decay;
    std::vector<bool> augmentation;
    std::vector<std::size_t> epochs;
};

// Runs the whole pipeline once per grid cell under <output_dir>/sweep/ and
// writes sweep_report.{json,csv,md}. Empty axes keep the base value.
std::vector<DetectionReport> cmd_sweep(const RunConfig& config, const SweepGrid& grid, const Logger& log = {});

// Loss histogram with tau drawn as a vertical line.
std::string render_histogram_svg(const std::vector<double>& losses, double tau, const std::string& title);

}  // namespace pg
