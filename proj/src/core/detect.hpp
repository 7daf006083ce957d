#pragma once

// Threshold detection over the four splits and report rendering.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/dataset.hpp"
#include "core/loss.hpp"
#include "core/mae.hpp"

namespace pg {

// loss <= tau. Both arguments must be finite.
bool detect(double loss, double tau);

struct Verdict {
    std::string id;
    Split split = Split::Train;
    double loss = 0.0;
    double tau = 0.0;
    bool parroted = false;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct RunSummary {
    bool weight_decay = false;
    bool augmentation = false;
    double p_mask = 0.75;
    std::size_t epochs = 0;

    friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct SplitResult {
    std::size_t flagged = 0;
    std::size_t total = 0;

    double rate() const { return 100.0 * static_cast<double>(flagged) / static_cast<double>(total); }
    friend bool operator==(const SplitResult&, const SplitResult&) = default;
};

struct DetectionReport {
    RunSummary run;
    std::string config_fingerprint;
    double tau = 0.0;
    std::array<std::optional<SplitResult>, 4> splits;  // indexed by Split
    std::vector<Verdict> verdicts;

    std::optional<double> detection_rate(Split s) const;
    // Percent of novel samples not flagged; empty when the novel split was not evaluated.
    std::optional<double> nov_pass_rate() const;

    friend bool operator==(const DetectionReport&, const DetectionReport&) = default;
};

using SplitSamples = std::map<Split, std::vector<Sample>>;

// Seed for one sample's K scoring masks. Depends only on the source sketch,
// so a training image and its perturbed variants see the same masks.
std::uint64_t scoring_seed(std::uint64_t scoring_seed_base, std::size_t source_index);

struct ScoredSample {
    std::string id;
    Split split = Split::Train;
    LossScore score;
};

std::vector<ScoredSample> score_split(const MAEParams& params, Split split, std::span<const Sample> samples,
                                      const ScoringOptions& options, std::uint64_t seed_base);

// Applies the rule to already-scored samples.
DetectionReport build_report(std::span<const ScoredSample> scored, const Threshold& threshold, const RunSummary& run);

// Scores every sample and applies the rule. `config_fingerprint` must match
// the threshold's.
DetectionReport evaluate(const MAEParams& params, const Threshold& threshold, const std::string& config_fingerprint,
                         const SplitSamples& datasets, const ScoringOptions& options, std::uint64_t seed_base,
                         const RunSummary& run);

enum class ReportFormat { Json, Csv, Markdown };

ReportFormat parse_report_format(const std::string& name);
std::string render_report(const DetectionReport& report, ReportFormat format);
// One markdown row per report under a single header.
std::string render_markdown_table(std::span<const DetectionReport> reports);

nlohmann::json to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& j);

}  // namespace pg
