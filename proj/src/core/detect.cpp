#include "core/detect.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace pg {

namespace {

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string rate_cell(const std::optional<double>& r) { return r ? fixed2(*r) : "-"; }

std::string percent_cell(double p_mask) {
    const double pct = p_mask * 100.0;
    char buf[32];
    if (std::abs(pct - std::round(pct)) < 1e-9)
        std::snprintf(buf, sizeof buf, "%.0f", pct);
    else
        std::snprintf(buf, sizeof buf, "%.2f", pct);
    return buf;
}

std::string epochs_cell(std::size_t epochs) {
    if (epochs >= 1000 && epochs % 1000 == 0) return std::to_string(epochs / 1000) + "K";
    return std::to_string(epochs);
}

void require_renderable(const DetectionReport& r) {
    require(!r.verdicts.empty(), ErrorKind::Config, "report: the verdict table is empty");
}

const char* kMarkdownHeader =
    "| WD | AUG | p_mask (%) | Epochs | D_train (%) | D_mod1 (%) | D_mod2 (%) | D_nov pass (%) |\n"
    "|:--:|:---:|:----------:|:------:|:-----------:|:----------:|:----------:|:--------------:|\n";

std::string markdown_row(const DetectionReport& r) {
    std::ostringstream os;
    os << "| " << (r.run.weight_decay ? "Yes" : "No") << " | " << (r.run.augmentation ? "Yes" : "No") << " | "
       << percent_cell(r.run.p_mask) << " | " << epochs_cell(r.run.epochs) << " | "
       << rate_cell(r.detection_rate(Split::Train)) << " | " << rate_cell(r.detection_rate(Split::Mod1)) << " | "
       << rate_cell(r.detection_rate(Split::Mod2)) << " | " << rate_cell(r.nov_pass_rate()) << " |\n";
    return os.str();
}

}  // namespace

bool detect(double loss, double tau) {
    require(std::isfinite(loss) && std::isfinite(tau), ErrorKind::Contract, "detect: loss and tau must be finite");
    return loss <= tau;
}

std::optional<double> DetectionReport::detection_rate(Split s) const {
    const auto& r = splits[static_cast<std::size_t>(s)];
    if (!r) return std::nullopt;
    return r->rate();
}

std::optional<double> DetectionReport::nov_pass_rate() const {
    const auto& r = splits[static_cast<std::size_t>(Split::Novel)];
    if (!r) return std::nullopt;
    // Computed from counts so that pass + detection is exactly 100.
    return 100.0 - r->rate();
}

std::uint64_t scoring_seed(std::uint64_t seed_base, std::size_t source_index) {
    return derive_seed({seed_base, source_index});
}

std::vector<ScoredSample> score_split(const MAEParams& params, Split split, std::span<const Sample> samples,
                                      const ScoringOptions& options, std::uint64_t seed_base) {
    std::vector<ScoredSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back({s.id, split,
                       score_sample(params, s.image, params.config.p_mask, options,
                                    scoring_seed(seed_base, s.source_index), s.id)});
    }
    return out;
}

DetectionReport build_report(std::span<const ScoredSample> scored, const Threshold& threshold, const RunSummary& run) {
    DetectionReport r;
    r.run = run;
    r.config_fingerprint = threshold.config_fingerprint;
    r.tau = threshold.tau;
    for (const auto& s : scored) {
        const bool flagged = detect(s.score.aggregate, threshold.tau);
        r.verdicts.push_back({s.id, s.split, s.score.aggregate, threshold.tau, flagged});
        auto& slot = r.splits[static_cast<std::size_t>(s.split)];
        if (!slot) slot = SplitResult{};
        slot->total += 1;
        slot->flagged += flagged ? 1 : 0;
    }
    return r;
}

DetectionReport evaluate(const MAEParams& params, const Threshold& threshold, const std::string& config_fingerprint,
                         const SplitSamples& datasets, const ScoringOptions& options, std::uint64_t seed_base,
                         const RunSummary& run) {
    require(threshold.config_fingerprint == config_fingerprint, ErrorKind::Incompatible,
            "threshold fingerprint " + threshold.config_fingerprint + " does not match config fingerprint " +
                config_fingerprint);
    require(threshold.repeats == options.repeats && threshold.white_threshold == options.white_threshold,
            ErrorKind::Incompatible, "threshold was calibrated with different scoring options");
    require(!datasets.empty(), ErrorKind::Config, "evaluate: no splits selected");
    for (const auto& [split, samples] : datasets)
        require(!samples.empty(), ErrorKind::Config, std::string("evaluate: split '") + to_string(split) + "' is empty");

    std::vector<ScoredSample> scored;
    for (const auto& [split, samples] : datasets) {
        auto part = score_split(params, split, samples, options, seed_base);
        scored.insert(scored.end(), part.begin(), part.end());
    }
    return build_report(scored, threshold, run);
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "csv") return ReportFormat::Csv;
    if (name == "markdown" || name == "md") return ReportFormat::Markdown;
    fail(ErrorKind::Config, "unknown report format '" + name + "'");
}

nlohmann::json to_json(const DetectionReport& r) {
    nlohmann::json splits = nlohmann::json::object();
    for (Split s : kAllSplits) {
        const auto& res = r.splits[static_cast<std::size_t>(s)];
        if (!res) continue;
        splits[to_string(s)] = {{"flagged", res->flagged}, {"total", res->total}, {"detection_rate", res->rate()}};
    }
    nlohmann::json verdicts = nlohmann::json::array();
    for (const auto& v : r.verdicts)
        verdicts.push_back(
            {{"id", v.id}, {"split", to_string(v.split)}, {"loss", v.loss}, {"tau", v.tau}, {"parroted", v.parroted}});
    nlohmann::json j = {{"run",
                         {{"weight_decay", r.run.weight_decay},
                          {"augmentation", r.run.augmentation},
                          {"p_mask", r.run.p_mask},
                          {"epochs", r.run.epochs}}},
                        {"config_fingerprint", r.config_fingerprint},
                        {"tau", r.tau},
                        {"splits", splits},
                        {"verdicts", verdicts}};
    const auto pass = r.nov_pass_rate();
    j["nov_pass_rate"] = pass ? nlohmann::json(*pass) : nlohmann::json(nullptr);
    return j;
}

DetectionReport report_from_json(const nlohmann::json& j) {
    DetectionReport r;
    try {
        const auto& run = j.at("run");
        r.run.weight_decay = run.at("weight_decay").get<bool>();
        r.run.augmentation = run.at("augmentation").get<bool>();
        r.run.p_mask = run.at("p_mask").get<double>();
        r.run.epochs = run.at("epochs").get<std::size_t>();
        r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        r.tau = j.at("tau").get<double>();
        for (const auto& [name, res] : j.at("splits").items())
            r.splits[static_cast<std::size_t>(parse_split(name))] =
                SplitResult{res.at("flagged").get<std::size_t>(), res.at("total").get<std::size_t>()};
        for (const auto& v : j.at("verdicts"))
            r.verdicts.push_back({v.at("id").get<std::string>(), parse_split(v.at("split").get<std::string>()),
                                  v.at("loss").get<double>(), v.at("tau").get<double>(), v.at("parroted").get<bool>()});
    } catch (const nlohmann::json::exception& ex) {
        fail(ErrorKind::Config, std::string("malformed report document: ") + ex.what());
    }
    return r;
}

std::string render_report(const DetectionReport& report, ReportFormat format) {
    require_renderable(report);
    switch (format) {
        case ReportFormat::Json:
            return to_json(report).dump(2) + "\n";
        case ReportFormat::Csv: {
            std::ostringstream os;
            os << "weight_decay,augmentation,p_mask,epochs,train_rate,mod1_rate,mod2_rate,nov_pass_rate,tau,"
                  "config_fingerprint\n";
            auto cell = [](const std::optional<double>& v) { return v ? fixed2(*v) : std::string(); };
            char tau[40];
            std::snprintf(tau, sizeof tau, "%.17g", report.tau);
            os << (report.run.weight_decay ? "true" : "false") << ',' << (report.run.augmentation ? "true" : "false")
               << ',' << report.run.p_mask << ',' << report.run.epochs << ',' << cell(report.detection_rate(Split::Train))
               << ',' << cell(report.detection_rate(Split::Mod1)) << ',' << cell(report.detection_rate(Split::Mod2))
               << ',' << cell(report.nov_pass_rate()) << ',' << tau << ',' << report.config_fingerprint << '\n';
            return os.str();
        }
        case ReportFormat::Markdown:
            return render_markdown_table(std::span<const DetectionReport>(&report, 1));
    }
    fail(ErrorKind::Contract, "render_report: unknown format");
}

std::string render_markdown_table(std::span<const DetectionReport> reports) {
    require(!reports.empty(), ErrorKind::Config, "report: no rows to render");
    std::string out = kMarkdownHeader;
    for (const auto& r : reports) {
        require_renderable(r);
        out += markdown_row(r);
    }
    return out;
}

}  // namespace pg
