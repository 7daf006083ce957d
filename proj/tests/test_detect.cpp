#include <cmath>
#include <limits>
#include <random>

#include "core/detect.hpp"
#include "core/error.hpp"
#include "core/sketch.hpp"
#include "doctest.h"

using namespace pg;

namespace {

std::vector<ScoredSample> scored(Split split, std::vector<double> losses) {
    std::vector<ScoredSample> out;
    for (std::size_t i = 0; i < losses.size(); ++i)
        out.push_back({std::string(to_string(split)) + "_" + std::to_string(i), split, {"", {losses[i]}, losses[i]}});
    return out;
}

Threshold threshold_at(double tau) {
    Threshold t;
    t.tau = tau;
    t.n_samples = 1;
    t.config_fingerprint = "fp";
    return t;
}

// Counts that reproduce the first Table-1 row exactly.
DetectionReport table_row() {
    DetectionReport r;
    r.run = {false, false, 0.75, 1000};
    r.tau = 0.01;
    r.config_fingerprint = "fp";
    r.splits[0] = SplitResult{9556, 10000};
    r.splits[1] = SplitResult{7055, 10000};
    r.splits[2] = SplitResult{6735, 10000};
    r.splits[3] = SplitResult{6142, 10000};
    r.verdicts.push_back({"train_0", Split::Train, 0.005, 0.01, true});
    return r;
}

}  // namespace

TEST_SUITE("detect") {

TEST_CASE("boundary rule") {
    const double tau = 0.0123;
    CHECK(detect(tau, tau));
    CHECK(detect(0.0, tau));
    CHECK_FALSE(detect(tau + 1e-12, tau));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (auto [l, t] : {std::pair{nan, tau}, std::pair{tau, nan}, std::pair{std::numeric_limits<double>::infinity(), tau}}) {
        try {
            detect(l, t);
            FAIL("expected a contract error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Contract);
        }
    }
}

TEST_CASE("report rates and verdicts") {
    std::vector<ScoredSample> all;
    for (auto [split, losses] : {std::pair{Split::Train, std::vector<double>{0.1, 0.2, 0.3}},
                                 std::pair{Split::Mod1, std::vector<double>{0.2, 0.5}},
                                 std::pair{Split::Mod2, std::vector<double>{0.6, 0.7}},
                                 std::pair{Split::Novel, std::vector<double>{0.1, 0.4, 0.8, 0.9}}}) {
        const auto s = scored(split, losses);
        all.insert(all.end(), s.begin(), s.end());
    }
    const auto r = build_report(all, threshold_at(0.2), {true, false, 0.5, 300});
    CHECK(r.detection_rate(Split::Train) == doctest::Approx(200.0 / 3.0));
    CHECK(*r.detection_rate(Split::Mod1) == 50.0);
    CHECK(*r.detection_rate(Split::Mod2) == 0.0);
    CHECK(*r.detection_rate(Split::Novel) == 25.0);
    CHECK(*r.nov_pass_rate() == 75.0);
    CHECK(*r.nov_pass_rate() + *r.detection_rate(Split::Novel) == 100.0);
    REQUIRE(r.verdicts.size() == all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        CHECK(r.verdicts[i].id == all[i].id);
        CHECK(r.verdicts[i].parroted == (all[i].score.aggregate <= 0.2));
    }
}

TEST_CASE("complement identity holds for every novel count") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> losses(1 + rng() % 97);
        for (auto& l : losses) l = u(rng);
        const auto r = build_report(scored(Split::Novel, losses), threshold_at(u(rng)), {});
        const double det = *r.detection_rate(Split::Novel), pass = *r.nov_pass_rate();
        CHECK(det + pass == 100.0);
        CHECK((det >= 0.0 && det <= 100.0));
        CHECK(!r.detection_rate(Split::Train).has_value());
    }
}

TEST_CASE("identical losses give an all-or-nothing rate") {
    const auto s = scored(Split::Mod2, std::vector<double>(7, 0.25));
    CHECK(*build_report(s, threshold_at(0.25), {}).detection_rate(Split::Mod2) == 100.0);
    CHECK(*build_report(s, threshold_at(0.2499), {}).detection_rate(Split::Mod2) == 0.0);
}

TEST_CASE("markdown row follows the table column order") {
    const auto md = render_report(table_row(), ReportFormat::Markdown);
    CHECK(md.find("| WD | AUG | p_mask (%) | Epochs | D_train (%) | D_mod1 (%) | D_mod2 (%) | D_nov pass (%) |") == 0);
    CHECK(md.find("| No | No | 75 | 1K | 95.56 | 70.55 | 67.35 | 38.58 |\n") != std::string::npos);

    auto other = table_row();
    other.run = {true, true, 0.85, 10000};
    other.splits[1].reset();
    const std::vector<DetectionReport> rows = {table_row(), other};
    const auto table = render_markdown_table(rows);
    CHECK(table.find("| Yes | Yes | 85 | 10K | 95.56 | - | 67.35 | 38.58 |\n") != std::string::npos);

    const auto csv = render_report(table_row(), ReportFormat::Csv);
    CHECK(csv.find("false,false,0.75,1000,95.56,70.55,67.35,38.58,0.01,fp\n") != std::string::npos);
}

TEST_CASE("json round trip") {
    const auto r = table_row();
    const auto parsed = report_from_json(nlohmann::json::parse(render_report(r, ReportFormat::Json)));
    CHECK(parsed == r);
    CHECK_THROWS_AS(report_from_json(nlohmann::json::parse("{\"run\": {}}")), Error);
    CHECK(parse_report_format("md") == ReportFormat::Markdown);
    CHECK_THROWS_AS(parse_report_format("xml"), Error);
}

TEST_CASE("empty verdict table is rejected before rendering") {
    auto r = table_row();
    r.verdicts.clear();
    for (auto f : {ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown}) {
        try {
            render_report(r, f);
            FAIL("expected a configuration error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Config);
        }
    }
}

TEST_CASE("evaluate enforces compatibility and non-empty splits") {
    const MAEParams p = init_params(MAEConfig::desk(), 1);
    SplitSamples data;
    for (std::size_t i = 0; i < 3; ++i) data[Split::Train].push_back({"train_" + std::to_string(i), i, rasterize(sample_sketch(i))});
    ScoringOptions so;
    so.repeats = 2;
    Threshold t = threshold_at(0.1);
    t.repeats = 2;

    try {
        evaluate(p, t, "other", data, so, 0, {});
        FAIL("expected an incompatibility error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Incompatible);
    }
    SplitSamples empty = data;
    empty[Split::Novel] = {};
    try {
        evaluate(p, t, "fp", empty, so, 0, {});
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }

    const auto r = evaluate(p, t, "fp", data, so, 0, {});
    CHECK(r.verdicts.size() == 3);
    for (const auto& v : r.verdicts) CHECK(v.parroted == (v.loss <= r.tau));

    // Calibrated on the very scores being evaluated: at least one sample sits at or below the mean.
    std::vector<double> losses;
    for (const auto& v : r.verdicts) losses.push_back(v.loss);
    Threshold self = calibrate_tau(losses, "fp");
    self.repeats = 2;
    CHECK(evaluate(p, self, "fp", data, so, 0, {}).splits[0]->flagged >= 1);
}

TEST_CASE("scoring seeds follow the source sketch") {
    CHECK(scoring_seed(0, 4) == scoring_seed(0, 4));
    CHECK(scoring_seed(0, 4) != scoring_seed(0, 5));
    CHECK(scoring_seed(1, 4) != scoring_seed(0, 4));
}

}
