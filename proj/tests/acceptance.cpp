// Acceptance checks. One PASS/FAIL line per criterion.
//
//   acceptance [exact|trend|all] [--epochs N] [--keep DIR]
//
// "exact" covers the closed-form checks (1-5, 8, 9); "trend" trains the desk
// model on the 64-image toy set (6, 7) and takes tens of minutes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "core/config.hpp"
#include "core/detect.hpp"
#include "core/error.hpp"
#include "core/loss.hpp"
#include "core/mae.hpp"
#include "core/pipeline.hpp"
#include "core/sketch.hpp"
#include "core/tensor.hpp"

using namespace pg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%.1fs)%s%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs,
                o.detail.empty() ? "" : " - ", o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch_root;

fs::path scratch(const std::string& name) {
    const fs::path p = scratch_root / name;
    fs::remove_all(p);
    return p;
}

// ---- 1 ---------------------------------------------------------------------

double brute_force_loss(const RasterImage& x, const RasterImage& xh) {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < x.height; ++y)
        for (std::size_t c = 0; c < x.width; ++c) {
            if (!(x.at(c, y) < 0.999)) continue;
            const double d = x.at(c, y) - xh.at(c, y);
            total += d * d;
            ++n;
        }
    return total / static_cast<double>(n);
}

Outcome criterion_loss_oracle() {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    bool white_invariant = true;
    for (int t = 0; t < 100; ++t) {
        RasterImage x(56, 56), xh(56, 56);
        for (auto& v : x.pixels) v = u(rng) < 0.7 ? 1.0 : u(rng);
        x.pixels[rng() % x.pixels.size()] = 0.2;
        for (auto& v : xh.pixels) v = u(rng);
        const auto m = drawing_mask(x);
        const double loss = masked_mse(x, xh, m);
        worst = std::max(worst, std::abs(loss - brute_force_loss(x, xh)));
        RasterImage changed = xh;
        for (std::size_t i = 0; i < x.pixels.size(); ++i)
            if (x.pixels[i] >= 0.999) changed.pixels[i] = u(rng);
        white_invariant = white_invariant && masked_mse(x, changed, m) == loss;
    }
    return {worst <= 1e-10 && white_invariant,
            fmt("max |diff| %.3g, white-pixel invariance %s", worst, white_invariant ? "holds" : "broken")};
}

// ---- 2 ---------------------------------------------------------------------

Outcome criterion_tau_mean() {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> u(0.0, 0.5);
    double worst = 0.0;
    bool bounded = true;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> s(1 + rng() % 300);
        for (auto& v : s) v = u(rng);
        const double tau = calibrate_tau(s, "").tau;
        long double sum = 0.0L;
        for (double v : s) sum += v;
        const double oracle = static_cast<double>(sum / static_cast<long double>(s.size()));
        worst = std::max(worst, std::abs(tau - oracle));
        bounded = bounded && *std::min_element(s.begin(), s.end()) <= tau && tau <= *std::max_element(s.begin(), s.end());
    }
    return {worst <= 1e-12 && bounded, fmt("max |tau - mean| %.3g, min <= tau <= max %s", worst, bounded ? "always" : "violated")};
}

// ---- 3 ---------------------------------------------------------------------

Outcome criterion_boundary() {
    const double tau = 0.0421;
    const bool at = detect(tau, tau), above = detect(tau + 1e-12, tau);
    return {at && !above, fmt("detect(tau, tau)=%d, detect(tau+1e-12, tau)=%d", at, above)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome criterion_gradients() {
    const MAEConfig mc = MAEConfig::desk();
    const MAEParams params = init_params(mc, 7);
    const RasterImage x = rasterize(sample_sketch(3));
    const auto mask = sample_mask(mc.num_patches(), mc.p_mask, 5);
    const auto dmask = drawing_mask(x);
    const std::vector<double> w(dmask.drawing.begin(), dmask.drawing.end());
    const auto target = patchify_values(x.pixels, x.width, x.height, mc.patch_size);
    const auto weights = patchify_values(w, x.width, x.height, mc.patch_size);
    const std::vector<Tensor> patches = {patchify(x, mc.patch_size)};
    const std::vector<PatchMask> masks = {mask};
    auto loss = [&] { return masked_mse(forward_batch(params, patches, masks), target, weights); };

    auto named = params.named_parameters();
    for (auto& [_, t] : named) t.zero_grad();
    {
        Tape tape;
        TapeScope scope(tape);
        tape.backward(loss());
    }

    // Two entries from every tensor, so every layer kind is covered.
    std::mt19937_64 rng(404);
    const double h = 1e-4;
    double worst = 0.0;
    std::size_t checked = 0;
    std::string worst_name;
    for (auto& [name, t] : named) {
        for (int k = 0; k < 2; ++k) {
            const std::size_t i = rng() % t.numel();
            const double analytic = t.grad()[i];
            auto data = t.mutable_data();
            const double keep = data[i];
            data[i] = keep + h;
            const double up = loss().item();
            data[i] = keep - h;
            const double down = loss().item();
            data[i] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double err = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-7});
            if (err > worst) worst = err, worst_name = name;
            ++checked;
        }
    }
    return {checked >= 10 && worst <= 1e-3,
            fmt("%zu parameters, worst relative error %.3g (%s)", checked, worst, worst_name.c_str())};
}

// ---- 5 ---------------------------------------------------------------------

double angle_gap(double a, double b) {
    const double d = std::fmod(std::abs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

Outcome criterion_perturbation() {
    double worst = 0.0;
    std::size_t params_checked = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Sketch s = sample_sketch(10000 + seed);
        const double side = s.bounds().max_side();
        for (auto level : {PerturbationLevel::Mod1, PerturbationLevel::Mod2}) {
            const Sketch p = perturb(s, level, seed);
            const double dl = side / (level == PerturbationLevel::Mod1 ? 20.0 : 5.0);
            const double da = level == PerturbationLevel::Mod1 ? 1.0 : 4.0;
            for (const auto& ref : free_parameters(s)) {
                const double before = get_param(s, ref), after = get_param(p, ref);
                const double err = ref.kind == ParamKind::Length ? std::abs(std::abs(after - before) - dl)
                                                                 : std::abs(angle_gap(after, before) - da);
                worst = std::max(worst, err);
                ++params_checked;
            }
        }
    }
    return {worst <= 1e-9, fmt("%zu parameter deltas, worst error %.3g", params_checked, worst)};
}

// ---- 6, 7 ------------------------------------------------------------------

std::size_t trend_epochs = 2000;

struct TrendRun {
    std::vector<double> loss_curve;
    double mean[4] = {};
    double rate[4] = {};
    double nov_pass = 0.0;
};

TrendRun toy_run(const std::string& name, double p_mask, std::uint64_t seed) {
    RunConfig c = default_run_config();
    c.dataset.n_train = 64;
    c.dataset.n_novel = 64;
    apply_override(c, "model.p_mask", p_mask);
    c.train.epochs = trend_epochs;
    c.train.seed = seed;
    c.train.checkpoint_every = trend_epochs;
    c.output_dir = scratch(name).string();
    cmd_gen_data(c);
    TrendRun out;
    out.loss_curve = cmd_train(c).loss_curve;
    cmd_calibrate(c);
    const DetectionReport r = cmd_eval(c);

    std::size_t n[4] = {};
    for (const auto& v : r.verdicts) {
        out.mean[static_cast<int>(v.split)] += v.loss;
        ++n[static_cast<int>(v.split)];
    }
    for (int k = 0; k < 4; ++k) {
        out.mean[k] /= static_cast<double>(n[k]);
        out.rate[k] = *r.detection_rate(static_cast<Split>(k));
    }
    out.nov_pass = *r.nov_pass_rate();
    std::printf("  run %s: p_mask %.2f seed %llu, mean loss %.5f/%.5f/%.5f/%.5f, rates %.2f/%.2f/%.2f, nov pass %.2f\n",
                name.c_str(), p_mask, static_cast<unsigned long long>(seed), out.mean[0], out.mean[1], out.mean[2],
                out.mean[3], out.rate[0], out.rate[1], out.rate[2], out.nov_pass);
    std::fflush(stdout);
    return out;
}

// Largest ratio of a 50-epoch moving average of the training loss to the
// lowest earlier one.
double worst_moving_average_rise(const std::vector<double>& curve) {
    double best = std::numeric_limits<double>::infinity(), worst = 0.0;
    for (std::size_t i = 50; i <= curve.size(); ++i) {
        const double a = std::accumulate(curve.begin() + static_cast<std::ptrdiff_t>(i - 50),
                                         curve.begin() + static_cast<std::ptrdiff_t>(i), 0.0) / 50.0;
        if (std::isfinite(best)) worst = std::max(worst, a / best);
        best = std::min(best, a);
    }
    return worst;
}

void criterion_overfit_trend() {
    TrendRun r;
    bool ran = true;
    std::string err;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        r = toy_run("c6", 0.75, 0);
    } catch (const std::exception& e) {
        ran = false;
        err = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto line = [&](const char* part, bool ok, const std::string& detail) {
        if (!ok) ++failures;
        std::printf("%s criterion 6%s: %s (%.1fs)\n", ok ? "PASS" : "FAIL", part, detail.c_str(), secs);
    };
    if (!ran) {
        line("", false, "toy run failed: " + err);
        return;
    }
    line("a", r.mean[0] < r.mean[1] && r.mean[1] < r.mean[2] && r.mean[2] < r.mean[3],
         fmt("mean score train %.5f < mod1 %.5f < mod2 %.5f < novel %.5f", r.mean[0], r.mean[1], r.mean[2], r.mean[3]));
    line("b", r.rate[0] >= 90.0, fmt("train detection rate %.2f%% >= 90%%", r.rate[0]));
    line("c", r.rate[1] >= r.rate[2], fmt("mod1 rate %.2f%% >= mod2 rate %.2f%%", r.rate[1], r.rate[2]));
    line("d", r.nov_pass > 0.0, fmt("nov pass rate %.2f%% > 0", r.nov_pass));
    const double rise = worst_moving_average_rise(r.loss_curve);
    if (rise > 1.05) ++failures;
    std::printf("%s property: 50-epoch moving average of the training loss never exceeds its earlier minimum by more "
                "than 5%% - worst ratio %.4f\n",
                rise <= 1.05 ? "PASS" : "FAIL", rise);
    std::fflush(stdout);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome criterion_pmask_trend() {
    std::vector<double> mod1_50, mod1_85, pass_50, pass_85;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto a = toy_run("c7_050_s" + std::to_string(seed), 0.50, seed);
        const auto b = toy_run("c7_085_s" + std::to_string(seed), 0.85, seed);
        mod1_50.push_back(a.rate[1]);
        pass_50.push_back(a.nov_pass);
        mod1_85.push_back(b.rate[1]);
        pass_85.push_back(b.nov_pass);
    }
    const double m50 = median(mod1_50), m85 = median(mod1_85), p50 = median(pass_50), p85 = median(pass_85);
    return {m50 >= m85 && p50 <= p85,
            fmt("median mod1 rate %.2f%% (0.50) vs %.2f%% (0.85); median nov pass %.2f%% (0.50) vs %.2f%% (0.85)", m50,
                m85, p50, p85)};
}

// ---- 8 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome criterion_reproducible() {
    std::string docs[2];
    for (int k = 0; k < 2; ++k) {
        RunConfig c = default_run_config();
        c.dataset.n_train = 8;
        c.dataset.n_novel = 8;
        c.train.epochs = 10;
        c.train.batch_size = 4;
        c.train.checkpoint_every = 5;
        c.train.augmentation_enabled = true;
        c.train.weight_decay_enabled = true;
        c.output_dir = scratch("repro_" + std::to_string(k)).string();
        cmd_gen_data(c);
        cmd_train(c);
        cmd_calibrate(c);
        cmd_eval(c);
        docs[k] = slurp(RunPaths(c.output_dir).report("json"));
    }
    const bool same = !docs[0].empty() && docs[0] == docs[1];
    return {same, fmt("report.json %zu bytes, %s", docs[0].size(), same ? "bit-identical" : "differs")};
}

// ---- 9 ---------------------------------------------------------------------

Outcome criterion_mask_count() {
    std::size_t wrong = 0;
    for (std::size_t n = 1; n <= 256; ++n)
        for (double p : {0.0, 0.5, 0.75, 0.85, 1.0}) {
            const auto m = sample_mask(n, p, n);
            if (m.masked_count() != static_cast<std::size_t>(std::llround(p * static_cast<double>(n)))) ++wrong;
        }

    const MAEConfig mc = MAEConfig::desk();
    const MAEParams params = init_params(mc, 9);
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool invariant = true;
    for (double p : {0.5, 0.75, 0.85}) {
        RasterImage a(56, 56);
        for (auto& v : a.pixels) v = u(rng);
        const auto mask = sample_mask(mc.num_patches(), p, static_cast<std::uint64_t>(p * 100));
        RasterImage b = a;
        for (std::size_t patch = 0; patch < mc.num_patches(); ++patch) {
            if (!mask.masked[patch]) continue;
            const std::size_t px = (patch % mc.grid_w()) * mc.patch_size, py = (patch / mc.grid_w()) * mc.patch_size;
            for (std::size_t dy = 0; dy < mc.patch_size; ++dy)
                for (std::size_t dx = 0; dx < mc.patch_size; ++dx) b.at(px + dx, py + dy) = u(rng);
        }
        const Tensor ea = encode(params, a, mask), eb = encode(params, b, mask);
        invariant = invariant && std::equal(ea.data().begin(), ea.data().end(), eb.data().begin(), eb.data().end());
    }
    return {wrong == 0 && invariant,
            fmt("%zu wrong counts over 1280 cases, encoder invariance %s", wrong, invariant ? "holds" : "broken")};
}

}  // namespace

int main(int argc, char** argv) {
    std::string group = "all";
    fs::path keep;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--epochs" && i + 1 < argc)
            trend_epochs = std::stoul(argv[++i]);
        else if (a == "--keep" && i + 1 < argc)
            keep = argv[++i];
        else if (a == "exact" || a == "trend" || a == "all")
            group = a;
        else {
            std::fprintf(stderr, "usage: %s [exact|trend|all] [--epochs N] [--keep DIR]\n", argv[0]);
            return 2;
        }
    }
    scratch_root = keep.empty() ? fs::temp_directory_path() / ("pg_accept_" + std::to_string(::getpid())) : keep;
    fs::create_directories(scratch_root);

    if (group != "trend") {
        report(1, "masked MSE equals the per-pixel oracle", criterion_loss_oracle);
        report(2, "tau is the arithmetic mean of the calibration scores", criterion_tau_mean);
        report(3, "detection boundary is inclusive", criterion_boundary);
        report(4, "desk-model gradients match central differences", criterion_gradients);
        report(5, "perturbation deltas are exact", criterion_perturbation);
        report(8, "full pipeline reproduces report.json bit for bit", criterion_reproducible);
        report(9, "mask counts and encoder masking are exact", criterion_mask_count);
    }
    if (group != "exact") {
        std::printf("toy runs: 64 images, %zu epochs\n", trend_epochs);
        criterion_overfit_trend();
        report(7, "lower p_mask detects more mod1 and passes fewer novel samples", criterion_pmask_trend);
    }
    if (keep.empty()) fs::remove_all(scratch_root);
    std::printf("%d failing\n", failures);
    return failures == 0 ? 0 : 1;
}
