#include <cmath>
#include <set>

#include "core/error.hpp"
#include "core/image.hpp"
#include "core/sketch.hpp"
#include "doctest.h"

using namespace pg;

namespace {

std::size_t dark_count(const RasterImage& img) {
    std::size_t n = 0;
    for (double v : img.pixels) n += v < 0.999 ? 1 : 0;
    return n;
}

}  // namespace

TEST_SUITE("sketch") {

TEST_CASE("sample_sketch is deterministic and honours complexity") {
    CHECK(sample_sketch(42) == sample_sketch(42));
    CHECK_FALSE(sample_sketch(42) == sample_sketch(43));
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CHECK(sample_sketch(seed, {1, 1}).entities.size() == 1);
        const auto s = sample_sketch(seed, {3, 7});
        CHECK(s.entities.size() >= 3);
        CHECK(s.entities.size() <= 7);
        CHECK(max_link_gap(s) <= kCoincidenceTolerance);
        CHECK(s.bounds().width() > 0.0);
        CHECK(s.bounds().height() > 0.0);
    }
    CHECK_THROWS_AS(sample_sketch(1, {0, 2}), Error);
    CHECK_THROWS_AS(sample_sketch(1, {4, 2}), Error);
}

TEST_CASE("perturbation magnitudes on a 100-unit sketch") {
    Sketch s;
    s.entities = {Entity::line({0, 0}, 100, 0), Entity::line({100, 0}, 50, 90), Entity::arc({50, 50}, 20, 10, 90)};
    s.links = {{0, End::End, 1, End::Start}};
    s = resolve_constraints(s);
    REQUIRE(s.bounds().max_side() == doctest::Approx(100.0));

    for (auto level : {PerturbationLevel::Mod1, PerturbationLevel::Mod2}) {
        const double dl = level == PerturbationLevel::Mod1 ? 5.0 : 20.0;
        const double da = level == PerturbationLevel::Mod1 ? 1.0 : 4.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const Sketch p = perturb(s, level, seed);
            CHECK(p.entities.size() == s.entities.size());
            for (std::size_t i = 0; i < s.entities.size(); ++i) CHECK(p.entities[i].kind == s.entities[i].kind);
            for (const auto& ref : free_parameters(s)) {
                const double delta = std::abs(get_param(p, ref) - get_param(s, ref));
                CHECK(std::abs(delta - (ref.kind == ParamKind::Length ? dl : da)) < 1e-9);
            }
            CHECK(max_link_gap(p) <= kCoincidenceTolerance);
        }
    }
}

TEST_CASE("sketch without angle parameters perturbs lengths only") {
    Sketch s;
    s.entities = {Entity::circle({10, 10}, 5), Entity::circle({30, 20}, 8)};
    for (const auto& p : free_parameters(s)) CHECK(p.kind == ParamKind::Length);
    const Sketch p = perturb(s, PerturbationLevel::Mod2, 3);
    const double d = s.bounds().max_side() / 5.0;
    CHECK(std::abs(std::abs(p.entities[0].size - 5.0) - d) < 1e-9);
    CHECK(std::abs(std::abs(p.entities[1].size - 8.0) - d) < 1e-9);
}

TEST_CASE("a decrement that would zero a length becomes an increment") {
    Sketch s;
    s.entities = {Entity::circle({0, 0}, 1.0), Entity::line({0, 0}, 100, 0)};
    for (std::uint64_t seed = 0; seed < 16; ++seed) {
        const Sketch p = perturb(s, PerturbationLevel::Mod2, seed);
        CHECK(p.entities[0].size > 0.0);
        CHECK(std::abs(p.entities[0].size - 1.0) == doctest::Approx(s.bounds().max_side() / 5.0));
    }
}

TEST_CASE("perturbing a degenerate sketch fails") {
    Sketch s;
    s.entities = {Entity::line({0, 0}, 10, 0)};
    try {
        perturb(s, PerturbationLevel::Mod1, 0);
        FAIL("expected degenerate input");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateInput);
    }
}

TEST_CASE("resolve_constraints examples") {
    Sketch free;
    free.entities = {Entity::line({0, 0}, 10, 0), Entity::circle({5, 5}, 2)};
    CHECK(resolve_constraints(free) == free);

    Sketch chain;
    chain.entities = {Entity::line({0, 0}, 10, 0), Entity::line({10, 0}, 5, 90)};
    chain.links = {{0, End::End, 1, End::Start}};
    chain.entities[0].size = 13.0;
    const Sketch r = resolve_constraints(chain);
    const Vec2 expected{13.0, 0.0};
    CHECK(distance(endpoint(r.entities[1], End::Start), expected) < 1e-9);
    CHECK(r.entities[1].size == 5.0);
    CHECK(r.entities[1].angle_deg == 90.0);
}

TEST_CASE("closed triangle stays closed after perturbation") {
    Sketch t;
    t.entities = {Entity::line({0, 0}, 30, 0), Entity::line({30, 0}, 30, 120), Entity::line({15, 25.98}, 30, 240)};
    t.links = {{0, End::End, 1, End::Start}, {1, End::End, 2, End::Start}, {0, End::Start, 2, End::End}};
    t = resolve_constraints(t);
    CHECK(max_link_gap(t) <= kCoincidenceTolerance);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        for (auto level : {PerturbationLevel::Mod1, PerturbationLevel::Mod2}) {
            try {
                const Sketch p = perturb(t, level, seed);
                CHECK(max_link_gap(p) <= kCoincidenceTolerance);
            } catch (const Error& e) {
                CHECK(e.kind() == ErrorKind::UnsatisfiableConstraint);
            }
        }
    }
}

TEST_CASE("over-constrained links are reported as unsatisfiable") {
    // Only lines can be re-derived between two pinned endpoints.
    Sketch s;
    s.entities = {Entity::line({0, 0}, 10, 0), Entity::line({0, 20}, 10, 0), Entity::arc({50, 50}, 3, 0, 90)};
    s.links = {{0, End::End, 2, End::Start}, {1, End::End, 2, End::End}};
    try {
        resolve_constraints(s);
        FAIL("expected an unsatisfiable-constraint error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::UnsatisfiableConstraint);
    }
}

TEST_CASE("closed polygons in generated sketches survive perturbation") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Sketch s = sample_sketch(seed);
        for (auto level : {PerturbationLevel::Mod1, PerturbationLevel::Mod2})
            CHECK(max_link_gap(perturb(s, level, seed + 1000)) <= kCoincidenceTolerance);
    }
}

TEST_CASE("rasterize: border stays white and output is deterministic") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Sketch s = sample_sketch(seed);
        for (std::size_t size : {16u, 56u}) {
            const RasterImage img = rasterize(s, {size, size, 1.5});
            CHECK(img == rasterize(s, {size, size, 1.5}));
            for (std::size_t i = 0; i < size; ++i) {
                CHECK(img.at(i, 0) == 1.0);
                CHECK(img.at(i, size - 1) == 1.0);
                CHECK(img.at(0, i) == 1.0);
                CHECK(img.at(size - 1, i) == 1.0);
            }
            for (double v : img.pixels) CHECK((v >= 0.0 && v <= 1.0));
            CHECK(dark_count(img) > 0);
        }
    }
}

TEST_CASE("rasterize: a horizontal line is one contiguous run") {
    Sketch one;
    one.entities = {Entity::line({0, 0}, 1, 0)};
    const RasterImage img = rasterize(one, {56, 56, 1.5});
    // Darkest row: the run of pixels darker than mid-grey must be contiguous.
    std::size_t best_row = 0;
    double best = 1e9;
    for (std::size_t y = 0; y < 56; ++y) {
        double total = 0.0;
        for (std::size_t x = 0; x < 56; ++x) total += img.at(x, y);
        if (total < best) best = total, best_row = y;
    }
    int runs = 0;
    bool inside = false;
    std::size_t length = 0;
    for (std::size_t x = 0; x < 56; ++x) {
        const bool dark = img.at(x, best_row) < 0.5;
        if (dark && !inside) ++runs;
        length += dark ? 1 : 0;
        inside = dark;
    }
    CHECK(runs == 1);
    CHECK(length > 40);
    for (std::size_t y = 0; y < 56; ++y)
        if (y + 1 < best_row || y > best_row + 1)
            for (std::size_t x = 0; x < 56; ++x) CHECK(img.at(x, y) == 1.0);
}

TEST_CASE("rasterize rejects tiny canvases and degenerate sketches") {
    const Sketch s = sample_sketch(1);
    try {
        rasterize(s, {15, 56, 1.5});
        FAIL("expected a configuration error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    Sketch point;
    point.entities = {Entity::circle({1, 1}, 0.0)};
    CHECK_THROWS_AS(rasterize(point, {56, 56, 1.5}), Error);
}

TEST_CASE("seeds 0..999 give at least 99% pairwise-distinct rasterizations") {
    std::set<std::vector<double>> distinct;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) distinct.insert(quantize8(rasterize(sample_sketch(seed))).pixels);
    CHECK(distinct.size() >= 990);
}

}
