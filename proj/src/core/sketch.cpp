#include "core/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace pg {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Vec2 polar(Vec2 origin, double r, double deg) {
    return {origin.x + r * std::cos(deg * kDegToRad), origin.y + r * std::sin(deg * kDegToRad)};
}

double normalize_deg(double deg) {
    double d = std::fmod(deg, 360.0);
    return d < 0.0 ? d + 360.0 : d;
}

void translate(Entity& e, Vec2 from, Vec2 to) {
    e.anchor.x += to.x - from.x;
    e.anchor.y += to.y - from.y;
}

void include(BoundingBox& b, Vec2 p, bool& first) {
    if (first) {
        b = {p.x, p.y, p.x, p.y};
        first = false;
        return;
    }
    b.min_x = std::min(b.min_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_x = std::max(b.max_x, p.x);
    b.max_y = std::max(b.max_y, p.y);
}

bool has_endpoints(const Entity& e) { return e.kind != EntityKind::Circle; }

// Which endpoints of each entity are pinned to an earlier entity.
struct Pins {
    bool start = false;
    bool end = false;
};

std::vector<Pins> pinned_ends(const Sketch& s) {
    std::vector<Pins> pins(s.entities.size());
    for (const auto& l : s.links) {
        if (l.later >= pins.size()) continue;
        (l.later_end == End::Start ? pins[l.later].start : pins[l.later].end) = true;
    }
    return pins;
}

}  // namespace

double distance(Vec2 a, Vec2 b) noexcept { return std::hypot(a.x - b.x, a.y - b.y); }

Entity Entity::line(Vec2 start, double length, double angle_deg) {
    return {EntityKind::Line, start, length, angle_deg, 0.0};
}

Entity Entity::arc(Vec2 center, double radius, double start_deg, double sweep_deg) {
    return {EntityKind::Arc, center, radius, start_deg, sweep_deg};
}

Entity Entity::circle(Vec2 center, double radius) { return {EntityKind::Circle, center, radius, 0.0, 0.0}; }

Vec2 endpoint(const Entity& e, End which) {
    switch (e.kind) {
        case EntityKind::Line:
            return which == End::Start ? e.anchor : polar(e.anchor, e.size, e.angle_deg);
        case EntityKind::Arc:
            return polar(e.anchor, e.size, which == End::Start ? e.angle_deg : e.angle_deg + e.sweep_deg);
        case EntityKind::Circle:
            break;
    }
    fail(ErrorKind::Contract, "endpoint: circles have no endpoints");
}

BoundingBox Sketch::bounds() const {
    BoundingBox b;
    bool first = true;
    for (const auto& e : entities) {
        switch (e.kind) {
            case EntityKind::Line:
                include(b, endpoint(e, End::Start), first);
                include(b, endpoint(e, End::End), first);
                break;
            case EntityKind::Circle:
                include(b, {e.anchor.x - e.size, e.anchor.y - e.size}, first);
                include(b, {e.anchor.x + e.size, e.anchor.y + e.size}, first);
                break;
            case EntityKind::Arc: {
                include(b, endpoint(e, End::Start), first);
                include(b, endpoint(e, End::End), first);
                const double start = normalize_deg(e.angle_deg);
                for (double axis : {0.0, 90.0, 180.0, 270.0}) {
                    if (normalize_deg(axis - start) <= e.sweep_deg) include(b, polar(e.anchor, e.size, axis), first);
                }
                break;
            }
        }
    }
    return b;
}

bool operator==(const Vec2& a, const Vec2& b) noexcept { return a.x == b.x && a.y == b.y; }

bool operator==(const Entity& a, const Entity& b) noexcept {
    return a.kind == b.kind && a.anchor == b.anchor && a.size == b.size && a.angle_deg == b.angle_deg &&
           a.sweep_deg == b.sweep_deg;
}

bool operator==(const Link& a, const Link& b) noexcept {
    return a.earlier == b.earlier && a.earlier_end == b.earlier_end && a.later == b.later && a.later_end == b.later_end;
}

bool operator==(const Sketch& a, const Sketch& b) noexcept {
    return a.entities == b.entities && a.links == b.links && a.seed == b.seed;
}

std::vector<ParamRef> free_parameters(const Sketch& s) {
    const auto pins = pinned_ends(s);
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
        const auto& e = s.entities[i];
        switch (e.kind) {
            case EntityKind::Line:
                if (pins[i].start && pins[i].end) break;
                out.push_back({i, ParamKind::Length, 0});
                out.push_back({i, ParamKind::Angle, 0});
                break;
            case EntityKind::Arc:
                out.push_back({i, ParamKind::Length, 0});
                out.push_back({i, ParamKind::Angle, 0});
                out.push_back({i, ParamKind::Angle, 1});
                break;
            case EntityKind::Circle:
                out.push_back({i, ParamKind::Length, 0});
                break;
        }
    }
    return out;
}

double get_param(const Sketch& s, const ParamRef& p) {
    const auto& e = s.entities.at(p.entity);
    if (p.kind == ParamKind::Length) return e.size;
    return p.slot == 0 ? e.angle_deg : e.sweep_deg;
}

void set_param(Sketch& s, const ParamRef& p, double value) {
    auto& e = s.entities.at(p.entity);
    if (p.kind == ParamKind::Length) {
        e.size = value;
    } else if (p.slot == 0) {
        e.angle_deg = value;
    } else {
        e.sweep_deg = value;
    }
}

double max_link_gap(const Sketch& s) {
    double gap = 0.0;
    for (const auto& l : s.links)
        gap = std::max(gap, distance(endpoint(s.entities[l.earlier], l.earlier_end),
                                     endpoint(s.entities[l.later], l.later_end)));
    return gap;
}

Sketch resolve_constraints(Sketch s) {
    const std::size_t n = s.entities.size();
    for (const auto& l : s.links) {
        require(l.earlier < n && l.later < n, ErrorKind::Contract, "resolve_constraints: link references missing entity");
        require(has_endpoints(s.entities[l.earlier]) && has_endpoints(s.entities[l.later]), ErrorKind::Contract,
                "resolve_constraints: circles cannot be linked");
        require(l.earlier < l.later, ErrorKind::UnsatisfiableConstraint,
                "resolve_constraints: link does not point from an earlier to a later entity");
    }

    for (std::size_t j = 0; j < n; ++j) {
        std::vector<Vec2> start_targets, end_targets;
        for (const auto& l : s.links) {
            if (l.later != j) continue;
            const Vec2 target = endpoint(s.entities[l.earlier], l.earlier_end);
            (l.later_end == End::Start ? start_targets : end_targets).push_back(target);
        }
        if (start_targets.empty() && end_targets.empty()) continue;

        auto& e = s.entities[j];
        if (!start_targets.empty() && !end_targets.empty() && e.kind == EntityKind::Line) {
            const Vec2 a = start_targets.front(), b = end_targets.front();
            e.anchor = a;
            e.size = distance(a, b);
            if (e.size > 0.0) e.angle_deg = std::atan2(b.y - a.y, b.x - a.x) / kDegToRad;
        } else if (!start_targets.empty()) {
            translate(e, endpoint(e, End::Start), start_targets.front());
        } else {
            translate(e, endpoint(e, End::End), end_targets.front());
        }

        // Every remaining pin must now hold; chain propagation cannot satisfy it otherwise.
        for (const Vec2& t : start_targets)
            require(distance(endpoint(e, End::Start), t) <= kCoincidenceTolerance, ErrorKind::UnsatisfiableConstraint,
                    "resolve_constraints: entity " + std::to_string(j) + " start cannot meet all of its links");
        for (const Vec2& t : end_targets)
            require(distance(endpoint(e, End::End), t) <= kCoincidenceTolerance, ErrorKind::UnsatisfiableConstraint,
                    "resolve_constraints: entity " + std::to_string(j) + " end cannot meet all of its links");
    }
    return s;
}

Sketch sample_sketch(std::uint64_t seed, Complexity complexity) {
    require(complexity.min_entities >= 1 && complexity.min_entities <= complexity.max_entities, ErrorKind::Contract,
            "sample_sketch: need 1 <= min_entities <= max_entities");
    Rng rng(derive_seed(SeedStream::Sketch, {seed}));
    auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    for (;;) {
        Sketch s;
        s.seed = seed;
        const auto target = static_cast<std::size_t>(uniform_int(complexity.min_entities, complexity.max_entities));

        while (s.entities.size() < target) {
            const std::size_t remaining = target - s.entities.size();
            const double pick = uniform(0.0, 1.0);
            const Vec2 origin{uniform(0.0, 100.0), uniform(0.0, 100.0)};

            if (remaining >= 3 && pick < 0.25) {
                // Closed polygon; its last side is derived from the links.
                const int k = uniform_int(3, static_cast<int>(std::min<std::size_t>(5, remaining)));
                const double radius = uniform(15.0, 35.0);
                const double phase = uniform(0.0, 360.0);
                std::vector<Vec2> vertices;
                for (int v = 0; v < k; ++v)
                    vertices.push_back(polar(origin, radius * uniform(0.7, 1.0),
                                             phase + 360.0 * v / k + uniform(-15.0, 15.0)));
                const std::size_t first = s.entities.size();
                for (int v = 0; v < k; ++v) {
                    const Vec2 a = vertices[static_cast<std::size_t>(v)];
                    const Vec2 b = vertices[static_cast<std::size_t>((v + 1) % k)];
                    s.entities.push_back(Entity::line(a, distance(a, b), std::atan2(b.y - a.y, b.x - a.x) / kDegToRad));
                    if (v > 0) s.links.push_back({s.entities.size() - 2, End::End, s.entities.size() - 1, End::Start});
                }
                s.links.push_back({first, End::Start, s.entities.size() - 1, End::End});
            } else if (remaining >= 2 && pick < 0.6) {
                // Open chain of lines and arcs.
                const int k = uniform_int(2, static_cast<int>(std::min<std::size_t>(4, remaining)));
                double heading = uniform(0.0, 360.0);
                for (int v = 0; v < k; ++v) {
                    if (uniform(0.0, 1.0) < 0.7) {
                        s.entities.push_back(Entity::line(origin, uniform(15.0, 45.0), heading));
                    } else {
                        s.entities.push_back(Entity::arc(origin, uniform(8.0, 25.0), uniform(0.0, 360.0),
                                                         uniform(60.0, 240.0)));
                    }
                    if (v > 0) s.links.push_back({s.entities.size() - 2, End::End, s.entities.size() - 1, End::Start});
                    heading += uniform(-120.0, 120.0);
                }
            } else if (pick < 0.75) {
                s.entities.push_back(Entity::circle(origin, uniform(6.0, 25.0)));
            } else if (pick < 0.9) {
                s.entities.push_back(Entity::line(origin, uniform(15.0, 60.0), uniform(0.0, 360.0)));
            } else {
                s.entities.push_back(Entity::arc(origin, uniform(8.0, 30.0), uniform(0.0, 360.0), uniform(60.0, 300.0)));
            }
        }

        s = resolve_constraints(std::move(s));
        const auto box = s.bounds();
        if (box.width() > 0.0 && box.height() > 0.0) return s;
    }
}

const char* to_string(PerturbationLevel level) noexcept { return level == PerturbationLevel::Mod1 ? "mod1" : "mod2"; }

Sketch perturb(const Sketch& s, PerturbationLevel level, std::uint64_t seed) {
    const auto box = s.bounds();
    require(!s.entities.empty() && box.width() > 0.0 && box.height() > 0.0, ErrorKind::DegenerateInput,
            "perturb: sketch bounding box has zero area");
    const auto spec = perturbation_spec(level);
    const double length_delta = spec.length_fraction * box.max_side();

    Rng rng(derive_seed(SeedStream::Perturb, {seed, static_cast<std::uint64_t>(level)}));
    std::bernoulli_distribution coin(0.5);

    Sketch out = s;
    for (const auto& p : free_parameters(s)) {
        const bool up = coin(rng);
        const double old = get_param(s, p);
        if (p.kind == ParamKind::Length) {
            const double lowered = old - length_delta;
            set_param(out, p, (up || lowered <= 0.0) ? old + length_delta : lowered);
        } else {
            set_param(out, p, up ? old + spec.angle_deg : old - spec.angle_deg);
        }
    }
    return resolve_constraints(std::move(out));
}

}  // namespace pg
