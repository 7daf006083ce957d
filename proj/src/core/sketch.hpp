#pragma once

// Parametric 2-D sketches: lines, arcs and circles whose endpoints may be
// tied together by coincidence links.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

double distance(Vec2 a, Vec2 b) noexcept;

enum class EntityKind { Line, Arc, Circle };

// Line: anchor = start point, size = length, angle_deg = direction.
// Arc: anchor = center, size = radius, angle_deg = start angle, sweep_deg = CCW sweep.
// Circle: anchor = center, size = radius.
struct Entity {
    EntityKind kind = EntityKind::Line;
    Vec2 anchor;
    double size = 1.0;
    double angle_deg = 0.0;
    double sweep_deg = 0.0;

    static Entity line(Vec2 start, double length, double angle_deg);
    static Entity arc(Vec2 center, double radius, double start_deg, double sweep_deg);
    static Entity circle(Vec2 center, double radius);
};

enum class End { Start, End };

Vec2 endpoint(const Entity& e, End which);

// Endpoint `later_end` of entity `later` must coincide with endpoint
// `earlier_end` of entity `earlier`; earlier < later.
struct Link {
    std::size_t earlier = 0;
    End earlier_end = End::End;
    std::size_t later = 0;
    End later_end = End::Start;
};

struct BoundingBox {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
    double width() const noexcept { return max_x - min_x; }
    double height() const noexcept { return max_y - min_y; }
    double max_side() const noexcept { return width() > height() ? width() : height(); }
};

struct Sketch {
    std::vector<Entity> entities;
    std::vector<Link> links;
    std::uint64_t seed = 0;

    BoundingBox bounds() const;
};

bool operator==(const Vec2& a, const Vec2& b) noexcept;
bool operator==(const Entity& a, const Entity& b) noexcept;
bool operator==(const Link& a, const Link& b) noexcept;
bool operator==(const Sketch& a, const Sketch& b) noexcept;

enum class ParamKind { Length, Angle };

// A free (user-editable) parameter. Lines with both endpoints pinned are
// fully determined by the constraints and contribute no free parameters.
struct ParamRef {
    std::size_t entity = 0;
    ParamKind kind = ParamKind::Length;
    int slot = 0;  // 0: size / angle_deg, 1: sweep_deg
};

std::vector<ParamRef> free_parameters(const Sketch& s);
double get_param(const Sketch& s, const ParamRef& p);
void set_param(Sketch& s, const ParamRef& p, double value);

// Chain propagation in entity order. A later entity with one pinned endpoint
// is translated; a line with both endpoints pinned is re-derived between
// them. Anything else that leaves a link open is unsatisfiable.
Sketch resolve_constraints(Sketch s);
constexpr double kCoincidenceTolerance = 1e-9;
double max_link_gap(const Sketch& s);

struct Complexity {
    int min_entities = 3;
    int max_entities = 7;
};

Sketch sample_sketch(std::uint64_t seed, Complexity complexity = {});

enum class PerturbationLevel { Mod1, Mod2 };

struct PerturbationSpec {
    double length_fraction;
    double angle_deg;
};

constexpr PerturbationSpec perturbation_spec(PerturbationLevel level) noexcept {
    return level == PerturbationLevel::Mod1 ? PerturbationSpec{1.0 / 20.0, 1.0} : PerturbationSpec{1.0 / 5.0, 4.0};
}

const char* to_string(PerturbationLevel level) noexcept;

// Moves every free length by +/- fraction * max bounding-box side and every
// free angle by +/- angle_deg, then re-resolves the links. A decrement that
// would make a length non-positive is replaced by the increment.
Sketch perturb(const Sketch& s, PerturbationLevel level, std::uint64_t seed);

}  // namespace pg
