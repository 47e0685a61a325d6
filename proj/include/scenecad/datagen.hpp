#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "scenecad/align.hpp"
#include "scenecad/geom.hpp"
#include "scenecad/layout.hpp"
#include "scenecad/random.hpp"
#include "scenecad/relations.hpp"

namespace scenecad::datagen {

using geom::Aabb;
using geom::Obb;
using geom::Pose9DoF;
using geom::Rot3;
using geom::Vec3;
using geom::VoxelGrid;
using layout::LayoutGraph;

/// Knobs for the synthetic scene generator. Everything downstream is a pure
/// function of these values.
struct SceneSpec {
    std::uint64_t seed = 1;

    double room_min = 3.5, room_max = 6.0;      // floor extents, meters
    double height_min = 2.4, height_max = 3.2;  // room height, meters
    // 4 gives an axis-aligned box (4 walls); 6..8 an L-shaped room (8 wall
    // segments once split at the decomposition corners). Sampled counts of
    // 5 fall back to the box.
    int wall_min = 4, wall_max = 8;
    int object_min = 3, object_max = 6;
    std::vector<std::string> categories = {"cabinet", "chair", "display", "table"};

    double corner_jitter_sigma = 0.0;  // corner observation noise, meters
    double point_noise_sigma = 0.0;    // scan point noise, meters
    double dropout = 0.0;              // fraction of occupied cells removed

    double rest_fraction = 0.85;        // objects standing on the floor
    double wall_touch_fraction = 0.35;  // standing objects pushed to a wall

    double voxel_size = 0.05;
    double heatmap_sigma = 0.15;

    void validate() const {
        if (!(room_min > 0.0 && room_max >= room_min && height_min > 0.0 &&
              height_max >= height_min)) {
            throw InvalidInput("scene spec: bad room extents range");
        }
        if (wall_min < 4 || wall_max > 8 || wall_max < wall_min) {
            throw InvalidInput("scene spec: wall count range must lie in 4..8");
        }
        if (object_min < 0 || object_max < object_min) {
            throw InvalidInput("scene spec: bad object count range");
        }
        if (categories.empty() && object_max > 0) {
            throw InvalidInput("scene spec: empty category set");
        }
        if (corner_jitter_sigma < 0.0 || point_noise_sigma < 0.0) {
            throw InvalidInput("scene spec: noise sigmas must be >= 0");
        }
        if (!(dropout >= 0.0 && dropout < 1.0)) {
            throw InvalidInput("scene spec: dropout must be in [0,1)");
        }
        if (!(rest_fraction >= 0.0 && rest_fraction <= 1.0 && wall_touch_fraction >= 0.0 &&
              wall_touch_fraction <= 1.0)) {
            throw InvalidInput("scene spec: fractions must be in [0,1]");
        }
        if (!(voxel_size > 0.0 && heatmap_sigma > 0.0)) {
            throw InvalidInput("scene spec: voxel size and heatmap sigma must be positive");
        }
    }
};

struct PlacedObject {
    std::string category;
    std::string model_id;
    Pose9DoF pose;  // canonical [-0.5,0.5]^3 frame -> world
    Obb obb;
    align::CorrespondenceSet correspondences;  // canonical -> world (scan)
};

struct Scene {
    std::uint64_t seed = 0;
    double voxel_size = 0.05;
    double heatmap_sigma = 0.15;
    double corner_jitter_sigma = 0.0;
    double point_noise_sigma = 0.0;
    double dropout = 0.0;

    VoxelGrid occupancy;
    LayoutGraph gt_layout;
    std::vector<Vec3> corner_observations;  // jittered corners, heatmap seeds
    std::vector<PlacedObject> objects;
    std::vector<relations::Relation> gt_relations;  // support + angle bins

    std::vector<Obb> object_boxes() const {
        std::vector<Obb> out;
        out.reserve(objects.size());
        for (const PlacedObject& o : objects) out.push_back(o.obb);
        return out;
    }
};

// ---------------------------------------------------------------------------
// canonical CAD shapes
// ---------------------------------------------------------------------------

namespace shapes {

inline constexpr double kSampleStep = 0.022;  // canonical units

/// Grid-sample one axis-aligned rectangle. `axis` is the fixed dimension.
inline void append_rect(std::vector<Vec3>& pts, int axis, double value, const Vec3& lo,
                        const Vec3& hi, double step = kSampleStep) {
    const int u = (axis + 1) % 3, v = (axis + 2) % 3;
    const int nu = std::max(2, static_cast<int>(std::round((hi[u] - lo[u]) / step)) + 1);
    const int nv = std::max(2, static_cast<int>(std::round((hi[v] - lo[v]) / step)) + 1);
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            Vec3 p;
            p[axis] = value;
            p[u] = lo[u] + (hi[u] - lo[u]) * i / (nu - 1);
            p[v] = lo[v] + (hi[v] - lo[v]) * j / (nv - 1);
            pts.push_back(p);
        }
    }
}

/// All six faces of an axis-aligned box.
inline void append_box(std::vector<Vec3>& pts, const Vec3& lo, const Vec3& hi,
                       double step = kSampleStep) {
    for (int a = 0; a < 3; ++a) {
        append_rect(pts, a, lo[a], lo, hi, step);
        append_rect(pts, a, hi[a], lo, hi, step);
    }
}

/// Canonical surface sample of one model. Shapes live in [-0.5,0.5]^3 with
/// +x the front direction and +z up; real-world size comes from the pose
/// scale, so proportions here only encode shape identity for retrieval.
inline std::vector<Vec3> model_points(const std::string& category, int variant) {
    std::vector<Vec3> p;
    const Vec3 lo(-0.5, -0.5, -0.5), hi(0.5, 0.5, 0.5);
    if (category == "cabinet") {
        if (variant == 1) {
            // open front: face recessed to x = 0.2
            for (int a = 0; a < 3; ++a) {
                append_rect(p, a, lo[a], lo, hi);
                if (a != 0) append_rect(p, a, hi[a], lo, hi);
            }
            append_rect(p, 0, 0.2, lo, hi);
        } else {
            append_box(p, lo, hi);
            if (variant == 2) {  // two shelves
                append_rect(p, 2, -0.17, lo, hi);
                append_rect(p, 2, 0.17, lo, hi);
            }
        }
    } else if (category == "table") {
        const double top = variant == 1 ? 0.25 : 0.35;
        append_box(p, Vec3(-0.5, -0.5, top), hi);
        if (variant == 2) {  // pedestal base
            append_box(p, Vec3(-0.09, -0.09, -0.42), Vec3(0.09, 0.09, top));
            append_box(p, Vec3(-0.35, -0.35, -0.5), Vec3(0.35, 0.35, -0.42));
        } else {
            const double leg = variant == 1 ? 0.16 : 0.10;
            for (double sx : {-1.0, 1.0}) {
                for (double sy : {-1.0, 1.0}) {
                    const double cx = sx * (0.5 - leg / 2), cy = sy * (0.5 - leg / 2);
                    append_box(p, Vec3(cx - leg / 2, cy - leg / 2, -0.5),
                               Vec3(cx + leg / 2, cy + leg / 2, top));
                }
            }
        }
    } else if (category == "chair") {
        const double back = variant == 1 ? -0.42 : -0.38;  // backrest slab depth
        append_box(p, Vec3(-0.5, -0.5, -0.1), Vec3(0.5, 0.5, 0.0));  // seat
        append_box(p, Vec3(-0.5, -0.5, 0.0), Vec3(back, 0.5, 0.5));  // backrest (rear = -x)
        for (double sx : {-1.0, 1.0}) {
            for (double sy : {-1.0, 1.0}) {
                const double cx = sx * 0.44, cy = sy * 0.44;
                append_box(p, Vec3(cx - 0.04, cy - 0.04, -0.5), Vec3(cx + 0.04, cy + 0.04, -0.1));
            }
        }
        if (variant == 2) {  // armrests
            for (double sy : {-1.0, 1.0}) {
                append_box(p, Vec3(-0.5, sy * 0.46 - 0.04, 0.1), Vec3(0.2, sy * 0.46 + 0.04, 0.25));
            }
        }
    } else if (category == "display") {
        const double panel_bottom = variant == 1 ? -0.2 : -0.1;
        append_box(p, Vec3(-0.1, -0.5, panel_bottom), Vec3(0.1, 0.5, 0.5));  // panel
        if (variant == 2) {
            for (double sy : {-1.0, 1.0}) {  // dual columns
                append_box(p, Vec3(-0.08, sy * 0.3 - 0.08, -0.42),
                           Vec3(0.08, sy * 0.3 + 0.08, panel_bottom));
            }
        } else {
            append_box(p, Vec3(-0.08, -0.1, -0.42), Vec3(0.08, 0.1, panel_bottom));
        }
        const double base = variant == 1 ? 0.3 : 0.42;  // base plate footprint
        append_box(p, Vec3(-0.5, -base, -0.5), Vec3(0.5, base, -0.42));
    } else {
        throw InvalidInput("model_points: unknown category '" + category + "'");
    }
    return p;
}

inline constexpr int kVariantsPerCategory = 3;

inline std::string model_id(const std::string& category, int variant) {
    return category + "_" + std::to_string(variant);
}

}  // namespace shapes

/// The built-in retrieval set: every category/variant pair with canonical
/// points and a descriptor of their voxelization.
inline align::CadDatabase builtin_cad_database() {
    align::CadDatabase db;
    for (const char* cat : {"cabinet", "chair", "display", "table"}) {
        for (int v = 0; v < shapes::kVariantsPerCategory; ++v) {
            align::CadModel m;
            m.model_id = shapes::model_id(cat, v);
            m.category = cat;
            m.points = shapes::model_points(cat, v);
            m.descriptor = align::compute_descriptor(geom::voxelize(m.points, 0.025, 1));
            db.add(std::move(m));
        }
    }
    return db;
}

// ---------------------------------------------------------------------------
// rooms
// ---------------------------------------------------------------------------

namespace detail {

struct Wall {
    Eigen::Vector2d a, b;     // plan segment endpoints
    Eigen::Vector2d inward;   // unit normal pointing into the room
};

struct RoomPlan {
    LayoutGraph layout;
    std::vector<Wall> walls;
    double width = 0, depth = 0, height = 0;
    bool l_shaped = false;
    double notch_w = 0, notch_d = 0;  // notch cut from the (W,D) corner

    bool footprint_ok(const Aabb& box, double clearance) const {
        if (box.min.x() < clearance || box.min.y() < clearance ||
            box.max.x() > width - clearance || box.max.y() > depth - clearance) {
            return false;
        }
        if (!l_shaped) return true;
        // keep clear of the notch rectangle
        return box.max.x() <= width - notch_w - clearance ||
               box.max.y() <= depth - notch_d - clearance;
    }
};

inline RoomPlan make_box_room(double w, double d, double h) {
    RoomPlan room;
    room.width = w;
    room.depth = d;
    room.height = h;
    LayoutGraph& g = room.layout;
    const double xs[4] = {0, w, w, 0}, ys[4] = {0, 0, d, d};
    for (double z : {0.0, h}) {
        for (int i = 0; i < 4; ++i) g.corners.emplace_back(xs[i], ys[i], z);
    }
    for (int i = 0; i < 4; ++i) {
        const int j = (i + 1) % 4;
        g.add_edge(i, j);          // floor ring
        g.add_edge(4 + i, 4 + j);  // ceiling ring
        g.add_edge(i, 4 + i);      // verticals
        g.add_quad({i, j, 4 + j, 4 + i});  // wall
    }
    g.add_quad({0, 1, 2, 3});
    g.add_quad({4, 5, 6, 7});
    using V2 = Eigen::Vector2d;
    room.walls = {{V2(0, 0), V2(w, 0), V2(0, 1)},
                  {V2(w, 0), V2(w, d), V2(-1, 0)},
                  {V2(w, d), V2(0, d), V2(0, -1)},
                  {V2(0, d), V2(0, 0), V2(1, 0)}};
    return room;
}

/// L-shaped room: the (W,D) corner notch removed, floor/ceiling split into
/// three conforming rectangles so every quad corner is a graph corner.
inline RoomPlan make_l_room(double w, double d, double h, double notch_w, double notch_d) {
    RoomPlan room;
    room.width = w;
    room.depth = d;
    room.height = h;
    room.l_shaped = true;
    room.notch_w = notch_w;
    room.notch_d = notch_d;
    const double xm = w - notch_w, ym = d - notch_d;
    LayoutGraph& g = room.layout;
    // plan points, then the same ring at z = h (indices +8)
    const double xs[8] = {0, xm, w, w, xm, 0, xm, 0};
    const double ys[8] = {0, 0, 0, ym, ym, ym, d, d};
    for (double z : {0.0, h}) {
        for (int i = 0; i < 8; ++i) g.corners.emplace_back(xs[i], ys[i], z);
    }
    // outline in traversal order; (5,0) closes the ring
    const int ring[8] = {0, 1, 2, 3, 4, 6, 7, 5};
    for (int k = 0; k < 8; ++k) {
        const int i = ring[k], j = ring[(k + 1) % 8];
        g.add_edge(i, j);
        g.add_edge(8 + i, 8 + j);
        g.add_edge(i, 8 + i);
        g.add_quad({i, j, 8 + j, 8 + i});  // wall segment
    }
    // interior floor/ceiling cuts of the three-rectangle decomposition
    for (int base : {0, 8}) {
        g.add_edge(base + 1, base + 4);
        g.add_edge(base + 4, base + 5);
        g.add_quad({base + 0, base + 1, base + 4, base + 5});  // A1
        g.add_quad({base + 1, base + 2, base + 3, base + 4});  // B
        g.add_quad({base + 5, base + 4, base + 6, base + 7});  // A2
    }
    using V2 = Eigen::Vector2d;
    room.walls = {{V2(0, 0), V2(xm, 0), V2(0, 1)},   {V2(xm, 0), V2(w, 0), V2(0, 1)},
                  {V2(w, 0), V2(w, ym), V2(-1, 0)},  {V2(w, ym), V2(xm, ym), V2(0, -1)},
                  {V2(xm, ym), V2(xm, d), V2(-1, 0)},{V2(xm, d), V2(0, d), V2(0, -1)},
                  {V2(0, d), V2(0, ym), V2(1, 0)},   {V2(0, ym), V2(0, 0), V2(1, 0)}};
    return room;
}

/// Dense surface sample of a quad (assumed rectangular), spacing <= step.
inline void sample_quad_surface(std::vector<Vec3>& pts, const std::array<Vec3, 4>& q,
                                double step) {
    const Vec3 du = q[1] - q[0], dv = q[3] - q[0];
    const int nu = std::max(2, static_cast<int>(std::ceil(du.norm() / step)) + 1);
    const int nv = std::max(2, static_cast<int>(std::ceil(dv.norm() / step)) + 1);
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            pts.push_back(q[0] + du * (static_cast<double>(i) / (nu - 1)) +
                          dv * (static_cast<double>(j) / (nv - 1)));
        }
    }
}

/// Footprint half-extents of a yaw-rotated box.
inline Eigen::Vector2d yawed_half_extents(double yaw, double hx, double hy) {
    const double c = std::abs(std::cos(yaw)), s = std::abs(std::sin(yaw));
    return {c * hx + s * hy, s * hx + c * hy};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// heatmap synthesis
// ---------------------------------------------------------------------------

/// Cornerness heatmap over a grid of the given shape: each cell's value is
/// the max over corners of exp(-d^2 / (2 sigma^2)) with d the distance from
/// the cell center to the corner. Contributions beyond 7 sigma (< 1e-10) are
/// skipped. The grid is offset half a voxel from `like` so that a corner
/// sitting exactly on one of the reference grid's cell boundaries (the
/// voxelization origin is derived from the scan minimum, which is such a
/// corner in clean scans) lands on a cell center instead of tying two
/// neighboring cells, which strict-maximum suppression would both reject.
inline VoxelGrid synthesize_heatmap(const std::vector<Vec3>& corners, const VoxelGrid& like,
                                    double sigma) {
    if (!(sigma > 0.0)) {
        throw InvalidInput("synthesize_heatmap: sigma must be positive");
    }
    VoxelGrid h;
    h.origin = like.origin + Vec3::Constant(like.voxel_size / 2);
    h.voxel_size = like.voxel_size;
    h.nx = like.nx;
    h.ny = like.ny;
    h.nz = like.nz;
    h.values.assign(like.cell_count(), 0.0);
    const int reach = static_cast<int>(std::ceil(7.0 * sigma / h.voxel_size)) + 1;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (const Vec3& c : corners) {
        const Eigen::Vector3i cc = h.clamped_cell_of(c);
        for (int ix = std::max(0, cc.x() - reach); ix <= std::min(h.nx - 1, cc.x() + reach); ++ix) {
            for (int iy = std::max(0, cc.y() - reach); iy <= std::min(h.ny - 1, cc.y() + reach); ++iy) {
                for (int iz = std::max(0, cc.z() - reach); iz <= std::min(h.nz - 1, cc.z() + reach); ++iz) {
                    const double d2 = (h.cell_center(ix, iy, iz) - c).squaredNorm();
                    double& v = h.values[h.index(ix, iy, iz)];
                    v = std::max(v, std::exp(-d2 * inv));
                }
            }
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// scene generation
// ---------------------------------------------------------------------------

inline Scene generate_scene(const SceneSpec& spec,
                            const relations::RelationConfig& rel_cfg = {}) {
    spec.validate();
    rel_cfg.validate();
    Rng root(spec.seed);
    Rng room_rng = root.fork(1);
    Rng object_rng = root.fork(2);
    Rng jitter_rng = root.fork(3);
    Rng noise_rng = root.fork(4);
    Rng dropout_rng = root.fork(5);

    Scene scene;
    scene.seed = spec.seed;
    scene.voxel_size = spec.voxel_size;
    scene.heatmap_sigma = spec.heatmap_sigma;
    scene.corner_jitter_sigma = spec.corner_jitter_sigma;
    scene.point_noise_sigma = spec.point_noise_sigma;
    scene.dropout = spec.dropout;

    // --- room ---
    const double w = room_rng.uniform(spec.room_min, spec.room_max);
    const double d = room_rng.uniform(spec.room_min, spec.room_max);
    const double h = room_rng.uniform(spec.height_min, spec.height_max);
    const int wall_target =
        spec.wall_min + static_cast<int>(room_rng.uniform_int(spec.wall_max - spec.wall_min + 1));
    detail::RoomPlan room;
    if (wall_target >= 6) {
        const double nw = w * room_rng.uniform(0.3, 0.5);
        const double nd = d * room_rng.uniform(0.3, 0.5);
        room = detail::make_l_room(w, d, h, nw, nd);
    } else {
        room = detail::make_box_room(w, d, h);
    }
    scene.gt_layout = room.layout;

    // --- objects ---
    const int n_objects =
        spec.object_min + static_cast<int>(object_rng.uniform_int(spec.object_max - spec.object_min + 1));
    struct ScaleRange {
        double lo[3], hi[3];
    };
    const auto scale_range = [](const std::string& cat) -> ScaleRange {
        if (cat == "cabinet") return {{0.5, 0.35, 1.2}, {1.1, 0.6, 1.9}};
        if (cat == "table") return {{0.9, 0.6, 0.65}, {1.6, 1.1, 0.78}};
        if (cat == "chair") return {{0.45, 0.5, 0.85}, {0.6, 0.65, 1.1}};
        if (cat == "display") return {{0.08, 0.8, 0.5}, {0.15, 1.5, 0.9}};
        throw InvalidInput("generate_scene: unknown category '" + cat + "'");
    };
    constexpr double kWallClear = 0.55;   // free-standing objects stay off walls
    constexpr double kObjectClear = 0.05; // pairwise footprint clearance
    std::vector<Aabb> footprints;

    // Each attempt is a fresh draw of category, size and placement kind, so
    // a crowded room simply converges to whatever still fits.
    for (int k = 0; k < n_objects; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 256 && !placed; ++attempt) {
            const std::string category =
                spec.categories[object_rng.uniform_int(spec.categories.size())];
            const int variant =
                static_cast<int>(object_rng.uniform_int(shapes::kVariantsPerCategory));
            const ScaleRange sr = scale_range(category);
            Vec3 scale;
            for (int a = 0; a < 3; ++a) scale[a] = object_rng.uniform(sr.lo[a], sr.hi[a]);
            bool resting = object_rng.bernoulli(spec.rest_fraction);
            const bool touching = resting && object_rng.bernoulli(spec.wall_touch_fraction);
            if (!resting && scale.z() > room.height - 1.3) resting = true;  // no headroom

            double yaw, cx, cy, cz;
            if (touching) {
                const detail::Wall& wall =
                    room.walls[object_rng.uniform_int(room.walls.size())];
                const Eigen::Vector2d dir = (wall.b - wall.a).normalized();
                const double len = (wall.b - wall.a).norm();
                yaw = std::atan2(wall.inward.y(), wall.inward.x()) +
                      object_rng.uniform(-10.0, 10.0) * M_PI / 180.0;
                const Eigen::Vector2d he =
                    detail::yawed_half_extents(yaw, scale.x() / 2, scale.y() / 2);
                const double half_along = std::abs(dir.x()) * he.x() + std::abs(dir.y()) * he.y();
                const double half_inward =
                    std::abs(wall.inward.x()) * he.x() + std::abs(wall.inward.y()) * he.y();
                if (len < 2 * (half_along + 0.1)) continue;  // wall too short
                const double t = object_rng.uniform(half_along + 0.1, len - half_along - 0.1);
                const double gap = object_rng.uniform(0.01, 0.08);
                const Eigen::Vector2d c2 =
                    wall.a + dir * t + wall.inward * (gap + half_inward);
                cx = c2.x();
                cy = c2.y();
                cz = scale.z() / 2;
            } else {
                yaw = object_rng.uniform(0.0, 2.0 * M_PI);
                cx = object_rng.uniform(0.0, room.width);
                cy = object_rng.uniform(0.0, room.depth);
                if (resting) {
                    cz = scale.z() / 2;
                } else {
                    cz = object_rng.uniform(0.8, room.height - scale.z() - 0.5) + scale.z() / 2;
                }
            }
            const Eigen::Vector2d he =
                detail::yawed_half_extents(yaw, scale.x() / 2, scale.y() / 2);
            const Aabb fp{Vec3(cx - he.x(), cy - he.y(), 0.0),
                          Vec3(cx + he.x(), cy + he.y(), 1.0)};
            const double clear = touching ? kObjectClear : kWallClear;
            if (!room.footprint_ok(fp, clear)) continue;
            bool collides = false;
            for (const Aabb& other : footprints) {
                if (geom::boxes_overlap(geom::expand_box(fp, kObjectClear), other)) {
                    collides = true;
                    break;
                }
            }
            if (collides) continue;

            PlacedObject obj;
            obj.category = category;
            obj.model_id = shapes::model_id(category, variant);
            obj.pose.translation = Vec3(cx, cy, cz);
            obj.pose.rotation = Rot3::from_axis_angle(Vec3(0, 0, 1), yaw);
            obj.pose.scale = scale;
            obj.obb.center = obj.pose.translation;
            obj.obb.basis = obj.pose.rotation;
            obj.obb.half_extents = scale / 2;
            obj.obb.front_axis = 0;
            obj.obb.front_sign = 1;
            scene.objects.push_back(std::move(obj));
            footprints.push_back(fp);
            placed = true;
        }
        if (!placed) {
            throw DataError("generate_scene: failed to place object " + std::to_string(k) +
                            " after 256 attempts (seed=" + std::to_string(spec.seed) + ")");
        }
    }

    // --- scan points -> occupancy ---
    std::vector<Vec3> points;
    for (std::size_t qi = 0; qi < scene.gt_layout.quads.size(); ++qi) {
        detail::sample_quad_surface(points, scene.gt_layout.quad_positions(qi),
                                    spec.voxel_size / 2);
    }
    for (PlacedObject& obj : scene.objects) {
        const std::vector<Vec3> canonical = shapes::model_points(
            obj.category, obj.model_id.back() - '0');
        const std::vector<Vec3> posed = geom::apply_pose(obj.pose, canonical);
        points.insert(points.end(), posed.begin(), posed.end());
        // a deterministic subsample of the same scan serves as correspondences
        const std::size_t stride = std::max<std::size_t>(1, canonical.size() / 40);
        for (std::size_t i = 0; i < canonical.size(); i += stride) {
            obj.correspondences.source.push_back(canonical[i]);
            obj.correspondences.target.push_back(posed[i]);
        }
    }
    if (spec.point_noise_sigma > 0.0) {
        for (Vec3& p : points) {
            for (int a = 0; a < 3; ++a) p[a] += noise_rng.normal(0.0, spec.point_noise_sigma);
        }
        for (PlacedObject& obj : scene.objects) {
            for (Vec3& t : obj.correspondences.target) {
                for (int a = 0; a < 3; ++a) t[a] += noise_rng.normal(0.0, spec.point_noise_sigma);
            }
        }
    }
    scene.occupancy = geom::voxelize(points, spec.voxel_size, 2);
    if (spec.dropout > 0.0) {
        for (double& v : scene.occupancy.values) {
            if (v > 0.5 && dropout_rng.bernoulli(spec.dropout)) v = 0.0;
        }
    }

    // --- corner observations ---
    scene.corner_observations = scene.gt_layout.corners;
    if (spec.corner_jitter_sigma > 0.0) {
        for (Vec3& c : scene.corner_observations) {
            for (int a = 0; a < 3; ++a) c[a] += jitter_rng.normal(0.0, spec.corner_jitter_sigma);
        }
    }

    // --- ground-truth relations, derived by the extractor itself ---
    const std::vector<Obb> boxes = scene.object_boxes();
    scene.gt_relations = relations::extract_object_layout_relations(
        boxes, layout::quad_corner_positions(scene.gt_layout), rel_cfg);
    const std::vector<relations::Relation> angles =
        relations::extract_object_object_angles(boxes, rel_cfg);
    scene.gt_relations.insert(scene.gt_relations.end(), angles.begin(), angles.end());
    return scene;
}

// ---------------------------------------------------------------------------
// RANSAC plane extraction
// ---------------------------------------------------------------------------

struct Plane {
    Vec3 normal = Vec3::UnitZ();  // unit length; largest component positive
    double offset = 0.0;          // plane: normal . x == offset
    std::vector<int> inliers;     // indices into the input point list
};

/// Iteratively extract planes: each round keeps the 3-point sample plane with
/// the most inliers among `iterations` seeded draws (first-found wins ties),
/// removes its inliers, and repeats until no plane reaches min_inliers.
inline std::vector<Plane> ransac_planes(const std::vector<Vec3>& points, int iterations,
                                        double inlier_tol, int min_inliers,
                                        std::uint64_t seed = 1) {
    if (points.size() < 3) {
        throw InvalidInput("ransac_planes: need at least 3 points");
    }
    if (!(inlier_tol > 0.0) || iterations < 1 || min_inliers < 3) {
        throw InvalidInput("ransac_planes: bad iteration/tolerance parameters");
    }
    Rng rng(seed);
    std::vector<int> active(points.size());
    std::iota(active.begin(), active.end(), 0);
    std::vector<Plane> out;
    while (active.size() >= 3) {
        Vec3 best_n = Vec3::Zero();
        double best_off = 0.0;
        std::size_t best_count = 0;
        for (int it = 0; it < iterations; ++it) {
            int ia = static_cast<int>(rng.uniform_int(active.size()));
            int ib = static_cast<int>(rng.uniform_int(active.size()));
            int ic = static_cast<int>(rng.uniform_int(active.size()));
            if (ia == ib || ib == ic || ia == ic) continue;
            const Vec3& a = points[active[ia]];
            Vec3 n = (points[active[ib]] - a).cross(points[active[ic]] - a);
            if (n.norm() < 1e-12) continue;
            n.normalize();
            const double off = n.dot(a);
            std::size_t count = 0;
            for (int idx : active) {
                if (std::abs(n.dot(points[idx]) - off) <= inlier_tol) ++count;
            }
            if (count > best_count) {
                best_count = count;
                best_n = n;
                best_off = off;
            }
        }
        if (best_count < static_cast<std::size_t>(min_inliers)) break;
        int big = 0;
        for (int k = 1; k < 3; ++k) {
            if (std::abs(best_n[k]) > std::abs(best_n[big])) big = k;
        }
        if (best_n[big] < 0.0) {
            best_n = -best_n;
            best_off = -best_off;
        }
        Plane plane;
        plane.normal = best_n;
        plane.offset = best_off;
        std::vector<int> remaining;
        for (int idx : active) {
            if (std::abs(best_n.dot(points[idx]) - best_off) <= inlier_tol) {
                plane.inliers.push_back(idx);
            } else {
                remaining.push_back(idx);
            }
        }
        active = std::move(remaining);
        out.push_back(std::move(plane));
    }
    return out;
}

}  // namespace scenecad::datagen
