#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "scenecad/geom.hpp"
#include "scenecad/layout.hpp"
#include "scenecad/random.hpp"

namespace scenecad::relations {

using geom::Aabb;
using geom::Obb;
using geom::Vec3;
using layout::FeatureGrid;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using QuadCorners = std::array<Vec3, 4>;

struct RelationConfig {
    double tau_p = 0.2;             // proximity expansion, meters
    double parallel_tol_deg = 15.0;
    int bin_count = 6;
    double angle_range_deg = 180.0;

    void validate() const {
        if (!(tau_p >= 0.0) || !std::isfinite(tau_p)) {
            throw InvalidInput("relation config: tau_p must be >= 0 and finite");
        }
        if (!(parallel_tol_deg > 0.0 && parallel_tol_deg < 90.0)) {
            throw InvalidInput("relation config: parallel_tol_deg must be in (0,90)");
        }
        if (bin_count < 1) {
            throw InvalidInput("relation config: bin_count must be >= 1");
        }
        if (!(angle_range_deg > 0.0 && angle_range_deg <= 360.0)) {
            throw InvalidInput("relation config: angle_range_deg must be in (0,360]");
        }
    }
};

/// One relation between two scene entities. Object-layout relations carry a
/// support kind; object-object relations carry an angle bin.
struct Relation {
    enum class Kind { NoSupport, VerticalSupport, HorizontalTouch, AngleBin };

    int source = 0;  // object index
    int target = 0;  // quad index (support kinds) or object index (AngleBin)
    Kind kind = Kind::NoSupport;
    int bin = -1;    // valid iff kind == AngleBin
};

inline constexpr int kSupportClassCount = 3;

/// Class index for the 3-way support head.
inline int support_class(Relation::Kind kind) {
    switch (kind) {
        case Relation::Kind::NoSupport: return 0;
        case Relation::Kind::VerticalSupport: return 1;
        case Relation::Kind::HorizontalTouch: return 2;
        default: throw InvalidInput("support_class: not a support relation");
    }
}

inline Relation::Kind support_kind_from_class(int cls) {
    switch (cls) {
        case 0: return Relation::Kind::NoSupport;
        case 1: return Relation::Kind::VerticalSupport;
        case 2: return Relation::Kind::HorizontalTouch;
        default: throw InvalidInput("support_kind_from_class: class out of range");
    }
}

/// Bin index of the angle between two front vectors. The angle is the arccos
/// of the clamped normalized dot product, in [0,180]; bins are half-open with
/// the final bin closed (the clamp rule), so theta = range maps to the last
/// bin. A 1e-9-degree snap absorbs arccos rounding at exact bin boundaries.
inline int angular_bin(const Vec3& front_i, const Vec3& front_j, const RelationConfig& cfg) {
    cfg.validate();
    const double ni = front_i.norm(), nj = front_j.norm();
    if (!(ni > 0.0) || !(nj > 0.0)) {
        throw InvalidInput("angular_bin: zero-length front vector");
    }
    const double d = std::clamp(front_i.dot(front_j) / (ni * nj), -1.0, 1.0);
    const double theta_deg = std::acos(d) * 180.0 / M_PI;
    const double width = cfg.angle_range_deg / cfg.bin_count;
    const int bin = static_cast<int>(std::floor((theta_deg + 1e-9) / width));
    return std::min(bin, cfg.bin_count - 1);
}

namespace detail {

/// Angle in degrees between two directions, ignoring sign (range [0,90]).
inline double axis_angle_deg(const Vec3& u, const Vec3& v) {
    const double d = std::clamp(std::abs(u.normalized().dot(v.normalized())), 0.0, 1.0);
    return std::acos(d) * 180.0 / M_PI;
}

}  // namespace detail

/// One support relation per (object, quad) pair:
///   VerticalSupport  — bottom face normal (the box up axis, sign ignored)
///                      within parallel_tol of the quad plane normal AND the
///                      tau_p-expanded boxes overlap;
///   HorizontalTouch  — same test against the four side faces (the two
///                      lateral axes);
///   NoSupport        — otherwise.
/// VerticalSupport wins when both fire.
inline std::vector<Relation> extract_object_layout_relations(const std::vector<Obb>& objects,
                                                             const std::vector<QuadCorners>& quads,
                                                             const RelationConfig& cfg) {
    cfg.validate();
    std::vector<Aabb> obj_boxes, quad_boxes;
    std::vector<Vec3> quad_normals;
    for (const Obb& o : objects) {
        obj_boxes.push_back(geom::expand_box(o.aabb(), cfg.tau_p));
    }
    for (const QuadCorners& q : quads) {
        quad_boxes.push_back(
            geom::expand_box(Aabb::of_points({q[0], q[1], q[2], q[3]}), cfg.tau_p));
        quad_normals.push_back(layout::quad_plane_normal(q[0], q[1], q[2], q[3]));
    }
    std::vector<Relation> out;
    out.reserve(objects.size() * quads.size());
    for (int oi = 0; oi < static_cast<int>(objects.size()); ++oi) {
        for (int qi = 0; qi < static_cast<int>(quads.size()); ++qi) {
            Relation r;
            r.source = oi;
            r.target = qi;
            r.kind = Relation::Kind::NoSupport;
            if (geom::boxes_overlap(obj_boxes[oi], quad_boxes[qi])) {
                const Vec3& n = quad_normals[qi];
                const Obb& o = objects[oi];
                if (detail::axis_angle_deg(o.axis(2), n) <= cfg.parallel_tol_deg) {
                    r.kind = Relation::Kind::VerticalSupport;
                } else if (detail::axis_angle_deg(o.axis(0), n) <= cfg.parallel_tol_deg ||
                           detail::axis_angle_deg(o.axis(1), n) <= cfg.parallel_tol_deg) {
                    r.kind = Relation::Kind::HorizontalTouch;
                }
            }
            out.push_back(r);
        }
    }
    return out;
}

/// Angle-bin relation for every unordered object pair (i < j).
inline std::vector<Relation> extract_object_object_angles(const std::vector<Obb>& objects,
                                                          const RelationConfig& cfg) {
    std::vector<Relation> out;
    for (int i = 0; i < static_cast<int>(objects.size()); ++i) {
        for (int j = i + 1; j < static_cast<int>(objects.size()); ++j) {
            Relation r;
            r.source = i;
            r.target = j;
            r.kind = Relation::Kind::AngleBin;
            r.bin = angular_bin(objects[i].front_vector(), objects[j].front_vector(), cfg);
            out.push_back(r);
        }
    }
    return out;
}

inline constexpr int kNodeFeatureDim = 128;

enum class NodeKind { Object, LayoutQuad };

/// Graph edge, stored with a < b. Object-quad edges may carry a support
/// class; object-object edges an angle bin; -1 means unlabeled.
struct GraphEdge {
    int a = 0, b = 0;
    int support_label = -1;
    int angle_label = -1;
};

/// Relational scene graph: object nodes first, then quad nodes; edges are all
/// object-object pairs plus all object-quad pairs (no quad-quad).
struct SceneGraph {
    std::vector<NodeKind> kinds;
    std::vector<VectorXd> features;  // length kNodeFeatureDim each
    std::vector<GraphEdge> edges;
    int object_count = 0;
    int quad_count = 0;

    int quad_node(int quad_index) const { return object_count + quad_index; }
    bool is_object_object(const GraphEdge& e) const { return e.b < object_count; }
    bool is_object_quad(const GraphEdge& e) const {
        return e.a < object_count && e.b >= object_count;
    }
};

namespace detail {

/// Fixed pseudo-random projection with orthonormal rows (in_dim >= out_dim)
/// or orthonormal columns (in_dim < out_dim), derived from a seeded Gaussian
/// via QR. Identical across runs; cached per input width.
inline const MatrixXd& fixed_projection(int in_dim, int out_dim) {
    static std::map<std::pair<int, int>, MatrixXd> cache;
    const auto key = std::make_pair(in_dim, out_dim);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    constexpr std::uint64_t kProjectionSeed = 0x5ce9ecadu;
    Rng rng(kProjectionSeed + 1000003ull * in_dim + out_dim);
    const int tall = std::max(in_dim, out_dim), thin = std::min(in_dim, out_dim);
    MatrixXd g(tall, thin);
    for (int i = 0; i < tall; ++i)
        for (int j = 0; j < thin; ++j) g(i, j) = rng.normal();
    const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ() *
                       MatrixXd::Identity(tall, thin);
    MatrixXd p = (in_dim >= out_dim) ? MatrixXd(q.transpose()) : q;
    return cache.emplace(key, std::move(p)).first->second;
}

/// Per-channel max pooling of the feature grid onto an 8x8x8 partition of
/// region; cells are assigned to bins by their centers, empty bins stay 0.
inline VectorXd pool_region(const FeatureGrid& fg, const Aabb& region) {
    constexpr int kEdge = 8;
    VectorXd pooled = VectorXd::Zero(kEdge * kEdge * kEdge * fg.channels);
    const Vec3 ext = region.extents().cwiseMax(1e-12);
    const auto cell_lo = [&](double lo, double origin) {
        return std::max(0, static_cast<int>(std::floor((lo - origin) / fg.voxel_size)));
    };
    const int x0 = cell_lo(region.min.x(), fg.origin.x());
    const int y0 = cell_lo(region.min.y(), fg.origin.y());
    const int z0 = cell_lo(region.min.z(), fg.origin.z());
    for (int ix = x0; ix < fg.nx; ++ix) {
        const double cx = fg.origin.x() + (ix + 0.5) * fg.voxel_size;
        if (cx > region.max.x()) break;
        if (cx < region.min.x()) continue;
        const int bx = std::min(kEdge - 1, static_cast<int>((cx - region.min.x()) / ext.x() * kEdge));
        for (int iy = y0; iy < fg.ny; ++iy) {
            const double cy = fg.origin.y() + (iy + 0.5) * fg.voxel_size;
            if (cy > region.max.y()) break;
            if (cy < region.min.y()) continue;
            const int by =
                std::min(kEdge - 1, static_cast<int>((cy - region.min.y()) / ext.y() * kEdge));
            for (int iz = z0; iz < fg.nz; ++iz) {
                const double cz = fg.origin.z() + (iz + 0.5) * fg.voxel_size;
                if (cz > region.max.z()) break;
                if (cz < region.min.z()) continue;
                const int bz =
                    std::min(kEdge - 1, static_cast<int>((cz - region.min.z()) / ext.z() * kEdge));
                const std::size_t out = static_cast<std::size_t>((bx * kEdge + by) * kEdge + bz) *
                                        fg.channels;
                const std::size_t in = fg.cell_index(ix, iy, iz);
                for (int c = 0; c < fg.channels; ++c) {
                    pooled[out + c] = std::max(pooled[out + c], fg.values[in + c]);
                }
            }
        }
    }
    return pooled;
}

}  // namespace detail

/// Default slack around the object box when pooling node features; wide
/// enough that a surface within relation range (2 tau_p) of a face shows up
/// in the pooled occupancy pattern.
inline constexpr double kDefaultPoolMargin = 0.45;

/// Dimensions at the tail of every node feature that carry explicit scene
/// geometry instead of projected grid content: normalized center (3),
/// normalized bounding extents (3), heading cos/sin (2, zero for quads), and
/// a node kind flag with one spare zero. Keeping geometry outside the
/// projection lets the message h_j - h_i expose relative placement (e.g.
/// object-to-wall offsets, relative heading) directly.
inline constexpr int kGeometryDims = 10;

namespace detail {

/// The distance channel is measured in voxels and clamped, so it dwarfs the
/// [0,1] occupancy channels; rescale it before mixing channels in a
/// projection. Entries [offset, offset+stride, ...) below `limit` are
/// rescaled.
inline void normalize_distance_entries(VectorXd& v, int stride, int offset, int limit) {
    for (int i = offset; i < limit; i += stride) {
        v[i] /= layout::kDistanceClampVoxels;
    }
}

inline void append_geometry(VectorXd& node, const FeatureGrid& fg, const Aabb& box,
                            const Vec3& heading, double kind_flag) {
    const int base = kNodeFeatureDim - kGeometryDims;
    const Vec3 grid_ext =
        (fg.max_corner() - fg.min_corner()).cwiseMax(1e-12);
    node.segment(base, 3) = fg.normalized(box.center());
    node.segment(base + 3, 3) = box.extents().cwiseQuotient(grid_ext);
    const double len = std::hypot(heading.x(), heading.y());
    node[base + 6] = len > 1e-9 ? heading.x() / len : 0.0;
    node[base + 7] = len > 1e-9 ? heading.y() / len : 0.0;
    node[base + 8] = kind_flag;
    node[base + 9] = 0.0;
}

}  // namespace detail

/// Assemble the relational graph: object node features are the feature grid
/// max-pooled to 8^3 over the (margin-expanded) object box, quad node
/// features concatenate the four corner features with the normalized corner
/// coordinates; both are mapped to kNodeFeatureDim - kGeometryDims by fixed
/// deterministic projections, with normalized center/extents/kind appended.
/// Edges connect every object-object and object-quad pair.
inline SceneGraph build_scene_graph(const std::vector<Obb>& objects,
                                    const std::vector<QuadCorners>& quads,
                                    const FeatureGrid& features,
                                    double pool_margin = kDefaultPoolMargin) {
    if (!(pool_margin >= 0.0) || !std::isfinite(pool_margin)) {
        throw InvalidInput("build_scene_graph: pool_margin must be >= 0 and finite");
    }
    const Aabb grid_bounds{features.min_corner(), features.max_corner()};
    constexpr int proj_dims = kNodeFeatureDim - kGeometryDims;
    SceneGraph g;
    g.object_count = static_cast<int>(objects.size());
    g.quad_count = static_cast<int>(quads.size());

    for (const Obb& o : objects) {
        const Aabb box = o.aabb();
        if (!geom::boxes_overlap(box, grid_bounds)) {
            throw InvalidInput("build_scene_graph: object box outside grid bounds");
        }
        VectorXd pooled = detail::pool_region(features, geom::expand_box(box, pool_margin));
        detail::normalize_distance_entries(pooled, features.channels, features.channels - 1,
                                           static_cast<int>(pooled.size()));
        const auto& proj = detail::fixed_projection(static_cast<int>(pooled.size()), proj_dims);
        VectorXd node(kNodeFeatureDim);
        node.head(proj_dims) = proj * pooled;
        detail::append_geometry(node, features, box,
                                o.basis.matrix().col(o.front_axis) * o.front_sign, 0.0);
        g.kinds.push_back(NodeKind::Object);
        g.features.push_back(std::move(node));
    }
    for (const QuadCorners& q : quads) {
        VectorXd f(4 * (features.channels + 3));
        f << features.at_point(q[0]), features.at_point(q[1]), features.at_point(q[2]),
            features.at_point(q[3]), features.normalized(q[0]), features.normalized(q[1]),
            features.normalized(q[2]), features.normalized(q[3]);
        detail::normalize_distance_entries(f, features.channels, features.channels - 1,
                                           4 * features.channels);
        const auto& proj = detail::fixed_projection(static_cast<int>(f.size()), proj_dims);
        VectorXd node(kNodeFeatureDim);
        node.head(proj_dims) = proj * f;
        detail::append_geometry(node, features, Aabb::of_points({q[0], q[1], q[2], q[3]}),
                                Vec3::Zero(), 1.0);
        g.kinds.push_back(NodeKind::LayoutQuad);
        g.features.push_back(std::move(node));
    }
    for (int i = 0; i < g.object_count; ++i)
        for (int j = i + 1; j < g.object_count; ++j) g.edges.push_back({i, j, -1, -1});
    for (int i = 0; i < g.object_count; ++i)
        for (int q = 0; q < g.quad_count; ++q) g.edges.push_back({i, g.quad_node(q), -1, -1});
    return g;
}

/// Copy ground-truth relation labels onto the matching graph edges.
inline void attach_relation_labels(SceneGraph& graph, const std::vector<Relation>& rels) {
    for (const Relation& r : rels) {
        int a, b;
        if (r.kind == Relation::Kind::AngleBin) {
            a = std::min(r.source, r.target);
            b = std::max(r.source, r.target);
        } else {
            a = r.source;
            b = graph.quad_node(r.target);
        }
        bool found = false;
        for (GraphEdge& e : graph.edges) {
            if (e.a != a || e.b != b) continue;
            if (r.kind == Relation::Kind::AngleBin) {
                e.angle_label = r.bin;
            } else {
                e.support_label = support_class(r.kind);
            }
            found = true;
            break;
        }
        if (!found) {
            throw InvalidInput("attach_relation_labels: relation references a missing edge");
        }
    }
}

}  // namespace scenecad::relations
