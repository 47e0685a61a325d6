#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <vector>

#include "scenecad/error.hpp"

namespace scenecad::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Proper rotation (orthogonal, det +1). Construction validates.
class Rot3 {
public:
    static constexpr double kOrthoTol = 1e-9;

    Rot3() : m_(Mat3::Identity()) {}

    explicit Rot3(const Mat3& m) : m_(m) {
        if (!is_rotation(m)) {
            throw InvalidInput("Rot3: matrix is not a proper rotation");
        }
    }

    static Rot3 identity() { return Rot3(); }

    /// Rodrigues formula. axis need not be normalized; angle in radians.
    static Rot3 from_axis_angle(const Vec3& axis, double angle) {
        const double n = axis.norm();
        if (n == 0.0) {
            throw InvalidInput("Rot3::from_axis_angle: zero axis");
        }
        Rot3 r;
        r.m_ = Eigen::AngleAxisd(angle, axis / n).toRotationMatrix();
        return r;
    }

    /// Inverse of from_axis_angle. Returns (unit axis, angle in [0, pi]).
    /// For the identity rotation the axis is (1,0,0) with angle 0.
    std::pair<Vec3, double> to_axis_angle() const {
        Eigen::AngleAxisd aa(m_);
        if (aa.angle() < 0.0) {
            return {-aa.axis(), -aa.angle()};
        }
        if (aa.angle() == 0.0) {
            return {Vec3(1, 0, 0), 0.0};
        }
        return {aa.axis(), aa.angle()};
    }

    static bool is_rotation(const Mat3& m, double tol = kOrthoTol) {
        const Mat3 err = m.transpose() * m - Mat3::Identity();
        return err.cwiseAbs().maxCoeff() <= tol &&
               std::abs(m.determinant() - 1.0) <= tol;
    }

    /// Wrap a matrix known to be a rotation, skipping validation.
    static Rot3 from_matrix_unchecked(const Mat3& m) {
        Rot3 r;
        r.m_ = m;
        return r;
    }

    const Mat3& matrix() const { return m_; }
    Vec3 operator*(const Vec3& v) const { return m_ * v; }
    Rot3 operator*(const Rot3& o) const { return from_matrix_unchecked(m_ * o.m_); }
    Rot3 transpose() const { return from_matrix_unchecked(m_.transpose()); }

private:
    Mat3 m_;
};

/// Geodesic angle between two rotations, in degrees.
inline double rotation_angle_deg(const Rot3& a, const Rot3& b) {
    const double c = ((a.matrix().transpose() * b.matrix()).trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0)) * (180.0 / M_PI);
}

/// Translation + rotation + per-axis scale, applied scale -> rotate -> translate.
struct Pose9DoF {
    Vec3 translation = Vec3::Zero();
    Rot3 rotation;
    Vec3 scale = Vec3::Ones();

    bool valid() const {
        return translation.allFinite() && scale.allFinite() &&
               (scale.array() > 0.0).all();
    }

    static Pose9DoF identity() { return {}; }
};

/// p -> R * (s .* p) + t for each point.
inline std::vector<Vec3> apply_pose(const Pose9DoF& pose, const std::vector<Vec3>& points) {
    if (!pose.valid()) {
        throw InvalidInput("apply_pose: pose violates invariants (scale must be positive and finite)");
    }
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3& p : points) {
        out.push_back(pose.rotation * (pose.scale.cwiseProduct(p)) + pose.translation);
    }
    return out;
}

inline Vec3 apply_pose(const Pose9DoF& pose, const Vec3& p) {
    return pose.rotation * (pose.scale.cwiseProduct(p)) + pose.translation;
}

/// Axis-aligned box, min <= max componentwise.
struct Aabb {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();

    static Aabb of_points(const std::vector<Vec3>& pts) {
        if (pts.empty()) {
            throw InvalidInput("Aabb::of_points: empty point list");
        }
        Aabb b{pts[0], pts[0]};
        for (const Vec3& p : pts) {
            b.min = b.min.cwiseMin(p);
            b.max = b.max.cwiseMax(p);
        }
        return b;
    }

    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extents() const { return max - min; }
    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
};

/// Grow a box by `margin` on every axis in both directions.
inline Aabb expand_box(const Aabb& box, double margin) {
    if (margin < 0.0 || !std::isfinite(margin)) {
        throw InvalidInput("expand_box: margin must be finite and >= 0");
    }
    return {box.min.array() - margin, box.max.array() + margin};
}

/// Interval intersection on all three axes; touching faces count as overlap.
inline bool boxes_overlap(const Aabb& a, const Aabb& b) {
    return (a.min.array() <= b.max.array()).all() &&
           (b.min.array() <= a.max.array()).all();
}

/// Oriented box. Local axes are the basis columns; column 2 is the object's
/// up direction. front_axis selects the front face among the basis columns.
struct Obb {
    Vec3 center = Vec3::Zero();
    Rot3 basis;
    Vec3 half_extents = Vec3::Ones();
    int front_axis = 0;    // 0..2
    int front_sign = 1;    // +1 or -1

    Vec3 front_vector() const {
        return static_cast<double>(front_sign) * basis.matrix().col(front_axis);
    }

    Vec3 axis(int i) const { return basis.matrix().col(i); }

    std::vector<Vec3> corners() const {
        std::vector<Vec3> out;
        out.reserve(8);
        for (int i = 0; i < 8; ++i) {
            const Vec3 sgn((i & 4) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 1) ? 1.0 : -1.0);
            out.push_back(center + basis * sgn.cwiseProduct(half_extents));
        }
        return out;
    }

    Aabb aabb() const { return Aabb::of_points(corners()); }
};

/// Dense scalar grid over an axis-aligned region. Values are stored
/// x-major: linear index = (ix * ny + iy) * nz + iz.
struct VoxelGrid {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 1.0;
    int nx = 0, ny = 0, nz = 0;
    std::vector<double> values;

    VoxelGrid() = default;
    VoxelGrid(const Vec3& origin_, double voxel_size_, int nx_, int ny_, int nz_)
        : origin(origin_), voxel_size(voxel_size_), nx(nx_), ny(ny_), nz(nz_),
          values(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0) {
        if (voxel_size_ <= 0.0 || nx_ <= 0 || ny_ <= 0 || nz_ <= 0) {
            throw InvalidInput("VoxelGrid: voxel_size and dims must be positive");
        }
    }

    std::size_t cell_count() const { return values.size(); }

    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * ny + iy) * nz + iz;
    }

    double& at(int ix, int iy, int iz) { return values[index(ix, iy, iz)]; }
    double at(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }

    bool in_bounds(int ix, int iy, int iz) const {
        return ix >= 0 && ix < nx && iy >= 0 && iy < ny && iz >= 0 && iz < nz;
    }

    /// Cell containing a point; boundary points belong to the floored index.
    Eigen::Vector3i cell_of(const Vec3& p) const {
        const Vec3 rel = (p - origin) / voxel_size;
        return {static_cast<int>(std::floor(rel.x())),
                static_cast<int>(std::floor(rel.y())),
                static_cast<int>(std::floor(rel.z()))};
    }

    Eigen::Vector3i clamped_cell_of(const Vec3& p) const {
        Eigen::Vector3i c = cell_of(p);
        c.x() = std::clamp(c.x(), 0, nx - 1);
        c.y() = std::clamp(c.y(), 0, ny - 1);
        c.z() = std::clamp(c.z(), 0, nz - 1);
        return c;
    }

    Vec3 cell_center(int ix, int iy, int iz) const {
        return origin + voxel_size * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
    }

    Vec3 min_corner() const { return origin; }
    Vec3 max_corner() const { return origin + voxel_size * Vec3(nx, ny, nz); }
    Aabb bounds() const { return {min_corner(), max_corner()}; }
};

/// Occupancy grid covering all points plus `padding` empty voxels per side.
inline VoxelGrid voxelize(const std::vector<Vec3>& points, double voxel_size, int padding = 0) {
    if (points.empty()) {
        throw InvalidInput("voxelize: empty point list");
    }
    if (voxel_size <= 0.0) {
        throw InvalidInput("voxelize: voxel_size must be positive");
    }
    if (padding < 0) {
        throw InvalidInput("voxelize: padding must be >= 0");
    }
    const Aabb b = Aabb::of_points(points);
    const Vec3 origin = b.min.array() - padding * voxel_size;
    const auto dim = [&](double lo, double hi) {
        return static_cast<int>(std::floor((hi - lo) / voxel_size)) + 1 + padding;
    };
    VoxelGrid g(origin, voxel_size,
                dim(origin.x(), b.max.x()), dim(origin.y(), b.max.y()), dim(origin.z(), b.max.z()));
    for (const Vec3& p : points) {
        const Eigen::Vector3i c = g.cell_of(p);
        g.at(c.x(), c.y(), c.z()) = 1.0;
    }
    return g;
}

/// Sub-grid of cells whose centers lie inside `region` (intersected with the
/// grid bounds). Returns an empty grid (dims 0) when nothing intersects.
inline VoxelGrid crop_grid(const VoxelGrid& g, const Aabb& region) {
    const auto lo_of = [&](double r, double o) {
        return static_cast<int>(std::ceil((r - o) / g.voxel_size - 0.5));
    };
    const auto hi_of = [&](double r, double o) {
        return static_cast<int>(std::floor((r - o) / g.voxel_size - 0.5));
    };
    int lx = std::max(0, lo_of(region.min.x(), g.origin.x()));
    int ly = std::max(0, lo_of(region.min.y(), g.origin.y()));
    int lz = std::max(0, lo_of(region.min.z(), g.origin.z()));
    int hx = std::min(g.nx - 1, hi_of(region.max.x(), g.origin.x()));
    int hy = std::min(g.ny - 1, hi_of(region.max.y(), g.origin.y()));
    int hz = std::min(g.nz - 1, hi_of(region.max.z(), g.origin.z()));
    if (lx > hx || ly > hy || lz > hz) {
        VoxelGrid empty;
        empty.voxel_size = g.voxel_size;
        return empty;
    }
    VoxelGrid out(g.origin + g.voxel_size * Vec3(lx, ly, lz), g.voxel_size,
                  hx - lx + 1, hy - ly + 1, hz - lz + 1);
    for (int ix = lx; ix <= hx; ++ix)
        for (int iy = ly; iy <= hy; ++iy)
            for (int iz = lz; iz <= hz; ++iz)
                out.at(ix - lx, iy - ly, iz - lz) = g.at(ix, iy, iz);
    return out;
}

}  // namespace scenecad::geom
