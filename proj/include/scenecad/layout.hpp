#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "scenecad/geom.hpp"
#include "scenecad/mlp.hpp"

namespace scenecad::layout {

using geom::Vec3;
using geom::VoxelGrid;
using Eigen::VectorXd;

/// Per-voxel feature channels standing in for a learned feature volume.
/// Values are stored cell-major: all channels of one cell are contiguous.
struct FeatureGrid {
    Vec3 origin = Vec3::Zero();
    double voxel_size = 1.0;
    int nx = 0, ny = 0, nz = 0;
    int channels = 0;
    std::vector<double> values;

    std::size_t cell_index(int ix, int iy, int iz) const {
        return ((static_cast<std::size_t>(ix) * ny + iy) * nz + iz) * channels;
    }

    VectorXd at_cell(int ix, int iy, int iz) const {
        VectorXd f(channels);
        const std::size_t base = cell_index(ix, iy, iz);
        for (int c = 0; c < channels; ++c) f[c] = values[base + c];
        return f;
    }

    /// Feature of the cell containing p (clamped to the grid).
    VectorXd at_point(const Vec3& p) const {
        const int ix = std::clamp(static_cast<int>(std::floor((p.x() - origin.x()) / voxel_size)), 0, nx - 1);
        const int iy = std::clamp(static_cast<int>(std::floor((p.y() - origin.y()) / voxel_size)), 0, ny - 1);
        const int iz = std::clamp(static_cast<int>(std::floor((p.z() - origin.z()) / voxel_size)), 0, nz - 1);
        return at_cell(ix, iy, iz);
    }

    Vec3 min_corner() const { return origin; }
    Vec3 max_corner() const { return origin + voxel_size * Vec3(nx, ny, nz); }

    /// Coordinate normalization to [0,1]^3 by the grid bounding box.
    Vec3 normalized(const Vec3& p) const {
        return (p - min_corner()).cwiseQuotient(max_corner() - min_corner());
    }
};

inline constexpr int kFeatureChannels = 5;
inline constexpr double kDistanceClampVoxels = 10.0;

namespace detail {

// 1D lower-envelope squared distance transform (Felzenszwalb-Huttenlocher).
inline void squared_dt_1d(const std::vector<double>& f, std::vector<double>& d,
                          std::vector<int>& v, std::vector<double>& z, int n) {
    constexpr double kInf = 1e20;
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
    }
}

}  // namespace detail

/// Deterministic hand-computed feature channels:
///   0       occupancy
///   1..3    mean occupancy over cube windows of half-width 1, 2, 3
///           (windows intersected with the grid; mean over the intersection)
///   4       Euclidean distance (in voxels) to the nearest occupied cell,
///           clamped at kDistanceClampVoxels
inline FeatureGrid compute_feature_grid(const VoxelGrid& occupancy) {
    const int nx = occupancy.nx, ny = occupancy.ny, nz = occupancy.nz;
    if (nx <= 0 || ny <= 0 || nz <= 0) {
        throw InvalidInput("compute_feature_grid: empty grid");
    }
    FeatureGrid fg;
    fg.origin = occupancy.origin;
    fg.voxel_size = occupancy.voxel_size;
    fg.nx = nx;
    fg.ny = ny;
    fg.nz = nz;
    fg.channels = kFeatureChannels;
    fg.values.assign(occupancy.cell_count() * kFeatureChannels, 0.0);

    // integral volume S[i][j][k] = sum over [0,i) x [0,j) x [0,k)
    const auto sidx = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(i) * (ny + 1) + j) * (nz + 1) + k;
    };
    std::vector<double> S(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1), 0.0);
    for (int i = 1; i <= nx; ++i)
        for (int j = 1; j <= ny; ++j)
            for (int k = 1; k <= nz; ++k)
                S[sidx(i, j, k)] = occupancy.at(i - 1, j - 1, k - 1)
                    + S[sidx(i - 1, j, k)] + S[sidx(i, j - 1, k)] + S[sidx(i, j, k - 1)]
                    - S[sidx(i - 1, j - 1, k)] - S[sidx(i - 1, j, k - 1)] - S[sidx(i, j - 1, k - 1)]
                    + S[sidx(i - 1, j - 1, k - 1)];
    const auto box_sum = [&](int x0, int y0, int z0, int x1, int y1, int z1) {
        // inclusive cell range
        return S[sidx(x1 + 1, y1 + 1, z1 + 1)] - S[sidx(x0, y1 + 1, z1 + 1)]
             - S[sidx(x1 + 1, y0, z1 + 1)] - S[sidx(x1 + 1, y1 + 1, z0)]
             + S[sidx(x0, y0, z1 + 1)] + S[sidx(x0, y1 + 1, z0)] + S[sidx(x1 + 1, y0, z0)]
             - S[sidx(x0, y0, z0)];
    };

    // squared distance field, transformed axis by axis
    constexpr double kInf = 1e20;
    std::vector<double> dist(occupancy.cell_count());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        dist[i] = occupancy.values[i] > 0.5 ? 0.0 : kInf;
    }
    const auto didx = [&](int i, int j, int k) {
        return (static_cast<std::size_t>(i) * ny + j) * nz + k;
    };
    {
        const int nmax = std::max({nx, ny, nz});
        std::vector<double> f(nmax), d(nmax), z(nmax + 1);
        std::vector<int> v(nmax);
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nz; ++k) {
                for (int i = 0; i < nx; ++i) f[i] = dist[didx(i, j, k)];
                detail::squared_dt_1d(f, d, v, z, nx);
                for (int i = 0; i < nx; ++i) dist[didx(i, j, k)] = d[i];
            }
        for (int i = 0; i < nx; ++i)
            for (int k = 0; k < nz; ++k) {
                for (int j = 0; j < ny; ++j) f[j] = dist[didx(i, j, k)];
                detail::squared_dt_1d(f, d, v, z, ny);
                for (int j = 0; j < ny; ++j) dist[didx(i, j, k)] = d[j];
            }
        for (int i = 0; i < nx; ++i)
            for (int j = 0; j < ny; ++j) {
                for (int k = 0; k < nz; ++k) f[k] = dist[didx(i, j, k)];
                detail::squared_dt_1d(f, d, v, z, nz);
                for (int k = 0; k < nz; ++k) dist[didx(i, j, k)] = d[k];
            }
    }

    static constexpr int kHalfWidths[3] = {1, 2, 3};
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nz; ++k) {
                const std::size_t base = fg.cell_index(i, j, k);
                fg.values[base + 0] = occupancy.at(i, j, k);
                for (int c = 0; c < 3; ++c) {
                    const int h = kHalfWidths[c];
                    const int x0 = std::max(0, i - h), x1 = std::min(nx - 1, i + h);
                    const int y0 = std::max(0, j - h), y1 = std::min(ny - 1, j + h);
                    const int z0 = std::max(0, k - h), z1 = std::min(nz - 1, k + h);
                    const double cnt = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1) * (z1 - z0 + 1);
                    fg.values[base + 1 + c] = box_sum(x0, y0, z0, x1, y1, z1) / cnt;
                }
                fg.values[base + 4] = std::min(std::sqrt(dist[didx(i, j, k)]), kDistanceClampVoxels);
            }
    return fg;
}

/// Detected corner positions (cell centers), sorted by descending score.
struct CornerSet {
    std::vector<Vec3> corners;
    std::vector<double> scores;

    std::size_t size() const { return corners.size(); }
};

/// Greedy non-maximum suppression over the heatmap.
///
/// A cell is a candidate if its value is >= threshold and strictly greater
/// than every other cell within Euclidean index distance <= radius_voxels.
/// Candidates sorted by descending score (ties by lexicographic cell index)
/// then greedily accepted unless within the radius of an accepted cell.
inline CornerSet nms_corners(const VoxelGrid& heatmap, double threshold, int radius_voxels) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw InvalidInput("nms_corners: threshold must be in (0,1)");
    }
    if (radius_voxels < 1) {
        throw InvalidInput("nms_corners: radius must be >= 1");
    }
    std::vector<Eigen::Vector3i> offsets;
    const int r = radius_voxels;
    for (int dx = -r; dx <= r; ++dx)
        for (int dy = -r; dy <= r; ++dy)
            for (int dz = -r; dz <= r; ++dz) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                if (dx * dx + dy * dy + dz * dz <= r * r) offsets.emplace_back(dx, dy, dz);
            }

    struct Candidate {
        double score;
        int ix, iy, iz;
    };
    std::vector<Candidate> cands;
    for (int ix = 0; ix < heatmap.nx; ++ix)
        for (int iy = 0; iy < heatmap.ny; ++iy)
            for (int iz = 0; iz < heatmap.nz; ++iz) {
                const double v = heatmap.at(ix, iy, iz);
                if (v < threshold) continue;
                bool is_max = true;
                for (const auto& o : offsets) {
                    const int x = ix + o.x(), y = iy + o.y(), z = iz + o.z();
                    if (heatmap.in_bounds(x, y, z) && heatmap.at(x, y, z) >= v) {
                        is_max = false;
                        break;
                    }
                }
                if (is_max) cands.push_back({v, ix, iy, iz});
            }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.ix, a.iy, a.iz) < std::tie(b.ix, b.iy, b.iz);
    });

    CornerSet out;
    std::vector<Candidate> accepted;
    for (const Candidate& c : cands) {
        bool suppressed = false;
        for (const Candidate& a : accepted) {
            const double dx = c.ix - a.ix, dy = c.iy - a.iy, dz = c.iz - a.iz;
            if (dx * dx + dy * dy + dz * dz <= static_cast<double>(r) * r) {
                suppressed = true;
                break;
            }
        }
        if (suppressed) continue;
        accepted.push_back(c);
        out.corners.push_back(heatmap.cell_center(c.ix, c.iy, c.iz));
        out.scores.push_back(c.score);
    }
    return out;
}

/// Unordered corner pair (stored i < j) with features for both orderings.
struct EdgeCandidate {
    int i = 0, j = 0;
    VectorXd feature_ij;
    VectorXd feature_ji;
    double score = 0.0;
};

inline VectorXd pair_feature(const FeatureGrid& fg, const Vec3& a, const Vec3& b) {
    const VectorXd fa = fg.at_point(a), fb = fg.at_point(b);
    const Vec3 na = fg.normalized(a), nb = fg.normalized(b);
    VectorXd f(2 * (fg.channels + 3));
    f << fa, fb, na, nb;
    return f;
}

/// All pairwise corner combinations with order-swapped feature descriptors.
inline std::vector<EdgeCandidate> enumerate_edges(const CornerSet& corners,
                                                  const FeatureGrid& features) {
    const int n = static_cast<int>(corners.size());
    if (n < 2) {
        throw InvalidInput("enumerate_edges: need at least 2 corners");
    }
    std::vector<EdgeCandidate> out;
    out.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            EdgeCandidate e;
            e.i = i;
            e.j = j;
            e.feature_ij = pair_feature(features, corners.corners[i], corners.corners[j]);
            e.feature_ji = pair_feature(features, corners.corners[j], corners.corners[i]);
            out.push_back(std::move(e));
        }
    return out;
}

/// Order-invariant edge scoring: mean sigmoid over the two orderings.
/// Returns the candidates with score >= threshold, scores filled in.
inline std::vector<EdgeCandidate> classify_edges(const std::vector<EdgeCandidate>& candidates,
                                                 const mpnn::MlpModel& model, double threshold) {
    std::vector<EdgeCandidate> kept;
    for (const EdgeCandidate& c : candidates) {
        if (c.feature_ij.size() != model.input_width()) {
            throw InvalidInput("classify_edges: model input width does not match feature length");
        }
        const double s_ij = mpnn::sigmoid(mpnn::mlp_forward(model, c.feature_ij)[0]);
        const double s_ji = mpnn::sigmoid(mpnn::mlp_forward(model, c.feature_ji)[0]);
        const double score = (s_ij + s_ji) / 2.0;
        if (score >= threshold) {
            EdgeCandidate e = c;
            e.score = score;
            kept.push_back(std::move(e));
        }
    }
    return kept;
}

/// 4-cycle of corner indices in canonical order: lowest index first, then its
/// lower-indexed cycle neighbor.
struct QuadCandidate {
    std::array<int, 4> corners{};
    double planarity_residual = 0.0;
    std::array<VectorXd, 4> features;  // cyclic permutations ijkl, jkli, klij, lijk
    double score = 0.0;
};

inline std::array<int, 4> canonical_quad(const std::array<int, 4>& q) {
    int p = 0;
    for (int k = 1; k < 4; ++k) {
        if (q[k] < q[p]) p = k;
    }
    const std::array<int, 4> fwd{q[p], q[(p + 1) % 4], q[(p + 2) % 4], q[(p + 3) % 4]};
    const std::array<int, 4> bwd{q[p], q[(p + 3) % 4], q[(p + 2) % 4], q[(p + 1) % 4]};
    return fwd[1] < bwd[1] ? fwd : bwd;
}

/// Unit normal of the least-squares plane through four corners, sign-fixed
/// so the largest-magnitude component is positive.
inline Vec3 quad_plane_normal(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 m = 0.25 * (a + b + c + d);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3* p : {&a, &b, &c, &d}) {
        const Vec3 r = *p - m;
        cov += r * r.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    Vec3 n = es.eigenvectors().col(0);  // smallest eigenvalue
    int big = 0;
    for (int k = 1; k < 3; ++k) {
        if (std::abs(n[k]) > std::abs(n[big])) big = k;
    }
    if (n[big] < 0.0) n = -n;
    return n.normalized();
}

/// Max distance of the four corners to their least-squares plane.
inline double quad_planarity_residual(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 m = 0.25 * (a + b + c + d);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3* p : {&a, &b, &c, &d}) {
        const Vec3 r = *p - m;
        cov += r * r.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Vec3 n = es.eigenvectors().col(0);  // smallest eigenvalue
    double worst = 0.0;
    for (const Vec3* p : {&a, &b, &c, &d}) {
        worst = std::max(worst, std::abs(n.dot(*p - m)));
    }
    return worst;
}

/// Every simple 4-cycle of the edge graph, found by depth-limited DFS from
/// each start vertex, each cycle reported once in canonical order. Cycles
/// whose corners deviate from their least-squares plane by more than
/// planarity_tol are dropped. Features are left empty; see
/// attach_quad_features.
inline std::vector<QuadCandidate> find_planar_quads(const std::vector<Vec3>& corners,
                                                    const std::vector<std::pair<int, int>>& edges,
                                                    double planarity_tol) {
    const int n = static_cast<int>(corners.size());
    std::vector<std::vector<int>> adj(n);
    std::vector<bool> adj_matrix(static_cast<std::size_t>(n) * n, false);
    for (const auto& [i, j] : edges) {
        if (i < 0 || j < 0 || i >= n || j >= n || i == j) {
            throw InvalidInput("find_planar_quads: edge references invalid corner index");
        }
        if (adj_matrix[static_cast<std::size_t>(i) * n + j]) continue;
        adj_matrix[static_cast<std::size_t>(i) * n + j] = true;
        adj_matrix[static_cast<std::size_t>(j) * n + i] = true;
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    for (auto& a : adj) std::sort(a.begin(), a.end());

    std::vector<QuadCandidate> out;
    // DFS paths s -> a -> b -> c with all of a,b,c > s and edge c-s closing
    // the cycle; a < c picks one traversal direction per cycle.
    for (int s = 0; s < n; ++s) {
        for (int a : adj[s]) {
            if (a <= s) continue;
            for (int b : adj[a]) {
                if (b <= s || b == a) continue;
                for (int c : adj[b]) {
                    if (c <= s || c == a || c <= a) continue;
                    if (!adj_matrix[static_cast<std::size_t>(c) * n + s]) continue;
                    const double residual = quad_planarity_residual(
                        corners[s], corners[a], corners[b], corners[c]);
                    if (residual > planarity_tol) continue;
                    QuadCandidate q;
                    q.corners = {s, a, b, c};
                    q.planarity_residual = residual;
                    out.push_back(std::move(q));
                }
            }
        }
    }
    return out;
}

inline std::vector<QuadCandidate> find_planar_quads(const CornerSet& corners,
                                                    const std::vector<EdgeCandidate>& edges,
                                                    double planarity_tol) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(edges.size());
    for (const EdgeCandidate& e : edges) pairs.emplace_back(e.i, e.j);
    return find_planar_quads(corners.corners, pairs, planarity_tol);
}

inline VectorXd quad_feature(const FeatureGrid& fg, const Vec3& a, const Vec3& b,
                             const Vec3& c, const Vec3& d) {
    VectorXd f(4 * (fg.channels + 3));
    f << fg.at_point(a), fg.at_point(b), fg.at_point(c), fg.at_point(d),
        fg.normalized(a), fg.normalized(b), fg.normalized(c), fg.normalized(d);
    return f;
}

/// Fill in the four cyclic-permutation feature descriptors of each quad.
inline void attach_quad_features(std::vector<QuadCandidate>& quads,
                                 const std::vector<Vec3>& corners, const FeatureGrid& fg) {
    for (QuadCandidate& q : quads) {
        for (int k = 0; k < 4; ++k) {
            q.features[k] = quad_feature(fg,
                                         corners[q.corners[k]],
                                         corners[q.corners[(k + 1) % 4]],
                                         corners[q.corners[(k + 2) % 4]],
                                         corners[q.corners[(k + 3) % 4]]);
        }
    }
}

/// Cyclic-order-invariant quad scoring: mean sigmoid over the four cyclic
/// permutations, summed starting from the lowest corner index so that the
/// result is bitwise identical under cyclic relabeling.
inline std::vector<QuadCandidate> classify_quads(const std::vector<QuadCandidate>& candidates,
                                                 const mpnn::MlpModel& model, double threshold) {
    std::vector<QuadCandidate> kept;
    for (const QuadCandidate& q : candidates) {
        if (q.features[0].size() != model.input_width()) {
            throw InvalidInput("classify_quads: model input width does not match feature length");
        }
        int start = 0;
        for (int k = 1; k < 4; ++k) {
            if (q.corners[k] < q.corners[start]) start = k;
        }
        double sum = 0.0;
        for (int k = 0; k < 4; ++k) {
            sum += mpnn::sigmoid(mpnn::mlp_forward(model, q.features[(start + k) % 4])[0]);
        }
        const double score = sum / 4.0;
        if (score >= threshold) {
            QuadCandidate out = q;
            out.score = score;
            kept.push_back(std::move(out));
        }
    }
    return kept;
}

/// Corner/edge/quad summary of a layout, the unit both the metrics and the
/// scene format consume.
struct LayoutGraph {
    std::vector<Vec3> corners;
    std::vector<std::pair<int, int>> edges;   // i < j
    std::vector<std::array<int, 4>> quads;    // canonical order

    void add_edge(int i, int j) {
        edges.emplace_back(std::min(i, j), std::max(i, j));
    }
    void add_quad(const std::array<int, 4>& q) { quads.push_back(canonical_quad(q)); }

    std::array<Vec3, 4> quad_positions(std::size_t qi) const {
        const auto& q = quads[qi];
        return {corners[q[0]], corners[q[1]], corners[q[2]], corners[q[3]]};
    }
};

/// Corner positions of every quad in the graph.
inline std::vector<std::array<Vec3, 4>> quad_corner_positions(const LayoutGraph& g) {
    std::vector<std::array<Vec3, 4>> out;
    out.reserve(g.quads.size());
    for (std::size_t i = 0; i < g.quads.size(); ++i) out.push_back(g.quad_positions(i));
    return out;
}

}  // namespace scenecad::layout
