#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scenecad/geom.hpp"

namespace scenecad::align {

using geom::Mat3;
using geom::Pose9DoF;
using geom::Rot3;
using geom::Vec3;
using geom::VoxelGrid;
using Eigen::VectorXd;

inline constexpr int kDescriptorEdge = 8;
inline constexpr int kDescriptorSize = kDescriptorEdge * kDescriptorEdge * kDescriptorEdge;

/// Matched point pairs, source[i] <-> target[i], optionally weighted.
/// Empty weights means uniform.
struct CorrespondenceSet {
    std::vector<Vec3> source;
    std::vector<Vec3> target;
    std::vector<double> weights;

    std::size_t size() const { return source.size(); }

    void validate() const {
        if (source.size() != target.size()) {
            throw InvalidInput("correspondences: source/target size mismatch");
        }
        if (!weights.empty() && weights.size() != source.size()) {
            throw InvalidInput("correspondences: weight count mismatch");
        }
        for (double w : weights) {
            if (!(w > 0.0) || !std::isfinite(w)) {
                throw InvalidInput("correspondences: weights must be positive and finite");
            }
        }
    }

    double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
};

namespace detail {

inline int matrix_rank(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m);
    const auto& sv = svd.singularValues();
    const double tol = std::max(sv[0] * 1e-9, 1e-12);
    int rank = 0;
    for (int i = 0; i < 3; ++i) {
        if (sv[i] > tol) ++rank;
    }
    return rank;
}

/// Nearest proper rotation to m (polar projection via SVD with a
/// determinant-correcting sign flip on the last left singular vector).
inline Mat3 project_to_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    if ((u * v.transpose()).determinant() < 0.0) {
        u.col(2) *= -1.0;
    }
    return u * v.transpose();
}

}  // namespace detail

/// Rotation R minimizing sum_i w_i |R q_i - p_i|^2 over proper rotations
/// (orthogonal Procrustes with determinant correction). Inputs are used as
/// given; center them beforehand if a translation is also unknown.
/// Throws NumericalError carrying the rank when the weighted cross-covariance
/// has rank < 2 (the minimizer is not unique).
inline Rot3 procrustes_rotation(const CorrespondenceSet& pairs) {
    pairs.validate();
    if (pairs.size() < 2) {
        throw InvalidInput("procrustes_rotation: need at least 2 correspondences");
    }
    Mat3 h = Mat3::Zero();  // sum of w * q * p^T
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        h += pairs.weight(i) * pairs.source[i] * pairs.target[i].transpose();
    }
    const int rank = detail::matrix_rank(h);
    if (rank < 2) {
        throw NumericalError("procrustes_rotation: cross-covariance rank " +
                                 std::to_string(rank) + " < 2, rotation not unique",
                             rank);
    }
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 v = svd.matrixV();
    const Mat3 u = svd.matrixU();
    if ((v * u.transpose()).determinant() < 0.0) {
        v.col(2) *= -1.0;
    }
    return Rot3::from_matrix_unchecked(v * u.transpose());
}

inline Rot3 procrustes_rotation(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                                const std::vector<double>& weights = {}) {
    return procrustes_rotation(CorrespondenceSet{source, target, weights});
}

/// 9-DoF similarity fit: the pose (t, R, s) minimizing
/// sum_i w_i |R (s .* q_i) + t - p_i|^2 with per-axis scales applied in the
/// source frame.
///
/// Translation decouples at the weighted centroids. The rotation/scale block
/// starts from the unconstrained linear map L = argmin sum w |L q~ - p~|^2,
/// split as L = R diag(s) (column norms give s, polar projection gives R),
/// which is exact on noiseless data; one alternating refinement pass
/// (per-axis least-squares scale given R, then Procrustes given s) follows.
///
/// Throws NumericalError carrying the rank when the centered source points
/// span fewer than 3 dimensions (some axis scale is unobservable).
inline Pose9DoF estimate_pose(const CorrespondenceSet& pairs) {
    pairs.validate();
    if (pairs.size() < 4) {
        throw InvalidInput("estimate_pose: need at least 4 correspondences");
    }
    double wsum = 0.0;
    Vec3 q_bar = Vec3::Zero(), p_bar = Vec3::Zero();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double w = pairs.weight(i);
        wsum += w;
        q_bar += w * pairs.source[i];
        p_bar += w * pairs.target[i];
    }
    q_bar /= wsum;
    p_bar /= wsum;

    Mat3 cross = Mat3::Zero();  // sum w * p~ * q~^T
    Mat3 qq = Mat3::Zero();     // sum w * q~ * q~^T
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double w = pairs.weight(i);
        const Vec3 qt = pairs.source[i] - q_bar;
        const Vec3 pt = pairs.target[i] - p_bar;
        cross += w * pt * qt.transpose();
        qq += w * qt * qt.transpose();
    }
    const int rank = detail::matrix_rank(qq);
    if (rank < 3) {
        throw NumericalError("estimate_pose: source points span only " + std::to_string(rank) +
                                 " dimensions, per-axis scale unobservable",
                             rank);
    }
    const Mat3 lin = cross * qq.inverse();

    Vec3 scale;
    Mat3 dirs;
    for (int k = 0; k < 3; ++k) {
        scale[k] = lin.col(k).norm();
        if (!(scale[k] > 0.0) || !std::isfinite(scale[k])) {
            throw NumericalError("estimate_pose: degenerate scale on axis " + std::to_string(k),
                                 rank);
        }
        dirs.col(k) = lin.col(k) / scale[k];
    }
    Mat3 rot = detail::project_to_rotation(dirs);

    // one refinement pass: per-axis scale given the rotation, then rotation
    // given the scale
    Vec3 num = Vec3::Zero(), den = Vec3::Zero();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double w = pairs.weight(i);
        const Vec3 qt = pairs.source[i] - q_bar;
        const Vec3 rp = rot.transpose() * (pairs.target[i] - p_bar);
        num += w * qt.cwiseProduct(rp);
        den += w * qt.cwiseProduct(qt);
    }
    for (int k = 0; k < 3; ++k) {
        const double s = num[k] / den[k];
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw NumericalError("estimate_pose: refinement produced non-positive scale on axis " +
                                     std::to_string(k),
                                 rank);
        }
        scale[k] = s;
    }
    CorrespondenceSet scaled;
    scaled.source.reserve(pairs.size());
    scaled.target.reserve(pairs.size());
    scaled.weights = pairs.weights;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        scaled.source.push_back((pairs.source[i] - q_bar).cwiseProduct(scale));
        scaled.target.push_back(pairs.target[i] - p_bar);
    }
    rot = procrustes_rotation(scaled).matrix();

    Pose9DoF pose;
    pose.rotation = Rot3::from_matrix_unchecked(rot);
    pose.scale = scale;
    pose.translation = p_bar - rot * scale.cwiseProduct(q_bar);
    return pose;
}

inline Pose9DoF estimate_pose(const std::vector<Vec3>& source, const std::vector<Vec3>& target,
                              const std::vector<double>& weights = {}) {
    return estimate_pose(CorrespondenceSet{source, target, weights});
}

/// Shape descriptor: the tight bounding subregion of occupied cells is
/// max-pooled onto an 8x8x8 grid (adaptive partition, every output bin covers
/// at least one cell) and flattened x-major. Entries stay in [0,1].
inline VectorXd compute_descriptor(const VoxelGrid& grid) {
    int lo[3] = {grid.nx, grid.ny, grid.nz};
    int hi[3] = {-1, -1, -1};
    for (int ix = 0; ix < grid.nx; ++ix)
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int iz = 0; iz < grid.nz; ++iz) {
                if (grid.at(ix, iy, iz) <= 0.5) continue;
                const int idx[3] = {ix, iy, iz};
                for (int a = 0; a < 3; ++a) {
                    lo[a] = std::min(lo[a], idx[a]);
                    hi[a] = std::max(hi[a], idx[a]);
                }
            }
    if (hi[0] < 0) {
        throw InvalidInput("compute_descriptor: grid has no occupied cells");
    }
    const int dims[3] = {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
    const auto bin_range = [](int b, int n, int& start, int& end) {
        start = (b * n) / kDescriptorEdge;
        end = ((b + 1) * n + kDescriptorEdge - 1) / kDescriptorEdge;  // ceil
        end = std::max(end, start + 1);
    };
    VectorXd d(kDescriptorSize);
    for (int bx = 0; bx < kDescriptorEdge; ++bx) {
        int x0, x1;
        bin_range(bx, dims[0], x0, x1);
        for (int by = 0; by < kDescriptorEdge; ++by) {
            int y0, y1;
            bin_range(by, dims[1], y0, y1);
            for (int bz = 0; bz < kDescriptorEdge; ++bz) {
                int z0, z1;
                bin_range(bz, dims[2], z0, z1);
                double m = 0.0;
                for (int ix = x0; ix < x1; ++ix)
                    for (int iy = y0; iy < y1; ++iy)
                        for (int iz = z0; iz < z1; ++iz)
                            m = std::max(m, grid.at(lo[0] + ix, lo[1] + iy, lo[2] + iz));
                d[(bx * kDescriptorEdge + by) * kDescriptorEdge + bz] = std::clamp(m, 0.0, 1.0);
            }
        }
    }
    return d;
}

/// One retrievable shape: canonical-frame surface points plus the
/// precomputed descriptor of their voxelization.
struct CadModel {
    std::string model_id;
    std::string category;
    VectorXd descriptor;
    std::vector<Vec3> points;
};

struct CadDatabase {
    std::vector<CadModel> models;

    void add(CadModel model) {
        if (model.descriptor.size() != kDescriptorSize) {
            throw InvalidInput("cad database: descriptor for '" + model.model_id + "' has " +
                               std::to_string(model.descriptor.size()) + " entries, expected " +
                               std::to_string(kDescriptorSize));
        }
        for (const CadModel& m : models) {
            if (m.model_id == model.model_id) {
                throw InvalidInput("cad database: duplicate model_id '" + model.model_id + "'");
            }
        }
        models.push_back(std::move(model));
    }

    const CadModel* find(const std::string& model_id) const {
        for (const CadModel& m : models) {
            if (m.model_id == model_id) return &m;
        }
        return nullptr;
    }
};

struct RetrievalResult {
    int index = -1;       // position in database.models
    double distance = 0;  // L1 descriptor distance
};

/// Nearest model by L1 descriptor distance; ties go to the lexicographically
/// smallest model_id. An empty category string matches every category.
inline RetrievalResult retrieve_cad(const CadDatabase& db, const VectorXd& descriptor,
                                    const std::string& category = {}) {
    if (descriptor.size() != kDescriptorSize) {
        throw InvalidInput("retrieve_cad: query descriptor has wrong length");
    }
    RetrievalResult best;
    for (int i = 0; i < static_cast<int>(db.models.size()); ++i) {
        const CadModel& m = db.models[i];
        if (!category.empty() && m.category != category) continue;
        const double dist = (m.descriptor - descriptor).cwiseAbs().sum();
        if (best.index < 0 || dist < best.distance ||
            (dist == best.distance && m.model_id < db.models[best.index].model_id)) {
            best.index = i;
            best.distance = dist;
        }
    }
    if (best.index < 0) {
        throw InvalidInput(category.empty()
                               ? std::string("retrieve_cad: database is empty")
                               : "retrieve_cad: no models in category '" + category + "'");
    }
    return best;
}

}  // namespace scenecad::align
