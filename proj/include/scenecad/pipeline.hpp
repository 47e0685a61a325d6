#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "scenecad/align.hpp"
#include "scenecad/config.hpp"
#include "scenecad/datagen.hpp"
#include "scenecad/geom.hpp"
#include "scenecad/layout.hpp"
#include "scenecad/metrics.hpp"
#include "scenecad/mlp.hpp"
#include "scenecad/mpnn.hpp"
#include "scenecad/relations.hpp"
#include "scenecad/scene_io.hpp"

namespace scenecad::pipeline {

using geom::Vec3;
using geom::VoxelGrid;

/// Oracle mode replaces the learned edge/quad classifiers with ground-truth
/// lookups (detected corners snapped to their nearest true corner); model
/// mode runs the trained networks.
enum class ClassifierMode { Oracle, Model };

inline ClassifierMode classifier_mode_from_string(const std::string& s) {
    if (s == "oracle") return ClassifierMode::Oracle;
    if (s == "model") return ClassifierMode::Model;
    throw InvalidInput("classifier mode must be 'oracle' or 'model', got '" + s + "'");
}

/// Nearest reference corner within `radius` for each detected corner
/// (-1 when none qualifies). Not forced one-to-one: suppression already
/// keeps detections farther apart than any sane radius.
inline std::vector<int> match_corners_to_reference(const std::vector<Vec3>& detected,
                                                   const std::vector<Vec3>& reference,
                                                   double radius) {
    if (!(radius > 0.0)) {
        throw InvalidInput("match_corners_to_reference: radius must be positive");
    }
    std::vector<int> map(detected.size(), -1);
    for (std::size_t i = 0; i < detected.size(); ++i) {
        double best = radius;
        for (std::size_t r = 0; r < reference.size(); ++r) {
            const double d = (detected[i] - reference[r]).norm();
            if (d <= best) {
                best = d;
                map[i] = static_cast<int>(r);
            }
        }
    }
    return map;
}

/// Ground-truth membership tests over detected corner indices.
struct OracleLayout {
    std::vector<int> corner_map;  // detected index -> true corner index or -1
    std::set<std::pair<int, int>> edges;
    std::set<std::array<int, 4>> quads;

    OracleLayout(const std::vector<Vec3>& detected, const layout::LayoutGraph& gt,
                 double radius) {
        corner_map = match_corners_to_reference(detected, gt.corners, radius);
        edges.insert(gt.edges.begin(), gt.edges.end());
        quads.insert(gt.quads.begin(), gt.quads.end());  // stored canonical
    }

    bool edge_ok(int i, int j) const {
        const int a = corner_map[i], b = corner_map[j];
        if (a < 0 || b < 0 || a == b) return false;
        return edges.count({std::min(a, b), std::max(a, b)}) > 0;
    }

    bool quad_ok(const std::array<int, 4>& q) const {
        std::array<int, 4> m;
        for (int k = 0; k < 4; ++k) {
            m[k] = corner_map[q[k]];
            if (m[k] < 0) return false;
        }
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                if (m[a] == m[b]) return false;
            }
        }
        return quads.count(layout::canonical_quad(m)) > 0;
    }
};

// ---------------------------------------------------------------------------
// layout stage
// ---------------------------------------------------------------------------

struct LayoutResult {
    VoxelGrid heatmap;
    layout::CornerSet corners;
    std::vector<layout::EdgeCandidate> edges;  // kept candidates
    std::vector<layout::QuadCandidate> quads;  // kept candidates
    layout::LayoutGraph graph;                 // detected positions + kept topology
};

/// Heatmap -> suppression -> edge candidates -> planar 4-cycles, with either
/// the learned classifiers or the ground-truth oracle deciding what to keep.
/// `features` is only needed in model mode (classifier inputs).
inline LayoutResult extract_layout(const datagen::Scene& scene,
                                   const config::PipelineConfig& cfg, ClassifierMode mode,
                                   const io::ModelSet* models = nullptr,
                                   const layout::FeatureGrid* features = nullptr) {
    if (mode == ClassifierMode::Model && (models == nullptr || features == nullptr)) {
        throw InvalidInput("extract_layout: model mode needs trained models and a feature grid");
    }
    LayoutResult out;
    out.heatmap = datagen::synthesize_heatmap(scene.corner_observations, scene.occupancy,
                                              cfg.heatmap_sigma);
    out.corners = layout::nms_corners(out.heatmap, cfg.nms_threshold, cfg.nms_radius);
    out.graph.corners = out.corners.corners;
    const int n = static_cast<int>(out.corners.size());
    if (n < 2) return out;

    std::optional<OracleLayout> oracle;
    if (mode == ClassifierMode::Oracle) {
        oracle.emplace(out.corners.corners, scene.gt_layout, cfg.oracle_match_radius);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (oracle->edge_ok(i, j)) {
                    out.edges.push_back({i, j, {}, {}, 1.0});
                }
            }
        }
    } else {
        const auto candidates = layout::enumerate_edges(out.corners, *features);
        out.edges = layout::classify_edges(candidates, models->edge_classifier,
                                           cfg.edge_threshold);
    }
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(out.edges.size());
    for (const layout::EdgeCandidate& e : out.edges) {
        out.graph.add_edge(e.i, e.j);
        pairs.emplace_back(e.i, e.j);
    }

    std::vector<layout::QuadCandidate> quads =
        layout::find_planar_quads(out.corners.corners, pairs, cfg.planarity_tol);
    if (mode == ClassifierMode::Model) {
        layout::attach_quad_features(quads, out.corners.corners, *features);
        out.quads = layout::classify_quads(quads, models->quad_classifier, cfg.quad_threshold);
    } else {
        for (layout::QuadCandidate& q : quads) {
            if (oracle->quad_ok(q.corners)) {
                q.score = 1.0;
                out.quads.push_back(q);
            }
        }
    }
    for (const layout::QuadCandidate& q : out.quads) {
        out.graph.add_quad(q.corners);
    }
    return out;
}

// ---------------------------------------------------------------------------
// alignment stage
// ---------------------------------------------------------------------------

/// Shape descriptor of the occupied cells inside an oriented box, expressed
/// in the box's own frame so retrieval is invariant to the object's yaw.
/// Empty evidence (everything dropped out) yields nullopt.
inline std::optional<Eigen::VectorXd> object_descriptor(const VoxelGrid& occupancy,
                                                        const geom::Obb& box) {
    const geom::Mat3 to_local = box.basis.matrix().transpose();
    const Vec3 slack = box.half_extents + Vec3::Constant(0.5 * occupancy.voxel_size);
    const geom::Aabb bounds = box.aabb();
    const Eigen::Vector3i lo = occupancy.clamped_cell_of(bounds.min);
    const Eigen::Vector3i hi = occupancy.clamped_cell_of(bounds.max);
    std::vector<Vec3> local;
    for (int ix = lo.x(); ix <= hi.x(); ++ix) {
        for (int iy = lo.y(); iy <= hi.y(); ++iy) {
            for (int iz = lo.z(); iz <= hi.z(); ++iz) {
                if (occupancy.at(ix, iy, iz) <= 0.5) continue;
                const Vec3 l = to_local * (occupancy.cell_center(ix, iy, iz) - box.center);
                if ((l.cwiseAbs().array() <= slack.array()).all()) {
                    local.push_back(l);
                }
            }
        }
    }
    if (local.empty()) return std::nullopt;
    const double voxel = std::max(box.half_extents.maxCoeff() / 16.0, 1e-6);
    return align::compute_descriptor(geom::voxelize(local, voxel, 0));
}

struct ObjectAlignment {
    metrics::AlignedObject aligned;  // category, estimated pose, retrieved model id
    bool retrieval_attempted = false;
    bool retrieval_correct = false;
};

/// Pose estimation from each object's scan correspondences plus (optional)
/// shape retrieval from the occupancy evidence inside its box.
inline std::vector<ObjectAlignment> align_scene_objects(const datagen::Scene& scene,
                                                        const align::CadDatabase* db) {
    std::vector<ObjectAlignment> out;
    out.reserve(scene.objects.size());
    for (const datagen::PlacedObject& obj : scene.objects) {
        ObjectAlignment oa;
        oa.aligned.category = obj.category;
        oa.aligned.pose = align::estimate_pose(obj.correspondences);
        if (db != nullptr) {
            const auto desc = object_descriptor(scene.occupancy, obj.obb);
            if (desc) {
                const align::RetrievalResult res = align::retrieve_cad(*db, *desc);
                oa.aligned.model_id = db->models[res.index].model_id;
                oa.retrieval_attempted = true;
                oa.retrieval_correct = oa.aligned.model_id == obj.model_id;
            }
        }
        out.push_back(std::move(oa));
    }
    return out;
}

inline std::vector<metrics::AlignedObject> gt_aligned_objects(const datagen::Scene& scene) {
    std::vector<metrics::AlignedObject> out;
    out.reserve(scene.objects.size());
    for (const datagen::PlacedObject& obj : scene.objects) {
        out.push_back({obj.category, obj.pose, obj.model_id});
    }
    return out;
}

// ---------------------------------------------------------------------------
// relation stage
// ---------------------------------------------------------------------------

inline relations::SceneGraph make_relation_graph(const datagen::Scene& scene,
                                                 const layout::FeatureGrid& features,
                                                 const config::PipelineConfig& cfg,
                                                 bool with_labels = true) {
    relations::SceneGraph graph = relations::build_scene_graph(
        scene.object_boxes(), layout::quad_corner_positions(scene.gt_layout), features,
        cfg.pool_margin);
    if (with_labels) {
        relations::attach_relation_labels(graph, scene.gt_relations);
    }
    return graph;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

struct TrainingData {
    std::vector<mpnn::Sample> edge_samples;
    std::vector<mpnn::Sample> quad_samples;
    std::vector<relations::SceneGraph> graphs;
};

/// Cap on non-quad 4-cycles harvested per scene; rooms with many coplanar
/// corners would otherwise swamp the positives.
inline constexpr int kQuadNegativeCap = 64;

/// Ground-truth-labeled classifier samples plus labeled relation graphs.
/// Edge candidates contribute both direction-ordered features; quads all
/// four cyclic rotations. Quad negatives come from planar 4-cycles of the
/// complete graph on detected corners — a superset of whatever cycles leaked
/// edges could produce at inference time.
inline TrainingData collect_training_data(const std::vector<datagen::Scene>& scenes,
                                          const config::PipelineConfig& cfg) {
    cfg.validate();
    TrainingData data;
    for (const datagen::Scene& scene : scenes) {
        const layout::FeatureGrid features = layout::compute_feature_grid(scene.occupancy);
        const VoxelGrid heatmap = datagen::synthesize_heatmap(
            scene.corner_observations, scene.occupancy, cfg.heatmap_sigma);
        const layout::CornerSet corners =
            layout::nms_corners(heatmap, cfg.nms_threshold, cfg.nms_radius);
        const int n = static_cast<int>(corners.size());
        if (n >= 2) {
            const OracleLayout oracle(corners.corners, scene.gt_layout,
                                      cfg.oracle_match_radius);
            for (const layout::EdgeCandidate& c : layout::enumerate_edges(corners, features)) {
                const int label = oracle.edge_ok(c.i, c.j) ? 1 : 0;
                data.edge_samples.push_back({c.feature_ij, label});
                data.edge_samples.push_back({c.feature_ji, label});
            }
            if (n >= 4) {
                std::vector<std::pair<int, int>> all_pairs;
                for (int i = 0; i < n; ++i) {
                    for (int j = i + 1; j < n; ++j) all_pairs.emplace_back(i, j);
                }
                std::vector<layout::QuadCandidate> quads =
                    layout::find_planar_quads(corners.corners, all_pairs, cfg.planarity_tol);
                layout::attach_quad_features(quads, corners.corners, features);
                std::vector<const layout::QuadCandidate*> negatives;
                for (const layout::QuadCandidate& q : quads) {
                    if (oracle.quad_ok(q.corners)) {
                        for (int k = 0; k < 4; ++k) data.quad_samples.push_back({q.features[k], 1});
                    } else {
                        negatives.push_back(&q);
                    }
                }
                Rng neg_rng(scene.seed ^ 0x9d2c5680ULL);
                const std::size_t keep =
                    std::min<std::size_t>(negatives.size(), kQuadNegativeCap);
                for (std::size_t i = 0; i < keep; ++i) {
                    const std::size_t j = i + neg_rng.uniform_int(negatives.size() - i);
                    std::swap(negatives[i], negatives[j]);
                    for (int k = 0; k < 4; ++k) {
                        data.quad_samples.push_back({negatives[i]->features[k], 0});
                    }
                }
            }
        }
        data.graphs.push_back(make_relation_graph(scene, features, cfg));
    }
    return data;
}

struct TrainingSummary {
    mpnn::TrainLog edge_log, quad_log;
    mpnn::RelationTrainLog relation_log;
    std::size_t edge_samples = 0, quad_samples = 0, graph_count = 0;
};

/// Train all networks from scratch on ground-truth-labeled scenes. The
/// holdout split only feeds the per-epoch accuracy logs.
inline io::ModelSet train_pipeline(const std::vector<datagen::Scene>& train_scenes,
                                   const std::vector<datagen::Scene>& holdout_scenes,
                                   const config::PipelineConfig& cfg,
                                   TrainingSummary* summary = nullptr) {
    cfg.validate();
    const TrainingData train = collect_training_data(train_scenes, cfg);
    const TrainingData holdout =
        holdout_scenes.empty() ? TrainingData{} : collect_training_data(holdout_scenes, cfg);
    if (train.edge_samples.empty() || train.quad_samples.empty()) {
        throw DataError("train_pipeline: training scenes produced no layout candidates");
    }
    io::ModelSet models;
    Rng rng(cfg.model_seed);
    const int pair_dim = static_cast<int>(train.edge_samples[0].x.size());
    const int quad_dim = static_cast<int>(train.quad_samples[0].x.size());
    models.edge_classifier = mpnn::MlpModel({pair_dim, 128, 128, 1}, rng);
    models.quad_classifier = mpnn::MlpModel({quad_dim, 128, 128, 1}, rng);
    models.relation = mpnn::make_relation_models(rng.raw(), relations::kNodeFeatureDim,
                                                 cfg.relations.bin_count);
    const mpnn::TrainLog edge_log =
        mpnn::train_classifier(models.edge_classifier, train.edge_samples,
                               holdout.edge_samples, mpnn::LossKind::BinaryCrossEntropy,
                               cfg.train);
    const mpnn::TrainLog quad_log =
        mpnn::train_classifier(models.quad_classifier, train.quad_samples,
                               holdout.quad_samples, mpnn::LossKind::BinaryCrossEntropy,
                               cfg.train);
    const mpnn::RelationTrainLog rel_log = mpnn::train_relations(
        models.relation, train.graphs, holdout.graphs, cfg.train, cfg.message_steps);
    if (summary != nullptr) {
        summary->edge_log = edge_log;
        summary->quad_log = quad_log;
        summary->relation_log = rel_log;
        summary->edge_samples = train.edge_samples.size();
        summary->quad_samples = train.quad_samples.size();
        summary->graph_count = train.graphs.size();
    }
    return models;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

struct BenchmarkReport {
    int scene_count = 0;
    metrics::LayoutReport layout;
    metrics::AlignmentReport alignment;
    double support_accuracy = std::numeric_limits<double>::quiet_NaN();
    double angle_accuracy = std::numeric_limits<double>::quiet_NaN();
    int support_total = 0;
    int angle_total = 0;
    double retrieval_accuracy = std::numeric_limits<double>::quiet_NaN();
    int retrieval_correct = 0;
    int retrieval_attempted = 0;
};

namespace detail {

/// Rule-based relation check: rerun the extractor and score it against the
/// stored labels pair by pair.
inline void count_rule_relations(const datagen::Scene& scene,
                                 const config::PipelineConfig& cfg, int& support_hit,
                                 int& support_total, int& angle_hit, int& angle_total) {
    std::vector<relations::Relation> pred = relations::extract_object_layout_relations(
        scene.object_boxes(), layout::quad_corner_positions(scene.gt_layout), cfg.relations);
    const std::vector<relations::Relation> angles =
        relations::extract_object_object_angles(scene.object_boxes(), cfg.relations);
    pred.insert(pred.end(), angles.begin(), angles.end());
    std::map<std::tuple<bool, int, int>, std::pair<relations::Relation::Kind, int>> truth;
    for (const relations::Relation& r : scene.gt_relations) {
        truth[{r.kind == relations::Relation::Kind::AngleBin, r.source, r.target}] = {r.kind,
                                                                                      r.bin};
    }
    for (const relations::Relation& r : pred) {
        const bool is_angle = r.kind == relations::Relation::Kind::AngleBin;
        const auto it = truth.find({is_angle, r.source, r.target});
        if (it == truth.end()) continue;  // pair without a stored label
        if (is_angle) {
            ++angle_total;
            if (it->second.first == r.kind && it->second.second == r.bin) ++angle_hit;
        } else {
            ++support_total;
            if (it->second.first == r.kind) ++support_hit;
        }
    }
}

}  // namespace detail

/// Run the pipeline over a scene set and pool every metric. `models` is
/// required in model mode (layout classifiers + relation networks); `db`
/// enables shape retrieval.
inline BenchmarkReport run_benchmark(const std::vector<datagen::Scene>& scenes,
                                     const config::PipelineConfig& cfg, ClassifierMode mode,
                                     const io::ModelSet* models = nullptr,
                                     const align::CadDatabase* db = nullptr) {
    cfg.validate();
    if (mode == ClassifierMode::Model && models == nullptr) {
        throw InvalidInput("run_benchmark: model mode needs trained models");
    }
    BenchmarkReport report;
    report.scene_count = static_cast<int>(scenes.size());
    std::vector<metrics::LayoutReport> lay_reports;
    std::vector<metrics::AlignmentReport> align_reports;
    std::vector<relations::SceneGraph> graphs;
    int sup_hit = 0, ang_hit = 0;
    for (const datagen::Scene& scene : scenes) {
        std::optional<layout::FeatureGrid> features;
        if (mode == ClassifierMode::Model) {
            features = layout::compute_feature_grid(scene.occupancy);
        }
        const LayoutResult lr =
            extract_layout(scene, cfg, mode, models, features ? &*features : nullptr);
        lay_reports.push_back(metrics::layout_prf(lr.graph, scene.gt_layout, cfg.thresholds));

        const std::vector<ObjectAlignment> aligned = align_scene_objects(scene, db);
        std::vector<metrics::AlignedObject> pred;
        for (const ObjectAlignment& oa : aligned) {
            pred.push_back(oa.aligned);
            if (oa.retrieval_attempted) {
                ++report.retrieval_attempted;
                if (oa.retrieval_correct) ++report.retrieval_correct;
            }
        }
        align_reports.push_back(
            metrics::alignment_accuracy(pred, gt_aligned_objects(scene), cfg.thresholds));

        if (mode == ClassifierMode::Model) {
            graphs.push_back(make_relation_graph(scene, *features, cfg));
        } else {
            detail::count_rule_relations(scene, cfg, sup_hit, report.support_total, ang_hit,
                                         report.angle_total);
        }
    }
    report.layout = metrics::merge_layout_reports(lay_reports);
    report.alignment = metrics::merge_alignment_reports(align_reports);
    if (mode == ClassifierMode::Model) {
        const mpnn::RelationAccuracy acc =
            mpnn::evaluate_relations(models->relation, graphs, cfg.message_steps);
        report.support_accuracy = acc.support;
        report.angle_accuracy = acc.angle;
        report.support_total = acc.support_total;
        report.angle_total = acc.angle_total;
    } else {
        if (report.support_total > 0) {
            report.support_accuracy = static_cast<double>(sup_hit) / report.support_total;
        }
        if (report.angle_total > 0) {
            report.angle_accuracy = static_cast<double>(ang_hit) / report.angle_total;
        }
    }
    if (report.retrieval_attempted > 0) {
        report.retrieval_accuracy =
            static_cast<double>(report.retrieval_correct) / report.retrieval_attempted;
    }
    return report;
}

}  // namespace scenecad::pipeline
