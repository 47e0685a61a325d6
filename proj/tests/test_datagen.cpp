// Tests for synthetic scene generation: spec validation, room topology,
// placement invariants, ground-truth self-consistency, determinism, noise
// channels, the built-in CAD catalog, heatmap synthesis, and RANSAC planes.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <scenecad/datagen.hpp>
#include <scenecad/layout.hpp>
#include <scenecad/random.hpp>
#include <scenecad/relations.hpp>

using namespace scenecad;
using geom::Aabb;
using geom::Vec3;
using geom::VoxelGrid;
using geom::Obb;
using layout::LayoutGraph;
using datagen::PlacedObject;
using datagen::Scene;
using datagen::SceneSpec;
using datagen::generate_scene;

namespace {

SceneSpec box_spec(std::uint64_t seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.wall_min = 4;
    spec.wall_max = 4;
    return spec;
}

bool same_relation(const scenecad::relations::Relation& a,
                   const scenecad::relations::Relation& b) {
    return a.kind == b.kind && a.source == b.source && a.target == b.target && a.bin == b.bin;
}

}  // namespace

TEST_CASE("scene spec validation rejects each bad field") {
    REQUIRE_NOTHROW(SceneSpec{}.validate());

    SceneSpec s;
    s.room_max = s.room_min - 0.1;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.height_min = 0.0;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.wall_min = 3;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);
    s.wall_min = 4;
    s.wall_max = 9;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);
    s.wall_max = 4;
    s.wall_min = 5;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.object_max = s.object_min - 1;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.categories.clear();
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);
    s.object_min = 0;
    s.object_max = 0;
    REQUIRE_NOTHROW(s.validate());  // no objects requested, categories unused

    s = SceneSpec{};
    s.corner_jitter_sigma = -0.01;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.dropout = 1.0;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);
    s.dropout = -0.1;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.rest_fraction = 1.2;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.voxel_size = 0.0;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);

    s = SceneSpec{};
    s.heatmap_sigma = 0.0;
    REQUIRE_THROWS_AS(s.validate(), InvalidInput);
}

TEST_CASE("box rooms have 8 corners, 12 edges, 6 planar quads") {
    for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
        const Scene scene = generate_scene(box_spec(seed));
        const LayoutGraph& g = scene.gt_layout;
        REQUIRE(g.corners.size() == 8);
        REQUIRE(g.edges.size() == 12);
        REQUIRE(g.quads.size() == 6);
        for (std::size_t q = 0; q < g.quads.size(); ++q) {
            const auto pos = g.quad_positions(q);
            REQUIRE(scenecad::layout::quad_planarity_residual(pos[0], pos[1], pos[2], pos[3]) < 1e-9);
        }
        // four corners on the floor, four on the ceiling, matched in plan
        for (int i = 0; i < 4; ++i) {
            REQUIRE(g.corners[i].z() == 0.0);
            REQUIRE(g.corners[4 + i].z() > 2.0);
            REQUIRE((g.corners[i].head<2>() - g.corners[4 + i].head<2>()).norm() < 1e-12);
        }
    }
}

TEST_CASE("L-shaped rooms have 16 corners, 28 edges, 14 conforming quads") {
    SceneSpec spec;
    spec.seed = 7;
    spec.wall_min = 8;
    spec.wall_max = 8;
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        spec.seed = seed;
        const Scene scene = generate_scene(spec);
        const LayoutGraph& g = scene.gt_layout;
        REQUIRE(g.corners.size() == 16);
        REQUIRE(g.edges.size() == 28);
        REQUIRE(g.quads.size() == 14);
        for (std::size_t q = 0; q < g.quads.size(); ++q) {
            REQUIRE(scenecad::layout::quad_planarity_residual(g.quad_positions(q)[0], g.quad_positions(q)[1], g.quad_positions(q)[2], g.quad_positions(q)[3]) < 1e-9);
        }
        // all corners distinct, all edges reference valid corners
        for (std::size_t i = 0; i < g.corners.size(); ++i) {
            for (std::size_t j = i + 1; j < g.corners.size(); ++j) {
                REQUIRE((g.corners[i] - g.corners[j]).norm() > 0.05);
            }
        }
        for (const auto& e : g.edges) {
            REQUIRE(e.first >= 0);
            REQUIRE(e.second < static_cast<int>(g.corners.size()));
        }
    }
}

TEST_CASE("wall count 5 falls back to a box room") {
    SceneSpec spec;
    spec.seed = 3;
    spec.wall_min = 5;
    spec.wall_max = 5;
    const Scene scene = generate_scene(spec);
    REQUIRE(scene.gt_layout.corners.size() == 8);
    REQUIRE(scene.gt_layout.quads.size() == 6);
}

TEST_CASE("placed objects are consistent and stay inside the room") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Scene scene = generate_scene(box_spec(seed));
        REQUIRE(scene.objects.size() >= 3);
        REQUIRE(scene.objects.size() <= 6);

        const Aabb room = Aabb::of_points(scene.gt_layout.corners);
        for (const PlacedObject& obj : scene.objects) {
            // the stored box mirrors the pose exactly: the canonical frame is
            // the centered unit cube, so center = translation and
            // half-extents = scale / 2
            REQUIRE((obj.obb.center - obj.pose.translation).norm() < 1e-12);
            REQUIRE((obj.obb.half_extents - obj.pose.scale / 2).norm() < 1e-12);
            REQUIRE((obj.obb.basis.matrix() - obj.pose.rotation.matrix()).norm() < 1e-12);
            REQUIRE(obj.model_id.rfind(obj.category + "_", 0) == 0);

            const Aabb box = obj.obb.aabb();
            for (int a = 0; a < 3; ++a) {
                REQUIRE(box.min[a] >= room.min[a] - 1e-9);
                REQUIRE(box.max[a] <= room.max[a] + 1e-9);
            }

            // noiseless correspondences are exact pose images
            const auto& c = obj.correspondences;
            REQUIRE(c.source.size() >= 8);
            REQUIRE(c.source.size() == c.target.size());
            for (std::size_t i = 0; i < c.source.size(); ++i) {
                const Vec3 posed = scenecad::geom::apply_pose(obj.pose, c.source[i]);
                REQUIRE((posed - c.target[i]).norm() < 1e-12);
            }
        }

        // footprints were placed with clearance, so no two boxes overlap
        for (std::size_t i = 0; i < scene.objects.size(); ++i) {
            for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
                const Aabb a = scene.objects[i].obb.aabb();
                const Aabb b = scene.objects[j].obb.aabb();
                const bool xy_separate = a.max.x() < b.min.x() || b.max.x() < a.min.x() ||
                                         a.max.y() < b.min.y() || b.max.y() < a.min.y();
                REQUIRE(xy_separate);
            }
        }
    }
}

TEST_CASE("stored relations equal a fresh run of the extractors") {
    const scenecad::relations::RelationConfig cfg;
    for (std::uint64_t seed : {2u, 5u, 11u, 17u}) {
        const Scene scene = generate_scene(box_spec(seed), cfg);
        const std::vector<Obb> boxes = scene.object_boxes();
        auto expected = scenecad::relations::extract_object_layout_relations(
            boxes, scenecad::layout::quad_corner_positions(scene.gt_layout), cfg);
        const auto angles = scenecad::relations::extract_object_object_angles(boxes, cfg);
        expected.insert(expected.end(), angles.begin(), angles.end());

        REQUIRE(scene.gt_relations.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            REQUIRE(same_relation(scene.gt_relations[i], expected[i]));
        }

        // every object pair gets exactly one angle relation
        const std::size_t n = scene.objects.size();
        REQUIRE(angles.size() == n * (n - 1) / 2);
    }
}

TEST_CASE("resting objects touch the floor and gain vertical support") {
    SceneSpec spec = box_spec(21);
    spec.rest_fraction = 1.0;
    spec.wall_touch_fraction = 0.0;
    const Scene scene = generate_scene(spec);
    REQUIRE(!scene.objects.empty());

    // identify the floor quad: all four corners at z == 0
    int floor_quad = -1;
    for (std::size_t q = 0; q < scene.gt_layout.quads.size(); ++q) {
        const auto pos = scene.gt_layout.quad_positions(q);
        if (std::all_of(pos.begin(), pos.end(), [](const Vec3& p) { return p.z() == 0.0; })) {
            floor_quad = static_cast<int>(q);
        }
    }
    REQUIRE(floor_quad >= 0);

    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const Aabb box = scene.objects[i].obb.aabb();
        REQUIRE(box.min.z() == Catch::Approx(0.0).margin(1e-9));
        const bool supported = std::any_of(
            scene.gt_relations.begin(), scene.gt_relations.end(), [&](const auto& r) {
                return r.kind == scenecad::relations::Relation::Kind::VerticalSupport &&
                       r.source == static_cast<int>(i) && r.target == floor_quad;
            });
        REQUIRE(supported);
    }
}

TEST_CASE("identical specs produce identical scenes; seeds change them") {
    SceneSpec spec = box_spec(42);
    spec.corner_jitter_sigma = 0.02;
    spec.point_noise_sigma = 0.01;
    spec.dropout = 0.2;
    const Scene a = generate_scene(spec);
    const Scene b = generate_scene(spec);

    REQUIRE(a.gt_layout.corners.size() == b.gt_layout.corners.size());
    for (std::size_t i = 0; i < a.gt_layout.corners.size(); ++i) {
        REQUIRE(a.gt_layout.corners[i] == b.gt_layout.corners[i]);
    }
    REQUIRE(a.corner_observations.size() == b.corner_observations.size());
    for (std::size_t i = 0; i < a.corner_observations.size(); ++i) {
        REQUIRE(a.corner_observations[i] == b.corner_observations[i]);
    }
    REQUIRE(a.occupancy.values == b.occupancy.values);
    REQUIRE(a.objects.size() == b.objects.size());
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        REQUIRE(a.objects[i].model_id == b.objects[i].model_id);
        REQUIRE(a.objects[i].pose.translation == b.objects[i].pose.translation);
        REQUIRE(a.objects[i].pose.scale == b.objects[i].pose.scale);
    }
    REQUIRE(a.gt_relations.size() == b.gt_relations.size());

    SceneSpec other = spec;
    other.seed = 43;
    const Scene c = generate_scene(other);
    REQUIRE(a.gt_layout.corners[6] != c.gt_layout.corners[6]);  // room resampled
}

TEST_CASE("noise channels behave as configured") {
    SECTION("corner jitter displaces observations but stays bounded") {
        SceneSpec spec = box_spec(5);
        spec.corner_jitter_sigma = 0.02;
        const Scene scene = generate_scene(spec);
        REQUIRE(scene.corner_observations.size() == scene.gt_layout.corners.size());
        double max_shift = 0.0;
        for (std::size_t i = 0; i < scene.corner_observations.size(); ++i) {
            const double shift =
                (scene.corner_observations[i] - scene.gt_layout.corners[i]).norm();
            max_shift = std::max(max_shift, shift);
            REQUIRE(shift < 6 * 0.02 * std::sqrt(3.0));
        }
        REQUIRE(max_shift > 0.0);
    }

    SECTION("zero jitter copies the ground-truth corners exactly") {
        const Scene scene = generate_scene(box_spec(5));
        for (std::size_t i = 0; i < scene.corner_observations.size(); ++i) {
            REQUIRE(scene.corner_observations[i] == scene.gt_layout.corners[i]);
        }
    }

    SECTION("dropout removes occupied cells and nothing else") {
        SceneSpec clean = box_spec(9);
        SceneSpec dropped = clean;
        dropped.dropout = 0.5;
        const Scene a = generate_scene(clean);
        const Scene b = generate_scene(dropped);
        REQUIRE(a.occupancy.values.size() == b.occupancy.values.size());
        std::size_t before = 0, after = 0;
        for (std::size_t i = 0; i < a.occupancy.values.size(); ++i) {
            before += a.occupancy.values[i] > 0.5;
            after += b.occupancy.values[i] > 0.5;
            if (b.occupancy.values[i] > 0.5) REQUIRE(a.occupancy.values[i] > 0.5);
        }
        REQUIRE(after < before);
        REQUIRE(after > before / 3);  // roughly half survives
    }

    SECTION("point noise perturbs correspondence targets") {
        SceneSpec spec = box_spec(13);
        spec.point_noise_sigma = 0.01;
        const Scene scene = generate_scene(spec);
        double max_residual = 0.0;
        for (const PlacedObject& obj : scene.objects) {
            for (std::size_t i = 0; i < obj.correspondences.source.size(); ++i) {
                const Vec3 posed =
                    scenecad::geom::apply_pose(obj.pose, obj.correspondences.source[i]);
                max_residual =
                    std::max(max_residual, (posed - obj.correspondences.target[i]).norm());
            }
        }
        REQUIRE(max_residual > 0.0);
        REQUIRE(max_residual < 6 * 0.01 * std::sqrt(3.0));
    }
}

TEST_CASE("occupancy covers the room surfaces") {
    const Scene scene = generate_scene(box_spec(31));
    const VoxelGrid& occ = scene.occupancy;
    for (const double v : occ.values) REQUIRE((v == 0.0 || v == 1.0));

    for (std::size_t q = 0; q < scene.gt_layout.quads.size(); ++q) {
        const auto pos = scene.gt_layout.quad_positions(q);
        const Vec3 center = (pos[0] + pos[1] + pos[2] + pos[3]) / 4;
        const Eigen::Vector3i cc = occ.clamped_cell_of(center);
        bool covered = false;
        for (int dx = -1; dx <= 1 && !covered; ++dx) {
            for (int dy = -1; dy <= 1 && !covered; ++dy) {
                for (int dz = -1; dz <= 1 && !covered; ++dz) {
                    const int ix = cc.x() + dx, iy = cc.y() + dy, iz = cc.z() + dz;
                    if (occ.in_bounds(ix, iy, iz) && occ.at(ix, iy, iz) > 0.5) covered = true;
                }
            }
        }
        REQUIRE(covered);
    }
}

TEST_CASE("scenes without objects are valid") {
    SceneSpec spec = box_spec(3);
    spec.object_min = 0;
    spec.object_max = 0;
    spec.categories.clear();
    const Scene scene = generate_scene(spec);
    REQUIRE(scene.objects.empty());
    REQUIRE(scene.gt_relations.empty());
    REQUIRE(scene.occupancy.cell_count() > 0);
}

TEST_CASE("impossible placement requests raise DataError") {
    SceneSpec spec = box_spec(1);
    spec.room_min = 3.5;
    spec.room_max = 3.5;
    spec.object_min = 40;
    spec.object_max = 40;
    spec.categories = {"table"};
    REQUIRE_THROWS_AS(generate_scene(spec), DataError);
}

TEST_CASE("canonical model points fill the unit cube per category") {
    using scenecad::datagen::shapes::kVariantsPerCategory;
    using scenecad::datagen::shapes::model_id;
    using scenecad::datagen::shapes::model_points;

    const std::vector<std::string> cats = {"cabinet", "chair", "display", "table"};
    for (const std::string& cat : cats) {
        std::set<std::size_t> sizes;
        for (int v = 0; v < kVariantsPerCategory; ++v) {
            const std::vector<Vec3> pts = model_points(cat, v);
            REQUIRE(pts.size() > 200);
            for (const Vec3& p : pts) {
                REQUIRE(p.cwiseAbs().maxCoeff() <= 0.5 + 1e-9);
            }
            sizes.insert(pts.size());
            REQUIRE(model_id(cat, v) == cat + "_" + std::to_string(v));
        }
        REQUIRE(sizes.size() > 1);  // variants actually differ
    }
    REQUIRE_THROWS_AS(model_points("sofa", 0), InvalidInput);
}

TEST_CASE("builtin CAD database holds every category variant") {
    const scenecad::align::CadDatabase db = scenecad::datagen::builtin_cad_database();
    REQUIRE(db.models.size() == 12);
    for (const char* cat : {"cabinet", "chair", "display", "table"}) {
        for (int v = 0; v < 3; ++v) {
            const auto* m = db.find(scenecad::datagen::shapes::model_id(cat, v));
            REQUIRE(m != nullptr);
            REQUIRE(m->category == cat);
            REQUIRE(m->descriptor.size() == scenecad::align::kDescriptorSize);
            REQUIRE(!m->points.empty());

            // querying a model's own descriptor hits distance 0; ties between
            // variants with identical descriptors go to the smallest id
            std::string expected = m->model_id;
            for (const auto& other : db.models) {
                if (other.category == m->category && other.descriptor == m->descriptor &&
                    other.model_id < expected) {
                    expected = other.model_id;
                }
            }
            const auto hit = scenecad::align::retrieve_cad(db, m->descriptor, cat);
            REQUIRE(db.models[hit.index].model_id == expected);
            REQUIRE(hit.distance == 0.0);
        }
    }
}

TEST_CASE("heatmap synthesis matches the Gaussian definition") {
    std::vector<Vec3> base_points;
    for (double x = 0.0; x <= 1.0; x += 0.1) {
        for (double y = 0.0; y <= 1.0; y += 0.1) {
            base_points.emplace_back(x, y, 0.0);
        }
    }
    const VoxelGrid like = scenecad::geom::voxelize(base_points, 0.1, 2);
    const std::vector<Vec3> corners = {Vec3(0.0, 0.0, 0.0), Vec3(1.0, 0.5, 0.0)};
    const double sigma = 0.15;
    const VoxelGrid h = scenecad::datagen::synthesize_heatmap(corners, like, sigma);

    REQUIRE(h.nx == like.nx);
    REQUIRE(h.ny == like.ny);
    REQUIRE(h.nz == like.nz);
    REQUIRE((h.origin - (like.origin + Vec3::Constant(0.05))).norm() < 1e-12);

    // corners at grid multiples land exactly on offset cell centers
    for (const Vec3& c : corners) {
        const Eigen::Vector3i cc = h.clamped_cell_of(c);
        REQUIRE((h.cell_center(cc.x(), cc.y(), cc.z()) - c).norm() < 1e-9);
        REQUIRE(h.at(cc.x(), cc.y(), cc.z()) == Catch::Approx(1.0).margin(1e-12));
    }

    // every cell equals the max-of-Gaussians oracle
    for (int ix = 0; ix < h.nx; ++ix) {
        for (int iy = 0; iy < h.ny; ++iy) {
            for (int iz = 0; iz < h.nz; ++iz) {
                double expect = 0.0;
                for (const Vec3& c : corners) {
                    const double d2 = (h.cell_center(ix, iy, iz) - c).squaredNorm();
                    expect = std::max(expect, std::exp(-d2 / (2 * sigma * sigma)));
                }
                REQUIRE(h.at(ix, iy, iz) == Catch::Approx(expect).margin(1e-9));
            }
        }
    }

    REQUIRE_THROWS_AS(scenecad::datagen::synthesize_heatmap(corners, like, 0.0), InvalidInput);
}

TEST_CASE("suppression on a synthesized heatmap recovers the room corners") {
    const Scene scene = generate_scene(box_spec(8));
    const VoxelGrid heat = scenecad::datagen::synthesize_heatmap(
        scene.corner_observations, scene.occupancy, scene.heatmap_sigma);
    const auto peaks = scenecad::layout::nms_corners(heat, 0.5, 3);
    REQUIRE(peaks.corners.size() == scene.gt_layout.corners.size());
    for (const Vec3& gt : scene.gt_layout.corners) {
        int near = 0;
        for (const Vec3& p : peaks.corners) {
            if ((p - gt).norm() <= scene.voxel_size) ++near;
        }
        REQUIRE(near == 1);
    }
}

TEST_CASE("RANSAC extracts the planted planes and only them") {
    Rng rng(77);
    std::vector<Vec3> points;
    std::vector<int> truth;  // 0: z=0, 1: z=2, 2: x=1, 3: outlier
    for (int i = 0; i < 200; ++i) {
        points.emplace_back(rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), 0.0);
        truth.push_back(0);
    }
    for (int i = 0; i < 150; ++i) {
        points.emplace_back(rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0), 2.0);
        truth.push_back(1);
    }
    for (int i = 0; i < 100; ++i) {
        points.emplace_back(1.0, rng.uniform(0.0, 3.0), rng.uniform(0.2, 1.8));
        truth.push_back(2);
    }
    for (int i = 0; i < 30; ++i) {
        points.emplace_back(rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0),
                            rng.uniform(0.25, 1.75));
        truth.push_back(3);
    }

    const auto planes = scenecad::datagen::ransac_planes(points, 300, 0.01, 50, 5);
    REQUIRE(planes.size() == 3);

    std::set<int> seen;
    std::set<int> claimed;
    for (const auto& pl : planes) {
        REQUIRE(std::abs(pl.normal.norm() - 1.0) < 1e-9);
        // the dominant component is positive by construction
        int big = 0;
        for (int k = 1; k < 3; ++k) {
            if (std::abs(pl.normal[k]) > std::abs(pl.normal[big])) big = k;
        }
        REQUIRE(pl.normal[big] > 0.0);

        // match against one of the planted planes
        int which = -1;
        if (std::abs(pl.normal.z()) > 0.99) {
            which = std::abs(pl.offset) < 0.1 ? 0 : 1;
        } else if (std::abs(pl.normal.x()) > 0.99) {
            which = 2;
        }
        REQUIRE(which >= 0);
        REQUIRE(seen.insert(which).second);

        // all reported inliers satisfy the plane equation, none repeat
        std::size_t matching = 0;
        for (int idx : pl.inliers) {
            REQUIRE(claimed.insert(idx).second);
            REQUIRE(std::abs(pl.normal.dot(points[idx]) - pl.offset) <= 0.01);
            if (truth[idx] == which) ++matching;
        }
        const std::size_t planted = which == 0 ? 200 : which == 1 ? 150 : 100;
        REQUIRE(matching == planted);  // exact plane fit captures every member
    }
    REQUIRE(seen.size() == 3);

    REQUIRE_THROWS_AS(scenecad::datagen::ransac_planes({Vec3::Zero(), Vec3::UnitX()}, 10, 0.01, 3),
                      InvalidInput);
    REQUIRE_THROWS_AS(scenecad::datagen::ransac_planes(points, 0, 0.01, 3), InvalidInput);
    REQUIRE_THROWS_AS(scenecad::datagen::ransac_planes(points, 10, 0.0, 3), InvalidInput);
    REQUIRE_THROWS_AS(scenecad::datagen::ransac_planes(points, 10, 0.01, 2), InvalidInput);
}
