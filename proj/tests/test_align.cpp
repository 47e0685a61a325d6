#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scenecad/align.hpp"
#include "scenecad/random.hpp"

using namespace scenecad;
using namespace scenecad::align;
using geom::Pose9DoF;
using geom::Rot3;
using geom::Vec3;
using geom::VoxelGrid;

namespace {

Rot3 random_rotation(Rng& rng) {
    const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    return Rot3::from_axis_angle(axis, rng.uniform(-M_PI, M_PI));
}

std::vector<Vec3> random_cloud(Rng& rng, int n, double span = 0.5) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) {
        pts.emplace_back(rng.uniform(-span, span), rng.uniform(-span, span),
                         rng.uniform(-span, span));
    }
    return pts;
}

Pose9DoF random_pose(Rng& rng) {
    Pose9DoF pose;
    pose.translation = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    pose.rotation = random_rotation(rng);
    pose.scale = Vec3(rng.uniform(0.3, 2.5), rng.uniform(0.3, 2.5), rng.uniform(0.3, 2.5));
    return pose;
}

double rotation_objective(const Rot3& r, const CorrespondenceSet& pairs) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        sum += pairs.weight(i) * (r * pairs.source[i] - pairs.target[i]).squaredNorm();
    }
    return sum;
}

}  // namespace

TEST_CASE("procrustes recovers an exact rotation", "[align]") {
    Rng rng(61);
    for (int trial = 0; trial < 100; ++trial) {
        const Rot3 gt = random_rotation(rng);
        const auto src = random_cloud(rng, 3 + static_cast<int>(rng.uniform_int(20)));
        std::vector<Vec3> dst;
        for (const Vec3& p : src) dst.push_back(gt * p);
        const Rot3 got = procrustes_rotation(src, dst);
        REQUIRE(geom::rotation_angle_deg(gt, got) < 1e-5);
    }
}

TEST_CASE("procrustes beats every rotation on a coarse grid", "[align]") {
    // the analytic optimum must do at least as well as any sampled rotation,
    // including under noise, where no candidate fits exactly
    Rng rng(62);
    for (int trial = 0; trial < 10; ++trial) {
        CorrespondenceSet pairs;
        pairs.source = random_cloud(rng, 12);
        const Rot3 gt = random_rotation(rng);
        for (const Vec3& p : pairs.source) {
            pairs.target.push_back(gt * p + 0.05 * Vec3(rng.normal(), rng.normal(),
                                                        rng.normal()));
        }
        const Rot3 opt = procrustes_rotation(pairs);
        const double best = rotation_objective(opt, pairs);
        constexpr int kSteps = 8;
        for (int a = 0; a < kSteps; ++a)
            for (int b = 0; b < kSteps; ++b)
                for (int c = 0; c < kSteps; ++c) {
                    const Rot3 cand =
                        Rot3::from_axis_angle(Vec3(0, 0, 1), 2 * M_PI * a / kSteps) *
                        Rot3::from_axis_angle(Vec3(0, 1, 0), M_PI * b / kSteps) *
                        Rot3::from_axis_angle(Vec3(1, 0, 0), 2 * M_PI * c / kSteps);
                    REQUIRE(best <= rotation_objective(cand, pairs) + 1e-9);
                }
    }
}

TEST_CASE("procrustes honors weights", "[align]") {
    // two pairs pull toward different rotations; growing one weight moves the
    // solution toward that pair's rotation
    CorrespondenceSet pairs;
    pairs.source = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 0, 0.3), Vec3(0, 1, 0.3)};
    const Rot3 rz = Rot3::from_axis_angle(Vec3(0, 0, 1), 0.8);
    pairs.target = {pairs.source[0], pairs.source[1], rz * pairs.source[2],
                    rz * pairs.source[3]};

    pairs.weights = {10.0, 10.0, 0.1, 0.1};
    const Rot3 near_id = procrustes_rotation(pairs);
    pairs.weights = {0.1, 0.1, 10.0, 10.0};
    const Rot3 near_rz = procrustes_rotation(pairs);
    REQUIRE(geom::rotation_angle_deg(Rot3::identity(), near_id) <
            geom::rotation_angle_deg(Rot3::identity(), near_rz));
    REQUIRE(geom::rotation_angle_deg(rz, near_rz) <
            geom::rotation_angle_deg(rz, near_id));
}

TEST_CASE("procrustes degeneracy and validation", "[align]") {
    REQUIRE_THROWS_AS(procrustes_rotation({Vec3(1, 0, 0)}, {Vec3(1, 0, 0)}), InvalidInput);
    REQUIRE_THROWS_AS(
        procrustes_rotation({Vec3(1, 0, 0), Vec3(0, 1, 0)}, {Vec3(1, 0, 0)}),
        InvalidInput);
    CorrespondenceSet bad_w;
    bad_w.source = {Vec3(1, 0, 0), Vec3(0, 1, 0)};
    bad_w.target = bad_w.source;
    bad_w.weights = {1.0, -1.0};
    REQUIRE_THROWS_AS(procrustes_rotation(bad_w), InvalidInput);

    // collinear points leave the rotation about that axis free: rank < 2
    const std::vector<Vec3> line = {Vec3(1, 1, 1), Vec3(2, 2, 2), Vec3(3, 3, 3)};
    try {
        procrustes_rotation(line, line);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        REQUIRE(e.rank() == 1);
    }
}

TEST_CASE("estimate_pose recovers exact 9-DoF poses", "[align][pose]") {
    Rng rng(63);
    for (int trial = 0; trial < 300; ++trial) {
        const Pose9DoF gt = random_pose(rng);
        const auto src = random_cloud(rng, 8 + static_cast<int>(rng.uniform_int(30)));
        const auto dst = geom::apply_pose(gt, src);
        const Pose9DoF got = estimate_pose(src, dst);
        REQUIRE((got.translation - gt.translation).cwiseAbs().maxCoeff() < 1e-6);
        REQUIRE((got.scale - gt.scale).cwiseAbs().maxCoeff() < 1e-6);
        REQUIRE((got.rotation.matrix() - gt.rotation.matrix()).cwiseAbs().maxCoeff() <
                1e-6);
    }
}

TEST_CASE("estimate_pose under noise keeps rotation error small", "[align][pose]") {
    // sigma = 1 cm on a roughly 1 m object
    Rng rng(64);
    std::vector<double> rot_err;
    for (int trial = 0; trial < 300; ++trial) {
        const Pose9DoF gt = random_pose(rng);
        const auto src = random_cloud(rng, 40, 0.5);
        auto dst = geom::apply_pose(gt, src);
        for (Vec3& p : dst) {
            p += 0.01 * Vec3(rng.normal(), rng.normal(), rng.normal());
        }
        const Pose9DoF got = estimate_pose(src, dst);
        rot_err.push_back(
            geom::rotation_angle_deg(gt.rotation, got.rotation));
    }
    std::sort(rot_err.begin(), rot_err.end());
    REQUIRE(rot_err[static_cast<std::size_t>(0.99 * rot_err.size())] < 2.0);
    REQUIRE(rot_err[rot_err.size() / 2] < 1.0);
}

TEST_CASE("estimate_pose degeneracy and validation", "[align][pose]") {
    const std::vector<Vec3> three = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    REQUIRE_THROWS_AS(estimate_pose(three, three), InvalidInput);

    // coplanar sources: the scale along the normal is unobservable
    std::vector<Vec3> flat;
    Rng rng(65);
    for (int i = 0; i < 12; ++i) {
        flat.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.25);
    }
    try {
        estimate_pose(flat, flat);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        REQUIRE(e.rank() == 2);
    }
}

TEST_CASE("descriptor pools the tight occupied region", "[align][descriptor]") {
    // a single occupied cell saturates every bin of its 1x1x1 crop
    VoxelGrid one(Vec3::Zero(), 0.05, 12, 12, 12);
    one.at(3, 4, 5) = 1.0;
    const VectorXd d1 = compute_descriptor(one);
    REQUIRE(d1.size() == kDescriptorSize);
    REQUIRE(d1.minCoeff() == 1.0);

    // translation of the same pattern inside the grid leaves it unchanged
    Rng rng(66);
    VoxelGrid a(Vec3::Zero(), 0.05, 20, 20, 20);
    for (int i = 0; i < 40; ++i) {
        a.at(2 + static_cast<int>(rng.uniform_int(9)),
             3 + static_cast<int>(rng.uniform_int(7)),
             1 + static_cast<int>(rng.uniform_int(11))) = 1.0;
    }
    VoxelGrid b(Vec3(4.0, -2.0, 0.5), 0.05, 20, 20, 20);
    for (int ix = 0; ix < 20; ++ix)
        for (int iy = 0; iy < 20; ++iy)
            for (int iz = 0; iz < 20; ++iz)
                if (a.at(ix, iy, iz) > 0.5 && b.in_bounds(ix + 5, iy + 6, iz + 2))
                    b.at(ix + 5, iy + 6, iz + 2) = 1.0;
    REQUIRE((compute_descriptor(a) - compute_descriptor(b)).cwiseAbs().maxCoeff() == 0.0);

    // binary grid gives binary bins; a full grid saturates everything
    const VectorXd da = compute_descriptor(a);
    for (int i = 0; i < da.size(); ++i) {
        REQUIRE((da[i] == 0.0 || da[i] == 1.0));
    }
    VoxelGrid empty(Vec3::Zero(), 0.05, 4, 4, 4);
    REQUIRE_THROWS_AS(compute_descriptor(empty), InvalidInput);
}

TEST_CASE("descriptor separates distinct shapes", "[align][descriptor]") {
    // the crop normalizes extents away, so shapes are told apart by interior
    // structure: a hollow shell vs a solid block
    VoxelGrid shell(Vec3::Zero(), 0.05, 16, 16, 16);
    VoxelGrid solid(Vec3::Zero(), 0.05, 16, 16, 16);
    for (int ix = 0; ix < 16; ++ix)
        for (int iy = 0; iy < 16; ++iy)
            for (int iz = 0; iz < 16; ++iz) {
                solid.at(ix, iy, iz) = 1.0;
                const bool on_face = ix == 0 || iy == 0 || iz == 0 || ix == 15 ||
                                     iy == 15 || iz == 15;
                if (on_face) shell.at(ix, iy, iz) = 1.0;
            }
    const VectorXd ds = compute_descriptor(solid);
    const VectorXd dh = compute_descriptor(shell);
    REQUIRE(ds.minCoeff() == 1.0);  // solid block saturates every bin
    REQUIRE((ds - dh).cwiseAbs().sum() > 100.0);  // hollow interior bins differ
}

TEST_CASE("database add validates entries", "[align][retrieval]") {
    CadDatabase db;
    CadModel m;
    m.model_id = "box_0";
    m.category = "box";
    m.descriptor = VectorXd::Zero(kDescriptorSize);
    db.add(m);
    REQUIRE(db.find("box_0") != nullptr);
    REQUIRE(db.find("missing") == nullptr);
    REQUIRE_THROWS_AS(db.add(m), InvalidInput);  // duplicate id
    CadModel bad = m;
    bad.model_id = "box_1";
    bad.descriptor = VectorXd::Zero(10);
    REQUIRE_THROWS_AS(db.add(bad), InvalidInput);
}

TEST_CASE("retrieval matches an exhaustive scan", "[align][retrieval]") {
    Rng rng(67);
    CadDatabase db;
    const std::vector<std::string> cats = {"chair", "table", "lamp"};
    for (int i = 0; i < 24; ++i) {
        CadModel m;
        m.model_id = "m" + std::to_string(100 + i);
        m.category = cats[i % cats.size()];
        m.descriptor = VectorXd(kDescriptorSize);
        for (int k = 0; k < kDescriptorSize; ++k) m.descriptor[k] = rng.uniform();
        db.add(m);
    }

    for (int trial = 0; trial < 25; ++trial) {
        VectorXd q(kDescriptorSize);
        for (int k = 0; k < kDescriptorSize; ++k) q[k] = rng.uniform();
        const std::string cat = trial % 2 ? cats[trial % cats.size()] : std::string{};

        int best = -1;
        double best_dist = 0.0;
        for (int i = 0; i < static_cast<int>(db.models.size()); ++i) {
            if (!cat.empty() && db.models[i].category != cat) continue;
            const double dist = (db.models[i].descriptor - q).cwiseAbs().sum();
            if (best < 0 || dist < best_dist) {
                best = i;
                best_dist = dist;
            }
        }
        const RetrievalResult got = retrieve_cad(db, q, cat);
        REQUIRE(got.index == best);
        REQUIRE(got.distance == best_dist);
        if (!cat.empty()) REQUIRE(db.models[got.index].category == cat);
    }
}

TEST_CASE("retrieval tie-breaks by model id and validates input", "[align][retrieval]") {
    CadDatabase db;
    for (const char* id : {"zeta", "alpha", "mid"}) {
        CadModel m;
        m.model_id = id;
        m.category = "c";
        m.descriptor = VectorXd::Constant(kDescriptorSize, 0.5);
        db.add(m);
    }
    const RetrievalResult r = retrieve_cad(db, VectorXd::Zero(kDescriptorSize));
    REQUIRE(db.models[r.index].model_id == "alpha");

    REQUIRE_THROWS_AS(retrieve_cad(db, VectorXd::Zero(3)), InvalidInput);
    REQUIRE_THROWS_AS(retrieve_cad(db, VectorXd::Zero(kDescriptorSize), "nope"),
                      InvalidInput);
    REQUIRE_THROWS_AS(retrieve_cad(CadDatabase{}, VectorXd::Zero(kDescriptorSize)),
                      InvalidInput);
}
