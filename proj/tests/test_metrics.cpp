#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scenecad/metrics.hpp"
#include "scenecad/random.hpp"

using namespace scenecad;
using namespace scenecad::metrics;
using geom::Pose9DoF;
using geom::Rot3;
using geom::Vec3;
using layout::LayoutGraph;

namespace {

AlignedObject make_object(const std::string& category, const Vec3& t,
                          double yaw = 0.0, const Vec3& scale = Vec3::Ones()) {
    AlignedObject o;
    o.category = category;
    o.pose.translation = t;
    o.pose.rotation = Rot3::from_axis_angle(Vec3(0, 0, 1), yaw);
    o.pose.scale = scale;
    return o;
}

// Perturb one error channel of a prediction relative to a ground-truth
// object; the other channels stay exact.
AlignedObject perturbed(const AlignedObject& gt, double t_err, double rot_err_deg,
                        double scale_err) {
    AlignedObject o = gt;
    o.pose.translation += Vec3(t_err, 0, 0);
    o.pose.rotation =
        Rot3::from_axis_angle(Vec3(0, 0, 1), rot_err_deg * M_PI / 180.0) * gt.pose.rotation;
    o.pose.scale = gt.pose.scale * (1.0 + scale_err);
    return o;
}

LayoutGraph unit_square_graph(const Vec3& offset = Vec3::Zero()) {
    LayoutGraph g;
    g.corners = {offset + Vec3(0, 0, 0), offset + Vec3(1, 0, 0), offset + Vec3(1, 1, 0),
                 offset + Vec3(0, 1, 0)};
    g.add_edge(0, 1);
    g.add_edge(1, 2);
    g.add_edge(2, 3);
    g.add_edge(3, 0);
    g.add_quad({0, 1, 2, 3});
    return g;
}

}  // namespace

TEST_CASE("alignment accepts inside and rejects outside every threshold",
          "[metrics][alignment]") {
    const MetricThresholds th;  // 0.20 m, 20 deg, 20%
    const AlignedObject gt = make_object("chair", Vec3(1, 2, 0.4), 0.7);

    // all three errors just inside
    auto rep = alignment_accuracy({perturbed(gt, 0.19, 19.0, 0.19)}, {gt}, th);
    REQUIRE(rep.instance_average == 1.0);
    REQUIRE(rep.matches.size() == 1);
    REQUIRE(rep.matches[0].success);

    // each channel alone just outside
    REQUIRE(alignment_accuracy({perturbed(gt, 0.21, 0, 0)}, {gt}, th).instance_average ==
            0.0);
    REQUIRE(alignment_accuracy({perturbed(gt, 0, 21.0, 0)}, {gt}, th).instance_average ==
            0.0);
    REQUIRE(alignment_accuracy({perturbed(gt, 0, 0, 0.21)}, {gt}, th).instance_average ==
            0.0);

    // exact boundary counts as success (<=)
    REQUIRE(alignment_accuracy({perturbed(gt, 0.20, 0, 0)}, {gt}, th).instance_average ==
            1.0);

    // scale shrink is measured as a ratio too: 0.79 ratio is 21% off
    REQUIRE(alignment_accuracy({perturbed(gt, 0, 0, -0.21)}, {gt}, th).instance_average ==
            0.0);
    // asymmetry of the ratio criterion: +19% passes even when one axis shrinks
    AlignedObject aniso = gt;
    aniso.pose.scale = Vec3(1.19, 0.81, 1.0);
    REQUIRE(alignment_accuracy({aniso}, {gt}, th).instance_average == 1.0);
    aniso.pose.scale = Vec3(1.19, 0.78, 1.0);
    REQUIRE(alignment_accuracy({aniso}, {gt}, th).instance_average == 0.0);

    MetricThresholds bad;
    bad.translation_max = 0.0;
    REQUIRE_THROWS_AS(alignment_accuracy({gt}, {gt}, bad), InvalidInput);
}

TEST_CASE("ground truth scored against itself is perfect", "[metrics][alignment]") {
    Rng rng(81);
    std::vector<AlignedObject> gt;
    const std::string cats[3] = {"chair", "table", "cabinet"};
    for (int i = 0; i < 12; ++i) {
        gt.push_back(make_object(cats[i % 3],
                                 Vec3(rng.uniform(0, 5), rng.uniform(0, 5), 0.3),
                                 rng.uniform(0, 2 * M_PI),
                                 Vec3(rng.uniform(0.5, 2), rng.uniform(0.5, 2),
                                      rng.uniform(0.5, 2))));
    }
    const auto rep = alignment_accuracy(gt, gt, {});
    REQUIRE(rep.instance_average == 1.0);
    REQUIRE(rep.class_average == 1.0);
    for (const auto& [cat, acc] : rep.per_category) REQUIRE(acc == 1.0);
}

TEST_CASE("matching is one-to-one, category-gated, nearest-first",
          "[metrics][alignment]") {
    const MetricThresholds th;
    const AlignedObject g0 = make_object("chair", Vec3(0, 0, 0));
    const AlignedObject g1 = make_object("chair", Vec3(1, 0, 0));

    // one prediction cannot satisfy two ground-truth instances
    auto rep = alignment_accuracy({make_object("chair", Vec3(0.05, 0, 0))}, {g0, g1}, th);
    REQUIRE(rep.instance_average == 0.5);
    REQUIRE(rep.matches.size() == 1);
    REQUIRE(rep.matches[0].gt == 0);  // matched the nearer one

    // a wrong-category prediction never matches
    rep = alignment_accuracy({make_object("table", Vec3(0, 0, 0))}, {g0}, th);
    REQUIRE(rep.matches.empty());
    REQUIRE(rep.instance_average == 0.0);

    // two predictions, two gt: nearest-first greedy pairs them stably
    const auto p0 = make_object("chair", Vec3(0.02, 0, 0));
    const auto p1 = make_object("chair", Vec3(0.9, 0, 0));
    rep = alignment_accuracy({p1, p0}, {g0, g1}, th);
    REQUIRE(rep.instance_average == 1.0);
    bool saw_p0_g0 = false, saw_p1_g1 = false;
    for (const auto& m : rep.matches) {
        if (m.pred == 1 && m.gt == 0) saw_p0_g0 = true;
        if (m.pred == 0 && m.gt == 1) saw_p1_g1 = true;
    }
    REQUIRE(saw_p0_g0);
    REQUIRE(saw_p1_g1);

    // prediction order does not change the score
    const auto fwd = alignment_accuracy({p0, p1}, {g0, g1}, th);
    REQUIRE(fwd.instance_average == rep.instance_average);
    REQUIRE(fwd.class_average == rep.class_average);

    // empty ground truth scores 1 by convention
    REQUIRE(alignment_accuracy({}, {}, th).instance_average == 1.0);
}

TEST_CASE("class average weighs categories equally", "[metrics][alignment]") {
    const MetricThresholds th;
    std::vector<AlignedObject> gt, pred;
    // 3 chairs all matched, 1 table missed
    for (int i = 0; i < 3; ++i) {
        gt.push_back(make_object("chair", Vec3(i, 0, 0)));
        pred.push_back(make_object("chair", Vec3(i, 0.01, 0)));
    }
    gt.push_back(make_object("table", Vec3(9, 9, 0)));
    const auto rep = alignment_accuracy(pred, gt, th);
    REQUIRE(rep.per_category.at("chair") == 1.0);
    REQUIRE(rep.per_category.at("table") == 0.0);
    REQUIRE(rep.class_average == 0.5);
    REQUIRE(rep.instance_average == 0.75);
}

TEST_CASE("rotation symmetry groups forgive equivalent headings",
          "[metrics][alignment]") {
    const MetricThresholds th;
    const AlignedObject gt = make_object("table", Vec3(0, 0, 0), 0.0);
    const AlignedObject flipped = make_object("table", Vec3(0, 0, 0), M_PI);

    REQUIRE(alignment_accuracy({flipped}, {gt}, th).instance_average == 0.0);

    SymmetryGroups sym;
    sym["table"] = {Rot3::identity(), Rot3::from_axis_angle(Vec3(0, 0, 1), M_PI)};
    const auto rep = alignment_accuracy({flipped}, {gt}, th, sym);
    REQUIRE(rep.instance_average == 1.0);
    REQUIRE(rep.matches[0].rotation_error_deg < 1e-9);
}

TEST_CASE("corner matching radius boundary at 0.40 m", "[metrics][layout]") {
    const MetricThresholds th;  // corner_radius = 0.40
    LayoutGraph gt;
    gt.corners = {Vec3(0, 0, 0)};

    LayoutGraph near;
    near.corners = {Vec3(0.39, 0, 0)};
    REQUIRE(layout_prf(near, gt, th).corner_recall == 1.0);

    LayoutGraph far;
    far.corners = {Vec3(0.41, 0, 0)};
    const auto missed = layout_prf(far, gt, th);
    REQUIRE(missed.corner_recall == 0.0);
    REQUIRE(missed.corner_precision == 0.0);

    LayoutGraph exact;
    exact.corners = {Vec3(0.40, 0, 0)};
    REQUIRE(layout_prf(exact, gt, th).corner_recall == 1.0);  // inclusive
}

TEST_CASE("corner matching is one-to-one and nearest-first", "[metrics][layout]") {
    const MetricThresholds th;
    LayoutGraph gt;
    gt.corners = {Vec3(0, 0, 0), Vec3(0.3, 0, 0)};
    LayoutGraph pred;
    pred.corners = {Vec3(0.05, 0, 0)};
    // one prediction can only take one ground-truth corner
    const auto rep = layout_prf(pred, gt, th);
    REQUIRE(rep.corner_correct == 1);
    REQUIRE(rep.corner_recall == 0.5);
    REQUIRE(rep.corner_precision == 1.0);

    // two predictions fighting over one gt corner: only one wins
    LayoutGraph crowd;
    crowd.corners = {Vec3(0.01, 0, 0), Vec3(-0.01, 0, 0)};
    LayoutGraph single;
    single.corners = {Vec3(0, 0, 0)};
    const auto rep2 = layout_prf(crowd, single, th);
    REQUIRE(rep2.corner_correct == 1);
    REQUIRE(rep2.corner_precision == 0.5);
    REQUIRE(rep2.corner_recall == 1.0);
}

TEST_CASE("edges and quads require their corners to map onto ground truth",
          "[metrics][layout]") {
    const MetricThresholds th;
    const LayoutGraph gt = unit_square_graph();

    // identical graph: all perfect
    auto rep = layout_prf(unit_square_graph(), gt, th);
    REQUIRE(rep.edge_precision == 1.0);
    REQUIRE(rep.edge_recall == 1.0);
    REQUIRE(rep.quad_precision == 1.0);
    REQUIRE(rep.quad_recall == 1.0);

    // small jitter within the radius keeps everything matched
    LayoutGraph jittered = unit_square_graph(Vec3(0.1, -0.1, 0.05));
    rep = layout_prf(jittered, gt, th);
    REQUIRE(rep.quad_recall == 1.0);

    // a spurious edge costs precision but not recall
    LayoutGraph extra = unit_square_graph();
    extra.add_edge(0, 2);
    rep = layout_prf(extra, gt, th);
    REQUIRE(rep.edge_recall == 1.0);
    REQUIRE(rep.edge_precision == Catch::Approx(4.0 / 5.0));

    // a quad using a corner that lost its match (one-to-one matching gave
    // the gt corner to a closer prediction) cannot count as correct
    LayoutGraph wrong_quad = unit_square_graph();
    wrong_quad.corners.push_back(gt.corners[0] + Vec3(0, 0, 0.2));
    wrong_quad.quads[0] = layout::canonical_quad({4, 1, 2, 3});
    rep = layout_prf(wrong_quad, gt, th);
    REQUIRE(rep.quad_pred == 1);
    REQUIRE(rep.quad_correct == 0);
    REQUIRE(rep.quad_recall == 0.0);

    // permuting quad corner order never changes the score
    LayoutGraph permuted = unit_square_graph();
    permuted.quads[0] = layout::canonical_quad({2, 3, 0, 1});
    rep = layout_prf(permuted, gt, th);
    REQUIRE(rep.quad_recall == 1.0);
}

TEST_CASE("tighter radius never matches more corners", "[metrics][layout]") {
    Rng rng(82);
    for (int trial = 0; trial < 20; ++trial) {
        LayoutGraph gt, pred;
        for (int i = 0; i < 10; ++i) {
            gt.corners.emplace_back(rng.uniform(0, 3), rng.uniform(0, 3), rng.uniform(0, 3));
            pred.corners.emplace_back(rng.uniform(0, 3), rng.uniform(0, 3),
                                      rng.uniform(0, 3));
        }
        MetricThresholds loose, tight;
        loose.corner_radius = 0.8;
        tight.corner_radius = 0.4;
        REQUIRE(layout_prf(pred, gt, tight).corner_correct <=
                layout_prf(pred, gt, loose).corner_correct);
    }
}

TEST_CASE("empty graphs score 1 by convention", "[metrics][layout]") {
    const auto rep = layout_prf(LayoutGraph{}, LayoutGraph{}, {});
    REQUIRE(rep.corner_precision == 1.0);
    REQUIRE(rep.corner_recall == 1.0);
    REQUIRE(rep.quad_precision == 1.0);
}

TEST_CASE("merged reports pool counts, not averages", "[metrics]") {
    // layout: 1/1 and 1/3 correct corners pool to 2/4, not mean(1, 1/3)
    LayoutReport a;
    a.corner_correct = a.corner_pred = a.corner_gt = 1;
    LayoutReport b;
    b.corner_correct = 1;
    b.corner_pred = b.corner_gt = 3;
    const LayoutReport lm = merge_layout_reports({a, b});
    REQUIRE(lm.corner_precision == 0.5);
    REQUIRE(lm.corner_recall == 0.5);

    // alignment: categories pool the same way
    AlignmentReport ra;
    ra.counts["chair"] = {2, 2};
    AlignmentReport rb;
    rb.counts["chair"] = {0, 2};
    rb.counts["table"] = {1, 1};
    const AlignmentReport am = merge_alignment_reports({ra, rb});
    REQUIRE(am.per_category.at("chair") == 0.5);
    REQUIRE(am.per_category.at("table") == 1.0);
    REQUIRE(am.class_average == 0.75);
    REQUIRE(am.instance_average == Catch::Approx(3.0 / 5.0));

    REQUIRE(merge_layout_reports({}).corner_precision == 1.0);
    REQUIRE(merge_alignment_reports({}).instance_average == 1.0);
}

TEST_CASE("report tables render every column", "[metrics]") {
    AlignmentReport rep;
    rep.counts["chair"] = {1, 2};
    rep.per_category["chair"] = 0.5;
    rep.class_average = 0.5;
    rep.instance_average = 0.5;
    const std::string table = format_alignment_table(rep, "ours");
    REQUIRE(table.find("chair") != std::string::npos);
    REQUIRE(table.find("50.00") != std::string::npos);
    REQUIRE(table.find("class avg.") != std::string::npos);

    LayoutReport lr;
    const std::string ltable = format_layout_table(lr, "oracle");
    REQUIRE(ltable.find("quad R") != std::string::npos);
    REQUIRE(ltable.find("oracle") != std::string::npos);
    REQUIRE(ltable.find("100.00") != std::string::npos);
}
