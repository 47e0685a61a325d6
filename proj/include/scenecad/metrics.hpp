#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "scenecad/geom.hpp"
#include "scenecad/layout.hpp"

namespace scenecad::metrics {

using geom::Pose9DoF;
using geom::Rot3;
using geom::Vec3;
using layout::LayoutGraph;

struct MetricThresholds {
    double translation_max = 0.20;   // meters
    double rotation_max_deg = 20.0;  // geodesic angle
    double scale_max_ratio = 0.20;   // max per-axis |s_pred/s_gt - 1|
    double corner_radius = 0.40;     // meters

    void validate() const {
        if (!(translation_max > 0.0 && rotation_max_deg > 0.0 && scale_max_ratio > 0.0 &&
              corner_radius > 0.0)) {
            throw InvalidInput("metric thresholds must all be positive");
        }
    }
};

/// One aligned instance as scored by the alignment metric.
struct AlignedObject {
    std::string category;
    Pose9DoF pose;
    std::string model_id;
};

/// Optional rotation-symmetry groups per category: the rotation error of a
/// match is the minimum geodesic angle over R_gt composed with each group
/// element. An absent category means no symmetry reduction.
using SymmetryGroups = std::map<std::string, std::vector<Rot3>>;

struct AlignmentReport {
    struct MatchedPair {
        int pred = -1, gt = -1;
        bool success = false;
        double translation_error = 0.0;
        double rotation_error_deg = 0.0;
        double scale_error = 0.0;  // max per-axis |ratio - 1|
    };

    std::map<std::string, double> per_category;            // accuracy
    std::map<std::string, std::pair<int, int>> counts;     // (successes, gt) per category
    double class_average = 1.0;
    double instance_average = 1.0;
    std::vector<MatchedPair> matches;
};

/// Alignment accuracy with greedy one-to-one matching: candidate pairs must
/// share a category and are consumed in ascending translation-error order
/// (deterministic tie-break on indices); the matching itself ignores the
/// thresholds, so tightening them can only turn successes into failures.
/// A matched pair succeeds iff translation, geodesic rotation, and per-axis
/// scale-ratio errors are all within bounds; accuracy is successes / |gt|.
inline AlignmentReport alignment_accuracy(const std::vector<AlignedObject>& pred,
                                          const std::vector<AlignedObject>& gt,
                                          const MetricThresholds& th,
                                          const SymmetryGroups& symmetry = {}) {
    th.validate();
    struct Pair {
        double terr;
        int p, g;
    };
    std::vector<Pair> pairs;
    for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
        for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
            if (pred[p].category != gt[g].category) continue;
            pairs.push_back({(pred[p].pose.translation - gt[g].pose.translation).norm(), p, g});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.terr != b.terr) return a.terr < b.terr;
        return std::tie(a.p, a.g) < std::tie(b.p, b.g);
    });

    std::vector<bool> pred_used(pred.size(), false), gt_used(gt.size(), false);
    AlignmentReport report;
    std::map<std::string, std::pair<int, int>> counts;  // (successes, total gt)
    for (const AlignedObject& g : gt) counts[g.category].second += 1;

    for (const Pair& pr : pairs) {
        if (pred_used[pr.p] || gt_used[pr.g]) continue;
        pred_used[pr.p] = true;
        gt_used[pr.g] = true;

        const AlignedObject& po = pred[pr.p];
        const AlignedObject& go = gt[pr.g];
        AlignmentReport::MatchedPair m;
        m.pred = pr.p;
        m.gt = pr.g;
        m.translation_error = pr.terr;
        m.rotation_error_deg = geom::rotation_angle_deg(po.pose.rotation, go.pose.rotation);
        if (auto it = symmetry.find(go.category); it != symmetry.end()) {
            for (const Rot3& s : it->second) {
                const Rot3 equivalent =
                    Rot3::from_matrix_unchecked(go.pose.rotation.matrix() * s.matrix());
                m.rotation_error_deg =
                    std::min(m.rotation_error_deg,
                             geom::rotation_angle_deg(po.pose.rotation, equivalent));
            }
        }
        m.scale_error = 0.0;
        for (int k = 0; k < 3; ++k) {
            m.scale_error =
                std::max(m.scale_error, std::abs(po.pose.scale[k] / go.pose.scale[k] - 1.0));
        }
        m.success = m.translation_error <= th.translation_max &&
                    m.rotation_error_deg <= th.rotation_max_deg &&
                    m.scale_error <= th.scale_max_ratio;
        if (m.success) counts[go.category].first += 1;
        report.matches.push_back(m);
    }

    report.counts = counts;
    int success_total = 0, gt_total = 0;
    double acc_sum = 0.0;
    for (const auto& [cat, c] : counts) {
        const double acc = static_cast<double>(c.first) / static_cast<double>(c.second);
        report.per_category[cat] = acc;
        acc_sum += acc;
        success_total += c.first;
        gt_total += c.second;
    }
    report.class_average = counts.empty() ? 1.0 : acc_sum / static_cast<double>(counts.size());
    report.instance_average =
        gt_total == 0 ? 1.0 : static_cast<double>(success_total) / static_cast<double>(gt_total);
    return report;
}

struct LayoutReport {
    double corner_precision = 1.0, corner_recall = 1.0;
    double edge_precision = 1.0, edge_recall = 1.0;
    double quad_precision = 1.0, quad_recall = 1.0;
    int corner_correct = 0, edge_correct = 0, quad_correct = 0;
    int corner_pred = 0, edge_pred = 0, quad_pred = 0;
    int corner_gt = 0, edge_gt = 0, quad_gt = 0;
};

/// Corner/edge/quad precision-recall. Corners are matched one-to-one
/// greedily by ascending distance, only within the radius (ascending order
/// makes the match set under a tighter radius a subset of the looser one).
/// An edge is correct iff its endpoints' matches form a ground-truth edge; a
/// quad is correct iff its matched corner index set equals a ground-truth
/// quad's set. Empty denominators score 1.
inline LayoutReport layout_prf(const LayoutGraph& pred, const LayoutGraph& gt,
                               const MetricThresholds& th) {
    th.validate();
    struct Pair {
        double dist;
        int p, g;
    };
    std::vector<Pair> pairs;
    for (int p = 0; p < static_cast<int>(pred.corners.size()); ++p) {
        for (int g = 0; g < static_cast<int>(gt.corners.size()); ++g) {
            const double d = (pred.corners[p] - gt.corners[g]).norm();
            if (d <= th.corner_radius) pairs.push_back({d, p, g});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return std::tie(a.p, a.g) < std::tie(b.p, b.g);
    });
    std::vector<int> pred_to_gt(pred.corners.size(), -1), gt_to_pred(gt.corners.size(), -1);
    for (const Pair& pr : pairs) {
        if (pred_to_gt[pr.p] >= 0 || gt_to_pred[pr.g] >= 0) continue;
        pred_to_gt[pr.p] = pr.g;
        gt_to_pred[pr.g] = pr.p;
    }

    LayoutReport r;
    r.corner_pred = static_cast<int>(pred.corners.size());
    r.corner_gt = static_cast<int>(gt.corners.size());
    for (int g : pred_to_gt) {
        if (g >= 0) ++r.corner_correct;
    }

    std::set<std::pair<int, int>> gt_edges(gt.edges.begin(), gt.edges.end());
    r.edge_pred = static_cast<int>(pred.edges.size());
    r.edge_gt = static_cast<int>(gt.edges.size());
    for (const auto& [a, b] : pred.edges) {
        const int ga = pred_to_gt[a], gb = pred_to_gt[b];
        if (ga < 0 || gb < 0) continue;
        if (gt_edges.count({std::min(ga, gb), std::max(ga, gb)})) ++r.edge_correct;
    }

    std::set<std::array<int, 4>> gt_quads;
    for (const auto& q : gt.quads) {
        std::array<int, 4> s = q;
        std::sort(s.begin(), s.end());
        gt_quads.insert(s);
    }
    r.quad_pred = static_cast<int>(pred.quads.size());
    r.quad_gt = static_cast<int>(gt.quads.size());
    for (const auto& q : pred.quads) {
        std::array<int, 4> s{};
        bool all_matched = true;
        for (int k = 0; k < 4; ++k) {
            s[k] = pred_to_gt[q[k]];
            all_matched = all_matched && s[k] >= 0;
        }
        if (!all_matched) continue;
        std::sort(s.begin(), s.end());
        if (gt_quads.count(s)) ++r.quad_correct;
    }

    const auto ratio = [](int num, int den) {
        return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    r.corner_precision = ratio(r.corner_correct, r.corner_pred);
    r.corner_recall = ratio(r.corner_correct, r.corner_gt);
    r.edge_precision = ratio(r.edge_correct, r.edge_pred);
    r.edge_recall = ratio(r.edge_correct, r.edge_gt);
    r.quad_precision = ratio(r.quad_correct, r.quad_pred);
    r.quad_recall = ratio(r.quad_correct, r.quad_gt);
    return r;
}

/// Merge per-scene layout counts into one pooled report.
/// Pool per-category success/gt counts across scenes and recompute the
/// averages. Matches are not carried over.
inline AlignmentReport merge_alignment_reports(const std::vector<AlignmentReport>& reports) {
    AlignmentReport sum;
    for (const AlignmentReport& r : reports) {
        for (const auto& [cat, counts] : r.counts) {
            sum.counts[cat].first += counts.first;
            sum.counts[cat].second += counts.second;
        }
    }
    int successes = 0, total = 0;
    double class_sum = 0.0;
    for (const auto& [cat, counts] : sum.counts) {
        const double acc = counts.second == 0
                               ? 1.0
                               : static_cast<double>(counts.first) / counts.second;
        sum.per_category[cat] = acc;
        class_sum += acc;
        successes += counts.first;
        total += counts.second;
    }
    sum.class_average = sum.counts.empty() ? 1.0 : class_sum / sum.counts.size();
    sum.instance_average = total == 0 ? 1.0 : static_cast<double>(successes) / total;
    return sum;
}

inline LayoutReport merge_layout_reports(const std::vector<LayoutReport>& reports) {
    LayoutReport sum;
    for (const LayoutReport& r : reports) {
        sum.corner_correct += r.corner_correct;
        sum.edge_correct += r.edge_correct;
        sum.quad_correct += r.quad_correct;
        sum.corner_pred += r.corner_pred;
        sum.edge_pred += r.edge_pred;
        sum.quad_pred += r.quad_pred;
        sum.corner_gt += r.corner_gt;
        sum.edge_gt += r.edge_gt;
        sum.quad_gt += r.quad_gt;
    }
    const auto ratio = [](int num, int den) {
        return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    sum.corner_precision = ratio(sum.corner_correct, sum.corner_pred);
    sum.corner_recall = ratio(sum.corner_correct, sum.corner_gt);
    sum.edge_precision = ratio(sum.edge_correct, sum.edge_pred);
    sum.edge_recall = ratio(sum.edge_correct, sum.edge_gt);
    sum.quad_precision = ratio(sum.quad_correct, sum.quad_pred);
    sum.quad_recall = ratio(sum.quad_correct, sum.quad_gt);
    return sum;
}

namespace detail {

inline std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%6.2f", 100.0 * v);
    return buf;
}

}  // namespace detail

/// Accuracy table, categories as columns, one method per row.
/// Scale criterion: max per-axis ratio error (the stricter reading of "20%").
inline std::string format_alignment_table(const AlignmentReport& report,
                                          const std::string& method = "ours") {
    std::string header = "method              ";
    std::string row = method;
    row.resize(20, ' ');
    for (const auto& [cat, acc] : report.per_category) {
        std::string col = cat;
        col.resize(std::max<std::size_t>(cat.size(), 8), ' ');
        header += " " + col;
        std::string cell = detail::pct(acc);
        cell.resize(std::max<std::size_t>(cat.size(), 8), ' ');
        row += " " + cell;
    }
    header += " class avg.   avg.";
    row += " " + detail::pct(report.class_average) + "     " + detail::pct(report.instance_average);
    return header + "\n" + row + "\n";
}

/// Precision/recall table over corners, edges, and quads.
inline std::string format_layout_table(const LayoutReport& r, const std::string& method = "ours") {
    std::string header =
        "method               corner P  corner R   edge P   edge R   quad P   quad R";
    std::string row = method;
    row.resize(20, ' ');
    row += "  " + detail::pct(r.corner_precision) + "   " + detail::pct(r.corner_recall) + "  " +
           detail::pct(r.edge_precision) + "  " + detail::pct(r.edge_recall) + "  " +
           detail::pct(r.quad_precision) + "  " + detail::pct(r.quad_recall);
    return header + "\n" + row + "\n";
}

}  // namespace scenecad::metrics
