#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "scenecad/mlp.hpp"
#include "scenecad/relations.hpp"

namespace scenecad::mpnn {

using relations::GraphEdge;
using relations::Relation;
using relations::SceneGraph;

/// Node and edge features after message passing. Node features are frozen
/// copies of the graph's; only edge features are produced by the messages.
struct MessageState {
    std::vector<VectorXd> node_features;
    std::vector<VectorXd> edge_features;  // parallel to graph.edges
    int step = 0;
};

/// Message input for edge (i,j): concat(h_i, h_j - h_i).
inline VectorXd message_input(const VectorXd& h_i, const VectorXd& h_j) {
    VectorXd x(h_i.size() * 2);
    x << h_i, h_j - h_i;
    return x;
}

/// One edge feature per graph edge: h_{i,j} = f_e(concat(h_i, h_j - h_i)),
/// repeated `steps` times. Node features are held fixed across steps, so
/// with the node-update rule left out extra steps recompute the same values;
/// the step count stays configurable.
inline MessageState message_pass(const SceneGraph& graph, const MlpModel& f_e, int steps = 1) {
    if (steps < 1) {
        throw InvalidInput("message_pass: steps must be >= 1");
    }
    for (const VectorXd& h : graph.features) {
        if (h.size() != graph.features.front().size()) {
            throw InvalidInput("message_pass: node feature lengths disagree");
        }
    }
    MessageState st;
    st.node_features = graph.features;
    st.edge_features.resize(graph.edges.size());
    if (!graph.edges.empty()) {
        if (graph.features.empty() ||
            f_e.input_width() != 2 * graph.features.front().size()) {
            throw InvalidInput("message_pass: f_e input width must be twice the node width");
        }
        for (int t = 0; t < steps; ++t) {
            for (std::size_t e = 0; e < graph.edges.size(); ++e) {
                const GraphEdge& ed = graph.edges[e];
                st.edge_features[e] =
                    mlp_forward(f_e, message_input(st.node_features[ed.a], st.node_features[ed.b]));
            }
        }
    }
    st.step = steps;
    return st;
}

inline constexpr int kRelationHidden = 128;

/// The learned relation classifier: a shared message MLP and one
/// classification head per relation family.
struct RelationModels {
    MlpModel f_e;           // 2*node_dim -> kRelationHidden
    MlpModel support_head;  // kRelationHidden -> 3
    MlpModel angle_head;    // kRelationHidden -> bin_count
};

inline RelationModels make_relation_models(std::uint64_t seed,
                                           int node_dim = relations::kNodeFeatureDim,
                                           int bin_count = 6) {
    Rng rng(seed);
    RelationModels m;
    m.f_e = MlpModel({2 * node_dim, kRelationHidden, kRelationHidden, kRelationHidden}, rng);
    m.support_head = MlpModel(
        {kRelationHidden, kRelationHidden, kRelationHidden, relations::kSupportClassCount}, rng);
    m.angle_head = MlpModel({kRelationHidden, kRelationHidden, kRelationHidden, bin_count}, rng);
    return m;
}

/// Argmax relations for every edge of the graph: the 3-class support head on
/// object-quad edges, the angle head on object-object edges.
inline std::vector<Relation> predict_relations(const SceneGraph& graph,
                                               const RelationModels& models, int steps = 1) {
    const MessageState st = message_pass(graph, models.f_e, steps);
    std::vector<Relation> out;
    out.reserve(graph.edges.size());
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
        const GraphEdge& ed = graph.edges[e];
        Relation r;
        if (graph.is_object_quad(ed)) {
            const VectorXd logits = mlp_forward(models.support_head, st.edge_features[e]);
            int best = 0;
            for (int i = 1; i < logits.size(); ++i)
                if (logits[i] > logits[best]) best = i;
            r.source = ed.a;
            r.target = ed.b - graph.object_count;
            r.kind = relations::support_kind_from_class(best);
        } else if (graph.is_object_object(ed)) {
            const VectorXd logits = mlp_forward(models.angle_head, st.edge_features[e]);
            int best = 0;
            for (int i = 1; i < logits.size(); ++i)
                if (logits[i] > logits[best]) best = i;
            r.source = ed.a;
            r.target = ed.b;
            r.kind = Relation::Kind::AngleBin;
            r.bin = best;
        } else {
            continue;  // quad-quad edges never occur in built graphs
        }
        out.push_back(r);
    }
    return out;
}

/// Held-out accuracy per head over the labeled edges of a graph set.
/// NaN for a head with no labeled edges.
struct RelationAccuracy {
    double support = std::numeric_limits<double>::quiet_NaN();
    double angle = std::numeric_limits<double>::quiet_NaN();
    int support_total = 0;
    int angle_total = 0;
};

inline RelationAccuracy evaluate_relations(const RelationModels& models,
                                           const std::vector<SceneGraph>& graphs, int steps = 1) {
    RelationAccuracy acc;
    int support_hit = 0, angle_hit = 0;
    for (const SceneGraph& g : graphs) {
        const MessageState st = message_pass(g, models.f_e, steps);
        for (std::size_t e = 0; e < g.edges.size(); ++e) {
            const GraphEdge& ed = g.edges[e];
            if (ed.support_label >= 0) {
                const VectorXd logits = mlp_forward(models.support_head, st.edge_features[e]);
                int best = 0;
                for (int i = 1; i < logits.size(); ++i)
                    if (logits[i] > logits[best]) best = i;
                ++acc.support_total;
                if (best == ed.support_label) ++support_hit;
            }
            if (ed.angle_label >= 0) {
                const VectorXd logits = mlp_forward(models.angle_head, st.edge_features[e]);
                int best = 0;
                for (int i = 1; i < logits.size(); ++i)
                    if (logits[i] > logits[best]) best = i;
                ++acc.angle_total;
                if (best == ed.angle_label) ++angle_hit;
            }
        }
    }
    if (acc.support_total > 0) acc.support = static_cast<double>(support_hit) / acc.support_total;
    if (acc.angle_total > 0) acc.angle = static_cast<double>(angle_hit) / acc.angle_total;
    return acc;
}

struct RelationTrainLog {
    std::vector<double> epoch_loss;        // mean per-sample loss
    std::vector<double> support_accuracy;  // held-out, per epoch (NaN if none)
    std::vector<double> angle_accuracy;
};

/// Joint mini-batch gradient descent over all labeled edges: each sample's
/// loss backpropagates through its head into the shared f_e. Deterministic
/// given (graph order, seed): the shuffle is seeded and gradients accumulate
/// in batch order.
inline RelationTrainLog train_relations(RelationModels& models,
                                        const std::vector<SceneGraph>& train,
                                        const std::vector<SceneGraph>& holdout,
                                        const TrainConfig& cfg, int steps = 1) {
    cfg.validate();
    if (steps < 1) {
        throw InvalidInput("train_relations: steps must be >= 1");
    }

    // labels never move, and neither do node features, so the message inputs
    // can be gathered once
    struct EdgeSample {
        VectorXd x;  // message input, 2 * node_dim
        int label = 0;
        bool support = false;  // which head consumes it
    };
    std::vector<EdgeSample> samples;
    for (const SceneGraph& g : train) {
        for (const GraphEdge& ed : g.edges) {
            if (ed.support_label < 0 && ed.angle_label < 0) continue;
            if (ed.support_label >= relations::kSupportClassCount ||
                ed.angle_label >= models.angle_head.output_width()) {
                throw InvalidInput("train_relations: label out of range");
            }
            if (ed.support_label >= 0) {
                samples.push_back({message_input(g.features[ed.a], g.features[ed.b]),
                                   ed.support_label, true});
            }
            if (ed.angle_label >= 0) {
                samples.push_back({message_input(g.features[ed.a], g.features[ed.b]),
                                   ed.angle_label, false});
            }
        }
    }
    if (samples.empty()) {
        throw InvalidInput("train_relations: no labeled edges in the training set");
    }

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    RelationTrainLog log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        double loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t end = std::min(pos + cfg.batch_size, order.size());
            Gradients fe_acc = zero_gradients(models.f_e);
            Gradients support_acc = zero_gradients(models.support_head);
            Gradients angle_acc = zero_gradients(models.angle_head);
            for (std::size_t i = pos; i < end; ++i) {
                const EdgeSample& s = samples[order[i]];
                MlpModel& head = s.support ? models.support_head : models.angle_head;
                Gradients& head_acc = s.support ? support_acc : angle_acc;
                const ForwardTrace fe_trace = forward_trace(models.f_e, s.x);
                const ForwardTrace head_trace = forward_trace(head, fe_trace.act.back());
                loss_sum += loss_value(LossKind::CrossEntropy, head_trace.act.back(), s.label);
                const Gradients head_g = backprop(
                    head, head_trace,
                    loss_grad(LossKind::CrossEntropy, head_trace.act.back(), s.label));
                head_acc.add_scaled(head_g, 1.0);
                fe_acc.add_scaled(backprop(models.f_e, fe_trace, head_g.input), 1.0);
            }
            const double step = cfg.learning_rate / static_cast<double>(end - pos);
            const auto apply = [step](MlpModel& m, const Gradients& g) {
                auto& layers = m.layers();
                for (std::size_t l = 0; l < layers.size(); ++l) {
                    layers[l].weight -= step * g.layers[l].weight;
                    layers[l].bias -= step * g.layers[l].bias;
                }
            };
            apply(models.f_e, fe_acc);
            apply(models.support_head, support_acc);
            apply(models.angle_head, angle_acc);
            pos = end;
        }
        const RelationAccuracy acc = evaluate_relations(models, holdout, steps);
        log.epoch_loss.push_back(loss_sum / static_cast<double>(samples.size()));
        log.support_accuracy.push_back(acc.support);
        log.angle_accuracy.push_back(acc.angle);
    }
    return log;
}

}  // namespace scenecad::mpnn
