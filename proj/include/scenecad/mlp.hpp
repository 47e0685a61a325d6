#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "scenecad/error.hpp"
#include "scenecad/random.hpp"

namespace scenecad::mpnn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class LossKind {
    BinaryCrossEntropy,  // single logit, sigmoid + BCE, labels 0/1
    CrossEntropy,        // k logits, softmax + NLL, labels 0..k-1
};

struct Layer {
    MatrixXd weight;  // out x in
    VectorXd bias;    // out
};

/// Fully connected net: affine layers with rectifier on hidden layers and
/// identity on the output layer.
class MlpModel {
public:
    MlpModel() = default;

    /// Fan-in-scaled uniform init: W ~ U(-1/sqrt(in), 1/sqrt(in)), b = 0.
    MlpModel(const std::vector<int>& widths, Rng& rng) : widths_(widths) {
        check_widths(widths);
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const int in = widths[l], out = widths[l + 1];
            Layer layer{MatrixXd(out, in), VectorXd::Zero(out)};
            const double a = 1.0 / std::sqrt(static_cast<double>(in));
            for (int i = 0; i < out; ++i)
                for (int j = 0; j < in; ++j)
                    layer.weight(i, j) = rng.uniform(-a, a);
            layers_.push_back(std::move(layer));
        }
    }

    static MlpModel zeros(const std::vector<int>& widths) {
        check_widths(widths);
        MlpModel m;
        m.widths_ = widths;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            m.layers_.push_back({MatrixXd::Zero(widths[l + 1], widths[l]),
                                 VectorXd::Zero(widths[l + 1])});
        }
        return m;
    }

    static MlpModel from_layers(std::vector<Layer> layers) {
        if (layers.empty()) {
            throw InvalidInput("MlpModel: at least one layer required");
        }
        MlpModel m;
        m.widths_.push_back(static_cast<int>(layers[0].weight.cols()));
        for (std::size_t l = 0; l < layers.size(); ++l) {
            if (layers[l].weight.rows() != layers[l].bias.size()) {
                throw InvalidInput("MlpModel: bias length must match weight rows");
            }
            if (l > 0 && layers[l].weight.cols() != layers[l - 1].weight.rows()) {
                throw InvalidInput("MlpModel: adjacent layer widths disagree");
            }
            m.widths_.push_back(static_cast<int>(layers[l].weight.rows()));
        }
        m.layers_ = std::move(layers);
        return m;
    }

    int input_width() const { return widths_.front(); }
    int output_width() const { return widths_.back(); }
    const std::vector<int>& widths() const { return widths_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    bool empty() const { return layers_.empty(); }

private:
    static void check_widths(const std::vector<int>& widths) {
        if (widths.size() < 2) {
            throw InvalidInput("MlpModel: need at least input and output widths");
        }
        for (int w : widths) {
            if (w <= 0) throw InvalidInput("MlpModel: widths must be positive");
        }
    }

    std::vector<int> widths_;
    std::vector<Layer> layers_;
};

inline double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Max-shifted softmax; strictly positive, sums to 1.
inline VectorXd softmax(const VectorXd& logits) {
    const double m = logits.maxCoeff();
    VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

/// Activations per layer; act[0] is the input, act.back() the output.
struct ForwardTrace {
    std::vector<VectorXd> pre;  // pre-activation per layer
    std::vector<VectorXd> act;  // act.size() == layers + 1
};

inline ForwardTrace forward_trace(const MlpModel& model, const VectorXd& x) {
    if (x.size() != model.input_width()) {
        throw InvalidInput("mlp forward: input width mismatch");
    }
    ForwardTrace t;
    t.act.push_back(x);
    const auto& layers = model.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        VectorXd z = layers[l].weight * t.act.back() + layers[l].bias;
        t.pre.push_back(z);
        if (l + 1 < layers.size()) {
            t.act.push_back(z.cwiseMax(0.0));
        } else {
            t.act.push_back(z);
        }
    }
    return t;
}

inline VectorXd mlp_forward(const MlpModel& model, const VectorXd& x) {
    return forward_trace(model, x).act.back();
}

struct Gradients {
    std::vector<Layer> layers;  // same shapes as the model
    VectorXd input;             // dL/dx

    void add_scaled(const Gradients& o, double c) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].weight += c * o.layers[l].weight;
            layers[l].bias += c * o.layers[l].bias;
        }
    }
};

inline Gradients zero_gradients(const MlpModel& model) {
    Gradients g;
    for (const Layer& l : model.layers()) {
        g.layers.push_back({MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                            VectorXd::Zero(l.bias.size())});
    }
    g.input = VectorXd::Zero(model.input_width());
    return g;
}

/// Backpropagate dL/doutput through the trace.
inline Gradients backprop(const MlpModel& model, const ForwardTrace& trace,
                          const VectorXd& dloss_doutput) {
    const auto& layers = model.layers();
    Gradients g = zero_gradients(model);
    VectorXd delta = dloss_doutput;
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        if (l + 1 < static_cast<int>(layers.size())) {
            // through the rectifier of layer l's output
            delta = (trace.pre[l].array() > 0.0).select(delta, VectorXd::Zero(delta.size()));
        }
        g.layers[l].weight = delta * trace.act[l].transpose();
        g.layers[l].bias = delta;
        delta = layers[l].weight.transpose() * delta;
    }
    g.input = delta;
    return g;
}

inline double loss_value(LossKind kind, const VectorXd& output, int target) {
    switch (kind) {
        case LossKind::BinaryCrossEntropy: {
            if (output.size() != 1) {
                throw InvalidInput("BCE loss expects a single logit");
            }
            if (target != 0 && target != 1) {
                throw InvalidInput("BCE loss: target must be 0 or 1");
            }
            const double z = output[0];
            // log(1 + e^z) - y z, computed stably
            const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
            return softplus - target * z;
        }
        case LossKind::CrossEntropy: {
            if (target < 0 || target >= output.size()) {
                throw InvalidInput("cross-entropy loss: target class out of range");
            }
            const double m = output.maxCoeff();
            const double lse = m + std::log((output.array() - m).exp().sum());
            return lse - output[target];
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline VectorXd loss_grad(LossKind kind, const VectorXd& output, int target) {
    switch (kind) {
        case LossKind::BinaryCrossEntropy: {
            if (output.size() != 1 || (target != 0 && target != 1)) {
                throw InvalidInput("BCE loss: bad logit width or target");
            }
            VectorXd g(1);
            g[0] = sigmoid(output[0]) - target;
            return g;
        }
        case LossKind::CrossEntropy: {
            if (target < 0 || target >= output.size()) {
                throw InvalidInput("cross-entropy loss: target class out of range");
            }
            VectorXd g = softmax(output);
            g[target] -= 1.0;
            return g;
        }
    }
    return {};
}

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Analytic gradients of the scalar loss w.r.t. all parameters and the input.
inline LossAndGradients mlp_gradients(const MlpModel& model, const VectorXd& x,
                                      LossKind kind, int target) {
    const ForwardTrace trace = forward_trace(model, x);
    LossAndGradients r;
    r.loss = loss_value(kind, trace.act.back(), target);
    r.grads = backprop(model, trace, loss_grad(kind, trace.act.back(), target));
    return r;
}

inline int predict_class(const MlpModel& model, LossKind kind, const VectorXd& x) {
    const VectorXd out = mlp_forward(model, x);
    if (kind == LossKind::BinaryCrossEntropy) {
        return out[0] >= 0.0 ? 1 : 0;
    }
    int best = 0;
    for (int i = 1; i < out.size(); ++i) {
        if (out[i] > out[best]) best = i;
    }
    return best;
}

struct TrainConfig {
    double learning_rate = 0.05;
    int epochs = 60;
    int batch_size = 16;
    std::uint64_t seed = 1;

    void validate() const {
        if (learning_rate <= 0.0 || epochs <= 0 || batch_size <= 0) {
            throw InvalidInput("TrainConfig: rate, epochs and batch size must be positive");
        }
    }
};

struct Sample {
    VectorXd x;
    int label = 0;
};

struct TrainLog {
    std::vector<double> epoch_loss;        // mean per-sample loss per epoch
    std::vector<double> holdout_accuracy;  // NaN when no holdout set given
};

inline double classification_accuracy(const MlpModel& model, LossKind kind,
                                      const std::vector<Sample>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::size_t hit = 0;
    for (const Sample& s : samples) {
        if (predict_class(model, kind, s.x) == s.label) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(samples.size());
}

/// Mini-batch gradient descent. Deterministic given (samples order, seed):
/// the per-epoch shuffle comes from the config seed and gradients accumulate
/// in batch order.
inline TrainLog train_classifier(MlpModel& model, const std::vector<Sample>& train,
                                 const std::vector<Sample>& holdout, LossKind kind,
                                 const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) {
        throw InvalidInput("train_classifier: empty dataset");
    }
    const int classes = kind == LossKind::BinaryCrossEntropy ? 2 : model.output_width();
    for (const Sample& s : train) {
        if (s.label < 0 || s.label >= classes) {
            throw InvalidInput("train_classifier: label out of range");
        }
    }
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    TrainLog log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        double loss_sum = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t end = std::min(pos + cfg.batch_size, order.size());
            Gradients acc = zero_gradients(model);
            for (std::size_t i = pos; i < end; ++i) {
                const Sample& s = train[order[i]];
                LossAndGradients lg = mlp_gradients(model, s.x, kind, s.label);
                loss_sum += lg.loss;
                acc.add_scaled(lg.grads, 1.0);
            }
            const double step = cfg.learning_rate / static_cast<double>(end - pos);
            auto& layers = model.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                layers[l].weight -= step * acc.layers[l].weight;
                layers[l].bias -= step * acc.layers[l].bias;
            }
            pos = end;
        }
        log.epoch_loss.push_back(loss_sum / static_cast<double>(train.size()));
        log.holdout_accuracy.push_back(classification_accuracy(model, kind, holdout));
    }
    return log;
}

}  // namespace scenecad::mpnn
