#pragma once

#include "boundarylab/core.hpp"
#include "boundarylab/data.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace boundarylab {

/// Fully connected network: sigmoid on every hidden layer, softmax output.
/// `sizes` = {d, h1, ..., C}; {d, C} is a plain multinomial-logistic model.
struct MlpModel {
    std::vector<int> sizes;
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is sizes[l+1] x sizes[l]
    std::vector<Eigen::VectorXd> biases;

    int input_dim() const { return sizes.front(); }
    int class_count() const { return sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }

    void validate() const {
        require(sizes.size() >= 2, ErrorKind::invalid_argument, "mlp needs at least input and output sizes");
        require(weights.size() + 1 == sizes.size() && biases.size() == weights.size(), ErrorKind::consistency, "mlp layer count mismatch");
        for (std::size_t l = 0; l < weights.size(); ++l) {
            require(weights[l].rows() == sizes[l + 1] && weights[l].cols() == sizes[l] && biases[l].size() == sizes[l + 1],
                    ErrorKind::consistency, "mlp layer " + std::to_string(l) + " has wrong shape");
            require(weights[l].allFinite() && biases[l].allFinite(), ErrorKind::numeric, "mlp parameters must be finite");
        }
    }
};

/// Glorot-uniform weights, zero biases.
inline MlpModel mlp_init(const std::vector<int>& sizes, std::uint64_t seed) {
    require(sizes.size() >= 2, ErrorKind::invalid_argument, "mlp needs at least input and output sizes");
    for (int s : sizes) require(s >= 1, ErrorKind::invalid_argument, "mlp layer sizes must be positive");
    Rng rng(seed);
    MlpModel m;
    m.sizes = sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double a = std::sqrt(6.0 / (sizes[l] + sizes[l + 1]));
        Eigen::MatrixXd w(sizes[l + 1], sizes[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
        m.weights.push_back(std::move(w));
        m.biases.push_back(Eigen::VectorXd::Zero(sizes[l + 1]));
    }
    return m;
}

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double m = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - m).exp();
    return e / e.sum();
}

/// log softmax(logits)[i], computed without forming the probabilities.
inline double log_softmax_at(const Eigen::VectorXd& logits, Eigen::Index i) {
    const double m = logits.maxCoeff();
    return logits[i] - m - std::log((logits.array() - m).exp().sum());
}

struct ForwardResult {
    Eigen::VectorXd logits;
    Eigen::VectorXd probabilities;
};

struct ForwardCache {
    std::vector<Eigen::VectorXd> activations;  // activations[0] = x, then each hidden layer
    Eigen::VectorXd logits;
};

inline ForwardCache mlp_forward_cache(const MlpModel& model, const Vector& x) {
    require(x.size() == model.input_dim(), ErrorKind::invalid_argument,
            "input has dimension " + std::to_string(x.size()) + ", mlp expects " + std::to_string(model.input_dim()));
    ForwardCache c;
    c.activations.push_back(x);
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        Eigen::VectorXd z = model.weights[l] * c.activations.back() + model.biases[l];
        if (l + 1 == model.layer_count()) {
            c.logits = std::move(z);
        } else {
            c.activations.push_back(z.unaryExpr([](double v) { return sigmoid(v); }));
        }
    }
    return c;
}

inline ForwardResult mlp_forward(const MlpModel& model, const Vector& x) {
    auto c = mlp_forward_cache(model, x);
    ForwardResult r{std::move(c.logits), {}};
    r.probabilities = softmax(r.logits);
    return r;
}

/// Arg-max class; ties go to the lower index.
inline int mlp_predict(const MlpModel& model, const Vector& x) {
    const auto logits = mlp_forward_cache(model, x).logits;
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[best]) best = i;
    return static_cast<int>(best);
}

/// Back-propagates dL/dlogits to dL/dx.
inline Eigen::VectorXd mlp_backprop_input(const MlpModel& model, const ForwardCache& cache, Eigen::VectorXd delta) {
    for (std::size_t l = model.layer_count(); l-- > 0;) {
        Eigen::VectorXd up = model.weights[l].transpose() * delta;
        if (l == 0) return up;
        const auto& a = cache.activations[l];
        delta = up.array() * a.array() * (1.0 - a.array());
    }
    return delta;
}

enum class Loss { cross_entropy };

inline double mlp_loss(const MlpModel& model, const Vector& x, int y, Loss = Loss::cross_entropy) {
    const auto logits = mlp_forward_cache(model, x).logits;
    return -log_softmax_at(logits, y);
}

/// Exact gradient of the loss with respect to the input coordinates.
inline Eigen::VectorXd mlp_input_gradient(const MlpModel& model, const Vector& x, int y, Loss = Loss::cross_entropy) {
    require(y >= 0 && y < model.class_count(), ErrorKind::invalid_argument, "label outside model classes");
    const auto cache = mlp_forward_cache(model, x);
    Eigen::VectorXd delta = softmax(cache.logits);
    delta[y] -= 1.0;
    return mlp_backprop_input(model, cache, std::move(delta));
}

/// Rows are gradients of each logit Z_i with respect to x.
inline Eigen::MatrixXd mlp_logit_jacobian(const MlpModel& model, const Vector& x) {
    const auto cache = mlp_forward_cache(model, x);
    const int c = model.class_count();
    Eigen::MatrixXd jac(c, x.size());
    for (int i = 0; i < c; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(c);
        e[i] = 1.0;
        jac.row(i) = mlp_backprop_input(model, cache, std::move(e)).transpose();
    }
    return jac;
}

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double learning_rate = 0.5;
    std::uint64_t seed = 0;
    std::vector<int> hidden{32, 32};

    void validate() const {
        require(epochs >= 1, ErrorKind::invalid_argument, "epochs must be >= 1");
        require(batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be >= 1");
        require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::invalid_argument, "learning_rate must be >= 0");
        for (int h : hidden) require(h >= 1, ErrorKind::invalid_argument, "hidden widths must be positive");
    }
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_trace;  // mean cross-entropy per epoch
};

/// Minibatch SGD on mean cross-entropy.
inline TrainResult mlp_train(const LabeledDataset& train, const TrainConfig& cfg) {
    cfg.validate();
    train.validate();
    require(train.size() >= 1, ErrorKind::invalid_argument, "mlp_train: empty training set");
    std::vector<int> sizes{static_cast<int>(train.dim())};
    sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
    sizes.push_back(train.class_count);
    TrainResult result{mlp_init(sizes, split_seed(cfg.seed, 0)), {}};
    auto& m = result.model;
    Rng order_rng(split_seed(cfg.seed, 1));

    const std::size_t n = train.size();
    const std::size_t layers = m.layer_count();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Eigen::MatrixXd> acts(layers);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const auto b = static_cast<Eigen::Index>(stop - start);
            Eigen::MatrixXd x(b, train.dim());
            for (Eigen::Index r = 0; r < b; ++r) x.row(r) = train.points.row(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]));

            // forward: acts[l] holds the input to layer l, one sample per row
            acts[0] = x;
            Eigen::MatrixXd z;
            for (std::size_t l = 0; l < layers; ++l) {
                z = acts[l] * m.weights[l].transpose();
                z.rowwise() += m.biases[l].transpose();
                if (l + 1 < layers) acts[l + 1] = z.unaryExpr([](double v) { return sigmoid(v); });
            }
            // softmax + loss; delta = (p - onehot) / b
            Eigen::MatrixXd delta(b, m.class_count());
            for (Eigen::Index r = 0; r < b; ++r) {
                const Eigen::VectorXd logits = z.row(r).transpose();
                const int y = train.labels[order[start + static_cast<std::size_t>(r)]];
                epoch_loss -= log_softmax_at(logits, y);
                Eigen::VectorXd p = softmax(logits);
                p[y] -= 1.0;
                delta.row(r) = p.transpose() / static_cast<double>(b);
            }
            for (std::size_t l = layers; l-- > 0;) {
                const Eigen::MatrixXd grad_w = delta.transpose() * acts[l];
                const Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
                if (l > 0) {
                    Eigen::MatrixXd up = delta * m.weights[l];
                    delta = up.array() * acts[l].array() * (1.0 - acts[l].array());
                }
                m.weights[l] -= cfg.learning_rate * grad_w;
                m.biases[l] -= cfg.learning_rate * grad_b;
            }
        }
        epoch_loss /= static_cast<double>(n);
        bool finite = std::isfinite(epoch_loss);
        for (std::size_t l = 0; finite && l < layers; ++l) finite = m.weights[l].allFinite() && m.biases[l].allFinite();
        if (!finite) fail(ErrorKind::training_diverged, "non-finite loss or parameters at epoch " + std::to_string(epoch));
        result.loss_trace.push_back(epoch_loss);
    }
    m.validate();
    return result;
}

inline double mlp_accuracy(const MlpModel& model, const LabeledDataset& ds) {
    if (ds.size() == 0) return 0.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) ok += mlp_predict(model, ds.point(i)) == ds.labels[i];
    return static_cast<double>(ok) / static_cast<double>(ds.size());
}

}  // namespace boundarylab
