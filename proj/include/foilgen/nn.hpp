#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "foilgen/error.hpp"

// Dense multilayer perceptrons with hand-written reverse mode. Batches are
// row-major in the sense that each row of an input matrix is one sample.
namespace foilgen::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { LeakyRelu, Tanh, Sigmoid, Identity };

inline constexpr double kLeakySlope = 0.01;

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::LeakyRelu: return "leaky_relu";
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "?";
}

inline double activate(Activation a, double v) {
    switch (a) {
        case Activation::LeakyRelu: return v > 0.0 ? v : kLeakySlope * v;
        case Activation::Tanh: return std::tanh(v);
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-v));
        case Activation::Identity: return v;
    }
    return v;
}

struct DenseLayer {
    Matrix weights;  // out x in
    Vector bias;     // out
    Activation activation = Activation::Identity;

    Eigen::Index in() const { return weights.cols(); }
    Eigen::Index out() const { return weights.rows(); }
};

class Mlp {
public:
    std::vector<DenseLayer> layers;

    Eigen::Index input_width() const { return layers.front().in(); }
    Eigen::Index output_width() const { return layers.back().out(); }

    /// Must be called after any in-place parameter change; invalidates caches.
    void touch() { ++revision_; }
    std::uint64_t revision() const { return revision_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }

private:
    std::uint64_t revision_ = 0;
};

/// Glorot-uniform weights, zero biases.
inline Mlp make_mlp(std::span<const int> widths, std::span<const Activation> activations, std::mt19937_64& rng) {
    if (widths.size() < 2 || activations.size() != widths.size() - 1)
        throw Error(Errc::ShapeMismatch, "need one activation per layer");
    Mlp net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer;
        layer.weights.resize(fan_out, fan_in);
        for (Eigen::Index r = 0; r < fan_out; ++r)
            for (Eigen::Index c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
        layer.bias = Vector::Zero(fan_out);
        layer.activation = activations[l];
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct ForwardCache {
    const Mlp* net = nullptr;
    std::uint64_t revision = 0;
    std::vector<Matrix> inputs;   // input to layer l
    std::vector<Matrix> pre;      // affine output of layer l
    std::vector<Matrix> outputs;  // activated output of layer l

    const Matrix& output() const { return outputs.back(); }
};

inline Matrix activate(Activation a, const Matrix& pre) {
    switch (a) {
        case Activation::LeakyRelu: return pre.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
        case Activation::Tanh: return pre.array().tanh().matrix();
        case Activation::Sigmoid: return pre.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::Identity: return pre;
    }
    return pre;
}

inline Matrix apply_layer(const DenseLayer& layer, const Matrix& x, Matrix* pre_out = nullptr) {
    Matrix pre = (x * layer.weights.transpose()).rowwise() + layer.bias.transpose();
    Matrix out = activate(layer.activation, pre);
    if (pre_out) *pre_out = std::move(pre);
    return out;
}

inline ForwardCache forward(const Mlp& net, const Matrix& x) {
    if (net.layers.empty()) throw Error(Errc::ShapeMismatch, "empty network");
    if (x.cols() != net.input_width())
        throw Error(Errc::ShapeMismatch, "input width " + std::to_string(x.cols()) + " != " +
                                             std::to_string(net.input_width()));
    ForwardCache cache;
    cache.net = &net;
    cache.revision = net.revision();
    const auto n = net.layers.size();
    cache.inputs.resize(n);
    cache.pre.resize(n);
    cache.outputs.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        cache.inputs[l] = l == 0 ? x : cache.outputs[l - 1];
        cache.outputs[l] = apply_layer(net.layers[l], cache.inputs[l], &cache.pre[l]);
    }
    return cache;
}

/// Forward pass without keeping intermediates.
inline Matrix predict(const Mlp& net, const Matrix& x) {
    if (net.layers.empty() || x.cols() != net.input_width())
        throw Error(Errc::ShapeMismatch, "input width mismatch");
    Matrix h = x;
    for (const auto& layer : net.layers) h = apply_layer(layer, h);
    return h;
}

/// Activated output of hidden layer `layer` (0-based).
inline Matrix hidden(const Mlp& net, const Matrix& x, std::size_t layer) {
    if (layer >= net.layers.size() || x.cols() != net.input_width())
        throw Error(Errc::ShapeMismatch, "bad layer index or input width");
    Matrix h = x;
    for (std::size_t l = 0; l <= layer; ++l) h = apply_layer(net.layers[l], h);
    return h;
}

/// Extra gradient injected at the activated output of an intermediate layer.
struct Tap {
    std::size_t layer = 0;
    Matrix grad;
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> bias;
    Matrix input;  // d loss / d input batch
};

inline Gradients backward(const Mlp& net, const ForwardCache& cache, const Matrix& upstream,
                          std::span<const Tap> taps = {}, bool param_grads = true) {
    if (cache.net != &net || cache.revision != net.revision())
        throw Error(Errc::StaleCache, "cache does not belong to the current parameters");
    const auto n = net.layers.size();
    if (upstream.rows() != cache.output().rows() || upstream.cols() != cache.output().cols())
        throw Error(Errc::ShapeMismatch, "upstream gradient shape does not match output");
    for (const auto& t : taps) {
        if (t.layer >= n || t.grad.rows() != cache.outputs[t.layer].rows() ||
            t.grad.cols() != cache.outputs[t.layer].cols())
            throw Error(Errc::ShapeMismatch, "tap gradient shape mismatch");
    }

    Gradients g;
    if (param_grads) {
        g.weights.resize(n);
        g.bias.resize(n);
    }
    Matrix grad = upstream;
    for (std::size_t l = n; l-- > 0;) {
        for (const auto& t : taps)
            if (t.layer == l) grad += t.grad;
        const auto& layer = net.layers[l];
        const auto act = layer.activation;
        const auto& pre = cache.pre[l];
        const auto& out = cache.outputs[l];
        Matrix dpre;
        switch (act) {
            case Activation::LeakyRelu:
                dpre = grad.cwiseProduct(pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; }));
                break;
            case Activation::Tanh: dpre = (grad.array() * (1.0 - out.array().square())).matrix(); break;
            case Activation::Sigmoid: dpre = (grad.array() * out.array() * (1.0 - out.array())).matrix(); break;
            case Activation::Identity: dpre = grad; break;
        }
        if (param_grads) {
            g.weights[l] = dpre.transpose() * cache.inputs[l];
            g.bias[l] = dpre.colwise().sum().transpose();
        }
        grad = dpre * layer.weights;
    }
    g.input = std::move(grad);
    return g;
}

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;
};

inline AdamState make_adam(const Mlp& net, double lr) {
    if (!(lr > 0.0)) throw Error(Errc::ConfigInvalid, "learning rate must be positive");
    AdamState s;
    s.lr = lr;
    for (const auto& l : net.layers) {
        s.m_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        s.v_w.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        s.m_b.push_back(Vector::Zero(l.bias.size()));
        s.v_b.push_back(Vector::Zero(l.bias.size()));
    }
    return s;
}

/// One bias-corrected Adam update over flat buffers; `t` is the 1-based step.
inline void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                        std::span<double> v, std::int64_t t, double lr, double beta1, double beta2, double eps) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
        throw Error(Errc::ShapeMismatch, "adam buffers differ in size");
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

inline void adam_step(AdamState& state, Mlp& net, const Gradients& g) {
    const auto n = net.layers.size();
    if (g.weights.size() != n || g.bias.size() != n || state.m_w.size() != n)
        throw Error(Errc::ShapeMismatch, "gradient/state layer count mismatch");
    ++state.step;
    auto span_of = [](auto& m) { return std::span<double>(m.data(), static_cast<std::size_t>(m.size())); };
    auto cspan_of = [](const auto& m) {
        return std::span<const double>(m.data(), static_cast<std::size_t>(m.size()));
    };
    for (std::size_t l = 0; l < n; ++l) {
        auto& layer = net.layers[l];
        if (g.weights[l].rows() != layer.weights.rows() || g.weights[l].cols() != layer.weights.cols() ||
            g.bias[l].size() != layer.bias.size())
            throw Error(Errc::ShapeMismatch, "gradient shape mismatch at layer " + std::to_string(l));
        adam_update(span_of(layer.weights), cspan_of(g.weights[l]), span_of(state.m_w[l]), span_of(state.v_w[l]),
                    state.step, state.lr, state.beta1, state.beta2, state.eps);
        adam_update(span_of(layer.bias), cspan_of(g.bias[l]), span_of(state.m_b[l]), span_of(state.v_b[l]),
                    state.step, state.lr, state.beta1, state.beta2, state.eps);
    }
    net.touch();
}

}  // namespace foilgen::nn
