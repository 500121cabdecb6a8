#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "robustlab/dataio.hpp"
#include "robustlab/rng.hpp"
#include "robustlab/tensor.hpp"

namespace robustlab {

// log(1 + exp(-m)), overflow-safe: the binary margin loss. Large positive
// margins underflow to 0, large negative margins go linear.
inline double softplus_of_neg(double m) {
    if (m >= 0) return std::log1p(std::exp(-m));
    return -m + std::log1p(std::exp(m));
}

// sigma(-m) = 1/(1+e^m), the weight the margin loss puts on one example.
inline double sigmoid_of_neg(double m) {
    if (m >= 0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

// log(1 + exp(-s*z)) with scale s >= 0. At s=0 the loss flattens to ln 2.
double scaled_softplus(double z, double s);

struct LossFn {
    enum Kind { SoftplusBinary, SoftmaxXent };
    Kind kind = SoftplusBinary;
    double smoothing = 0.0;  // label smoothing fraction, SoftmaxXent only
};

// ---------------------------------------------------------------------------
// Binary linear model: logit = w.x + b, labels y in {+1,-1}.

struct LinearLogistic {
    Tensor w;
    double b = 0.0;
};

double predict(const LinearLogistic& m, const Tensor& x);

struct LinearLossGrads {
    double loss;
    Tensor grad_w;
    double grad_b;
    Tensor input_grad;  // == -y * sigma(-y(w.x+b)) * w
};

LinearLossGrads loss_and_grads(const LinearLogistic& m, const Tensor& x, int y);

// (w.x + b)/||w||2 — Euclidean distance to the decision plane, signed by side.
double signed_distance(const LinearLogistic& m, const Tensor& x);

// w = mean(class +1 images) - mean(class -1 images), b = 0. Call on the
// training split.
LinearLogistic expert_init(const BinaryView& train);

// ---------------------------------------------------------------------------
// Fixed ConvNet: Conv 8x8x3x32 /2 Same -> relu -> Conv 6x6x32x64 /2 Valid ->
// relu -> Conv 5x5x64x64 /1 Valid -> relu -> flatten(256) -> Dense 256x10.
// No biases anywhere, so scaling every weight by λ scales logits by λ^4.

template <typename T>
struct ConvNetT {
    TensorT<T> conv1{std::vector<std::size_t>{8, 8, 3, 32}};
    TensorT<T> conv2{std::vector<std::size_t>{6, 6, 32, 64}};
    TensorT<T> conv3{std::vector<std::size_t>{5, 5, 64, 64}};
    TensorT<T> fc{std::vector<std::size_t>{256, 10}};

    std::size_t param_count() const {
        return conv1.size() + conv2.size() + conv3.size() + fc.size();
    }

    template <typename F>
    void for_each_tensor(F&& f) {
        f(conv1);
        f(conv2);
        f(conv3);
        f(fc);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        f(conv1);
        f(conv2);
        f(conv3);
        f(fc);
    }
};

using ConvNet = ConvNetT<double>;

// He-normal initialization (std = sqrt(2/fan_in)), one derived stream per
// layer so the draw order is layout-independent.
template <typename T>
ConvNetT<T> convnet_init(std::uint64_t seed) {
    ConvNetT<T> net;
    int layer = 0;
    net.for_each_tensor([&](TensorT<T>& t) {
        const std::size_t fan_in = t.size() / t.shape.back();
        const double std_dev = std::sqrt(2.0 / double(fan_in));
        Rng rng(derive_seed(seed, std::uint64_t(layer++)));
        for (auto& v : t.data) v = static_cast<T>(std_dev * rng.normal());
    });
    return net;
}

template <typename To, typename From>
ConvNetT<To> convnet_cast(const ConvNetT<From>& in) {
    ConvNetT<To> out;
    out.conv1 = tensor_cast<To>(in.conv1);
    out.conv2 = tensor_cast<To>(in.conv2);
    out.conv3 = tensor_cast<To>(in.conv3);
    out.fc = tensor_cast<To>(in.fc);
    return out;
}

// Every weight multiplied by lambda (> 0); logits scale by lambda^4 and the
// argmax is unchanged.
template <typename T>
ConvNetT<T> scale_all_weights(const ConvNetT<T>& m, double lambda) {
    if (!(lambda > 0)) throw ArgumentError("scale_all_weights: lambda must be > 0");
    ConvNetT<T> out = m;
    out.for_each_tensor([&](TensorT<T>& t) {
        for (auto& v : t.data) v = static_cast<T>(static_cast<double>(v) * lambda);
    });
    return out;
}

template <typename T>
struct CnnForward {
    TensorT<T> x, z1, a1, z2, a2, z3, a3;
    TensorT<T> logits;  // [10]
};

template <typename T>
CnnForward<T> cnn_forward(const ConvNetT<T>& m, const TensorT<T>& x) {
    if (x.ndim() != 3 || x.dim(0) != 32 || x.dim(1) != 32 || x.dim(2) != 3)
        throw DimensionError("convnet: input must be [32,32,3]");
    CnnForward<T> f;
    f.x = x;
    f.z1 = conv2d_forward(x, m.conv1, 2, Padding::Same);      // [16,16,32]
    f.a1 = relu(f.z1);
    f.z2 = conv2d_forward(f.a1, m.conv2, 2, Padding::Valid);  // [6,6,64]
    f.a2 = relu(f.z2);
    f.z3 = conv2d_forward(f.a2, m.conv3, 1, Padding::Valid);  // [2,2,64]
    f.a3 = relu(f.z3);
    f.logits = TensorT<T>({10});
    detail::gemm_nn(1, 256, 10, f.a3.data.data(), m.fc.data.data(), f.logits.data.data());
    return f;
}

template <typename T>
TensorT<T> predict(const ConvNetT<T>& m, const TensorT<T>& x) {
    return cnn_forward(m, x).logits;
}

template <typename T>
struct CnnBackward {
    ConvNetT<T> param_grads;
    TensorT<T> input_grad;
};

// Backpropagate an arbitrary dLoss/dlogits seed. The two switches skip work
// the caller does not need: attacks only want the input gradient, training
// evaluation only the parameter gradients.
template <typename T>
CnnBackward<T> cnn_backward(const ConvNetT<T>& m, const CnnForward<T>& f,
                            const TensorT<T>& grad_logits, bool want_params,
                            bool want_input) {
    CnnBackward<T> b;
    // Dense layer.
    if (want_params) {
        for (std::size_t i = 0; i < 256; ++i)
            for (std::size_t j = 0; j < 10; ++j)
                b.param_grads.fc.data[i * 10 + j] = f.a3.data[i] * grad_logits.data[j];
    }
    TensorT<T> grad_a3({2, 2, 64});
    for (std::size_t i = 0; i < 256; ++i) {
        T s = 0;
        for (std::size_t j = 0; j < 10; ++j) s += m.fc.data[i * 10 + j] * grad_logits.data[j];
        grad_a3.data[i] = s;
    }

    TensorT<T> grad_z3 = relu_backward(f.z3, grad_a3);
    if (want_params)
        b.param_grads.conv3 = detail::conv2d_grad_kernel(f.a2, m.conv3.shape, grad_z3, 1,
                                                         Padding::Valid);
    TensorT<T> grad_a2 = detail::conv2d_grad_input(f.a2.shape, m.conv3, grad_z3, 1,
                                                   Padding::Valid);

    TensorT<T> grad_z2 = relu_backward(f.z2, grad_a2);
    if (want_params)
        b.param_grads.conv2 = detail::conv2d_grad_kernel(f.a1, m.conv2.shape, grad_z2, 2,
                                                         Padding::Valid);
    TensorT<T> grad_a1 = detail::conv2d_grad_input(f.a1.shape, m.conv2, grad_z2, 2,
                                                   Padding::Valid);

    TensorT<T> grad_z1 = relu_backward(f.z1, grad_a1);
    if (want_params)
        b.param_grads.conv1 = detail::conv2d_grad_kernel(f.x, m.conv1.shape, grad_z1, 2,
                                                         Padding::Same);
    if (want_input)
        b.input_grad = detail::conv2d_grad_input(f.x.shape, m.conv1, grad_z1, 2, Padding::Same);
    return b;
}

// (1-s)·one_hot(label) + s/k.
template <typename T>
TensorT<T> one_hot_smoothed(int label, std::size_t k, double smoothing) {
    if (label < 0 || std::size_t(label) >= k)
        throw ArgumentError("label " + std::to_string(label) + " out of range for " +
                            std::to_string(k) + " classes");
    TensorT<T> t({k});
    for (auto& v : t.data) v = static_cast<T>(smoothing / double(k));
    t.data[std::size_t(label)] += static_cast<T>(1.0 - smoothing);
    return t;
}

template <typename T>
struct CnnLossGrads {
    double loss;
    TensorT<T> probs;
    ConvNetT<T> param_grads;
    TensorT<T> input_grad;
};

template <typename T>
CnnLossGrads<T> cnn_loss_and_grads(const ConvNetT<T>& m, const TensorT<T>& x,
                                   const TensorT<T>& target, bool want_params = true,
                                   bool want_input = true) {
    CnnForward<T> f = cnn_forward(m, x);
    SoftmaxXent<T> sx = softmax_xent(f.logits, target);
    CnnBackward<T> bp = cnn_backward(m, f, sx.grad_logits, want_params, want_input);
    CnnLossGrads<T> out;
    out.loss = sx.loss;
    out.probs = std::move(sx.probs);
    out.param_grads = std::move(bp.param_grads);
    out.input_grad = std::move(bp.input_grad);
    return out;
}

// dot(seed, logits)'s gradient with respect to the input — the raw-Jacobian
// hook used by saliency attacks and the first-order probability check.
template <typename T>
TensorT<T> cnn_input_grad_from_logit_seed(const ConvNetT<T>& m, const TensorT<T>& x,
                                          const TensorT<T>& seed) {
    CnnForward<T> f = cnn_forward(m, x);
    return cnn_backward(m, f, seed, /*want_params=*/false, /*want_input=*/true).input_grad;
}

// ---------------------------------------------------------------------------
// Serialization: versioned container, weights stored as 64-bit little-endian
// floats regardless of the in-memory scalar type.

struct ModelFile {
    enum Kind { Linear, ConvNetKind };
    Kind kind = Linear;
    LinearLogistic linear;
    ConvNet cnn;
    LossFn loss;
    std::string recipe;
    std::string config_digest;
};

void save_model(const ModelFile& m, const std::string& path);
ModelFile load_model(const std::string& path);

}  // namespace robustlab
