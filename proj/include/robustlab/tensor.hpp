#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "robustlab/errors.hpp"

namespace robustlab {

// Dense row-major n-dimensional array. 64-bit float by default; the CNN
// training path instantiates the 32-bit variant for speed.
template <typename T>
struct TensorT {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    TensorT() = default;
    explicit TensorT(std::vector<std::size_t> s)
        : shape(std::move(s)), data(count(shape), T(0)) {}

    static std::size_t count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t e : s) n *= e;
        return n;
    }

    static TensorT from(std::vector<std::size_t> s, std::vector<T> d) {
        if (count(s) != d.size())
            throw DimensionError("tensor: shape product " + std::to_string(count(s)) +
                                 " != data length " + std::to_string(d.size()));
        TensorT t;
        t.shape = std::move(s);
        t.data = std::move(d);
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    T& at3(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    const T& at3(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    T& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
    const T& at4(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
        return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
    }
};

using Tensor = TensorT<double>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
    TensorT<To> out;
    out.shape = t.shape;
    out.data.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<To>(t.data[i]);
    return out;
}

template <typename T>
TensorT<T> reshape(TensorT<T> t, std::vector<std::size_t> new_shape) {
    if (TensorT<T>::count(new_shape) != t.size())
        throw DimensionError("reshape: element count mismatch");
    t.shape = std::move(new_shape);
    return t;
}

template <typename T>
bool all_finite(const TensorT<T>& t) {
    for (T v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

template <typename T>
void require_finite(const TensorT<T>& t, const char* what) {
    if (!all_finite(t)) throw NumericalError(std::string("non-finite values in ") + what);
}

// sign with sign(0) == 0 (the convention used everywhere an attack or a
// subgradient needs a sign).
template <typename T>
inline T sign0(T v) {
    return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0));
}

template <typename T>
inline double l1_norm(const TensorT<T>& t) {
    double s = 0;
    for (T v : t.data) s += std::abs(static_cast<double>(v));
    return s;
}

template <typename T>
inline double l2_norm_sq(const TensorT<T>& t) {
    double s = 0;
    for (T v : t.data) {
        double d = static_cast<double>(v);
        s += d * d;
    }
    return s;
}

template <typename T>
inline double l2_norm(const TensorT<T>& t) {
    return std::sqrt(l2_norm_sq(t));
}

// w.x + b over flat storage, plain left-to-right summation.
template <typename T>
double matvec(const TensorT<T>& w, const TensorT<T>& x, double b) {
    if (w.size() != x.size())
        throw DimensionError("matvec: weight length " + std::to_string(w.size()) +
                             " != input length " + std::to_string(x.size()));
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i)
        s += static_cast<double>(w.data[i]) * static_cast<double>(x.data[i]);
    return s + b;
}

namespace detail {

// C (MxN) += A (MxK) * B (KxN), all row-major. The k loop ascends for every
// element of C, so the floating-point summation order is a fixed function of
// the shapes alone — results are reproducible regardless of how callers block
// or parallelize around this kernel. The i-k-j order lets the inner loop
// vectorize without reassociating any sum.
template <typename T>
void gemm_nn(std::size_t M, std::size_t K, std::size_t N, const T* A, const T* B, T* C) {
    for (std::size_t i = 0; i < M; ++i) {
        const T* a = A + i * K;
        T* c = C + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const T av = a[k];
            const T* b = B + k * N;
            for (std::size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* in, T* out) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

}  // namespace detail

enum class Padding { Same, Valid };

struct ConvGeometry {
    std::size_t oh = 0, ow = 0;
    std::ptrdiff_t pad_top = 0, pad_left = 0;
};

// Output extents and padding offsets for one spatial setup.
// Same: out = ceil(in/stride), odd total padding puts the extra pixel on the
// bottom/right. Valid: out = floor((in - k)/stride) + 1, kernel must fit.
inline ConvGeometry conv2d_geometry(std::size_t h, std::size_t w, std::size_t kh,
                                    std::size_t kw, std::size_t stride, Padding padding) {
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    ConvGeometry g;
    if (padding == Padding::Valid) {
        if (kh > h || kw > w)
            throw DimensionError("conv2d: Valid padding needs kernel <= input, got kernel " +
                                 std::to_string(kh) + "x" + std::to_string(kw) + " on input " +
                                 std::to_string(h) + "x" + std::to_string(w));
        g.oh = (h - kh) / stride + 1;
        g.ow = (w - kw) / stride + 1;
        g.pad_top = 0;
        g.pad_left = 0;
    } else {
        g.oh = (h + stride - 1) / stride;
        g.ow = (w + stride - 1) / stride;
        std::ptrdiff_t total_h =
            std::max<std::ptrdiff_t>((std::ptrdiff_t(g.oh) - 1) * stride + kh - h, 0);
        std::ptrdiff_t total_w =
            std::max<std::ptrdiff_t>((std::ptrdiff_t(g.ow) - 1) * stride + kw - w, 0);
        g.pad_top = total_h / 2;
        g.pad_left = total_w / 2;
    }
    return g;
}

namespace detail {

// Gather patches into a (oh*ow) x (kh*kw*c) matrix, zero-filling out-of-bounds
// reads. Column order (kh, kw, c) matches the flat layout of a [kh,kw,c,co]
// kernel, so the convolution is exactly patches * kernel_matrix.
template <typename T>
void im2col(const T* in, std::size_t h, std::size_t w, std::size_t c, std::size_t kh,
            std::size_t kw, std::size_t stride, const ConvGeometry& g, T* out) {
    const std::size_t patch = kh * kw * c;
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
            T* row = out + (oy * g.ow + ox) * patch;
            const std::ptrdiff_t y0 = std::ptrdiff_t(oy * stride) - g.pad_top;
            const std::ptrdiff_t x0 = std::ptrdiff_t(ox * stride) - g.pad_left;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::ptrdiff_t y = y0 + std::ptrdiff_t(ky);
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::ptrdiff_t x = x0 + std::ptrdiff_t(kx);
                    T* dst = row + (ky * kw + kx) * c;
                    if (y >= 0 && y < std::ptrdiff_t(h) && x >= 0 && x < std::ptrdiff_t(w)) {
                        const T* src = in + (std::size_t(y) * w + std::size_t(x)) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] = src[ch];
                    } else {
                        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] = T(0);
                    }
                }
            }
        }
    }
}

}  // namespace detail

// Cross-correlation (no kernel flip) of an [h,w,c_in] input with a
// [kh,kw,c_in,c_out] kernel. No bias term.
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& input, const TensorT<T>& kernel, std::size_t stride,
                          Padding padding) {
    if (input.ndim() != 3) throw DimensionError("conv2d: input must be [h,w,c]");
    if (kernel.ndim() != 4) throw DimensionError("conv2d: kernel must be [kh,kw,c_in,c_out]");
    if (kernel.dim(2) != input.dim(2))
        throw DimensionError("conv2d: kernel c_in " + std::to_string(kernel.dim(2)) +
                             " != input channels " + std::to_string(input.dim(2)));
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), co = kernel.dim(3);
    const ConvGeometry g = conv2d_geometry(h, w, kh, kw, stride, padding);
    const std::size_t rows = g.oh * g.ow, patch = kh * kw * c;

    std::vector<T> cols(rows * patch);
    detail::im2col(input.data.data(), h, w, c, kh, kw, stride, g, cols.data());

    TensorT<T> out({g.oh, g.ow, co});
    detail::gemm_nn(rows, patch, co, cols.data(), kernel.data.data(), out.data.data());
    return out;
}

namespace detail {

template <typename T>
void check_grad_out(const ConvGeometry& g, std::size_t co, const TensorT<T>& grad_out) {
    if (grad_out.ndim() != 3 || grad_out.dim(0) != g.oh || grad_out.dim(1) != g.ow ||
        grad_out.dim(2) != co)
        throw DimensionError("conv2d_backward: grad_out shape does not match forward output");
}

// Kernel gradient alone: cols^T * grad_out, done as a plain gemm on the
// transposed patch matrix so the inner loop stays vectorizable with a fixed
// sum order.
template <typename T>
TensorT<T> conv2d_grad_kernel(const TensorT<T>& input, const std::vector<std::size_t>& kernel_shape,
                              const TensorT<T>& grad_out, std::size_t stride, Padding padding) {
    const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
    const std::size_t kh = kernel_shape[0], kw = kernel_shape[1], co = kernel_shape[3];
    const ConvGeometry g = conv2d_geometry(h, w, kh, kw, stride, padding);
    check_grad_out(g, co, grad_out);
    const std::size_t rows = g.oh * g.ow, patch = kh * kw * c;

    std::vector<T> cols(rows * patch);
    im2col(input.data.data(), h, w, c, kh, kw, stride, g, cols.data());
    std::vector<T> colsT(patch * rows);
    transpose(rows, patch, cols.data(), colsT.data());

    TensorT<T> grad_kernel(kernel_shape);
    gemm_nn(patch, rows, co, colsT.data(), grad_out.data.data(), grad_kernel.data.data());
    return grad_kernel;
}

// Input gradient alone: grad wrt the patch matrix = grad_out * kernel^T, then
// scatter-add back into input positions (col2im) in a fixed traversal order.
template <typename T>
TensorT<T> conv2d_grad_input(const std::vector<std::size_t>& input_shape, const TensorT<T>& kernel,
                             const TensorT<T>& grad_out, std::size_t stride, Padding padding) {
    const std::size_t h = input_shape[0], w = input_shape[1], c = input_shape[2];
    const std::size_t kh = kernel.dim(0), kw = kernel.dim(1), co = kernel.dim(3);
    const ConvGeometry g = conv2d_geometry(h, w, kh, kw, stride, padding);
    check_grad_out(g, co, grad_out);
    const std::size_t rows = g.oh * g.ow, patch = kh * kw * c;

    std::vector<T> kernelT(co * patch);
    transpose(patch, co, kernel.data.data(), kernelT.data());
    std::vector<T> gcols(rows * patch, T(0));
    gemm_nn(rows, co, patch, grad_out.data.data(), kernelT.data(), gcols.data());

    TensorT<T> grad_input(input_shape);
    T* gin = grad_input.data.data();
    for (std::size_t oy = 0; oy < g.oh; ++oy) {
        for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const T* row = gcols.data() + (oy * g.ow + ox) * patch;
            const std::ptrdiff_t y0 = std::ptrdiff_t(oy * stride) - g.pad_top;
            const std::ptrdiff_t x0 = std::ptrdiff_t(ox * stride) - g.pad_left;
            for (std::size_t ky = 0; ky < kh; ++ky) {
                const std::ptrdiff_t y = y0 + std::ptrdiff_t(ky);
                if (y < 0 || y >= std::ptrdiff_t(h)) continue;
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    const std::ptrdiff_t x = x0 + std::ptrdiff_t(kx);
                    if (x < 0 || x >= std::ptrdiff_t(w)) continue;
                    T* dst = gin + (std::size_t(y) * w + std::size_t(x)) * c;
                    const T* src = row + (ky * kw + kx) * c;
                    for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                }
            }
        }
    }
    return grad_input;
}

}  // namespace detail

template <typename T>
struct Conv2DGrads {
    TensorT<T> grad_input;
    TensorT<T> grad_kernel;
};

// Gradients of sum(grad_out ⊙ conv2d_forward(input, kernel)) with respect to
// the input and the kernel.
template <typename T>
Conv2DGrads<T> conv2d_backward(const TensorT<T>& input, const TensorT<T>& kernel,
                               const TensorT<T>& grad_out, std::size_t stride, Padding padding) {
    if (input.ndim() != 3 || kernel.ndim() != 4 || kernel.dim(2) != input.dim(2))
        throw DimensionError("conv2d_backward: input/kernel shapes inconsistent");
    Conv2DGrads<T> grads;
    grads.grad_input = detail::conv2d_grad_input(input.shape, kernel, grad_out, stride, padding);
    grads.grad_kernel =
        detail::conv2d_grad_kernel(input, kernel.shape, grad_out, stride, padding);
    return grads;
}

template <typename T>
TensorT<T> relu(const TensorT<T>& x) {
    TensorT<T> out;
    out.shape = x.shape;
    out.data.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    return out;
}

// Gradient passes where x > 0 and is zero where x <= 0 (zero at the kink).
template <typename T>
TensorT<T> relu_backward(const TensorT<T>& x, const TensorT<T>& grad_out) {
    if (x.size() != grad_out.size())
        throw DimensionError("relu_backward: gradient shape mismatch");
    TensorT<T> out;
    out.shape = x.shape;
    out.data.resize(x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i)
        out.data[i] = x.data[i] > T(0) ? grad_out.data[i] : T(0);
    return out;
}

template <typename T>
struct SoftmaxXent {
    double loss;
    TensorT<T> grad_logits;
    TensorT<T> probs;
};

// Cross entropy of softmax(logits) against an arbitrary target distribution,
// with the usual max-subtraction for stability. grad = softmax - target.
template <typename T>
SoftmaxXent<T> softmax_xent(const TensorT<T>& logits, const TensorT<T>& target) {
    if (logits.size() != target.size())
        throw DimensionError("softmax_xent: logits/target length mismatch");
    double tsum = 0;
    for (T v : target.data) tsum += static_cast<double>(v);
    // A k-entry distribution is only representable to ~k·eps of the scalar
    // type, so the normalization tolerance follows it (1e-9 floor for double).
    const double tol =
        std::max(1e-9, double(target.size()) * double(std::numeric_limits<T>::epsilon()));
    if (std::abs(tsum - 1.0) > tol) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", tsum);
        throw ArgumentError(std::string("softmax_xent: target distribution sums to ") + buf +
                            ", expected 1");
    }
    const std::size_t k = logits.size();
    double maxv = -std::numeric_limits<double>::infinity();
    for (T v : logits.data) maxv = std::max(maxv, static_cast<double>(v));
    std::vector<double> shifted(k);
    double z = 0;
    for (std::size_t i = 0; i < k; ++i) {
        shifted[i] = static_cast<double>(logits.data[i]) - maxv;
        z += std::exp(shifted[i]);
    }
    const double logz = std::log(z);
    SoftmaxXent<T> r;
    r.loss = 0;
    r.probs.shape = logits.shape;
    r.probs.data.resize(k);
    r.grad_logits.shape = logits.shape;
    r.grad_logits.data.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double logp = shifted[i] - logz;
        r.loss -= static_cast<double>(target.data[i]) * logp;
        const double p = std::exp(logp);
        r.probs.data[i] = static_cast<T>(p);
        r.grad_logits.data[i] = static_cast<T>(p - static_cast<double>(target.data[i]));
    }
    return r;
}

}  // namespace robustlab
