#include "sicu/nn/functional.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "sicu/error.hpp"

namespace sicu::nn {

namespace {

using idx = std::ptrdiff_t;

template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
    constexpr std::size_t W = 16;
    T acc[W] = {};
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        for (std::size_t j = 0; j < W; ++j) acc[j] += a[i + j] * b[i + j];
    }
    T s = 0;
    for (std::size_t j = 0; j < W; ++j) s += acc[j];
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void require_context(bool valid, const char* what) {
    if (!valid) throw UsageError(std::string(what) + ": backward called without a forward context");
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Shape& expected, const char* what) {
    if (a.shape() != expected) {
        throw InvalidInput(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                           shape_string(a.shape()));
    }
}

}  // namespace


// ---- conv1d -----------------------------------------------------------------

namespace {

// 64-byte vectors via the GCC/Clang vector extension; lowered to whatever
// the target offers.
template <typename T>
struct Vec {
    typedef T type __attribute__((vector_size(64)));
    static constexpr std::size_t lanes = 64 / sizeof(T);
};

template <typename T>
inline typename Vec<T>::type vload(const T* p) {
    typename Vec<T>::type v;
    std::memcpy(&v, p, sizeof(v));
    return v;
}

template <typename T>
inline void vstore(T* p, const typename Vec<T>::type& v) {
    std::memcpy(p, &v, sizeof(v));
}

template <typename T>
constexpr std::size_t conv_tile() { return 2 * Vec<T>::lanes; }  // outputs per register tile

constexpr std::size_t kConvBlock = 4;  // output channels per register tile

std::size_t round_up(std::size_t n, std::size_t m) { return (n + m - 1) / m * m; }

/// Rows of `src` ([rows, len]) copied into zero rows of length `padded_len`
/// starting at column `left`.
template <typename T>
std::vector<T> pad_rows(const T* src, std::size_t rows, std::size_t len, std::size_t left, std::size_t padded_len) {
    std::vector<T> out(rows * padded_len, T{0});
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy(src + r * len, src + (r + 1) * len, out.data() + r * padded_len + left);
    }
    return out;
}

/// y[co][t] = bias[co] + sum_ci sum_k w[co][ci][k] * xp[ci][t + k] for
/// t < lout. Rows of xp hold at least round_up(lout, conv_tile) + K - 1
/// values.
template <typename T>
void conv_rows(const T* xp, std::size_t cin, std::size_t row_len, const T* w, const T* bias, std::size_t cout,
               std::size_t K, std::size_t lout, T* y) {
    using V = typename Vec<T>::type;
    constexpr std::size_t S = Vec<T>::lanes;
    constexpr std::size_t W = conv_tile<T>();
    const std::vector<T> zero_row(K, T{0});
    alignas(64) T tmp[W];

    for (std::size_t co0 = 0; co0 < cout; co0 += kConvBlock) {
        const std::size_t nco = std::min(kConvBlock, cout - co0);
        const T* wc[kConvBlock];
        for (std::size_t t0 = 0; t0 < lout; t0 += W) {
            V acc[kConvBlock][2];
            for (std::size_t c = 0; c < kConvBlock; ++c) {
                const T b0 = (c < nco && bias) ? bias[co0 + c] : T{0};
                acc[c][0] = V{} + b0;
                acc[c][1] = V{} + b0;
            }
            for (std::size_t ci = 0; ci < cin; ++ci) {
                const T* xr = xp + ci * row_len + t0;
                for (std::size_t c = 0; c < kConvBlock; ++c) {
                    wc[c] = c < nco ? w + ((co0 + c) * cin + ci) * K : zero_row.data();
                }
                for (std::size_t k = 0; k < K; ++k) {
                    const V x0 = vload(xr + k);
                    const V x1 = vload(xr + k + S);
                    for (std::size_t c = 0; c < kConvBlock; ++c) {
                        const T a = wc[c][k];
                        acc[c][0] += a * x0;
                        acc[c][1] += a * x1;
                    }
                }
            }
            const std::size_t n = std::min(W, lout - t0);
            for (std::size_t c = 0; c < nco; ++c) {
                T* dst = y + (co0 + c) * lout + t0;
                if (n == W) {
                    vstore(dst, acc[c][0]);
                    vstore(dst + S, acc[c][1]);
                } else {
                    vstore(tmp, acc[c][0]);
                    vstore(tmp + S, acc[c][1]);
                    std::copy(tmp, tmp + n, dst);
                }
            }
        }
    }
}

/// dw[co][ci][k] += sum_{t < lout} dy[co][t] * xp[ci][t + k] with K fixed.
template <typename T, std::size_t K>
void conv_kernel_grad_fixed(const T* dy, std::size_t cout, std::size_t lout, const T* xp, std::size_t cin,
                            std::size_t row_len, T* dw) {
    using V = typename Vec<T>::type;
    constexpr std::size_t S = Vec<T>::lanes;
    const std::size_t full = lout / S * S;
    for (std::size_t co = 0; co < cout; ++co) {
        const T* d = dy + co * lout;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            const T* xr = xp + ci * row_len;
            V acc[K];
            for (std::size_t k = 0; k < K; ++k) acc[k] = V{};
            for (std::size_t t = 0; t < full; t += S) {
                const V dv = vload(d + t);
                for (std::size_t k = 0; k < K; ++k) acc[k] += dv * vload(xr + t + k);
            }
            T* out = dw + (co * cin + ci) * K;
            for (std::size_t k = 0; k < K; ++k) {
                T s = 0;
                for (std::size_t j = 0; j < S; ++j) s += acc[k][j];
                for (std::size_t t = full; t < lout; ++t) s += d[t] * xr[t + k];
                out[k] += s;
            }
        }
    }
}

template <typename T>
void conv_kernel_grad(const T* dy, std::size_t cout, std::size_t lout, const T* xp, std::size_t cin,
                      std::size_t row_len, std::size_t K, T* dw) {
    switch (K) {
        case 1: return conv_kernel_grad_fixed<T, 1>(dy, cout, lout, xp, cin, row_len, dw);
        case 3: return conv_kernel_grad_fixed<T, 3>(dy, cout, lout, xp, cin, row_len, dw);
        case 5: return conv_kernel_grad_fixed<T, 5>(dy, cout, lout, xp, cin, row_len, dw);
        case 7: return conv_kernel_grad_fixed<T, 7>(dy, cout, lout, xp, cin, row_len, dw);
        default: break;
    }
    for (std::size_t co = 0; co < cout; ++co) {
        for (std::size_t ci = 0; ci < cin; ++ci) {
            T* out = dw + (co * cin + ci) * K;
            for (std::size_t k = 0; k < K; ++k) out[k] += dot(dy + co * lout, xp + ci * row_len + k, lout);
        }
    }
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw InvalidInput("conv1d: stride must be >= 1");
    if (kernel == 0 || kernel > length + 2 * padding) {
        throw InvalidInput("conv1d: kernel " + std::to_string(kernel) + " longer than padded input " +
                           std::to_string(length + 2 * padding));
    }
    return (length + 2 * padding - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& input, const Tensor<T>& kernels, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding, Conv1dContext<T>* ctx) {
    require_rank(input, 3, "conv1d input");
    require_rank(kernels, 3, "conv1d kernels");
    const std::size_t B = input.dim(0), Cin = input.dim(1), L = input.dim(2);
    const std::size_t Cout = kernels.dim(0), K = kernels.dim(2);
    if (kernels.dim(1) != Cin) {
        throw InvalidInput("conv1d: kernels expect " + std::to_string(kernels.dim(1)) + " input channels, got " +
                           std::to_string(Cin));
    }
    require_same_shape(bias, {Cout}, "conv1d bias");
    const std::size_t Lout = conv1d_output_length(L, K, stride, padding);

    Tensor<T> out({B, Cout, Lout});
    if (stride == 1) {
        const std::size_t row_len = round_up(Lout, conv_tile<T>()) + K - 1;
        for (std::size_t b = 0; b < B; ++b) {
            const auto xp = pad_rows(input.row(b, 0), Cin, L, padding, row_len);
            conv_rows(xp.data(), Cin, row_len, kernels.data(), bias.data(), Cout, K, Lout, out.row(b, 0));
        }
    } else {
        const idx p = static_cast<idx>(padding);
        const idx Li = static_cast<idx>(L);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t co = 0; co < Cout; ++co) {
                T* yrow = out.row(b, co);
                for (std::size_t t = 0; t < Lout; ++t) {
                    T s = bias[co];
                    for (std::size_t ci = 0; ci < Cin; ++ci) {
                        const T* xr = input.row(b, ci);
                        const T* wr = kernels.data() + (co * Cin + ci) * K;
                        for (std::size_t k = 0; k < K; ++k) {
                            const idx i = static_cast<idx>(t * stride + k) - p;
                            if (i >= 0 && i < Li) s += wr[k] * xr[i];
                        }
                    }
                    yrow[t] = s;
                }
            }
        }
    }
    if (ctx) {
        ctx->input = input;
        ctx->kernels = &kernels;
        ctx->stride = stride;
        ctx->padding = padding;
        ctx->valid = true;
    }
    return out;
}

template <typename T>
Conv1dGrads<T> conv1d_backward(const Tensor<T>& upstream, const Conv1dContext<T>& ctx) {
    require_context<T>(ctx.valid && ctx.kernels != nullptr, "conv1d");
    const Tensor<T>& x = ctx.input;
    const Tensor<T>& w = *ctx.kernels;
    const std::size_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
    const std::size_t Cout = w.dim(0), K = w.dim(2);
    const std::size_t Lout = conv1d_output_length(L, K, ctx.stride, ctx.padding);
    require_same_shape(upstream, {B, Cout, Lout}, "conv1d upstream gradient");

    Conv1dGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({Cout})};

    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t co = 0; co < Cout; ++co) {
            const T* dy = upstream.row(b, co);
            T s = 0;
            for (std::size_t t = 0; t < Lout; ++t) s += dy[t];
            g.bias[co] += s;
        }
    }

    if (ctx.stride == 1 && ctx.padding + 1 <= K) {
        // The input gradient is a stride-1 convolution of the upstream
        // gradient with the flipped, channel-transposed kernels and padding
        // K - 1 - p.
        Tensor<T> flipped({Cin, Cout, K});
        for (std::size_t co = 0; co < Cout; ++co) {
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                for (std::size_t k = 0; k < K; ++k) flipped.at(ci, co, K - 1 - k) = w.at(co, ci, k);
            }
        }
        const std::size_t back_pad = K - 1 - ctx.padding;
        const std::size_t dy_row = round_up(L, conv_tile<T>()) + K - 1;
        const std::size_t x_row = std::max(Lout + K - 1, L + 2 * ctx.padding);
        for (std::size_t b = 0; b < B; ++b) {
            const auto dyp = pad_rows(upstream.row(b, 0), Cout, Lout, back_pad, dy_row);
            conv_rows<T>(dyp.data(), Cout, dy_row, flipped.data(), nullptr, Cin, K, L, g.input.row(b, 0));
            const auto xp = pad_rows(x.row(b, 0), Cin, L, ctx.padding, x_row);
            conv_kernel_grad(upstream.row(b, 0), Cout, Lout, xp.data(), Cin, x_row, K, g.kernels.data());
        }
    } else {
        const idx p = static_cast<idx>(ctx.padding);
        const idx Li = static_cast<idx>(L);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t co = 0; co < Cout; ++co) {
                const T* dy = upstream.row(b, co);
                for (std::size_t t = 0; t < Lout; ++t) {
                    for (std::size_t ci = 0; ci < Cin; ++ci) {
                        const T* xr = x.row(b, ci);
                        T* dx = g.input.row(b, ci);
                        const T* wr = w.data() + (co * Cin + ci) * K;
                        T* dw = g.kernels.data() + (co * Cin + ci) * K;
                        for (std::size_t k = 0; k < K; ++k) {
                            const idx i = static_cast<idx>(t * ctx.stride + k) - p;
                            if (i < 0 || i >= Li) continue;
                            dw[k] += dy[t] * xr[i];
                            dx[i] += dy[t] * wr[k];
                        }
                    }
                }
            }
        }
    }
    return g;
}

// ---- dense ------------------------------------------------------------------

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, const Tensor<T>& bias,
                        DenseContext<T>* ctx) {
    require_rank(input, 2, "dense input");
    require_rank(weights, 2, "dense weights");
    const std::size_t B = input.dim(0), In = input.dim(1), Out = weights.dim(0);
    if (weights.dim(1) != In) {
        throw InvalidInput("dense: weights expect " + std::to_string(weights.dim(1)) + " inputs, got " +
                           std::to_string(In));
    }
    require_same_shape(bias, {Out}, "dense bias");
    Tensor<T> out({B, Out});
    for (std::size_t b = 0; b < B; ++b) {
        const T* xr = input.data() + b * In;
        for (std::size_t o = 0; o < Out; ++o) out[b * Out + o] = bias[o] + dot(weights.data() + o * In, xr, In);
    }
    if (ctx) {
        ctx->input = input;
        ctx->weights = &weights;
        ctx->valid = true;
    }
    return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& upstream, const DenseContext<T>& ctx) {
    require_context<T>(ctx.valid && ctx.weights != nullptr, "dense");
    const Tensor<T>& x = ctx.input;
    const Tensor<T>& w = *ctx.weights;
    const std::size_t B = x.dim(0), In = x.dim(1), Out = w.dim(0);
    require_same_shape(upstream, {B, Out}, "dense upstream gradient");
    DenseGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(w.shape()), Tensor<T>({Out})};
    for (std::size_t b = 0; b < B; ++b) {
        const T* xr = x.data() + b * In;
        T* dx = g.input.data() + b * In;
        for (std::size_t o = 0; o < Out; ++o) {
            const T gy = upstream[b * Out + o];
            g.bias[o] += gy;
            if (gy == T{0}) continue;
            axpy(gy, xr, g.weights.data() + o * In, In);
            axpy(gy, w.data() + o * In, dx, In);
        }
    }
    return g;
}

// ---- batch norm -------------------------------------------------------------

template <typename T>
BatchNormState<T>::BatchNormState(std::size_t channels)
    : gamma({channels}, T{1}), beta({channels}, T{0}), running_mean({channels}, T{0}),
      running_var({channels}, T{1}) {}

template <typename T>
Tensor<T> batchnorm1d_forward(const Tensor<T>& input, BatchNormState<T>& state, BatchNormContext<T>* ctx) {
    if (state.mode == BnMode::Infer) return batchnorm1d_infer(input, state);
    require_rank(input, 3, "batchnorm input");
    const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
    require_same_shape(state.gamma, {C}, "batchnorm gamma");
    if (B < 2) throw InvalidInput("batchnorm: train mode needs a batch of at least 2");
    const double n = static_cast<double>(B * L);

    Tensor<T> out(input.shape());
    Tensor<T> xhat(input.shape());
    std::vector<double> inv_std(C);
    for (std::size_t c = 0; c < C; ++c) {
        double sum = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const T* xr = input.row(b, c);
            for (std::size_t t = 0; t < L; ++t) sum += xr[t];
        }
        const double mean = sum / n;
        double sq = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const T* xr = input.row(b, c);
            for (std::size_t t = 0; t < L; ++t) {
                const double d = xr[t] - mean;
                sq += d * d;
            }
        }
        const double var = sq / n;
        const double istd = 1.0 / std::sqrt(var + state.eps);
        inv_std[c] = istd;
        const T g = state.gamma[c], be = state.beta[c];
        const T m = static_cast<T>(mean), s = static_cast<T>(istd);
        for (std::size_t b = 0; b < B; ++b) {
            const T* xr = input.row(b, c);
            T* hr = xhat.row(b, c);
            T* yr = out.row(b, c);
            for (std::size_t t = 0; t < L; ++t) {
                hr[t] = (xr[t] - m) * s;
                yr[t] = g * hr[t] + be;
            }
        }
        const double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
        state.running_mean[c] = static_cast<T>((1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean);
        state.running_var[c] = static_cast<T>((1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased);
    }
    if (ctx) {
        ctx->normalized = std::move(xhat);
        ctx->inv_std = std::move(inv_std);
        ctx->gamma = &state.gamma;
        ctx->valid = true;
    }
    return out;
}

template <typename T>
Tensor<T> batchnorm1d_infer(const Tensor<T>& input, const BatchNormState<T>& state) {
    require_rank(input, 3, "batchnorm input");
    const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
    require_same_shape(state.gamma, {C}, "batchnorm gamma");
    Tensor<T> out(input.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double istd = 1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + state.eps);
        const T scale = static_cast<T>(state.gamma[c] * istd);
        const T shift = static_cast<T>(state.beta[c] - state.gamma[c] * istd * state.running_mean[c]);
        for (std::size_t b = 0; b < B; ++b) {
            const T* xr = input.row(b, c);
            T* yr = out.row(b, c);
            for (std::size_t t = 0; t < L; ++t) yr[t] = scale * xr[t] + shift;
        }
    }
    return out;
}

template <typename T>
BatchNormGrads<T> batchnorm1d_backward(const Tensor<T>& upstream, const BatchNormContext<T>& ctx) {
    require_context<T>(ctx.valid && ctx.gamma != nullptr, "batchnorm");
    const Tensor<T>& xhat = ctx.normalized;
    require_same_shape(upstream, xhat.shape(), "batchnorm upstream gradient");
    const std::size_t B = xhat.dim(0), C = xhat.dim(1), L = xhat.dim(2);
    const double n = static_cast<double>(B * L);
    BatchNormGrads<T> g{Tensor<T>(xhat.shape()), Tensor<T>({C}), Tensor<T>({C})};
    for (std::size_t c = 0; c < C; ++c) {
        double dgamma = 0.0, dbeta = 0.0;
        for (std::size_t b = 0; b < B; ++b) {
            const T* dy = upstream.row(b, c);
            const T* hr = xhat.row(b, c);
            for (std::size_t t = 0; t < L; ++t) {
                dbeta += dy[t];
                dgamma += static_cast<double>(dy[t]) * hr[t];
            }
        }
        g.gamma[c] = static_cast<T>(dgamma);
        g.beta[c] = static_cast<T>(dbeta);
        const double k = static_cast<double>((*ctx.gamma)[c]) * ctx.inv_std[c] / n;
        const T a = static_cast<T>(k * n);
        const T bterm = static_cast<T>(k * dbeta);
        const T cterm = static_cast<T>(k * dgamma);
        for (std::size_t b = 0; b < B; ++b) {
            const T* dy = upstream.row(b, c);
            const T* hr = xhat.row(b, c);
            T* dx = g.input.row(b, c);
            for (std::size_t t = 0; t < L; ++t) dx[t] = a * dy[t] - bterm - cterm * hr[t];
        }
    }
    return g;
}

// ---- pooling / resampling / activation -----------------------------------------

template <typename T>
Tensor<T> maxpool1d_forward(const Tensor<T>& input, std::size_t kernel, MaxPoolContext* ctx) {
    require_rank(input, 3, "maxpool input");
    if (kernel == 0) throw InvalidInput("maxpool: kernel must be >= 1");
    const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
    const std::size_t Lout = L / kernel;
    if (Lout == 0) throw InvalidInput("maxpool: input shorter than the window");
    Tensor<T> out({B, C, Lout});
    std::vector<std::uint32_t> arg(ctx ? out.size() : 0);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* xr = input.row(b, c);
            T* yr = out.row(b, c);
            for (std::size_t t = 0; t < Lout; ++t) {
                const T* w = xr + t * kernel;
                std::size_t best = 0;
                for (std::size_t j = 1; j < kernel; ++j) {
                    if (w[j] > w[best]) best = j;
                }
                yr[t] = w[best];
                if (ctx) arg[(b * C + c) * Lout + t] = static_cast<std::uint32_t>(best);
            }
        }
    }
    if (ctx) {
        ctx->input_shape = input.shape();
        ctx->argmax = std::move(arg);
        ctx->kernel = kernel;
        ctx->valid = true;
    }
    return out;
}

template <typename T>
Tensor<T> maxpool1d_backward(const Tensor<T>& upstream, const MaxPoolContext& ctx) {
    require_context<T>(ctx.valid, "maxpool");
    const std::size_t B = ctx.input_shape[0], C = ctx.input_shape[1], L = ctx.input_shape[2];
    const std::size_t Lout = L / ctx.kernel;
    require_same_shape(upstream, {B, C, Lout}, "maxpool upstream gradient");
    Tensor<T> dx(ctx.input_shape);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* dy = upstream.row(b, c);
            T* dr = dx.row(b, c);
            const std::uint32_t* ar = ctx.argmax.data() + (b * C + c) * Lout;
            for (std::size_t t = 0; t < Lout; ++t) dr[t * ctx.kernel + ar[t]] += dy[t];
        }
    }
    return dx;
}

template <typename T>
Tensor<T> upsample2_forward(const Tensor<T>& input) {
    require_rank(input, 3, "upsample input");
    const std::size_t B = input.dim(0), C = input.dim(1), L = input.dim(2);
    Tensor<T> out({B, C, 2 * L});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* xr = input.row(b, c);
            T* yr = out.row(b, c);
            for (std::size_t t = 0; t < L; ++t) yr[2 * t] = yr[2 * t + 1] = xr[t];
        }
    }
    return out;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& upstream) {
    require_rank(upstream, 3, "upsample upstream gradient");
    const std::size_t B = upstream.dim(0), C = upstream.dim(1), L2 = upstream.dim(2);
    if (L2 % 2 != 0) throw InvalidInput("upsample backward: odd upstream length");
    const std::size_t L = L2 / 2;
    Tensor<T> dx({B, C, L});
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* dy = upstream.row(b, c);
            T* dr = dx.row(b, c);
            for (std::size_t t = 0; t < L; ++t) dr[t] = dy[2 * t] + dy[2 * t + 1];
        }
    }
    return dx;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
    Tensor<T> out = input;
    for (T& v : out.values()) v = v > T{0} ? v : T{0};
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& upstream, const Tensor<T>& output) {
    require_same_shape(upstream, output.shape(), "relu upstream gradient");
    Tensor<T> dx(upstream.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = output[i] > T{0} ? upstream[i] : T{0};
    return dx;
}

// ---- losses -------------------------------------------------------------------

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    require_rank(logits, 2, "softmax logits");
    const std::size_t B = logits.dim(0), K = logits.dim(1);
    Tensor<T> out(logits.shape());
    for (std::size_t b = 0; b < B; ++b) {
        const T* z = logits.data() + b * K;
        const double m = *std::max_element(z, z + K);
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) sum += std::exp(z[k] - m);
        for (std::size_t k = 0; k < K; ++k) out[b * K + k] = static_cast<T>(std::exp(z[k] - m) / sum);
    }
    return out;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
    require_rank(logits, 2, "cross-entropy logits");
    const std::size_t B = logits.dim(0), K = logits.dim(1);
    if (labels.size() != B) throw InvalidInput("cross-entropy: label count does not match batch");
    LossResult<T> r{0.0, Tensor<T>(logits.shape())};
    for (std::size_t b = 0; b < B; ++b) {
        const int label = labels[b];
        if (label < 0 || static_cast<std::size_t>(label) >= K) {
            throw InvalidInput("cross-entropy: label " + std::to_string(label) + " outside [0, " +
                               std::to_string(K) + ")");
        }
        const T* z = logits.data() + b * K;
        const double m = *std::max_element(z, z + K);
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) sum += std::exp(z[k] - m);
        const double lse = m + std::log(sum);
        r.loss += lse - z[label];
        for (std::size_t k = 0; k < K; ++k) {
            const double p = std::exp(z[k] - lse);
            r.gradient[b * K + k] = static_cast<T>((p - (static_cast<int>(k) == label ? 1.0 : 0.0)) / B);
        }
    }
    r.loss /= static_cast<double>(B);
    return r;
}

template <typename T>
LossResult<T> mse_loss(const Tensor<T>& prediction, const Tensor<T>& target) {
    require_same_shape(target, prediction.shape(), "mse target");
    const double n = static_cast<double>(prediction.size());
    LossResult<T> r{0.0, Tensor<T>(prediction.shape())};
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = static_cast<double>(prediction[i]) - target[i];
        r.loss += d * d;
        r.gradient[i] = static_cast<T>(2.0 * d / n);
    }
    r.loss /= n;
    return r;
}

#define SICU_INSTANTIATE(T)                                                                                 \
    template Tensor<T> conv1d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,    \
                                      std::size_t, Conv1dContext<T>*);                                      \
    template Conv1dGrads<T> conv1d_backward(const Tensor<T>&, const Conv1dContext<T>&);                    \
    template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, DenseContext<T>*); \
    template DenseGrads<T> dense_backward(const Tensor<T>&, const DenseContext<T>&);                       \
    template struct BatchNormState<T>;                                                                      \
    template Tensor<T> batchnorm1d_forward(const Tensor<T>&, BatchNormState<T>&, BatchNormContext<T>*);    \
    template Tensor<T> batchnorm1d_infer(const Tensor<T>&, const BatchNormState<T>&);                      \
    template BatchNormGrads<T> batchnorm1d_backward(const Tensor<T>&, const BatchNormContext<T>&);         \
    template Tensor<T> maxpool1d_forward(const Tensor<T>&, std::size_t, MaxPoolContext*);                  \
    template Tensor<T> maxpool1d_backward(const Tensor<T>&, const MaxPoolContext&);                        \
    template Tensor<T> upsample2_forward(const Tensor<T>&);                                                \
    template Tensor<T> upsample2_backward(const Tensor<T>&);                                               \
    template Tensor<T> relu_forward(const Tensor<T>&);                                                     \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                  \
    template Tensor<T> softmax(const Tensor<T>&);                                                          \
    template LossResult<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);                  \
    template LossResult<T> mse_loss(const Tensor<T>&, const Tensor<T>&);

SICU_INSTANTIATE(float)
SICU_INSTANTIATE(double)

#undef SICU_INSTANTIATE

}  // namespace sicu::nn
