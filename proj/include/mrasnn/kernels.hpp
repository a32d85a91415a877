#pragma once

#include <cstdint>

// Dense compute kernels behind the tensor ops. Every kernel exists twice:
// kernels::reference holds plain serial loops and is the ground truth the
// test suite checks against; kernels::openmp parallelizes over independent
// output elements only, so both variants produce bit-identical results.
// The unqualified functions dispatch on the process-wide execution mode.

namespace mrasnn::kernels {

enum class Execution { serial, parallel };

Execution execution() noexcept;
void set_execution(Execution mode) noexcept;

#define MRASNN_KERNEL_DECLS                                                          \
    template <typename T>                                                            \
    void conv1d_forward(const T* in, const T* w, const T* bias, T* out, int64_t b,   \
                        int64_t c_in, int64_t s, int64_t c_out, int64_t k,           \
                        int64_t stride, int64_t pad, int64_t s_out);                 \
    template <typename T>                                                            \
    void conv1d_backward_input(const T* gout, const T* w, T* gin, int64_t b,         \
                               int64_t c_in, int64_t s, int64_t c_out, int64_t k,    \
                               int64_t stride, int64_t pad, int64_t s_out);          \
    template <typename T>                                                            \
    void conv1d_backward_weight(const T* gout, const T* in, T* gw, int64_t b,        \
                                int64_t c_in, int64_t s, int64_t c_out, int64_t k,   \
                                int64_t stride, int64_t pad, int64_t s_out);         \
    template <typename T>                                                            \
    void conv1d_backward_bias(const T* gout, T* gbias, int64_t b, int64_t c_out,     \
                              int64_t s_out);                                        \
    template <typename T>                                                            \
    void fc_forward(const T* in, const T* w, const T* bias, T* out, int64_t b,       \
                    int64_t n, int64_t m);                                           \
    template <typename T>                                                            \
    void fc_backward_input(const T* gout, const T* w, T* gin, int64_t b, int64_t n,  \
                           int64_t m);                                               \
    template <typename T>                                                            \
    void fc_backward_weight(const T* gout, const T* in, T* gw, int64_t b, int64_t n, \
                            int64_t m);                                              \
    template <typename T>                                                            \
    void fc_backward_bias(const T* gout, T* gbias, int64_t b, int64_t m);            \
    template <typename T>                                                            \
    void avgpool1d_forward(const T* in, T* out, int64_t b, int64_t c, int64_t s,     \
                           int64_t k, int64_t stride, int64_t s_out);                \
    template <typename T>                                                            \
    void avgpool1d_backward(const T* gout, T* gin, int64_t b, int64_t c, int64_t s,  \
                            int64_t k, int64_t stride, int64_t s_out);               \
    template <typename T>                                                            \
    void bn_stats(const T* in, T* mean, T* var, int64_t b, int64_t c, int64_t s);    \
    template <typename T>                                                            \
    void bn_apply(const T* in, T* out, const T* mean, const T* invstd,               \
                  const T* gamma, const T* beta, int64_t b, int64_t c, int64_t s);   \
    template <typename T>                                                            \
    void bn_backward(const T* in, const T* gout, const T* mean, const T* invstd,     \
                     const T* gamma, T* gin, T* ggamma, T* gbeta, bool train_stats,  \
                     int64_t b, int64_t c, int64_t s);                               \
    template <typename T>                                                            \
    void sigmoid_forward(const T* in, T* out, int64_t n);                            \
    template <typename T>                                                            \
    void sigmoid_backward(const T* out, const T* gout, T* gin, int64_t n);           \
    template <typename T>                                                            \
    void heaviside_forward(const T* in, T* out, int64_t n, T theta);                 \
    template <typename T>                                                            \
    void heaviside_backward(const T* in, const T* gout, T* gin, int64_t n, T theta,  \
                            T width);                                                \
    /* rank-4 padded broadcast binary ops; strides of size-1 axes are zero */        \
    template <typename T>                                                            \
    void broadcast_add(const T* a, const int64_t* sa, const T* bb, const int64_t* sb,\
                       T* out, const int64_t* oshape);                               \
    template <typename T>                                                            \
    void broadcast_mul(const T* a, const int64_t* sa, const T* bb, const int64_t* sb,\
                       T* out, const int64_t* oshape);                               \
    /* accumulate gout (optionally * other) into ga, summing broadcast axes */       \
    template <typename T>                                                            \
    void broadcast_backward(const T* gout, const T* other, const int64_t* ostrides,  \
                            T* ga, const int64_t* ashape, const int64_t* oshape);    \
    template <typename T>                                                            \
    void scale(const T* in, T* out, int64_t n, T factor);                            \
    template <typename T>                                                            \
    void scale_accumulate(const T* in, T* out, int64_t n, T factor);

namespace reference {
MRASNN_KERNEL_DECLS
}

namespace openmp {
MRASNN_KERNEL_DECLS
}

#define MRASNN_DISPATCH(fn, ...)                    \
    if (execution() == Execution::parallel) {       \
        openmp::fn(__VA_ARGS__);                    \
    } else {                                        \
        reference::fn(__VA_ARGS__);                 \
    }

template <typename T>
inline void conv1d_forward(const T* in, const T* w, const T* bias, T* out, int64_t b,
                           int64_t c_in, int64_t s, int64_t c_out, int64_t k,
                           int64_t stride, int64_t pad, int64_t s_out) {
    MRASNN_DISPATCH(conv1d_forward, in, w, bias, out, b, c_in, s, c_out, k, stride, pad, s_out)
}

template <typename T>
inline void conv1d_backward_input(const T* gout, const T* w, T* gin, int64_t b,
                                  int64_t c_in, int64_t s, int64_t c_out, int64_t k,
                                  int64_t stride, int64_t pad, int64_t s_out) {
    MRASNN_DISPATCH(conv1d_backward_input, gout, w, gin, b, c_in, s, c_out, k, stride, pad, s_out)
}

template <typename T>
inline void conv1d_backward_weight(const T* gout, const T* in, T* gw, int64_t b,
                                   int64_t c_in, int64_t s, int64_t c_out, int64_t k,
                                   int64_t stride, int64_t pad, int64_t s_out) {
    MRASNN_DISPATCH(conv1d_backward_weight, gout, in, gw, b, c_in, s, c_out, k, stride, pad, s_out)
}

template <typename T>
inline void conv1d_backward_bias(const T* gout, T* gbias, int64_t b, int64_t c_out,
                                 int64_t s_out) {
    MRASNN_DISPATCH(conv1d_backward_bias, gout, gbias, b, c_out, s_out)
}

template <typename T>
inline void fc_forward(const T* in, const T* w, const T* bias, T* out, int64_t b,
                       int64_t n, int64_t m) {
    MRASNN_DISPATCH(fc_forward, in, w, bias, out, b, n, m)
}

template <typename T>
inline void fc_backward_input(const T* gout, const T* w, T* gin, int64_t b, int64_t n,
                              int64_t m) {
    MRASNN_DISPATCH(fc_backward_input, gout, w, gin, b, n, m)
}

template <typename T>
inline void fc_backward_weight(const T* gout, const T* in, T* gw, int64_t b, int64_t n,
                               int64_t m) {
    MRASNN_DISPATCH(fc_backward_weight, gout, in, gw, b, n, m)
}

template <typename T>
inline void fc_backward_bias(const T* gout, T* gbias, int64_t b, int64_t m) {
    MRASNN_DISPATCH(fc_backward_bias, gout, gbias, b, m)
}

template <typename T>
inline void avgpool1d_forward(const T* in, T* out, int64_t b, int64_t c, int64_t s,
                              int64_t k, int64_t stride, int64_t s_out) {
    MRASNN_DISPATCH(avgpool1d_forward, in, out, b, c, s, k, stride, s_out)
}

template <typename T>
inline void avgpool1d_backward(const T* gout, T* gin, int64_t b, int64_t c, int64_t s,
                               int64_t k, int64_t stride, int64_t s_out) {
    MRASNN_DISPATCH(avgpool1d_backward, gout, gin, b, c, s, k, stride, s_out)
}

template <typename T>
inline void bn_stats(const T* in, T* mean, T* var, int64_t b, int64_t c, int64_t s) {
    MRASNN_DISPATCH(bn_stats, in, mean, var, b, c, s)
}

template <typename T>
inline void bn_apply(const T* in, T* out, const T* mean, const T* invstd, const T* gamma,
                     const T* beta, int64_t b, int64_t c, int64_t s) {
    MRASNN_DISPATCH(bn_apply, in, out, mean, invstd, gamma, beta, b, c, s)
}

template <typename T>
inline void bn_backward(const T* in, const T* gout, const T* mean, const T* invstd,
                        const T* gamma, T* gin, T* ggamma, T* gbeta, bool train_stats,
                        int64_t b, int64_t c, int64_t s) {
    MRASNN_DISPATCH(bn_backward, in, gout, mean, invstd, gamma, gin, ggamma, gbeta, train_stats, b, c, s)
}

template <typename T>
inline void sigmoid_forward(const T* in, T* out, int64_t n) {
    MRASNN_DISPATCH(sigmoid_forward, in, out, n)
}

template <typename T>
inline void sigmoid_backward(const T* out, const T* gout, T* gin, int64_t n) {
    MRASNN_DISPATCH(sigmoid_backward, out, gout, gin, n)
}

template <typename T>
inline void heaviside_forward(const T* in, T* out, int64_t n, T theta) {
    MRASNN_DISPATCH(heaviside_forward, in, out, n, theta)
}

template <typename T>
inline void heaviside_backward(const T* in, const T* gout, T* gin, int64_t n, T theta,
                               T width) {
    MRASNN_DISPATCH(heaviside_backward, in, gout, gin, n, theta, width)
}

template <typename T>
inline void broadcast_add(const T* a, const int64_t* sa, const T* bb, const int64_t* sb,
                          T* out, const int64_t* oshape) {
    MRASNN_DISPATCH(broadcast_add, a, sa, bb, sb, out, oshape)
}

template <typename T>
inline void broadcast_mul(const T* a, const int64_t* sa, const T* bb, const int64_t* sb,
                          T* out, const int64_t* oshape) {
    MRASNN_DISPATCH(broadcast_mul, a, sa, bb, sb, out, oshape)
}

template <typename T>
inline void broadcast_backward(const T* gout, const T* other, const int64_t* ostrides,
                               T* ga, const int64_t* ashape, const int64_t* oshape) {
    MRASNN_DISPATCH(broadcast_backward, gout, other, ostrides, ga, ashape, oshape)
}

template <typename T>
inline void scale(const T* in, T* out, int64_t n, T factor) {
    MRASNN_DISPATCH(scale, in, out, n, factor)
}

template <typename T>
inline void scale_accumulate(const T* in, T* out, int64_t n, T factor) {
    MRASNN_DISPATCH(scale_accumulate, in, out, n, factor)
}

#undef MRASNN_DISPATCH

}  // namespace mrasnn::kernels
