#include "mrasnn/kernels.hpp"

#include <cmath>
#include <cstdlib>

// Reference kernels: the plainest possible loop nests, used as ground truth
// by the kernel tests. Accumulation order per output element is part of the
// kernel contract (the openmp variants must reproduce it bit for bit):
//   conv forward        bias, then (c_in asc, k asc)
//   conv grad input     (c_out asc, k asc)
//   conv grad weight    (batch asc, s_out asc)
//   fc forward          bias, then n asc
//   bn / pool sums      (batch asc, spatial asc)
// Gradient kernels accumulate (+=) into their outputs.

namespace mrasnn::kernels::reference {

template <typename T>
void conv1d_forward(const T* in, const T* w, const T* bias, T* out, int64_t b,
                    int64_t c_in, int64_t s, int64_t c_out, int64_t k, int64_t stride,
                    int64_t pad, int64_t s_out) {
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t co = 0; co < c_out; ++co) {
            for (int64_t so = 0; so < s_out; ++so) {
                T acc = bias ? bias[co] : T(0);
                for (int64_t ci = 0; ci < c_in; ++ci) {
                    for (int64_t kk = 0; kk < k; ++kk) {
                        int64_t si = so * stride - pad + kk;
                        if (si < 0 || si >= s) continue;
                        acc += in[(ib * c_in + ci) * s + si] * w[(co * c_in + ci) * k + kk];
                    }
                }
                out[(ib * c_out + co) * s_out + so] = acc;
            }
        }
    }
}

template <typename T>
void conv1d_backward_input(const T* gout, const T* w, T* gin, int64_t b, int64_t c_in,
                           int64_t s, int64_t c_out, int64_t k, int64_t stride,
                           int64_t pad, int64_t s_out) {
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t ci = 0; ci < c_in; ++ci) {
            for (int64_t si = 0; si < s; ++si) {
                T acc = 0;
                for (int64_t co = 0; co < c_out; ++co) {
                    for (int64_t kk = 0; kk < k; ++kk) {
                        int64_t num = si + pad - kk;
                        if (num < 0 || num % stride != 0) continue;
                        int64_t so = num / stride;
                        if (so >= s_out) continue;
                        acc += gout[(ib * c_out + co) * s_out + so] * w[(co * c_in + ci) * k + kk];
                    }
                }
                gin[(ib * c_in + ci) * s + si] += acc;
            }
        }
    }
}

template <typename T>
void conv1d_backward_weight(const T* gout, const T* in, T* gw, int64_t b, int64_t c_in,
                            int64_t s, int64_t c_out, int64_t k, int64_t stride,
                            int64_t pad, int64_t s_out) {
    for (int64_t co = 0; co < c_out; ++co) {
        for (int64_t ci = 0; ci < c_in; ++ci) {
            for (int64_t kk = 0; kk < k; ++kk) {
                T acc = 0;
                for (int64_t ib = 0; ib < b; ++ib) {
                    for (int64_t so = 0; so < s_out; ++so) {
                        int64_t si = so * stride - pad + kk;
                        if (si < 0 || si >= s) continue;
                        acc += gout[(ib * c_out + co) * s_out + so] * in[(ib * c_in + ci) * s + si];
                    }
                }
                gw[(co * c_in + ci) * k + kk] += acc;
            }
        }
    }
}

template <typename T>
void conv1d_backward_bias(const T* gout, T* gbias, int64_t b, int64_t c_out,
                          int64_t s_out) {
    for (int64_t co = 0; co < c_out; ++co) {
        T acc = 0;
        for (int64_t ib = 0; ib < b; ++ib) {
            for (int64_t so = 0; so < s_out; ++so) {
                acc += gout[(ib * c_out + co) * s_out + so];
            }
        }
        gbias[co] += acc;
    }
}

template <typename T>
void fc_forward(const T* in, const T* w, const T* bias, T* out, int64_t b, int64_t n,
                int64_t m) {
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t im = 0; im < m; ++im) {
            T acc = bias ? bias[im] : T(0);
            for (int64_t in_i = 0; in_i < n; ++in_i) {
                acc += in[ib * n + in_i] * w[im * n + in_i];
            }
            out[ib * m + im] = acc;
        }
    }
}

template <typename T>
void fc_backward_input(const T* gout, const T* w, T* gin, int64_t b, int64_t n,
                       int64_t m) {
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t in_i = 0; in_i < n; ++in_i) {
            T acc = 0;
            for (int64_t im = 0; im < m; ++im) {
                acc += gout[ib * m + im] * w[im * n + in_i];
            }
            gin[ib * n + in_i] += acc;
        }
    }
}

template <typename T>
void fc_backward_weight(const T* gout, const T* in, T* gw, int64_t b, int64_t n,
                        int64_t m) {
    for (int64_t im = 0; im < m; ++im) {
        for (int64_t in_i = 0; in_i < n; ++in_i) {
            T acc = 0;
            for (int64_t ib = 0; ib < b; ++ib) {
                acc += gout[ib * m + im] * in[ib * n + in_i];
            }
            gw[im * n + in_i] += acc;
        }
    }
}

template <typename T>
void fc_backward_bias(const T* gout, T* gbias, int64_t b, int64_t m) {
    for (int64_t im = 0; im < m; ++im) {
        T acc = 0;
        for (int64_t ib = 0; ib < b; ++ib) {
            acc += gout[ib * m + im];
        }
        gbias[im] += acc;
    }
}

template <typename T>
void avgpool1d_forward(const T* in, T* out, int64_t b, int64_t c, int64_t s, int64_t k,
                       int64_t stride, int64_t s_out) {
    const T inv = T(1) / static_cast<T>(k);
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const T* row = in + (ib * c + ic) * s;
            for (int64_t so = 0; so < s_out; ++so) {
                T acc = 0;
                for (int64_t kk = 0; kk < k; ++kk) {
                    acc += row[so * stride + kk];
                }
                out[(ib * c + ic) * s_out + so] = acc * inv;
            }
        }
    }
}

template <typename T>
void avgpool1d_backward(const T* gout, T* gin, int64_t b, int64_t c, int64_t s,
                        int64_t k, int64_t stride, int64_t s_out) {
    const T inv = T(1) / static_cast<T>(k);
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const T* grow = gout + (ib * c + ic) * s_out;
            T* irow = gin + (ib * c + ic) * s;
            for (int64_t si = 0; si < s; ++si) {
                T acc = 0;
                for (int64_t so = 0; so < s_out; ++so) {
                    int64_t off = si - so * stride;
                    if (off >= 0 && off < k) acc += grow[so];
                }
                irow[si] += acc * inv;
            }
        }
    }
}

template <typename T>
void bn_stats(const T* in, T* mean, T* var, int64_t b, int64_t c, int64_t s) {
    const T inv_n = T(1) / static_cast<T>(b * s);
    for (int64_t ic = 0; ic < c; ++ic) {
        T acc = 0;
        for (int64_t ib = 0; ib < b; ++ib) {
            const T* row = in + (ib * c + ic) * s;
            for (int64_t si = 0; si < s; ++si) acc += row[si];
        }
        const T mu = acc * inv_n;
        mean[ic] = mu;
        T vacc = 0;
        for (int64_t ib = 0; ib < b; ++ib) {
            const T* row = in + (ib * c + ic) * s;
            for (int64_t si = 0; si < s; ++si) {
                T d = row[si] - mu;
                vacc += d * d;
            }
        }
        var[ic] = vacc * inv_n;
    }
}

template <typename T>
void bn_apply(const T* in, T* out, const T* mean, const T* invstd, const T* gamma,
              const T* beta, int64_t b, int64_t c, int64_t s) {
    for (int64_t ib = 0; ib < b; ++ib) {
        for (int64_t ic = 0; ic < c; ++ic) {
            const T mu = mean[ic];
            const T is = invstd[ic];
            const T g = gamma[ic];
            const T bt = beta[ic];
            const T* row = in + (ib * c + ic) * s;
            T* orow = out + (ib * c + ic) * s;
            for (int64_t si = 0; si < s; ++si) {
                orow[si] = g * ((row[si] - mu) * is) + bt;
            }
        }
    }
}

template <typename T>
void bn_backward(const T* in, const T* gout, const T* mean, const T* invstd,
                 const T* gamma, T* gin, T* ggamma, T* gbeta, bool train_stats,
                 int64_t b, int64_t c, int64_t s) {
    const T inv_n = T(1) / static_cast<T>(b * s);
    for (int64_t ic = 0; ic < c; ++ic) {
        const T mu = mean[ic];
        const T is = invstd[ic];
        const T g = gamma[ic];
        T sum_gy = 0;
        T sum_gy_xhat = 0;
        for (int64_t ib = 0; ib < b; ++ib) {
            const T* row = in + (ib * c + ic) * s;
            const T* grow = gout + (ib * c + ic) * s;
            for (int64_t si = 0; si < s; ++si) {
                sum_gy += grow[si];
                sum_gy_xhat += grow[si] * ((row[si] - mu) * is);
            }
        }
        if (ggamma) ggamma[ic] += sum_gy_xhat;
        if (gbeta) gbeta[ic] += sum_gy;
        if (!gin) continue;
        for (int64_t ib = 0; ib < b; ++ib) {
            const T* row = in + (ib * c + ic) * s;
            const T* grow = gout + (ib * c + ic) * s;
            T* irow = gin + (ib * c + ic) * s;
            for (int64_t si = 0; si < s; ++si) {
                if (train_stats) {
                    T xhat = (row[si] - mu) * is;
                    irow[si] += g * is * (grow[si] - sum_gy * inv_n - xhat * sum_gy_xhat * inv_n);
                } else {
                    irow[si] += g * is * grow[si];
                }
            }
        }
    }
}

template <typename T>
void sigmoid_forward(const T* in, T* out, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        out[i] = T(1) / (T(1) + std::exp(-in[i]));
    }
}

template <typename T>
void sigmoid_backward(const T* out, const T* gout, T* gin, int64_t n) {
    for (int64_t i = 0; i < n; ++i) {
        gin[i] += gout[i] * out[i] * (T(1) - out[i]);
    }
}

template <typename T>
void heaviside_forward(const T* in, T* out, int64_t n, T theta) {
    for (int64_t i = 0; i < n; ++i) {
        out[i] = in[i] >= theta ? T(1) : T(0);
    }
}

template <typename T>
void heaviside_backward(const T* in, const T* gout, T* gin, int64_t n, T theta,
                        T width) {
    const T half = width / T(2);
    const T slope = T(1) / width;
    for (int64_t i = 0; i < n; ++i) {
        if (std::abs(in[i] - theta) < half) {
            gin[i] += gout[i] * slope;
        }
    }
}

template <typename T>
void broadcast_add(const T* a, const int64_t* sa, const T* bb, const int64_t* sb, T* out,
                   const int64_t* oshape) {
    int64_t idx = 0;
    for (int64_t i0 = 0; i0 < oshape[0]; ++i0)
        for (int64_t i1 = 0; i1 < oshape[1]; ++i1)
            for (int64_t i2 = 0; i2 < oshape[2]; ++i2)
                for (int64_t i3 = 0; i3 < oshape[3]; ++i3) {
                    out[idx++] = a[i0 * sa[0] + i1 * sa[1] + i2 * sa[2] + i3 * sa[3]] +
                                 bb[i0 * sb[0] + i1 * sb[1] + i2 * sb[2] + i3 * sb[3]];
                }
}

template <typename T>
void broadcast_mul(const T* a, const int64_t* sa, const T* bb, const int64_t* sb, T* out,
                   const int64_t* oshape) {
    int64_t idx = 0;
    for (int64_t i0 = 0; i0 < oshape[0]; ++i0)
        for (int64_t i1 = 0; i1 < oshape[1]; ++i1)
            for (int64_t i2 = 0; i2 < oshape[2]; ++i2)
                for (int64_t i3 = 0; i3 < oshape[3]; ++i3) {
                    out[idx++] = a[i0 * sa[0] + i1 * sa[1] + i2 * sa[2] + i3 * sa[3]] *
                                 bb[i0 * sb[0] + i1 * sb[1] + i2 * sb[2] + i3 * sb[3]];
                }
}

template <typename T>
void broadcast_backward(const T* gout, const T* other, const int64_t* other_strides,
                        T* ga, const int64_t* ashape, const int64_t* oshape) {
    // Walk the elements of a; for each, sum gout (times the co-operand for
    // mul) over the axes a is broadcast along. Axis order is ascending, so
    // the accumulation order is fixed.
    int64_t ostrides[4];
    ostrides[3] = 1;
    for (int i = 2; i >= 0; --i) ostrides[i] = ostrides[i + 1] * oshape[i + 1];
    int64_t aidx = 0;
    for (int64_t a0 = 0; a0 < ashape[0]; ++a0)
        for (int64_t a1 = 0; a1 < ashape[1]; ++a1)
            for (int64_t a2 = 0; a2 < ashape[2]; ++a2)
                for (int64_t a3 = 0; a3 < ashape[3]; ++a3) {
                    const int64_t lo0 = ashape[0] == oshape[0] ? a0 : 0;
                    const int64_t hi0 = ashape[0] == oshape[0] ? a0 + 1 : oshape[0];
                    const int64_t lo1 = ashape[1] == oshape[1] ? a1 : 0;
                    const int64_t hi1 = ashape[1] == oshape[1] ? a1 + 1 : oshape[1];
                    const int64_t lo2 = ashape[2] == oshape[2] ? a2 : 0;
                    const int64_t hi2 = ashape[2] == oshape[2] ? a2 + 1 : oshape[2];
                    const int64_t lo3 = ashape[3] == oshape[3] ? a3 : 0;
                    const int64_t hi3 = ashape[3] == oshape[3] ? a3 + 1 : oshape[3];
                    T acc = 0;
                    for (int64_t o0 = lo0; o0 < hi0; ++o0)
                        for (int64_t o1 = lo1; o1 < hi1; ++o1)
                            for (int64_t o2 = lo2; o2 < hi2; ++o2)
                                for (int64_t o3 = lo3; o3 < hi3; ++o3) {
                                    int64_t oi = o0 * ostrides[0] + o1 * ostrides[1] +
                                                 o2 * ostrides[2] + o3 * ostrides[3];
                                    T v = gout[oi];
                                    if (other) {
                                        v *= other[o0 * other_strides[0] + o1 * other_strides[1] +
                                                   o2 * other_strides[2] + o3 * other_strides[3]];
                                    }
                                    acc += v;
                                }
                    ga[aidx++] += acc;
                }
}

template <typename T>
void scale(const T* in, T* out, int64_t n, T factor) {
    for (int64_t i = 0; i < n; ++i) out[i] = in[i] * factor;
}

template <typename T>
void scale_accumulate(const T* in, T* out, int64_t n, T factor) {
    for (int64_t i = 0; i < n; ++i) out[i] += in[i] * factor;
}

#define MRASNN_INSTANTIATE(T)                                                                      \
    template void conv1d_forward<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t,  \
                                    int64_t, int64_t, int64_t, int64_t, int64_t);                 \
    template void conv1d_backward_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,     \
                                           int64_t, int64_t, int64_t, int64_t, int64_t);          \
    template void conv1d_backward_weight<T>(const T*, const T*, T*, int64_t, int64_t, int64_t,    \
                                            int64_t, int64_t, int64_t, int64_t, int64_t);         \
    template void conv1d_backward_bias<T>(const T*, T*, int64_t, int64_t, int64_t);               \
    template void fc_forward<T>(const T*, const T*, const T*, T*, int64_t, int64_t, int64_t);     \
    template void fc_backward_input<T>(const T*, const T*, T*, int64_t, int64_t, int64_t);        \
    template void fc_backward_weight<T>(const T*, const T*, T*, int64_t, int64_t, int64_t);       \
    template void fc_backward_bias<T>(const T*, T*, int64_t, int64_t);                            \
    template void avgpool1d_forward<T>(const T*, T*, int64_t, int64_t, int64_t, int64_t, int64_t, \
                                       int64_t);                                                  \
    template void avgpool1d_backward<T>(const T*, T*, int64_t, int64_t, int64_t, int64_t,         \
                                        int64_t, int64_t);                                        \
    template void bn_stats<T>(const T*, T*, T*, int64_t, int64_t, int64_t);                       \
    template void bn_apply<T>(const T*, T*, const T*, const T*, const T*, const T*, int64_t,      \
                              int64_t, int64_t);                                                  \
    template void bn_backward<T>(const T*, const T*, const T*, const T*, const T*, T*, T*, T*,    \
                                 bool, int64_t, int64_t, int64_t);                                \
    template void sigmoid_forward<T>(const T*, T*, int64_t);                                      \
    template void sigmoid_backward<T>(const T*, const T*, T*, int64_t);                           \
    template void heaviside_forward<T>(const T*, T*, int64_t, T);                                 \
    template void heaviside_backward<T>(const T*, const T*, T*, int64_t, T, T);                   \
    template void broadcast_add<T>(const T*, const int64_t*, const T*, const int64_t*, T*,        \
                                   const int64_t*);                                               \
    template void broadcast_mul<T>(const T*, const int64_t*, const T*, const int64_t*, T*,        \
                                   const int64_t*);                                               \
    template void broadcast_backward<T>(const T*, const T*, const int64_t*, T*, const int64_t*,   \
                                        const int64_t*);                                          \
    template void scale<T>(const T*, T*, int64_t, T);                                             \
    template void scale_accumulate<T>(const T*, T*, int64_t, T);

MRASNN_INSTANTIATE(float)
MRASNN_INSTANTIATE(double)

#undef MRASNN_INSTANTIATE

}  // namespace mrasnn::kernels::reference
