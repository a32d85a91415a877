#include "mrasnn/tensor.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <sstream>

#include "mrasnn/kernels.hpp"

namespace mrasnn {

namespace {
std::atomic<bool> g_runtime_checks{true};
}

bool runtime_checks_enabled() noexcept { return g_runtime_checks.load(std::memory_order_relaxed); }
void set_runtime_checks(bool enabled) noexcept { g_runtime_checks.store(enabled, std::memory_order_relaxed); }

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    for (size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] <= 0) {
            throw ShapeError("tensor: axis " + std::to_string(i) + " of " + shape_str(shape) +
                             " must be positive");
        }
    }
    auto node = std::make_shared<TensorNode<T>>();
    int64_t n = shape_numel(shape);
    node->shape = std::move(shape);
    node->data.assign(static_cast<size_t>(n), T(0));
    node->requires_grad = requires_grad;
    if (requires_grad) node->grad.assign(static_cast<size_t>(n), T(0));
    Tensor<T> t;
    t.node_ = std::move(node);
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    Tensor<T> t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->data) v = value;
    return t;
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw ShapeError("tensor: " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
    Tensor<T> t = zeros(std::move(shape), requires_grad);
    t.node_->data = std::move(values);
    return t;
}

template <typename T>
void Tensor<T>::set_requires_grad(bool rg) {
    node_->requires_grad = rg;
    if (rg && node_->grad.size() != node_->data.size()) {
        node_->grad.assign(node_->data.size(), T(0));
    }
    if (!rg) node_->grad.clear();
}

template <typename T>
void Tensor<T>::zero_grad() {
    if (node_->requires_grad) {
        std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }
}

template <typename T>
T Tensor<T>::item() const {
    if (!node_ || node_->data.size() != 1) {
        throw ShapeError("item: tensor is not a scalar");
    }
    return node_->data[0];
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ValueError("backward: loss must be a single-element tensor");
    }
    if (!loss.requires_grad()) {
        throw ValueError("backward: loss is not connected to the tape");
    }
    loss.node()->grad[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        (*it)();
    }
    records_.clear();
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
    if (!runtime_checks_enabled()) return;
    for (const T& v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + ": non-finite value in output");
        }
    }
}

namespace {

template <typename T>
bool want_record(Tape<T>* tape, std::initializer_list<const Tensor<T>*> inputs) {
    if (!tape) return false;
    for (const Tensor<T>* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

using Dims4 = std::array<int64_t, 4>;

Dims4 pad4(const Shape& s) {
    Dims4 out{1, 1, 1, 1};
    size_t off = 4 - s.size();
    for (size_t i = 0; i < s.size(); ++i) out[off + i] = s[i];
    return out;
}

// contiguous strides, zeroed on size-1 axes so they broadcast
Dims4 broadcast_strides(const Dims4& shape) {
    Dims4 st{};
    int64_t acc = 1;
    for (int i = 3; i >= 0; --i) {
        st[static_cast<size_t>(i)] = shape[static_cast<size_t>(i)] == 1 ? 0 : acc;
        acc *= shape[static_cast<size_t>(i)];
    }
    return st;
}

template <typename T>
Shape broadcast_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.ndim() != b.ndim()) {
        throw ShapeError(std::string(op) + ": rank mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Shape out(a.shape().size());
    for (size_t i = 0; i < out.size(); ++i) {
        int64_t da = a.shape()[i];
        int64_t db = b.shape()[i];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + ": axis " + std::to_string(i) +
                             " incompatible, " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
        }
        out[i] = da > db ? da : db;
    }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> conv1d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int64_t stride, int64_t padding) {
    if (input.ndim() != 3) {
        throw ShapeError("conv1d: input must be [batch, channels, length], got " +
                         shape_str(input.shape()));
    }
    if (weight.ndim() != 3) {
        throw ShapeError("conv1d: weight must be [c_out, c_in, k], got " +
                         shape_str(weight.shape()));
    }
    const int64_t b = input.dim(0), c_in = input.dim(1), s = input.dim(2);
    const int64_t c_out = weight.dim(0), k = weight.dim(2);
    if (weight.dim(1) != c_in) {
        throw ShapeError("conv1d: channel axis mismatch, input has " + std::to_string(c_in) +
                         " channels, weight expects " + std::to_string(weight.dim(1)));
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != c_out)) {
        throw ShapeError("conv1d: bias must be [" + std::to_string(c_out) + "], got " +
                         shape_str(bias.shape()));
    }
    if (stride < 1) throw ValueError("conv1d: stride must be positive");
    if (padding < 0) throw ValueError("conv1d: padding must be non-negative");
    if (k > s + 2 * padding) {
        throw ShapeError("conv1d: kernel " + std::to_string(k) + " exceeds padded length " +
                         std::to_string(s + 2 * padding));
    }
    const int64_t s_out = (s + 2 * padding - k) / stride + 1;

    const bool rec = want_record(tape, {&input, &weight, &bias});
    Tensor<T> out = Tensor<T>::zeros({b, c_out, s_out}, rec);
    kernels::conv1d_forward(input.data(), weight.data(),
                            bias.defined() ? bias.data() : nullptr, out.data(), b, c_in, s,
                            c_out, k, stride, padding, s_out);
    check_finite(out, "conv1d");
    if (rec) {
        tape->record([input, weight, bias, out, b, c_in, s, c_out, k, stride, padding, s_out]() {
            Tensor<T> in_mut = input;
            Tensor<T> w_mut = weight;
            Tensor<T> bias_mut = bias;
            if (input.requires_grad()) {
                kernels::conv1d_backward_input(out.grad(), weight.data(), in_mut.grad(), b, c_in,
                                               s, c_out, k, stride, padding, s_out);
            }
            if (weight.requires_grad()) {
                kernels::conv1d_backward_weight(out.grad(), input.data(), w_mut.grad(), b, c_in,
                                                s, c_out, k, stride, padding, s_out);
            }
            if (bias.defined() && bias.requires_grad()) {
                kernels::conv1d_backward_bias(out.grad(), bias_mut.grad(), b, c_out, s_out);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> batchnorm1d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& running_mean, Tensor<T>& running_var,
                      bool training, T eps, T momentum) {
    if (input.ndim() != 3) {
        throw ShapeError("batchnorm1d: input must be [batch, channels, length], got " +
                         shape_str(input.shape()));
    }
    const int64_t b = input.dim(0), c = input.dim(1), s = input.dim(2);
    if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c) {
        throw ShapeError("batchnorm1d: gamma/beta must be [" + std::to_string(c) + "]");
    }
    if (training && b * s < 2) {
        throw ValueError("batchnorm1d: degenerate batch, need at least 2 values per channel");
    }

    std::vector<T> mean(static_cast<size_t>(c));
    std::vector<T> invstd(static_cast<size_t>(c));
    if (training) {
        std::vector<T> var(static_cast<size_t>(c));
        kernels::bn_stats(input.data(), mean.data(), var.data(), b, c, s);
        for (int64_t i = 0; i < c; ++i) {
            invstd[static_cast<size_t>(i)] =
                T(1) / std::sqrt(var[static_cast<size_t>(i)] + eps);
        }
        // running stats track the unbiased variance
        const T n = static_cast<T>(b * s);
        const T unbias = n > 1 ? n / (n - 1) : T(1);
        for (int64_t i = 0; i < c; ++i) {
            running_mean.data()[i] =
                (T(1) - momentum) * running_mean.data()[i] + momentum * mean[static_cast<size_t>(i)];
            running_var.data()[i] = (T(1) - momentum) * running_var.data()[i] +
                                    momentum * var[static_cast<size_t>(i)] * unbias;
        }
    } else {
        for (int64_t i = 0; i < c; ++i) {
            mean[static_cast<size_t>(i)] = running_mean.data()[i];
            invstd[static_cast<size_t>(i)] =
                T(1) / std::sqrt(running_var.data()[i] + eps);
        }
    }

    const bool rec = want_record(tape, {&input, &gamma, &beta});
    Tensor<T> out = Tensor<T>::zeros({b, c, s}, rec);
    kernels::bn_apply(input.data(), out.data(), mean.data(), invstd.data(), gamma.data(),
                      beta.data(), b, c, s);
    check_finite(out, "batchnorm1d");
    if (rec) {
        tape->record([input, gamma, beta, out, mean, invstd, training, b, c, s]() {
            Tensor<T> in_mut = input;
            Tensor<T> g_mut = gamma;
            Tensor<T> bt_mut = beta;
            kernels::bn_backward(input.data(), out.grad(), mean.data(), invstd.data(),
                                 gamma.data(), input.requires_grad() ? in_mut.grad() : nullptr,
                                 gamma.requires_grad() ? g_mut.grad() : nullptr,
                                 beta.requires_grad() ? bt_mut.grad() : nullptr, training, b, c,
                                 s);
        });
    }
    return out;
}

template <typename T>
Tensor<T> avgpool1d(Tape<T>* tape, const Tensor<T>& input, int64_t kernel, int64_t stride) {
    if (input.ndim() != 3) {
        throw ShapeError("avgpool1d: input must be [batch, channels, length], got " +
                         shape_str(input.shape()));
    }
    const int64_t b = input.dim(0), c = input.dim(1), s = input.dim(2);
    if (kernel < 1 || stride < 1) throw ValueError("avgpool1d: kernel and stride must be positive");
    if (kernel > s) {
        throw ShapeError("avgpool1d: kernel " + std::to_string(kernel) +
                         " exceeds spatial length " + std::to_string(s));
    }
    const int64_t s_out = (s - kernel) / stride + 1;
    const bool rec = want_record(tape, {&input});
    Tensor<T> out = Tensor<T>::zeros({b, c, s_out}, rec);
    kernels::avgpool1d_forward(input.data(), out.data(), b, c, s, kernel, stride, s_out);
    check_finite(out, "avgpool1d");
    if (rec) {
        tape->record([input, out, b, c, s, kernel, stride, s_out]() {
            Tensor<T> in_mut = input;
            kernels::avgpool1d_backward(out.grad(), in_mut.grad(), b, c, s, kernel, stride, s_out);
        });
    }
    return out;
}

template <typename T>
Tensor<T> fully_connected(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                          const Tensor<T>& bias) {
    if (input.ndim() != 2) {
        throw ShapeError("fully_connected: input must be [batch, features], got " +
                         shape_str(input.shape()));
    }
    if (weight.ndim() != 2) {
        throw ShapeError("fully_connected: weight must be [out, in], got " +
                         shape_str(weight.shape()));
    }
    const int64_t b = input.dim(0), n = input.dim(1), m = weight.dim(0);
    if (weight.dim(1) != n) {
        throw ShapeError("fully_connected: inner axis mismatch, input has " + std::to_string(n) +
                         " features, weight expects " + std::to_string(weight.dim(1)));
    }
    if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != m)) {
        throw ShapeError("fully_connected: bias must be [" + std::to_string(m) + "]");
    }
    const bool rec = want_record(tape, {&input, &weight, &bias});
    Tensor<T> out = Tensor<T>::zeros({b, m}, rec);
    kernels::fc_forward(input.data(), weight.data(), bias.defined() ? bias.data() : nullptr,
                        out.data(), b, n, m);
    check_finite(out, "fully_connected");
    if (rec) {
        tape->record([input, weight, bias, out, b, n, m]() {
            Tensor<T> in_mut = input;
            Tensor<T> w_mut = weight;
            Tensor<T> bias_mut = bias;
            if (input.requires_grad()) {
                kernels::fc_backward_input(out.grad(), weight.data(), in_mut.grad(), b, n, m);
            }
            if (weight.requires_grad()) {
                kernels::fc_backward_weight(out.grad(), input.data(), w_mut.grad(), b, n, m);
            }
            if (bias.defined() && bias.requires_grad()) {
                kernels::fc_backward_bias(out.grad(), bias_mut.grad(), b, m);
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> heaviside_surrogate(Tape<T>* tape, const Tensor<T>& input, T theta, T a) {
    if (!(a > T(0))) throw ValueError("heaviside_surrogate: surrogate width a must be positive");
    const bool rec = want_record(tape, {&input});
    Tensor<T> out = Tensor<T>::zeros(input.shape(), rec);
    kernels::heaviside_forward(input.data(), out.data(), input.numel(), theta);
    if (rec) {
        tape->record([input, out, theta, a]() {
            Tensor<T> in_mut = input;
            kernels::heaviside_backward(input.data(), out.grad(), in_mut.grad(), input.numel(),
                                        theta, a);
        });
    }
    return out;
}

namespace {

template <typename T>
Tensor<T> broadcast_op(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b, bool is_mul,
                       const char* name) {
    Shape oshape = broadcast_shape(a, b, name);
    const Dims4 o4 = pad4(oshape);
    const Dims4 a4 = pad4(a.shape());
    const Dims4 b4 = pad4(b.shape());
    const Dims4 sa = broadcast_strides(a4);
    const Dims4 sb = broadcast_strides(b4);
    const bool rec = want_record(tape, {&a, &b});
    Tensor<T> out = Tensor<T>::zeros(oshape, rec);
    if (is_mul) {
        kernels::broadcast_mul(a.data(), sa.data(), b.data(), sb.data(), out.data(), o4.data());
    } else {
        kernels::broadcast_add(a.data(), sa.data(), b.data(), sb.data(), out.data(), o4.data());
    }
    check_finite(out, name);
    if (rec) {
        tape->record([a, b, out, o4, a4, b4, sa, sb, is_mul]() {
            if (a.requires_grad()) {
                Tensor<T> a_mut = a;
                kernels::broadcast_backward(out.grad(), is_mul ? b.data() : nullptr, sb.data(),
                                            a_mut.grad(), a4.data(), o4.data());
            }
            if (b.requires_grad()) {
                Tensor<T> b_mut = b;
                kernels::broadcast_backward(out.grad(), is_mul ? a.data() : nullptr, sa.data(),
                                            b_mut.grad(), b4.data(), o4.data());
            }
        });
    }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    return broadcast_op(tape, a, b, false, "add");
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    return broadcast_op(tape, a, b, true, "mul");
}

template <typename T>
Tensor<T> scalar_mul(Tape<T>* tape, const Tensor<T>& a, T factor) {
    const bool rec = want_record(tape, {&a});
    Tensor<T> out = Tensor<T>::zeros(a.shape(), rec);
    kernels::scale(a.data(), out.data(), a.numel(), factor);
    check_finite(out, "scalar_mul");
    if (rec) {
        tape->record([a, out, factor]() {
            Tensor<T> a_mut = a;
            kernels::scale_accumulate(out.grad(), a_mut.grad(), a.numel(), factor);
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& a) {
    const bool rec = want_record(tape, {&a});
    Tensor<T> out = Tensor<T>::zeros(a.shape(), rec);
    kernels::sigmoid_forward(a.data(), out.data(), a.numel());
    if (rec) {
        tape->record([a, out]() {
            Tensor<T> a_mut = a;
            kernels::sigmoid_backward(out.data(), out.grad(), a_mut.grad(), a.numel());
        });
    }
    return out;
}

namespace {

// mean over one axis of a rank-3 tensor, keeping the axis as size 1
template <typename T>
Tensor<T> mean_axis3(Tape<T>* tape, const Tensor<T>& a, int axis, const char* name) {
    if (a.ndim() != 3) {
        throw ShapeError(std::string(name) + ": input must be rank-3, got " +
                         shape_str(a.shape()));
    }
    const int64_t b = a.dim(0), c = a.dim(1), s = a.dim(2);
    Shape oshape = a.shape();
    oshape[static_cast<size_t>(axis)] = 1;
    const bool rec = want_record(tape, {&a});
    Tensor<T> out = Tensor<T>::zeros(oshape, rec);
    const T* in = a.data();
    T* o = out.data();
    if (axis == 2) {
        const T inv = T(1) / static_cast<T>(s);
        for (int64_t i = 0; i < b * c; ++i) {
            T acc = 0;
            for (int64_t si = 0; si < s; ++si) acc += in[i * s + si];
            o[i] = acc * inv;
        }
    } else {
        const T inv = T(1) / static_cast<T>(c);
        for (int64_t ib = 0; ib < b; ++ib) {
            for (int64_t si = 0; si < s; ++si) {
                T acc = 0;
                for (int64_t ic = 0; ic < c; ++ic) acc += in[(ib * c + ic) * s + si];
                o[ib * s + si] = acc * inv;
            }
        }
    }
    if (rec) {
        tape->record([a, out, axis, b, c, s]() {
            Tensor<T> a_mut = a;
            T* ga = a_mut.grad();
            const T* go = out.grad();
            if (axis == 2) {
                const T inv = T(1) / static_cast<T>(s);
                for (int64_t i = 0; i < b * c; ++i) {
                    const T g = go[i] * inv;
                    for (int64_t si = 0; si < s; ++si) ga[i * s + si] += g;
                }
            } else {
                const T inv = T(1) / static_cast<T>(c);
                for (int64_t ib = 0; ib < b; ++ib) {
                    for (int64_t si = 0; si < s; ++si) {
                        const T g = go[ib * s + si] * inv;
                        for (int64_t ic = 0; ic < c; ++ic) ga[(ib * c + ic) * s + si] += g;
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> reduce_all(Tape<T>* tape, const Tensor<T>& a, bool mean) {
    const bool rec = want_record(tape, {&a});
    Tensor<T> out = Tensor<T>::zeros({1}, rec);
    T acc = 0;
    for (const T& v : a.values()) acc += v;
    const T factor = mean ? T(1) / static_cast<T>(a.numel()) : T(1);
    out.data()[0] = acc * factor;
    if (rec) {
        tape->record([a, out, factor]() {
            Tensor<T> a_mut = a;
            const T g = out.grad()[0] * factor;
            T* ga = a_mut.grad();
            for (int64_t i = 0; i < a.numel(); ++i) ga[i] += g;
        });
    }
    return out;
}

}  // namespace

template <typename T>
Tensor<T> mean_spatial(Tape<T>* tape, const Tensor<T>& a) {
    return mean_axis3(tape, a, 2, "mean_spatial");
}

template <typename T>
Tensor<T> mean_channels(Tape<T>* tape, const Tensor<T>& a) {
    return mean_axis3(tape, a, 1, "mean_channels");
}

template <typename T>
Tensor<T> mean_all(Tape<T>* tape, const Tensor<T>& a) {
    return reduce_all(tape, a, true);
}

template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& a) {
    return reduce_all(tape, a, false);
}

template <typename T>
Tensor<T> concat_channels(Tape<T>* tape, const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw ValueError("concat_channels: no inputs");
    const int64_t b = parts[0].dim(0), s = parts[0].dim(2);
    int64_t c_total = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].ndim() != 3 || parts[i].dim(0) != b || parts[i].dim(2) != s) {
            throw ShapeError("concat_channels: input " + std::to_string(i) + " has shape " +
                             shape_str(parts[i].shape()) + ", expected [" + std::to_string(b) +
                             ",*," + std::to_string(s) + "]");
        }
        c_total += parts[i].dim(1);
    }
    bool rec = false;
    if (tape) {
        for (const auto& p : parts) rec = rec || p.requires_grad();
    }
    Tensor<T> out = Tensor<T>::zeros({b, c_total, s}, rec);
    T* o = out.data();
    for (int64_t ib = 0; ib < b; ++ib) {
        int64_t co = 0;
        for (const auto& p : parts) {
            const int64_t c = p.dim(1);
            const T* src = p.data() + ib * c * s;
            std::copy(src, src + c * s, o + (ib * c_total + co) * s);
            co += c;
        }
    }
    if (rec) {
        tape->record([parts, out, b, c_total, s]() {
            const T* go = out.grad();
            for (int64_t ib = 0; ib < b; ++ib) {
                int64_t co = 0;
                for (const auto& p : parts) {
                    const int64_t c = p.dim(1);
                    if (p.requires_grad()) {
                        Tensor<T> p_mut = p;
                        T* gp = p_mut.grad() + ib * c * s;
                        const T* src = go + (ib * c_total + co) * s;
                        for (int64_t i = 0; i < c * s; ++i) gp[i] += src[i];
                    }
                    co += c;
                }
            }
        });
    }
    return out;
}

template <typename T>
std::vector<Tensor<T>> split_channels(Tape<T>* tape, const Tensor<T>& a,
                                      const std::vector<int64_t>& sizes) {
    if (a.ndim() != 3) {
        throw ShapeError("split_channels: input must be rank-3, got " + shape_str(a.shape()));
    }
    const int64_t b = a.dim(0), c = a.dim(1), s = a.dim(2);
    int64_t total = 0;
    for (int64_t sz : sizes) total += sz;
    if (total != c) {
        throw ShapeError("split_channels: sizes sum to " + std::to_string(total) +
                         ", channel axis has " + std::to_string(c));
    }
    const bool rec = want_record(tape, {&a});
    std::vector<Tensor<T>> outs;
    outs.reserve(sizes.size());
    int64_t co = 0;
    for (int64_t sz : sizes) {
        Tensor<T> part = Tensor<T>::zeros({b, sz, s}, rec);
        for (int64_t ib = 0; ib < b; ++ib) {
            const T* src = a.data() + (ib * c + co) * s;
            std::copy(src, src + sz * s, part.data() + ib * sz * s);
        }
        outs.push_back(part);
        co += sz;
    }
    if (rec) {
        tape->record([a, outs, sizes, b, c, s]() {
            Tensor<T> a_mut = a;
            T* ga = a_mut.grad();
            int64_t co = 0;
            for (size_t pi = 0; pi < outs.size(); ++pi) {
                const int64_t sz = sizes[pi];
                const T* gp = outs[pi].grad();
                for (int64_t ib = 0; ib < b; ++ib) {
                    T* dst = ga + (ib * c + co) * s;
                    const T* src = gp + ib * sz * s;
                    for (int64_t i = 0; i < sz * s; ++i) dst[i] += src[i];
                }
                co += sz;
            }
        });
    }
    return outs;
}

template <typename T>
Tensor<T> transpose_last2(Tape<T>* tape, const Tensor<T>& a) {
    if (a.ndim() < 2) {
        throw ShapeError("transpose_last2: input must have rank >= 2, got " +
                         shape_str(a.shape()));
    }
    Shape oshape = a.shape();
    std::swap(oshape[oshape.size() - 1], oshape[oshape.size() - 2]);
    const int64_t n = a.dim(a.ndim() - 1);
    const int64_t m = a.dim(a.ndim() - 2);
    const int64_t batch = a.numel() / (m * n);
    const bool rec = want_record(tape, {&a});
    Tensor<T> out = Tensor<T>::zeros(oshape, rec);
    const T* in = a.data();
    T* o = out.data();
    for (int64_t ib = 0; ib < batch; ++ib) {
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t j = 0; j < n; ++j) {
                o[(ib * n + j) * m + i] = in[(ib * m + i) * n + j];
            }
        }
    }
    if (rec) {
        tape->record([a, out, batch, m, n]() {
            Tensor<T> a_mut = a;
            T* ga = a_mut.grad();
            const T* go = out.grad();
            for (int64_t ib = 0; ib < batch; ++ib) {
                for (int64_t i = 0; i < m; ++i) {
                    for (int64_t j = 0; j < n; ++j) {
                        ga[(ib * m + i) * n + j] += go[(ib * n + j) * m + i];
                    }
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " cannot become " +
                         shape_str(shape));
    }
    const bool rec = want_record(tape, {&a});
    Tensor<T> out = Tensor<T>::zeros(std::move(shape), rec);
    std::copy(a.data(), a.data() + a.numel(), out.data());
    if (rec) {
        tape->record([a, out]() {
            Tensor<T> a_mut = a;
            T* ga = a_mut.grad();
            const T* go = out.grad();
            for (int64_t i = 0; i < a.numel(); ++i) ga[i] += go[i];
        });
    }
    return out;
}

#define MRASNN_INSTANTIATE_TENSOR(T)                                                             \
    template class Tensor<T>;                                                                    \
    template class Tape<T>;                                                                      \
    template void check_finite<T>(const Tensor<T>&, const char*);                               \
    template Tensor<T> conv1d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                 int64_t, int64_t);                                              \
    template Tensor<T> batchnorm1d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,             \
                                      const Tensor<T>&, Tensor<T>&, Tensor<T>&, bool, T, T);    \
    template Tensor<T> avgpool1d<T>(Tape<T>*, const Tensor<T>&, int64_t, int64_t);              \
    template Tensor<T> fully_connected<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,         \
                                          const Tensor<T>&);                                     \
    template Tensor<T> heaviside_surrogate<T>(Tape<T>*, const Tensor<T>&, T, T);                \
    template Tensor<T> add<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> mul<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> scalar_mul<T>(Tape<T>*, const Tensor<T>&, T);                            \
    template Tensor<T> sigmoid<T>(Tape<T>*, const Tensor<T>&);                                  \
    template Tensor<T> mean_spatial<T>(Tape<T>*, const Tensor<T>&);                             \
    template Tensor<T> mean_channels<T>(Tape<T>*, const Tensor<T>&);                            \
    template Tensor<T> mean_all<T>(Tape<T>*, const Tensor<T>&);                                 \
    template Tensor<T> sum_all<T>(Tape<T>*, const Tensor<T>&);                                  \
    template Tensor<T> concat_channels<T>(Tape<T>*, const std::vector<Tensor<T>>&);             \
    template std::vector<Tensor<T>> split_channels<T>(Tape<T>*, const Tensor<T>&,               \
                                                      const std::vector<int64_t>&);             \
    template Tensor<T> transpose_last2<T>(Tape<T>*, const Tensor<T>&);                          \
    template Tensor<T> reshape<T>(Tape<T>*, const Tensor<T>&, Shape);

MRASNN_INSTANTIATE_TENSOR(float)
MRASNN_INSTANTIATE_TENSOR(double)

#undef MRASNN_INSTANTIATE_TENSOR

}  // namespace mrasnn
