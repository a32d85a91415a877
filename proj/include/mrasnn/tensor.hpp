#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mrasnn/errors.hpp"

namespace mrasnn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Process-wide toggle for the post-op sanity checks (finite outputs, binary
// spikes). On by default; the benchmark turns it off.
bool runtime_checks_enabled() noexcept;
void set_runtime_checks(bool enabled) noexcept;

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // same length as data iff requires_grad
    bool requires_grad = false;
};

/// Dense tensor handle with shared storage. Copies are shallow; the autodiff
/// tape captures handles to keep operand storage alive until backward runs.
/// Scalar type is float for training/inference and double for the
/// finite-difference test mode.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t ndim() const { return static_cast<int64_t>(node_->shape.size()); }
    int64_t dim(int64_t i) const { return node_->shape[static_cast<size_t>(i)]; }
    int64_t numel() const { return static_cast<int64_t>(node_->data.size()); }

    T* data() { return node_->data.data(); }
    const T* data() const { return node_->data.data(); }
    std::vector<T>& values() { return node_->data; }
    const std::vector<T>& values() const { return node_->data; }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool rg);
    T* grad() { return node_->requires_grad ? node_->grad.data() : nullptr; }
    const T* grad() const { return node_->requires_grad ? node_->grad.data() : nullptr; }
    void zero_grad();

    /// Value of a single-element tensor.
    T item() const;

    TensorNode<T>* node() const { return node_.get(); }
    std::shared_ptr<TensorNode<T>> shared_node() const { return node_; }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

/// Reverse-mode tape. Ops append their backward rules in execution order
/// (operands always precede consumers), and backward() replays them exactly
/// once in reverse. A tape belongs to a single thread; concurrent evaluation
/// uses one tape per worker.
template <typename T>
class Tape {
public:
    void record(std::function<void()> fn) { records_.push_back(std::move(fn)); }

    /// Seeds d(loss)/d(loss) = 1 and runs all recorded rules in reverse.
    /// Consumes the records; a tape drives exactly one backward pass.
    void backward(const Tensor<T>& loss);

    size_t size() const { return records_.size(); }

private:
    std::vector<std::function<void()>> records_;
};

// Ops record on the tape when it is non-null and an operand requires grad;
// with a null tape they run inference-only.

/// 1-D cross-correlation: input [b,c_in,s] * weight [c_out,c_in,k] (+ bias
/// [c_out]) -> [b,c_out,s_out]. Pass an undefined bias tensor to skip it.
template <typename T>
Tensor<T> conv1d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                 const Tensor<T>& bias, int64_t stride, int64_t padding);

/// Batch normalization over (batch, spatial) per channel. Training mode uses
/// batch statistics, records the full gradient through them, and updates the
/// running stats in place; eval mode normalizes with the running stats.
template <typename T>
Tensor<T> batchnorm1d(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& gamma,
                      const Tensor<T>& beta, Tensor<T>& running_mean,
                      Tensor<T>& running_var, bool training, T eps, T momentum);

template <typename T>
Tensor<T> avgpool1d(Tape<T>* tape, const Tensor<T>& input, int64_t kernel, int64_t stride);

/// Affine map: input [b,n] * weight [m,n]^T + bias [m] -> [b,m].
template <typename T>
Tensor<T> fully_connected(Tape<T>* tape, const Tensor<T>& input, const Tensor<T>& weight,
                          const Tensor<T>& bias);

/// Spike generation: forward emits 1 where input >= theta (threshold crossing
/// at equality fires), 0 elsewhere. Backward substitutes the rectangular
/// surrogate: d(out)/d(in) = (1/a) * [ |input - theta| < a/2 ], zero at the
/// rectangle edges themselves.
template <typename T>
Tensor<T> heaviside_surrogate(Tape<T>* tape, const Tensor<T>& input, T theta, T a);

// Elementwise with broadcast over size-1 axes (equal ranks required).
template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scalar_mul(Tape<T>* tape, const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& a);

/// Mean over the spatial axis: [b,c,s] -> [b,c,1].
template <typename T>
Tensor<T> mean_spatial(Tape<T>* tape, const Tensor<T>& a);
/// Mean over the channel axis: [b,c,s] -> [b,1,s].
template <typename T>
Tensor<T> mean_channels(Tape<T>* tape, const Tensor<T>& a);

template <typename T>
Tensor<T> mean_all(Tape<T>* tape, const Tensor<T>& a);
template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& a);

template <typename T>
Tensor<T> concat_channels(Tape<T>* tape, const std::vector<Tensor<T>>& parts);
template <typename T>
std::vector<Tensor<T>> split_channels(Tape<T>* tape, const Tensor<T>& a,
                                      const std::vector<int64_t>& sizes);

/// Swap the last two axes: [..,m,n] -> [..,n,m].
template <typename T>
Tensor<T> transpose_last2(Tape<T>* tape, const Tensor<T>& a);

/// Same element count, new shape (copying).
template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& a, Shape shape);

/// Throws NumericError if any element is NaN/Inf (no-op when runtime checks
/// are off).
template <typename T>
void check_finite(const Tensor<T>& t, const char* op);

}  // namespace mrasnn
