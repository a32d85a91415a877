#pragma once

#include "mrasnn/tensor.hpp"

namespace mrasnn {

/// Leaky integrate-and-fire parameters. The leak factor is (1 - 1/tau), so
/// tau must exceed 1; `a` is the width of the rectangular surrogate used on
/// the backward pass.
struct NeuronConfig {
    double tau = 2.0;
    double theta = 1.0;
    double a = 1.0;

    void validate() const;
};

/// Post-reset membrane potential carried between timesteps. Zero at t = 0;
/// one state belongs to one forward pass (and one thread).
template <typename T>
struct MembraneState {
    Tensor<T> u;
};

template <typename T>
MembraneState<T> make_membrane_state(Shape activation_shape);

/// One LIF timestep on a whole activation tensor:
///   H  = (1 - 1/tau) * U_prev + I      (charge with leak)
///   S  = step(H - theta)               (fire, threshold crossing at equality fires)
///   U' = H - S * theta                 (soft reset)
/// Returns the binary spike tensor and advances the state. Gradients flow
/// through both the leak path and the surrogate path.
template <typename T>
Tensor<T> lif_step(Tape<T>* tape, MembraneState<T>& state, const Tensor<T>& current,
                   const NeuronConfig& cfg);

/// Channel-attention kernel size for a given channel count: the odd integer
/// obtained from log2(c)/2 + 1/2 by truncating and bumping even values up.
int64_t attention_kernel_size(int64_t channels);

/// Single-channel 1-D conv kernels of the in-neuron attention. Parameter cost
/// of one attention neuron is exactly k_c + k_s.
template <typename T>
struct AttentionParams {
    Tensor<T> channel_kernel;  // [1,1,k_c]
    Tensor<T> spatial_kernel;  // [1,1,k_s]
};

/// Zero-initialized kernels (initial attention weight is uniformly 0.5).
template <typename T>
AttentionParams<T> make_attention_params(int64_t channels, int64_t spatial_kernel = 7,
                                         bool trainable = true);

/// Dendritic-style gating of the input current: spatial and channel global
/// averages -> two single-channel 1-D convs -> sigmoid of their broadcast
/// product -> elementwise weight on the current. Weights are strictly inside
/// (0,1), so the filtered current never grows in magnitude.
template <typename T>
Tensor<T> attention_filter(Tape<T>* tape, const Tensor<T>& current,
                           const AttentionParams<T>& params);

/// Attention spiking neuron: lif_step applied to the filtered current.
template <typename T>
Tensor<T> asn_step(Tape<T>* tape, MembraneState<T>& state, const Tensor<T>& current,
                   const NeuronConfig& cfg, const AttentionParams<T>& params);

}  // namespace mrasnn
