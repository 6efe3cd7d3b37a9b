// SPDX-License-Identifier: Apache-2.0
//
// Shared forward/backward compute kernels. The autodiff graph records these;
// the no-gradient evaluation path calls them directly, so both paths produce
// bit-identical values.

#pragma once

#include <span>

#include "mnnca/kernel.hpp"
#include "mnnca/tensor.hpp"

namespace mnnca::detail {

// Circular (toroidal) padding everywhere; output spatial size == input.
template <class T>
void conv2d_fwd(const Tensor<T>& x, const Kernel<T>& k, Tensor<T>& out);

// Accumulates input gradient (+=).
template <class T>
void conv2d_bwd_x(const Tensor<T>& gout, const Kernel<T>& k, Tensor<T>& gx);

// Applies every stencil depthwise to every channel; output channel layout is
// filter-major: [stencil0 x C, stencil1 x C, ...].
template <class T>
void depthwise_stack_fwd(const Tensor<T>& x, std::span<const Stencil<T>> st,
                         Tensor<T>& out);
template <class T>
void depthwise_stack_bwd_x(const Tensor<T>& gout, std::span<const Stencil<T>> st,
                           Tensor<T>& gx);

// Per-pixel dense layer: out[b,o,p] = sum_i w[o,i] * x[b,i,p] + bias[o],
// optionally fused with relu. w is (cout, cin, 1, 1), bias (cout, 1, 1, 1).
template <class T>
void dense_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
               bool relu, Tensor<T>& out);

// All gradient outputs accumulate (+=); pass nullptr to skip one. `out` must
// be the forward output when relu was fused (it carries the active mask).
template <class T>
void dense_bwd(const Tensor<T>& gout, const Tensor<T>& x, const Tensor<T>& w,
               const Tensor<T>* out_for_mask, Tensor<T>* gx, Tensor<T>* gw,
               Tensor<T>* gb);

template <class T>
void softmax_channels_fwd(const Tensor<T>& x, Tensor<T>& out);
template <class T>
void softmax_channels_bwd(const Tensor<T>& gout, const Tensor<T>& y,
                          Tensor<T>& gx);

template <class T>
void avg_pool_fwd(const Tensor<T>& x, int factor, Tensor<T>& out);
template <class T>
void avg_pool_bwd(const Tensor<T>& gout, int factor, Tensor<T>& gx);

// G[b,i,j] = dot(f[b,i,:], f[b,j,:]) / (h*w), shape (B, F, F, 1).
template <class T>
void gram_fwd(const Tensor<T>& f, Tensor<T>& out);
template <class T>
void gram_bwd(const Tensor<T>& gout, const Tensor<T>& f, Tensor<T>& gf);

// Deterministic full reduction (double accumulator).
template <class T>
double reduce_sum(const Tensor<T>& x);

// y += a * x over whole arrays (equal length).
template <class T>
void axpy(T a, const Tensor<T>& x, Tensor<T>& y);

}  // namespace mnnca::detail
