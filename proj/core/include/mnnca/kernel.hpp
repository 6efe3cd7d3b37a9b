// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mnnca/tensor.hpp"

namespace mnnca {

// Convolution filter bank. Weights are row-major
// [out_channel][in_channel_within_group][ky][kx]. Stencils are centered, so
// kh and kw must be odd; dilation spreads the taps without growing the
// weight count.
template <class T>
struct Kernel {
  int out_channels = 0;
  int in_per_group = 0;
  int kh = 0;
  int kw = 0;
  int groups = 1;
  int dilation = 1;
  std::vector<T> weights;

  std::int64_t weight_count() const {
    return std::int64_t(out_channels) * in_per_group * kh * kw;
  }

  const T& wget(int oc, int icg, int ky, int kx) const {
    return weights[((std::int64_t(oc) * in_per_group + icg) * kh + ky) * kw + kx];
  }
  T& wget(int oc, int icg, int ky, int kx) {
    return weights[((std::int64_t(oc) * in_per_group + icg) * kh + ky) * kw + kx];
  }

  void validate(int in_channels) const {
    if (kh <= 0 || kw <= 0 || kh % 2 == 0 || kw % 2 == 0) {
      throw std::invalid_argument("Kernel: kh/kw must be odd and positive, got " +
                                  std::to_string(kh) + "x" + std::to_string(kw));
    }
    if (dilation < 1) {
      throw std::invalid_argument("Kernel: dilation must be >= 1");
    }
    if (groups < 1 || out_channels % groups != 0) {
      throw std::invalid_argument("Kernel: out_channels " +
                                  std::to_string(out_channels) +
                                  " not divisible by groups " +
                                  std::to_string(groups));
    }
    if (in_channels != groups * in_per_group) {
      throw std::invalid_argument(
          "Kernel: input channel count " + std::to_string(in_channels) +
          " does not match groups*in_per_group " +
          std::to_string(groups * in_per_group));
    }
    if (std::int64_t(weights.size()) != weight_count()) {
      throw std::invalid_argument("Kernel: weight array length " +
                                  std::to_string(weights.size()) +
                                  " does not match declared shape");
    }
  }
};

// A single centered 3x3 stencil, optionally dilated; the unit the fixed
// perception filters are built from.
template <class T>
struct Stencil {
  std::array<T, 9> w{};
  int dilation = 1;
};

using KernelF = Kernel<float>;
using KernelD = Kernel<double>;

}  // namespace mnnca
