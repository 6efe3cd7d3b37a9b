// SPDX-License-Identifier: Apache-2.0

#include "mnnca/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mnnca/parallel.hpp"

namespace mnnca::detail {

namespace {

// dst[x] += a * src[(x + s) mod W]; s in [0, W). Two contiguous spans, so the
// loop vectorizes.
template <class T>
inline void add_shifted_row(T a, const T* src, T* dst, int W, int s) {
  const int first = W - s;
  for (int x = 0; x < first; ++x) dst[x] += a * src[x + s];
  for (int x = first; x < W; ++x) dst[x] += a * src[x + s - W];
}

template <class T>
inline void axpy_row(T a, const T* src, T* dst, std::int64_t n) {
  for (std::int64_t p = 0; p < n; ++p) dst[p] += a * src[p];
}

// Eight independent accumulator chains combined in a fixed order:
// deterministic for any thread count, and fast enough without reassociation.
template <class T>
inline T fixed_dot(const T* a, const T* b, std::int64_t n) {
  T a0 = 0, a1 = 0, a2 = 0, a3 = 0, a4 = 0, a5 = 0, a6 = 0, a7 = 0;
  std::int64_t p = 0;
  for (; p + 8 <= n; p += 8) {
    a0 += a[p + 0] * b[p + 0];
    a1 += a[p + 1] * b[p + 1];
    a2 += a[p + 2] * b[p + 2];
    a3 += a[p + 3] * b[p + 3];
    a4 += a[p + 4] * b[p + 4];
    a5 += a[p + 5] * b[p + 5];
    a6 += a[p + 6] * b[p + 6];
    a7 += a[p + 7] * b[p + 7];
  }
  T tail = 0;
  for (; p < n; ++p) tail += a[p] * b[p];
  return (((a0 + a1) + (a2 + a3)) + ((a4 + a5) + (a6 + a7))) + tail;
}

template <class T>
inline T fixed_row_sum(const T* a, std::int64_t n) {
  T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  std::int64_t p = 0;
  for (; p + 4 <= n; p += 4) {
    a0 += a[p + 0];
    a1 += a[p + 1];
    a2 += a[p + 2];
    a3 += a[p + 3];
  }
  T tail = 0;
  for (; p < n; ++p) tail += a[p];
  return ((a0 + a1) + (a2 + a3)) + tail;
}

inline int wrap(int v, int n) { return ((v % n) + n) % n; }

}  // namespace

template <class T>
void conv2d_fwd(const Tensor<T>& x, const Kernel<T>& k, Tensor<T>& out) {
  const int H = x.shape.h, W = x.shape.w;
  const int OC = k.out_channels;
  const int opg = OC / k.groups;
  parallel_for(std::int64_t(x.shape.b) * OC, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / OC), oc = int(t % OC);
      const int g = oc / opg;
      T* op = out.plane(b, oc);
      std::fill(op, op + std::int64_t(H) * W, T(0));
      for (int icg = 0; icg < k.in_per_group; ++icg) {
        const T* xp = x.plane(b, g * k.in_per_group + icg);
        for (int ky = 0; ky < k.kh; ++ky) {
          const int dy = (ky - k.kh / 2) * k.dilation;
          for (int kx = 0; kx < k.kw; ++kx) {
            const T wgt = k.wget(oc, icg, ky, kx);
            if (wgt == T(0)) continue;
            const int dx = (kx - k.kw / 2) * k.dilation;
            const int s = wrap(dx, W);
            for (int y = 0; y < H; ++y) {
              add_shifted_row(wgt, xp + std::int64_t(wrap(y + dy, H)) * W,
                              op + std::int64_t(y) * W, W, s);
            }
          }
        }
      }
    }
  });
}

template <class T>
void conv2d_bwd_x(const Tensor<T>& gout, const Kernel<T>& k, Tensor<T>& gx) {
  const int H = gx.shape.h, W = gx.shape.w;
  const int C = gx.shape.c;
  const int opg = k.out_channels / k.groups;
  parallel_for(std::int64_t(gx.shape.b) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / C), ic = int(t % C);
      const int g = ic / k.in_per_group, icg = ic % k.in_per_group;
      T* gp = gx.plane(b, ic);
      for (int o = 0; o < opg; ++o) {
        const int oc = g * opg + o;
        const T* gop = gout.plane(b, oc);
        for (int ky = 0; ky < k.kh; ++ky) {
          const int dy = (ky - k.kh / 2) * k.dilation;
          for (int kx = 0; kx < k.kw; ++kx) {
            const T wgt = k.wget(oc, icg, ky, kx);
            if (wgt == T(0)) continue;
            const int dx = (kx - k.kw / 2) * k.dilation;
            const int s = wrap(-dx, W);
            for (int y = 0; y < H; ++y) {
              add_shifted_row(wgt, gop + std::int64_t(wrap(y - dy, H)) * W,
                              gp + std::int64_t(y) * W, W, s);
            }
          }
        }
      }
    }
  });
}

template <class T>
void depthwise_stack_fwd(const Tensor<T>& x, std::span<const Stencil<T>> st,
                         Tensor<T>& out) {
  const int C = x.shape.c, H = x.shape.h, W = x.shape.w;
  const int OC = int(st.size()) * C;
  parallel_for(std::int64_t(x.shape.b) * OC, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / OC), j = int(t % OC);
      const Stencil<T>& s = st[j / C];
      const T* xp = x.plane(b, j % C);
      T* op = out.plane(b, j);
      std::fill(op, op + std::int64_t(H) * W, T(0));
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = (ky - 1) * s.dilation;
        for (int kx = 0; kx < 3; ++kx) {
          const T wgt = s.w[ky * 3 + kx];
          if (wgt == T(0)) continue;
          const int sx = wrap((kx - 1) * s.dilation, W);
          for (int y = 0; y < H; ++y) {
            add_shifted_row(wgt, xp + std::int64_t(wrap(y + dy, H)) * W,
                            op + std::int64_t(y) * W, W, sx);
          }
        }
      }
    }
  });
}

template <class T>
void depthwise_stack_bwd_x(const Tensor<T>& gout, std::span<const Stencil<T>> st,
                           Tensor<T>& gx) {
  const int C = gx.shape.c, H = gx.shape.h, W = gx.shape.w;
  parallel_for(std::int64_t(gx.shape.b) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / C), c = int(t % C);
      T* gp = gx.plane(b, c);
      for (std::size_t kidx = 0; kidx < st.size(); ++kidx) {
        const Stencil<T>& s = st[kidx];
        const T* gop = gout.plane(b, int(kidx) * C + c);
        for (int ky = 0; ky < 3; ++ky) {
          const int dy = (ky - 1) * s.dilation;
          for (int kx = 0; kx < 3; ++kx) {
            const T wgt = s.w[ky * 3 + kx];
            if (wgt == T(0)) continue;
            const int sx = wrap(-(kx - 1) * s.dilation, W);
            for (int y = 0; y < H; ++y) {
              add_shifted_row(wgt, gop + std::int64_t(wrap(y - dy, H)) * W,
                              gp + std::int64_t(y) * W, W, sx);
            }
          }
        }
      }
    }
  });
}

template <class T>
void dense_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* bias,
               bool relu, Tensor<T>& out) {
  const int cin = x.shape.c;
  const int cout = w.shape.b;
  const std::int64_t P = x.shape.pixels();
  parallel_for(std::int64_t(x.shape.b) * cout, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / cout), o = int(t % cout);
      T* op = out.plane(b, o);
      std::fill(op, op + P, bias ? bias->data[o] : T(0));
      for (int i = 0; i < cin; ++i) {
        axpy_row(w.data[std::int64_t(o) * cin + i], x.plane(b, i), op, P);
      }
      if (relu) {
        for (std::int64_t p = 0; p < P; ++p) op[p] = std::max(op[p], T(0));
      }
    }
  });
}

template <class T>
void dense_bwd(const Tensor<T>& gout, const Tensor<T>& x, const Tensor<T>& w,
               const Tensor<T>* out_for_mask, Tensor<T>* gx, Tensor<T>* gw,
               Tensor<T>* gb) {
  const int cin = x.shape.c;
  const int cout = gout.shape.c;
  const int B = x.shape.b;
  const std::int64_t P = x.shape.pixels();

  const Tensor<T>* g = &gout;
  Tensor<T> masked;
  if (out_for_mask != nullptr) {
    masked = gout;
    parallel_for(std::int64_t(masked.data.size()), [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t p = lo; p < hi; ++p) {
        if (out_for_mask->data[p] <= T(0)) masked.data[p] = T(0);
      }
    });
    g = &masked;
  }

  if (gx != nullptr) {
    parallel_for(std::int64_t(B) * cin, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t t = lo; t < hi; ++t) {
        const int b = int(t / cin), i = int(t % cin);
        T* gp = gx->plane(b, i);
        for (int o = 0; o < cout; ++o) {
          axpy_row(w.data[std::int64_t(o) * cin + i], g->plane(b, o), gp, P);
        }
      }
    });
  }
  if (gw != nullptr) {
    parallel_for(cout, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t o = lo; o < hi; ++o) {
        for (int i = 0; i < cin; ++i) {
          T acc = 0;
          for (int b = 0; b < B; ++b) {
            acc += fixed_dot(g->plane(b, int(o)), x.plane(b, i), P);
          }
          gw->data[o * cin + i] += acc;
        }
      }
    });
  }
  if (gb != nullptr) {
    parallel_for(cout, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t o = lo; o < hi; ++o) {
        T acc = 0;
        for (int b = 0; b < B; ++b) acc += fixed_row_sum(g->plane(b, int(o)), P);
        gb->data[o] += acc;
      }
    });
  }
}

template <class T>
void softmax_channels_fwd(const Tensor<T>& x, Tensor<T>& out) {
  const int C = x.shape.c, W = x.shape.w;
  const std::int64_t plane = x.shape.pixels();
  parallel_for(std::int64_t(x.shape.b) * x.shape.h, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / x.shape.h), y = int(t % x.shape.h);
      const T* xp = x.plane(b, 0) + std::int64_t(y) * W;
      T* op = out.plane(b, 0) + std::int64_t(y) * W;
      for (int xw = 0; xw < W; ++xw) {
        T m = xp[xw];
        for (int c = 1; c < C; ++c) m = std::max(m, xp[c * plane + xw]);
        T sum = 0;
        for (int c = 0; c < C; ++c) {
          const T e = std::exp(xp[c * plane + xw] - m);
          op[c * plane + xw] = e;
          sum += e;
        }
        const T inv = T(1) / sum;
        for (int c = 0; c < C; ++c) op[c * plane + xw] *= inv;
      }
    }
  });
}

template <class T>
void softmax_channels_bwd(const Tensor<T>& gout, const Tensor<T>& y,
                          Tensor<T>& gx) {
  const int C = y.shape.c, W = y.shape.w;
  const std::int64_t plane = y.shape.pixels();
  parallel_for(std::int64_t(y.shape.b) * y.shape.h, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / y.shape.h), row = int(t % y.shape.h);
      const std::int64_t off = std::int64_t(row) * W;
      const T* yp = y.plane(b, 0) + off;
      const T* gp = gout.plane(b, 0) + off;
      T* op = gx.plane(b, 0) + off;
      for (int xw = 0; xw < W; ++xw) {
        T dot = 0;
        for (int c = 0; c < C; ++c) dot += gp[c * plane + xw] * yp[c * plane + xw];
        for (int c = 0; c < C; ++c) {
          op[c * plane + xw] +=
              yp[c * plane + xw] * (gp[c * plane + xw] - dot);
        }
      }
    }
  });
}

template <class T>
void avg_pool_fwd(const Tensor<T>& x, int factor, Tensor<T>& out) {
  const int C = x.shape.c, H = x.shape.h, W = x.shape.w;
  const int OH = H / factor, OW = W / factor;
  const T inv = T(1) / T(factor * factor);
  parallel_for(std::int64_t(x.shape.b) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / C), c = int(t % C);
      const T* xp = x.plane(b, c);
      T* op = out.plane(b, c);
      for (int Y = 0; Y < OH; ++Y) {
        for (int X = 0; X < OW; ++X) {
          T acc = 0;
          for (int dy = 0; dy < factor; ++dy) {
            const T* row = xp + std::int64_t(Y * factor + dy) * W + X * factor;
            for (int dx = 0; dx < factor; ++dx) acc += row[dx];
          }
          op[std::int64_t(Y) * OW + X] = acc * inv;
        }
      }
    }
  });
}

template <class T>
void avg_pool_bwd(const Tensor<T>& gout, int factor, Tensor<T>& gx) {
  const int C = gx.shape.c, H = gx.shape.h, W = gx.shape.w;
  const int OH = H / factor, OW = W / factor;
  const T inv = T(1) / T(factor * factor);
  parallel_for(std::int64_t(gx.shape.b) * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / C), c = int(t % C);
      const T* gop = gout.plane(b, c);
      T* gp = gx.plane(b, c);
      for (int Y = 0; Y < OH; ++Y) {
        for (int X = 0; X < OW; ++X) {
          const T v = gop[std::int64_t(Y) * OW + X] * inv;
          for (int dy = 0; dy < factor; ++dy) {
            T* row = gp + std::int64_t(Y * factor + dy) * W + X * factor;
            for (int dx = 0; dx < factor; ++dx) row[dx] += v;
          }
        }
      }
    }
  });
}

template <class T>
void gram_fwd(const Tensor<T>& f, Tensor<T>& out) {
  const int F = f.shape.c;
  const std::int64_t P = f.shape.pixels();
  const T inv = T(1) / T(P);
  parallel_for(std::int64_t(f.shape.b) * F, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / F), i = int(t % F);
      T* row = out.plane(b, i);  // out shape (B, F, F, 1): plane = row of F
      const T* fi = f.plane(b, i);
      for (int j = 0; j < F; ++j) {
        row[j] = fixed_dot(fi, f.plane(b, j), P) * inv;
      }
    }
  });
}

template <class T>
void gram_bwd(const Tensor<T>& gout, const Tensor<T>& f, Tensor<T>& gf) {
  const int F = f.shape.c;
  const std::int64_t P = f.shape.pixels();
  const T inv = T(1) / T(P);
  parallel_for(std::int64_t(f.shape.b) * F, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t t = lo; t < hi; ++t) {
      const int b = int(t / F), i = int(t % F);
      T* gp = gf.plane(b, i);
      const T* grow = gout.plane(b, i);
      for (int j = 0; j < F; ++j) {
        const T coeff = (grow[j] + gout.plane(b, j)[i]) * inv;
        if (coeff != T(0)) axpy_row(coeff, f.plane(b, j), gp, P);
      }
    }
  });
}

template <class T>
double reduce_sum(const Tensor<T>& x) {
  double a0 = 0, a1 = 0, a2 = 0, a3 = 0;
  const std::int64_t n = std::int64_t(x.data.size());
  std::int64_t p = 0;
  for (; p + 4 <= n; p += 4) {
    a0 += double(x.data[p + 0]);
    a1 += double(x.data[p + 1]);
    a2 += double(x.data[p + 2]);
    a3 += double(x.data[p + 3]);
  }
  double tail = 0;
  for (; p < n; ++p) tail += double(x.data[p]);
  return ((a0 + a1) + (a2 + a3)) + tail;
}

template <class T>
void axpy(T a, const Tensor<T>& x, Tensor<T>& y) {
  axpy_row(a, x.data.data(), y.data.data(), std::int64_t(x.data.size()));
}

#define MNNCA_INSTANTIATE_OPS(T)                                              \
  template void conv2d_fwd<T>(const Tensor<T>&, const Kernel<T>&, Tensor<T>&); \
  template void conv2d_bwd_x<T>(const Tensor<T>&, const Kernel<T>&,           \
                                Tensor<T>&);                                  \
  template void depthwise_stack_fwd<T>(const Tensor<T>&,                      \
                                       std::span<const Stencil<T>>,           \
                                       Tensor<T>&);                           \
  template void depthwise_stack_bwd_x<T>(const Tensor<T>&,                    \
                                         std::span<const Stencil<T>>,         \
                                         Tensor<T>&);                         \
  template void dense_fwd<T>(const Tensor<T>&, const Tensor<T>&,              \
                             const Tensor<T>*, bool, Tensor<T>&);             \
  template void dense_bwd<T>(const Tensor<T>&, const Tensor<T>&,              \
                             const Tensor<T>&, const Tensor<T>*, Tensor<T>*,  \
                             Tensor<T>*, Tensor<T>*);                         \
  template void softmax_channels_fwd<T>(const Tensor<T>&, Tensor<T>&);        \
  template void softmax_channels_bwd<T>(const Tensor<T>&, const Tensor<T>&,   \
                                        Tensor<T>&);                          \
  template void avg_pool_fwd<T>(const Tensor<T>&, int, Tensor<T>&);           \
  template void avg_pool_bwd<T>(const Tensor<T>&, int, Tensor<T>&);           \
  template void gram_fwd<T>(const Tensor<T>&, Tensor<T>&);                    \
  template void gram_bwd<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);  \
  template double reduce_sum<T>(const Tensor<T>&);                            \
  template void axpy<T>(T, const Tensor<T>&, Tensor<T>&);

MNNCA_INSTANTIATE_OPS(float)
MNNCA_INSTANTIATE_OPS(double)

}  // namespace mnnca::detail
