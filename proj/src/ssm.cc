// Copyright 2026 The MpoxMamba Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mpox/ssm.h"

#include <cmath>
#include <vector>

#include "mpox/ops.h"

namespace mpox::ssm {

namespace {

// phi(z) = (e^z - 1) / z, so that B_bar = delta * phi(delta * a) * b.
template <typename T>
T phi(T z) {
  if (std::abs(z) < static_cast<T>(kZohTaylorThreshold)) {
    return T(1) + z / T(2);
  }
  return std::expm1(z) / z;
}

// d phi / dz; the closed form cancels badly near zero.
template <typename T>
T phi_prime(T z) {
  if (std::abs(z) < T(1e-2)) {
    return T(0.5) +
           z * (T(1) / T(3) +
                z * (T(1) / T(8) + z * (T(1) / T(30) + z * (T(1) / T(144)))));
  }
  return (z * std::exp(z) - std::expm1(z)) / (z * z);
}

void check_shape(const Shape& got, const Shape& want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string("selective_scan: ") + what + " has shape " +
                         shape_str(got) + ", expected " + shape_str(want));
  }
}

[[noreturn]] void non_finite(std::size_t step) {
  throw NumericError("selective_scan: non-finite state at step " +
                     std::to_string(step));
}

}  // namespace

template <typename T>
ZohScalar<T> discretize_zoh(T a, T b, T delta) {
  if (!(delta > T(0))) {
    throw DomainError("discretize_zoh: delta must be > 0, got " +
                      std::to_string(delta));
  }
  if (!(a < T(0))) {
    throw DomainError("discretize_zoh: A must be < 0, got " +
                      std::to_string(a));
  }
  const T z = delta * a;
  return {std::exp(z), delta * phi(z) * b};
}

template <typename T>
DiscreteParams<T> discretize_zoh(const Tensor<T>& A, const Tensor<T>& B,
                                 const Tensor<T>& delta) {
  if (A.rank() != 2 || B.rank() != 2 || delta.rank() != 2) {
    throw DimensionError("discretize_zoh expects A [D,N], B [L,N], delta [L,D]");
  }
  const std::size_t d_inner = A.dim(0), n = A.dim(1), len = B.dim(0);
  check_shape(B.shape(), {len, n}, "B");
  check_shape(delta.shape(), {len, d_inner}, "delta");
  DiscreteParams<T> out{Tensor<T>({len, d_inner, n}),
                        Tensor<T>({len, d_inner, n})};
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t d = 0; d < d_inner; ++d) {
      for (std::size_t s = 0; s < n; ++s) {
        const auto z = discretize_zoh(A.at(d, s), B.at(t, s), delta.at(t, d));
        out.A_bar.at(t, d, s) = z.a_bar;
        out.B_bar.at(t, d, s) = z.b_bar;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const DiscreteParams<T>& disc,
                         const Tensor<T>& C, const Tensor<T>& D_skip) {
  if (x.rank() != 2 || disc.A_bar.rank() != 3) {
    throw DimensionError("selective_scan expects x [L,D], A_bar [L,D,N]");
  }
  const std::size_t len = x.dim(0), d_inner = x.dim(1);
  const std::size_t n = disc.A_bar.dim(2);
  check_shape(disc.A_bar.shape(), {len, d_inner, n}, "A_bar");
  check_shape(disc.B_bar.shape(), {len, d_inner, n}, "B_bar");
  check_shape(C.shape(), {len, n}, "C");
  check_shape(D_skip.shape(), {d_inner}, "D_skip");

  Tensor<T> y({len, d_inner});
  std::vector<T> h(d_inner * n, T(0));
  const T* ab = disc.A_bar.raw();
  const T* bb = disc.B_bar.raw();
  for (std::size_t t = 0; t < len; ++t) {
    const T* ct = C.raw() + t * n;
    for (std::size_t d = 0; d < d_inner; ++d) {
      const T xv = x[t * d_inner + d];
      const std::size_t off = (t * d_inner + d) * n;
      T acc = D_skip[d] * xv;
      for (std::size_t s = 0; s < n; ++s) {
        T& hs = h[d * n + s];
        hs = ab[off + s] * hs + bb[off + s] * xv;
        acc += ct[s] * hs;
      }
      if (!std::isfinite(acc)) non_finite(t);
      y[t * d_inner + d] = acc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const SsmParams<T>& p) {
  if (x.rank() != 2 || p.A.rank() != 2) {
    throw DimensionError("selective_scan expects x [L,D], A [D,N]");
  }
  const std::size_t len = x.dim(0), d_inner = x.dim(1), n = p.A.dim(1);
  check_shape(p.A.shape(), {d_inner, n}, "A");
  check_shape(p.B.shape(), {len, n}, "B");
  check_shape(p.C.shape(), {len, n}, "C");
  check_shape(p.delta.shape(), {len, d_inner}, "delta");
  check_shape(p.D_skip.shape(), {d_inner}, "D_skip");
  for (T a : p.A.data()) {
    if (!(a < T(0))) throw DomainError("selective_scan: A must be < 0");
  }

  Tensor<T> y({len, d_inner});
  std::vector<T> h(d_inner * n, T(0));
  for (std::size_t t = 0; t < len; ++t) {
    const T* bt = p.B.raw() + t * n;
    const T* ct = p.C.raw() + t * n;
    for (std::size_t d = 0; d < d_inner; ++d) {
      const T xv = x[t * d_inner + d];
      const T dt = p.delta[t * d_inner + d];
      if (!(dt > T(0))) {
        throw DomainError("selective_scan: delta must be > 0 at step " +
                          std::to_string(t));
      }
      const T* ad = p.A.raw() + d * n;
      T acc = p.D_skip[d] * xv;
      for (std::size_t s = 0; s < n; ++s) {
        const T z = dt * ad[s];
        T& hs = h[d * n + s];
        hs = std::exp(z) * hs + dt * phi(z) * bt[s] * xv;
        acc += ct[s] * hs;
      }
      if (!std::isfinite(acc)) non_finite(t);
      y[t * d_inner + d] = acc;
    }
  }
  return y;
}

template <typename T>
Tensor<T> lti_scan_kernel(const Tensor<T>& A_bar, const Tensor<T>& B_bar,
                          const Tensor<T>& C, std::size_t L) {
  if (L < 1) throw DomainError("lti_scan_kernel: L must be >= 1");
  if (A_bar.rank() != 1 || B_bar.shape() != A_bar.shape() ||
      C.shape() != A_bar.shape()) {
    throw DimensionError("lti_scan_kernel expects A_bar, B_bar, C of shape [N]");
  }
  const std::size_t n = A_bar.numel();
  Tensor<T> k({L});
  std::vector<T> power(n, T(1));
  for (std::size_t i = 0; i < L; ++i) {
    T acc = T(0);
    for (std::size_t s = 0; s < n; ++s) {
      acc += C[s] * power[s] * B_bar[s];
      power[s] *= A_bar[s];
    }
    k[i] = acc;
  }
  return k;
}

template <typename T>
Tensor<T> kernel_conv_apply(const Tensor<T>& x, const Tensor<T>& K) {
  if (x.rank() != 1 || K.shape() != x.shape()) {
    throw DimensionError("kernel_conv_apply: x " + shape_str(x.shape()) +
                         " and kernel " + shape_str(K.shape()) +
                         " must be equal-length vectors");
  }
  const std::size_t len = x.numel();
  Tensor<T> y({len});
  for (std::size_t t = 0; t < len; ++t) {
    T acc = T(0);
    for (std::size_t k = 0; k <= t; ++k) acc += K[k] * x[t - k];
    y[t] = acc;
  }
  return y;
}

template <typename T>
Var<T> selective_scan(const Var<T>& x, const Var<T>& delta, const Var<T>& A,
                      const Var<T>& B, const Var<T>& C, const Var<T>& D_skip) {
  if (x.shape().size() != 3 || A.shape().size() != 2) {
    throw DimensionError("selective_scan expects x [Bt,L,D], A [D,N]");
  }
  const std::size_t batch = x.dim(0), len = x.dim(1), d_inner = x.dim(2);
  const std::size_t n = A.dim(1);
  check_shape(A.shape(), {d_inner, n}, "A");
  check_shape(delta.shape(), x.shape(), "delta");
  check_shape(B.shape(), {batch, len, n}, "B");
  check_shape(C.shape(), {batch, len, n}, "C");
  check_shape(D_skip.shape(), {d_inner}, "D_skip");

  const bool keep = grad_enabled() &&
                    (x.requires_grad() || delta.requires_grad() ||
                     A.requires_grad() || B.requires_grad() ||
                     C.requires_grad() || D_skip.requires_grad());
  const std::size_t lane = d_inner * n;
  Tensor<T> states;
  if (keep) states = Tensor<T>({batch, len, d_inner, n});
  Tensor<T> y(x.shape());
  std::vector<T> h(lane);

  const T* xv = x.value().raw();
  const T* dv = delta.value().raw();
  const T* av = A.value().raw();
  const T* bv = B.value().raw();
  const T* cv = C.value().raw();
  const T* sv = D_skip.value().raw();
  for (std::size_t b = 0; b < batch; ++b) {
    std::fill(h.begin(), h.end(), T(0));
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = b * len + t;
      const T* bt = bv + row * n;
      const T* ct = cv + row * n;
      for (std::size_t d = 0; d < d_inner; ++d) {
        const T xi = xv[row * d_inner + d];
        const T dt = dv[row * d_inner + d];
        const T* ad = av + d * n;
        T* hd = h.data() + d * n;
        T acc = sv[d] * xi;
        for (std::size_t s = 0; s < n; ++s) {
          const T z = dt * ad[s];
          hd[s] = std::exp(z) * hd[s] + dt * phi(z) * bt[s] * xi;
          acc += ct[s] * hd[s];
        }
        if (!std::isfinite(acc)) non_finite(t);
        y[row * d_inner + d] = acc;
      }
      if (keep) std::copy(h.begin(), h.end(), states.raw() + row * lane);
    }
  }
  if (!keep) return Var<T>(std::move(y));

  return record<T>(
      std::move(y), {x, delta, A, B, C, D_skip},
      [batch, len, d_inner, n, states = std::move(states)](Node<T>& node) {
        const std::size_t lane = d_inner * n;
        const T* xv = node.inputs[0]->value.raw();
        const T* dv = node.inputs[1]->value.raw();
        const T* av = node.inputs[2]->value.raw();
        const T* bv = node.inputs[3]->value.raw();
        const T* cv = node.inputs[4]->value.raw();
        const T* sv = node.inputs[5]->value.raw();
        const T* gy = node.grad.raw();
        // Gradients are gathered locally and added once; several inputs may
        // not want them but the sweep is shared.
        std::vector<T> gx(batch * len * d_inner, T(0));
        std::vector<T> gd(batch * len * d_inner, T(0));
        std::vector<T> ga(lane, T(0));
        std::vector<T> gb(batch * len * n, T(0));
        std::vector<T> gc(batch * len * n, T(0));
        std::vector<T> gs(d_inner, T(0));
        std::vector<T> gh(lane);
        for (std::size_t b = 0; b < batch; ++b) {
          std::fill(gh.begin(), gh.end(), T(0));
          for (std::size_t t = len; t-- > 0;) {
            const std::size_t row = b * len + t;
            const T* hs = states.raw() + row * lane;
            const T* hp = t > 0 ? hs - lane : nullptr;
            const T* bt = bv + row * n;
            const T* ct = cv + row * n;
            for (std::size_t d = 0; d < d_inner; ++d) {
              const std::size_t xi_idx = row * d_inner + d;
              const T xi = xv[xi_idx];
              const T dt = dv[xi_idx];
              const T g = gy[xi_idx];
              const T* ad = av + d * n;
              gx[xi_idx] += sv[d] * g;
              gs[d] += g * xi;
              T gdt = T(0), gxi = T(0);
              for (std::size_t s = 0; s < n; ++s) {
                const std::size_t k = d * n + s;
                gc[row * n + s] += g * hs[k];
                T& ghk = gh[k];
                ghk += ct[s] * g;
                const T z = dt * ad[s];
                const T a = std::exp(z);
                const T p = phi(z);
                const T h_prev = hp ? hp[k] : T(0);
                const T g_a = ghk * h_prev;
                const T g_bb = ghk * xi;
                gxi += ghk * dt * p * bt[s];
                gdt += g_a * ad[s] * a + g_bb * bt[s] * a;
                ga[k] += g_a * dt * a + g_bb * bt[s] * dt * dt * phi_prime(z);
                gb[row * n + s] += g_bb * dt * p;
                ghk *= a;
              }
              gx[xi_idx] += gxi;
              gd[xi_idx] += gdt;
            }
          }
        }
        const std::vector<T>* local[] = {&gx, &gd, &ga, &gb, &gc, &gs};
        for (std::size_t i = 0; i < 6; ++i) {
          if (Tensor<T>* g = input_grad(node, i)) {
            for (std::size_t j = 0; j < g->numel(); ++j) {
              (*g)[j] += (*local[i])[j];
            }
          }
        }
      });
}

template <typename T>
S6<T>::S6(const S6Config& cfg, Rng& rng) : cfg_(cfg) {
  const std::size_t d = cfg.channels, n = cfg.state_size, r = cfg.dt_rank;
  if (d == 0 || n == 0 || r == 0) {
    throw ConfigError("S6 needs channels, state size and dt rank >= 1");
  }
  if (!(cfg.dt_min > 0.0) || !(cfg.dt_max >= cfg.dt_min)) {
    throw ConfigError("S6 needs 0 < dt_min <= dt_max");
  }
  Tensor<T> a_log({d, n});
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t s = 0; s < n; ++s) {
      a_log.at(c, s) = static_cast<T>(std::log(static_cast<double>(s + 1)));
    }
  }
  A_log = Var<T>(std::move(a_log), true);
  x_proj = uniform_param<T>({r + 2 * n, d}, 1.0 / std::sqrt(double(d)), rng);
  dt_proj = uniform_param<T>({d, r}, 1.0 / std::sqrt(double(r)), rng);
  Tensor<T> bias({d});
  const double lo = std::log(cfg.dt_min), hi = std::log(cfg.dt_max);
  for (std::size_t c = 0; c < d; ++c) {
    const double dt = std::exp(rng.uniform(lo, hi));
    bias[c] = static_cast<T>(dt + std::log(-std::expm1(-dt)));
  }
  dt_bias = Var<T>(std::move(bias), true);
  D_skip = constant_param<T>({d}, 1.0);
}

template <typename T>
Var<T> S6<T>::forward(const Var<T>& x) const {
  if (x.shape().size() == 2) {
    const Var<T> y = forward(ops::reshape(x, {1, x.dim(0), x.dim(1)}));
    return ops::reshape(y, x.shape());
  }
  if (x.shape().size() != 3 || x.dim(2) != cfg_.channels) {
    throw DimensionError("S6 expects [Bt, L, " + std::to_string(cfg_.channels) +
                         "], got " + shape_str(x.shape()));
  }
  const std::size_t n = cfg_.state_size, r = cfg_.dt_rank;
  const Var<T> proj = ops::linear(x, x_proj, Var<T>());
  const Var<T> dt_in = ops::slice(proj, 2, 0, r);
  const Var<T> b = ops::slice(proj, 2, r, n);
  const Var<T> c = ops::slice(proj, 2, r + n, n);
  const Var<T> delta = ops::softplus(ops::linear(dt_in, dt_proj, dt_bias));
  const Var<T> a = ops::neg(ops::exp(A_log));
  return selective_scan(x, delta, a, b, c, D_skip);
}

template <typename T>
void S6<T>::collect(const std::string& prefix, ParamList<T>& out) {
  out.add(join_name(prefix, "A_log"), A_log);
  out.add(join_name(prefix, "x_proj.weight"), x_proj);
  out.add(join_name(prefix, "dt_proj.weight"), dt_proj);
  out.add(join_name(prefix, "dt_proj.bias"), dt_bias);
  out.add(join_name(prefix, "D"), D_skip);
}

#define MPOX_INSTANTIATE(T)                                                  \
  template ZohScalar<T> discretize_zoh(T, T, T);                             \
  template DiscreteParams<T> discretize_zoh(const Tensor<T>&,                \
                                            const Tensor<T>&,                \
                                            const Tensor<T>&);               \
  template Tensor<T> selective_scan(const Tensor<T>&,                        \
                                    const DiscreteParams<T>&,                \
                                    const Tensor<T>&, const Tensor<T>&);     \
  template Tensor<T> selective_scan(const Tensor<T>&, const SsmParams<T>&);  \
  template Tensor<T> lti_scan_kernel(const Tensor<T>&, const Tensor<T>&,     \
                                     const Tensor<T>&, std::size_t);         \
  template Tensor<T> kernel_conv_apply(const Tensor<T>&, const Tensor<T>&);  \
  template Var<T> selective_scan(const Var<T>&, const Var<T>&,               \
                                 const Var<T>&, const Var<T>&,               \
                                 const Var<T>&, const Var<T>&);              \
  template class S6<T>;

MPOX_INSTANTIATE(float)
MPOX_INSTANTIATE(double)

#undef MPOX_INSTANTIATE

}  // namespace mpox::ssm
