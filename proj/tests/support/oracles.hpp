#pragma once

// Independent reference computations used to freeze expected test values.
// Everything here is deliberately naive (triple loops, long double, sliding
// windows) and must stay decoupled from the library's own compute paths.

#include "ffcn/param_store.hpp"
#include "ffcn/tensor.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace ffcn::oracle {

/// Entry-wise triple-loop product.
template <class S>
Tensor<S> matmul_bruteforce(const Tensor<S>& a, const Tensor<S>& b) {
  const long m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor<S> out(Shape{m, n});
  for (long i = 0; i < m; ++i)
    for (long j = 0; j < n; ++j) {
      S acc = S(0);
      for (long p = 0; p < k; ++p) acc += a(i, p) * b(p, j);
      out(i, j) = acc;
    }
  return out;
}

/// Direct affine + max(0, .) recomputation of an MLP on one row.
template <class S>
std::vector<S> mlp_row_recompute(const std::vector<std::pair<Tensor<S>, Tensor<S>>>& layers,
                                 std::vector<S> x) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor<S>& w = layers[l].first;
    const Tensor<S>& b = layers[l].second;
    std::vector<S> y(static_cast<std::size_t>(w.shape[0]));
    for (long o = 0; o < w.shape[0]; ++o) {
      S acc = b[o];
      for (long i = 0; i < w.shape[1]; ++i) acc += w(o, i) * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = acc;
    }
    if (l + 1 < layers.size())
      for (auto& v : y) v = v > S(0) ? v : S(0);
    x = std::move(y);
  }
  return x;
}

/// Padded sliding-window dilated convolution on one multichannel sequence.
/// x is [T x cin], w is [3 x cout x cin], taps at {-d, 0, +d}, zero padding.
template <class S>
Tensor<S> conv1d_sliding_window(const Tensor<S>& x, const Tensor<S>& w, const Tensor<S>& b, long d) {
  const long T = x.shape[0], cin = x.shape[1], cout = w.shape[1];
  Tensor<S> out(Shape{T, cout});
  for (long t = 0; t < T; ++t)
    for (long o = 0; o < cout; ++o) {
      S acc = b[o];
      for (int tap = 0; tap < 3; ++tap) {
        const long src = t + (tap - 1) * d;
        if (src < 0 || src >= T) continue;
        for (long i = 0; i < cin; ++i) acc += w.data[static_cast<std::size_t>((tap * cout + o) * cin + i)] * x(src, i);
      }
      out(t, o) = acc;
    }
  return out;
}

/// Extended-precision direct cross entropy (no stabilization games).
inline long double cross_entropy_highprec(const std::vector<long double>& logits, long target) {
  long double sum = 0;
  for (long double z : logits) sum += std::exp(z);
  return std::log(sum) - logits[static_cast<std::size_t>(target)];
}

/// Central finite differences of `loss(store)` against every parameter scalar.
/// Returns max relative error vs the provided analytic gradients.
template <class S>
double max_grad_rel_error(ParameterStore<S>& store, const GradSink<S>& analytic,
                          const std::function<double()>& loss, double eps = 1e-5) {
  double worst = 0;
  for (std::size_t slot = 0; slot < store.size(); ++slot) {
    auto& value = store.entry(static_cast<int>(slot)).value;
    for (std::size_t i = 0; i < value.data.size(); ++i) {
      const S old = value.data[i];
      value.data[i] = old + static_cast<S>(eps);
      const double up = loss();
      value.data[i] = old - static_cast<S>(eps);
      const double down = loss();
      value.data[i] = old;
      const double fd = (up - down) / (2 * eps);
      const double an = analytic.allocated(static_cast<int>(slot))
                            ? static_cast<double>(analytic.at(static_cast<int>(slot)).data[i])
                            : 0.0;
      const double err = std::abs(an - fd) / std::max(1.0, std::abs(an));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace ffcn::oracle
