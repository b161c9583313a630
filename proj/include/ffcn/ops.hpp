#pragma once

#include "ffcn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ffcn {

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

template <class S>
void same_tape(Var<S> a, Var<S> b) {
  require(a.tape == b.tape, "operands belong to different tapes");
}

/// Value-sorted left fold. The sum of a multiset of values is then independent
/// of the order rows arrive in, which keeps graph aggregations exactly
/// permutation-invariant in floating point.
template <class S>
S sorted_sum(S* buf, int n) {
  if (n == 0) return S(0);
  if (n == 1) return buf[0];
  std::sort(buf, buf + n);
  S acc = buf[0];
  for (int i = 1; i < n; ++i) acc += buf[i];
  return acc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

template <class S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::same_tape(a, b);
  detail::require(a.val().same_shape(b.val()),
                  "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out = a.val();
  out.vec() += b.val().vec();
  const int pa = a.id, pb = b.id;
  return a.tape->make(std::move(out), [pa, pb](Tape<S>& t, typename Tape<S>::Node& n) {
    t.grad_of(pa).vec() += n.grad.vec();
    t.grad_of(pb).vec() += n.grad.vec();
  });
}

template <class S>
Var<S> scale(Var<S> a, S c) {
  Tensor<S> out = a.val();
  out.vec() *= c;
  const int pa = a.id;
  return a.tape->make(std::move(out), [pa, c](Tape<S>& t, typename Tape<S>::Node& n) {
    t.grad_of(pa).vec() += c * n.grad.vec();
  });
}

template <class S>
Var<S> mul(Var<S> a, Var<S> b) {
  detail::same_tape(a, b);
  detail::require(a.val().same_shape(b.val()),
                  "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor<S> out = a.val();
  out.vec().array() *= b.val().vec().array();
  const int pa = a.id, pb = b.id;
  return a.tape->make(std::move(out), [pa, pb](Tape<S>& t, typename Tape<S>::Node& n) {
    t.grad_of(pa).vec().array() += n.grad.vec().array() * t.node(pb).val().vec().array();
    t.grad_of(pb).vec().array() += n.grad.vec().array() * t.node(pa).val().vec().array();
  });
}

template <class S>
Var<S> relu(Var<S> a) {
  Tensor<S> out = a.val();
  for (auto& x : out.data) x = x > S(0) ? x : S(0);
  const int pa = a.id;
  return a.tape->make(std::move(out), [pa](Tape<S>& t, typename Tape<S>::Node& n) {
    auto g = t.grad_of(pa).vec().array();
    g += n.grad.vec().array() * (t.node(pa).val().vec().array() > S(0)).template cast<S>();
  });
}

template <class S>
Var<S> sum_all(Var<S> a) {
  S acc = S(0);
  for (S x : a.val().data) acc += x;
  const int pa = a.id;
  return a.tape->make(Tensor<S>::scalar(acc), [pa](Tape<S>& t, typename Tape<S>::Node& n) {
    t.grad_of(pa).vec().array() += n.grad.data[0];
  });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  detail::same_tape(a, b);
  detail::require(a.val().rank() == 2 && b.val().rank() == 2,
                  "matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                      shape_str(b.shape()));
  detail::require(a.shape()[1] == b.shape()[0],
                  "matmul: inner extents disagree: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  Tensor<S> out(Shape{a.shape()[0], b.shape()[1]});
  out.mat().noalias() = a.val().mat() * b.val().mat();
  const int pa = a.id, pb = b.id;
  return a.tape->make(std::move(out), [pa, pb](Tape<S>& t, typename Tape<S>::Node& n) {
    const auto A = t.node(pa).val().mat();
    const auto B = t.node(pb).val().mat();
    t.grad_of(pa).mat().noalias() += n.grad.mat() * B.transpose();
    t.grad_of(pb).mat().noalias() += A.transpose() * n.grad.mat();
  });
}

/// y = x W^T + b with x [R x I], W [O x I], b [O].
template <class S>
Var<S> affine(Var<S> x, Var<S> w, Var<S> b) {
  detail::same_tape(x, w);
  detail::same_tape(x, b);
  const long in = x.cols(), out_dim = w.val().shape[0];
  detail::require(w.val().rank() == 2 && w.val().shape[1] == in,
                  "affine: input " + shape_str(x.shape()) + " incompatible with weight " +
                      shape_str(w.shape()));
  detail::require(b.val().size() == out_dim,
                  "affine: bias " + shape_str(b.shape()) + " incompatible with weight " +
                      shape_str(w.shape()));
  const long rows = x.rows();
  Tensor<S> out(Shape{rows, out_dim});
  out.mat().noalias() = x.val().mat(rows, in) * w.val().mat().transpose();
  out.mat().rowwise() += b.val().vec().transpose();
  const int px = x.id, pw = w.id, pb = b.id;
  return x.tape->make(std::move(out), [px, pw, pb, rows, in](Tape<S>& t, typename Tape<S>::Node& n) {
    const auto X = t.node(px).val().mat(rows, in);
    const auto W = t.node(pw).val().mat();
    const auto G = n.grad.mat();
    t.grad_of(px).mat(rows, in).noalias() += G * W;
    t.grad_of(pw).mat().noalias() += G.transpose() * X;
    t.grad_of(pb).vec() += G.colwise().sum().transpose();
  });
}

// ---------------------------------------------------------------------------
// structure
// ---------------------------------------------------------------------------

template <class S>
Var<S> reshape(Var<S> a, Shape s) {
  detail::require(numel(s) == a.val().size(),
                  "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(s));
  Tensor<S> out(std::move(s), a.val().data);
  const int pa = a.id;
  return a.tape->make(std::move(out), [pa](Tape<S>& t, typename Tape<S>::Node& n) {
    t.grad_of(pa).vec() += n.grad.vec();
  });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  detail::require(!parts.empty(), "concat_cols: no operands");
  const long rows = parts[0].rows();
  long cols = 0;
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    detail::require(p.rows() == rows, "concat_cols: row mismatch " + shape_str(parts[0].shape()) +
                                          " vs " + shape_str(p.shape()));
    cols += p.cols();
  }
  Tensor<S> out(Shape{rows, cols});
  long off = 0;
  std::vector<int> pids;
  std::vector<long> widths;
  for (const auto& p : parts) {
    out.mat().middleCols(off, p.cols()) = p.val().mat();
    off += p.cols();
    pids.push_back(p.id);
    widths.push_back(p.cols());
  }
  return parts[0].tape->make(std::move(out), [pids, widths](Tape<S>& t, typename Tape<S>::Node& n) {
    long off2 = 0;
    for (std::size_t i = 0; i < pids.size(); ++i) {
      t.grad_of(pids[i]).mat() += n.grad.mat().middleCols(off2, widths[i]);
      off2 += widths[i];
    }
  });
}

template <class S>
Var<S> gather_rows(Var<S> x, std::vector<int> idx) {
  const long cols = x.cols();
  const long rows = x.rows();
  for (int r : idx)
    detail::require(r >= 0 && r < rows, "gather_rows: index " + std::to_string(r) + " out of range");
  Tensor<S> out(Shape{static_cast<long>(idx.size()), cols});
  const auto X = x.val().mat(rows, cols);
  for (std::size_t r = 0; r < idx.size(); ++r) out.mat().row(static_cast<long>(r)) = X.row(idx[r]);
  const int px = x.id;
  return x.tape->make(std::move(out), [px, idx, rows, cols](Tape<S>& t, typename Tape<S>::Node& n) {
    auto GX = t.grad_of(px).mat(rows, cols);
    for (std::size_t r = 0; r < idx.size(); ++r) GX.row(idx[r]) += n.grad.mat().row(static_cast<long>(r));
  });
}

/// Sums rows of x into `num_groups` buckets given per-row group ids.
/// Each output coordinate accumulates its contributions in value-sorted order,
/// so the result depends only on the multiset of rows mapped to a group.
template <class S>
Var<S> scatter_sum_sorted(Var<S> x, const std::vector<int>& group, long num_groups) {
  const long rows = x.rows(), cols = x.cols();
  detail::require(static_cast<long>(group.size()) == rows, "scatter_sum_sorted: group list length mismatch");
  std::vector<std::vector<int>> members(static_cast<std::size_t>(num_groups));
  for (long r = 0; r < rows; ++r) {
    detail::require(group[static_cast<std::size_t>(r)] >= 0 && group[static_cast<std::size_t>(r)] < num_groups,
                    "scatter_sum_sorted: group id out of range");
    members[static_cast<std::size_t>(group[static_cast<std::size_t>(r)])].push_back(static_cast<int>(r));
  }
  Tensor<S> out(Shape{num_groups, cols});
  const auto X = x.val().mat(rows, cols);
  std::vector<S> buf;
  for (long g = 0; g < num_groups; ++g) {
    const auto& m = members[static_cast<std::size_t>(g)];
    buf.resize(m.size());
    for (long c = 0; c < cols; ++c) {
      for (std::size_t i = 0; i < m.size(); ++i) buf[i] = X(m[i], c);
      out(g, c) = detail::sorted_sum(buf.data(), static_cast<int>(m.size()));
    }
  }
  const int px = x.id;
  return x.tape->make(std::move(out),
                      [px, members, rows, cols](Tape<S>& t, typename Tape<S>::Node& n) {
                        auto GX = t.grad_of(px).mat(rows, cols);
                        for (std::size_t g = 0; g < members.size(); ++g)
                          for (int r : members[g]) GX.row(r) += n.grad.mat().row(static_cast<long>(g));
                      });
}

/// Mean over rows, accumulated per coordinate in value-sorted order.
template <class S>
Var<S> mean_rows_sorted(Var<S> x) {
  const long rows = x.rows(), cols = x.cols();
  detail::require(rows >= 1, "mean_rows_sorted: empty input");
  Tensor<S> out(Shape{1, cols});
  const auto X = x.val().mat(rows, cols);
  std::vector<S> buf(static_cast<std::size_t>(rows));
  for (long c = 0; c < cols; ++c) {
    for (long r = 0; r < rows; ++r) buf[static_cast<std::size_t>(r)] = X(r, c);
    out(0, c) = detail::sorted_sum(buf.data(), static_cast<int>(rows)) / static_cast<S>(rows);
  }
  const int px = x.id;
  return x.tape->make(std::move(out), [px, rows, cols](Tape<S>& t, typename Tape<S>::Node& n) {
    auto GX = t.grad_of(px).mat(rows, cols);
    const auto G = n.grad.mat().row(0) / static_cast<S>(rows);
    for (long r = 0; r < rows; ++r) GX.row(r) += G;
  });
}

/// Multiplies each row by a fixed 0/1 coefficient. Gradients are masked the
/// same way, so masked rows contribute nothing in either direction.
template <class S>
Var<S> mask_rows(Var<S> x, std::vector<S> mask) {
  const long rows = x.rows(), cols = x.cols();
  detail::require(static_cast<long>(mask.size()) == rows, "mask_rows: mask length mismatch");
  Tensor<S> out = x.val();
  auto M = out.mat(rows, cols);
  for (long r = 0; r < rows; ++r) M.row(r) *= mask[static_cast<std::size_t>(r)];
  const int px = x.id;
  return x.tape->make(std::move(out), [px, mask, rows, cols](Tape<S>& t, typename Tape<S>::Node& n) {
    auto GX = t.grad_of(px).mat(rows, cols);
    for (long r = 0; r < rows; ++r) GX.row(r) += mask[static_cast<std::size_t>(r)] * n.grad.mat(rows, cols).row(r);
  });
}

// ---------------------------------------------------------------------------
// dilated temporal convolution
// ---------------------------------------------------------------------------

/// Kernel-3 dilated 1D convolution over time, independently per sequence.
/// x holds `seqs` contiguous length-T sequences of `cin` channels, i.e. a
/// [seqs*T x cin] matrix. w has shape [3, cout, cin]; tap offsets are
/// {-dilation, 0, +dilation} with symmetric zero padding, so output length
/// stays T and out[t] depends only on x[t-d], x[t], x[t+d].
template <class S>
Var<S> conv1d_dilated(Var<S> x, Var<S> w, Var<S> b, long seq_len, long dilation) {
  detail::same_tape(x, w);
  detail::same_tape(x, b);
  detail::require(dilation >= 1, "conv1d_dilated: dilation must be >= 1, got " + std::to_string(dilation));
  detail::require(w.val().rank() == 3 && w.val().shape[0] == 3,
                  "conv1d_dilated: weight must be [3 x cout x cin], got " + shape_str(w.shape()));
  const long cin = w.val().shape[2], cout = w.val().shape[1];
  const long rows = x.rows();
  detail::require(x.cols() == cin, "conv1d_dilated: input " + shape_str(x.shape()) +
                                       " incompatible with weight " + shape_str(w.shape()));
  detail::require(seq_len >= 1 && rows % seq_len == 0, "conv1d_dilated: rows not a multiple of sequence length");
  detail::require(b.val().size() == cout, "conv1d_dilated: bias length mismatch");
  const long seqs = rows / seq_len;

  Tensor<S> out(Shape{rows, cout});
  {
    const S* wd = w.val().data.data();
    const auto X = x.val().mat(rows, cin);
    auto O = out.mat(rows, cout);
    for (int tap = 0; tap < 3; ++tap) {
      const long off = (tap - 1) * dilation;
      ConstMatMap<S> Wk(wd + tap * cout * cin, cout, cin);
      const long t0 = std::max<long>(0, -off);
      const long t1 = std::min<long>(seq_len, seq_len - off);
      if (t1 <= t0) continue;
      for (long e = 0; e < seqs; ++e)
        O.middleRows(e * seq_len + t0, t1 - t0).noalias() +=
            X.middleRows(e * seq_len + t0 + off, t1 - t0) * Wk.transpose();
    }
    O.rowwise() += b.val().vec().transpose();
  }

  const int px = x.id, pw = w.id, pb = b.id;
  return x.tape->make(
      std::move(out), [px, pw, pb, seqs, seq_len, dilation, cin, cout](Tape<S>& t, typename Tape<S>::Node& n) {
        const long rows2 = seqs * seq_len;
        const auto X = t.node(px).val().mat(rows2, cin);
        const S* wd = t.node(pw).val().data.data();
        const auto G = n.grad.mat(rows2, cout);
        auto GX = t.grad_of(px).mat(rows2, cin);
        S* gw = t.grad_of(pw).data.data();
        for (int tap = 0; tap < 3; ++tap) {
          const long off = (tap - 1) * dilation;
          ConstMatMap<S> Wk(wd + tap * cout * cin, cout, cin);
          MatMap<S> GWk(gw + tap * cout * cin, cout, cin);
          const long t0 = std::max<long>(0, -off);
          const long t1 = std::min<long>(seq_len, seq_len - off);
          if (t1 <= t0) continue;
          for (long e = 0; e < seqs; ++e) {
            const auto Ge = G.middleRows(e * seq_len + t0, t1 - t0);
            GX.middleRows(e * seq_len + t0 + off, t1 - t0).noalias() += Ge * Wk;
            GWk.noalias() += Ge.transpose() * X.middleRows(e * seq_len + t0 + off, t1 - t0);
          }
        }
        t.grad_of(pb).vec() += G.colwise().sum().transpose();
      });
}

// ---------------------------------------------------------------------------
// classification loss
// ---------------------------------------------------------------------------

/// -log softmax(logits)[target] with max-subtraction stabilization.
template <class S>
Var<S> softmax_cross_entropy(Var<S> logits, long target) {
  const long classes = logits.val().size();
  detail::require(classes >= 2, "softmax_cross_entropy: needs >= 2 classes");
  detail::require(target >= 0 && target < classes,
                  "softmax_cross_entropy: target " + std::to_string(target) + " out of range for " +
                      std::to_string(classes) + " classes");
  const S* z = logits.val().data.data();
  S zmax = z[0];
  for (long i = 1; i < classes; ++i) zmax = std::max(zmax, z[i]);
  S sum = S(0);
  for (long i = 0; i < classes; ++i) sum += std::exp(z[i] - zmax);
  const S logsum = zmax + std::log(sum);
  const S loss = logsum - z[target];
  const int pl = logits.id;
  return logits.tape->make(Tensor<S>::scalar(loss),
                           [pl, target, classes, logsum](Tape<S>& t, typename Tape<S>::Node& n) {
                             const S g = n.grad.data[0];
                             const S* zz = t.node(pl).val().data.data();
                             S* gl = t.grad_of(pl).data.data();
                             for (long i = 0; i < classes; ++i)
                               gl[i] += g * (std::exp(zz[i] - logsum) - (i == target ? S(1) : S(0)));
                           });
}

}  // namespace ffcn
