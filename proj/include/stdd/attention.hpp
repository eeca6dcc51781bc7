#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stdd/ops.hpp"

namespace stdd {

// Projection weights of one multi-head self-attention layer, bound on a tape.
// Projections act on row vectors: q = x * wq + bq, with wq of shape [D, D].
struct AttentionWeights {
  Var wq, bq;
  Var wk, bk;
  Var wv, bv;
  Var wo, bo;
  std::size_t heads = 1;
};

inline Var linear(const Var& x, const Var& w, const Var& b) { return add_bias(matmul(x, w), b); }

// Multi-head scaled dot-product self-attention over the rows of x [n, D].
// Adds n*n query-key pairs to the tape's interaction counter: every query
// meets every key once per call, whichever head computes it.
inline Var mhsa(const Var& x, const AttentionWeights& w) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2) throw DimensionError("mhsa: expected [n, D] input, got " + shape_str(xv.shape()));
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  if (w.heads == 0 || d % w.heads != 0)
    throw ConfigError("channel width " + std::to_string(d) + " is not divisible by " + std::to_string(w.heads) +
                          " heads",
                      "heads");
  const std::size_t dh = d / w.heads;
  const real inv_sqrt = real(1) / std::sqrt(static_cast<real>(dh));

  Var q = linear(x, w.wq, w.bq);
  Var k = linear(x, w.wk, w.bk);
  Var v = linear(x, w.wv, w.bv);

  std::vector<Var> head_out;
  head_out.reserve(w.heads);
  for (std::size_t h = 0; h < w.heads; ++h) {
    Var qh = w.heads == 1 ? q : slice_cols(q, h * dh, (h + 1) * dh);
    Var kh = w.heads == 1 ? k : slice_cols(k, h * dh, (h + 1) * dh);
    Var vh = w.heads == 1 ? v : slice_cols(v, h * dh, (h + 1) * dh);
    Var attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
    head_out.push_back(matmul(attn, vh));
  }
  x.tape().count_pairs(static_cast<std::uint64_t>(n) * n);
  Var merged = w.heads == 1 ? head_out.front() : concat_cols(head_out);
  return linear(merged, w.wo, w.bo);
}

}  // namespace stdd
