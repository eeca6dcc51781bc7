#pragma once

// Differentiable primitives over Tape-recorded values. Every function
// computes its forward value eagerly and registers a pullback that maps the
// output gradient onto its inputs.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "stdd/tape.hpp"

namespace stdd {

namespace detail {

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2)
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// c[m,n] += a[m,k] * b[k,n]
inline void gemm_nn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    real* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const real aip = a[i * k + p];
      const real* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c[m,n] += a[m,k] * b[n,k]^T
inline void gemm_nt(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const real* bj = b + j * k;
      real s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * n + j] += s;
    }
  }
}

// c[k,n] += a[m,k]^T * b[m,n]
inline void gemm_tn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const real aip = a[i * k + p];
      real* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

inline Var add(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same_shape(x, y, "add");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same_shape(x, y, "sub");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= y[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    Tensor neg = g;
    for (auto& v : neg.data()) v = -v;
    t.accumulate(b, neg);
  });
}

inline Var mul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_same_shape(x, y, "mul");
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    Tensor ga = g, gb = g;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] *= y[i];
      gb[i] *= x[i];
    }
    t.accumulate(a, ga);
    t.accumulate(b, gb);
  });
}

inline Var scale(const Var& a, real s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape& t, const Tensor& g) {
    Tensor ga = g;
    for (auto& v : ga.data()) v *= s;
    t.accumulate(a, ga);
  });
}

// x[..., D] + bias[D], broadcast over every trailing-axis slice.
inline Var add_bias(const Var& x, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || bv.size() != xv.cols())
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " vs input " + shape_str(xv.shape()));
  Tensor out = xv;
  const std::size_t d = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] += bv[j];
  return x.tape().record(std::move(out), {x, bias}, [x, bias, d](Tape& t, const Tensor& g) {
    t.accumulate(x, g);
    Tensor gb({d});
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
    t.accumulate(bias, gb);
  });
}

// Exact (erf-based) GELU.
inline Var gelu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = real(0.5) * v * (1 + std::erf(v / std::sqrt(real(2))));
  return a.tape().record(std::move(out), {a}, [a](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    Tensor ga = g;
    const real inv_sqrt_2pi = real(1) / std::sqrt(real(2) * std::numbers::pi_v<real>);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const real v = x[i];
      const real cdf = real(0.5) * (1 + std::erf(v / std::sqrt(real(2))));
      const real pdf = inv_sqrt_2pi * std::exp(real(-0.5) * v * v);
      ga[i] *= cdf + v * pdf;
    }
    t.accumulate(a, ga);
  });
}

// ------------------------------------------------------------------ reductions

inline Var sum(const Var& a) {
  const Tensor& x = a.value();
  real s = 0;
  for (real v : x.data()) s += v;
  const Shape shape = x.shape();
  return a.tape().record(Tensor::scalar(s), {a}, [a, shape](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor(shape, g.item()));
  });
}

inline Var mean_all(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean_all of empty tensor");
  return scale(sum(a), real(1) / static_cast<real>(n));
}

// Elementwise mean of equally shaped values.
inline Var mean_of(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("mean_of: empty list");
  Tensor out = parts.front().value();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    detail::require_same_shape(out, v, "mean_of");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  const real inv = real(1) / static_cast<real>(parts.size());
  for (auto& v : out.data()) v *= inv;
  return parts.front().tape().record(std::move(out), parts, [parts, inv](Tape& t, const Tensor& g) {
    Tensor gi = g;
    for (auto& v : gi.data()) v *= inv;
    for (const auto& p : parts) t.accumulate(p, gi);
  });
}

// Max over the columns of each row of a [m,n] matrix -> [m]. Ties resolve to
// the lowest column index, which also receives the gradient.
inline Var row_max(const Var& a) {
  const Tensor& x = a.value();
  detail::require_rank2(x, "row_max");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (n == 0) throw DimensionError("row_max over zero columns");
  Tensor out({m});
  std::vector<std::size_t> arg(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (x.at(i, j) > x.at(i, best)) best = j;
    arg[i] = best;
    out[i] = x.at(i, best);
  }
  return a.tape().record(std::move(out), {a}, [a, arg, m, n](Tape& t, const Tensor& g) {
    Tensor ga({m, n});
    for (std::size_t i = 0; i < m; ++i) ga.at(i, arg[i]) = g[i];
    t.accumulate(a, ga);
  });
}

// Max over the rows of each column of a [m,n] matrix -> [n]; lowest row wins ties.
inline Var col_max(const Var& a) {
  const Tensor& x = a.value();
  detail::require_rank2(x, "col_max");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (m == 0) throw DimensionError("col_max over zero rows");
  Tensor out({n});
  std::vector<std::size_t> arg(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (x.at(i, j) > x.at(best, j)) best = i;
    arg[j] = best;
    out[j] = x.at(best, j);
  }
  return a.tape().record(std::move(out), {a}, [a, arg, m, n](Tape& t, const Tensor& g) {
    Tensor ga({m, n});
    for (std::size_t j = 0; j < n; ++j) ga.at(arg[j], j) = g[j];
    t.accumulate(a, ga);
  });
}

// ------------------------------------------------------------------ structure

inline Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(shape);
  const Shape orig = a.shape();
  return a.tape().record(std::move(out), {a}, [a, orig](Tape& t, const Tensor& g) {
    t.accumulate(a, g.reshaped(orig));
  });
}

inline Var transpose(const Var& a) {
  const Tensor& x = a.value();
  detail::require_rank2(x, "transpose");
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = x.at(i, j);
  return a.tape().record(std::move(out), {a}, [a, m, n](Tape& t, const Tensor& g) {
    Tensor ga({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga.at(i, j) = g.at(j, i);
    t.accumulate(a, ga);
  });
}

// Concatenates rank-2 values with equal row counts along the channel axis.
inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: empty list");
  const std::size_t m = parts.front().value().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    detail::require_rank2(v, "concat_cols");
    if (v.dim(0) != m) throw DimensionError("concat_cols: row count mismatch");
    widths.push_back(v.dim(1));
    total += v.dim(1);
  }
  Tensor out({m, total});
  std::size_t off = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(i * widths[p]), widths[p],
                  out.data().begin() + static_cast<std::ptrdiff_t>(i * total + off));
    off += widths[p];
  }
  return parts.front().tape().record(
      std::move(out), parts, [parts, widths, m, total](Tape& t, const Tensor& g) {
        std::size_t off = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          Tensor gp({m, widths[p]});
          for (std::size_t i = 0; i < m; ++i)
            std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(i * total + off), widths[p],
                        gp.data().begin() + static_cast<std::ptrdiff_t>(i * widths[p]));
          t.accumulate(parts[p], gp);
          off += widths[p];
        }
      });
}

// Concatenates rank-2 values with equal column counts along the row axis.
inline Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty list");
  const std::size_t n = parts.front().value().dim(1);
  std::vector<std::size_t> heights;
  std::vector<real> data;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    detail::require_rank2(v, "concat_rows");
    if (v.dim(1) != n) throw DimensionError("concat_rows: column count mismatch");
    heights.push_back(v.dim(0));
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  const std::size_t m = data.size() / std::max<std::size_t>(n, 1);
  return parts.front().tape().record(
      Tensor({m, n}, std::move(data)), parts, [parts, heights, n](Tape& t, const Tensor& g) {
        std::size_t row = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          const auto begin = g.data().begin() + static_cast<std::ptrdiff_t>(row * n);
          Tensor gp({heights[p], n},
                    std::vector<real>(begin, begin + static_cast<std::ptrdiff_t>(heights[p] * n)));
          t.accumulate(parts[p], gp);
          row += heights[p];
        }
      });
}

// Channels [start, end) of a rank-2 value.
inline Var slice_cols(const Var& a, std::size_t start, std::size_t end) {
  const Tensor& x = a.value();
  detail::require_rank2(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (start > end || end > n) throw DimensionError("slice_cols: range out of bounds");
  const std::size_t w = end - start;
  Tensor out({m, w});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = x.at(i, start + j);
  return a.tape().record(std::move(out), {a}, [a, m, n, start, w](Tape& t, const Tensor& g) {
    Tensor ga({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga.at(i, start + j) = g.at(i, j);
    t.accumulate(a, ga);
  });
}

inline Var slice_rows(const Var& a, std::size_t start, std::size_t end) {
  const Tensor& x = a.value();
  detail::require_rank2(x, "slice_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (start > end || end > m) throw DimensionError("slice_rows: range out of bounds");
  const auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(start * n);
  Tensor out({end - start, n}, std::vector<real>(begin, begin + static_cast<std::ptrdiff_t>((end - start) * n)));
  return a.tape().record(std::move(out), {a}, [a, m, n, start](Tape& t, const Tensor& g) {
    Tensor ga({m, n});
    std::copy(g.data().begin(), g.data().end(), ga.data().begin() + static_cast<std::ptrdiff_t>(start * n));
    t.accumulate(a, ga);
  });
}

// Rows idx[0], idx[1], ... of a rank-2 value, in that order.
inline Var gather_rows(const Var& a, const std::vector<std::size_t>& idx) {
  const Tensor& x = a.value();
  detail::require_rank2(x, "gather_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor out({idx.size(), n});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= m) throw DimensionError("gather_rows: index " + std::to_string(idx[r]) + " out of range");
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(idx[r] * n), n,
                out.data().begin() + static_cast<std::ptrdiff_t>(r * n));
  }
  return a.tape().record(std::move(out), {a}, [a, idx, m, n](Tape& t, const Tensor& g) {
    Tensor ga({m, n});
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) ga.at(idx[r], j) += g.at(r, j);
    t.accumulate(a, ga);
  });
}

// Copy of `base` whose rows idx[r] are replaced by rows[r]. Indices must be
// distinct.
inline Var scatter_rows(const Var& base, const Var& rows, const std::vector<std::size_t>& idx) {
  const Tensor& b = base.value();
  const Tensor& r = rows.value();
  detail::require_rank2(b, "scatter_rows");
  detail::require_rank2(r, "scatter_rows");
  const std::size_t m = b.dim(0), n = b.dim(1);
  if (r.dim(0) != idx.size() || r.dim(1) != n)
    throw DimensionError("scatter_rows: rows " + shape_str(r.shape()) + " vs " + std::to_string(idx.size()) +
                         " indices into " + shape_str(b.shape()));
  std::vector<char> hit(m, 0);
  Tensor out = b;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= m) throw DimensionError("scatter_rows: index out of range");
    if (hit[idx[k]]) throw DimensionError("scatter_rows: duplicate index " + std::to_string(idx[k]));
    hit[idx[k]] = 1;
    std::copy_n(r.data().begin() + static_cast<std::ptrdiff_t>(k * n), n,
                out.data().begin() + static_cast<std::ptrdiff_t>(idx[k] * n));
  }
  return base.tape().record(std::move(out), {base, rows}, [base, rows, idx, n](Tape& t, const Tensor& g) {
    Tensor gb = g;
    Tensor gr({idx.size(), n});
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t j = 0; j < n; ++j) {
        gr.at(k, j) = g.at(idx[k], j);
        gb.at(idx[k], j) = 0;
      }
    t.accumulate(base, gb);
    t.accumulate(rows, gr);
  });
}

// ---------------------------------------------------------------- linear algebra

inline Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_rank2(x, "matmul");
  detail::require_rank2(y, "matmul");
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k)
    throw DimensionError("matmul: inner extents differ, " + shape_str(x.shape()) + " x " + shape_str(y.shape()));
  Tensor out({m, n});
  detail::gemm_nn(x.data().data(), y.data().data(), out.data().data(), m, k, n);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (a.requires_grad()) {
      Tensor ga({m, k});
      detail::gemm_nt(g.data().data(), y.data().data(), ga.data().data(), m, n, k);
      t.accumulate(a, ga);
    }
    if (b.requires_grad()) {
      Tensor gb({k, n});
      detail::gemm_tn(x.data().data(), g.data().data(), gb.data().data(), m, k, n);
      t.accumulate(b, gb);
    }
  });
}

// a[m,k] * b[n,k]^T without materializing the transpose.
inline Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  detail::require_rank2(x, "matmul_nt");
  detail::require_rank2(y, "matmul_nt");
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(0);
  if (y.dim(1) != k)
    throw DimensionError("matmul_nt: inner extents differ, " + shape_str(x.shape()) + " x " +
                         shape_str(y.shape()) + "^T");
  Tensor out({m, n});
  detail::gemm_nt(x.data().data(), y.data().data(), out.data().data(), m, k, n);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (a.requires_grad()) {
      Tensor ga({m, k});
      detail::gemm_nn(g.data().data(), y.data().data(), ga.data().data(), m, n, k);
      t.accumulate(a, ga);
    }
    if (b.requires_grad()) {
      Tensor gb({n, k});
      detail::gemm_tn(g.data().data(), x.data().data(), gb.data().data(), m, n, k);
      t.accumulate(b, gb);
    }
  });
}

// -------------------------------------------------------------- normalization

// Softmax over the trailing axis, stabilized by subtracting the slice max.
inline Var softmax_rows(const Var& a) {
  const Tensor& x = a.value();
  if (!x.all_finite()) throw NumericError("softmax_rows: non-finite input");
  Tensor out = x;
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    real* row = out.data().data() + r * n;
    const real mx = *std::max_element(row, row + n);
    real s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      s += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= s;
  }
  return a.tape().record_with_output(std::move(out), {a}, [a, n](Tape& t, const Tensor& g, const Tensor& y) {
    Tensor ga = g;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const real* yr = y.data().data() + r * n;
      real* gr = ga.data().data() + r * n;
      real dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < n; ++j) gr[j] = yr[j] * (gr[j] - dot);
    }
    t.accumulate(a, ga);
  });
}

// Per-slice normalization over the trailing axis followed by an affine map.
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, real eps = real(1e-5)) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  if (d == 0) throw DimensionError("layer_norm: empty channel axis");
  if (gain.value().shape() != Shape{d} || bias.value().shape() != Shape{d})
    throw DimensionError("layer_norm: affine parameters must have shape [" + std::to_string(d) + "]");
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  const std::size_t rows = xv.rows();
  Tensor xhat = xv;
  std::vector<real> inv_std(rows);
  Tensor out = xv;
  for (std::size_t r = 0; r < rows; ++r) {
    const real* xr = xv.data().data() + r * d;
    real mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<real>(d);
    real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<real>(d);
    const real is = real(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const real h = (xr[j] - mean) * is;
      xhat[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return x.tape().record(
      std::move(out), {x, gain, bias}, [x, gain, bias, xhat = std::move(xhat), inv_std, d](Tape& t, const Tensor& g) {
        const Tensor& gv = gain.value();
        const std::size_t rows = g.rows();
        Tensor gx(g.shape()), gg({d}), gb({d});
        std::vector<real> dxhat(d);
        for (std::size_t r = 0; r < rows; ++r) {
          real mean_d = 0, mean_dh = 0;
          for (std::size_t j = 0; j < d; ++j) {
            const real gij = g[r * d + j];
            gg[j] += gij * xhat[r * d + j];
            gb[j] += gij;
            dxhat[j] = gij * gv[j];
            mean_d += dxhat[j];
            mean_dh += dxhat[j] * xhat[r * d + j];
          }
          mean_d /= static_cast<real>(d);
          mean_dh /= static_cast<real>(d);
          for (std::size_t j = 0; j < d; ++j)
            gx[r * d + j] = inv_std[r] * (dxhat[j] - mean_d - xhat[r * d + j] * mean_dh);
        }
        t.accumulate(x, gx);
        t.accumulate(gain, gg);
        t.accumulate(bias, gb);
      });
}

// Scales every trailing-axis slice to unit L2 norm. Zero slices stay zero.
inline Var l2_normalize_rows(const Var& x) {
  const Tensor& xv = x.value();
  const std::size_t d = xv.cols();
  Tensor out = xv;
  std::vector<real> norms(xv.rows());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    real s = 0;
    for (std::size_t j = 0; j < d; ++j) s += xv[r * d + j] * xv[r * d + j];
    norms[r] = std::sqrt(s);
    const real inv = norms[r] > 0 ? real(1) / norms[r] : real(0);
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] *= inv;
  }
  return x.tape().record_with_output(std::move(out), {x}, [x, norms, d](Tape& t, const Tensor& g, const Tensor& y) {
    Tensor gx(g.shape());
    for (std::size_t r = 0; r < norms.size(); ++r) {
      if (norms[r] == 0) continue;
      real dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] = (g[r * d + j] - y[r * d + j] * dot) / norms[r];
    }
    t.accumulate(x, gx);
  });
}

// Mean over rows of -log softmax(scores[n])[labels[n]] for scores [B,K].
inline Var cross_entropy(const Var& scores, const std::vector<std::size_t>& labels) {
  const Tensor& s = scores.value();
  detail::require_rank2(s, "cross_entropy");
  const std::size_t b = s.dim(0), k = s.dim(1);
  if (labels.size() != b)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(b) + " rows");
  for (std::size_t l : labels)
    if (l >= k) throw ValidationError("cross_entropy: label " + std::to_string(l) + " outside [0, " + std::to_string(k) + ")");
  if (b == 0) throw DimensionError("cross_entropy: empty batch");
  Tensor probs({b, k});
  real loss = 0;
  for (std::size_t n = 0; n < b; ++n) {
    real mx = s.at(n, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, s.at(n, j));
    real z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(s.at(n, j) - mx);
    const real lse = mx + std::log(z);
    loss += lse - s.at(n, labels[n]);
    for (std::size_t j = 0; j < k; ++j) probs.at(n, j) = std::exp(s.at(n, j) - lse);
  }
  loss /= static_cast<real>(b);
  return scores.tape().record(Tensor::scalar(loss), {scores},
                              [scores, probs = std::move(probs), labels, b, k](Tape& t, const Tensor& g) {
                                Tensor gs = probs;
                                const real w = g.item() / static_cast<real>(b);
                                for (std::size_t n = 0; n < b; ++n) {
                                  gs.at(n, labels[n]) -= 1;
                                  for (std::size_t j = 0; j < k; ++j) gs.at(n, j) *= w;
                                }
                                t.accumulate(scores, gs);
                              });
}

}  // namespace stdd
