#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "meshloc/num/tape.hpp"

namespace meshloc::num {

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <typename S>
TapeT<S>& same_tape(VarT<S> a, VarT<S> b) {
  require(a.valid() && b.valid() && a.tape == b.tape, "ops: vars must share one tape");
  return *a.tape;
}

template <typename S>
void check_same_shape(const char* op, const TensorT<S>& a, const TensorT<S>& b) {
  require(a.same_shape(b), std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                               b.shape_str());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary
// ---------------------------------------------------------------------------

template <typename S>
VarT<S> add(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b);
  detail::check_same_shape("add", t.value(a), t.value(b));
  TensorT<S> out(t.value(a).shape(), t.value(a).array() + t.value(b).array());
  int id = t.add_node("add", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](TapeT<S>& t, int self) {
    const auto& g = t.grad_buffer(self).array();
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += g;
    if (t.requires_grad(pb)) t.grad_buffer(pb).array() += g;
  });
  return {&t, id};
}

template <typename S>
VarT<S> sub(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b);
  detail::check_same_shape("sub", t.value(a), t.value(b));
  TensorT<S> out(t.value(a).shape(), t.value(a).array() - t.value(b).array());
  int id = t.add_node("sub", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](TapeT<S>& t, int self) {
    const auto& g = t.grad_buffer(self).array();
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += g;
    if (t.requires_grad(pb)) t.grad_buffer(pb).array() -= g;
  });
  return {&t, id};
}

template <typename S>
VarT<S> mul(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b);
  detail::check_same_shape("mul", t.value(a), t.value(b));
  TensorT<S> out(t.value(a).shape(), t.value(a).array() * t.value(b).array());
  int id = t.add_node("mul", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](TapeT<S>& t, int self) {
    const auto& g = t.grad_buffer(self).array();
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += g * t.value_at(pb).array();
    if (t.requires_grad(pb)) t.grad_buffer(pb).array() += g * t.value_at(pa).array();
  });
  return {&t, id};
}

template <typename S>
VarT<S> scale(VarT<S> a, S c) {
  auto& t = *a.tape;
  TensorT<S> out(t.value(a).shape(), t.value(a).array() * c);
  int id = t.add_node("scale", std::move(out), {a.id}, [pa = a.id, c](TapeT<S>& t, int self) {
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += t.grad_buffer(self).array() * c;
  });
  return {&t, id};
}

template <typename S>
VarT<S> add_scalar(VarT<S> a, S c) {
  auto& t = *a.tape;
  TensorT<S> out(t.value(a).shape(), t.value(a).array() + c);
  int id = t.add_node("add_scalar", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += t.grad_buffer(self).array();
  });
  return {&t, id};
}

template <typename S>
VarT<S> operator+(VarT<S> a, VarT<S> b) { return add(a, b); }
template <typename S>
VarT<S> operator-(VarT<S> a, VarT<S> b) { return sub(a, b); }
template <typename S>
VarT<S> operator*(VarT<S> a, VarT<S> b) { return mul(a, b); }
template <typename S>
VarT<S> operator*(S c, VarT<S> a) { return scale(a, c); }

// ---------------------------------------------------------------------------
// elementwise unary
// ---------------------------------------------------------------------------

template <typename S>
VarT<S> leaky_relu(VarT<S> a, S slope) {
  detail::require(slope > S(0) && slope < S(1), "leaky_relu: slope must lie in (0,1)");
  auto& t = *a.tape;
  const auto& x = t.value(a).array();
  TensorT<S> out(t.value(a).shape(), (x > S(0)).select(x, x * slope));
  int id = t.add_node("leaky_relu", std::move(out), {a.id}, [pa = a.id, slope](TapeT<S>& t, int self) {
    if (!t.requires_grad(pa)) return;
    const auto& x = t.value_at(pa).array();
    const auto& g = t.grad_buffer(self).array();
    t.grad_buffer(pa).array() += (x > S(0)).select(g, g * slope);
  });
  return {&t, id};
}

template <typename S>
VarT<S> relu(VarT<S> a) {
  auto& t = *a.tape;
  const auto& x = t.value(a).array();
  TensorT<S> out(t.value(a).shape(), x.max(S(0)));
  int id = t.add_node("relu", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (!t.requires_grad(pa)) return;
    const auto& x = t.value_at(pa).array();
    t.grad_buffer(pa).array() += t.grad_buffer(self).array() * (x > S(0)).template cast<S>();
  });
  return {&t, id};
}

/// Numerically clamped logistic: pre-activation limited to [-30, 30].
template <typename S>
VarT<S> sigmoid(VarT<S> a) {
  auto& t = *a.tape;
  const auto clamped = t.value(a).array().min(S(30)).max(S(-30));
  TensorT<S> out(t.value(a).shape(), S(1) / (S(1) + (-clamped).exp()));
  int id = t.add_node("sigmoid", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (!t.requires_grad(pa)) return;
    const auto& y = t.value_at(self).array();
    t.grad_buffer(pa).array() += t.grad_buffer(self).array() * y * (S(1) - y);
  });
  return {&t, id};
}

template <typename S>
VarT<S> logv(VarT<S> a) {
  auto& t = *a.tape;
  TensorT<S> out(t.value(a).shape(), t.value(a).array().log());
  int id = t.add_node("log", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (t.requires_grad(pa))
      t.grad_buffer(pa).array() += t.grad_buffer(self).array() / t.value_at(pa).array();
  });
  return {&t, id};
}

template <typename S>
VarT<S> abs(VarT<S> a) {
  auto& t = *a.tape;
  TensorT<S> out(t.value(a).shape(), t.value(a).array().abs());
  int id = t.add_node("abs", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (!t.requires_grad(pa)) return;
    const auto& x = t.value_at(pa).array();
    t.grad_buffer(pa).array() += t.grad_buffer(self).array() * x.sign();
  });
  return {&t, id};
}

template <typename S>
VarT<S> square(VarT<S> a) {
  auto& t = *a.tape;
  TensorT<S> out(t.value(a).shape(), t.value(a).array().square());
  int id = t.add_node("square", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (t.requires_grad(pa))
      t.grad_buffer(pa).array() += S(2) * t.grad_buffer(self).array() * t.value_at(pa).array();
  });
  return {&t, id};
}

/// Gradient passes only strictly inside (lo, hi).
template <typename S>
VarT<S> clamp(VarT<S> a, S lo, S hi) {
  detail::require(lo < hi, "clamp: lo must be < hi");
  auto& t = *a.tape;
  TensorT<S> out(t.value(a).shape(), t.value(a).array().max(lo).min(hi));
  int id = t.add_node("clamp", std::move(out), {a.id}, [pa = a.id, lo, hi](TapeT<S>& t, int self) {
    if (!t.requires_grad(pa)) return;
    const auto& x = t.value_at(pa).array();
    t.grad_buffer(pa).array() +=
        t.grad_buffer(self).array() * ((x > lo) && (x < hi)).template cast<S>();
  });
  return {&t, id};
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename S>
VarT<S> sum(VarT<S> a) {
  auto& t = *a.tape;
  TensorT<S> out = TensorT<S>::scalar(t.value(a).array().sum());
  int id = t.add_node("sum", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += t.grad_buffer(self).array()[0];
  });
  return {&t, id};
}

template <typename S>
VarT<S> mean(VarT<S> a) {
  auto& t = *a.tape;
  detail::require(t.value(a).size() > 0, "mean: empty tensor");
  const S n = static_cast<S>(t.value(a).size());
  TensorT<S> out = TensorT<S>::scalar(t.value(a).array().sum() / n);
  int id = t.add_node("mean", std::move(out), {a.id}, [pa = a.id, n](TapeT<S>& t, int self) {
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += t.grad_buffer(self).array()[0] / n;
  });
  return {&t, id};
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

/// y = Wx + b for W m-by-n, b m, x n.
template <typename S>
VarT<S> linear(VarT<S> W, VarT<S> b, VarT<S> x) {
  auto& t = detail::same_tape(W, b);
  detail::same_tape(b, x);
  const auto& vW = t.value(W);
  const auto& vb = t.value(b);
  const auto& vx = t.value(x);
  detail::require(vW.rank() == 2 && vb.rank() == 1 && vx.rank() == 1 &&
                      vW.dim(0) == vb.dim(0) && vW.dim(1) == vx.dim(0),
                  "linear: nonconforming shapes W=" + vW.shape_str() + " b=" + vb.shape_str() +
                      " x=" + vx.shape_str());
  TensorT<S> out({vW.dim(0)});
  out.vector() = vW.matrix() * vx.vector() + vb.vector();
  int id = t.add_node("linear", std::move(out), {W.id, b.id, x.id},
                      [pW = W.id, pb = b.id, px = x.id](TapeT<S>& t, int self) {
                        const auto g = t.grad_buffer(self).vector();
                        if (t.requires_grad(pW))
                          t.grad_buffer(pW).matrix() += g * t.value_at(px).vector().transpose();
                        if (t.requires_grad(pb)) t.grad_buffer(pb).vector() += g;
                        if (t.requires_grad(px))
                          t.grad_buffer(px).vector() += t.value_at(pW).matrix().transpose() * g;
                      });
  return {&t, id};
}

template <typename S>
VarT<S> matmul(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b);
  const auto& va = t.value(a);
  const auto& vb = t.value(b);
  detail::require(va.rank() == 2 && vb.rank() == 2 && va.dim(1) == vb.dim(0),
                  "matmul: nonconforming shapes " + va.shape_str() + " x " + vb.shape_str());
  TensorT<S> out({va.dim(0), vb.dim(1)});
  out.matrix() = va.matrix() * vb.matrix();
  int id = t.add_node("matmul", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](TapeT<S>& t, int self) {
    const auto g = t.grad_buffer(self).matrix();
    if (t.requires_grad(pa)) t.grad_buffer(pa).matrix() += g * t.value_at(pb).matrix().transpose();
    if (t.requires_grad(pb)) t.grad_buffer(pb).matrix() += t.value_at(pa).matrix().transpose() * g;
  });
  return {&t, id};
}

/// a * b^T for a m-by-k, b n-by-k.
template <typename S>
VarT<S> matmul_nt(VarT<S> a, VarT<S> b) {
  auto& t = detail::same_tape(a, b);
  const auto& va = t.value(a);
  const auto& vb = t.value(b);
  detail::require(va.rank() == 2 && vb.rank() == 2 && va.dim(1) == vb.dim(1),
                  "matmul_nt: nonconforming shapes " + va.shape_str() + " x " + vb.shape_str() + "^T");
  TensorT<S> out({va.dim(0), vb.dim(0)});
  out.matrix() = va.matrix() * vb.matrix().transpose();
  int id = t.add_node("matmul_nt", std::move(out), {a.id, b.id}, [pa = a.id, pb = b.id](TapeT<S>& t, int self) {
    const auto g = t.grad_buffer(self).matrix();
    if (t.requires_grad(pa)) t.grad_buffer(pa).matrix() += g * t.value_at(pb).matrix();
    if (t.requires_grad(pb)) t.grad_buffer(pb).matrix() += g.transpose() * t.value_at(pa).matrix();
  });
  return {&t, id};
}

template <typename S>
VarT<S> matvec(VarT<S> A, VarT<S> x) {
  auto& t = detail::same_tape(A, x);
  const auto& vA = t.value(A);
  const auto& vx = t.value(x);
  detail::require(vA.rank() == 2 && vx.rank() == 1 && vA.dim(1) == vx.dim(0),
                  "matvec: nonconforming shapes " + vA.shape_str() + " x " + vx.shape_str());
  TensorT<S> out({vA.dim(0)});
  out.vector() = vA.matrix() * vx.vector();
  int id = t.add_node("matvec", std::move(out), {A.id, x.id}, [pA = A.id, px = x.id](TapeT<S>& t, int self) {
    const auto g = t.grad_buffer(self).vector();
    if (t.requires_grad(pA)) t.grad_buffer(pA).matrix() += g * t.value_at(px).vector().transpose();
    if (t.requires_grad(px)) t.grad_buffer(px).vector() += t.value_at(pA).matrix().transpose() * g;
  });
  return {&t, id};
}

// ---------------------------------------------------------------------------
// row-structured helpers (rank-2 operands)
// ---------------------------------------------------------------------------

/// M + v broadcast over rows (bias per column).
template <typename S>
VarT<S> add_rows(VarT<S> M, VarT<S> v) {
  auto& t = detail::same_tape(M, v);
  const auto& vM = t.value(M);
  const auto& vv = t.value(v);
  detail::require(vM.rank() == 2 && vv.rank() == 1 && vM.dim(1) == vv.dim(0),
                  "add_rows: shapes " + vM.shape_str() + " + " + vv.shape_str());
  TensorT<S> out(vM.shape());
  out.matrix() = vM.matrix().rowwise() + vv.vector().transpose();
  int id = t.add_node("add_rows", std::move(out), {M.id, v.id}, [pM = M.id, pv = v.id](TapeT<S>& t, int self) {
    const auto g = t.grad_buffer(self).matrix();
    if (t.requires_grad(pM)) t.grad_buffer(pM).matrix() += g;
    if (t.requires_grad(pv)) t.grad_buffer(pv).vector() += g.colwise().sum().transpose();
  });
  return {&t, id};
}

/// M with each row scaled elementwise by v (scale per column).
template <typename S>
VarT<S> mul_rows(VarT<S> M, VarT<S> v) {
  auto& t = detail::same_tape(M, v);
  const auto& vM = t.value(M);
  const auto& vv = t.value(v);
  detail::require(vM.rank() == 2 && vv.rank() == 1 && vM.dim(1) == vv.dim(0),
                  "mul_rows: shapes " + vM.shape_str() + " * " + vv.shape_str());
  TensorT<S> out(vM.shape());
  out.matrix() = vM.matrix().array().rowwise() * vv.vector().transpose().array();
  int id = t.add_node("mul_rows", std::move(out), {M.id, v.id}, [pM = M.id, pv = v.id](TapeT<S>& t, int self) {
    const auto g = t.grad_buffer(self).matrix().array();
    if (t.requires_grad(pM))
      t.grad_buffer(pM).matrix().array() += g.rowwise() * t.value_at(pv).vector().transpose().array();
    if (t.requires_grad(pv))
      t.grad_buffer(pv).vector().array() +=
          (g * t.value_at(pM).matrix().array()).colwise().sum().transpose();
  });
  return {&t, id};
}

/// Row r of M multiplied by scalar s[r].
template <typename S>
VarT<S> scale_rows(VarT<S> M, VarT<S> s) {
  auto& t = detail::same_tape(M, s);
  const auto& vM = t.value(M);
  const auto& vs = t.value(s);
  detail::require(vM.rank() == 2 && vs.rank() == 1 && vM.dim(0) == vs.dim(0),
                  "scale_rows: shapes " + vM.shape_str() + " by " + vs.shape_str());
  TensorT<S> out(vM.shape());
  out.matrix() = vM.matrix().array().colwise() * vs.vector().array();
  int id = t.add_node("scale_rows", std::move(out), {M.id, s.id}, [pM = M.id, ps = s.id](TapeT<S>& t, int self) {
    const auto g = t.grad_buffer(self).matrix().array();
    if (t.requires_grad(pM))
      t.grad_buffer(pM).matrix().array() += g.colwise() * t.value_at(ps).vector().array();
    if (t.requires_grad(ps))
      t.grad_buffer(ps).vector().array() +=
          (g * t.value_at(pM).matrix().array()).rowwise().sum();
  });
  return {&t, id};
}

template <typename S>
VarT<S> gather_rows(VarT<S> M, std::vector<int> idx) {
  auto& t = *M.tape;
  const auto& vM = t.value(M);
  detail::require(vM.rank() == 2, "gather_rows: rank-2 input required");
  for (int i : idx)
    detail::require(i >= 0 && i < vM.dim(0), "gather_rows: index out of range");
  TensorT<S> out({static_cast<int>(idx.size()), vM.dim(1)});
  for (std::size_t r = 0; r < idx.size(); ++r)
    out.matrix().row(static_cast<Eigen::Index>(r)) = vM.matrix().row(idx[r]);
  int id = t.add_node("gather_rows", std::move(out), {M.id},
                      [pM = M.id, idx = std::move(idx)](TapeT<S>& t, int self) {
                        if (!t.requires_grad(pM)) return;
                        const auto g = t.grad_buffer(self).matrix();
                        auto dM = t.grad_buffer(pM).matrix();
                        for (std::size_t r = 0; r < idx.size(); ++r)
                          dM.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
                      });
  return {&t, id};
}

template <typename S>
VarT<S> gather(VarT<S> v, std::vector<int> idx) {
  auto& t = *v.tape;
  const auto& vv = t.value(v);
  detail::require(vv.rank() == 1, "gather: rank-1 input required");
  for (int i : idx)
    detail::require(i >= 0 && i < vv.dim(0), "gather: index out of range");
  TensorT<S> out({static_cast<int>(idx.size())});
  for (std::size_t r = 0; r < idx.size(); ++r) out[static_cast<Eigen::Index>(r)] = vv[idx[r]];
  int id = t.add_node("gather", std::move(out), {v.id},
                      [pv = v.id, idx = std::move(idx)](TapeT<S>& t, int self) {
                        if (!t.requires_grad(pv)) return;
                        const auto& g = t.grad_buffer(self);
                        auto& dv = t.grad_buffer(pv);
                        for (std::size_t r = 0; r < idx.size(); ++r)
                          dv[idx[r]] += g[static_cast<Eigen::Index>(r)];
                      });
  return {&t, id};
}

/// Sums rows of M into `segment_count` buckets given per-row segment ids.
template <typename S>
VarT<S> segment_sum_rows(VarT<S> M, std::vector<int> seg, int segment_count) {
  auto& t = *M.tape;
  const auto& vM = t.value(M);
  detail::require(vM.rank() == 2, "segment_sum_rows: rank-2 input required");
  detail::require(static_cast<int>(seg.size()) == vM.dim(0),
                  "segment_sum_rows: one segment id per row required");
  for (int s : seg)
    detail::require(s >= 0 && s < segment_count, "segment_sum_rows: segment id out of range");
  TensorT<S> out({segment_count, vM.dim(1)});
  for (std::size_t r = 0; r < seg.size(); ++r)
    out.matrix().row(seg[r]) += vM.matrix().row(static_cast<Eigen::Index>(r));
  int id = t.add_node("segment_sum_rows", std::move(out), {M.id},
                      [pM = M.id, seg = std::move(seg)](TapeT<S>& t, int self) {
                        if (!t.requires_grad(pM)) return;
                        const auto g = t.grad_buffer(self).matrix();
                        auto dM = t.grad_buffer(pM).matrix();
                        for (std::size_t r = 0; r < seg.size(); ++r)
                          dM.row(static_cast<Eigen::Index>(r)) += g.row(seg[r]);
                      });
  return {&t, id};
}

template <typename S>
VarT<S> concat_cols(const std::vector<VarT<S>>& parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  auto& t = *parts[0].tape;
  int rows = t.value(parts[0]).dim(0);
  int total = 0;
  std::vector<int> offsets, widths, ids;
  for (const auto& p : parts) {
    detail::require(p.tape == &t, "concat_cols: vars must share one tape");
    const auto& v = t.value(p);
    detail::require(v.rank() == 2 && v.dim(0) == rows, "concat_cols: row count mismatch");
    offsets.push_back(total);
    widths.push_back(v.dim(1));
    ids.push_back(p.id);
    total += v.dim(1);
  }
  TensorT<S> out({rows, total});
  for (std::size_t k = 0; k < ids.size(); ++k)
    out.matrix().middleCols(offsets[k], widths[k]) = t.value_at(ids[k]).matrix();
  int id = t.add_node("concat_cols", std::move(out), ids,
                      [ids, offsets, widths](TapeT<S>& t, int self) {
                        const auto g = t.grad_buffer(self).matrix();
                        for (std::size_t k = 0; k < ids.size(); ++k)
                          if (t.requires_grad(ids[k]))
                            t.grad_buffer(ids[k]).matrix() += g.middleCols(offsets[k], widths[k]);
                      });
  return {&t, id};
}

template <typename S>
VarT<S> slice_cols(VarT<S> M, int start, int len) {
  auto& t = *M.tape;
  const auto& vM = t.value(M);
  detail::require(vM.rank() == 2 && start >= 0 && len >= 0 && start + len <= vM.dim(1),
                  "slice_cols: range out of bounds for " + vM.shape_str());
  TensorT<S> out({vM.dim(0), len});
  out.matrix() = vM.matrix().middleCols(start, len);
  int id = t.add_node("slice_cols", std::move(out), {M.id},
                      [pM = M.id, start, len](TapeT<S>& t, int self) {
                        if (t.requires_grad(pM))
                          t.grad_buffer(pM).matrix().middleCols(start, len) +=
                              t.grad_buffer(self).matrix();
                      });
  return {&t, id};
}

/// Euclidean norm of each row; gradient guarded near zero.
template <typename S>
VarT<S> row_norms(VarT<S> M) {
  auto& t = *M.tape;
  const auto& vM = t.value(M);
  detail::require(vM.rank() == 2, "row_norms: rank-2 input required");
  TensorT<S> out({vM.dim(0)});
  out.vector() = vM.matrix().rowwise().norm();
  int id = t.add_node("row_norms", std::move(out), {M.id}, [pM = M.id](TapeT<S>& t, int self) {
    if (!t.requires_grad(pM)) return;
    const auto g = t.grad_buffer(self).vector();
    const auto n = t.value_at(self).vector();
    auto dM = t.grad_buffer(pM).matrix();
    const auto& x = t.value_at(pM).matrix();
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      dM.row(r) += (g[r] / std::max(n[r], S(1e-12))) * x.row(r);
  });
  return {&t, id};
}

template <typename S>
VarT<S> reshape(VarT<S> a, std::vector<int> shape) {
  auto& t = *a.tape;
  TensorT<S> out = t.value(a).reshaped(shape);
  int id = t.add_node("reshape", std::move(out), {a.id}, [pa = a.id](TapeT<S>& t, int self) {
    if (t.requires_grad(pa)) t.grad_buffer(pa).array() += t.grad_buffer(self).array();
  });
  return {&t, id};
}

// ---------------------------------------------------------------------------
// segmented softmax
// ---------------------------------------------------------------------------

/// Softmax normalized independently within each segment, computed with
/// per-segment max subtraction. Empty input yields an empty output.
template <typename S>
VarT<S> segmented_softmax(VarT<S> x, std::vector<int> seg, int segment_count) {
  auto& t = *x.tape;
  const auto& vx = t.value(x);
  detail::require(vx.rank() == 1, "segmented_softmax: rank-1 input required");
  detail::require(static_cast<int>(seg.size()) == vx.dim(0),
                  "segmented_softmax: one segment id per entry required");
  for (int s : seg)
    detail::require(s >= 0 && s < segment_count, "segmented_softmax: segment id out of range");
  TensorT<S> out(vx.shape());
  {
    std::vector<S> mx(static_cast<std::size_t>(segment_count), std::numeric_limits<S>::lowest());
    for (std::size_t i = 0; i < seg.size(); ++i)
      mx[static_cast<std::size_t>(seg[i])] = std::max(mx[static_cast<std::size_t>(seg[i])], vx[static_cast<Eigen::Index>(i)]);
    std::vector<S> denom(static_cast<std::size_t>(segment_count), S(0));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      const S e = std::exp(vx[static_cast<Eigen::Index>(i)] - mx[static_cast<std::size_t>(seg[i])]);
      out[static_cast<Eigen::Index>(i)] = e;
      denom[static_cast<std::size_t>(seg[i])] += e;
    }
    for (std::size_t i = 0; i < seg.size(); ++i)
      out[static_cast<Eigen::Index>(i)] /= denom[static_cast<std::size_t>(seg[i])];
  }
  int id = t.add_node("segmented_softmax", std::move(out), {x.id},
                      [px = x.id, seg = std::move(seg), segment_count](TapeT<S>& t, int self) {
                        if (!t.requires_grad(px)) return;
                        const auto& g = t.grad_buffer(self);
                        const auto& y = t.value_at(self);
                        std::vector<S> dot(static_cast<std::size_t>(segment_count), S(0));
                        for (std::size_t i = 0; i < seg.size(); ++i)
                          dot[static_cast<std::size_t>(seg[i])] +=
                              g[static_cast<Eigen::Index>(i)] * y[static_cast<Eigen::Index>(i)];
                        auto& dx = t.grad_buffer(px);
                        for (std::size_t i = 0; i < seg.size(); ++i)
                          dx[static_cast<Eigen::Index>(i)] +=
                              y[static_cast<Eigen::Index>(i)] *
                              (g[static_cast<Eigen::Index>(i)] - dot[static_cast<std::size_t>(seg[i])]);
                      });
  return {&t, id};
}

// ---------------------------------------------------------------------------
// convolution and friends (tensors in CHW layout)
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
typename TensorT<S>::MatrixRM im2col(const TensorT<S>& x, int kh, int kw, int stride, int pad,
                                     int out_h, int out_w) {
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  typename TensorT<S>::MatrixRM P(C * kh * kw, out_h * out_w);
  P.setZero();
  for (int c = 0; c < C; ++c)
    for (int di = 0; di < kh; ++di)
      for (int dj = 0; dj < kw; ++dj) {
        const int row = (c * kh + di) * kw + dj;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + di;
          if (iy < 0 || iy >= H) continue;
          const S* src = x.data() + (static_cast<Eigen::Index>(c) * H + iy) * W;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + dj;
            if (ix < 0 || ix >= W) continue;
            P(row, oy * out_w + ox) = src[ix];
          }
        }
      }
  return P;
}

template <typename S>
void col2im_add(const typename TensorT<S>::MatrixRM& P, TensorT<S>& dx, int kh, int kw, int stride,
                int pad, int out_h, int out_w) {
  const int C = dx.dim(0), H = dx.dim(1), W = dx.dim(2);
  for (int c = 0; c < C; ++c)
    for (int di = 0; di < kh; ++di)
      for (int dj = 0; dj < kw; ++dj) {
        const int row = (c * kh + di) * kw + dj;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + di;
          if (iy < 0 || iy >= H) continue;
          S* dst = dx.data() + (static_cast<Eigen::Index>(c) * H + iy) * W;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + dj;
            if (ix < 0 || ix >= W) continue;
            dst[ix] += P(row, oy * out_w + ox);
          }
        }
      }
}

}  // namespace detail

/// Cross-correlation of x [C,H,W] with kernels [K,C,kh,kw]. The patch matrix
/// is rebuilt in the backward pass instead of being cached on the tape.
template <typename S>
VarT<S> conv2d(VarT<S> x, VarT<S> kernels, int stride, int pad) {
  auto& t = detail::same_tape(x, kernels);
  const auto& vx = t.value(x);
  const auto& vk = t.value(kernels);
  detail::require(vx.rank() == 3, "conv2d: input must be [C,H,W], got " + vx.shape_str());
  detail::require(vk.rank() == 4, "conv2d: kernels must be [K,C,kh,kw], got " + vk.shape_str());
  detail::require(vk.dim(1) == vx.dim(0), "conv2d: channel mismatch, input " + vx.shape_str() +
                                              " vs kernels " + vk.shape_str());
  const int kh = vk.dim(2), kw = vk.dim(3);
  detail::require(kh % 2 == 1 && kw % 2 == 1, "conv2d: kernel sides must be odd");
  detail::require(stride >= 1, "conv2d: stride must be >= 1");
  detail::require(pad >= 0, "conv2d: pad must be >= 0");
  const int K = vk.dim(0), H = vx.dim(1), W = vx.dim(2);
  const int out_h = (H + 2 * pad - kh) / stride + 1;
  const int out_w = (W + 2 * pad - kw) / stride + 1;
  detail::require(out_h > 0 && out_w > 0, "conv2d: empty output");

  const auto P = detail::im2col(vx, kh, kw, stride, pad, out_h, out_w);
  TensorT<S> out({K, out_h, out_w});
  out.matrix(K, out_h * out_w) = vk.matrix(K, vk.dim(1) * kh * kw) * P;

  int id = t.add_node(
      "conv2d", std::move(out), {x.id, kernels.id},
      [px = x.id, pk = kernels.id, kh, kw, stride, pad, out_h, out_w](TapeT<S>& t, int self) {
        const auto& vx = t.value_at(px);
        const auto& vk = t.value_at(pk);
        const int K = vk.dim(0);
        const auto G = t.grad_buffer(self).matrix(K, out_h * out_w);
        if (t.requires_grad(pk)) {
          const auto P = detail::im2col(vx, kh, kw, stride, pad, out_h, out_w);
          t.grad_buffer(pk).matrix(K, vk.dim(1) * kh * kw) += G * P.transpose();
        }
        if (t.requires_grad(px)) {
          typename TensorT<S>::MatrixRM dP =
              vk.matrix(K, vk.dim(1) * kh * kw).transpose() * G;
          detail::col2im_add<S>(dP, t.grad_buffer(px), kh, kw, stride, pad, out_h, out_w);
        }
      });
  return {&t, id};
}

template <typename S>
VarT<S> add_channel_bias(VarT<S> x, VarT<S> b) {
  auto& t = detail::same_tape(x, b);
  const auto& vx = t.value(x);
  const auto& vb = t.value(b);
  detail::require(vx.rank() == 3 && vb.rank() == 1 && vb.dim(0) == vx.dim(0),
                  "add_channel_bias: shapes " + vx.shape_str() + " + " + vb.shape_str());
  const int C = vx.dim(0);
  const Eigen::Index hw = static_cast<Eigen::Index>(vx.dim(1)) * vx.dim(2);
  TensorT<S> out(vx.shape());
  for (int c = 0; c < C; ++c)
    out.array().segment(c * hw, hw) = vx.array().segment(c * hw, hw) + vb[c];
  int id = t.add_node("add_channel_bias", std::move(out), {x.id, b.id},
                      [px = x.id, pb = b.id, C, hw](TapeT<S>& t, int self) {
                        const auto& g = t.grad_buffer(self).array();
                        if (t.requires_grad(px)) t.grad_buffer(px).array() += g;
                        if (t.requires_grad(pb)) {
                          auto& db = t.grad_buffer(pb);
                          for (int c = 0; c < C; ++c) db[c] += g.segment(c * hw, hw).sum();
                        }
                      });
  return {&t, id};
}

/// Running statistics of one batch-norm layer (live outside the tape).
template <typename S>
struct BnStatsT {
  TensorT<S>* running_mean = nullptr;
  TensorT<S>* running_var = nullptr;
};

/// Channelwise batch normalization over the spatial extent of a [C,H,W] map.
/// `use_batch_stats` selects training-style normalization; `update_running`
/// folds the batch statistics into the running buffers (kept separate so
/// gradient checks can re-evaluate the forward pass without side effects).
template <typename S>
VarT<S> batch_norm2d(VarT<S> x, VarT<S> gamma, VarT<S> beta, BnStatsT<S> stats,
                     bool use_batch_stats, bool update_running, S momentum = S(0.1),
                     S eps = S(1e-5)) {
  auto& t = detail::same_tape(x, gamma);
  detail::same_tape(gamma, beta);
  const auto& vx = t.value(x);
  const auto& vg = t.value(gamma);
  const auto& vb = t.value(beta);
  const int C = vx.dim(0);
  detail::require(vx.rank() == 3 && vg.rank() == 1 && vb.rank() == 1 && vg.dim(0) == C &&
                      vb.dim(0) == C,
                  "batch_norm2d: shapes " + vx.shape_str() + ", gamma " + vg.shape_str() +
                      ", beta " + vb.shape_str());
  detail::require(stats.running_mean != nullptr && stats.running_var != nullptr &&
                      stats.running_mean->size() == C && stats.running_var->size() == C,
                  "batch_norm2d: running stats must have one entry per channel");
  const Eigen::Index hw = static_cast<Eigen::Index>(vx.dim(1)) * vx.dim(2);

  Eigen::Array<S, Eigen::Dynamic, 1> mu(C), var(C);
  if (use_batch_stats) {
    for (int c = 0; c < C; ++c) {
      const auto seg = vx.array().segment(c * hw, hw);
      mu[c] = seg.mean();
      var[c] = (seg - mu[c]).square().mean();
    }
    if (update_running) {
      stats.running_mean->array() = (S(1) - momentum) * stats.running_mean->array() + momentum * mu;
      stats.running_var->array() = (S(1) - momentum) * stats.running_var->array() + momentum * var;
    }
  } else {
    mu = stats.running_mean->array();
    var = stats.running_var->array();
  }
  Eigen::Array<S, Eigen::Dynamic, 1> inv_std = (var + eps).sqrt().inverse();

  TensorT<S> out(vx.shape());
  for (int c = 0; c < C; ++c)
    out.array().segment(c * hw, hw) =
        (vx.array().segment(c * hw, hw) - mu[c]) * inv_std[c] * vg[c] + vb[c];

  int id = t.add_node(
      "batch_norm2d", std::move(out), {x.id, gamma.id, beta.id},
      [px = x.id, pg = gamma.id, pb = beta.id, C, hw, mu, inv_std, use_batch_stats](TapeT<S>& t,
                                                                                    int self) {
        const auto& g = t.grad_buffer(self).array();
        const auto& vx = t.value_at(px).array();
        const auto& vg = t.value_at(pg);
        for (int c = 0; c < C; ++c) {
          const auto gc = g.segment(c * hw, hw);
          const auto xhat = ((vx.segment(c * hw, hw) - mu[c]) * inv_std[c]).eval();
          if (t.requires_grad(pb)) t.grad_buffer(pb)[c] += gc.sum();
          if (t.requires_grad(pg)) t.grad_buffer(pg)[c] += (gc * xhat).sum();
          if (t.requires_grad(px)) {
            auto dx = t.grad_buffer(px).array().segment(c * hw, hw);
            if (use_batch_stats) {
              const S m1 = gc.mean();
              const S m2 = (gc * xhat).mean();
              dx += vg[c] * inv_std[c] * (gc - m1 - xhat * m2);
            } else {
              dx += vg[c] * inv_std[c] * gc;
            }
          }
        }
      });
  return {&t, id};
}

/// Average pooling to an exact output grid; fractional windows follow
/// floor/ceil index arithmetic so the windows tile the input.
template <typename S>
VarT<S> adaptive_avg_pool2d(VarT<S> x, int out_h, int out_w) {
  auto& t = *x.tape;
  const auto& vx = t.value(x);
  detail::require(vx.rank() == 3, "adaptive_avg_pool2d: input must be [C,H,W]");
  detail::require(out_h >= 1 && out_w >= 1, "adaptive_avg_pool2d: output dims must be >= 1");
  const int C = vx.dim(0), H = vx.dim(1), W = vx.dim(2);
  auto win = [](int o, int in, int out) {
    const int s = (o * in) / out;
    const int e = ((o + 1) * in + out - 1) / out;
    return std::pair<int, int>{s, e};
  };
  TensorT<S> out({C, out_h, out_w});
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < out_h; ++oy) {
      const auto [y0, y1] = win(oy, H, out_h);
      for (int ox = 0; ox < out_w; ++ox) {
        const auto [x0, x1] = win(ox, W, out_w);
        S acc = 0;
        for (int iy = y0; iy < y1; ++iy)
          for (int ix = x0; ix < x1; ++ix)
            acc += vx[(static_cast<Eigen::Index>(c) * H + iy) * W + ix];
        out[(static_cast<Eigen::Index>(c) * out_h + oy) * out_w + ox] =
            acc / static_cast<S>((y1 - y0) * (x1 - x0));
      }
    }
  int id = t.add_node("adaptive_avg_pool2d", std::move(out), {x.id},
                      [px = x.id, C, H, W, out_h, out_w, win](TapeT<S>& t, int self) {
                        if (!t.requires_grad(px)) return;
                        const auto& g = t.grad_buffer(self);
                        auto& dx = t.grad_buffer(px);
                        for (int c = 0; c < C; ++c)
                          for (int oy = 0; oy < out_h; ++oy) {
                            const auto [y0, y1] = win(oy, H, out_h);
                            for (int ox = 0; ox < out_w; ++ox) {
                              const auto [x0, x1] = win(ox, W, out_w);
                              const S share =
                                  g[(static_cast<Eigen::Index>(c) * out_h + oy) * out_w + ox] /
                                  static_cast<S>((y1 - y0) * (x1 - x0));
                              for (int iy = y0; iy < y1; ++iy)
                                for (int ix = x0; ix < x1; ++ix)
                                  dx[(static_cast<Eigen::Index>(c) * H + iy) * W + ix] += share;
                            }
                          }
                      });
  return {&t, id};
}

/// [C,H,W] -> [(H*W) x C]: one row per spatial position (row-major scan).
template <typename S>
VarT<S> chw_to_rows(VarT<S> x) {
  auto& t = *x.tape;
  const auto& vx = t.value(x);
  detail::require(vx.rank() == 3, "chw_to_rows: input must be [C,H,W]");
  const int C = vx.dim(0);
  const Eigen::Index hw = static_cast<Eigen::Index>(vx.dim(1)) * vx.dim(2);
  TensorT<S> out({static_cast<int>(hw), C});
  out.matrix() = vx.matrix(C, hw).transpose();
  int id = t.add_node("chw_to_rows", std::move(out), {x.id}, [px = x.id, C, hw](TapeT<S>& t, int self) {
    if (t.requires_grad(px))
      t.grad_buffer(px).matrix(C, hw) += t.grad_buffer(self).matrix().transpose();
  });
  return {&t, id};
}

/// Per-row standardization (zero mean, unit variance over the feature axis)
/// with a learnable affine; the normalization half of a GATNorm block.
template <typename S>
VarT<S> layer_norm_rows(VarT<S> M, VarT<S> gamma, VarT<S> beta, S eps = S(1e-6)) {
  auto& t = detail::same_tape(M, gamma);
  detail::same_tape(gamma, beta);
  const auto& vM = t.value(M);
  const auto& vg = t.value(gamma);
  const auto& vb = t.value(beta);
  detail::require(vM.rank() == 2 && vg.rank() == 1 && vb.rank() == 1 && vg.dim(0) == vM.dim(1) &&
                      vb.dim(0) == vM.dim(1),
                  "layer_norm_rows: shapes " + vM.shape_str() + ", gamma " + vg.shape_str() +
                      ", beta " + vb.shape_str());
  const int rows = vM.dim(0), cols = vM.dim(1);
  typename TensorT<S>::MatrixRM xhat(rows, cols);
  Eigen::Array<S, Eigen::Dynamic, 1> inv_std(rows);
  for (int r = 0; r < rows; ++r) {
    const auto row = vM.matrix().row(r).array();
    const S mu = row.mean();
    const S var = (row - mu).square().mean();
    inv_std[r] = S(1) / std::sqrt(var + eps);
    xhat.row(r) = ((row - mu) * inv_std[r]).matrix();
  }
  TensorT<S> out({rows, cols});
  out.matrix() = (xhat.array().rowwise() * vg.vector().transpose().array()).rowwise() +
                 vb.vector().transpose().array();
  int id = t.add_node(
      "layer_norm_rows", std::move(out), {M.id, gamma.id, beta.id},
      [pM = M.id, pg = gamma.id, pb = beta.id, xhat, inv_std](TapeT<S>& t, int self) {
        const auto g = t.grad_buffer(self).matrix();
        const auto& vg = t.value_at(pg).vector();
        if (t.requires_grad(pb)) t.grad_buffer(pb).vector() += g.colwise().sum().transpose();
        if (t.requires_grad(pg))
          t.grad_buffer(pg).vector() +=
              (g.array() * xhat.array()).colwise().sum().matrix().transpose();
        if (t.requires_grad(pM)) {
          auto dM = t.grad_buffer(pM).matrix();
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const auto q = (g.row(r).transpose().array() * vg.array()).eval();
            const auto xh = xhat.row(r).transpose().array();
            const S m1 = q.mean();
            const S m2 = (q * xh).mean();
            dM.row(r) += (inv_std[r] * (q - m1 - xh * m2)).matrix().transpose();
          }
        }
      });
  return {&t, id};
}

// ---------------------------------------------------------------------------
// composed losses
// ---------------------------------------------------------------------------

/// Mean binary cross-entropy against constant targets; probabilities are
/// clamped to [1e-7, 1-1e-7] before the logs.
template <typename S>
VarT<S> binary_cross_entropy(VarT<S> p, const TensorT<S>& targets) {
  auto& t = *p.tape;
  detail::check_same_shape("binary_cross_entropy", t.value(p), targets);
  VarT<S> pc = clamp(p, S(1e-7), S(1) - S(1e-7));
  VarT<S> y = t.constant(targets);
  TensorT<S> ones_t = TensorT<S>::full(targets.shape(), S(1));
  VarT<S> ones = t.constant(ones_t);
  VarT<S> loss = scale(mean(add(mul(y, logv(pc)), mul(sub(ones, y), logv(sub(ones, pc))))), S(-1));
  return loss;
}

}  // namespace meshloc::num
