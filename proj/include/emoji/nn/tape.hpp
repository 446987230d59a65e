#pragma once

#include "emoji/common.hpp"

#include <functional>
#include <utility>

// Reverse-mode tape over Eigen matrices.
//
// Layout conventions used across the project:
//   feature maps: (C x B*H*W), column index b*H*W + y*W + x
//   token sets:   (D x B*N),   column index b*N + n
//   vectors:      (D x B)
// Keeping channels down the columns means convolution lowers to one GEMM per
// layer via im2col, which is where a single AVX-512 core earns its keep.

namespace emoji::nn {

template <typename S>
class Tape {
 public:
  using Mat = MatX<S>;

  struct Node {
    Mat val;
    Mat grad;                                  // lazily sized on first accumulation
    std::function<void(Tape&, Node&)> back;    // pulls node.grad into parents
    bool rg = false;
  };

  int leaf(Mat v, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(v), Mat(), nullptr, requires_grad});
    return int(nodes_.size()) - 1;
  }
  int constant(Mat v) { return leaf(std::move(v), false); }

  int apply(Mat v, bool rg, std::function<void(Tape&, Node&)> back) {
    nodes_.push_back(Node{std::move(v), Mat(), rg ? std::move(back) : nullptr, rg});
    return int(nodes_.size()) - 1;
  }

  const Mat& val(int id) const { return nodes_[size_t(id)].val; }
  Mat& val(int id) { return nodes_[size_t(id)].val; }
  const Mat& grad(int id) const { return nodes_[size_t(id)].grad; }
  bool rg(int id) const { return nodes_[size_t(id)].rg; }
  bool has_grad(int id) const { return nodes_[size_t(id)].grad.size() != 0; }

  template <typename Expr>
  void acc(int id, const Expr& g) {
    Node& n = nodes_[size_t(id)];
    if (!n.rg) return;
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  // Backpropagate from a scalar (1x1) node.
  void backward(int root) {
    Node& r = nodes_[size_t(root)];
    if (r.val.size() != 1) throw std::logic_error("backward: root is not scalar");
    if (!r.rg) return;
    r.grad = Mat::Ones(1, 1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (n.rg && n.grad.size() != 0 && n.back) n.back(*this, n);
    }
  }

  int detach(int id) { return constant(val(id)); }

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// basic arithmetic

template <typename S>
int add(Tape<S>& t, int a, int b) {
  bool rg = t.rg(a) || t.rg(b);
  return t.apply(t.val(a) + t.val(b), rg, [a, b](Tape<S>& t, typename Tape<S>::Node& n) {
    t.acc(a, n.grad);
    t.acc(b, n.grad);
  });
}

template <typename S>
int sub(Tape<S>& t, int a, int b) {
  bool rg = t.rg(a) || t.rg(b);
  return t.apply(t.val(a) - t.val(b), rg, [a, b](Tape<S>& t, typename Tape<S>::Node& n) {
    t.acc(a, n.grad);
    t.acc(b, -n.grad);
  });
}

template <typename S>
int cmul(Tape<S>& t, int a, int b) {
  bool rg = t.rg(a) || t.rg(b);
  return t.apply(t.val(a).cwiseProduct(t.val(b)), rg, [a, b](Tape<S>& t, typename Tape<S>::Node& n) {
    t.acc(a, n.grad.cwiseProduct(t.val(b)));
    t.acc(b, n.grad.cwiseProduct(t.val(a)));
  });
}

// y = alpha*x + beta
template <typename S>
int affine(Tape<S>& t, int x, S alpha, S beta = S(0)) {
  return t.apply((t.val(x).array() * alpha + beta).matrix(), t.rg(x),
                 [x, alpha](Tape<S>& t, typename Tape<S>::Node& n) { t.acc(x, n.grad * alpha); });
}

template <typename S>
int matmul(Tape<S>& t, int a, int b) {
  bool rg = t.rg(a) || t.rg(b);
  MatX<S> y;
  y.noalias() = t.val(a) * t.val(b);
  return t.apply(std::move(y), rg, [a, b](Tape<S>& t, typename Tape<S>::Node& n) {
    if (t.rg(a)) {
      MatX<S> ga;
      ga.noalias() = n.grad * t.val(b).transpose();
      t.acc(a, ga);
    }
    if (t.rg(b)) {
      MatX<S> gb;
      gb.noalias() = t.val(a).transpose() * n.grad;
      t.acc(b, gb);
    }
  });
}

// y = W x + bias (bias broadcast over columns)
template <typename S>
int linear(Tape<S>& t, int w, int x, int bias) {
  bool rg = t.rg(w) || t.rg(x) || t.rg(bias);
  MatX<S> y;
  y.noalias() = t.val(w) * t.val(x);
  y.colwise() += VecX<S>(t.val(bias).col(0));
  return t.apply(std::move(y), rg, [w, x, bias](Tape<S>& t, typename Tape<S>::Node& n) {
    if (t.rg(w)) {
      MatX<S> gw;
      gw.noalias() = n.grad * t.val(x).transpose();
      t.acc(w, gw);
    }
    if (t.rg(x)) {
      MatX<S> gx;
      gx.noalias() = t.val(w).transpose() * n.grad;
      t.acc(x, gx);
    }
    t.acc(bias, n.grad.rowwise().sum());
  });
}

// ---------------------------------------------------------------------------
// nonlinearities

template <typename S>
int silu(Tape<S>& t, int x) {
  const MatX<S>& v = t.val(x);
  MatX<S> sg = (S(1) / (S(1) + (-v.array()).exp())).matrix();
  MatX<S> y = v.cwiseProduct(sg);
  return t.apply(std::move(y), t.rg(x), [x, sg](Tape<S>& t, typename Tape<S>::Node& n) {
    const auto& v = t.val(x).array();
    auto s = sg.array();
    t.acc(x, (n.grad.array() * (s + v * s * (S(1) - s))).matrix());
  });
}

template <typename S>
int sigmoid(Tape<S>& t, int x) {
  MatX<S> y = (S(1) / (S(1) + (-t.val(x).array()).exp())).matrix();
  return t.apply(y, t.rg(x), [x, y](Tape<S>& t, typename Tape<S>::Node& n) {
    t.acc(x, (n.grad.array() * y.array() * (S(1) - y.array())).matrix());
  });
}

// ---------------------------------------------------------------------------
// shape plumbing

template <typename S>
int concat_rows(Tape<S>& t, int a, int b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  MatX<S> y(va.rows() + vb.rows(), va.cols());
  y.topRows(va.rows()) = va;
  y.bottomRows(vb.rows()) = vb;
  Eigen::Index ra = va.rows(), rb = vb.rows();
  return t.apply(std::move(y), t.rg(a) || t.rg(b),
                 [a, b, ra, rb](Tape<S>& t, typename Tape<S>::Node& n) {
                   t.acc(a, n.grad.topRows(ra));
                   t.acc(b, n.grad.bottomRows(rb));
                 });
}

template <typename S>
int slice_rows(Tape<S>& t, int x, Eigen::Index r0, Eigen::Index len) {
  MatX<S> y = t.val(x).middleRows(r0, len);
  Eigen::Index rows = t.val(x).rows(), cols = t.val(x).cols();
  return t.apply(std::move(y), t.rg(x), [x, r0, len, rows, cols](Tape<S>& t, typename Tape<S>::Node& n) {
    MatX<S> g = MatX<S>::Zero(rows, cols);
    g.middleRows(r0, len) = n.grad;
    t.acc(x, g);
  });
}

// Concatenate two token sets per sample: a is (D x B*Na), b is (D x B*Nb),
// result (D x B*(Na+Nb)) with each sample's a-tokens followed by its b-tokens.
template <typename S>
int concat_tokens(Tape<S>& t, int a, int b, int B, int Na, int Nb) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  MatX<S> y(va.rows(), Eigen::Index(B) * (Na + Nb));
  for (int s = 0; s < B; ++s) {
    y.middleCols(Eigen::Index(s) * (Na + Nb), Na) = va.middleCols(Eigen::Index(s) * Na, Na);
    y.middleCols(Eigen::Index(s) * (Na + Nb) + Na, Nb) = vb.middleCols(Eigen::Index(s) * Nb, Nb);
  }
  return t.apply(std::move(y), t.rg(a) || t.rg(b),
                 [a, b, B, Na, Nb](Tape<S>& t, typename Tape<S>::Node& n) {
                   if (t.rg(a)) {
                     MatX<S> ga(n.grad.rows(), Eigen::Index(B) * Na);
                     for (int s = 0; s < B; ++s)
                       ga.middleCols(Eigen::Index(s) * Na, Na) =
                           n.grad.middleCols(Eigen::Index(s) * (Na + Nb), Na);
                     t.acc(a, ga);
                   }
                   if (t.rg(b)) {
                     MatX<S> gb(n.grad.rows(), Eigen::Index(B) * Nb);
                     for (int s = 0; s < B; ++s)
                       gb.middleCols(Eigen::Index(s) * Nb, Nb) =
                           n.grad.middleCols(Eigen::Index(s) * (Na + Nb) + Na, Nb);
                     t.acc(b, gb);
                   }
                 });
}

// (C x B*HW) -> (C*HW x B); stacks each sample's spatial columns into one column.
template <typename S>
int flatten_spatial(Tape<S>& t, int x, int C, int HW, int B) {
  const auto& v = t.val(x);
  MatX<S> y(Eigen::Index(C) * HW, B);
  for (int b = 0; b < B; ++b)
    for (int p = 0; p < HW; ++p)
      y.col(b).segment(Eigen::Index(p) * C, C) = v.col(Eigen::Index(b) * HW + p);
  return t.apply(std::move(y), t.rg(x), [x, C, HW, B](Tape<S>& t, typename Tape<S>::Node& n) {
    MatX<S> g(C, Eigen::Index(B) * HW);
    for (int b = 0; b < B; ++b)
      for (int p = 0; p < HW; ++p)
        g.col(Eigen::Index(b) * HW + p) = n.grad.col(b).segment(Eigen::Index(p) * C, C);
    t.acc(x, g);
  });
}

// (D*N x B) -> (D x B*N); inverse direction used to split an encoder's flat
// output into N tokens per sample.
template <typename S>
int split_tokens(Tape<S>& t, int x, int D, int N, int B) {
  const auto& v = t.val(x);
  MatX<S> y(D, Eigen::Index(B) * N);
  for (int b = 0; b < B; ++b)
    for (int n = 0; n < N; ++n)
      y.col(Eigen::Index(b) * N + n) = v.col(b).segment(Eigen::Index(n) * D, D);
  return t.apply(std::move(y), t.rg(x), [x, D, N, B](Tape<S>& t, typename Tape<S>::Node& n_) {
    MatX<S> g(Eigen::Index(D) * N, B);
    for (int b = 0; b < B; ++b)
      for (int n = 0; n < N; ++n)
        g.col(b).segment(Eigen::Index(n) * D, D) = n_.grad.col(Eigen::Index(b) * N + n);
    t.acc(x, g);
  });
}

// ---------------------------------------------------------------------------
// convolution via im2col

struct ConvDims {
  int C, H, W, B;       // input
  int Co, k, stride, pad;
  int OH() const { return (H + 2 * pad - k) / stride + 1; }
  int OW() const { return (W + 2 * pad - k) / stride + 1; }
};

template <typename S>
MatX<S> im2col(const MatX<S>& x, const ConvDims& d) {
  const int OH = d.OH(), OW = d.OW();
  MatX<S> P = MatX<S>::Zero(Eigen::Index(d.C) * d.k * d.k, Eigen::Index(d.B) * OH * OW);
  for (int ky = 0; ky < d.k; ++ky)
    for (int kx = 0; kx < d.k; ++kx) {
      Eigen::Index row0 = Eigen::Index(d.C) * (ky * d.k + kx);
      for (int b = 0; b < d.B; ++b)
        for (int oy = 0; oy < OH; ++oy) {
          int sy = oy * d.stride - d.pad + ky;
          if (sy < 0 || sy >= d.H) continue;
          Eigen::Index pcol0 = (Eigen::Index(b) * OH + oy) * OW;
          Eigen::Index xcol0 = (Eigen::Index(b) * d.H + sy) * d.W;
          if (d.stride == 1) {
            int ox_lo = std::max(0, d.pad - kx);
            int ox_hi = std::min(OW, d.W + d.pad - kx);
            if (ox_hi <= ox_lo) continue;
            P.block(row0, pcol0 + ox_lo, d.C, ox_hi - ox_lo) =
                x.block(0, xcol0 + ox_lo - d.pad + kx, d.C, ox_hi - ox_lo);
          } else {
            for (int ox = 0; ox < OW; ++ox) {
              int sx = ox * d.stride - d.pad + kx;
              if (sx < 0 || sx >= d.W) continue;
              P.col(pcol0 + ox).segment(row0, d.C) = x.col(xcol0 + sx);
            }
          }
        }
    }
  return P;
}

template <typename S>
void col2im_add(MatX<S>& dx, const MatX<S>& dP, const ConvDims& d) {
  const int OH = d.OH(), OW = d.OW();
  for (int ky = 0; ky < d.k; ++ky)
    for (int kx = 0; kx < d.k; ++kx) {
      Eigen::Index row0 = Eigen::Index(d.C) * (ky * d.k + kx);
      for (int b = 0; b < d.B; ++b)
        for (int oy = 0; oy < OH; ++oy) {
          int sy = oy * d.stride - d.pad + ky;
          if (sy < 0 || sy >= d.H) continue;
          Eigen::Index pcol0 = (Eigen::Index(b) * OH + oy) * OW;
          Eigen::Index xcol0 = (Eigen::Index(b) * d.H + sy) * d.W;
          if (d.stride == 1) {
            int ox_lo = std::max(0, d.pad - kx);
            int ox_hi = std::min(OW, d.W + d.pad - kx);
            if (ox_hi <= ox_lo) continue;
            dx.block(0, xcol0 + ox_lo - d.pad + kx, d.C, ox_hi - ox_lo) +=
                dP.block(row0, pcol0 + ox_lo, d.C, ox_hi - ox_lo);
          } else {
            for (int ox = 0; ox < OW; ++ox) {
              int sx = ox * d.stride - d.pad + kx;
              if (sx < 0 || sx >= d.W) continue;
              dx.col(xcol0 + sx) += dP.col(pcol0 + ox).segment(row0, d.C);
            }
          }
        }
    }
}

// w is (Co x C*k*k), bias (Co x 1). Patches are recomputed in the backward
// pass instead of cached; the gather is much cheaper than holding every
// layer's im2col matrix across the step.
template <typename S>
int conv2d(Tape<S>& t, int x, int w, int bias, const ConvDims& d) {
  MatX<S> P = im2col(t.val(x), d);
  MatX<S> y;
  y.noalias() = t.val(w) * P;
  y.colwise() += VecX<S>(t.val(bias).col(0));
  bool rg = t.rg(x) || t.rg(w) || t.rg(bias);
  return t.apply(std::move(y), rg, [x, w, bias, d](Tape<S>& t, typename Tape<S>::Node& n) {
    if (t.rg(w)) {
      MatX<S> P = im2col(t.val(x), d);
      MatX<S> gw;
      gw.noalias() = n.grad * P.transpose();
      t.acc(w, gw);
    }
    t.acc(bias, n.grad.rowwise().sum());
    if (t.rg(x)) {
      MatX<S> dP;
      dP.noalias() = t.val(w).transpose() * n.grad;
      MatX<S> dx = MatX<S>::Zero(d.C, Eigen::Index(d.B) * d.H * d.W);
      col2im_add(dx, dP, d);
      t.acc(x, dx);
    }
  });
}

// ---------------------------------------------------------------------------
// resampling

template <typename S>
int upsample2_nearest(Tape<S>& t, int x, int C, int H, int W, int B) {
  const auto& v = t.val(x);
  MatX<S> y(C, Eigen::Index(B) * 4 * H * W);
  for (int b = 0; b < B; ++b)
    for (int yy = 0; yy < 2 * H; ++yy)
      for (int xx = 0; xx < 2 * W; ++xx)
        y.col((Eigen::Index(b) * 2 * H + yy) * 2 * W + xx) =
            v.col((Eigen::Index(b) * H + yy / 2) * W + xx / 2);
  return t.apply(std::move(y), t.rg(x), [x, C, H, W, B](Tape<S>& t, typename Tape<S>::Node& n) {
    MatX<S> g = MatX<S>::Zero(C, Eigen::Index(B) * H * W);
    for (int b = 0; b < B; ++b)
      for (int yy = 0; yy < 2 * H; ++yy)
        for (int xx = 0; xx < 2 * W; ++xx)
          g.col((Eigen::Index(b) * H + yy / 2) * W + xx / 2) +=
              n.grad.col((Eigen::Index(b) * 2 * H + yy) * 2 * W + xx);
    t.acc(x, g);
  });
}

namespace detail {
// Half-pixel-center 2x upsampling taps: out[2i] <- 0.75*in[i] + 0.25*in[i-1].
inline void bilin2_taps(int n_in, int i_out, int& s0, int& s1, double& w0) {
  int i = i_out / 2;
  if (i_out % 2 == 0) {
    s0 = i;
    s1 = std::max(0, i - 1);
    w0 = 0.75;
  } else {
    s0 = i;
    s1 = std::min(n_in - 1, i + 1);
    w0 = 0.75;
  }
}
}  // namespace detail

template <typename S>
int upsample2_bilinear(Tape<S>& t, int x, int C, int H, int W, int B) {
  const auto& v = t.val(x);
  MatX<S> y(C, Eigen::Index(B) * 4 * H * W);
  for (int b = 0; b < B; ++b)
    for (int oy = 0; oy < 2 * H; ++oy) {
      int ys0, ys1;
      double wy;
      detail::bilin2_taps(H, oy, ys0, ys1, wy);
      for (int ox = 0; ox < 2 * W; ++ox) {
        int xs0, xs1;
        double wx;
        detail::bilin2_taps(W, ox, xs0, xs1, wx);
        auto src = [&](int yy, int xx) { return v.col((Eigen::Index(b) * H + yy) * W + xx); };
        y.col((Eigen::Index(b) * 2 * H + oy) * 2 * W + ox) =
            S(wy * wx) * src(ys0, xs0) + S(wy * (1 - wx)) * src(ys0, xs1) +
            S((1 - wy) * wx) * src(ys1, xs0) + S((1 - wy) * (1 - wx)) * src(ys1, xs1);
      }
    }
  return t.apply(std::move(y), t.rg(x), [x, C, H, W, B](Tape<S>& t, typename Tape<S>::Node& n) {
    MatX<S> g = MatX<S>::Zero(C, Eigen::Index(B) * H * W);
    for (int b = 0; b < B; ++b)
      for (int oy = 0; oy < 2 * H; ++oy) {
        int ys0, ys1;
        double wy;
        detail::bilin2_taps(H, oy, ys0, ys1, wy);
        for (int ox = 0; ox < 2 * W; ++ox) {
          int xs0, xs1;
          double wx;
          detail::bilin2_taps(W, ox, xs0, xs1, wx);
          auto gcol = n.grad.col((Eigen::Index(b) * 2 * H + oy) * 2 * W + ox);
          auto dst = [&](int yy, int xx) -> decltype(g.col(0)) {
            return g.col((Eigen::Index(b) * H + yy) * W + xx);
          };
          dst(ys0, xs0) += S(wy * wx) * gcol;
          dst(ys0, xs1) += S(wy * (1 - wx)) * gcol;
          dst(ys1, xs0) += S((1 - wy) * wx) * gcol;
          dst(ys1, xs1) += S((1 - wy) * (1 - wx)) * gcol;
        }
      }
    t.acc(x, g);
  });
}

template <typename S>
int avgpool2(Tape<S>& t, int x, int C, int H, int W, int B) {
  const auto& v = t.val(x);
  int OH = H / 2, OW = W / 2;
  MatX<S> y(C, Eigen::Index(B) * OH * OW);
  for (int b = 0; b < B; ++b)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        auto src = [&](int yy, int xx) { return v.col((Eigen::Index(b) * H + yy) * W + xx); };
        y.col((Eigen::Index(b) * OH + oy) * OW + ox) =
            S(0.25) * (src(2 * oy, 2 * ox) + src(2 * oy, 2 * ox + 1) + src(2 * oy + 1, 2 * ox) +
                       src(2 * oy + 1, 2 * ox + 1));
      }
  return t.apply(std::move(y), t.rg(x), [x, C, H, W, B](Tape<S>& t, typename Tape<S>::Node& n) {
    int OH = H / 2, OW = W / 2;
    MatX<S> g(C, Eigen::Index(B) * H * W);
    for (int b = 0; b < B; ++b)
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx)
          g.col((Eigen::Index(b) * H + yy) * W + xx) =
              S(0.25) * n.grad.col((Eigen::Index(b) * OH + yy / 2) * OW + xx / 2);
    t.acc(x, g);
  });
}

// ---------------------------------------------------------------------------
// normalization & bias broadcast

// Per-column RMS over channels with a learned per-channel gain.
template <typename S>
int rms_norm(Tape<S>& t, int x, int gain, S eps = S(1e-5)) {
  const auto& v = t.val(x);
  VecX<S> g = t.val(gain).col(0);
  Eigen::Index C = v.rows();
  Eigen::Array<S, 1, Eigen::Dynamic> r =
      ((v.array().square().colwise().sum() / S(C)) + eps).sqrt();
  MatX<S> xhat = (v.array().rowwise() / r).matrix();
  MatX<S> y = (xhat.array().colwise() * g.array()).matrix();
  return t.apply(std::move(y), t.rg(x) || t.rg(gain),
                 [x, gain, xhat, r](Tape<S>& t, typename Tape<S>::Node& n) {
                   Eigen::Index C = xhat.rows();
                   VecX<S> g = t.val(gain).col(0);
                   if (t.rg(gain)) t.acc(gain, xhat.cwiseProduct(n.grad).rowwise().sum());
                   if (t.rg(x)) {
                     MatX<S> u = (n.grad.array().colwise() * g.array()).matrix();
                     Eigen::Array<S, 1, Eigen::Dynamic> proj =
                         (u.cwiseProduct(xhat)).array().colwise().sum() / S(C);
                     MatX<S> dx =
                         ((u.array() - xhat.array().rowwise() * proj).rowwise() / r).matrix();
                     t.acc(x, dx);
                   }
                 });
}

// x is (C x B*HW), bias (C x B): adds each sample's bias over its spatial columns.
template <typename S>
int add_channel_bias(Tape<S>& t, int x, int bias, int HW) {
  const auto& v = t.val(x);
  const auto& bv = t.val(bias);
  int B = int(bv.cols());
  MatX<S> y = v;
  for (int b = 0; b < B; ++b) y.middleCols(Eigen::Index(b) * HW, HW).colwise() += VecX<S>(bv.col(b));
  return t.apply(std::move(y), t.rg(x) || t.rg(bias),
                 [x, bias, HW, B](Tape<S>& t, typename Tape<S>::Node& n) {
                   t.acc(x, n.grad);
                   if (t.rg(bias)) {
                     MatX<S> gb(n.grad.rows(), B);
                     for (int b = 0; b < B; ++b)
                       gb.col(b) = n.grad.middleCols(Eigen::Index(b) * HW, HW).rowwise().sum();
                     t.acc(bias, gb);
                   }
                 });
}

// ---------------------------------------------------------------------------
// attention (single head, per-sample blocks)

// q: (A x B*M), k/v: (A x B*N) -> (A x B*M). Softmax over the N keys of the
// same sample; scale 1/sqrt(A).
template <typename S>
int attend(Tape<S>& t, int q, int k, int v, int B) {
  const auto& Q = t.val(q);
  const auto& K = t.val(k);
  const auto& V = t.val(v);
  Eigen::Index A = Q.rows();
  Eigen::Index M = Q.cols() / B, N = K.cols() / B;
  S scale = S(1) / std::sqrt(S(A));
  auto soft = std::make_shared<std::vector<MatX<S>>>();
  soft->reserve(size_t(B));
  MatX<S> O(A, Q.cols());
  for (int b = 0; b < B; ++b) {
    MatX<S> Sc;
    Sc.noalias() = K.middleCols(b * N, N).transpose() * Q.middleCols(b * M, M);
    Sc *= scale;
    // stable softmax per column
    Eigen::Array<S, 1, Eigen::Dynamic> mx = Sc.colwise().maxCoeff();
    MatX<S> E = (Sc.array().rowwise() - mx).exp().matrix();
    Eigen::Array<S, 1, Eigen::Dynamic> Z = E.array().colwise().sum();
    MatX<S> Aw = (E.array().rowwise() / Z).matrix();
    O.middleCols(b * M, M).noalias() = V.middleCols(b * N, N) * Aw;
    soft->push_back(std::move(Aw));
  }
  bool rg = t.rg(q) || t.rg(k) || t.rg(v);
  return t.apply(std::move(O), rg, [q, k, v, B, M, N, scale, soft](Tape<S>& t, typename Tape<S>::Node& n) {
    const auto& Q = t.val(q);
    const auto& K = t.val(k);
    const auto& V = t.val(v);
    MatX<S> gq = MatX<S>::Zero(Q.rows(), Q.cols());
    MatX<S> gk = MatX<S>::Zero(K.rows(), K.cols());
    MatX<S> gv = MatX<S>::Zero(V.rows(), V.cols());
    for (int b = 0; b < B; ++b) {
      const MatX<S>& Aw = (*soft)[size_t(b)];
      auto gO = n.grad.middleCols(b * M, M);
      if (t.rg(v)) gv.middleCols(b * N, N).noalias() = gO * Aw.transpose();
      MatX<S> dA;
      dA.noalias() = V.middleCols(b * N, N).transpose() * gO;
      Eigen::Array<S, 1, Eigen::Dynamic> dot = (Aw.cwiseProduct(dA)).array().colwise().sum();
      MatX<S> dS = Aw.cwiseProduct((dA.array().rowwise() - dot).matrix()) * scale;
      if (t.rg(q)) gq.middleCols(b * M, M).noalias() = K.middleCols(b * N, N) * dS;
      if (t.rg(k)) gk.middleCols(b * N, N).noalias() = Q.middleCols(b * M, M) * dS.transpose();
    }
    t.acc(q, gq);
    t.acc(k, gk);
    t.acc(v, gv);
  });
}

// ---------------------------------------------------------------------------
// reductions & losses

template <typename S>
int sum_all(Tape<S>& t, int x) {
  MatX<S> y(1, 1);
  y(0, 0) = t.val(x).sum();
  Eigen::Index r = t.val(x).rows(), c = t.val(x).cols();
  return t.apply(std::move(y), t.rg(x), [x, r, c](Tape<S>& t, typename Tape<S>::Node& n) {
    t.acc(x, MatX<S>::Constant(r, c, n.grad(0, 0)));
  });
}

template <typename S>
int mean_all(Tape<S>& t, int x) {
  Eigen::Index sz = t.val(x).size();
  return affine(t, sum_all(t, x), S(1) / S(sz));
}

// mean over every element of (a-b)^2
template <typename S>
int mse_mean(Tape<S>& t, int a, int b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  MatX<S> y(1, 1);
  y(0, 0) = (va - vb).squaredNorm() / S(va.size());
  return t.apply(std::move(y), t.rg(a) || t.rg(b), [a, b](Tape<S>& t, typename Tape<S>::Node& n) {
    const auto& va = t.val(a);
    const auto& vb = t.val(b);
    S c = S(2) * n.grad(0, 0) / S(va.size());
    if (t.rg(a)) t.acc(a, (c * (va - vb)));
    if (t.rg(b)) t.acc(b, (c * (vb - va)));
  });
}

// Per-column cosine similarity: a,b (D x B) -> (1 x B).
template <typename S>
int cosine_cols(Tape<S>& t, int a, int b) {
  const auto& va = t.val(a);
  const auto& vb = t.val(b);
  Eigen::Index B = va.cols();
  MatX<S> y(1, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    S na = std::max(va.col(j).norm(), S(1e-12)), nb = std::max(vb.col(j).norm(), S(1e-12));
    y(0, j) = va.col(j).dot(vb.col(j)) / (na * nb);
  }
  return t.apply(std::move(y), t.rg(a) || t.rg(b), [a, b](Tape<S>& t, typename Tape<S>::Node& n) {
    const auto& va = t.val(a);
    const auto& vb = t.val(b);
    MatX<S> ga = MatX<S>::Zero(va.rows(), va.cols());
    MatX<S> gb = MatX<S>::Zero(vb.rows(), vb.cols());
    for (Eigen::Index j = 0; j < va.cols(); ++j) {
      S na = std::max(va.col(j).norm(), S(1e-12)), nb = std::max(vb.col(j).norm(), S(1e-12));
      S c = va.col(j).dot(vb.col(j)) / (na * nb);
      S g = n.grad(0, j);
      ga.col(j) = g * (vb.col(j) / (na * nb) - c * va.col(j) / (na * na));
      gb.col(j) = g * (va.col(j) / (na * nb) - c * vb.col(j) / (nb * nb));
    }
    t.acc(a, ga);
    t.acc(b, gb);
  });
}

// L2-normalize each column (with norm floor).
template <typename S>
int l2_normalize_cols(Tape<S>& t, int x, S eps = S(1e-8)) {
  const auto& v = t.val(x);
  Eigen::Array<S, 1, Eigen::Dynamic> norms =
      (v.array().square().colwise().sum() + eps * eps).sqrt();
  MatX<S> y = (v.array().rowwise() / norms).matrix();
  return t.apply(y, t.rg(x), [x, y, norms](Tape<S>& t, typename Tape<S>::Node& n) {
    Eigen::Array<S, 1, Eigen::Dynamic> dots = (y.cwiseProduct(n.grad)).array().colwise().sum();
    MatX<S> dx = (((n.grad.array() - y.array().rowwise() * dots)).rowwise() / norms).matrix();
    t.acc(x, dx);
  });
}

// Wing loss between pred and target (same shape), summed over elements and
// divided by the number of columns (per-sample average).
template <typename S>
int wing_loss(Tape<S>& t, int pred, int target, S omega, S epsw) {
  const auto& p = t.val(pred);
  const auto& q = t.val(target);
  const S Cw = omega - omega * std::log(S(1) + omega / epsw);
  MatX<S> d = p - q;
  S acc = 0;
  for (Eigen::Index j = 0; j < d.cols(); ++j)
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      S ad = std::abs(d(i, j));
      acc += ad < omega ? omega * std::log(S(1) + ad / epsw) : ad - Cw;
    }
  MatX<S> y(1, 1);
  y(0, 0) = acc / S(d.cols());
  return t.apply(std::move(y), t.rg(pred) || t.rg(target),
                 [pred, target, omega, epsw](Tape<S>& t, typename Tape<S>::Node& n) {
                   const auto& p = t.val(pred);
                   const auto& q = t.val(target);
                   S g = n.grad(0, 0) / S(p.cols());
                   MatX<S> dd(p.rows(), p.cols());
                   for (Eigen::Index j = 0; j < p.cols(); ++j)
                     for (Eigen::Index i = 0; i < p.rows(); ++i) {
                       S d = p(i, j) - q(i, j);
                       S ad = std::abs(d);
                       S sg = d > 0 ? S(1) : (d < 0 ? S(-1) : S(0));
                       dd(i, j) = g * (ad < omega ? omega / (epsw + ad) * sg : sg);
                     }
                   if (t.rg(pred)) t.acc(pred, dd);
                   if (t.rg(target)) t.acc(target, -dd);
                 });
}

// Mean cross-entropy with integer labels; logits (K x B).
template <typename S>
int softmax_xent(Tape<S>& t, int logits, const std::vector<int>& labels) {
  const auto& L = t.val(logits);
  Eigen::Index B = L.cols();
  MatX<S> P(L.rows(), B);
  S acc = 0;
  for (Eigen::Index j = 0; j < B; ++j) {
    S mx = L.col(j).maxCoeff();
    VecX<S> e = (L.col(j).array() - mx).exp().matrix();
    S Z = e.sum();
    P.col(j) = e / Z;
    acc -= std::log(std::max(P(labels[size_t(j)], j), S(1e-30)));
  }
  MatX<S> y(1, 1);
  y(0, 0) = acc / S(B);
  return t.apply(std::move(y), t.rg(logits), [logits, labels, P](Tape<S>& t, typename Tape<S>::Node& n) {
    MatX<S> g = P;
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(labels[size_t(j)], j) -= S(1);
    t.acc(logits, g * (n.grad(0, 0) / S(g.cols())));
  });
}

}  // namespace emoji::nn
