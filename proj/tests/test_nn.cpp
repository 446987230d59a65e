#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "emoji/nn/params.hpp"
#include "emoji/nn/tape.hpp"

#include "support/testutil.hpp"

#include <filesystem>

using namespace emoji;
using namespace emoji::nn;
using emoji::test::fd_check;

namespace {
dmat rnd(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  return rng.normal_mat<double>(r, c, scale);
}
}  // namespace

TEST_CASE("gradients: arithmetic, activations, reductions") {
  Rng rng(11);
  std::vector<dmat> in = {rnd(rng, 4, 5), rnd(rng, 4, 5)};

  auto chk = [&](auto build, size_t which, double tol = 1e-6) {
    CHECK(fd_check(build, in, which, 20, 99) < tol);
  };

  chk([](Tape<double>& t, const std::vector<int>& v) { return mean_all(t, add(t, v[0], v[1])); }, 0);
  chk([](Tape<double>& t, const std::vector<int>& v) { return mean_all(t, sub(t, v[0], v[1])); }, 1);
  chk([](Tape<double>& t, const std::vector<int>& v) { return sum_all(t, cmul(t, v[0], v[1])); }, 0);
  chk([](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, silu(t, affine(t, v[0], 1.7, -0.3)));
  }, 0);
  chk([](Tape<double>& t, const std::vector<int>& v) { return sum_all(t, sigmoid(t, v[0])); }, 0);
  chk([](Tape<double>& t, const std::vector<int>& v) { return mse_mean(t, v[0], v[1]); }, 0);
  chk([](Tape<double>& t, const std::vector<int>& v) { return mse_mean(t, v[0], v[1]); }, 1);
}

TEST_CASE("gradients: matmul, linear, norms, cosine, wing, xent") {
  Rng rng(12);
  std::vector<dmat> in = {rnd(rng, 3, 4), rnd(rng, 4, 6), rnd(rng, 3, 1), rnd(rng, 3, 6)};

  auto mm = [](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, matmul(t, v[0], v[1]));
  };
  CHECK(fd_check(mm, in, 0, 12, 1) < 1e-6);
  CHECK(fd_check(mm, in, 1, 20, 2) < 1e-6);

  auto lin = [](Tape<double>& t, const std::vector<int>& v) {
    return mse_mean(t, linear(t, v[0], v[1], v[2]), v[3]);
  };
  for (size_t w : {0u, 1u, 2u}) CHECK(fd_check(lin, in, w, 12, 3) < 1e-6);

  std::vector<dmat> nin = {rnd(rng, 6, 5), (dmat(6, 1) << 1.2, 0.8, 1.0, 0.5, 1.5, 0.9).finished()};
  auto nrm = [](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, rms_norm(t, v[0], v[1]));
  };
  CHECK(fd_check(nrm, nin, 0, 30, 4) < 1e-6);
  CHECK(fd_check(nrm, nin, 1, 6, 5) < 1e-6);

  std::vector<dmat> cin = {rnd(rng, 8, 3), rnd(rng, 8, 3)};
  auto cos = [](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, cosine_cols(t, v[0], v[1]));
  };
  CHECK(fd_check(cos, cin, 0, 24, 6) < 1e-6);
  CHECK(fd_check(cos, cin, 1, 24, 7) < 1e-6);

  auto l2n = [](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, cmul(t, l2_normalize_cols(t, v[0]), v[1]));
  };
  CHECK(fd_check(l2n, cin, 0, 24, 8) < 1e-6);

  // wing: keep |d| away from the omega kink so FD is clean
  std::vector<dmat> win = {rnd(rng, 5, 4, 3.0), rnd(rng, 5, 4, 3.0)};
  auto wing = [](Tape<double>& t, const std::vector<int>& v) {
    return wing_loss(t, v[0], v[1], 10.0, 2.0);
  };
  CHECK(fd_check(wing, win, 0, 20, 9) < 1e-5);
  CHECK(fd_check(wing, win, 1, 20, 10) < 1e-5);

  std::vector<dmat> xin = {rnd(rng, 7, 5)};
  std::vector<int> labels = {0, 3, 6, 2, 2};
  auto xe = [labels](Tape<double>& t, const std::vector<int>& v) {
    return softmax_xent(t, v[0], labels);
  };
  CHECK(fd_check(xe, xin, 0, 35, 11) < 1e-6);
}

TEST_CASE("wing loss matches closed form and has the advertised kink constant") {
  // omega=10, eps=2: C = omega - omega*ln(1+omega/eps)
  double omega = 10.0, eps = 2.0;
  double C = omega - omega * std::log(1.0 + omega / eps);
  Tape<double> t;
  dmat p(1, 1), q(1, 1);
  q(0, 0) = 0.0;
  p(0, 0) = 3.0;  // |d| < omega branch
  int a = t.leaf(p), b = t.leaf(q);
  CHECK(t.val(wing_loss(t, a, b, omega, eps))(0, 0) ==
        doctest::Approx(omega * std::log(1 + 3.0 / eps)).epsilon(1e-12));
  p(0, 0) = 25.0;  // linear branch
  int a2 = t.leaf(p);
  CHECK(t.val(wing_loss(t, a2, b, omega, eps))(0, 0) == doctest::Approx(25.0 - C).epsilon(1e-12));
  // continuity at the kink
  p(0, 0) = omega - 1e-9;
  int a3 = t.leaf(p);
  double lo = t.val(wing_loss(t, a3, b, omega, eps))(0, 0);
  p(0, 0) = omega + 1e-9;
  int a4 = t.leaf(p);
  double hi = t.val(wing_loss(t, a4, b, omega, eps))(0, 0);
  CHECK(std::abs(hi - lo) < 1e-6);
}

TEST_CASE("conv2d matches a naive direct convolution") {
  Rng rng(13);
  ConvDims d{3, 5, 6, 2, 4, 3, 1, 1};  // C,H,W,B,Co,k,stride,pad
  dmat x = rnd(rng, 3, Eigen::Index(2) * 5 * 6);
  dmat w = rnd(rng, 4, Eigen::Index(3) * 9);
  dmat b = rnd(rng, 4, 1);

  Tape<double> t;
  int xi = t.leaf(x), wi = t.leaf(w), bi = t.leaf(b);
  const dmat& y = t.val(conv2d(t, xi, wi, bi, d));

  int OH = d.OH(), OW = d.OW();
  REQUIRE(y.cols() == Eigen::Index(d.B) * OH * OW);
  for (int bb = 0; bb < d.B; ++bb)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox)
        for (int co = 0; co < d.Co; ++co) {
          double acc = b(co, 0);
          for (int ky = 0; ky < d.k; ++ky)
            for (int kx = 0; kx < d.k; ++kx) {
              int sy = oy * d.stride - d.pad + ky, sx = ox * d.stride - d.pad + kx;
              if (sy < 0 || sy >= d.H || sx < 0 || sx >= d.W) continue;
              for (int ci = 0; ci < d.C; ++ci)
                acc += w(co, (ky * d.k + kx) * d.C + ci) *
                       x(ci, (Eigen::Index(bb) * d.H + sy) * d.W + sx);
            }
          CHECK(y(co, (Eigen::Index(bb) * OH + oy) * OW + ox) == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("gradients: conv2d stride 1 and 2") {
  Rng rng(14);
  for (int stride : {1, 2}) {
    ConvDims d{2, 4, 4, 2, 3, 3, stride, 1};
    std::vector<dmat> in = {rnd(rng, 2, Eigen::Index(2) * 16), rnd(rng, 3, 18), rnd(rng, 3, 1)};
    auto build = [d](Tape<double>& t, const std::vector<int>& v) {
      return mean_all(t, silu(t, conv2d(t, v[0], v[1], v[2], d)));
    };
    for (size_t w : {0u, 1u, 2u}) CHECK(fd_check(build, in, w, 16, 20 + stride) < 1e-6);
  }
}

TEST_CASE("attend matches a naive softmax attention and is differentiable") {
  Rng rng(15);
  int A = 4, B = 2, M = 3, N = 5;
  dmat Q = rnd(rng, A, Eigen::Index(B) * M), K = rnd(rng, A, Eigen::Index(B) * N),
       V = rnd(rng, A, Eigen::Index(B) * N);
  Tape<double> t;
  int qi = t.leaf(Q), ki = t.leaf(K), vi = t.leaf(V);
  const dmat& O = t.val(attend(t, qi, ki, vi, B));
  double scale = 1.0 / std::sqrt(double(A));
  for (int b = 0; b < B; ++b)
    for (int m = 0; m < M; ++m) {
      dvec sc(N);
      for (int n = 0; n < N; ++n) sc(n) = scale * K.col(b * N + n).dot(Q.col(b * M + m));
      dvec e = (sc.array() - sc.maxCoeff()).exp().matrix();
      e /= e.sum();
      dvec o = dvec::Zero(A);
      for (int n = 0; n < N; ++n) o += e(n) * V.col(b * N + n);
      for (int a = 0; a < A; ++a) CHECK(O(a, b * M + m) == doctest::Approx(o(a)).epsilon(1e-10));
    }

  std::vector<dmat> in = {Q, K, V};
  auto build = [B](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, attend(t, v[0], v[1], v[2], B));
  };
  for (size_t w : {0u, 1u, 2u}) CHECK(fd_check(build, in, w, 20, 30 + w) < 1e-6);
}

TEST_CASE("gradients: shape ops, pooling, upsampling, channel bias") {
  Rng rng(16);
  int C = 3, H = 4, W = 4, B = 2;
  std::vector<dmat> in = {rnd(rng, C, Eigen::Index(B) * H * W), rnd(rng, C, B)};

  auto up_n = [=](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, upsample2_nearest(t, v[0], C, H, W, B));
  };
  CHECK(fd_check(up_n, in, 0, 20, 40) < 1e-6);

  auto up_b2 = [=](Tape<double>& t, const std::vector<int>& v) {
    int u = upsample2_bilinear(t, v[0], C, H, W, B);
    return mean_all(t, cmul(t, u, u));
  };
  CHECK(fd_check(up_b2, in, 0, 20, 41) < 1e-6);

  auto pool = [=](Tape<double>& t, const std::vector<int>& v) {
    int p = avgpool2(t, v[0], C, H, W, B);
    return mean_all(t, cmul(t, p, p));
  };
  CHECK(fd_check(pool, in, 0, 20, 42) < 1e-6);

  auto bias = [=](Tape<double>& t, const std::vector<int>& v) {
    return mean_all(t, silu(t, add_channel_bias(t, v[0], v[1], H * W)));
  };
  CHECK(fd_check(bias, in, 0, 20, 43) < 1e-6);
  CHECK(fd_check(bias, in, 1, 6, 44) < 1e-6);

  Tape<double> t2;
  int xi = t2.leaf(in[0], true);
  int f = flatten_spatial(t2, xi, C, H * W, B);
  int s = split_tokens(t2, f, C, H * W, B);
  CHECK(t2.val(mse_mean(t2, s, t2.constant(in[0])))(0, 0) == 0.0);

  auto cat = [=](Tape<double>& t, const std::vector<int>& v) {
    int c = concat_rows(t, v[0], v[0]);
    int sl = slice_rows(t, c, C, C);
    return mean_all(t, cmul(t, sl, sl));
  };
  CHECK(fd_check(cat, in, 0, 20, 45) < 1e-6);

  // concat_tokens roundtrip values
  dmat a = rnd(rng, 5, Eigen::Index(B) * 2), bt = rnd(rng, 5, Eigen::Index(B) * 3);
  Tape<double> t3;
  int ai = t3.leaf(a), bi = t3.leaf(bt);
  const dmat& ct = t3.val(concat_tokens(t3, ai, bi, B, 2, 3));
  REQUIRE(ct.cols() == Eigen::Index(B) * 5);
  CHECK(ct.col(0) == a.col(0));
  CHECK(ct.col(2) == bt.col(0));
  CHECK(ct.col(5) == a.col(2));
  CHECK(ct.col(7) == bt.col(3));
  std::vector<dmat> tin = {a, bt};
  auto catt = [=](Tape<double>& t, const std::vector<int>& v) {
    int c = concat_tokens(t, v[0], v[1], B, 2, 3);
    return mean_all(t, cmul(t, c, c));
  };
  CHECK(fd_check(catt, tin, 0, 16, 46) < 1e-6);
  CHECK(fd_check(catt, tin, 1, 16, 47) < 1e-6);
}

TEST_CASE("backward skips frozen subgraphs") {
  Rng rng(17);
  Tape<double> t;
  int frozen = t.leaf(rnd(rng, 3, 3), false);
  int hot = t.leaf(rnd(rng, 3, 3), true);
  int y = add(t, cmul(t, frozen, frozen), hot);
  int loss = mean_all(t, y);
  t.backward(loss);
  CHECK(t.has_grad(hot));
  CHECK(!t.has_grad(frozen));
}

TEST_CASE("ParamStore: adam determinism, freezing, save/load fingerprints") {
  Rng rng(18);
  auto make = [&]() {
    ParamStore<double> ps;
    Rng r(5);
    create_linear(ps, r, "enc.l1", 4, 3);
    create_conv(ps, r, "dec.c1", 2, 4, 3);
    create_gain(ps, "dec.g", 4);
    return ps;
  };
  ParamStore<double> a = make(), b = make();
  CHECK(a.fingerprint() == b.fingerprint());

  std::map<std::string, dmat> g;
  g["enc.l1.w"] = rnd(rng, 4, 3);
  g["dec.c1.w"] = rnd(rng, 2, 36);
  a.adam_step(g, 1e-2, 0.5, 0.999);
  b.adam_step(g, 1e-2, 0.5, 0.999);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.at("enc.l1.w").w != make().at("enc.l1.w").w);

  // frozen params must not move
  ParamStore<double> c = make();
  c.set_trainable("enc.", false);
  uint64_t before = c.fingerprint("enc.");
  c.adam_step(g, 1e-2, 0.5, 0.999);
  CHECK(c.fingerprint("enc.") == before);
  CHECK(c.fingerprint("dec.") != make().fingerprint("dec."));

  // toy quadratic: adam drives w toward target
  ParamStore<double> q;
  q.create("w", dmat::Zero(1, 1));
  for (int i = 0; i < 400; ++i) {
    std::map<std::string, dmat> gq;
    gq["w"] = 2.0 * (q.at("w").w.array() - 3.0).matrix();
    q.adam_step(gq, 0.05, 0.5, 0.999);
  }
  CHECK(q.at("w").w(0, 0) == doctest::Approx(3.0).epsilon(1e-3));

  auto path = (std::filesystem::temp_directory_path() / "emoji_ps.bin").string();
  Json meta;
  meta["note"] = "t";
  a.save(path, meta);
  Json meta2;
  auto loaded = ParamStore<double>::load(path, &meta2);
  CHECK(meta2["note"] == "t");
  CHECK(loaded.fingerprint() == a.fingerprint());
  // byte determinism of the checkpoint itself
  auto path2 = (std::filesystem::temp_directory_path() / "emoji_ps2.bin").string();
  a.save(path2, meta);
  CHECK(emoji::read_text_file(path) == emoji::read_text_file(path2));
}

TEST_CASE("Binder binds each param once and collects gradients") {
  ParamStore<double> ps;
  Rng r(6);
  create_linear(ps, r, "m.l", 3, 3);
  Tape<double> t;
  Binder<double> bind(t, ps, true);
  int w1 = bind("m.l.w"), w2 = bind("m.l.w");
  CHECK(w1 == w2);
  Rng rng(19);
  int x = t.leaf(rng.normal_mat<double>(3, 5));
  int y = linear(t, bind("m.l.w"), x, bind("m.l.b"));
  t.backward(mean_all(t, cmul(t, y, y)));
  auto g = bind.grads();
  CHECK(g.count("m.l.w") == 1);
  CHECK(g.count("m.l.b") == 1);
  CHECK(g["m.l.w"].norm() > 0);

  // frozen binder produces no gradient entries
  ParamStore<double> ps2;
  Rng r2(6);
  create_linear(ps2, r2, "m.l", 3, 3);
  Tape<double> t2;
  Binder<double> cold(t2, ps2, false);
  int x2 = t2.leaf(rng.normal_mat<double>(3, 5), true);
  int y2 = linear(t2, cold("m.l.w"), x2, cold("m.l.b"));
  t2.backward(mean_all(t2, cmul(t2, y2, y2)));
  CHECK(cold.grads().empty());
  CHECK(t2.has_grad(x2));
}
