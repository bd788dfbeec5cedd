#include <doctest.h>

#include <algorithm>
#include <random>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "siamtrack/kernels.hpp"

using namespace siamtrack::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Independent "same" convolution: total padding max((out-1)*s + k - in, 0),
// the smaller half on top/left.
std::vector<double> conv_oracle(int cin, int h, int w, int cout, int k, int s, const std::vector<double>& in,
                                const std::vector<double>& wt, const std::vector<double>& bias, int& oh, int& ow) {
  oh = (h + s - 1) / s;
  ow = (w + s - 1) / s;
  const int pt = std::max((oh - 1) * s + k - h, 0) / 2;
  const int pl = std::max((ow - 1) * s + k - w, 0) / 2;
  std::vector<double> out(static_cast<std::size_t>(cout) * oh * ow);
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = bias[o];
        for (int c = 0; c < cin; ++c)
          for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
              const int iy = y * s + i - pt, ix = x * s + j - pl;
              if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
              acc += wt[((static_cast<std::size_t>(o) * cin + c) * k + i) * k + j] *
                     in[(static_cast<std::size_t>(c) * h + iy) * w + ix];
            }
        out[(static_cast<std::size_t>(o) * oh + y) * ow + x] = acc;
      }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("conv forward matches the nested-loop oracle and the reference") {
    std::mt19937_64 rng(1);
    struct Shape { int cin, h, w, cout, k, s; };
    for (const Shape sh : {Shape{3, 9, 7, 4, 3, 1}, Shape{2, 10, 10, 5, 3, 2}, Shape{3, 11, 13, 2, 3, 2},
                           Shape{4, 6, 6, 3, 1, 1}, Shape{1, 5, 8, 2, 5, 1}, Shape{3, 64, 64, 16, 3, 2}}) {
      const auto g = ConvGeometry::same(sh.cin, sh.h, sh.w, sh.cout, sh.k, sh.s);
      const auto in = random_vec(static_cast<std::size_t>(sh.cin) * sh.h * sh.w, rng);
      const auto wt = random_vec(static_cast<std::size_t>(sh.cout) * sh.cin * sh.k * sh.k, rng);
      const auto b = random_vec(sh.cout, rng);
      int oh = 0, ow = 0;
      const auto expect = conv_oracle(sh.cin, sh.h, sh.w, sh.cout, sh.k, sh.s, in, wt, b, oh, ow);
      REQUIRE(g.out_height == oh);
      REQUIRE(g.out_width == ow);
      std::vector<double> out(expect.size()), ref(expect.size());
      conv2d_forward<double>(g, in, wt, b, out);
      reference::conv2d_forward<double>(g, in, wt, b, ref);
      for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-10));
        CHECK(ref[i] == doctest::Approx(expect[i]).epsilon(1e-10));
      }
    }
  }

  TEST_CASE("conv backward is the adjoint of forward") {
    std::mt19937_64 rng(2);
    const auto g = ConvGeometry::same(3, 9, 11, 4, 3, 2);
    const auto in = random_vec(static_cast<std::size_t>(3) * 9 * 11, rng);
    const auto wt = random_vec(static_cast<std::size_t>(4) * 3 * 9, rng);
    const std::vector<double> zero_bias(4, 0.0);
    const auto go = random_vec(static_cast<std::size_t>(4) * g.out_pixels(), rng);
    std::vector<double> gi(in.size()), gw(wt.size(), 0.0), gb(4, 0.0);
    conv2d_backward<double>(g, in, wt, go, gi, gw, gb);
    // <conv(in), go> = <in, grad_in> = <wt, grad_w>
    std::vector<double> out(go.size());
    conv2d_forward<double>(g, in, wt, zero_bias, out);
    CHECK(dot(out, go) == doctest::Approx(dot(in, gi)).epsilon(1e-10));
    CHECK(dot(out, go) == doctest::Approx(dot(wt, gw)).epsilon(1e-10));
    double sum_go = 0.0;
    for (int o = 0; o < 4; ++o) {
      double s = 0.0;
      for (int p = 0; p < g.out_pixels(); ++p) s += go[static_cast<std::size_t>(o) * g.out_pixels() + p];
      CHECK(gb[o] == doctest::Approx(s));
      sum_go += s;
    }
    // Reference agrees, and weight/bias gradients accumulate.
    std::vector<double> ri(in.size()), rw(wt.size(), 0.0), rb(4, 0.0);
    reference::conv2d_backward<double>(g, in, wt, go, ri, rw, rb);
    for (std::size_t i = 0; i < gi.size(); ++i) CHECK(gi[i] == doctest::Approx(ri[i]).epsilon(1e-10));
    for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(rw[i]).epsilon(1e-10));
    conv2d_backward<double>(g, in, wt, go, std::span<double>(), gw, gb);
    for (std::size_t i = 0; i < gw.size(); ++i) CHECK(gw[i] == doctest::Approx(2.0 * rw[i]).epsilon(1e-10));
  }

  TEST_CASE("xcorr with a centered delta kernel is the identity") {
    std::mt19937_64 rng(3);
    for (int kh : {1, 3, 5, 4, 16}) {
      const XcorrGeometry g{2, kh, kh, 20, 20};
      std::vector<double> k(static_cast<std::size_t>(2) * kh * kh, 0.0);
      for (int c = 0; c < 2; ++c) k[(static_cast<std::size_t>(c) * kh + g.anchor_y()) * kh + g.anchor_x()] = 1.0;
      const auto s = random_vec(static_cast<std::size_t>(2) * 400, rng);
      std::vector<double> out(s.size());
      xcorr_forward<double>(g, k, s, out);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(out[i] - s[i]) < 1e-12);
    }
  }

  TEST_CASE("xcorr matches the oracle; backward matches reference") {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> dim(1, 9);
    for (int trial = 0; trial < 40; ++trial) {
      const int c = dim(rng), kh = dim(rng), kw = dim(rng);
      const int h = kh + dim(rng), w = kw + dim(rng);
      const XcorrGeometry g{c, kh, kw, h, w};
      const auto k = random_vec(static_cast<std::size_t>(c) * kh * kw, rng);
      const auto s = random_vec(static_cast<std::size_t>(c) * h * w, rng);
      const auto expect = test::xcorr_oracle(c, kh, kw, h, w, k, s);
      std::vector<double> out(expect.size()), ref(expect.size());
      xcorr_forward<double>(g, k, s, out);
      reference::xcorr_forward<double>(g, k, s, ref);
      for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-10));
        CHECK(ref[i] == doctest::Approx(expect[i]).epsilon(1e-10));
      }
      const auto go = random_vec(out.size(), rng);
      std::vector<double> gk(k.size(), 0.0), gs(s.size()), rk(k.size(), 0.0), rs(s.size());
      xcorr_backward<double>(g, k, s, go, gk, gs);
      reference::xcorr_backward<double>(g, k, s, go, rk, rs);
      CHECK(dot(out, go) == doctest::Approx(dot(k, gk)).epsilon(1e-10));
      CHECK(dot(out, go) == doctest::Approx(dot(s, gs)).epsilon(1e-10));
      for (std::size_t i = 0; i < gk.size(); ++i) CHECK(gk[i] == doctest::Approx(rk[i]).epsilon(1e-10));
      for (std::size_t i = 0; i < gs.size(); ++i) CHECK(gs[i] == doctest::Approx(rs[i]).epsilon(1e-10));
    }
  }

  TEST_CASE("relu") {
    std::vector<float> v{-1.0f, 0.0f, 2.0f};
    relu_forward<float>(v);
    CHECK(v == std::vector<float>{0.0f, 0.0f, 2.0f});
    std::vector<float> g{5.0f, 5.0f, 5.0f};
    relu_backward<float>(v, g);
    CHECK(g == std::vector<float>{0.0f, 0.0f, 5.0f});
  }

  TEST_CASE("float kernels are deterministic across calls") {
    std::mt19937_64 rng(9);
    const auto g = ConvGeometry::same(16, 32, 32, 32, 3, 1);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> in(16 * 32 * 32), wt(32 * 16 * 9), b(32);
    for (auto& x : in) x = u(rng);
    for (auto& x : wt) x = u(rng);
    std::vector<float> a(32 * 32 * 32), c(a.size());
    conv2d_forward<float>(g, in, wt, b, a);
    conv2d_forward<float>(g, in, wt, b, c);
    CHECK(a == c);
  }

  TEST_CASE("float conv results do not depend on buffer alignment") {
    std::mt19937_64 rng(12);
    const auto g = ConvGeometry::same(8, 19, 21, 16, 3, 2);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    const std::size_t n_in = 8 * 19 * 21, n_w = 16 * 8 * 9, n_out = 16 * 10 * 11;
    std::vector<float> in(n_in), wt(n_w), go(n_out), b(16);
    for (auto* v : {&in, &wt, &go, &b})
      for (auto& x : *v) x = u(rng);
    std::vector<float> ref_out, ref_gi, ref_gw, ref_gb;
    for (std::size_t shift = 0; shift < 8; ++shift) {
      // Copies land at every float offset within a 32-byte line.
      std::vector<float> buf(shift + n_in + n_w + n_out + 16 + n_out + n_in + n_w + 16, 0.0f);
      float* p = buf.data() + shift;
      auto place = [&](const std::vector<float>& src) {
        std::copy(src.begin(), src.end(), p);
        std::span<float> s(p, src.size());
        p += src.size();
        return s;
      };
      const auto s_in = place(in), s_w = place(wt), s_go = place(go), s_b = place(b);
      std::span<float> out(p, n_out);
      p += n_out;
      std::span<float> gi(p, n_in);
      p += n_in;
      std::span<float> gw(p, n_w);
      p += n_w;
      std::span<float> gb(p, 16);
      conv2d_forward<float>(g, s_in, s_w, s_b, out);
      conv2d_backward<float>(g, s_in, s_w, s_go, gi, gw, gb);
      std::vector<float> o(out.begin(), out.end()), i(gi.begin(), gi.end()), w(gw.begin(), gw.end()),
          bb(gb.begin(), gb.end());
      if (shift == 0) {
        ref_out = o, ref_gi = i, ref_gw = w, ref_gb = bb;
        continue;
      }
      CHECK(o == ref_out);
      CHECK(i == ref_gi);
      CHECK(w == ref_gw);
      CHECK(bb == ref_gb);
    }
  }
}
