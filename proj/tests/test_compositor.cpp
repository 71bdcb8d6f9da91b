#include <gtest/gtest.h>

#include "ipseg/compositor.hpp"
#include "ipseg/ops_reduce.hpp"
#include "ipseg/ops_elementwise.hpp"
#include "test_util.hpp"

using namespace ipseg;
using testutil::max_grad_error;
using testutil::random_leaf;

namespace {

RgbaLayer<double> random_layer(Rng& rng, int64_t n, int64_t h, int64_t w, bool req = false) {
  return {random_leaf<double>({n, 3, h, w}, rng, req, 0.0, 1.0),
          random_leaf<double>({n, 1, h, w}, rng, req, 0.0, 1.0)};
}

// closed-form unrolling of the recursion: sum_i I_i m_i prod_{j>i} (1 - m_j)
std::vector<double> closed_form(const LayerStack<double>& s) {
  const auto& base = s.base;
  const int64_t n = base->dim(0), hw = base->dim(2) * base->dim(3);
  std::vector<double> out(base->value.begin(), base->value.end());
  // treat the base as layer 0 with mask one: its survival factor is prod over all layers
  for (size_t i = 0; i < out.size(); ++i) {
    const int64_t b = static_cast<int64_t>(i) / (3 * hw);
    const int64_t p = static_cast<int64_t>(i) % hw;
    double surv = 1.0;
    for (const auto& l : s.layers) surv *= 1.0 - l.mask->value[b * hw + p];
    out[i] *= surv;
  }
  for (size_t li = 0; li < s.layers.size(); ++li) {
    const auto& l = s.layers[li];
    for (int64_t b = 0; b < n; ++b)
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t p = 0; p < hw; ++p) {
          double term = l.appearance->value[(b * 3 + c) * hw + p] * l.mask->value[b * hw + p];
          for (size_t j = li + 1; j < s.layers.size(); ++j)
            term *= 1.0 - s.layers[j].mask->value[b * hw + p];
          out[(b * 3 + c) * hw + p] += term;
        }
  }
  return out;
}

}  // namespace

TEST(Composite, AllMasksZeroGivesBase) {
  Tape<double> t;
  Rng rng(1);
  auto s = LayerStack<double>::black(1, 4, 4);
  for (int i = 0; i < 3; ++i) {
    auto l = random_layer(rng, 1, 4, 4);
    std::fill(l.mask->value.begin(), l.mask->value.end(), 0.0);
    s.layers.push_back(l);
  }
  auto img = composite(t, s);
  for (double v : img->value) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Composite, OpaqueTopWins) {
  Tape<double> t;
  Rng rng(2);
  auto s = LayerStack<double>::black(1, 4, 4);
  s.layers.push_back(random_layer(rng, 1, 4, 4));
  auto top = random_layer(rng, 1, 4, 4);
  std::fill(top.mask->value.begin(), top.mask->value.end(), 1.0);
  s.layers.push_back(top);
  auto img = composite(t, s);
  for (size_t i = 0; i < img->value.size(); ++i)
    EXPECT_DOUBLE_EQ(img->value[i], top.appearance->value[i]);
}

TEST(Composite, EmptyStackReturnsBase) {
  Tape<double> t;
  Rng rng(3);
  auto s = LayerStack<double>::black(2, 3, 3);
  for (auto& v : s.base->value) v = rng.uniform();
  auto img = composite(t, s);
  EXPECT_EQ(img->value, s.base->value);
}

TEST(Composite, MatchesClosedFormUnrolling) {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const int64_t n_layers = 1 + rng.uniform_int(12);
    const int64_t h = 1 + rng.uniform_int(8), w = 1 + rng.uniform_int(8);
    LayerStack<double> s;
    s.base = random_leaf<double>({1, 3, h, w}, rng, false, 0.0, 1.0);
    for (int64_t i = 0; i < n_layers; ++i) s.layers.push_back(random_layer(rng, 1, h, w));
    Tape<double> t;
    auto img = composite(t, s);
    auto ref = closed_form(s);
    for (size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(img->value[i], ref[i], 1e-6);
  }
}

TEST(Composite, StaysInUnitRange) {
  Rng rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    LayerStack<double> s;
    s.base = random_leaf<double>({1, 3, 5, 5}, rng, false, 0.0, 1.0);
    for (int i = 0; i < 6; ++i) s.layers.push_back(random_layer(rng, 1, 5, 5));
    Tape<double> t;
    auto img = composite(t, s);
    for (double v : img->value) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Composite, SwappingOverlappingLayersChangesResult) {
  Rng rng(6);
  auto a = random_layer(rng, 1, 4, 4);
  auto b = random_layer(rng, 1, 4, 4);
  LayerStack<double> s1 = LayerStack<double>::black(1, 4, 4);
  s1.layers = {a, b};
  LayerStack<double> s2 = LayerStack<double>::black(1, 4, 4);
  s2.layers = {b, a};
  Tape<double> t;
  auto i1 = composite(t, s1);
  auto i2 = composite(t, s2);
  double diff = 0;
  for (size_t i = 0; i < i1->value.size(); ++i) diff = std::max(diff, std::abs(i1->value[i] - i2->value[i]));
  EXPECT_GT(diff, 1e-6);
}

TEST(Composite, SwappingDisjointLayersDoesNot) {
  Rng rng(7);
  auto a = random_layer(rng, 1, 4, 4);
  auto b = random_layer(rng, 1, 4, 4);
  // disjoint supports: a lives in the left half, b in the right half
  for (int64_t y = 0; y < 4; ++y)
    for (int64_t x = 0; x < 4; ++x) {
      if (x >= 2) a.mask->value[y * 4 + x] = 0.0;
      if (x < 2) b.mask->value[y * 4 + x] = 0.0;
    }
  LayerStack<double> s1 = LayerStack<double>::black(1, 4, 4);
  s1.layers = {a, b};
  LayerStack<double> s2 = LayerStack<double>::black(1, 4, 4);
  s2.layers = {b, a};
  Tape<double> t;
  auto i1 = composite(t, s1);
  auto i2 = composite(t, s2);
  for (size_t i = 0; i < i1->value.size(); ++i) EXPECT_NEAR(i1->value[i], i2->value[i], 1e-6);
}

TEST(Composite, OpaqueLayerHidesEverythingBelow) {
  Rng rng(8);
  auto opaque = random_layer(rng, 1, 4, 4);
  std::fill(opaque.mask->value.begin(), opaque.mask->value.end(), 1.0);
  auto top = random_layer(rng, 1, 4, 4);

  LayerStack<double> s1 = LayerStack<double>::black(1, 4, 4);
  s1.layers = {random_layer(rng, 1, 4, 4), opaque, top};
  LayerStack<double> s2 = LayerStack<double>::black(1, 4, 4);
  s2.layers = {random_layer(rng, 1, 4, 4), opaque, top};
  Tape<double> t;
  auto i1 = composite(t, s1);
  auto i2 = composite(t, s2);
  for (size_t i = 0; i < i1->value.size(); ++i) EXPECT_DOUBLE_EQ(i1->value[i], i2->value[i]);
}

TEST(Composite, MaskGradientsMatchFiniteDifferences) {
  Rng rng(9);
  LayerStack<double> s;
  s.base = random_leaf<double>({1, 3, 4, 4}, rng, false, 0.0, 1.0);
  for (int i = 0; i < 3; ++i) s.layers.push_back(random_layer(rng, 1, 4, 4, /*req=*/true));
  std::vector<Var<double>> leaves;
  for (auto& l : s.layers) {
    leaves.push_back(l.mask);
    leaves.push_back(l.appearance);
  }
  auto f = [&](Tape<double>& t) { return mean_all(t, square(t, composite(t, s))); };
  EXPECT_LT(max_grad_error<double>(leaves, f), 1e-6);
}

TEST(WarpLayer, IdentityLeavesLayerUntouched) {
  Tape<double> t;
  Rng rng(10);
  auto l = random_layer(rng, 1, 5, 5);
  auto w = warp_layer(t, l, WarpParams<double>::identity());
  EXPECT_EQ(w.appearance->value, l.appearance->value);
  EXPECT_EQ(w.mask->value, l.mask->value);
}

TEST(WarpLayer, IntegerTranslationShiftsAndZeroFills) {
  Tape<double> t;
  Rng rng(11);
  auto l = random_layer(rng, 1, 4, 6);
  WarpParams<double> p;
  p.dx = 2;
  auto w = warp_layer(t, l, p);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < 4; ++y) {
      EXPECT_DOUBLE_EQ(w.appearance->value[(c * 4 + y) * 6 + 0], 0.0);
      EXPECT_DOUBLE_EQ(w.appearance->value[(c * 4 + y) * 6 + 1], 0.0);
      for (int64_t x = 2; x < 6; ++x)
        EXPECT_DOUBLE_EQ(w.appearance->value[(c * 4 + y) * 6 + x],
                         l.appearance->value[(c * 4 + y) * 6 + x - 2]);
    }
  for (int64_t y = 0; y < 4; ++y) {
    EXPECT_DOUBLE_EQ(w.mask->value[y * 6 + 0], 0.0);
    EXPECT_DOUBLE_EQ(w.mask->value[y * 6 + 1], 0.0);
  }
}

TEST(WarpLayer, AffineHalfPixelShiftSplitsImpulse) {
  Tape<double> t;
  auto appearance = make_leaf<double>({1, 3, 1, 5});
  auto mask = make_leaf<double>({1, 1, 1, 5});
  mask->value[2] = 1.0;
  RgbaLayer<double> l{appearance, mask};
  WarpParams<double> p;
  p.kind = WarpParams<double>::Kind::affine;
  // sample half a pixel to the left of each output pixel: x_src_n = x_n - 0.5 * 2/(W-1)
  p.affine = {1.0, 0.0, -0.5 * 2.0 / 4.0, 0.0, 1.0, 0.0};
  auto w = warp_layer(t, l, p);
  EXPECT_NEAR(w.mask->value[2], 0.5, 1e-12);
  EXPECT_NEAR(w.mask->value[3], 0.5, 1e-12);
  EXPECT_NEAR(w.mask->value[0] + w.mask->value[1] + w.mask->value[4], 0.0, 1e-12);
}

TEST(WarpLayer, RejectsNonFiniteParams) {
  Tape<double> t;
  Rng rng(12);
  auto l = random_layer(rng, 1, 4, 4);
  WarpParams<double> p;
  p.kind = WarpParams<double>::Kind::affine;
  p.affine[2] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(warp_layer(t, l, p), std::invalid_argument);
}

TEST(PasteForeground, MaskExtremesSelectSides) {
  Tape<double> t;
  Rng rng(13);
  auto fg = random_layer(rng, 1, 4, 4);
  auto bg = random_leaf<double>({1, 3, 4, 4}, rng, false, 0.0, 1.0);

  std::fill(fg.mask->value.begin(), fg.mask->value.end(), 1.0);
  auto all_fg = paste_foreground(t, fg, bg);
  EXPECT_EQ(all_fg->value, fg.appearance->value);

  std::fill(fg.mask->value.begin(), fg.mask->value.end(), 0.0);
  auto all_bg = paste_foreground(t, fg, bg);
  EXPECT_EQ(all_bg->value, bg->value);

  std::fill(fg.mask->value.begin(), fg.mask->value.end(), 0.5);
  auto mid = paste_foreground(t, fg, bg);
  for (size_t i = 0; i < mid->value.size(); ++i)
    EXPECT_NEAR(mid->value[i], 0.5 * (fg.appearance->value[i] + bg->value[i]), 1e-12);
}

TEST(PasteForeground, RejectsShapeMismatch) {
  Tape<double> t;
  Rng rng(14);
  auto fg = random_layer(rng, 1, 4, 4);
  auto bg = random_leaf<double>({1, 3, 5, 5}, rng, false, 0.0, 1.0);
  EXPECT_THROW(paste_foreground(t, fg, bg), std::invalid_argument);
}
