#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "omnifd/model/encoder.hpp"

using namespace omnifd;
using omnifd::testing::random_tensor;

namespace {

EncoderConfig desk_config() {
  EncoderConfig cfg;
  cfg.input_h = 32;
  cfg.input_w = 32;
  cfg.max_frames = 16;
  return cfg;
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.patch = {1, 2, 2};
  cfg.stage_depths = {1, 1};
  cfg.stage_dims = {4, 8};
  cfg.stage_heads = {1, 2};
  cfg.window = {1, 2, 2};
  cfg.input_h = 8;
  cfg.input_w = 8;
  cfg.max_frames = 2;
  return cfg;
}

Tensor random_image(Rng& rng, long h = 32, long w = 32) {
  Tensor img({h, w, 3});
  for (long i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  return img;
}

}  // namespace

TEST_CASE("to_unified_tensor treats an image as a one-frame video") {
  Rng rng(3);
  Tensor img = random_image(rng, 224, 224);
  MediaTensor mt = to_unified_tensor(img);
  CHECK(mt.frames() == 1);
  CHECK(mt.height() == 224);
  CHECK(mt.width() == 224);
  CHECK(mt.modality == Modality::kImage);
}

TEST_CASE("video frame sampling follows stride and loop-padding") {
  FrameSampling s{32, 4, 0};
  auto idx = sample_frame_indices(128, s);
  REQUIRE(idx.size() == 32);
  for (long i = 0; i < 32; ++i) CHECK(idx[static_cast<size_t>(i)] == i * 4);

  // requested span exceeds the clip: indices wrap modulo clip length
  FrameSampling short_clip{8, 2, 0};
  auto wrapped = sample_frame_indices(10, short_clip);
  const std::vector<long> expected = {0, 2, 4, 6, 8, 0, 2, 4};
  CHECK(wrapped == expected);
}

TEST_CASE("to_unified_tensor rejects bad input") {
  CHECK_THROWS_WITH_AS(to_unified_tensor(Tensor({0, 0, 3})), doctest::Contains("EmptySource"), Error);
  // resolution not divisible by the desk patch size surfaces at patch_embed
  ParamStore ps;
  Rng rng(5);
  UnifiedEncoder enc(ps, rng, desk_config());
  Rng prng(7);
  Tensor odd = random_image(prng, 30, 30);
  CHECK_THROWS_WITH_AS(enc.encode(to_unified_tensor(odd)), doctest::Contains("NonDivisibleResolution"), Error);
}

TEST_CASE("patch embedding produces the expected token grid") {
  ParamStore ps;
  Rng rng(11);
  UnifiedEncoder enc(ps, rng, desk_config());
  Rng prng(13);
  MediaTensor img = to_unified_tensor(random_image(prng));
  GridShape grid;
  Value tokens = enc.patch_embed(img, &grid);
  CHECK(grid.t == 1);
  CHECK(grid.h == 8);
  CHECK(grid.w == 8);
  CHECK(tokens.rows() == 64);
  CHECK(tokens.cols() == 24);
}

TEST_CASE("temporal patch size 2 halves the frame axis") {
  EncoderConfig cfg = desk_config();
  cfg.patch = {2, 4, 4};
  cfg.max_frames = 8;
  ParamStore ps;
  Rng rng(17);
  UnifiedEncoder enc(ps, rng, cfg);
  Tensor clip({8, 32, 32, 3});
  Rng prng(19);
  for (long i = 0; i < clip.numel(); ++i) clip[i] = prng.uniform();
  MediaTensor mt = to_unified_tensor(clip, {8, 1, 0}, 8.0);
  GridShape grid;
  enc.patch_embed(mt, &grid);
  CHECK(grid.t == 4);
}

TEST_CASE("zero input embeds to positional encodings plus bias") {
  ParamStore ps;
  Rng rng(23);
  UnifiedEncoder enc(ps, rng, tiny_config());
  Tensor zero_img({8, 8, 3});
  zero_img.fill(kPixelMean);  // standardizes to exactly zero
  MediaTensor mt = to_unified_tensor(zero_img);
  Value tokens = enc.patch_embed(mt);

  const Tensor& bias = ps.get("encoder.patch.b").val();
  const Tensor& pos_sp = ps.get("encoder.pos_spatial").val();
  const Tensor& pos_tm = ps.get("encoder.pos_temporal").val();
  const long c = tokens.cols();
  for (long r = 0; r < tokens.rows(); ++r)
    for (long j = 0; j < c; ++j) {
      const double expected = bias[j] + pos_sp[r * c + j] + pos_tm[j];  // single frame: temporal row 0
      CHECK(tokens.val()[r * c + j] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("encode: image equals its one-frame video bitwise") {
  ParamStore ps;
  Rng rng(29);
  UnifiedEncoder enc(ps, rng, desk_config());
  Rng prng(31);
  Tensor img = random_image(prng);

  MediaTensor as_image = to_unified_tensor(img);
  MediaTensor as_video;
  as_video.data = as_image.data;
  as_video.modality = Modality::kVideo;
  as_video.fps = 8.0;
  as_video.frame_stride = 1;

  FeaturePyramid a = enc.encode(as_image);
  FeaturePyramid b = enc.encode(as_video);
  REQUIRE(a.levels.size() == b.levels.size());
  for (size_t l = 0; l < a.levels.size(); ++l) {
    const Tensor& ta = a.levels[l].tokens.val();
    const Tensor& tb = b.levels[l].tokens.val();
    REQUIRE(ta.numel() == tb.numel());
    for (long i = 0; i < ta.numel(); ++i) CHECK(ta[i] == tb[i]);
  }
}

TEST_CASE("desk config level shapes follow the stride contract") {
  ParamStore ps;
  Rng rng(37);
  UnifiedEncoder enc(ps, rng, desk_config());
  Rng prng(41);
  FeaturePyramid fp = enc.encode(to_unified_tensor(random_image(prng)));
  REQUIRE(fp.levels.size() == 4);
  const long dims[4] = {24, 48, 96, 192};
  const long hw[4] = {8, 4, 2, 1};
  for (int l = 0; l < 4; ++l) {
    CHECK(fp.levels[l].grid.t == 1);
    CHECK(fp.levels[l].grid.h == hw[l]);
    CHECK(fp.levels[l].grid.w == hw[l]);
    CHECK(fp.levels[l].channels == dims[l]);
    CHECK(fp.levels[l].tokens.cols() == dims[l]);
  }
}

TEST_CASE("video encode halves the temporal axis per stage down to one") {
  ParamStore ps;
  Rng rng(43);
  UnifiedEncoder enc(ps, rng, desk_config());
  Tensor clip({16, 32, 32, 3});
  Rng prng(47);
  for (long i = 0; i < clip.numel(); ++i) clip[i] = prng.uniform();
  FeaturePyramid fp = enc.encode(to_unified_tensor(clip, {16, 1, 0}, 8.0));
  const long t_expected[4] = {16, 8, 4, 2};
  for (int l = 0; l < 4; ++l) CHECK(fp.levels[l].grid.t == t_expected[l]);
}

TEST_CASE("encode is deterministic") {
  ParamStore ps;
  Rng rng(53);
  UnifiedEncoder enc(ps, rng, desk_config());
  Rng prng(59);
  MediaTensor mt = to_unified_tensor(random_image(prng));
  FeaturePyramid a = enc.encode(mt);
  FeaturePyramid b = enc.encode(mt);
  for (size_t l = 0; l < a.levels.size(); ++l)
    for (long i = 0; i < a.levels[l].tokens.val().numel(); ++i)
      CHECK(a.levels[l].tokens.val()[i] == b.levels[l].tokens.val()[i]);
}

TEST_CASE("single-token window attention reduces to the value path") {
  ParamStore ps;
  Rng rng(61);
  MultiHeadAttention attn(ps, rng, "attn", 6, 2);
  Value x = Value::leaf(random_tensor({4, 6}, rng));
  Value out = attn.forward_windowed(x, 1);
  // softmax over a singleton is 1, so out = (x Wv) Wo + biases
  Value expected = attn.wo.forward(attn.wv.forward(x));
  for (long i = 0; i < out.val().numel(); ++i)
    CHECK(out.val()[i] == doctest::Approx(expected.val()[i]).epsilon(1e-12));
}

TEST_CASE("two-token window matches the closed-form softmax mixture") {
  ParamStore ps;
  Rng rng(67);
  MultiHeadAttention attn(ps, rng, "attn", 2, 1);
  // hand-set parameters: wv = wo = identity, biases zero
  auto set = [&](const std::string& name, std::vector<double> v, std::vector<long> shape) {
    Value p = ps.get(name);
    p.mutable_val() = Tensor(std::move(shape), std::move(v));
  };
  set("attn.wq.w", {1.0, 0.0, 0.5, -0.5}, {2, 2});
  set("attn.wk.w", {0.25, -1.0, 0.75, 0.5}, {2, 2});
  set("attn.wv.w", {1, 0, 0, 1}, {2, 2});
  set("attn.wo.w", {1, 0, 0, 1}, {2, 2});

  Tensor xv({2, 2}, {0.3, -0.7, 1.1, 0.4});
  Value out = attn.forward_windowed(Value::leaf(xv), 2);

  using M2 = Eigen::Matrix2d;
  M2 x, wq, wk;
  x << 0.3, -0.7, 1.1, 0.4;
  wq << 1.0, 0.0, 0.5, -0.5;
  wk << 0.25, -1.0, 0.75, 0.5;
  M2 scores = (x * wq) * (x * wk).transpose() / std::sqrt(2.0);
  M2 probs;
  for (int r = 0; r < 2; ++r) {
    const double mx = std::max(scores(r, 0), scores(r, 1));
    const double e0 = std::exp(scores(r, 0) - mx), e1 = std::exp(scores(r, 1) - mx);
    probs(r, 0) = e0 / (e0 + e1);
    probs(r, 1) = e1 / (e0 + e1);
  }
  M2 expected = probs * x;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(out.val()[r * 2 + c] == doctest::Approx(expected(r, c)).epsilon(1e-10));
}

TEST_CASE("window-aligned cyclic shift permutes features when positions are disabled") {
  EncoderConfig cfg = tiny_config();
  cfg.input_h = 8;
  cfg.input_w = 16;  // 4x8 token grid -> two (1,4,4)-ish windows per axis
  cfg.window = {1, 2, 4};
  ParamStore ps;
  Rng rng(71);
  UnifiedEncoder enc(ps, rng, cfg);
  ps.get("encoder.pos_spatial").mutable_val().fill(0.0);
  ps.get("encoder.pos_temporal").mutable_val().fill(0.0);

  Rng prng(73);
  Tensor img = random_image(prng, 8, 16);
  // shift by one full window: 4 token columns = 8 pixels
  Tensor shifted({8, 16, 3});
  for (long i = 0; i < 8; ++i)
    for (long j = 0; j < 16; ++j)
      for (long c = 0; c < 3; ++c) shifted[(i * 16 + j) * 3 + c] = img[(i * 16 + (j + 8) % 16) * 3 + c];

  FeaturePyramid fa = enc.encode(to_unified_tensor(img));
  FeaturePyramid fb = enc.encode(to_unified_tensor(shifted));
  // level-1 features of the shifted input are the unshifted features
  // permuted by four token columns
  const long gw = 8, gh = 4, c1 = 4;
  const Tensor& base = fa.levels[0].tokens.val();
  const Tensor& perm = fb.levels[0].tokens.val();
  for (long h = 0; h < gh; ++h)
    for (long w = 0; w < gw; ++w)
      for (long ch = 0; ch < c1; ++ch) {
        const double a = base[(h * gw + (w + 4) % gw) * c1 + ch];
        const double b = perm[(h * gw + w) * c1 + ch];
        CHECK(b == doctest::Approx(a).epsilon(1e-9));
      }
}

TEST_CASE("encoder parameter gradients match finite differences") {
  ParamStore ps;
  Rng rng(79);
  UnifiedEncoder enc(ps, rng, tiny_config());
  CHECK(ps.count() < 5000);

  Rng prng(83);
  Tensor img = random_image(prng, 8, 8);
  MediaTensor mt = to_unified_tensor(img);
  std::vector<Tensor> weights;
  {
    FeaturePyramid fp = enc.encode(mt);
    for (const auto& lvl : fp.levels) weights.push_back(random_tensor(lvl.tokens.val().shape(), prng));
  }
  auto forward = [&] {
    FeaturePyramid fp = enc.encode(mt);
    Value loss;
    for (size_t l = 0; l < fp.levels.size(); ++l) {
      Value term = ops::sum_all(ops::mul(fp.levels[l].tokens, ops::constant(weights[l])));
      loss = loss.defined() ? ops::add(loss, term) : term;
    }
    return loss;
  };
  CHECK(omnifd::testing::grad_check_params(forward, ps) < 1e-4);
}
