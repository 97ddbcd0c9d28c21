#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "omnifd/model/heads.hpp"

using namespace omnifd;
using omnifd::testing::random_tensor;

namespace {

FeaturePyramid image_pyramid(Rng& rng, const std::vector<GridShape>& grids, const std::vector<long>& dims,
                             long input_hw = 32, double fill = std::nan("")) {
  FeaturePyramid fp;
  fp.modality = Modality::kImage;
  fp.input_h = input_hw;
  fp.input_w = input_hw;
  for (size_t l = 0; l < grids.size(); ++l) {
    Tensor t({grids[l].numel(), dims[l]});
    if (std::isnan(fill))
      t = random_tensor({grids[l].numel(), dims[l]}, rng);
    else
      t.fill(fill);
    fp.levels.push_back({Value::leaf(std::move(t)), grids[l], dims[l]});
  }
  return fp;
}

}  // namespace

TEST_CASE("classification head is the mean-then-linear map") {
  Rng rng(3);
  ParamStore ps;
  ClassificationHead head(ps, rng, "head", 8);

  // identical rows: logit = w . v + b
  Tensor v = random_tensor({1, 8}, rng);
  Tensor q({4, 8});
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c < 8; ++c) q[r * 8 + c] = v[c];
  const Tensor& w = ps.get("head.fc.w").val();
  const Tensor& b = ps.get("head.fc.b").val();
  double expected = b[0];
  for (long c = 0; c < 8; ++c) expected += v[c] * w[c];
  CHECK(head.forward(Value::leaf(q)).val()[0] == doctest::Approx(expected).epsilon(1e-12));

  // permutation invariance and the hand-computed mean for a random matrix
  Tensor qr = random_tensor({4, 8}, rng);
  Tensor qperm({4, 8});
  const long perm[4] = {3, 1, 0, 2};
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c < 8; ++c) qperm[r * 8 + c] = qr[perm[r] * 8 + c];
  const double a = head.forward(Value::leaf(qr)).val()[0];
  const double bb = head.forward(Value::leaf(qperm)).val()[0];
  CHECK(a == doctest::Approx(bb).epsilon(1e-12));

  double mean_dot = b[0];
  for (long c = 0; c < 8; ++c) {
    double m = 0;
    for (long r = 0; r < 4; ++r) m += qr[r * 8 + c];
    mean_dot += (m / 4.0) * w[c];
  }
  CHECK(a == doctest::Approx(mean_dot).epsilon(1e-12));
}

TEST_CASE("spatial fusion resolves to the level-1 grid") {
  Rng rng(7);
  ParamStore ps;
  SpatialHead head(ps, rng, "sp", {24, 48, 96, 192}, 16, 4);
  Rng prng(11);
  FeaturePyramid fp = image_pyramid(prng, {{1, 8, 8}, {1, 4, 4}, {1, 2, 2}, {1, 1, 1}}, {24, 48, 96, 192});
  Value fused = head.fuse_features(fp);
  CHECK(fused.rows() == 64);
  CHECK(fused.cols() == 16);

  // single-level pyramid: fuse = 1x1 conv of that level
  ParamStore ps1;
  Rng rng1(13);
  SpatialHead head1(ps1, rng1, "sp", {6}, 5, 4);
  FeaturePyramid one = image_pyramid(prng, {{1, 3, 3}}, {6});
  Value f1 = head1.fuse_features(one);
  Value direct = head1.fuse.forward(one.levels[0].tokens);
  for (long i = 0; i < f1.val().numel(); ++i) CHECK(f1.val()[i] == doctest::Approx(direct.val()[i]).epsilon(1e-12));

  // constant levels fuse to a constant map
  FeaturePyramid cfp = image_pyramid(prng, {{1, 4, 4}, {1, 2, 2}}, {3, 5}, 32, 0.7);
  ParamStore ps2;
  Rng rng2(17);
  SpatialHead head2(ps2, rng2, "sp", {3, 5}, 4, 4);
  Value fc = head2.fuse_features(cfp);
  for (long r = 1; r < fc.rows(); ++r)
    for (long c = 0; c < fc.cols(); ++c)
      CHECK(fc.val()[r * fc.cols() + c] == doctest::Approx(fc.val()[c]).epsilon(1e-9));
}

TEST_CASE("spatial localization follows the similarity projection") {
  Rng rng(19);
  ParamStore ps;
  SpatialHead head(ps, rng, "sp", {6}, 4, 2);
  Rng prng(23);
  FeaturePyramid fp = image_pyramid(prng, {{1, 2, 2}}, {6}, 8);

  // zero queries: mask equals the projection bias everywhere
  Value qzero = Value::leaf(Tensor({2, 4}));
  Value mask = head.forward(fp, qzero);
  CHECK(mask.rows() == 64);  // 8x8 input resolution
  const double bias = ps.get("sp.proj.b").val()[0];
  for (long i = 0; i < mask.val().numel(); ++i) CHECK(mask.val()[i] == doctest::Approx(bias).epsilon(1e-12));

  // permuting query rows together with projection weights is a no-op
  Tensor q = random_tensor({2, 4}, prng);
  Tensor base = head.forward(fp, Value::leaf(q)).val();
  Tensor qswap({2, 4});
  for (long c = 0; c < 4; ++c) {
    qswap[c] = q[4 + c];
    qswap[4 + c] = q[c];
  }
  Value pw = ps.get("sp.proj.w");
  Tensor w = pw.val();
  std::swap(w.vec()[0], w.vec()[1]);
  pw.mutable_val() = w;
  Tensor swapped = head.forward(fp, Value::leaf(qswap)).val();
  for (long i = 0; i < base.numel(); ++i) CHECK(swapped[i] == doctest::Approx(base[i]).epsilon(1e-12));
}

TEST_CASE("spatial localization matches a 2x2 hand computation") {
  ParamStore ps;
  Rng rng(29);
  SpatialHead head(ps, rng, "sp", {2}, 2, 2);
  // 2x2 grid, 2 channels; identity fuse so F_sp = tokens
  Value fw = ps.get("sp.fuse.w");
  fw.mutable_val() = Tensor({2, 2}, {1, 0, 0, 1});
  ps.get("sp.fuse.b").mutable_val().fill(0.0);
  ps.get("sp.proj.w").mutable_val() = Tensor({2, 1}, {1.0, -1.0});
  ps.get("sp.proj.b").mutable_val().fill(0.25);

  FeaturePyramid fp;
  fp.modality = Modality::kImage;
  fp.input_h = 2;
  fp.input_w = 2;
  Tensor tokens({4, 2}, {1, 0, 0, 1, 1, 1, 2, -1});
  fp.levels.push_back({Value::leaf(tokens), {1, 2, 2}, 2});

  Tensor q({2, 2}, {0.5, 1.0, -1.0, 2.0});
  Tensor mask = head.forward(fp, Value::leaf(q)).val();
  // sim = tokens q^T; mask = sim0 - sim1 + 0.25 per pixel (input res == grid)
  for (long r = 0; r < 4; ++r) {
    const double s0 = tokens[r * 2 + 0] * 0.5 + tokens[r * 2 + 1] * 1.0;
    const double s1 = tokens[r * 2 + 0] * -1.0 + tokens[r * 2 + 1] * 2.0;
    CHECK(mask[r] == doctest::Approx(s0 - s1 + 0.25).epsilon(1e-12));
  }
}

TEST_CASE("spatial head rejects video pyramids") {
  ParamStore ps;
  Rng rng(31);
  SpatialHead head(ps, rng, "sp", {6}, 4, 2);
  Rng prng(37);
  FeaturePyramid fp = image_pyramid(prng, {{1, 2, 2}}, {6});
  fp.modality = Modality::kVideo;
  CHECK_THROWS_WITH_AS(head.fuse_features(fp), doctest::Contains("VideoNotSupported"), Error);
}

TEST_CASE("temporal feature pools space then projects") {
  ParamStore ps;
  Rng rng(41);
  TemporalHead head(ps, rng, "tmp", 6, 4, 2, 8);
  Rng prng(43);

  // H=W=1: pooling is the identity
  FeaturePyramid fp;
  fp.modality = Modality::kVideo;
  Tensor tok = random_tensor({3, 6}, prng);
  fp.levels.push_back({Value::leaf(tok), {3, 1, 1}, 6});
  Value f = head.temporal_feature(fp);
  Value direct = head.feat_proj.forward(Value::leaf(tok));
  for (long i = 0; i < f.val().numel(); ++i) CHECK(f.val()[i] == doctest::Approx(direct.val()[i]).epsilon(1e-12));

  // random 2x2 spatial grid equals the hand mean
  FeaturePyramid fp2;
  fp2.modality = Modality::kVideo;
  Tensor tok2 = random_tensor({8, 6}, prng);  // T=2, 2x2 grid
  fp2.levels.push_back({Value::leaf(tok2), {2, 2, 2}, 6});
  Value f2 = head.temporal_feature(fp2);
  for (long t = 0; t < 2; ++t) {
    Tensor mean({1, 6});
    for (long cell = 0; cell < 4; ++cell)
      for (long c = 0; c < 6; ++c) mean[c] += tok2[(t * 4 + cell) * 6 + c] / 4.0;
    Value proj = head.feat_proj.forward(Value::leaf(mean));
    for (long c = 0; c < 4; ++c) CHECK(f2.val()[t * 4 + c] == doctest::Approx(proj.val()[c]).epsilon(1e-12));
  }

  // image pyramids are rejected
  FeaturePyramid img;
  img.modality = Modality::kImage;
  img.levels.push_back({Value::leaf(tok), {3, 1, 1}, 6});
  CHECK_THROWS_WITH_AS(head.temporal_feature(img), doctest::Contains("ImageNotSupported"), Error);
}

TEST_CASE("temporal enhancement preserves length and supports empty queries") {
  ParamStore ps;
  Rng rng(47);
  TemporalHead head(ps, rng, "tmp", 6, 4, 2, 8);
  Rng prng(53);
  Value f_tmp = Value::leaf(random_tensor({5, 4}, prng));
  Value q = Value::leaf(random_tensor({3, 4}, prng));
  Value enhanced = head.enhance_features(f_tmp, q);
  CHECK(enhanced.rows() == 5);
  CHECK(enhanced.cols() == 4);

  Value self_only = head.enhance_features(f_tmp, Value());
  CHECK(self_only.rows() == 5);
  Value empty_q = Value::leaf(Tensor({0, 4}));
  Value self_only2 = head.enhance_features(f_tmp, empty_q);
  for (long i = 0; i < self_only.val().numel(); ++i)
    CHECK(self_only.val()[i] == doctest::Approx(self_only2.val()[i]).epsilon(1e-12));
}

TEST_CASE("temporal prediction shapes, positivity, and constant behavior") {
  ParamStore ps;
  Rng rng(59);
  TemporalHead head(ps, rng, "tmp", 6, 4, 2, 8);
  Tensor constant({6, 4});
  for (long r = 0; r < 6; ++r)
    for (long c = 0; c < 4; ++c) constant[r * 4 + c] = 0.3 * (c + 1);
  auto pred = head.predict(Value::leaf(constant));
  CHECK(pred.s_cls.rows() == 6);
  CHECK(pred.s_cls.cols() == 1);
  CHECK(pred.s_reg.rows() == 6);
  CHECK(pred.s_reg.cols() == 2);
  for (long i = 0; i < pred.s_reg.val().numel(); ++i) CHECK(pred.s_reg.val()[i] >= 1e-3);
  // interior rows of a constant input are equal (padding only affects ends)
  for (long t = 2; t < 5; ++t) {
    CHECK(pred.s_cls.val()[t] == doctest::Approx(pred.s_cls.val()[1]).epsilon(1e-12));
    CHECK(pred.s_reg.val()[t * 2] == doctest::Approx(pred.s_reg.val()[2]).epsilon(1e-12));
  }
}

TEST_CASE("identity-at-center kernel gives a per-timestep affine map") {
  ParamStore ps;
  Rng rng(61);
  TemporalHead head(ps, rng, "tmp", 6, 4, 2, 8);
  Tensor w({1, 4, 3});
  const double taps[4] = {0.5, -1.0, 2.0, 0.25};
  for (long c = 0; c < 4; ++c) w[c * 3 + 1] = taps[c];  // center tap only
  ps.get("tmp.conv_cls.w").mutable_val() = w;
  ps.get("tmp.conv_cls.b").mutable_val() = Tensor({1, 1}, {0.1});

  Rng prng(67);
  Tensor x = random_tensor({5, 4}, prng);
  auto pred = head.predict(Value::leaf(x));
  for (long t = 0; t < 5; ++t) {
    double expected = 0.1;
    for (long c = 0; c < 4; ++c) expected += taps[c] * x[t * 4 + c];
    CHECK(pred.s_cls.val()[t] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("decode_segments matches the hand-enumerated example") {
  Tensor s_cls({4, 1}, {3, 3, -3, -3});
  Tensor s_reg({4, 2}, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  SegmentDecodeConfig cfg;
  cfg.score_threshold = 0.5;
  cfg.nms_tiou = 0.5;
  auto segs = decode_segments(s_cls, s_reg, 1.0, cfg);
  REQUIRE(segs.size() == 2);
  // candidates [-0.5, 1.5] -> clamped [0, 1.5] and [0.5, 2.5]; tIoU = 0.4 keeps both
  CHECK(segs[0].start == doctest::Approx(0.0));
  CHECK(segs[0].end == doctest::Approx(1.5));
  CHECK(segs[1].start == doctest::Approx(0.5));
  CHECK(segs[1].end == doctest::Approx(2.5));
  CHECK(tiou(segs[0], segs[1]) == doctest::Approx(0.4));

  SUBCASE("all below threshold decodes to nothing") {
    Tensor low({4, 1}, {-3, -3, -3, -3});
    CHECK(decode_segments(low, s_reg, 1.0, cfg).empty());
  }
  SUBCASE("identical candidates collapse under NMS") {
    Tensor two({2, 1}, {2, 2});
    Tensor reg({2, 2}, {0.0, 1.0, 1.0, 0.0});  // both decode to [0, 2]
    auto out = decode_segments(two, reg, 1.0, cfg);
    CHECK(out.size() == 1);
  }
}

TEST_CASE("decode_segments output is sorted, NMS-separated, and valid") {
  Rng rng(71);
  SegmentDecodeConfig cfg;
  for (int trial = 0; trial < 25; ++trial) {
    const long t_len = rng.uniform_int(1, 24);
    Tensor s_cls({t_len, 1});
    Tensor s_reg({t_len, 2});
    for (long i = 0; i < t_len; ++i) s_cls[i] = rng.normal(0, 2.0);
    for (long i = 0; i < 2 * t_len; ++i) s_reg[i] = std::fabs(rng.normal(0, 1.5)) + 1e-3;
    auto segs = decode_segments(s_cls, s_reg, 0.5, cfg);
    for (size_t i = 0; i < segs.size(); ++i) {
      CHECK(segs[i].start >= 0.0);
      CHECK(segs[i].end > segs[i].start);
      if (i > 0) CHECK(segs[i - 1].score >= segs[i].score);
      for (size_t j = 0; j < i; ++j) CHECK(tiou(segs[i], segs[j]) < cfg.nms_tiou);
    }
  }
}

TEST_CASE("ideal predictions round-trip through decode_segments") {
  Rng rng(73);
  for (int trial = 0; trial < 40; ++trial) {
    const long t_len = 32;
    const double stride = 0.5;
    // bin-aligned disjoint ground truth segments with at least one bin gap
    std::vector<std::pair<long, long>> gt_bins;
    long cursor = 0;
    while (cursor < t_len - 2 && gt_bins.size() < 3) {
      const long start = cursor + rng.uniform_int(0, 3);
      const long len = rng.uniform_int(1, 6);
      if (start + len > t_len) break;
      gt_bins.emplace_back(start, start + len);
      cursor = start + len + 1;
    }
    if (gt_bins.empty()) continue;

    Tensor s_cls({t_len, 1});
    Tensor s_reg({t_len, 2});
    for (long t = 0; t < t_len; ++t) {
      s_cls[t] = -8.0;
      for (const auto& [a, b] : gt_bins)
        if (t >= a && t < b) {
          s_cls[t] = 8.0;
          s_reg[t * 2 + 0] = static_cast<double>(t - a);
          s_reg[t * 2 + 1] = static_cast<double>(b - (t + 1));
        }
    }
    SegmentDecodeConfig cfg;
    auto segs = decode_segments(s_cls, s_reg, stride, cfg);
    for (const auto& [a, b] : gt_bins) {
      double best = 0;
      for (const auto& s : segs) best = std::max(best, tiou(s.start, s.end, a * stride, b * stride));
      CHECK(best >= 0.99);
    }
  }
}
