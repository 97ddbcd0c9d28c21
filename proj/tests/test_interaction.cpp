#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "omnifd/model/interaction.hpp"

using namespace omnifd;
using omnifd::testing::random_tensor;

namespace {

// Hand-built pyramid with constant-free random tokens; modality image.
FeaturePyramid fake_pyramid(Rng& rng, const std::vector<GridShape>& grids, const std::vector<long>& dims,
                            double fill = std::nan("")) {
  FeaturePyramid fp;
  fp.modality = Modality::kImage;
  fp.input_h = 32;
  fp.input_w = 32;
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

const std::vector<GridShape> kDeskGrids = {{1, 8, 8}, {1, 4, 4}, {1, 2, 2}, {1, 1, 1}};
const std::vector<long> kDeskDims = {24, 48, 96, 192};

InteractionConfig small_cfg() {
  InteractionConfig cfg;
  cfg.num_queries = 4;
  cfg.width = 8;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.ffn_expansion = 2.0;
  return cfg;
}

}  // namespace

TEST_CASE("flatten_pyramid counts tokens per level") {
  Rng rng(3);
  ParamStore ps;
  InteractionConfig cfg;
  cfg.num_queries = 64;
  cfg.width = 192;
  CrossTaskInteraction inter(ps, rng, cfg, kDeskDims);

  Rng prng(5);
  FeaturePyramid fp = fake_pyramid(prng, kDeskGrids, kDeskDims);
  TokenLayout layout;
  Value tokens = inter.flatten_pyramid(fp, &layout);
  CHECK(layout.total == 85);  // 64 + 16 + 4 + 1
  CHECK(tokens.rows() == 85);
  CHECK(tokens.cols() == 192);

  // a two-frame final level contributes two tokens
  FeaturePyramid fpv = fake_pyramid(prng, {{2, 8, 8}, {2, 4, 4}, {2, 2, 2}, {2, 1, 1}}, kDeskDims);
  fpv.modality = Modality::kVideo;
  inter.flatten_pyramid(fpv, &layout);
  CHECK(layout.grids[3].t == 2);
  CHECK(layout.total - layout.level_offset[3] == 2);
}

TEST_CASE("zero pyramid flattens to level embeddings plus projection bias") {
  Rng rng(7);
  ParamStore ps;
  InteractionConfig cfg = small_cfg();
  CrossTaskInteraction inter(ps, rng, cfg, {6, 10});

  Rng prng(11);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}, {1, 1, 1}}, {6, 10}, 0.0);
  Value tokens = inter.flatten_pyramid(fp);
  const Tensor& emb = ps.get("interaction.level_embed").val();
  const Tensor& b0 = ps.get("interaction.level_proj0.b").val();
  const Tensor& b1 = ps.get("interaction.level_proj1.b").val();
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c < 8; ++c)
      CHECK(tokens.val()[r * 8 + c] == doctest::Approx(emb[c] + b0[c]).epsilon(1e-12));
  for (long c = 0; c < 8; ++c)
    CHECK(tokens.val()[4 * 8 + c] == doctest::Approx(emb[8 + c] + b1[c]).epsilon(1e-12));
}

TEST_CASE("refine keeps query count and width") {
  Rng rng(13);
  ParamStore ps;
  InteractionConfig cfg = small_cfg();
  cfg.depth = 3;
  CrossTaskInteraction inter(ps, rng, cfg, {6, 10});
  Rng prng(17);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}, {1, 1, 1}}, {6, 10});
  auto refined = inter.refine(fp, true);
  CHECK(refined.queries.rows() == 4);
  CHECK(refined.queries.cols() == 8);
  // K/V holds queries plus the 5 feature tokens
  CHECK(refined.last_attention.rows() == 4);
  CHECK(refined.last_attention.cols() == 9);
}

TEST_CASE("depth one equals a single layer call") {
  Rng rng(19);
  ParamStore ps;
  CrossTaskInteraction inter(ps, rng, small_cfg(), {6, 10});
  Rng prng(23);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}, {1, 1, 1}}, {6, 10});

  auto refined = inter.refine(fp);
  Value feats = inter.flatten_pyramid(fp);
  Value kv = ops::concat_rows({inter.queries(), feats});
  Value direct = inter.layers()[0].forward(inter.queries(), kv);
  for (long i = 0; i < direct.val().numel(); ++i)
    CHECK(refined.queries.val()[i] == doctest::Approx(direct.val()[i]).epsilon(1e-12));
}

TEST_CASE("query self-attention with identity value path matches closed form") {
  // with no feature tokens the layer degenerates to self-attention over the
  // queries; identity wv/wo and one head give q + softmax(qWq (qWk)^T / sqrt(C)) q
  Rng rng(29);
  ParamStore ps;
  MultiHeadAttention attn(ps, rng, "attn", 4, 1);
  auto set_identity = [&](const std::string& name) {
    Value p = ps.get(name);
    Tensor id({4, 4});
    for (long i = 0; i < 4; ++i) id[i * 4 + i] = 1.0;
    p.mutable_val() = id;
  };
  set_identity("attn.wv.w");
  set_identity("attn.wo.w");

  Rng prng(31);
  Tensor qv = random_tensor({4, 4}, prng);
  Value q = Value::leaf(qv);
  Value residual = ops::add(q, attn.forward(q, q));

  using EM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const EM> Q(qv.data(), 4, 4);
  Eigen::Map<const EM> Wq(ps.get("attn.wq.w").val().data(), 4, 4);
  Eigen::Map<const EM> Wk(ps.get("attn.wk.w").val().data(), 4, 4);
  EM scores = (Q * Wq) * (Q * Wk).transpose() / 2.0;  // sqrt(4) = 2
  EM probs(4, 4);
  for (int r = 0; r < 4; ++r) {
    double mx = scores.row(r).maxCoeff();
    double sum = 0;
    for (int c = 0; c < 4; ++c) sum += std::exp(scores(r, c) - mx);
    for (int c = 0; c < 4; ++c) probs(r, c) = std::exp(scores(r, c) - mx) / sum;
  }
  EM expected = Q + probs * Q;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(residual.val()[r * 4 + c] == doctest::Approx(expected(r, c)).epsilon(1e-10));
}

TEST_CASE("permuting query parameter rows permutes refined queries") {
  Rng rng(37);
  ParamStore ps;
  InteractionConfig cfg = small_cfg();
  cfg.depth = 2;
  CrossTaskInteraction inter(ps, rng, cfg, {6, 10});
  Rng prng(41);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}, {1, 1, 1}}, {6, 10});

  Tensor base = inter.refine(fp).queries.val();

  const std::vector<long> perm = {2, 0, 3, 1};
  Value qp = ps.get("interaction.queries");
  Tensor orig = qp.val();
  Tensor permuted({4, 8});
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c < 8; ++c) permuted[r * 8 + c] = orig[perm[static_cast<size_t>(r)] * 8 + c];
  qp.mutable_val() = permuted;

  Tensor out = inter.refine(fp).queries.val();
  for (long r = 0; r < 4; ++r)
    for (long c = 0; c < 8; ++c)
      CHECK(out[r * 8 + c] == doctest::Approx(base[perm[static_cast<size_t>(r)] * 8 + c]).epsilon(1e-6));
  // mean pooling over rows is invariant
  for (long c = 0; c < 8; ++c) {
    double a = 0, b = 0;
    for (long r = 0; r < 4; ++r) {
      a += base[r * 8 + c];
      b += out[r * 8 + c];
    }
    CHECK(a / 4 == doctest::Approx(b / 4).epsilon(1e-5));
  }
}

TEST_CASE("attention output is invariant to key/value order") {
  Rng rng(43);
  Value q = Value::leaf(random_tensor({3, 6}, rng));
  Tensor kv = random_tensor({8, 6}, rng);
  Tensor kv_perm({8, 6});
  const long perm[8] = {5, 2, 7, 0, 3, 6, 1, 4};
  for (long r = 0; r < 8; ++r)
    for (long c = 0; c < 6; ++c) kv_perm[r * 6 + c] = kv[perm[r] * 6 + c];

  Value out_a = ops::attention(q, Value::leaf(kv), Value::leaf(kv), 0.4);
  Value out_b = ops::attention(q, Value::leaf(kv_perm), Value::leaf(kv_perm), 0.4);
  for (long i = 0; i < out_a.val().numel(); ++i)
    CHECK(out_a.val()[i] == doctest::Approx(out_b.val()[i]).epsilon(1e-6));
}

TEST_CASE("zeroed output projections reduce a layer to double layer norm") {
  Rng rng(47);
  ParamStore ps;
  CrossTaskInteraction inter(ps, rng, small_cfg(), {6});
  ps.get("interaction.layer0.attn.wo.w").mutable_val().fill(0.0);
  ps.get("interaction.layer0.ffn.fc2.w").mutable_val().fill(0.0);

  Rng prng(53);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}}, {6});
  Tensor out = inter.refine(fp).queries.val();

  // oracle: LN(LN(Q)) applied row-wise with unit gamma, zero beta
  auto ln = [](Tensor x) {
    const long m = x.rows(), c = x.cols();
    for (long r = 0; r < m; ++r) {
      double mean = 0, var = 0;
      for (long j = 0; j < c; ++j) mean += x[r * c + j];
      mean /= c;
      for (long j = 0; j < c; ++j) var += (x[r * c + j] - mean) * (x[r * c + j] - mean);
      var /= c;
      for (long j = 0; j < c; ++j) x[r * c + j] = (x[r * c + j] - mean) / std::sqrt(var + 1e-5);
    }
    return x;
  };
  Tensor expected = ln(ln(ps.get("interaction.queries").val()));
  for (long i = 0; i < out.numel(); ++i) CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-10));
}

TEST_CASE("attention maps are a normalized partition over levels") {
  Rng rng(59);
  ParamStore ps;
  InteractionConfig cfg = small_cfg();
  CrossTaskInteraction inter(ps, rng, cfg, {6, 10});
  Rng prng(61);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}, {1, 1, 1}}, {6, 10});
  auto refined = inter.refine(fp, true);

  // full attention rows sum to one
  const Tensor& att = refined.last_attention;
  for (long r = 0; r < att.rows(); ++r) {
    double s = 0;
    for (long c = 0; c < att.cols(); ++c) s += att[r * att.cols() + c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }

  auto maps0 = attention_maps(att, refined.layout, cfg.num_queries, 0);
  auto maps1 = attention_maps(att, refined.layout, cfg.num_queries, 1);
  REQUIRE(maps0.size() == 4);
  for (long qi = 0; qi < 4; ++qi) {
    for (long i = 0; i < maps0[static_cast<size_t>(qi)].grid.numel(); ++i)
      CHECK(maps0[static_cast<size_t>(qi)].grid[i] >= 0.0);
    // query mass + level masses partition the row
    double query_mass = 0;
    for (long c = 0; c < 4; ++c) query_mass += att[qi * att.cols() + c];
    const double total = query_mass + maps0[static_cast<size_t>(qi)].mass + maps1[static_cast<size_t>(qi)].mass;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS_WITH_AS(attention_maps(att, refined.layout, cfg.num_queries, 7), doctest::Contains("LevelOutOfRange"),
                       Error);
}

TEST_CASE("zero query projection gives exactly uniform attention maps") {
  Rng rng(67);
  ParamStore ps;
  InteractionConfig cfg = small_cfg();
  CrossTaskInteraction inter(ps, rng, cfg, {6});
  ps.get("interaction.layer0.attn.wq.w").mutable_val().fill(0.0);
  ps.get("interaction.layer0.attn.wq.b").mutable_val().fill(0.0);

  Rng prng(71);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}}, {6});
  auto refined = inter.refine(fp, true);
  const double uniform = 1.0 / 8.0;  // N + M = 4 + 4
  for (long i = 0; i < refined.last_attention.numel(); ++i)
    CHECK(refined.last_attention[i] == doctest::Approx(uniform).epsilon(1e-12));
}

TEST_CASE("interaction gradients match finite differences") {
  Rng rng(73);
  ParamStore ps;
  InteractionConfig cfg;
  cfg.num_queries = 3;
  cfg.width = 8;
  cfg.depth = 1;
  cfg.heads = 2;
  cfg.ffn_expansion = 1.0;
  CrossTaskInteraction inter(ps, rng, cfg, {5});
  CHECK(ps.count() < 2000);

  Rng prng(79);
  FeaturePyramid fp = fake_pyramid(prng, {{1, 2, 2}}, {5});
  Tensor w = random_tensor({3, 8}, prng);
  auto forward = [&] { return ops::sum_all(ops::mul(inter.refine(fp).queries, ops::constant(w))); };
  CHECK(omnifd::testing::grad_check_params(forward, ps) < 1e-4);
}
