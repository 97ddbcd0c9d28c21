#include "omnifd/model/encoder.hpp"

#include <cmath>

namespace omnifd {

void EncoderConfig::validate() const {
  if (stage_dims.size() < 2) throw Error(errc::BadConfig, "encoder needs at least two stages");
  if (stage_depths.size() != stage_dims.size() || stage_heads.size() != stage_dims.size())
    throw Error(errc::BadConfig, "stage config lists must have equal length");
  for (size_t i = 1; i < stage_dims.size(); ++i)
    if (stage_dims[i] < stage_dims[i - 1]) throw Error(errc::BadConfig, "stage_dims must be nondecreasing");
  for (long d : {patch[0], patch[1], patch[2], window[0], window[1], window[2]})
    if (d < 1) throw Error(errc::BadConfig, "patch/window dims must be >= 1");
  for (size_t i = 0; i < stage_dims.size(); ++i)
    if (stage_dims[i] % stage_heads[i] != 0) throw Error(errc::BadConfig, "stage dim not divisible by heads");
  if (input_h % patch[1] != 0 || input_w % patch[2] != 0)
    throw Error(errc::NonDivisibleResolution, "configured input not divisible by patch size");
}

WindowPlan make_window_plan(const GridShape& grid, const std::array<long, 3>& window, bool shifted) {
  WindowPlan plan;
  const long wt = std::min(window[0], grid.t);
  const long wh = std::min(window[1], grid.h);
  const long ww = std::min(window[2], grid.w);
  if (grid.t % wt != 0 || grid.h % wh != 0 || grid.w % ww != 0)
    throw Error(errc::ShapeMismatch, "token grid not divisible by window");
  plan.eff_window = {wt, wh, ww};
  plan.window_size = wt * wh * ww;
  const long st = shifted ? wt / 2 : 0;
  const long sh = shifted ? wh / 2 : 0;
  const long sw = shifted ? ww / 2 : 0;

  const long n = grid.numel();
  plan.perm.resize(static_cast<size_t>(n));
  plan.inv_perm.resize(static_cast<size_t>(n));
  long out = 0;
  for (long bt = 0; bt < grid.t / wt; ++bt)
    for (long bh = 0; bh < grid.h / wh; ++bh)
      for (long bw = 0; bw < grid.w / ww; ++bw)
        for (long dt = 0; dt < wt; ++dt)
          for (long dh = 0; dh < wh; ++dh)
            for (long dw = 0; dw < ww; ++dw) {
              // cyclic shift folded into the gather
              const long t = (bt * wt + dt + st) % grid.t;
              const long h = (bh * wh + dh + sh) % grid.h;
              const long w = (bw * ww + dw + sw) % grid.w;
              const long src = (t * grid.h + h) * grid.w + w;
              plan.perm[static_cast<size_t>(out)] = src;
              plan.inv_perm[static_cast<size_t>(src)] = out;
              ++out;
            }
  return plan;
}

UnifiedEncoder::UnifiedEncoder(ParamStore& ps, Rng& rng, EncoderConfig cfg, const std::string& prefix)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  const long patch_vol = cfg_.patch[0] * cfg_.patch[1] * cfg_.patch[2] * 3;
  const long c1 = cfg_.stage_dims[0];
  patch_proj_ = LinearLayer(ps, rng, prefix + ".patch", patch_vol, c1);
  const long grid_h = cfg_.input_h / cfg_.patch[1];
  const long grid_w = cfg_.input_w / cfg_.patch[2];
  pos_spatial_ = ps.create(prefix + ".pos_spatial", init::normal({grid_h * grid_w, c1}, rng, 0.02));
  pos_temporal_ = ps.create(prefix + ".pos_temporal", init::normal({cfg_.max_frames, c1}, rng, 0.02));

  for (long s = 0; s < cfg_.stages(); ++s) {
    Stage stage;
    const long dim = cfg_.stage_dims[static_cast<size_t>(s)];
    const long heads = cfg_.stage_heads[static_cast<size_t>(s)];
    const long hidden = static_cast<long>(std::lround(dim * cfg_.mlp_ratio));
    for (long b = 0; b < cfg_.stage_depths[static_cast<size_t>(s)]; ++b) {
      const std::string bp = prefix + ".stage" + std::to_string(s) + ".block" + std::to_string(b);
      Block blk;
      blk.ln1 = LayerNormModule(ps, bp + ".ln1", dim);
      blk.ln2 = LayerNormModule(ps, bp + ".ln2", dim);
      blk.attn = MultiHeadAttention(ps, rng, bp + ".attn", dim, heads);
      blk.mlp = FeedForward(ps, rng, bp + ".mlp", dim, hidden);
      blk.shifted = (b % 2 == 1);  // alternate regular and shifted windows
      stage.blocks.push_back(std::move(blk));
    }
    if (s + 1 < cfg_.stages()) {
      const std::string mp = prefix + ".stage" + std::to_string(s) + ".merge";
      // merge factor depends on the runtime grid (temporal merging only
      // when frames remain); allocate for the maximal 2x2x2 case and slice.
      stage.merge_ln = LayerNormModule(ps, mp + ".ln", dim);
      stage.merge = LinearLayer(ps, rng, mp, 8 * dim, cfg_.stage_dims[static_cast<size_t>(s + 1)]);
      stage.has_merge = true;
    }
    stages_.push_back(std::move(stage));
  }
}

Value UnifiedEncoder::patch_embed(const MediaTensor& x, GridShape* grid_out) const {
  const Tensor& px = x.data;
  if (px.ndim() != 4 || px.dim(3) != 3) throw Error(errc::ShapeMismatch, "patch_embed: expected {T,H,W,3}");
  const long t = px.dim(0), h = px.dim(1), w = px.dim(2);
  const auto [pt, ph, pw] = cfg_.patch;
  if (h % ph != 0 || w % pw != 0)
    throw Error(errc::NonDivisibleResolution, "input resolution not divisible by patch size");
  if (h / ph != cfg_.input_h / ph || w / pw != cfg_.input_w / pw)
    throw Error(errc::ShapeMismatch, "input resolution does not match configured positional tables");

  GridShape grid;
  grid.t = (t + pt - 1) / pt;  // trailing frames zero-padded
  grid.h = h / ph;
  grid.w = w / pw;
  if (grid.t > cfg_.max_frames) throw Error(errc::ShapeMismatch, "clip longer than configured max_frames");

  const long patch_vol = pt * ph * pw * 3;
  Tensor patches({grid.numel(), patch_vol});
  long row = 0;
  for (long gt = 0; gt < grid.t; ++gt)
    for (long gh = 0; gh < grid.h; ++gh)
      for (long gw = 0; gw < grid.w; ++gw, ++row) {
        double* dst = patches.data() + row * patch_vol;
        long e = 0;
        for (long dt = 0; dt < pt; ++dt) {
          const long src_t = gt * pt + dt;
          for (long dh = 0; dh < ph; ++dh)
            for (long dw = 0; dw < pw; ++dw)
              for (long c = 0; c < 3; ++c, ++e)
                dst[e] = (src_t < t) ? px[((src_t * h + gh * ph + dh) * w + gw * pw + dw) * 3 + c] : 0.0;
        }
      }

  Value tokens = patch_proj_.forward(ops::constant(std::move(patches)));
  const long hw = grid.h * grid.w;
  std::vector<long> sp_idx(static_cast<size_t>(grid.numel()));
  std::vector<long> tm_idx(static_cast<size_t>(grid.numel()));
  for (long i = 0; i < grid.numel(); ++i) {
    sp_idx[static_cast<size_t>(i)] = i % hw;
    tm_idx[static_cast<size_t>(i)] = i / hw;
  }
  tokens = ops::add_gathered(tokens, pos_spatial_, std::move(sp_idx));
  tokens = ops::add_gathered(tokens, pos_temporal_, std::move(tm_idx));
  if (grid_out) *grid_out = grid;
  return tokens;
}

Value UnifiedEncoder::run_block(const Block& blk, Value tokens, const GridShape& grid) const {
  WindowPlan plan = make_window_plan(grid, cfg_.window, blk.shifted);
  Value normed = blk.ln1.forward(tokens);
  Value windowed = ops::gather_rows(normed, plan.perm);
  Value attended = blk.attn.forward_windowed(windowed, plan.window_size);
  Value restored = ops::gather_rows(attended, plan.inv_perm);
  tokens = ops::add(tokens, restored);
  tokens = ops::add(tokens, blk.mlp.forward(blk.ln2.forward(tokens)));
  return tokens;
}

FeaturePyramid UnifiedEncoder::encode(const MediaTensor& x) const {
  GridShape grid;
  Value tokens = patch_embed(x, &grid);

  FeaturePyramid fp;
  fp.modality = x.modality;
  fp.fps = x.fps;
  fp.frame_stride = x.frame_stride;
  fp.input_h = x.height();
  fp.input_w = x.width();
  fp.input_t = x.frames();

  for (long s = 0; s < cfg_.stages(); ++s) {
    const Stage& stage = stages_[static_cast<size_t>(s)];
    for (const Block& blk : stage.blocks) tokens = run_block(blk, tokens, grid);

    fp.levels.push_back({tokens, grid, cfg_.stage_dims[static_cast<size_t>(s)]});

    if (stage.has_merge) {
      const long mt = grid.t >= 2 ? 2 : 1;
      const long mh = grid.h >= 2 ? 2 : 1;
      const long mw = grid.w >= 2 ? 2 : 1;
      GridShape next{std::max(1L, grid.t / 2), std::max(1L, grid.h / 2), std::max(1L, grid.w / 2)};
      const long dim = cfg_.stage_dims[static_cast<size_t>(s)];
      const long cells = mt * mh * mw;

      Value normed = stage.merge_ln.forward(tokens);
      std::vector<long> perm;
      perm.reserve(static_cast<size_t>(next.numel() * cells));
      for (long nt = 0; nt < next.t; ++nt)
        for (long nh = 0; nh < next.h; ++nh)
          for (long nw = 0; nw < next.w; ++nw)
            for (long dt = 0; dt < mt; ++dt)
              for (long dh = 0; dh < mh; ++dh)
                for (long dw = 0; dw < mw; ++dw)
                  perm.push_back(((nt * mt + dt) * grid.h + nh * mh + dh) * grid.w + nw * mw + dw);
      Value gathered = ops::gather_rows(normed, std::move(perm));
      Value merged_rows = ops::reshape(gathered, {next.numel(), cells * dim});
      // the merge projection is allocated for the full 2x2x2 case; smaller
      // merges use the leading rows of the weight matrix
      Value wslice = cells * dim == stage.merge.w.rows()
                         ? stage.merge.w
                         : ops::slice_rows(stage.merge.w, 0, cells * dim);
      tokens = ops::add_rowvec(ops::matmul(merged_rows, wslice), stage.merge.b);
      grid = next;
    }
  }
  return fp;
}

}  // namespace omnifd
