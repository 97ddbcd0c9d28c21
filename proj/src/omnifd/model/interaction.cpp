#include "omnifd/model/interaction.hpp"

namespace omnifd {

CrossTaskInteraction::CrossTaskInteraction(ParamStore& ps, Rng& rng, InteractionConfig cfg,
                                           std::vector<long> level_dims, const std::string& prefix)
    : cfg_(cfg), level_dims_(std::move(level_dims)) {
  cfg_.validate();
  queries_ = ps.create(prefix + ".queries", init::normal({cfg_.num_queries, cfg_.width}, rng, 0.02));
  level_embed_ =
      ps.create(prefix + ".level_embed", init::normal({static_cast<long>(level_dims_.size()), cfg_.width}, rng, 0.02));
  for (size_t l = 0; l < level_dims_.size(); ++l)
    level_proj_.emplace_back(ps, rng, prefix + ".level_proj" + std::to_string(l), level_dims_[l], cfg_.width);
  const long hidden = static_cast<long>(cfg_.width * cfg_.ffn_expansion);
  for (long d = 0; d < cfg_.depth; ++d)
    layers_.emplace_back(ps, rng, prefix + ".layer" + std::to_string(d), cfg_.width, cfg_.heads, hidden);
}

Value CrossTaskInteraction::flatten_pyramid(const FeaturePyramid& fp, TokenLayout* layout) const {
  if (fp.levels.empty()) throw Error(errc::EmptyInput, "flatten_pyramid: empty pyramid");
  if (fp.levels.size() != level_dims_.size())
    throw Error(errc::ShapeMismatch, "flatten_pyramid: level count mismatch");
  std::vector<Value> parts;
  TokenLayout tl;
  long offset = 0;
  for (size_t l = 0; l < fp.levels.size(); ++l) {
    const PyramidLevel& lvl = fp.levels[l];
    if (lvl.channels != level_dims_[l]) throw Error(errc::WidthMismatch, "flatten_pyramid: level width mismatch");
    Value proj = level_proj_[l].forward(lvl.tokens);
    std::vector<long> idx(static_cast<size_t>(lvl.grid.numel()), static_cast<long>(l));
    parts.push_back(ops::add_gathered(proj, level_embed_, std::move(idx)));
    tl.level_offset.push_back(offset);
    tl.grids.push_back(lvl.grid);
    offset += lvl.grid.numel();
  }
  tl.total = offset;
  if (layout) *layout = tl;
  return ops::concat_rows(parts);
}

CrossTaskInteraction::Refined CrossTaskInteraction::refine(const FeaturePyramid& fp, bool capture_attention) const {
  Refined out;
  Value feats = flatten_pyramid(fp, &out.layout);
  Value q = queries_;
  for (size_t d = 0; d < layers_.size(); ++d) {
    const bool last = (d + 1 == layers_.size());
    Value kv = ops::concat_rows({q, feats});
    q = layers_[d].forward(q, kv, (capture_attention && last) ? &out.last_attention : nullptr);
  }
  out.queries = q;
  return out;
}

std::vector<AttentionMap> attention_maps(const Tensor& attention, const TokenLayout& layout, long num_queries,
                                         long level) {
  if (level < 0 || level >= static_cast<long>(layout.grids.size()))
    throw Error(errc::LevelOutOfRange, "attention_maps: no such pyramid level");
  if (attention.rows() != num_queries || attention.cols() != num_queries + layout.total)
    throw Error(errc::ShapeMismatch, "attention_maps: unexpected attention shape");
  const GridShape grid = layout.grids[static_cast<size_t>(level)];
  // feature tokens start after the query block in the key sequence
  const long base = num_queries + layout.level_offset[static_cast<size_t>(level)];
  std::vector<AttentionMap> maps;
  maps.reserve(static_cast<size_t>(num_queries));
  for (long qi = 0; qi < num_queries; ++qi) {
    AttentionMap m;
    m.grid = Tensor({grid.h, grid.w});
    double mass = 0;
    for (long t = 0; t < grid.t; ++t)
      for (long h = 0; h < grid.h; ++h)
        for (long w = 0; w < grid.w; ++w) {
          const double p = attention[qi * attention.cols() + base + (t * grid.h + h) * grid.w + w];
          m.grid[h * grid.w + w] += p;
          mass += p;
        }
    // average over time so video grids stay comparable to image grids
    if (grid.t > 1) m.grid.scale_(1.0 / static_cast<double>(grid.t));
    m.mass = mass;
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace omnifd
