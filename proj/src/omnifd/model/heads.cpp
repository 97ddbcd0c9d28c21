#include "omnifd/model/heads.hpp"

#include <algorithm>
#include <cmath>

namespace omnifd {

double tiou(double s1, double e1, double s2, double e2) {
  const double inter = std::max(0.0, std::min(e1, e2) - std::max(s1, s2));
  const double uni = (e1 - s1) + (e2 - s2) - inter;
  if (uni <= 0) return 0.0;
  return inter / uni;
}

std::vector<Segment> decode_segments(const Tensor& s_cls, const Tensor& s_reg, double feature_stride_seconds,
                                     const SegmentDecodeConfig& cfg) {
  const long t_len = s_cls.rows();
  if (s_reg.rows() != t_len || s_reg.cols() != 2)
    throw Error(errc::ShapeMismatch, "decode_segments: s_reg must be T x 2");
  std::vector<Segment> candidates;
  for (long t = 0; t < t_len; ++t) {
    const double z = s_cls[t];
    const double score = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    if (score < cfg.score_threshold) continue;
    Segment seg;
    seg.start = std::max(0.0, (static_cast<double>(t) - s_reg[t * 2 + 0]) * feature_stride_seconds);
    seg.end = (static_cast<double>(t) + 1.0 + s_reg[t * 2 + 1]) * feature_stride_seconds;
    seg.score = score;
    if (seg.end > seg.start) candidates.push_back(seg);
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Segment& a, const Segment& b) { return a.score > b.score; });
  std::vector<Segment> kept;
  for (const Segment& c : candidates) {
    bool suppressed = false;
    for (const Segment& k : kept)
      if (tiou(c, k) >= cfg.nms_tiou) {
        suppressed = true;
        break;
      }
    if (!suppressed) {
      kept.push_back(c);
      if (static_cast<long>(kept.size()) >= cfg.max_keep) break;
    }
  }
  return kept;
}

ClassificationHead::ClassificationHead(ParamStore& ps, Rng& rng, const std::string& prefix, long width)
    : fc(ps, rng, prefix + ".fc", width, 1) {}

Value ClassificationHead::forward(const Value& refined_queries) const {
  return fc.forward(ops::mean_rows(refined_queries));
}

SpatialHead::SpatialHead(ParamStore& ps, Rng& rng, const std::string& prefix, const std::vector<long>& level_dims,
                         long width_, long num_queries_)
    : width(width_), num_queries(num_queries_) {
  long total = 0;
  for (long d : level_dims) total += d;
  fuse = LinearLayer(ps, rng, prefix + ".fuse", total, width_);
  proj = LinearLayer(ps, rng, prefix + ".proj", num_queries_, 1);
}

Value SpatialHead::fuse_features(const FeaturePyramid& fp) const {
  if (fp.modality != Modality::kImage)
    throw Error(errc::VideoNotSupported, "spatial localization is defined for images");
  if (fp.levels.empty()) throw Error(errc::EmptyInput, "spatial_fuse: empty pyramid");
  const GridShape base = fp.levels[0].grid;
  std::vector<Value> resized;
  for (const PyramidLevel& lvl : fp.levels) {
    if (lvl.grid.t != 1) throw Error(errc::VideoNotSupported, "spatial_fuse: temporal levels present");
    if (lvl.grid.h == base.h && lvl.grid.w == base.w)
      resized.push_back(lvl.tokens);
    else
      resized.push_back(ops::bilinear_resize(lvl.tokens, lvl.grid.h, lvl.grid.w, base.h, base.w));
  }
  return fuse.forward(ops::concat_cols(resized));
}

Value SpatialHead::forward(const FeaturePyramid& fp, const Value& refined_queries) const {
  if (refined_queries.cols() != width) throw Error(errc::WidthMismatch, "spatial head width mismatch");
  Value f_sp = fuse_features(fp);
  Value similarity = ops::matmul_nt(f_sp, refined_queries);  // (H1*W1) x N
  Value low = proj.forward(similarity);                      // (H1*W1) x 1
  const GridShape base = fp.levels[0].grid;
  return ops::bilinear_resize(low, base.h, base.w, fp.input_h, fp.input_w);
}

TemporalHead::TemporalHead(ParamStore& ps, Rng& rng, const std::string& prefix, long final_dim, long width_,
                           long heads, long ffn_hidden)
    : feat_proj(ps, rng, prefix + ".feat", final_dim, width_),
      enhance(ps, rng, prefix + ".enhance", width_, heads, ffn_hidden),
      width(width_) {
  conv_cls_w = ps.create(prefix + ".conv_cls.w", init::normal({1, width_, 3}, rng, 0.02));
  conv_cls_b = ps.create(prefix + ".conv_cls.b", init::zeros({1, 1}));
  conv_reg_w = ps.create(prefix + ".conv_reg.w", init::normal({2, width_, 3}, rng, 0.02));
  conv_reg_b = ps.create(prefix + ".conv_reg.b", init::zeros({1, 2}));
}

Value TemporalHead::temporal_feature(const FeaturePyramid& fp) const {
  if (fp.modality != Modality::kVideo)
    throw Error(errc::ImageNotSupported, "temporal localization is defined for videos");
  const PyramidLevel& last = fp.levels.back();
  Value pooled = ops::group_mean_rows(last.tokens, last.grid.h * last.grid.w);
  return feat_proj.forward(pooled);
}

Value TemporalHead::enhance_features(const Value& f_tmp, const Value& refined_queries) const {
  if (f_tmp.cols() != width) throw Error(errc::WidthMismatch, "temporal head width mismatch");
  Value kv = refined_queries.defined() && refined_queries.rows() > 0
                 ? ops::concat_rows({f_tmp, refined_queries})
                 : f_tmp;
  return enhance.forward(f_tmp, kv);
}

TemporalHead::Prediction TemporalHead::predict(const Value& enhanced) const {
  Prediction p;
  p.s_cls = ops::conv1d_k3(enhanced, conv_cls_w, conv_cls_b);
  Value raw = ops::conv1d_k3(enhanced, conv_reg_w, conv_reg_b);
  // softplus keeps offsets nonnegative; the small floor rules out
  // zero-length candidates
  p.s_reg = ops::add_scalar(ops::softplus(raw), 1e-3);
  return p;
}

TemporalHead::Prediction TemporalHead::forward(const FeaturePyramid& fp, const Value& refined_queries) const {
  return predict(enhance_features(temporal_feature(fp), refined_queries));
}

}  // namespace omnifd
