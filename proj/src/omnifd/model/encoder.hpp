#pragma once

#include <array>
#include <string>
#include <vector>

#include "omnifd/model/media.hpp"
#include "omnifd/model/modules.hpp"

namespace omnifd {

struct EncoderConfig {
  std::array<long, 3> patch{1, 4, 4};   // (t, h, w)
  std::vector<long> stage_depths{2, 2, 2, 2};
  std::vector<long> stage_dims{24, 48, 96, 192};
  std::vector<long> stage_heads{2, 2, 2, 2};
  std::array<long, 3> window{2, 4, 4};  // (t, h, w); dims clamp to the grid
  double mlp_ratio = 4.0;
  long input_h = 32;
  long input_w = 32;
  long max_frames = 16;  // upper bound on post-patch temporal length

  long stages() const { return static_cast<long>(stage_dims.size()); }
  void validate() const;
};

struct GridShape {
  long t = 1, h = 1, w = 1;
  long numel() const { return t * h * w; }
};

struct PyramidLevel {
  Value tokens;  // (t*h*w) x channels, t-major, then h, then w
  GridShape grid;
  long channels = 0;
};

struct FeaturePyramid {
  std::vector<PyramidLevel> levels;
  Modality modality = Modality::kImage;
  double fps = 0.0;
  long frame_stride = 1;
  long input_h = 0, input_w = 0, input_t = 1;
};

// Shared spatiotemporal backbone. One parameter set processes both images
// (T = 1) and videos; the execution path never branches on modality.
class UnifiedEncoder {
 public:
  UnifiedEncoder(ParamStore& ps, Rng& rng, EncoderConfig cfg, const std::string& prefix = "encoder");

  FeaturePyramid encode(const MediaTensor& x) const;

  // Patch embedding plus positional encodings; exposed for tests.
  Value patch_embed(const MediaTensor& x, GridShape* grid_out = nullptr) const;

  const EncoderConfig& config() const { return cfg_; }

 private:
  struct Block {
    LayerNormModule ln1, ln2;
    MultiHeadAttention attn;
    FeedForward mlp;
    bool shifted = false;
  };
  struct Stage {
    std::vector<Block> blocks;
    // Patch merging into the next stage (absent on the last stage).
    LayerNormModule merge_ln;
    LinearLayer merge;
    bool has_merge = false;
  };

  Value run_block(const Block& blk, Value tokens, const GridShape& grid) const;

  EncoderConfig cfg_;
  LinearLayer patch_proj_;
  Value pos_spatial_;   // (grid_h*grid_w) x C1
  Value pos_temporal_;  // max_frames x C1
  std::vector<Stage> stages_;
};

// Window partition bookkeeping: a row permutation grouping each window's
// cells contiguously, with optional cyclic pre-shift. Exposed for tests.
struct WindowPlan {
  std::vector<long> perm;      // gather order into window-major layout
  std::vector<long> inv_perm;  // gather order back to grid-major layout
  long window_size = 1;
  std::array<long, 3> eff_window{1, 1, 1};
};
WindowPlan make_window_plan(const GridShape& grid, const std::array<long, 3>& window, bool shifted);

}  // namespace omnifd
