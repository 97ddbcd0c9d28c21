#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omnifd/core/rng.hpp"
#include "omnifd/core/tensor.hpp"

namespace omnifd::data {

// Ground truth for one sample across all four tasks.
struct AnnotationRecord {
  std::string sample_id;
  bool is_video = false;
  bool is_fake = false;
  double fps = 0.0;                                 // videos only
  std::vector<Tensor> masks;                        // 1 (image) or T (video) {H,W} binary grids
  std::vector<std::pair<double, double>> segments;  // seconds; fake videos only
  std::uint64_t generator_seed = 0;

  void validate(long h, long w, long t_frames) const;
};

struct Sample {
  Tensor pixels;  // {H,W,3} image or {T,H,W,3} video, values in [0,1]
  AnnotationRecord ann;
};

struct GeneratorConfig {
  long images = 2000;
  long videos = 400;
  long height = 32;
  long width = 32;
  long video_frames = 32;
  double fps = 8.0;
  std::uint64_t seed = 1;
};

// Writes one split (manifest + per-sample blob and annotation record).
// Generation is a pure function of (config, split name); even/odd sample
// indices alternate real/fake for an exact 50/50 balance.
void generate_split(const std::string& dir, const std::string& split_name, const GeneratorConfig& cfg);

Sample make_image_sample(const GeneratorConfig& cfg, const std::string& split_name, long index);
Sample make_video_sample(const GeneratorConfig& cfg, const std::string& split_name, long index);

// Raw tensor blob I/O (u8 payload, values quantized to 1/255 steps).
void write_blob(const std::string& path, const Tensor& t);
Tensor read_blob(const std::string& path);

void write_annotation(const std::string& path, const AnnotationRecord& ann);
AnnotationRecord read_annotation(const std::string& path);

class Dataset {
 public:
  // Loads a split from disk into memory (the desk-scale benchmark is a few
  // tens of megabytes).
  static Dataset load(const std::string& dir);

  long image_count() const { return static_cast<long>(image_idx_.size()); }
  long video_count() const { return static_cast<long>(video_idx_.size()); }
  long size() const { return static_cast<long>(samples_.size()); }
  const Sample& sample(long i) const { return samples_[static_cast<size_t>(i)]; }
  const Sample& image(long i) const { return samples_[static_cast<size_t>(image_idx_[static_cast<size_t>(i)])]; }
  const Sample& video(long i) const { return samples_[static_cast<size_t>(video_idx_[static_cast<size_t>(i)])]; }
  const std::string& dir() const { return dir_; }

  std::vector<long> image_indices_by_label(bool fake) const;
  std::vector<long> video_indices_by_label(bool fake) const;

 private:
  std::string dir_;
  std::vector<Sample> samples_;
  std::vector<long> image_idx_, video_idx_;
};

struct BatchSpec {
  long images_per_batch = 16;
  long videos_per_batch = 2;
  long frame_count = 16;
  long frame_stride = 2;
};

struct BatchItem {
  long dataset_index = 0;
  bool is_video = false;
};

// Uniform-with-replacement sampler, class-balanced in expectation by
// drawing the label first. Deterministic given the seed; the whole stream
// state is one u64 for checkpointing.
class MixedBatchSampler {
 public:
  MixedBatchSampler(const Dataset& ds, BatchSpec spec, std::uint64_t seed);

  std::vector<BatchItem> next_batch();

  std::uint64_t state() const { return rng_.state(); }
  void set_state(std::uint64_t s) { rng_.set_state(s); }
  const BatchSpec& spec() const { return spec_; }

 private:
  const Dataset& ds_;
  BatchSpec spec_;
  Rng rng_;
  std::vector<long> img_real_, img_fake_, vid_real_, vid_fake_;
};

}  // namespace omnifd::data
