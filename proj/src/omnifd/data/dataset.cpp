#include "omnifd/data/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "omnifd/data/synth.hpp"

namespace omnifd::data {

namespace fs = std::filesystem;
using nlohmann::json;

void AnnotationRecord::validate(long h, long w, long t_frames) const {
  if (!is_fake) {
    for (const Tensor& m : masks)
      if (m.sum() != 0.0) throw Error(errc::BadConfig, "real sample with nonzero mask");
    if (!segments.empty()) throw Error(errc::BadConfig, "real sample with segments");
    return;
  }
  if (!is_video) {
    if (masks.size() != 1) throw Error(errc::BadConfig, "fake image needs one mask");
    const double frac = masks[0].sum() / static_cast<double>(h * w);
    if (frac < 0.01 || frac > 0.6) throw Error(errc::BadConfig, "fake image mask fraction out of range");
  } else {
    if (segments.empty()) throw Error(errc::BadConfig, "fake video needs segments");
    if (static_cast<long>(masks.size()) != t_frames) throw Error(errc::BadConfig, "fake video needs per-frame masks");
    const double duration = static_cast<double>(t_frames) / fps;
    double prev_end = -1;
    for (const auto& [s, e] : segments) {
      if (s < 0 || e > duration + 1e-9 || e <= s) throw Error(errc::BadConfig, "segment outside clip");
      if (s < prev_end) throw Error(errc::BadConfig, "overlapping segments");
      prev_end = e;
    }
    for (long f = 0; f < t_frames; ++f) {
      const double t0 = static_cast<double>(f) / fps;
      bool inside = false;
      for (const auto& [s, e] : segments)
        if (t0 >= s - 1e-9 && t0 < e - 1e-9) inside = true;
      const bool has_mask = masks[static_cast<size_t>(f)].sum() > 0;
      if (inside != has_mask) throw Error(errc::BadConfig, "mask/segment frame mismatch");
    }
  }
}

namespace {

Tensor quantize_u8(const Tensor& t) {
  Tensor out = t;
  for (long i = 0; i < out.numel(); ++i)
    out[i] = static_cast<double>(std::lround(std::min(1.0, std::max(0.0, out[i])) * 255.0)) / 255.0;
  return out;
}

json mask_to_json(const Tensor& mask) {
  const long h = mask.dim(0), w = mask.dim(1);
  json rows = json::array();
  for (long i = 0; i < h; ++i) {
    std::string row(static_cast<size_t>(w), '0');
    for (long j = 0; j < w; ++j)
      if (mask[i * w + j] > 0.5) row[static_cast<size_t>(j)] = '1';
    rows.push_back(row);
  }
  return rows;
}

Tensor mask_from_json(const json& rows) {
  const long h = static_cast<long>(rows.size());
  const long w = static_cast<long>(rows[0].get<std::string>().size());
  Tensor mask({h, w});
  for (long i = 0; i < h; ++i) {
    const std::string row = rows[static_cast<size_t>(i)].get<std::string>();
    for (long j = 0; j < w; ++j) mask[i * w + j] = row[static_cast<size_t>(j)] == '1' ? 1.0 : 0.0;
  }
  return mask;
}

}  // namespace

void write_blob(const std::string& path, const Tensor& t) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(errc::IoError, "cannot write " + path);
  f.write("OFDB", 4);
  const std::uint32_t version = 1;
  f.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint32_t ndim = static_cast<std::uint32_t>(t.ndim());
  f.write(reinterpret_cast<const char*>(&ndim), 4);
  for (int i = 0; i < t.ndim(); ++i) {
    const std::int64_t d = t.dim(i);
    f.write(reinterpret_cast<const char*>(&d), 8);
  }
  for (long i = 0; i < t.numel(); ++i) {
    const auto b = static_cast<unsigned char>(std::lround(std::min(1.0, std::max(0.0, t[i])) * 255.0));
    f.put(static_cast<char>(b));
  }
}

Tensor read_blob(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(errc::IoError, "cannot read " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::string(magic, 4) != "OFDB") throw Error(errc::IoError, "bad blob magic in " + path);
  std::uint32_t version = 0, ndim = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  f.read(reinterpret_cast<char*>(&ndim), 4);
  std::vector<long> shape(ndim);
  for (auto& d : shape) {
    std::int64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    d = static_cast<long>(v);
  }
  Tensor t(shape);
  for (long i = 0; i < t.numel(); ++i) {
    const int b = f.get();
    if (b < 0) throw Error(errc::IoError, "truncated blob " + path);
    t[i] = static_cast<double>(b) / 255.0;
  }
  return t;
}

void write_annotation(const std::string& path, const AnnotationRecord& ann) {
  json j;
  j["schema_version"] = 1;
  j["sample_id"] = ann.sample_id;
  j["modality"] = ann.is_video ? "video" : "image";
  j["label"] = ann.is_fake ? "fake" : "real";
  j["generator_seed"] = ann.generator_seed;
  if (ann.is_video) j["fps"] = ann.fps;
  json masks = json::array();
  for (const Tensor& m : ann.masks) masks.push_back(mask_to_json(m));
  j["masks"] = masks;
  json segs = json::array();
  for (const auto& [s, e] : ann.segments) segs.push_back({s, e});
  j["segments"] = segs;
  std::ofstream f(path);
  if (!f) throw Error(errc::IoError, "cannot write " + path);
  f << j.dump(1) << "\n";
}

AnnotationRecord read_annotation(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(errc::IoError, "cannot read " + path);
  json j;
  f >> j;
  AnnotationRecord ann;
  ann.sample_id = j["sample_id"].get<std::string>();
  ann.is_video = j["modality"] == "video";
  ann.is_fake = j["label"] == "fake";
  ann.generator_seed = j["generator_seed"].get<std::uint64_t>();
  if (j.contains("fps")) ann.fps = j["fps"].get<double>();
  for (const auto& m : j["masks"]) ann.masks.push_back(mask_from_json(m));
  for (const auto& s : j["segments"]) ann.segments.emplace_back(s[0].get<double>(), s[1].get<double>());
  return ann;
}

Sample make_image_sample(const GeneratorConfig& cfg, const std::string& split_name, long index) {
  const std::uint64_t seed = derive_seed(cfg.seed, split_name + "/image", static_cast<std::uint64_t>(index));
  const bool fake = index % 2 == 1;
  Sample s;
  s.ann.sample_id = "img_" + std::to_string(index);
  s.ann.is_video = false;
  s.ann.is_fake = fake;
  s.ann.generator_seed = seed;
  Tensor face = synth::gen_real_face(seed, cfg.height, cfg.width);
  if (fake) {
    synth::ForgeResult fr = synth::forge_image(face, derive_seed(seed, "image-forge"));
    s.pixels = quantize_u8(fr.image);
    s.ann.masks.push_back(std::move(fr.mask));
  } else {
    s.pixels = quantize_u8(face);
    s.ann.masks.push_back(Tensor({cfg.height, cfg.width}));
  }
  return s;
}

Sample make_video_sample(const GeneratorConfig& cfg, const std::string& split_name, long index) {
  const std::uint64_t seed = derive_seed(cfg.seed, split_name + "/video", static_cast<std::uint64_t>(index));
  const bool fake = index % 2 == 1;
  Sample s;
  s.ann.sample_id = "vid_" + std::to_string(index);
  s.ann.is_video = true;
  s.ann.is_fake = fake;
  s.ann.fps = cfg.fps;
  s.ann.generator_seed = seed;
  Tensor clip = synth::gen_video(seed, cfg.video_frames, cfg.fps, cfg.height, cfg.width);
  if (fake) {
    synth::VideoForgeResult fr = synth::forge_video(clip, derive_seed(seed, "video-forge"), cfg.fps);
    s.pixels = quantize_u8(fr.video);
    s.ann.segments = std::move(fr.segments);
    s.ann.masks = std::move(fr.frame_masks);
  } else {
    s.pixels = quantize_u8(clip);
    for (long f = 0; f < cfg.video_frames; ++f) s.ann.masks.push_back(Tensor({cfg.height, cfg.width}));
  }
  return s;
}

void generate_split(const std::string& dir, const std::string& split_name, const GeneratorConfig& cfg) {
  const fs::path root = fs::path(dir);
  fs::create_directories(root / "samples");

  json manifest;
  manifest["schema_version"] = 1;
  manifest["split"] = split_name;
  manifest["seed"] = cfg.seed;
  manifest["height"] = cfg.height;
  manifest["width"] = cfg.width;
  manifest["video_frames"] = cfg.video_frames;
  manifest["fps"] = cfg.fps;
  json list = json::array();

  for (long i = 0; i < cfg.images; ++i) {
    Sample s = make_image_sample(cfg, split_name, i);
    s.ann.validate(cfg.height, cfg.width, 1);
    write_blob((root / "samples" / (s.ann.sample_id + ".bin")).string(), s.pixels);
    write_annotation((root / "samples" / (s.ann.sample_id + ".json")).string(), s.ann);
    list.push_back({{"id", s.ann.sample_id}, {"seed", s.ann.generator_seed}});
  }
  for (long i = 0; i < cfg.videos; ++i) {
    Sample s = make_video_sample(cfg, split_name, i);
    s.ann.validate(cfg.height, cfg.width, cfg.video_frames);
    write_blob((root / "samples" / (s.ann.sample_id + ".bin")).string(), s.pixels);
    write_annotation((root / "samples" / (s.ann.sample_id + ".json")).string(), s.ann);
    list.push_back({{"id", s.ann.sample_id}, {"seed", s.ann.generator_seed}});
  }
  manifest["samples"] = list;
  std::ofstream f((root / "manifest.json").string());
  if (!f) throw Error(errc::IoError, "cannot write manifest in " + dir);
  f << manifest.dump(1) << "\n";
}

Dataset Dataset::load(const std::string& dir) {
  const fs::path root = fs::path(dir);
  std::ifstream mf((root / "manifest.json").string());
  if (!mf) throw Error(errc::IoError, "no manifest in " + dir);
  json manifest;
  mf >> manifest;

  Dataset ds;
  ds.dir_ = dir;
  for (const auto& entry : manifest["samples"]) {
    const std::string id = entry["id"].get<std::string>();
    Sample s;
    s.pixels = read_blob((root / "samples" / (id + ".bin")).string());
    s.ann = read_annotation((root / "samples" / (id + ".json")).string());
    const long idx = static_cast<long>(ds.samples_.size());
    if (s.ann.is_video)
      ds.video_idx_.push_back(idx);
    else
      ds.image_idx_.push_back(idx);
    ds.samples_.push_back(std::move(s));
  }
  return ds;
}

std::vector<long> Dataset::image_indices_by_label(bool fake) const {
  std::vector<long> out;
  for (long i : image_idx_)
    if (samples_[static_cast<size_t>(i)].ann.is_fake == fake) out.push_back(i);
  return out;
}

std::vector<long> Dataset::video_indices_by_label(bool fake) const {
  std::vector<long> out;
  for (long i : video_idx_)
    if (samples_[static_cast<size_t>(i)].ann.is_fake == fake) out.push_back(i);
  return out;
}

MixedBatchSampler::MixedBatchSampler(const Dataset& ds, BatchSpec spec, std::uint64_t seed)
    : ds_(ds), spec_(spec), rng_(derive_seed(seed, "batch-sampler")) {
  if (spec_.images_per_batch <= 0 && spec_.videos_per_batch <= 0)
    throw Error(errc::BadConfig, "batch spec requests no samples");
  if (spec_.images_per_batch > 0 && ds_.image_count() == 0)
    throw Error(errc::InsufficientModality, "images requested but the dataset has none");
  if (spec_.videos_per_batch > 0 && ds_.video_count() == 0)
    throw Error(errc::InsufficientModality, "videos requested but the dataset has none");
  img_real_ = ds.image_indices_by_label(false);
  img_fake_ = ds.image_indices_by_label(true);
  vid_real_ = ds.video_indices_by_label(false);
  vid_fake_ = ds.video_indices_by_label(true);
}

std::vector<BatchItem> MixedBatchSampler::next_batch() {
  std::vector<BatchItem> batch;
  auto draw = [&](const std::vector<long>& real_pool, const std::vector<long>& fake_pool, bool is_video) {
    // label first keeps the batch balanced in expectation even if the
    // pools are not
    const bool fake = rng_.bernoulli(0.5);
    const auto& pool = fake && !fake_pool.empty() ? fake_pool : (!fake && !real_pool.empty() ? real_pool : (fake_pool.empty() ? real_pool : fake_pool));
    const long pick = pool[static_cast<size_t>(rng_.uniform_int(0, static_cast<long>(pool.size()) - 1))];
    batch.push_back({pick, is_video});
  };
  for (long i = 0; i < spec_.images_per_batch; ++i) draw(img_real_, img_fake_, false);
  for (long v = 0; v < spec_.videos_per_batch; ++v) draw(vid_real_, vid_fake_, true);
  return batch;
}

}  // namespace omnifd::data
