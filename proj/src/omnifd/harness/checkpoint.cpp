#include "omnifd/harness/checkpoint.hpp"

#include <fstream>

namespace omnifd {

using nlohmann::json;

namespace {

void write_tensor(std::ofstream& f, const Tensor& t) {
  const std::uint32_t ndim = static_cast<std::uint32_t>(t.ndim());
  f.write(reinterpret_cast<const char*>(&ndim), 4);
  for (int i = 0; i < t.ndim(); ++i) {
    const std::int64_t d = t.dim(i);
    f.write(reinterpret_cast<const char*>(&d), 8);
  }
  f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
}

Tensor read_tensor(std::ifstream& f) {
  std::uint32_t ndim = 0;
  f.read(reinterpret_cast<char*>(&ndim), 4);
  std::vector<long> shape(ndim);
  for (auto& d : shape) {
    std::int64_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 8);
    d = static_cast<long>(v);
  }
  Tensor t(shape);
  f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
  return t;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(errc::IoError, "cannot write checkpoint " + path);
  f.write("OFDC", 4);
  f.write(reinterpret_cast<const char*>(&kFormatVersion), 4);

  json header;
  header["step"] = step;
  header["sampler_state"] = sampler_state;
  header["opt_steps"] = opt_steps;
  header["config"] = config_echo;
  json names = json::array();
  for (const auto& [name, t] : params) names.push_back(name);
  header["params"] = names;
  header["has_optimizer"] = !opt_state.empty();
  const std::string hs = header.dump();
  const std::uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  for (const auto& [name, t] : params) write_tensor(f, t);
  for (const auto& [name, slot] : opt_state) {
    write_tensor(f, slot.m);
    write_tensor(f, slot.v);
  }
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(errc::IoError, "cannot read checkpoint " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::string(magic, 4) != "OFDC") throw Error(errc::IoError, "bad checkpoint magic");
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), 4);
  if (version != kFormatVersion) throw Error(errc::IoError, "unsupported checkpoint version");
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  json header = json::parse(hs);

  Checkpoint ck;
  ck.step = header["step"].get<long>();
  ck.sampler_state = header["sampler_state"].get<std::uint64_t>();
  ck.opt_steps = header["opt_steps"].get<long>();
  ck.config_echo = header["config"];
  for (const auto& name : header["params"]) ck.params[name.get<std::string>()] = read_tensor(f);
  if (header["has_optimizer"].get<bool>())
    for (const auto& name : header["params"]) {
      AdamW::Slot slot;
      slot.m = read_tensor(f);
      slot.v = read_tensor(f);
      ck.opt_state[name.get<std::string>()] = std::move(slot);
    }
  return ck;
}

Checkpoint Checkpoint::capture(long step, std::uint64_t sampler_state, const json& config_echo,
                               const ParamStore& params, const AdamW* opt) {
  Checkpoint ck;
  ck.step = step;
  ck.sampler_state = sampler_state;
  ck.config_echo = config_echo;
  for (const auto& [name, p] : params.all()) ck.params[name] = p.val();
  if (opt) {
    ck.opt_steps = opt->steps_taken();
    ck.opt_state = opt->slots();
  }
  return ck;
}

void Checkpoint::restore_params(ParamStore& store) const {
  for (const auto& [name, t] : params) {
    const Value& p = store.get(name);
    if (!p.val().same_shape(t)) throw Error(errc::ShapeMismatch, "checkpoint tensor shape mismatch: " + name);
    p.mutable_val() = t;
  }
}

void Checkpoint::restore_optimizer(AdamW& opt) const {
  opt.set_steps_taken(opt_steps);
  for (auto& [name, slot] : opt.slots()) {
    auto it = opt_state.find(name);
    if (it == opt_state.end()) throw Error(errc::IoError, "checkpoint missing optimizer state for " + name);
    slot = it->second;
  }
}

}  // namespace omnifd
