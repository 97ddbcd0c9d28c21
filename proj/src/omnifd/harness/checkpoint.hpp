#pragma once

#include <json.hpp>
#include <map>
#include <string>

#include "omnifd/harness/optimizer.hpp"

namespace omnifd {

// Versioned binary checkpoint: a JSON header (config echo, step counters,
// RNG state, tensor directory) followed by raw float64 tensor payloads in
// name order. Save -> load -> save is byte-identical.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  long step = 0;
  std::uint64_t sampler_state = 0;
  long opt_steps = 0;
  nlohmann::json config_echo;
  std::map<std::string, Tensor> params;
  std::map<std::string, AdamW::Slot> opt_state;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Snapshot live training state / restore it.
  static Checkpoint capture(long step, std::uint64_t sampler_state, const nlohmann::json& config_echo,
                            const ParamStore& params, const AdamW* opt);
  void restore_params(ParamStore& store) const;
  void restore_optimizer(AdamW& opt) const;
};

}  // namespace omnifd
