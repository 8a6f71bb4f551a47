#ifndef SPCKD_CHECKPOINT_HPP
#define SPCKD_CHECKPOINT_HPP

#include <string>
#include <utility>
#include <vector>

#include "spckd/config.hpp"
#include "spckd/recovery.hpp"

namespace spckd {

// Trained system snapshot. On disk ("SPKD"): u32 version, a length-prefixed
// JSON header (config echo, epoch, tensor manifest with names/shapes/
// offsets), little-endian f32 payloads in manifest order, and a
// length-prefixed JSON trailer holding the metric history.
struct Checkpoint {
  ExperimentConfig config;
  std::uint32_t epoch = 0;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;
  std::string history_json = "[]";
};

Checkpoint make_checkpoint(const ExperimentConfig& config,
                           SpcSystem<float>& system, std::uint32_t epoch,
                           std::string history_json);

void checkpoint_save(const Checkpoint& ckpt, const std::string& path);

// Throws FormatError on bad magic, version, truncation, or manifest
// inconsistencies. Loading leaves no partial state behind.
Checkpoint checkpoint_load(const std::string& path);

// Rebuild the system from the config echo and load every tensor by name;
// mismatched or missing tensors raise FormatError naming the offender.
SpcSystem<float> system_from_checkpoint(const Checkpoint& ckpt);

}  // namespace spckd

#endif  // SPCKD_CHECKPOINT_HPP
