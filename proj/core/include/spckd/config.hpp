#ifndef SPCKD_CONFIG_HPP
#define SPCKD_CONFIG_HPP

#include <cstdint>
#include <string>

#include "spckd/distill.hpp"
#include "spckd/sensing.hpp"

namespace spckd {

enum class OptimKind : std::uint8_t { SGD = 0, Adam = 1 };

enum class TrainRole : std::uint8_t { Teacher = 0, Baseline = 1, StudentKD = 2 };

struct DataConfig {
  std::string manifest;
  std::size_t image_rows = 32;
  std::size_t image_cols = 32;
  std::size_t bands = 1;
  std::size_t patch_size = 0;  // 0 = whole images, otherwise non-overlapping tiles
};

struct SensingConfig {
  double gamma = 0.2;
  ApertureMode mode = ApertureMode::Binary;
  NoiseSpec noise;
};

struct NetworkConfig {
  std::size_t stages = 7;
  std::size_t channels = 32;
};

struct TrainConfig {
  TrainRole role = TrainRole::Teacher;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  OptimKind optimizer = OptimKind::Adam;
  std::uint64_t seed = 0;
  std::string teacher_checkpoint;  // Student-KD only
  double teacher_gamma = 0.0;      // filled in by KD training for reporting
};

struct ExperimentConfig {
  std::string id = "experiment";
  DataConfig data;
  SensingConfig sensing;
  NetworkConfig network;
  TrainConfig train;
  DistillConfig distill;
};

// Throws ConfigError on invalid combinations (gamma range, zero stages,
// Student-KD without a teacher checkpoint or a teacher checkpoint on a
// non-KD role, ...).
void validate_config(const ExperimentConfig& config);

// JSON file round-trip. Missing keys fall back to the defaults above.
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const ExperimentConfig& config,
                            const std::string& path);

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const std::string& text);

}  // namespace spckd

#endif  // SPCKD_CONFIG_HPP
