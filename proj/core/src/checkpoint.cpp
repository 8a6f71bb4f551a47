#include "spckd/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "binary_io.hpp"

namespace spckd {

using nlohmann::json;

Checkpoint make_checkpoint(const ExperimentConfig& config,
                           SpcSystem<float>& system, std::uint32_t epoch,
                           std::string history_json) {
  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.epoch = epoch;
  ckpt.history_json = std::move(history_json);
  for (auto& [name, p] : system.named_parameters())
    ckpt.tensors.emplace_back(name, p->value);
  return ckpt;
}

void checkpoint_save(const Checkpoint& ckpt, const std::string& path) {
  json manifest = json::array();
  std::uint64_t offset = 0;  // in f32 elements from the payload start
  for (const auto& [name, tensor] : ckpt.tensors) {
    manifest.push_back(
        {{"name", name}, {"shape", tensor.shape()}, {"offset", offset}});
    offset += tensor.size();
  }
  json header;
  header["config"] = json::parse(experiment_config_to_json(ckpt.config));
  header["epoch"] = ckpt.epoch;
  header["manifest"] = manifest;
  const std::string header_text = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  os.write("SPKD", 4);
  detail::write_u32(os, 1);
  detail::write_u32(os, static_cast<std::uint32_t>(header_text.size()));
  os.write(header_text.data(),
           static_cast<std::streamsize>(header_text.size()));
  for (const auto& [name, tensor] : ckpt.tensors)
    detail::write_f32_array(os, tensor.data(), tensor.size());
  detail::write_u32(os, static_cast<std::uint32_t>(ckpt.history_json.size()));
  os.write(ckpt.history_json.data(),
           static_cast<std::streamsize>(ckpt.history_json.size()));
  if (!os) throw FormatError("short write to '" + path + "'");
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + path + "'");
  detail::expect_magic(is, "SPKD", "checkpoint");
  const std::uint32_t version = detail::read_u32(is, "checkpoint version");
  if (version != 1)
    throw FormatError("checkpoint '" + path + "': unsupported version " +
                      std::to_string(version));
  const std::uint32_t header_len = detail::read_u32(is, "header length");
  std::string header_text(header_len, '\0');
  if (!is.read(header_text.data(), header_len))
    throw FormatError("checkpoint '" + path + "': truncated header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint '" + path + "': bad header JSON: " +
                      e.what());
  }
  if (!header.contains("config") || !header.contains("manifest"))
    throw FormatError("checkpoint '" + path + "': incomplete header");

  Checkpoint ckpt;
  ckpt.config = experiment_config_from_json(header["config"].dump());
  ckpt.epoch = header.value("epoch", 0u);

  std::uint64_t expected_offset = 0;
  for (const json& entry : header["manifest"]) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    if (offset != expected_offset)
      throw FormatError("checkpoint '" + path + "': tensor '" + name +
                        "' has offset " + std::to_string(offset) +
                        ", expected " + std::to_string(expected_offset));
    Tensor<float> tensor(shape);
    detail::read_f32_array(is, tensor.data(), tensor.size(),
                           ("tensor '" + name + "'").c_str());
    expected_offset += tensor.size();
    ckpt.tensors.emplace_back(name, std::move(tensor));
  }
  const std::uint32_t trailer_len = detail::read_u32(is, "trailer length");
  ckpt.history_json.assign(trailer_len, '\0');
  if (!is.read(ckpt.history_json.data(), trailer_len))
    throw FormatError("checkpoint '" + path + "': truncated trailer");
  return ckpt;
}

SpcSystem<float> system_from_checkpoint(const Checkpoint& ckpt) {
  const ExperimentConfig& c = ckpt.config;
  SpcSystem<float> sys = make_system<float>(
      c.sensing.gamma, c.data.image_rows, c.data.image_cols, c.data.bands,
      c.sensing.mode, c.network.stages, c.network.channels, c.train.seed);

  auto params = sys.named_parameters();
  if (params.size() != ckpt.tensors.size())
    throw FormatError("checkpoint declares " +
                      std::to_string(ckpt.tensors.size()) + " tensors, the " +
                      "configured system has " +
                      std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = ckpt.tensors[i];
    if (name != params[i].first)
      throw FormatError("checkpoint tensor '" + name + "' does not match '" +
                        params[i].first + "' in the configured system");
    if (tensor.shape() != params[i].second->value.shape())
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        shape_to_string(tensor.shape()) + ", expected " +
                        shape_to_string(params[i].second->value.shape()));
    params[i].second->value = tensor;
    params[i].second->zero_grad();
  }
  return sys;
}

}  // namespace spckd
