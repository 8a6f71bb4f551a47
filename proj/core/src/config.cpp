#include "spckd/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace spckd {
namespace {

using nlohmann::json;

std::string role_name(TrainRole role) {
  switch (role) {
    case TrainRole::Teacher: return "teacher";
    case TrainRole::Baseline: return "baseline";
    case TrainRole::StudentKD: return "student-kd";
  }
  return "teacher";
}

TrainRole role_from(const std::string& s) {
  if (s == "teacher") return TrainRole::Teacher;
  if (s == "baseline") return TrainRole::Baseline;
  if (s == "student-kd") return TrainRole::StudentKD;
  throw ConfigError("unknown train role '" + s + "'");
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["id"] = c.id;
  j["data"] = {{"manifest", c.data.manifest},
               {"image_rows", c.data.image_rows},
               {"image_cols", c.data.image_cols},
               {"bands", c.data.bands},
               {"patch_size", c.data.patch_size}};
  j["sensing"] = {
      {"gamma", c.sensing.gamma},
      {"mode", c.sensing.mode == ApertureMode::Binary ? "binary" : "real"},
      {"noise",
       {{"kind", c.sensing.noise.kind == NoiseKind::None ? "none" : "awgn"},
        {"snr_db", c.sensing.noise.snr_db},
        {"seed", c.sensing.noise.seed}}}};
  j["network"] = {{"stages", c.network.stages},
                  {"channels", c.network.channels}};
  j["train"] = {{"role", role_name(c.train.role)},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"optimizer",
                 c.train.optimizer == OptimKind::Adam ? "adam" : "sgd"},
                {"seed", c.train.seed},
                {"teacher_checkpoint", c.train.teacher_checkpoint},
                {"teacher_gamma", c.train.teacher_gamma}};
  j["distill"] = {
      {"inv_two_sigma_sq", c.distill.inv_two_sigma_sq},
      {"feature_kind",
       c.distill.feature_kind == FeatureKind::Sparse ? "sparse" : "nonsparse"},
      {"cc_weight", c.distill.cc_weight},
      {"im_weight", c.distill.im_weight}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.id = j.value("id", c.id);
  if (j.contains("data")) {
    const json& d = j["data"];
    c.data.manifest = d.value("manifest", c.data.manifest);
    c.data.image_rows = d.value("image_rows", c.data.image_rows);
    c.data.image_cols = d.value("image_cols", c.data.image_cols);
    c.data.bands = d.value("bands", c.data.bands);
    c.data.patch_size = d.value("patch_size", c.data.patch_size);
  }
  if (j.contains("sensing")) {
    const json& s = j["sensing"];
    c.sensing.gamma = s.value("gamma", c.sensing.gamma);
    const std::string mode = s.value("mode", std::string("binary"));
    if (mode == "binary")
      c.sensing.mode = ApertureMode::Binary;
    else if (mode == "real")
      c.sensing.mode = ApertureMode::RealValued;
    else
      throw ConfigError("unknown aperture mode '" + mode + "'");
    if (s.contains("noise")) {
      const json& n = s["noise"];
      const std::string kind = n.value("kind", std::string("none"));
      if (kind == "none")
        c.sensing.noise.kind = NoiseKind::None;
      else if (kind == "awgn")
        c.sensing.noise.kind = NoiseKind::AdditiveWhiteGaussian;
      else
        throw ConfigError("unknown noise kind '" + kind + "'");
      c.sensing.noise.snr_db = n.value("snr_db", c.sensing.noise.snr_db);
      c.sensing.noise.seed = n.value("seed", c.sensing.noise.seed);
    }
  }
  if (j.contains("network")) {
    const json& n = j["network"];
    c.network.stages = n.value("stages", c.network.stages);
    c.network.channels = n.value("channels", c.network.channels);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train.role = role_from(t.value("role", std::string("teacher")));
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    const std::string opt = t.value("optimizer", std::string("adam"));
    if (opt == "adam")
      c.train.optimizer = OptimKind::Adam;
    else if (opt == "sgd")
      c.train.optimizer = OptimKind::SGD;
    else
      throw ConfigError("unknown optimizer '" + opt + "'");
    c.train.seed = t.value("seed", c.train.seed);
    c.train.teacher_checkpoint =
        t.value("teacher_checkpoint", c.train.teacher_checkpoint);
    c.train.teacher_gamma = t.value("teacher_gamma", c.train.teacher_gamma);
  }
  if (j.contains("distill")) {
    const json& d = j["distill"];
    c.distill.inv_two_sigma_sq =
        d.value("inv_two_sigma_sq", c.distill.inv_two_sigma_sq);
    const std::string kind = d.value("feature_kind", std::string("sparse"));
    if (kind == "sparse")
      c.distill.feature_kind = FeatureKind::Sparse;
    else if (kind == "nonsparse")
      c.distill.feature_kind = FeatureKind::NonSparse;
    else
      throw ConfigError("unknown feature kind '" + kind + "'");
    c.distill.cc_weight = d.value("cc_weight", c.distill.cc_weight);
    c.distill.im_weight = d.value("im_weight", c.distill.im_weight);
  }
  return c;
}

}  // namespace

void validate_config(const ExperimentConfig& c) {
  if (!(c.sensing.gamma > 0.0) || c.sensing.gamma > 1.0)
    throw ConfigError("sensing.gamma must be in (0, 1]");
  if (c.network.stages < 1) throw ConfigError("network.stages must be >= 1");
  if (c.network.channels < 1)
    throw ConfigError("network.channels must be >= 1");
  if (c.data.image_rows < 1 || c.data.image_cols < 1 || c.data.bands < 1)
    throw ConfigError("data dimensions must be >= 1");
  if (c.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.train.role == TrainRole::StudentKD) {
    if (c.train.teacher_checkpoint.empty())
      throw ConfigError("student-kd training requires a teacher checkpoint");
  } else if (!c.train.teacher_checkpoint.empty()) {
    throw ConfigError("teacher checkpoint is only valid for student-kd");
  }
  if (c.distill.inv_two_sigma_sq <= 0.0)
    throw ConfigError("distill.inv_two_sigma_sq must be positive");
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  return to_json(config).dump(2);
}

ExperimentConfig experiment_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << is.rdbuf();
  ExperimentConfig c = experiment_config_from_json(buf.str());
  validate_config(c);
  return c;
}

void save_experiment_config(const ExperimentConfig& config,
                            const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write config '" + path + "'");
  os << experiment_config_to_json(config) << "\n";
}

}  // namespace spckd
