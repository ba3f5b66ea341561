#include "mal/config.hpp"

#include <fstream>
#include <set>

#include "mal/errors.hpp"

namespace mal {

namespace {

using nlohmann::json;

const char* kernel_form_name(KernelForm f) { return f == KernelForm::kSquared ? "squared" : "absolute"; }
const char* update_name(MeanFieldUpdate u) { return u == MeanFieldUpdate::kClamp ? "clamp" : "normalized"; }
const char* optimizer_name(Optimizer o) { return o == Optimizer::kAdam ? "adam" : "gd"; }

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = get<T>(j, key);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void RunConfig::validate() const {
  try {
    crf.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  require(weights.alpha_mil >= 0.0 && weights.alpha_crf >= 0.0, "alpha_mil and alpha_crf must be >= 0");
  require(expansion.theta >= 0.0, "theta must be >= 0");
  require(crop_width >= 1 && crop_height >= 1, "crop size must be at least 1x1");
  require(logit.steps >= 0, "steps must be >= 0");
  require(logit.learning_rate > 0.0, "learning_rate must be > 0");
  require(logit.init_noise >= 0.0, "init_noise must be >= 0");
  require(logit.ema_momentum >= 0.0 && logit.ema_momentum <= 1.0, "ema_momentum must lie in [0, 1]");
  require(logit.adam_beta1 >= 0.0 && logit.adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
  require(logit.adam_beta2 >= 0.0 && logit.adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
  require(logit.adam_eps > 0.0, "adam_eps must be > 0");
  require(threads >= 1, "threads must be >= 1");
  require(!output_dir.empty(), "output_dir must not be empty");
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["omega"] = c.crf.omega;
  j["zeta"] = c.crf.zeta;
  j["kernel_form"] = kernel_form_name(c.crf.kernel_form);
  j["mean_field_update"] = update_name(c.crf.update);
  j["mean_field_max_iters"] = c.crf.max_iters;
  j["mean_field_tol"] = c.crf.tol;
  j["threshold"] = c.crf.threshold;
  j["alpha_mil"] = c.weights.alpha_mil;
  j["alpha_crf"] = c.weights.alpha_crf;
  j["theta"] = c.expansion.theta;
  j["crop_width"] = c.crop_width;
  j["crop_height"] = c.crop_height;
  j["optimizer"] = optimizer_name(c.logit.optimizer);
  j["learning_rate"] = c.logit.learning_rate;
  j["steps"] = c.logit.steps;
  j["init_noise"] = c.logit.init_noise;
  j["ema_momentum"] = c.logit.ema_momentum;
  j["adam_beta1"] = c.logit.adam_beta1;
  j["adam_beta2"] = c.logit.adam_beta2;
  j["adam_eps"] = c.logit.adam_eps;
  j["negative_bags"] = c.logit.bags.negative_bags;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  return j;
}

RunConfig config_from_json(const json& j) {
  require(j.is_object(), "config must be a JSON object");
  RunConfig c;
  const std::set<std::string> known = [] {
    std::set<std::string> k;
    const auto defaults = to_json(RunConfig{});
    for (const auto& [key, _] : defaults.items()) k.insert(key);
    return k;
  }();
  for (const auto& [key, _] : j.items()) {
    require(known.count(key) == 1, "unknown config key '" + key + "'");
  }

  read(j, "omega", c.crf.omega);
  read(j, "zeta", c.crf.zeta);
  read(j, "mean_field_max_iters", c.crf.max_iters);
  read(j, "mean_field_tol", c.crf.tol);
  read(j, "threshold", c.crf.threshold);
  if (j.contains("kernel_form")) {
    const auto s = get<std::string>(j, "kernel_form");
    require(s == "squared" || s == "absolute", "kernel_form must be 'squared' or 'absolute'");
    c.crf.kernel_form = s == "squared" ? KernelForm::kSquared : KernelForm::kAbsolute;
  }
  if (j.contains("mean_field_update")) {
    const auto s = get<std::string>(j, "mean_field_update");
    require(s == "normalized" || s == "clamp", "mean_field_update must be 'normalized' or 'clamp'");
    c.crf.update = s == "clamp" ? MeanFieldUpdate::kClamp : MeanFieldUpdate::kNormalized;
  }
  read(j, "alpha_mil", c.weights.alpha_mil);
  read(j, "alpha_crf", c.weights.alpha_crf);
  read(j, "theta", c.expansion.theta);
  read(j, "crop_width", c.crop_width);
  read(j, "crop_height", c.crop_height);
  if (j.contains("optimizer")) {
    const auto s = get<std::string>(j, "optimizer");
    require(s == "gd" || s == "adam", "optimizer must be 'gd' or 'adam'");
    c.logit.optimizer = s == "adam" ? Optimizer::kAdam : Optimizer::kGradientDescent;
  }
  read(j, "learning_rate", c.logit.learning_rate);
  read(j, "steps", c.logit.steps);
  read(j, "init_noise", c.logit.init_noise);
  read(j, "ema_momentum", c.logit.ema_momentum);
  read(j, "adam_beta1", c.logit.adam_beta1);
  read(j, "adam_beta2", c.logit.adam_beta2);
  read(j, "adam_eps", c.logit.adam_eps);
  read(j, "negative_bags", c.logit.bags.negative_bags);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "output_dir", c.output_dir);
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace mal
