#include "config.hpp"

#include <fstream>

#include "ctstage/error.hpp"
#include "ctstage/rng.hpp"

namespace ctstage::cli {

using nlohmann::json;

namespace {

json train_json(const TrainConfig& c) {
  json j = to_json(c);
  j.erase("seed");
  return j;
}

TrainConfig train_from(const json& j, const TrainConfig& d, const std::string& field) {
  TrainConfig c = train_config_from_json(j, d);
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("config field '" + field + "': " + e.what());
  }
  return c;
}

const char* kind_name(const json& j) {
  if (j.is_boolean()) return "a boolean";
  if (j.is_number_unsigned()) return "a non-negative integer";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  if (j.is_object()) return "an object";
  if (j.is_array()) return "an array";
  return "null";
}

bool same_kind(const json& value, const json& reference) {
  if (reference.is_boolean()) return value.is_boolean();
  if (reference.is_number_unsigned()) return value.is_number_unsigned();
  if (reference.is_number()) return value.is_number();
  if (reference.is_string()) return value.is_string();
  if (reference.is_object()) return value.is_object();
  if (reference.is_array()) return value.is_array();
  return false;
}

// Checks `value` against the shape of `reference` (the defaults).
void check_schema(const json& value, const json& reference, const std::string& path) {
  for (const auto& [key, v] : value.items()) {
    const std::string field = path.empty() ? key : path + "." + key;
    if (!reference.contains(key)) throw ValidationError("unknown config field '" + field + "'");
    const json& ref = reference.at(key);
    if (!same_kind(v, ref))
      throw ValidationError("config field '" + field + "' must be " + kind_name(ref) + ", got " + kind_name(v));
    if (ref.is_object()) check_schema(v, ref, field);
  }
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ValidationError("override '" + assignment + "' must have the form field.path=value");
  const std::string path = assignment.substr(0, eq);
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ValidationError("override '" + assignment + "' has an empty field name");
    if (dot == std::string::npos) {
      (*node)[key] = parse_override_value(assignment.substr(eq + 1));
      return;
    }
    json& next = (*node)[key];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ValidationError("config field '" + path.substr(0, dot) + "' is not an object");
    node = &next;
    start = dot + 1;
  }
}

template <typename F>
void with_field(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    throw ValidationError("config field '" + field + "': " + e.what());
  }
}

}  // namespace

std::size_t ExperimentConfig::multistage_parameter_count() const {
  std::size_t total = 0;
  for (std::size_t c = 1; c <= 3; ++c) total += RegressorSpec{c, hidden_layers, width, true}.parameter_count();
  return total;
}

RegressorSpec ExperimentConfig::postprocess_spec() const {
  if (postprocess_width > 0) return RegressorSpec{1, hidden_layers, postprocess_width, true};
  return budget_matched_postprocess_spec(multistage_parameter_count(), hidden_layers);
}

MultiStageTrainOptions ExperimentConfig::multistage_options() const {
  MultiStageTrainOptions o;
  o.configs = stages;
  o.hidden_layers = hidden_layers;
  o.width = width;
  o.hq_angles = simulate.hq_angles;
  o.reference_mode = reference_mode;
  o.seed = stream_seed(*this, SeedStream::Train);
  return o;
}

std::uint64_t stream_seed(const ExperimentConfig& c, SeedStream s) {
  return derive_seed(c.seed, static_cast<std::uint64_t>(s));
}

json to_json(const ExperimentConfig& c) {
  json degrade = to_json(c.simulate.degrade);
  degrade.erase("seed");
  return {{"seed", c.seed},
          {"phantom",
           {{"size", c.phantom.size},
            {"bubbles", c.phantom.bubbles},
            {"r_min", c.phantom.r_min},
            {"r_max", c.phantom.r_max},
            {"cylinder_fraction", c.phantom.cylinder_fraction},
            {"max_attempts", c.phantom.max_attempts}}},
          {"geometry", {{"hq_angles", c.simulate.hq_angles}, {"lq_factor", c.simulate.lq_factor}}},
          {"degrade", degrade},
          {"network",
           {{"hidden_layers", c.hidden_layers},
            {"width", c.width},
            {"postprocess_width", c.postprocess_width},
            {"reference_mode", to_string(c.reference_mode)}}},
          {"train",
           {{"projection", train_json(c.stages.projection)},
            {"sinogram", train_json(c.stages.sinogram)},
            {"reconstruction", train_json(c.stages.reconstruction)},
            {"postprocess", train_json(c.postprocess)}}},
          {"evaluate", {{"median_denoise_size", c.median_denoise_size}}}};
}

ExperimentConfig config_from_json(const json& j) {
  const ExperimentConfig d;
  check_schema(j, to_json(d), "");
  const json full = [&] {
    json merged = to_json(d);
    merged.merge_patch(j);
    return merged;
  }();

  ExperimentConfig c;
  c.seed = full.at("seed").get<std::uint64_t>();
  const json& ph = full.at("phantom");
  c.phantom.size = ph.at("size").get<std::size_t>();
  c.phantom.bubbles = ph.at("bubbles").get<std::size_t>();
  c.phantom.r_min = ph.at("r_min").get<double>();
  c.phantom.r_max = ph.at("r_max").get<double>();
  c.phantom.cylinder_fraction = ph.at("cylinder_fraction").get<double>();
  c.phantom.max_attempts = ph.at("max_attempts").get<std::size_t>();
  c.phantom.seed = stream_seed(c, SeedStream::Phantom);
  with_field("phantom", [&] { c.phantom.validate(); });

  c.simulate.hq_angles = full.at("geometry").at("hq_angles").get<std::size_t>();
  c.simulate.lq_factor = full.at("geometry").at("lq_factor").get<std::size_t>();
  c.simulate.degrade = degrade_spec_from_json(full.at("degrade"));
  c.simulate.degrade.seed = stream_seed(c, SeedStream::Degrade);
  c.simulate.degrade.validate();  // messages already name "degrade.<field>"
  with_field("geometry", [&] { c.simulate.validate(); });

  const json& net = full.at("network");
  c.hidden_layers = net.at("hidden_layers").get<std::size_t>();
  c.width = net.at("width").get<std::size_t>();
  c.postprocess_width = net.at("postprocess_width").get<std::size_t>();
  with_field("network.reference_mode",
             [&] { c.reference_mode = reference_mode_from_string(net.at("reference_mode").get<std::string>()); });
  with_field("network", [&] {
    RegressorSpec{1, c.hidden_layers, c.width, true}.validate();
    c.postprocess_spec().validate();
  });

  const json& tr = full.at("train");
  c.stages.projection = train_from(tr.at("projection"), d.stages.projection, "train.projection");
  c.stages.sinogram = train_from(tr.at("sinogram"), d.stages.sinogram, "train.sinogram");
  c.stages.reconstruction = train_from(tr.at("reconstruction"), d.stages.reconstruction, "train.reconstruction");
  c.postprocess = train_from(tr.at("postprocess"), d.postprocess, "train.postprocess");
  c.median_denoise_size = full.at("evaluate").at("median_denoise_size").get<std::size_t>();
  if (c.median_denoise_size > 0 && c.median_denoise_size % 2 == 0)
    throw ValidationError("config field 'evaluate.median_denoise_size' must be 0 or odd");
  return c;
}

ExperimentConfig load_config(const std::filesystem::path* file, const std::vector<std::string>& overrides) {
  json j = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw PersistenceError("cannot open config file " + file->string());
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError("config file " + file->string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ValidationError("config file " + file->string() + " must hold a JSON object");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

}  // namespace ctstage::cli
