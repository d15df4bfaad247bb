#include "presets.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "error.hpp"
#include "units.hpp"

#include <json.hpp>

namespace omtsim {

namespace {

using nlohmann::json;

json load_presets_file(const std::string& data_dir) {
  const std::string dir = data_dir.empty() ? default_data_dir() : data_dir;
  const std::string path = dir + "/presets.json";
  std::ifstream in(path);
  require(in.good(), ErrorCode::IoError, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, path + ": " + e.what());
  }
  require(doc.value("schema_version", 0) == 1, ErrorCode::ParseError,
          path + ": unsupported schema_version");
  require(doc.contains("presets") && doc["presets"].is_object(),
          ErrorCode::ParseError, path + ": missing presets object");
  return doc;
}

double get_number(const json& obj, const std::string& key,
                  const std::string& ctx) {
  require(obj.contains(key), ErrorCode::ParseError, ctx + ": missing key " + key);
  require(obj[key].is_number(), ErrorCode::ParseError,
          ctx + ": key " + key + " must be a number");
  return obj[key].get<double>();
}

const std::set<std::string> kPresetKeys = {
    "chi", "omega_m", "m_eff", "Q_m",  "gamma", "n_bar",      "Q_opt",
    "kappa", "g0",    "g",     "T1",   "T2",    "lambda_opt", "reference"};

const std::set<std::string> kReferenceKeys = {
    "power", "cooperativity", "gamma_meas", "force_sensitivity",
    "position_sensitivity"};

Preset parse_preset(const std::string& name, const json& obj) {
  const std::string ctx = "preset " + name;
  require(obj.is_object(), ErrorCode::ParseError, ctx + ": not an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    require(kPresetKeys.count(it.key()) == 1, ErrorCode::ParseError,
            ctx + ": unknown key " + it.key());

  Preset p;
  p.name = name;
  p.physical.chi = angular(get_number(obj, "chi", ctx));
  p.physical.omega_m = angular(get_number(obj, "omega_m", ctx));
  p.physical.gamma = angular(get_number(obj, "gamma", ctx));
  p.physical.n_bar = get_number(obj, "n_bar", ctx);
  p.physical.g = angular(get_number(obj, "g", ctx));
  p.physical.kappa = angular(get_number(obj, "kappa", ctx));
  p.physical.T1 = get_number(obj, "T1", ctx);
  p.physical.T2 = get_number(obj, "T2", ctx);
  p.physical.g0 = angular(get_number(obj, "g0", ctx));
  p.physical.lambda_opt = get_number(obj, "lambda_opt", ctx);
  p.physical.m_eff = get_number(obj, "m_eff", ctx);
  p.Q_m = get_number(obj, "Q_m", ctx);
  p.Q_opt = get_number(obj, "Q_opt", ctx);

  require(obj.contains("reference"), ErrorCode::ParseError,
          ctx + ": missing reference block");
  const json& ref = obj["reference"];
  for (auto it = ref.begin(); it != ref.end(); ++it)
    require(kReferenceKeys.count(it.key()) == 1, ErrorCode::ParseError,
            ctx + ": unknown reference key " + it.key());
  p.reference.power = get_number(ref, "power", ctx);
  p.reference.cooperativity = get_number(ref, "cooperativity", ctx);
  p.reference.gamma_meas = get_number(ref, "gamma_meas", ctx);
  p.reference.force_sensitivity = get_number(ref, "force_sensitivity", ctx);
  p.reference.position_sensitivity = get_number(ref, "position_sensitivity", ctx);

  p.physical.validate();
  require(p.Q_m > 0 && p.Q_opt > 0, ErrorCode::ParseError,
          ctx + ": quality factors must be positive");
  return p;
}

const std::set<std::string> kPhysicalKeys = {
    "chi", "omega_m", "gamma", "n_bar", "g", "kappa",
    "T1",  "T2",      "g0",    "lambda_opt", "m_eff"};

}  // namespace

PhysicalParams physical_params_from_json_text(const std::string& text) {
  json obj;
  try {
    obj = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, std::string("physical: ") + e.what());
  }
  require(obj.is_object(), ErrorCode::ParseError, "physical: not an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    require(kPhysicalKeys.count(it.key()) == 1, ErrorCode::ParseError,
            "physical: unknown key " + it.key());
  PhysicalParams p;
  p.chi = angular(get_number(obj, "chi", "physical"));
  p.omega_m = angular(get_number(obj, "omega_m", "physical"));
  p.gamma = angular(get_number(obj, "gamma", "physical"));
  p.n_bar = get_number(obj, "n_bar", "physical");
  p.g = angular(get_number(obj, "g", "physical"));
  p.kappa = angular(get_number(obj, "kappa", "physical"));
  p.T1 = get_number(obj, "T1", "physical");
  p.T2 = get_number(obj, "T2", "physical");
  if (obj.contains("g0")) p.g0 = angular(get_number(obj, "g0", "physical"));
  if (obj.contains("lambda_opt"))
    p.lambda_opt = get_number(obj, "lambda_opt", "physical");
  if (obj.contains("m_eff")) p.m_eff = get_number(obj, "m_eff", "physical");
  p.validate();
  return p;
}

std::string default_data_dir() {
  if (const char* env = std::getenv("OMTSIM_DATA_DIR"); env && *env)
    return env;
#ifdef OMTSIM_DATA_DIR
  return OMTSIM_DATA_DIR;
#else
  return "data";
#endif
}

std::vector<std::string> list_presets(const std::string& data_dir) {
  const json doc = load_presets_file(data_dir);
  std::vector<std::string> names;
  for (auto it = doc["presets"].begin(); it != doc["presets"].end(); ++it)
    names.push_back(it.key());
  return names;
}

Preset load_preset(const std::string& name, const std::string& data_dir) {
  const json doc = load_presets_file(data_dir);
  const json& presets = doc["presets"];
  require(presets.contains(name), ErrorCode::NotFound,
          "no preset named " + name);
  return parse_preset(name, presets[name]);
}

}  // namespace omtsim
