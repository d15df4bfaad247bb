#include "omtsim.h"

#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "error.hpp"
#include "experiments.hpp"
#include "gaussian.hpp"
#include "params.hpp"
#include "presets.hpp"
#include "qubit_ops.hpp"

namespace {

using nlohmann::json;

thread_local std::string g_last_error;

omtsim_status code_of(omtsim::ErrorCode c) {
  switch (c) {
    case omtsim::ErrorCode::InvalidArgument:
      return OMTSIM_ERR_INVALID_ARGUMENT;
    case omtsim::ErrorCode::ParseError:
      return OMTSIM_ERR_PARSE;
    case omtsim::ErrorCode::NotFound:
      return OMTSIM_ERR_NOT_FOUND;
    case omtsim::ErrorCode::SolverFailure:
      return OMTSIM_ERR_SOLVER;
    case omtsim::ErrorCode::IoError:
      return OMTSIM_ERR_IO;
    case omtsim::ErrorCode::Internal:
      return OMTSIM_ERR_INTERNAL;
  }
  return OMTSIM_ERR_INTERNAL;
}

template <typename Fn>
omtsim_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return OMTSIM_OK;
  } catch (const omtsim::Error& e) {
    g_last_error = e.what();
    return code_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return OMTSIM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return OMTSIM_ERR_INTERNAL;
  }
}

void require_arg(bool cond, const char* what) {
  omtsim::require(cond, omtsim::ErrorCode::InvalidArgument, what);
}

}  // namespace

struct omtsim_params {
  omtsim::PhysicalParams p;
};

extern "C" {

const char* omtsim_version(void) { return "1.0.0"; }

const char* omtsim_last_error(void) { return g_last_error.c_str(); }

omtsim_status omtsim_params_from_preset(const char* name, const char* data_dir,
                                        omtsim_params** out) {
  return guarded([&] {
    require_arg(name != nullptr && out != nullptr,
                "name and out must be non-NULL");
    const omtsim::Preset preset =
        omtsim::load_preset(name, data_dir ? data_dir : "");
    *out = new omtsim_params{preset.physical};
  });
}

omtsim_status omtsim_params_from_json(const char* json_text,
                                      omtsim_params** out) {
  return guarded([&] {
    require_arg(json_text != nullptr && out != nullptr,
                "json_text and out must be non-NULL");
    *out = new omtsim_params{omtsim::physical_params_from_json_text(json_text)};
  });
}

void omtsim_params_free(omtsim_params* p) { delete p; }

omtsim_status omtsim_derive_rates(const omtsim_params* p, double tau,
                                  double eta, double* out_rates) {
  return guarded([&] {
    require_arg(p != nullptr && out_rates != nullptr,
                "params and out_rates must be non-NULL");
    omtsim::ChannelParams ch;
    ch.tau = tau;
    ch.eta = eta;
    ch.validate();
    const omtsim::EffectiveRates r = omtsim::derive_rates(p->p, ch);
    out_rates[0] = r.gamma_meas;
    out_rates[1] = r.gamma_mech_1;
    out_rates[2] = r.gamma_mech_2;
    out_rates[3] = r.gamma_loss_1;
    out_rates[4] = r.gamma_relax;
    out_rates[5] = r.gamma_phi;
    out_rates[6] = r.eta;
    out_rates[7] = r.tau;
  });
}

omtsim_status omtsim_eliminate(const omtsim_params* p, double phi,
                               double* out_rates) {
  return guarded([&] {
    require_arg(p != nullptr && out_rates != nullptr,
                "params and out_rates must be non-NULL");
    const omtsim::EliminationResult r = omtsim::eliminate(p->p, phi);
    out_rates[0] = r.gamma_meas;
    out_rates[1] = r.gamma_total;
    out_rates[2] = r.gamma_excess;
  });
}

omtsim_status omtsim_concurrence(const double* rho_interleaved, double* out) {
  return guarded([&] {
    require_arg(rho_interleaved != nullptr && out != nullptr,
                "rho and out must be non-NULL");
    omtsim::Mat4c rho;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const int k = 2 * (4 * i + j);
        rho(i, j) = {rho_interleaved[k], rho_interleaved[k + 1]};
      }
    *out = omtsim::concurrence(rho);
  });
}

omtsim_status omtsim_run_experiment(const char* config, const char* out_dir,
                                    const char* overrides_json,
                                    char** manifest_path_out) {
  return guarded([&] {
    require_arg(config != nullptr && out_dir != nullptr,
                "config and out_dir must be non-NULL");

    std::string text;
    const char* c = config;
    while (*c && std::isspace(static_cast<unsigned char>(*c))) ++c;
    if (*c == '{') {
      text = config;
    } else {
      std::ifstream in(config);
      omtsim::require(in.good(), omtsim::ErrorCode::IoError,
                      std::string("cannot open ") + config);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }

    if (overrides_json != nullptr && std::strlen(overrides_json) > 0) {
      json doc;
      try {
        doc = json::parse(text);
      } catch (const json::parse_error& e) {
        omtsim::fail(omtsim::ErrorCode::ParseError,
                     std::string("config parse error: ") + e.what());
      }
      omtsim::require(doc.is_object(), omtsim::ErrorCode::ParseError,
                      "config must be an object");
      json ov;
      try {
        ov = json::parse(overrides_json);
      } catch (const json::parse_error& e) {
        omtsim::fail(omtsim::ErrorCode::ParseError,
                     std::string("overrides parse error: ") + e.what());
      }
      omtsim::require(ov.is_object(), omtsim::ErrorCode::ParseError,
                      "overrides must be an object");
      // Overrides land inside the resolved config of a manifest.
      json& cfg = doc.contains("config") ? doc["config"] : doc;
      omtsim::require(cfg.is_object(), omtsim::ErrorCode::ParseError,
                      "config must be an object");
      if (ov.contains("experiment") && cfg.contains("experiment") &&
          cfg["experiment"] != ov["experiment"]) {
        omtsim::fail(omtsim::ErrorCode::InvalidArgument,
                     "config is for experiment " +
                         cfg["experiment"].get<std::string>() + ", not " +
                         ov["experiment"].get<std::string>());
      }
      for (auto it = ov.begin(); it != ov.end(); ++it) cfg[it.key()] = *it;
      text = doc.dump();
    }

    const omtsim::ExperimentOutput result =
        omtsim::run_experiment_text(text, out_dir);
    if (manifest_path_out != nullptr) {
      char* s = new char[result.manifest_path.size() + 1];
      std::memcpy(s, result.manifest_path.c_str(),
                  result.manifest_path.size() + 1);
      *manifest_path_out = s;
    }
  });
}

void omtsim_string_free(char* s) { delete[] s; }

}  // extern "C"
