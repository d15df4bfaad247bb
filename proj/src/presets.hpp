#pragma once

#include <string>
#include <vector>

#include "params.hpp"

namespace omtsim {

// Target values quoted for a platform, used for cross-checks and reports.
struct ReferenceValues {
  double power = 0;                 // W
  double cooperativity = 0;         // dimensionless
  double gamma_meas = 0;            // Hz (ordinary frequency)
  double force_sensitivity = 0;     // N/sqrt(Hz)
  double position_sensitivity = 0;  // m/sqrt(Hz)
};

struct Preset {
  std::string name;
  PhysicalParams physical;  // rates already converted to angular units
  double Q_m = 0;
  double Q_opt = 0;
  ReferenceValues reference;
};

// Directory holding presets.json: $OMTSIM_DATA_DIR if set, else the path
// baked in at build time.
std::string default_data_dir();

std::vector<std::string> list_presets(const std::string& data_dir = {});

// Loads one preset by name; empty data_dir means default_data_dir().
Preset load_preset(const std::string& name, const std::string& data_dir = {});

// Parses a bare physical-parameter object (plain-frequency Hz fields, strict
// unknown-key rejection); shared by experiment configs and the C API.
PhysicalParams physical_params_from_json_text(const std::string& text);

}  // namespace omtsim
