#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omtsim {

// Configuration-driven experiment runner behind the CLI. Configs are JSON
// objects with a strict schema (unknown keys rejected); every run writes
// delimited-text outputs plus manifest.json holding the fully resolved
// config, its hash, and wall-clock metadata. Passing a previously emitted
// manifest (recognized by its embedded "config" object) reruns the original
// experiment bit-exactly, timestamps aside.
struct ExperimentOutput {
  std::string experiment;
  std::vector<std::string> files;  // paths of written files (absolute)
  std::string manifest_path;
  uint64_t config_hash = 0;
};

ExperimentOutput run_experiment_text(const std::string& config_text,
                                     const std::string& out_dir);

ExperimentOutput run_experiment_file(const std::string& config_path,
                                     const std::string& out_dir);

// FNV-1a over the canonical (sorted-key) dump; stable across platforms.
uint64_t fnv1a64(const std::string& bytes);

}  // namespace omtsim
