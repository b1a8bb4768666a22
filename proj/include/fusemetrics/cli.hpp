#pragma once

// Command line front end and the dataset layout it reads:
//
//   <root>/ir/<scene>.pgm
//   <root>/vis/<scene>.pgm
//   <root>/fused/<method>/<scene>.pgm
//   <root>/env_labels.json        (optional, needed for --env file)

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fusemetrics/environment.hpp"
#include "fusemetrics/metrics.hpp"

namespace fusemetrics::cli {

struct Dataset {
  std::filesystem::path root;
  std::vector<std::string> scenes;   // sorted
  std::vector<std::string> methods;  // sorted

  std::filesystem::path ir_path(const std::string& scene) const;
  std::filesystem::path vis_path(const std::string& scene) const;
  std::filesystem::path fused_path(const std::string& method, const std::string& scene) const;
  std::filesystem::path labels_path() const;
};

/// Throws LayoutError when a directory or any (scene, method) image is missing.
Dataset scan_dataset(const std::filesystem::path& root);
metrics::FusionTriple load_triple(const Dataset& ds, const std::string& scene,
                                  const std::string& method);

enum class EnvSource { Model, File, Heuristic };
EnvSource env_source_from_name(const std::string& name);

/// Normalized env weight per scene. File mode reads env_labels.json (LayoutError
/// when a scene has no label); heuristic mode labels every scene's visible image.
std::map<std::string, double> scene_env(const Dataset& ds, EnvSource source);

/// TOML-style `key = value` lines; `#` starts a comment, `[section]` headers
/// are ignored, values may be quoted. Keys are normalized to use '-'.
/// Throws ParseError with the line number.
std::map<std::string, std::string> parse_config(const std::string& text);

inline constexpr const char* kSeedEnvVar = "FUSEMETRICS_SEED";

/// Entry point shared by the executable and the tests. Returns the process
/// exit code; hard errors are reported on `err` as a one-line JSON object.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fusemetrics::cli
