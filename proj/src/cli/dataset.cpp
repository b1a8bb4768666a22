#include <algorithm>
#include <cctype>
#include <sstream>

#include "fusemetrics/cli.hpp"
#include "fusemetrics/error.hpp"

namespace fusemetrics::cli {

namespace fs = std::filesystem;

fs::path Dataset::ir_path(const std::string& scene) const { return root / "ir" / (scene + ".pgm"); }
fs::path Dataset::vis_path(const std::string& scene) const {
  return root / "vis" / (scene + ".pgm");
}
fs::path Dataset::fused_path(const std::string& method, const std::string& scene) const {
  return root / "fused" / method / (scene + ".pgm");
}
fs::path Dataset::labels_path() const { return root / "env_labels.json"; }

Dataset scan_dataset(const fs::path& root) {
  for (const char* sub : {"ir", "vis", "fused"}) {
    if (!fs::is_directory(root / sub)) {
      throw Error(ErrorCode::LayoutError, "dataset " + root.string() + " has no " + sub + "/ directory");
    }
  }
  Dataset ds;
  ds.root = root;
  for (const auto& entry : fs::directory_iterator(root / "ir")) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      ds.scenes.push_back(entry.path().stem().string());
    }
  }
  for (const auto& entry : fs::directory_iterator(root / "fused")) {
    if (entry.is_directory()) ds.methods.push_back(entry.path().filename().string());
  }
  std::sort(ds.scenes.begin(), ds.scenes.end());
  std::sort(ds.methods.begin(), ds.methods.end());
  if (ds.scenes.empty()) throw Error(ErrorCode::LayoutError, "dataset " + root.string() + " has no scenes");
  if (ds.methods.empty()) {
    throw Error(ErrorCode::LayoutError, "dataset " + root.string() + " has no fused methods");
  }
  for (const auto& scene : ds.scenes) {
    if (!fs::is_regular_file(ds.vis_path(scene))) {
      throw Error(ErrorCode::LayoutError, "missing " + ds.vis_path(scene).string());
    }
    for (const auto& method : ds.methods) {
      if (!fs::is_regular_file(ds.fused_path(method, scene))) {
        throw Error(ErrorCode::LayoutError, "missing " + ds.fused_path(method, scene).string());
      }
    }
  }
  return ds;
}

metrics::FusionTriple load_triple(const Dataset& ds, const std::string& scene,
                                  const std::string& method) {
  metrics::FusionTriple t;
  t.ir = load_gray(ds.ir_path(scene));
  t.vis = load_gray(ds.vis_path(scene));
  t.fused = load_gray(ds.fused_path(method, scene));
  t.method_id = method;
  t.scene_id = scene;
  metrics::validate(t);
  return t;
}

EnvSource env_source_from_name(const std::string& name) {
  if (name == "model") return EnvSource::Model;
  if (name == "file") return EnvSource::File;
  if (name == "heuristic") return EnvSource::Heuristic;
  throw Error(ErrorCode::InvalidArgument, "--env must be model, file or heuristic, got '" + name + "'");
}

std::map<std::string, double> scene_env(const Dataset& ds, EnvSource source) {
  std::vector<env::RawLabel> raw;
  if (source == EnvSource::File) {
    if (!fs::is_regular_file(ds.labels_path())) {
      throw Error(ErrorCode::MissingArtifact, "missing " + ds.labels_path().string());
    }
    const auto all = env::read_label_file(ds.labels_path());
    for (const auto& scene : ds.scenes) {
      auto it = std::find_if(all.begin(), all.end(),
                             [&](const env::RawLabel& l) { return l.scene_id == scene; });
      if (it == all.end()) {
        throw Error(ErrorCode::LayoutError, ds.labels_path().string() + " has no label for " + scene);
      }
      raw.push_back(*it);
    }
  } else if (source == EnvSource::Heuristic) {
    for (const auto& scene : ds.scenes) {
      const auto [ill, obs] = env::env_heuristic(load_gray(ds.vis_path(scene)));
      raw.push_back({scene, ill, obs});
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "scene_env: model env is predicted per image");
  }
  std::map<std::string, double> out;
  for (const env::EnvLabel& l : env::normalize_labels(raw).labels) out[l.scene_id] = l.env;
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string body = line;
    bool quoted = false;
    for (std::size_t i = 0; i < body.size(); ++i) {
      if (body[i] == '"') quoted = !quoted;
      if (body[i] == '#' && !quoted) {
        body.resize(i);
        break;
      }
    }
    body = trim(body);
    if (body.empty() || (body.front() == '[' && body.back() == ']')) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(number) + ": empty key");
    }
    std::replace(key.begin(), key.end(), '_', '-');
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    } else if (!value.empty() && (value.front() == '"' || value.back() == '"')) {
      throw Error(ErrorCode::ParseError, "config line " + std::to_string(number) + ": unbalanced quote");
    }
    out[key] = value;
  }
  return out;
}

}  // namespace fusemetrics::cli
