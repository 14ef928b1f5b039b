/* Copyright 2026 The LW3D Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "lw3d/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace lw3d {

namespace {

template <typename T>
T scalar(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("key '" + key + "' has an invalid value");
  }
}

std::size_t count(const YAML::Node& node, const std::string& key) {
  const long long v = scalar<long long>(node, key);
  if (v <= 0) throw ConfigError("key '" + key + "' must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

ModelConfig parse_model_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  if (!root.IsMap()) throw ConfigError("model config must be a mapping");

  static const std::set<std::string> known = {"arch",           "input",       "classes", "width_mult",
                                              "shuffle_groups", "conv_groups", "widths"};
  for (const auto& kv : root) {
    const std::string key = kv.first.as<std::string>();
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "'");
  }
  for (const char* key : {"arch", "input", "classes"}) {
    if (!root[key]) throw ConfigError(std::string("missing key '") + key + "'");
  }

  ModelConfig cfg;
  try {
    cfg.arch = parse_arch(scalar<std::string>(root["arch"], "arch"));
    cfg.input = parse_shape(scalar<std::string>(root["input"], "input"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  cfg.classes = count(root["classes"], "classes");
  if (root["width_mult"]) {
    cfg.build.width_mult = scalar<double>(root["width_mult"], "width_mult");
    if (!(cfg.build.width_mult > 0)) throw ConfigError("key 'width_mult' must be positive");
  }
  if (root["shuffle_groups"]) cfg.build.shuffle_groups = count(root["shuffle_groups"], "shuffle_groups");
  if (root["conv_groups"]) cfg.build.conv_groups = count(root["conv_groups"], "conv_groups");
  if (const YAML::Node widths = root["widths"]) {
    if (!widths.IsMap()) throw ConfigError("key 'widths' must map module names to width lists");
    std::set<std::string> modules;
    for (const auto& c : canonical_widths()) modules.insert(c.name);
    for (const auto& kv : widths) {
      const std::string name = kv.first.as<std::string>();
      const std::string key = "widths." + name;
      if (!modules.contains(name)) throw ConfigError("unknown module '" + name + "' in widths");
      if (!kv.second.IsSequence() || kv.second.size() != 6) throw ConfigError("key '" + key + "' needs 6 widths");
      InceptionWidths w;
      std::size_t* fields[] = {&w.b1, &w.b2_reduce, &w.b2_out, &w.b3_reduce, &w.b3_out, &w.b4_proj};
      for (std::size_t i = 0; i < 6; ++i) *fields[i] = count(kv.second[i], key);
      cfg.build.width_overrides[name] = w;
    }
  }
  return cfg;
}

ModelConfig load_model_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open model config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_model_config(ss.str());
}

std::string dump_model_config(const ModelConfig& cfg) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "arch" << YAML::Value << to_string(cfg.arch);
  const Shape5& s = cfg.input;
  out << YAML::Key << "input" << YAML::Value
      << std::to_string(s.c) + "x" + std::to_string(s.t) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
  out << YAML::Key << "classes" << YAML::Value << cfg.classes;
  out << YAML::Key << "width_mult" << YAML::Value << cfg.build.width_mult;
  out << YAML::Key << "shuffle_groups" << YAML::Value << cfg.build.shuffle_groups;
  out << YAML::Key << "conv_groups" << YAML::Value << cfg.build.conv_groups;
  if (!cfg.build.width_overrides.empty()) {
    out << YAML::Key << "widths" << YAML::Value << YAML::BeginMap;
    for (const auto& [name, w] : cfg.build.width_overrides) {
      out << YAML::Key << name << YAML::Value << YAML::Flow << YAML::BeginSeq << w.b1 << w.b2_reduce << w.b2_out
          << w.b3_reduce << w.b3_out << w.b4_proj << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace lw3d
