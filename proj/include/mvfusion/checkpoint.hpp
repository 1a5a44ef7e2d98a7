/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Model checkpoints: a JSON manifest (config plus tensor layout) next to a
// flat little-endian float32 file holding parameters then buffers.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvfusion/errors.hpp"
#include "mvfusion/fusion.hpp"
#include "mvfusion/io.hpp"

namespace mvfusion {

inline nlohmann::json config_to_json(const FusionModelConfig& c) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : c.views)
    views.push_back({{"name", v.name},
                     {"channels", v.channels},
                     {"timesteps", v.timesteps},
                     {"static", v.is_static}});
  return {
      {"method", std::string(to_string(c.method))},
      {"merge", c.merge ? nlohmann::json(std::string(to_string(*c.merge))) : nlohmann::json()},
      {"gate", c.gate ? nlohmann::json(std::string(to_string(*c.gate))) : nlohmann::json()},
      {"aux_weight", c.aux_weight},
      {"encoder", {{"num_layers", c.encoder.num_layers}, {"hidden_units", c.encoder.hidden_units}}},
      {"head", {{"hidden_units", c.head.hidden_units}}},
      {"regularization",
       {{"dropout_rate", c.regularization.dropout_rate},
        {"batchnorm", c.regularization.batchnorm},
        {"bn_epsilon", c.regularization.bn_epsilon},
        {"bn_momentum", c.regularization.bn_momentum}}},
      {"views", views},
      {"timesteps", c.timesteps},
      {"seed", c.seed},
  };
}

inline FusionModelConfig config_from_json(const nlohmann::json& j) {
  try {
    FusionModelConfig c;
    c.method = parse_method(j.at("method").get<std::string>());
    if (!j.at("merge").is_null()) c.merge = parse_merge(j["merge"].get<std::string>());
    if (!j.at("gate").is_null()) c.gate = parse_gate(j["gate"].get<std::string>());
    c.aux_weight = j.at("aux_weight").get<double>();
    c.encoder.num_layers = j.at("encoder").at("num_layers").get<std::size_t>();
    c.encoder.hidden_units = j.at("encoder").at("hidden_units").get<std::size_t>();
    c.head.hidden_units = j.at("head").at("hidden_units").get<std::size_t>();
    const auto& r = j.at("regularization");
    c.regularization.dropout_rate = r.at("dropout_rate").get<double>();
    c.regularization.batchnorm = r.at("batchnorm").get<bool>();
    c.regularization.bn_epsilon = r.at("bn_epsilon").get<double>();
    c.regularization.bn_momentum = r.at("bn_momentum").get<double>();
    for (const auto& v : j.at("views")) {
      ViewSpec s;
      s.name = v.at("name").get<std::string>();
      s.channels = v.at("channels").get<std::size_t>();
      s.timesteps = v.at("timesteps").get<std::size_t>();
      s.is_static = v.at("static").get<bool>();
      c.views.push_back(std::move(s));
    }
    c.timesteps = j.at("timesteps").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed model config: ") + e.what());
  }
}

// Writes <dir>/checkpoint.json and <dir>/params.f32.
inline void save_checkpoint(const FusionModel<float>& model, const std::filesystem::path& dir) {
  const auto& store = model.store();
  nlohmann::json layout = nlohmann::json::array();
  std::vector<float> flat;
  auto append = [&](const auto& entries, const char* kind) {
    for (const auto& e : entries) {
      layout.push_back({{"name", e.name}, {"kind", kind}, {"shape", e.value.shape().dims()}});
      flat.insert(flat.end(), e.value.values().begin(), e.value.values().end());
    }
  };
  append(store.parameters(), "parameter");
  append(store.buffers(), "buffer");
  io::atomic_write(dir / "params.f32", io::encode_f32(flat));
  const nlohmann::json manifest = {{"format", "mvfusion-checkpoint"},
                                   {"version", 1},
                                   {"config", config_to_json(model.config())},
                                   {"tensors", layout},
                                   {"scalars", flat.size()}};
  io::atomic_write(dir / "checkpoint.json", manifest.dump(2) + "\n");
}

inline FusionModel<float> load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_file(dir / "checkpoint.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  }
  FusionModel<float> model(config_from_json(manifest.at("config")));
  const std::string bytes = io::read_file(dir / "params.f32");
  auto& store = model.store();
  std::size_t expected = 0;
  for (const auto& e : store.parameters()) expected += e.value.size();
  for (const auto& e : store.buffers()) expected += e.value.size();
  if (bytes.size() != expected * 4)
    throw CorruptionError("params.f32 holds " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expected * 4));
  const auto& layout = manifest.at("tensors");
  if (layout.size() != store.parameters().size() + store.buffers().size())
    throw SchemaError("checkpoint tensor list does not match the model");
  const std::vector<float> flat = io::decode_f32(bytes);
  std::size_t offset = 0, k = 0;
  auto fill = [&](auto& entries) {
    for (auto& e : entries) {
      if (layout[k++].at("name").get<std::string>() != e.name)
        throw SchemaError("checkpoint tensor '" + e.name + "' out of order");
      std::copy(flat.begin() + std::ptrdiff_t(offset),
                flat.begin() + std::ptrdiff_t(offset + e.value.size()), e.value.data());
      offset += e.value.size();
    }
  };
  fill(store.parameters());
  fill(store.buffers());
  return model;
}

}  // namespace mvfusion
