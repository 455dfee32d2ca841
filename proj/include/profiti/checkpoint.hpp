// Copyright 2026 The ProFITi Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// On-disk checkpoint: a directory holding
//   manifest.json  schema version, model config, normalization, parameter table
//   params.bin     all parameters as little-endian float64, in table order

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "profiti/config_json.hpp"
#include "profiti/errors.hpp"
#include "profiti/model.hpp"

namespace profiti {

inline constexpr int kCheckpointSchemaVersion = 1;

inline void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ParameterStore& params = model.parameters();
  Json table = Json::array();
  for (const ParameterInfo& p : params.infos()) {
    table.push_back({{"name", p.name}, {"shape", p.shape}, {"offset", p.offset}, {"size", p.size}});
  }
  const Json manifest = {{"schema_version", kCheckpointSchemaVersion},
                         {"model", to_json(model.config())},
                         {"normalization", to_json(model.normalization())},
                         {"parameters", table},
                         {"blob", {{"file", "params.bin"}, {"dtype", "float64-le"}, {"count", params.total_size()}}}};
  {
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
  }
  std::vector<unsigned char> bytes;
  bytes.reserve(params.total_size() * 8);
  for (double v : params.flat()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<unsigned char>(bits >> (8 * b)));
  }
  std::ofstream blob(dir / "params.bin", std::ios::binary);
  if (!blob) throw Error("cannot write " + (dir / "params.bin").string());
  blob.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline Model load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no checkpoint manifest at " + (dir / "manifest.json").string());
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  }
  const int version = manifest.value("schema_version", -1);
  if (version != kCheckpointSchemaVersion) {
    throw SchemaError("checkpoint schema version " + std::to_string(version) + ", this build reads version " +
                      std::to_string(kCheckpointSchemaVersion));
  }
  try {
    const ModelConfig config = model_config_from_json(manifest.at("model"));
    const NormalizationStats stats = normalization_from_json(manifest.at("normalization"));
    const std::size_t count = manifest.at("blob").at("count").get<std::size_t>();

    std::ifstream blob(dir / "params.bin", std::ios::binary);
    if (!blob) throw DataError("missing " + (dir / "params.bin").string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
    if (bytes.size() != count * 8) {
      throw SchemaError("params.bin holds " + std::to_string(bytes.size()) + " bytes, manifest promises " +
                        std::to_string(count * 8));
    }
    std::vector<double> flat(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[8 * i + b]) << (8 * b);
      flat[i] = std::bit_cast<double>(bits);
    }
    ParameterStore params;
    for (const Json& p : manifest.at("parameters")) {
      const Shape shape = p.at("shape").get<Shape>();
      const std::size_t offset = p.at("offset").get<std::size_t>();
      const std::size_t size = shape_size(shape);
      if (offset != params.total_size() || offset + size > count) {
        throw SchemaError("parameter '" + p.at("name").get<std::string>() + "' has an inconsistent offset");
      }
      params.add(p.at("name").get<std::string>(),
                 Tensor(shape, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                                                   flat.begin() + static_cast<std::ptrdiff_t>(offset + size))));
    }
    if (params.total_size() != count) throw SchemaError("parameter table does not cover params.bin");
    return Model(config, std::move(params), stats);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  }
}

}  // namespace profiti
