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

// JSON forms of the configuration structs. Missing keys keep their defaults;
// unknown keys and wrongly typed values are ConfigErrors.

#pragma once

#include <initializer_list>
#include <string>

#include "json.hpp"
#include "profiti/encoder.hpp"
#include "profiti/errors.hpp"
#include "profiti/layers.hpp"
#include "profiti/model.hpp"
#include "profiti/synthetic.hpp"

namespace profiti {

using Json = nlohmann::json;

namespace detail {

inline void check_keys(const Json& j, const char* what, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const Json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline Json to_json(const EncoderConfig& c) {
  return {{"model_dim", c.model_dim},   {"time_features", c.time_features}, {"channel_dim", c.channel_dim},
          {"value_dim", c.value_dim},   {"heads", c.heads},                 {"layers", c.layers},
          {"min_period", c.min_period}, {"max_period", c.max_period}};
}

inline EncoderConfig encoder_config_from_json(const Json& j) {
  detail::check_keys(j, "encoder", {"model_dim", "time_features", "channel_dim", "value_dim", "heads", "layers",
                                    "min_period", "max_period"});
  EncoderConfig c;
  detail::read(j, "model_dim", c.model_dim, "encoder");
  detail::read(j, "time_features", c.time_features, "encoder");
  detail::read(j, "channel_dim", c.channel_dim, "encoder");
  detail::read(j, "value_dim", c.value_dim, "encoder");
  detail::read(j, "heads", c.heads, "encoder");
  detail::read(j, "layers", c.layers, "encoder");
  detail::read(j, "min_period", c.min_period, "encoder");
  detail::read(j, "max_period", c.max_period, "encoder");
  c.validate();
  return c;
}

inline Json to_json(const ModelConfig& c) {
  return {{"channels", c.channels},
          {"encoder", to_json(c.encoder)},
          {"blocks", c.blocks},
          {"attention_dim", c.attention_dim},
          {"hidden_dim", c.hidden_dim},
          {"epsilon", c.epsilon},
          {"shiesh_b", c.shiesh_b},
          {"sort", c.sort.s},
          {"use_attention", c.use_attention},
          {"attention", to_string(c.attention)},
          {"use_shiesh", c.use_shiesh}};
}

inline ModelConfig model_config_from_json(const Json& j) {
  detail::check_keys(j, "model", {"channels", "encoder", "blocks", "attention_dim", "hidden_dim", "epsilon", "shiesh_b",
                                  "sort", "use_attention", "attention", "use_shiesh"});
  ModelConfig c;
  detail::read(j, "channels", c.channels, "model");
  if (j.contains("encoder")) c.encoder = encoder_config_from_json(j.at("encoder"));
  detail::read(j, "blocks", c.blocks, "model");
  detail::read(j, "attention_dim", c.attention_dim, "model");
  detail::read(j, "hidden_dim", c.hidden_dim, "model");
  detail::read(j, "epsilon", c.epsilon, "model");
  detail::read(j, "shiesh_b", c.shiesh_b, "model");
  detail::read(j, "sort", c.sort.s, "model");
  detail::read(j, "use_attention", c.use_attention, "model");
  std::string kind = to_string(c.attention);
  detail::read(j, "attention", kind, "model");
  try {
    c.attention = parse_attention_kind(kind);
  } catch (const Error& e) {
    throw ConfigError(std::string("model.attention: ") + e.what());
  }
  detail::read(j, "use_shiesh", c.use_shiesh, "model");
  c.validate();
  return c;
}

inline Json to_json(const NormalizationStats& s) {
  return {{"channel_mean", s.channel_mean},
          {"channel_std", s.channel_std},
          {"time_offset", s.time_offset},
          {"time_scale", s.time_scale}};
}

inline NormalizationStats normalization_from_json(const Json& j) {
  detail::check_keys(j, "normalization", {"channel_mean", "channel_std", "time_offset", "time_scale"});
  NormalizationStats s;
  detail::read(j, "channel_mean", s.channel_mean, "normalization");
  detail::read(j, "channel_std", s.channel_std, "normalization");
  detail::read(j, "time_offset", s.time_offset, "normalization");
  detail::read(j, "time_scale", s.time_scale, "normalization");
  return s;
}

inline Json to_json(const SyntheticSpec& s) {
  return {{"num_series", s.num_series},
          {"channels", s.channels},
          {"observation_window", s.observation_window},
          {"forecast_horizon", s.forecast_horizon},
          {"event_rate", s.event_rate},
          {"missing_fraction", s.missing_fraction},
          {"max_queries", s.max_queries},
          {"family", to_string(s.family)},
          {"mean_reversion", s.mean_reversion},
          {"noise", s.noise},
          {"correlation", s.correlation},
          {"mode_shift", s.mode_shift},
          {"seed", s.seed}};
}

inline SyntheticSpec synthetic_spec_from_json(const Json& j) {
  detail::check_keys(j, "synthetic", {"num_series", "channels", "observation_window", "forecast_horizon", "event_rate",
                                      "missing_fraction", "max_queries", "family", "mean_reversion", "noise",
                                      "correlation", "mode_shift", "seed"});
  SyntheticSpec s;
  detail::read(j, "num_series", s.num_series, "synthetic");
  detail::read(j, "channels", s.channels, "synthetic");
  detail::read(j, "observation_window", s.observation_window, "synthetic");
  detail::read(j, "forecast_horizon", s.forecast_horizon, "synthetic");
  detail::read(j, "event_rate", s.event_rate, "synthetic");
  detail::read(j, "missing_fraction", s.missing_fraction, "synthetic");
  detail::read(j, "max_queries", s.max_queries, "synthetic");
  std::string family = to_string(s.family);
  detail::read(j, "family", family, "synthetic");
  try {
    s.family = parse_process_family(family);
  } catch (const Error& e) {
    throw ConfigError(std::string("synthetic.family: ") + e.what());
  }
  detail::read(j, "mean_reversion", s.mean_reversion, "synthetic");
  detail::read(j, "noise", s.noise, "synthetic");
  detail::read(j, "correlation", s.correlation, "synthetic");
  detail::read(j, "mode_shift", s.mode_shift, "synthetic");
  detail::read(j, "seed", s.seed, "synthetic");
  s.validate();
  return s;
}

}  // namespace profiti
