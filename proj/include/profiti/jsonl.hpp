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

// One series per line:
//   {"id": str, "C": int, "obs": [[t,c,o],...], "qry": [[t,c],...], "ans": [y,...]}
// Channels are 0-based. "ans" may be omitted at inference time.

#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "profiti/errors.hpp"
#include "profiti/imts.hpp"

namespace profiti {

namespace detail {

inline double json_number(const nlohmann::json& j, std::size_t line, const char* what) {
  if (!j.is_number()) throw SchemaError(line, std::string(what) + " must be a number");
  return j.get<double>();
}

inline int json_channel(const nlohmann::json& j, std::size_t line) {
  if (!j.is_number()) throw SchemaError(line, "channel must be a number");
  const double c = j.get<double>();
  if (c != std::floor(c)) throw SchemaError(line, "channel must be an integer");
  return static_cast<int>(c);
}

}  // namespace detail

inline SeriesInstance instance_from_json(const nlohmann::json& j, std::size_t line = 0) {
  using nlohmann::json;
  if (!j.is_object()) throw SchemaError(line, "expected a JSON object");
  for (const char* key : {"id", "C", "obs", "qry"})
    if (!j.contains(key)) throw SchemaError(line, std::string("missing key '") + key + "'");
  SeriesInstance s;
  if (!j["id"].is_string()) throw SchemaError(line, "'id' must be a string");
  s.id = j["id"].get<std::string>();
  if (!j["C"].is_number_integer()) throw SchemaError(line, "'C' must be an integer");
  s.channels = j["C"].get<int>();
  if (!j["obs"].is_array()) throw SchemaError(line, "'obs' must be an array");
  for (const json& o : j["obs"]) {
    if (!o.is_array() || o.size() != 3) throw SchemaError(line, "each 'obs' entry must be [t, c, o]");
    s.observations.push_back({detail::json_number(o[0], line, "t"), detail::json_channel(o[1], line),
                              detail::json_number(o[2], line, "o")});
  }
  if (!j["qry"].is_array()) throw SchemaError(line, "'qry' must be an array");
  for (const json& q : j["qry"]) {
    if (!q.is_array() || q.size() != 2) throw SchemaError(line, "each 'qry' entry must be [t, c]");
    s.queries.push_back({detail::json_number(q[0], line, "t"), detail::json_channel(q[1], line)});
  }
  if (j.contains("ans") && !j["ans"].is_null()) {
    if (!j["ans"].is_array()) throw SchemaError(line, "'ans' must be an array");
    std::vector<double> ans;
    for (const json& y : j["ans"]) ans.push_back(detail::json_number(y, line, "answer"));
    s.answers = std::move(ans);
  }
  try {
    validate_instance(s);
  } catch (const DataError& e) {
    throw SchemaError(line, e.what());
  }
  return s;
}

inline nlohmann::json instance_to_json(const SeriesInstance& s) {
  using nlohmann::json;
  json j;
  j["id"] = s.id;
  j["C"] = s.channels;
  json obs = json::array();
  for (const Observation& o : s.observations) obs.push_back({o.t, o.channel, o.value});
  j["obs"] = std::move(obs);
  json qry = json::array();
  for (const Query& q : s.queries) qry.push_back({q.t, q.channel});
  j["qry"] = std::move(qry);
  if (s.answers) j["ans"] = *s.answers;
  return j;
}

inline Dataset parse_jsonl(std::istream& in) {
  Dataset data;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(line, std::string("invalid JSON: ") + e.what());
    }
    data.push_back(instance_from_json(j, line));
  }
  return data;
}

inline void write_jsonl(std::ostream& out, const Dataset& data) {
  for (const SeriesInstance& s : data) out << instance_to_json(s).dump() << '\n';
}

inline std::string to_jsonl(const Dataset& data) {
  std::ostringstream os;
  write_jsonl(os, data);
  return os.str();
}

inline Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_jsonl(in);
}

inline void save_jsonl(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_jsonl(out, data);
}

}  // namespace profiti
