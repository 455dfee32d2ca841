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

// profiti command line: data generation, training, evaluation, sampling and
// the component ablation.
//
// Exit codes: 0 ok, 1 other failure, 2 configuration error, 3 numeric failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "profiti/profiti.hpp"

namespace fs = std::filesystem;
using namespace profiti;

namespace {

std::optional<std::uint64_t> env_seed() {
  if (const char* s = std::getenv("PROFITI_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("PROFITI_SEED is not an unsigned integer: ") + s);
    }
  }
  return std::nullopt;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

TrainConfig load_train_config(const std::string& path) {
  const fs::path cfg_path(path);
  TrainConfig c = train_config_from_json(read_json(path));
  if (c.data_path && fs::path(*c.data_path).is_relative()) c.data_path = (cfg_path.parent_path() / *c.data_path).string();
  if (auto s = env_seed()) {
    c.seed = *s;
    if (c.synthetic) c.synthetic->seed = *s;
  }
  return c;
}

int run(int argc, char** argv) {
  CLI::App app{"Conditional normalizing flows for irregular multivariate time series"};
  app.require_subcommand(1);

  std::string spec_path, out_path, config_path, ckpt_path, data_path, report_path, per_query_path, fan_path;
  std::optional<std::uint64_t> seed;
  std::size_t n_samples = 100, fan_index = 0;

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic dataset as JSONL");
  gen->add_option("--spec", spec_path, "Synthetic spec JSON")->required();
  gen->add_option("--out", out_path, "Output JSONL")->required();
  gen->add_option("--seed", seed, "Seed (overrides the spec)");

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_path, "Training config JSON")->required();
  tr->add_option("--out", out_path, "Run directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  ev->add_option("--ckpt", ckpt_path, "Checkpoint directory")->required();
  ev->add_option("--data", data_path, "JSONL with answers")->required();
  ev->add_option("--report", report_path, "Report JSON")->required();
  ev->add_option("--samples", n_samples, "Samples per instance for CRPS and MSE");
  ev->add_option("--seed", seed, "Sampling seed");
  ev->add_option("--per-query", per_query_path, "Per-query CSV");

  auto* sa = app.add_subcommand("sample", "Draw forecast samples");
  sa->add_option("--ckpt", ckpt_path, "Checkpoint directory")->required();
  sa->add_option("--data", data_path, "JSONL")->required();
  sa->add_option("--n", n_samples, "Samples per instance");
  sa->add_option("--out", out_path, "Samples CSV")->required();
  sa->add_option("--seed", seed, "Sampling seed");
  sa->add_option("--fan", fan_path, "Fan chart SVG for one instance");
  sa->add_option("--fan-index", fan_index, "Instance drawn in the fan chart");

  auto* ab = app.add_subcommand("ablate", "Train every ablation variant");
  ab->add_option("--config", config_path, "Training config JSON")->required();
  ab->add_option("--out", out_path, "Table JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (!seed) seed = env_seed();
  const std::size_t threads = default_threads();

  if (*gen) {
    SyntheticSpec spec = synthetic_spec_from_json(read_json(spec_path));
    if (seed) spec.seed = *seed;
    const Dataset data = generate_synthetic(spec);
    save_jsonl(data, out_path);
    std::cout << "wrote " << data.size() << " series to " << out_path << '\n';
  } else if (*tr) {
    TrainConfig config = load_train_config(config_path);
    const fs::path dir(out_path);
    fs::create_directories(dir);
    const TrainResult r = train(config, dir, [](const EpochRecord& e) {
      std::cout << "epoch " << e.epoch << "  train " << e.train_njnll << "  val " << e.val_njnll << "  (" << e.seconds
                << " s)\n";
    });
    open_out(dir / "run.json") << to_json(r.record).dump(2) << '\n';
    {
      auto csv = open_out(dir / "loss.csv");
      write_loss_csv(csv, r.record.epochs);
      auto svg = open_out(dir / "loss.svg");
      write_loss_svg(svg, r.record.epochs);
    }
    open_out(dir / "report.txt") << metric_table(r.record.test);
    std::cout << metric_table(r.record.test);
  } else if (*ev) {
    const Model model = load_checkpoint(ckpt_path);
    const Dataset data = load_jsonl(data_path);
    EvaluateOptions opt{n_samples, seed.value_or(0), threads, !per_query_path.empty()};
    const Evaluation e = evaluate(model, data, opt);
    open_out(report_path) << to_json(e.report).dump(2) << '\n';
    if (!per_query_path.empty()) {
      auto csv = open_out(per_query_path);
      write_query_csv(csv, e.queries);
    }
    std::cout << metric_table(e.report);
  } else if (*sa) {
    const Model model = load_checkpoint(ckpt_path);
    const Dataset data = load_jsonl(data_path);
    if (data.empty()) throw DataError(data_path + " holds no series");
    std::ofstream out = open_out(out_path);
    for (std::size_t i = 0; i < data.size(); ++i) {
      std::mt19937_64 rng = detail::instance_rng(seed.value_or(0), i);
      const Tensor s = sample(model, data[i], n_samples, rng);
      write_samples_csv(out, data[i], s, i == 0);
      if (!fan_path.empty() && i == fan_index) {
        auto svg = open_out(fan_path);
        write_fan_svg(svg, data[i], s);
      }
    }
    if (!fan_path.empty() && fan_index >= data.size()) throw ConfigError("--fan-index beyond the dataset");
  } else if (*ab) {
    const TrainConfig config = load_train_config(config_path);
    const auto variants = ablation_variants();
    const auto rows = run_ablation(config, variants, [](const std::string& v, const EpochRecord& e) {
      std::cout << v << "  epoch " << e.epoch << "  val " << e.val_njnll << '\n';
    });
    open_out(out_path) << to_json(rows).dump(2) << '\n';
    std::cout << ablation_table(rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
