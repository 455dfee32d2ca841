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

// Training on mean njNLL with Adam, best-validation checkpoint selection,
// early stopping, and the component ablation.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "profiti/checkpoint.hpp"
#include "profiti/config_json.hpp"
#include "profiti/jsonl.hpp"
#include "profiti/metrics.hpp"
#include "profiti/model.hpp"
#include "profiti/parallel.hpp"
#include "profiti/synthetic.hpp"

namespace profiti {

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct TrainConfig {
  std::optional<std::string> data_path;     // JSONL with answers
  std::optional<SyntheticSpec> synthetic;   // used when no data path is given
  SplitRatios split;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double clip_norm = 0.0;  // global gradient norm clip; 0 disables
  std::uint64_t seed = 0;
  std::size_t patience = 10;
  std::size_t divergence_epochs = 5;
  double divergence_factor = 10.0;
  std::size_t eval_samples = 100;
  std::size_t threads = 0;  // 0: PROFITI_THREADS or 1
  ModelConfig model;
  VariantFlags variant;
  bool channels_from_data = true;  // set model.channels from the dataset

  void validate() const {
    const double s = split.train + split.validation + split.test;
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("split ratios sum to " + std::to_string(s) + ", expected 1");
    if (split.train <= 0.0 || split.validation < 0.0 || split.test < 0.0) throw ConfigError("split ratios must be non-negative with a positive train share");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (clip_norm < 0.0) throw ConfigError("clip_norm must be non-negative");
    if (eval_samples < 4) throw ConfigError("eval_samples must be >= 4");
    if (!data_path && !synthetic) throw ConfigError("config needs either 'data' or 'synthetic'");
  }
};

inline Json to_json(const VariantFlags& f) {
  Json j = {{"use_sita", f.use_sita}, {"use_shiesh", f.use_shiesh}};
  if (f.attention) j["attention"] = to_string(*f.attention);
  return j;
}

inline VariantFlags variant_from_json(const Json& j) {
  detail::check_keys(j, "variant", {"use_sita", "attention", "use_shiesh"});
  VariantFlags f;
  detail::read(j, "use_sita", f.use_sita, "variant");
  detail::read(j, "use_shiesh", f.use_shiesh, "variant");
  if (j.contains("attention")) {
    std::string kind;
    detail::read(j, "attention", kind, "variant");
    f.attention = parse_attention_kind(kind);
  }
  return f;
}

inline Json to_json(const TrainConfig& c) {
  Json j = {{"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"clip_norm", c.clip_norm},
            {"seed", c.seed},
            {"patience", c.patience},
            {"divergence_epochs", c.divergence_epochs},
            {"divergence_factor", c.divergence_factor},
            {"eval_samples", c.eval_samples},
            {"model", to_json(c.model)},
            {"variant", to_json(c.variant)},
            {"channels_from_data", c.channels_from_data}};
  if (c.data_path) j["data"] = *c.data_path;
  if (c.synthetic) j["synthetic"] = to_json(*c.synthetic);
  return j;
}

inline TrainConfig train_config_from_json(const Json& j) {
  detail::check_keys(j, "config", {"data", "synthetic", "split", "epochs", "batch_size", "learning_rate", "clip_norm",
                                   "seed", "patience", "divergence_epochs", "divergence_factor", "eval_samples",
                                   "threads", "model", "variant", "channels_from_data"});
  TrainConfig c;
  if (j.contains("data")) {
    std::string p;
    detail::read(j, "data", p, "config");
    c.data_path = p;
  }
  if (j.contains("synthetic")) c.synthetic = synthetic_spec_from_json(j.at("synthetic"));
  if (j.contains("split")) {
    const Json& s = j.at("split");
    detail::check_keys(s, "split", {"train", "validation", "test"});
    detail::read(s, "train", c.split.train, "split");
    detail::read(s, "validation", c.split.validation, "split");
    detail::read(s, "test", c.split.test, "split");
  }
  detail::read(j, "epochs", c.epochs, "config");
  detail::read(j, "batch_size", c.batch_size, "config");
  detail::read(j, "learning_rate", c.learning_rate, "config");
  detail::read(j, "clip_norm", c.clip_norm, "config");
  detail::read(j, "seed", c.seed, "config");
  detail::read(j, "patience", c.patience, "config");
  detail::read(j, "divergence_epochs", c.divergence_epochs, "config");
  detail::read(j, "divergence_factor", c.divergence_factor, "config");
  detail::read(j, "eval_samples", c.eval_samples, "config");
  detail::read(j, "threads", c.threads, "config");
  detail::read(j, "channels_from_data", c.channels_from_data, "config");
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("variant")) c.variant = variant_from_json(j.at("variant"));
  c.validate();
  return c;
}

struct DataSplits {
  Dataset train, validation, test;
};

/// Seeded shuffle, then consecutive train / validation / test shares.
inline DataSplits split_dataset(const Dataset& data, const SplitRatios& r, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<double>(data.size());
  const auto n_train = static_cast<std::size_t>(std::llround(r.train * n));
  const auto n_val = std::min(data.size() - n_train, static_cast<std::size_t>(std::llround(r.validation * n)));
  DataSplits s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Dataset& dst = i < n_train ? s.train : (i < n_train + n_val ? s.validation : s.test);
    dst.push_back(data[idx[i]]);
  }
  return s;
}

inline Dataset load_training_data(const TrainConfig& c) {
  if (c.data_path) return load_jsonl(*c.data_path);
  return generate_synthetic(*c.synthetic);
}

struct BatchGradient {
  double loss = 0.0;           // mean njNLL over the batch
  std::vector<double> grads;   // gradient of the mean
};

/// Gradient of the mean njNLL over `batch`. Every instance gets its own tape;
/// per-instance gradients are summed in batch order.
inline BatchGradient batch_gradient(const Model& model, std::span<const SeriesInstance* const> batch,
                                    std::size_t threads = 1) {
  const std::size_t p = model.parameters().total_size();
  std::vector<std::vector<double>> per(batch.size());
  std::vector<double> losses(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) {
    ad::Tape tape;
    ParameterBinding binding(tape, model.parameters());
    const ad::Var loss = njnll_loss(binding, model, *batch[i]);
    losses[i] = loss.value().item();
    if (!std::isfinite(losses[i])) {
      // Rerun on the plain path to name the block that produced it.
      try {
        inverse_transform(model, *batch[i], batch[i]->answer_values());
      } catch (const NumericError& e) {
        throw NumericError("non-finite loss on series '" + batch[i]->id + "': " + e.what());
      }
      throw NumericError("non-finite loss on series '" + batch[i]->id + "'");
    }
    tape.backward(loss);
    per[i].assign(p, 0.0);
    accumulate_gradients(tape, model.parameters(), per[i]);
  });
  BatchGradient out;
  out.grads.assign(p, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.loss += losses[i];
    for (std::size_t k = 0; k < p; ++k) out.grads[k] += per[i][k];
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  for (double& g : out.grads) g *= inv;
  for (std::size_t k = 0; k < p; ++k) {
    if (!std::isfinite(out.grads[k])) {
      throw NumericError("non-finite gradient for parameter '" + model.parameters().owner(k) + "'");
    }
  }
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_njnll = 0.0;
  double val_njnll = 0.0;
  double seconds = 0.0;  // wall clock, excluded from equality
  friend bool operator==(const EpochRecord& a, const EpochRecord& b) {
    return a.epoch == b.epoch && a.train_njnll == b.train_njnll && a.val_njnll == b.val_njnll;
  }
};

struct RunRecord {
  Json config;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool early_stopped = false;
  bool diverged = false;
  MetricReport test;
  std::string checkpoint;
  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

inline Json to_json(const MetricReport& r) {
  auto v = [](const MetricValue& m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
  return {{"njnll", v(r.njnll)}, {"mnll", v(r.mnll)}, {"crps", v(r.crps)}, {"mse", v(r.mse)},
          {"instances", r.instances}, {"queries", r.queries}, {"folds", r.folds}};
}

inline Json to_json(const RunRecord& r) {
  Json epochs = Json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_njnll", e.train_njnll}, {"val_njnll", e.val_njnll}, {"seconds", e.seconds}});
  }
  return {{"config", r.config},       {"epochs", epochs},     {"best_epoch", r.best_epoch},
          {"early_stopped", r.early_stopped}, {"diverged", r.diverged}, {"test", to_json(r.test)},
          {"checkpoint", r.checkpoint}};
}

struct TrainResult {
  RunRecord record;
  Model model;  // best-validation weights
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on prepared splits. `out_dir`, when given, receives ckpt/.
inline TrainResult train_on(const TrainConfig& config, const DataSplits& splits,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                            const EpochCallback& on_epoch = {}) {
  config.validate();
  if (splits.train.empty()) throw DataError("training split is empty");
  const Dataset& val = splits.validation.empty() ? splits.train : splits.validation;
  const std::size_t threads = config.threads ? config.threads : default_threads();

  ModelConfig mc = config.model;
  if (config.channels_from_data) mc.channels = splits.train.front().channels;
  Model model(apply_variant(mc, config.variant), config.seed);
  model.normalization() = fit_normalization(splits.train, mc.channels);

  TrainResult result;
  result.record.config = to_json(config);
  using clock = std::chrono::steady_clock;

  auto start = clock::now();
  const double initial_val = njnll(val, model, threads);
  const double initial_train = njnll(splits.train, model, threads);
  result.record.epochs.push_back(
      {0, initial_train, initial_val, std::chrono::duration<double>(clock::now() - start).count()});
  if (on_epoch) on_epoch(result.record.epochs.back());

  ParameterStore best = model.parameters();
  double best_val = initial_val;
  std::size_t since_best = 0, diverging = 0;
  Adam adam(model.parameters().total_size(), AdamOptions{config.learning_rate});
  std::vector<std::size_t> order(splits.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const double divergence_limit = initial_val + config.divergence_factor * std::max(1.0, std::abs(initial_val));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    start = clock::now();
    std::mt19937_64 rng(config.seed + 0x9e3779b97f4a7c15ULL * epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      std::vector<const SeriesInstance*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + config.batch_size); ++i) batch.push_back(&splits.train[order[i]]);
      BatchGradient g = batch_gradient(model, batch, threads);
      train_sum += g.loss * static_cast<double>(batch.size());
      if (config.clip_norm > 0.0) {
        double n2 = 0.0;
        for (double v : g.grads) n2 += v * v;
        const double n = std::sqrt(n2);
        if (n > config.clip_norm)
          for (double& v : g.grads) v *= config.clip_norm / n;
      }
      adam.step(model.parameters(), g.grads);
    }
    const double val_loss = njnll(val, model, threads);
    if (!std::isfinite(val_loss)) throw NumericError("validation njNLL is not finite after epoch " + std::to_string(epoch));
    result.record.epochs.push_back({epoch, train_sum / static_cast<double>(order.size()), val_loss,
                                    std::chrono::duration<double>(clock::now() - start).count()});
    if (on_epoch) on_epoch(result.record.epochs.back());

    if (val_loss < best_val) {
      best_val = val_loss;
      best = model.parameters();
      result.record.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.record.early_stopped = true;
      break;
    }
    diverging = val_loss > divergence_limit ? diverging + 1 : 0;
    if (diverging >= config.divergence_epochs) {
      result.record.diverged = true;
      warn("training diverged: validation njNLL above " + std::to_string(divergence_limit) + " for " +
           std::to_string(diverging) + " epochs");
      break;
    }
  }

  model.parameters() = best;
  const Dataset& test = splits.test.empty() ? val : splits.test;
  result.record.test = evaluate(model, test, {config.eval_samples, config.seed, threads, false}).report;
  if (out_dir) {
    const auto ckpt = *out_dir / "ckpt";
    save_checkpoint(model, ckpt);
    result.record.checkpoint = ckpt.string();
  }
  result.model = std::move(model);
  return result;
}

inline TrainResult train(const TrainConfig& config, const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                         const EpochCallback& on_epoch = {}) {
  config.validate();
  return train_on(config, split_dataset(load_training_data(config), config.split, config.seed), out_dir, on_epoch);
}

struct NamedVariant {
  std::string name;
  VariantFlags flags;
};

inline std::vector<NamedVariant> ablation_variants() {
  return {{"full", {true, std::nullopt, true}},
          {"-SITA", {false, std::nullopt, true}},
          {"-Shiesh", {true, std::nullopt, false}},
          {"-SITA-Shiesh", {false, std::nullopt, false}},
          {"attn=reg", {true, AttentionKind::Regularized, true}},
          {"attn=itrans", {true, AttentionKind::ITrans, true}}};
}

struct AblationRow {
  std::string variant;
  RunRecord record;
};

/// Trains every variant on the same data split and seed.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base, std::span<const NamedVariant> variants,
                                             const std::function<void(const std::string&, const EpochRecord&)>& on_epoch = {}) {
  base.validate();
  const DataSplits splits = split_dataset(load_training_data(base), base.split, base.seed);
  std::vector<AblationRow> rows;
  for (const NamedVariant& v : variants) {
    TrainConfig c = base;
    c.variant = v.flags;
    EpochCallback cb;
    if (on_epoch) cb = [&](const EpochRecord& e) { on_epoch(v.name, e); };
    rows.push_back({v.name, train_on(c, splits, std::nullopt, cb).record});
  }
  return rows;
}

inline std::vector<AblationRow> run_ablation(const TrainConfig& base) {
  const auto variants = ablation_variants();
  return run_ablation(base, variants);
}

inline Json to_json(const std::vector<AblationRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"variant", r.variant},
                   {"test_njnll", r.record.test.njnll.mean},
                   {"test_mnll", r.record.test.mnll.mean},
                   {"test_crps", r.record.test.crps.mean},
                   {"test_mse", r.record.test.mse.mean},
                   {"best_epoch", r.record.best_epoch},
                   {"epochs_run", r.record.epochs.size() - 1}});
  }
  return out;
}

}  // namespace profiti
