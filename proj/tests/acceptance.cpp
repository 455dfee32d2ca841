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

// Acceptance checks. Prints one PASS/FAIL line per criterion; pass criterion
// numbers as arguments to run a subset. Exit status is non-zero on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"

namespace profiti {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kShieshRoundTrip = 1e-8;
constexpr double kShieshDerivRel = 1e-6;
constexpr double kShieshOde = 1e-6;
constexpr double kShieshSeconds = 5.0;
constexpr double kRegDetFloor = 1e-12;
constexpr double kSitaIdentity = 1e-8;
constexpr double kTriLogDetRel = 1e-10;
constexpr double kJacobianRel = 1e-4;
constexpr double kQuadrature = 0.02;
constexpr double kChangeOfVariablesSeconds = 120.0;
constexpr double kPermutation = 1e-8;
constexpr double kGradientRel = 1e-3;
constexpr double kAblationGap = 0.05;
constexpr double kAblationSeconds = 15.0 * 60.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Classical RK4 on dv/dtau = tanh(b v), tau in [0, 1].
double shiesh_ode(double u, double b) {
  const int steps = 2000;
  const double h = 1.0 / steps;
  auto f = [b](double v) { return std::tanh(b * v); };
  double v = u;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(v), k2 = f(v + 0.5 * h * k1), k3 = f(v + 0.5 * h * k2), k4 = f(v + h * k3);
    v += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return v;
}

void shiesh_suite(Outcome& out) {
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-20.0, 20.0);
  double round_trip = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double u = U(rng);
    round_trip = std::max(round_trip, std::abs(shiesh_inverse(shiesh(u, 1.0), 1.0) - u));
  }
  double deriv = 0.0, lo = 1e300, hi = 0.0, ode = 0.0;
  const double h = 1e-5;
  for (int i = 0; i <= 1000; ++i) {
    const double u = -5.0 + 10.0 * i / 1000.0;
    const double d = shiesh_derivative(u, 1.0);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    if (std::abs(u) + h < 5.0) {
      const double fd = (shiesh(u + h, 1.0) - shiesh(u - h, 1.0)) / (2 * h);
      deriv = std::max(deriv, std::abs(d - fd) / fd);
    }
    if (i % 10 == 0) ode = std::max(ode, std::abs(shiesh(u, 1.0) - shiesh_ode(u, 1.0)));
  }
  const double secs = seconds_since(start);
  out.detail << "round-trip max " << round_trip << ", derivative FD rel " << deriv << ", derivative range [" << lo
             << ", " << hi << "], ODE max " << ode << ", " << secs << " s";
  out.check(round_trip < kShieshRoundTrip, "round trip");
  out.check(deriv < kShieshDerivRel, "finite differences");
  out.check(lo > 1.0 && hi <= std::numbers::e, "derivative bound");
  out.check(ode < kShieshOde, "ODE oracle");
  out.check(secs < kShieshSeconds, "runtime");
}

void sorting_fixtures(Outcome& out) {
  // (t, c) with channels as printed, and the expected 1-based orders.
  const std::vector<Query> q{{1, 2}, {0, 2}, {2, 1}, {3, 1}, {0, 1}, {3, 3}};
  const std::vector<std::pair<SortCriterion, Permutation>> cases{
      {SortCriterion{{1, 0, 0, 1}}, {5, 2, 1, 3, 4, 6}},
      {SortCriterion{{0, 1, 1, 0}}, {5, 3, 4, 2, 1, 6}},
      {SortCriterion{{-1, 0, 0, 1}}, {4, 6, 3, 1, 5, 2}}};
  for (const auto& [s, expect] : cases) {
    Permutation got = argsort_queries(q, s);
    for (auto& v : got) ++v;
    out.detail << "(";
    for (std::size_t j = 0; j < got.size(); ++j) out.detail << (j ? "," : "") << got[j];
    out.detail << ") ";
    out.check(got == expect, "order");
  }
}

void invertibility(Outcome& out) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  double min_det = 1e300;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + trial % 8;
    Tensor a = Tensor::matrix(k, k);
    for (double& v : a.values()) v = 3.0 * N(rng);
    min_det = std::min(min_det, std::abs(testing::leibniz_det(regularized_attention(a, 1e-5))));
  }

  double sita = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 r(100 + seed);
    const std::size_t k = 1 + seed % 8;
    std::vector<Query> queries;
    for (std::size_t i = 0; i < k; ++i) queries.push_back({static_cast<double>(i / 3), static_cast<int>(i % 3)});
    std::shuffle(queries.begin(), queries.end(), r);
    const Tensor x = testing::random_tensor({k, 5}, r);
    AttentionParams p;
    p.query_proj = testing::random_tensor({5, 4}, r);
    p.key_proj = testing::random_tensor({5, 4}, r);
    std::vector<double> z(k);
    for (double& v : z) v = 3.0 * N(r);
    const auto back = sita_inverse(sita_forward(z, x, queries, {}, p).values, x, queries, {}, p).values;
    for (std::size_t i = 0; i < k; ++i) sita = std::max(sita, std::abs(back[i] - z[i]));
  }

  double tri = 0.0;
  for (std::size_t k = 1; k <= 6; ++k) {
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor m = triangular_attention(testing::random_tensor({k, k}, rng, -3, 3), 1e-5);
      const double oracle = std::log(std::abs(testing::leibniz_det(m)));
      tri = std::max(tri, std::abs(triangular_log_det(m) - oracle) / std::max(1.0, std::abs(oracle)));
    }
  }
  out.detail << "min |det| " << min_det << ", SITA fwd(inv) max " << sita << ", triangular log-det rel " << tri;
  out.check(min_det > kRegDetFloor, "regularized determinant");
  out.check(sita < kSitaIdentity, "SITA identity");
  out.check(tri < kTriLogDetRel, "triangular log-det");
}

Dataset dense_data(int channels, std::size_t max_queries, std::uint64_t seed, std::size_t n) {
  SyntheticSpec spec;
  spec.channels = channels;
  spec.max_queries = max_queries;
  spec.num_series = n;
  spec.seed = seed;
  spec.missing_fraction = 0.0;
  return generate_synthetic(spec);
}

double numeric_log_abs_det(const FlowPlan& plan, const std::vector<double>& y) {
  const std::size_t k = y.size();
  Tensor jac = Tensor::matrix(k, k);
  const double h = 1e-6;
  for (std::size_t j = 0; j < k; ++j) {
    auto plus = y, minus = y;
    plus[j] += h;
    minus[j] -= h;
    const auto zp = evaluate(plan, plus).z, zm = evaluate(plan, minus).z;
    for (std::size_t i = 0; i < k; ++i) jac(i, j) = (zp[i] - zm[i]) / (2 * h);
  }
  return std::log(std::abs(testing::leibniz_det(jac)));
}

void change_of_variables(Outcome& out) {
  const auto start = Clock::now();
  Model m(testing::small_config(3, 2), 4);
  testing::perturb_flow(m, 4, 0.3);
  double jac = 0.0;
  std::size_t checked = 0;
  for (const auto& inst : dense_data(3, 4, 4, 30)) {
    const FlowPlan plan = make_plan(m, inst);
    const DensityResult r = evaluate(plan, inst.answer_values());
    double ld = 0.0;
    for (const auto& l : r.per_layer_logdets) ld += l.value;
    const double oracle = numeric_log_abs_det(plan, inst.answer_values());
    jac = std::max(jac, std::abs(ld - oracle) / std::max(1.0, std::abs(oracle)));
    ++checked;
  }

  const auto inst = testing::make_instance("q", 3, {{0.0, 0, 0.2}, {0.3, 1, -0.4}}, {{1.0, 2}, {1.2, 0}},
                                           std::vector<double>{0.0, 0.0});
  const FlowPlan plan = make_plan(m, inst);
  const int n = 400;
  const double lo = -8.0, h = 16.0 / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const double w = (i == 0 || i == n ? 0.5 : 1.0) * (j == 0 || j == n ? 0.5 : 1.0);
      total += w * std::exp(evaluate(plan, std::vector<double>{lo + i * h, lo + j * h}).log_density);
    }
  total *= h * h;
  const double secs = seconds_since(start);
  out.detail << checked << " instances, log-det vs Jacobian rel " << jac << ", K=2 mass " << total << ", " << secs
             << " s";
  out.check(jac < kJacobianRel, "Jacobian");
  out.check(std::abs(total - 1.0) < kQuadrature, "quadrature");
  out.check(secs < kChangeOfVariablesSeconds, "runtime");
}

void permutation_invariance(Outcome& out) {
  std::mt19937_64 rng(5);
  Model m(testing::small_config(3, 2), 5);
  testing::perturb_flow(m, 5, 0.3);
  double worst = 0.0;
  for (const auto& inst : dense_data(3, 8, 5, 10)) {
    const double ref = inverse_transform(m, inst, inst.answer_values()).log_density;
    for (int trial = 0; trial < 50; ++trial) {
      Permutation p = identity_permutation(inst.queries.size());
      std::shuffle(p.begin(), p.end(), rng);
      const SeriesInstance s = permute_queries(inst, p);
      worst = std::max(worst, std::abs(inverse_transform(m, s, s.answer_values()).log_density - ref));
    }
  }
  out.detail << "10 instances x 50 permutations, max |delta| " << worst;
  out.check(worst < kPermutation, "invariance");
}

void gradient_integrity(Outcome& out) {
  Model m(testing::small_config(3, 2), 6);
  testing::perturb_flow(m, 6, 0.3);
  SeriesInstance inst = dense_data(3, 3, 6, 1).front();
  inst.queries.resize(3);
  inst.answers->resize(3);
  ad::Tape t(true);
  ParameterBinding p(t, m.parameters());
  t.backward(njnll_loss(p, m, inst));
  std::vector<double> g(m.parameters().total_size(), 0.0);
  accumulate_gradients(t, m.parameters(), g);

  const double h = 1e-5;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& info : m.parameters().infos()) {
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < info.size; ++i) {
      const std::size_t pos = info.offset + i;
      const double saved = m.parameters().flat()[pos];
      m.parameters().flat()[pos] = saved + h;
      const double fp = joint_density(m, inst);
      m.parameters().flat()[pos] = saved - h;
      const double fm = joint_density(m, inst);
      m.parameters().flat()[pos] = saved;
      const double numeric = (fp - fm) / (2 * h);
      diff += (g[pos] - numeric) * (g[pos] - numeric);
      norm += numeric * numeric;
    }
    const double rel = std::sqrt(diff) / std::max(std::sqrt(norm), 1e-6);
    if (rel > worst) {
      worst = rel;
      worst_name = info.name;
    }
  }
  out.detail << m.parameters().infos().size() << " groups, " << m.parameters().total_size()
             << " entries, worst rel " << worst << " (" << worst_name << ")";
  out.check(worst < kGradientRel, "gradient");
}

TrainConfig ablation_config() {
  TrainConfig c;
  SyntheticSpec s;
  s.num_series = 2000;
  s.channels = 3;
  s.max_queries = 8;
  s.family = ProcessFamily::CorrelatedHeavyTail;
  s.seed = 1;
  c.synthetic = s;
  c.epochs = 40;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  c.seed = 1;
  c.eval_samples = 20;
  c.threads = 1;
  c.model.encoder.model_dim = 32;
  c.model.encoder.layers = 1;
  c.model.blocks = 4;
  return c;
}

void ablation_ordering(Outcome& out) {
  const auto start = Clock::now();
  const auto all = ablation_variants();
  std::vector<NamedVariant> variants;
  for (const auto& v : all)
    if (v.name == "full" || v.name == "-SITA" || v.name == "-SITA-Shiesh") variants.push_back(v);
  const auto rows = run_ablation(ablation_config(), variants);
  const double full = rows[0].record.test.njnll.mean;
  const double no_sita = rows[1].record.test.njnll.mean;
  const double neither = rows[2].record.test.njnll.mean;
  const double secs = seconds_since(start);
  out.detail << "test njNLL full " << full << ", -SITA " << no_sita << ", -SITA-Shiesh " << neither << ", " << secs
             << " s";
  out.check(no_sita - full > kAblationGap, "full vs -SITA gap");
  out.check(neither - no_sita > kAblationGap, "-SITA vs -SITA-Shiesh gap");
  out.check(secs < kAblationSeconds, "runtime");
}

void metric_identities(Outcome& out) {
  Model m(testing::small_config(3, 2), 8);
  testing::perturb_flow(m, 8, 0.3);
  SyntheticSpec s;
  s.max_queries = 1;
  s.num_series = 50;
  s.seed = 8;
  const Dataset data = generate_synthetic(s);
  const double mn = mnll(data, m), nj = njnll(data, m);
  const double crps = crps_from_samples(std::vector<double>{0.0, 2.0}, 1.0);
  const double mse = robust_squared_error(std::vector<double>{0.0, 0.0, 0.0, 100.0}, 0.0);
  out.detail << "K=1 mNLL " << mn << " njNLL " << nj << ", CRPS({0,2}, 1) = " << crps
             << ", robust MSE({0,0,0,100}, 0) = " << mse;
  out.check(mn == nj, "mNLL == njNLL");
  out.check(crps == 0.5, "CRPS fixture");
  out.check(mse == 0.0, "robust MSE fixture");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void reproducibility(Outcome& out) {
  TrainConfig c;
  SyntheticSpec s;
  s.num_series = 120;
  s.max_queries = 5;
  s.seed = 9;
  c.synthetic = s;
  c.epochs = 3;
  c.batch_size = 16;
  c.seed = 9;
  c.eval_samples = 30;
  c.threads = 1;
  c.model = testing::small_config(3, 2);
  const fs::path root = fs::temp_directory_path() / "profiti_acceptance_repro";
  fs::remove_all(root);
  const TrainResult a = train(c, root / "a");
  const TrainResult b = train(c, root / "b");

  auto without_time = [](const RunRecord& r) {
    Json j = to_json(r);
    for (auto& e : j["epochs"]) e.erase("seconds");
    j.erase("checkpoint");
    return j.dump();
  };
  RunRecord ra = a.record, rb = b.record;
  ra.checkpoint = rb.checkpoint = "";  // the two runs write to different directories
  const bool same_record = ra == rb && without_time(ra) == without_time(rb);
  const bool same_blob = slurp(root / "a/ckpt/params.bin") == slurp(root / "b/ckpt/params.bin") &&
                         slurp(root / "a/ckpt/manifest.json") == slurp(root / "b/ckpt/manifest.json");
  const Model loaded = load_checkpoint(root / "a/ckpt");
  const DataSplits sp = split_dataset(load_training_data(c), c.split, c.seed);
  const MetricReport again = evaluate(loaded, sp.test, {c.eval_samples, c.seed, 1, false}).report;
  const bool same_report = again == a.record.test && to_json(again).dump() == to_json(a.record.test).dump();
  fs::remove_all(root);
  out.detail << "record " << (same_record ? "identical" : "differs") << ", checkpoint files "
             << (same_blob ? "identical" : "differ") << ", reloaded report " << (same_report ? "identical" : "differs")
             << " (test njNLL " << a.record.test.njnll.mean << ")";
  out.check(same_record, "run record");
  out.check(same_blob, "checkpoint bytes");
  out.check(same_report, "checkpoint report");
}

struct Criterion {
  int id;
  const char* name;
  std::function<void(Outcome&)> run;
};

}  // namespace
}  // namespace profiti

int main(int argc, char** argv) {
  using namespace profiti;
  const std::vector<Criterion> criteria{{1, "shiesh suite", shiesh_suite},
                                        {2, "sorting fixtures", sorting_fixtures},
                                        {3, "invertibility", invertibility},
                                        {4, "change of variables", change_of_variables},
                                        {5, "permutation invariance", permutation_invariance},
                                        {6, "gradient integrity", gradient_integrity},
                                        {7, "ablation ordering", ablation_ordering},
                                        {8, "metric identities", metric_identities},
                                        {9, "reproducibility", reproducibility}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome out;
    out.detail.precision(6);
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    all_pass = all_pass && out.pass;
    std::printf("criterion %d (%s): %s  %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL", out.detail.str().c_str());
    std::fflush(stdout);
  }
  return all_pass ? 0 : 1;
}
