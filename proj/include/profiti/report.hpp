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

// Report and plot writers: plain-text tables, CSV dumps and small SVG charts.

#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "profiti/imts.hpp"
#include "profiti/metrics.hpp"
#include "profiti/tensor.hpp"
#include "profiti/trainer.hpp"

namespace profiti {

namespace detail {

inline std::string fmt(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace detail

inline std::string metric_table(const MetricReport& r) {
  std::ostringstream os;
  os << "metric   mean        std\n";
  auto row = [&](const char* name, const MetricValue& v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%-8s %-11s %s\n", name, detail::fmt(v.mean).c_str(), detail::fmt(v.std).c_str());
    os << buf;
  };
  row("njNLL", r.njnll);
  row("mNLL", r.mnll);
  row("CRPS", r.crps);
  row("MSE", r.mse);
  os << "instances " << r.instances << ", queries " << r.queries << ", folds " << r.folds << '\n';
  return os.str();
}

inline std::string ablation_table(std::span<const AblationRow> rows) {
  std::ostringstream os;
  os << "variant          njNLL      mNLL       CRPS       MSE\n";
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-16s %-10s %-10s %-10s %s\n", r.variant.c_str(),
                  detail::fmt(r.record.test.njnll.mean).c_str(), detail::fmt(r.record.test.mnll.mean).c_str(),
                  detail::fmt(r.record.test.crps.mean).c_str(), detail::fmt(r.record.test.mse.mean).c_str());
    os << buf;
  }
  return os.str();
}

inline void write_query_csv(std::ostream& os, std::span<const QueryRecord> rows) {
  os << "series,query,t,channel,answer,marginal_nll,crps,robust_mean,q05,q95\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << detail::csv_escape(r.series) << ',' << r.query << ',' << r.t << ',' << r.channel << ',' << r.answer << ','
       << r.marginal_nll << ',' << r.crps << ',' << r.robust_mean << ',' << r.sample_q05 << ',' << r.sample_q95 << '\n';
  }
}

inline void write_loss_csv(std::ostream& os, std::span<const EpochRecord> epochs) {
  os << "epoch,train_njnll,val_njnll,seconds\n";
  os.precision(17);
  for (const auto& e : epochs) os << e.epoch << ',' << e.train_njnll << ',' << e.val_njnll << ',' << e.seconds << '\n';
}

/// Samples as CSV: one row per (series, sample), one column per query.
inline void write_samples_csv(std::ostream& os, const SeriesInstance& inst, const Tensor& samples, bool header) {
  os.precision(17);
  if (header) os << "series,sample,query,t,channel,value\n";
  for (std::size_t s = 0; s < samples.rows(); ++s)
    for (std::size_t k = 0; k < samples.cols(); ++k)
      os << detail::csv_escape(inst.id) << ',' << s << ',' << k << ',' << inst.queries[k].t << ','
         << inst.queries[k].channel << ',' << samples(s, k) << '\n';
}

namespace detail {

struct Frame {
  double x0, x1, y0, y1;
  double width = 640, height = 360, pad = 48;
  double px(double x) const { return pad + (x - x0) / std::max(x1 - x0, 1e-12) * (width - 2 * pad); }
  double py(double y) const { return height - pad - (y - y0) / std::max(y1 - y0, 1e-12) * (height - 2 * pad); }
};

inline void svg_open(std::ostream& os, const Frame& f, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << f.pad << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n"
     << "<line x1=\"" << f.pad << "\" y1=\"" << f.height - f.pad << "\" x2=\"" << f.width - f.pad << "\" y2=\""
     << f.height - f.pad << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << f.pad << "\" y1=\"" << f.pad << "\" x2=\"" << f.pad << "\" y2=\"" << f.height - f.pad
     << "\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, const std::string& s, const char* anchor) {
    os << "<text x=\"" << x << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\""
       << anchor << "\">" << s << "</text>\n";
  };
  label(f.pad - 4, f.py(f.y0), fmt(f.y0, 2), "end");
  label(f.pad - 4, f.py(f.y1) + 8, fmt(f.y1, 2), "end");
  label(f.px(f.x0), f.height - f.pad + 16, fmt(f.x0, 1), "middle");
  label(f.px(f.x1), f.height - f.pad + 16, fmt(f.x1, 1), "middle");
}

inline void polyline(std::ostream& os, const Frame& f, std::span<const double> xs, std::span<const double> ys,
                     const char* color) {
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) os << f.px(xs[i]) << ',' << f.py(ys[i]) << ' ';
  os << "\"/>\n";
}

}  // namespace detail

inline void write_loss_svg(std::ostream& os, std::span<const EpochRecord> epochs) {
  std::vector<double> x, tr, va;
  for (const auto& e : epochs) {
    x.push_back(static_cast<double>(e.epoch));
    tr.push_back(e.train_njnll);
    va.push_back(e.val_njnll);
  }
  detail::Frame f{0, std::max(1.0, x.empty() ? 1.0 : x.back()), std::numeric_limits<double>::max(),
                  std::numeric_limits<double>::lowest()};
  for (double v : tr) f.y0 = std::min(f.y0, v), f.y1 = std::max(f.y1, v);
  for (double v : va) f.y0 = std::min(f.y0, v), f.y1 = std::max(f.y1, v);
  if (x.empty()) f.y0 = 0, f.y1 = 1;
  detail::svg_open(os, f, "njNLL per epoch (blue: train, orange: validation)");
  detail::polyline(os, f, x, tr, "#1f77b4");
  detail::polyline(os, f, x, va, "#ff7f0e");
  os << "</svg>\n";
}

/// Observations as dots, and per channel the 5-95% sample band and median at
/// each query time, for one instance.
inline void write_fan_svg(std::ostream& os, const SeriesInstance& inst, const Tensor& samples) {
  static constexpr const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  detail::Frame f{std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest(),
                  std::numeric_limits<double>::max(), std::numeric_limits<double>::lowest()};
  auto extend = [&](double t, double v) {
    f.x0 = std::min(f.x0, t), f.x1 = std::max(f.x1, t), f.y0 = std::min(f.y0, v), f.y1 = std::max(f.y1, v);
  };
  struct Band { double t, lo, mid, hi; };
  std::vector<std::vector<Band>> bands(static_cast<std::size_t>(inst.channels));
  std::vector<double> col(samples.rows());
  for (std::size_t k = 0; k < inst.queries.size(); ++k) {
    for (std::size_t s = 0; s < samples.rows(); ++s) col[s] = samples(s, k);
    std::sort(col.begin(), col.end());
    const Band b{inst.queries[k].t, quantile(col, 0.05), quantile(col, 0.5), quantile(col, 0.95)};
    bands[static_cast<std::size_t>(inst.queries[k].channel)].push_back(b);
    extend(b.t, b.lo);
    extend(b.t, b.hi);
  }
  for (const auto& o : inst.observations) extend(o.t, o.value);
  detail::svg_open(os, f, "forecast fan: " + inst.id);
  for (std::size_t c = 0; c < bands.size(); ++c) {
    auto& b = bands[c];
    if (b.empty()) continue;
    std::sort(b.begin(), b.end(), [](const Band& a, const Band& z) { return a.t < z.t; });
    const char* color = colors[c % 6];
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (const auto& p : b) os << f.px(p.t) << ',' << f.py(p.hi) << ' ';
    for (auto it = b.rbegin(); it != b.rend(); ++it) os << f.px(it->t) << ',' << f.py(it->lo) << ' ';
    os << "\"/>\n";
    std::vector<double> ts, mids;
    for (const auto& p : b) ts.push_back(p.t), mids.push_back(p.mid);
    detail::polyline(os, f, ts, mids, color);
  }
  for (const auto& o : inst.observations) {
    os << "<circle cx=\"" << f.px(o.t) << "\" cy=\"" << f.py(o.value) << "\" r=\"3\" fill=\""
       << colors[static_cast<std::size_t>(o.channel) % 6] << "\"/>\n";
  }
  if (inst.answers) {
    for (std::size_t k = 0; k < inst.queries.size(); ++k) {
      os << "<circle cx=\"" << f.px(inst.queries[k].t) << "\" cy=\"" << f.py((*inst.answers)[k])
         << "\" r=\"3\" fill=\"none\" stroke=\"black\"/>\n";
    }
  }
  os << "</svg>\n";
}

}  // namespace profiti
