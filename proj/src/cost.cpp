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

#include "lw3d/cost.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lw3d {

namespace {

std::uint64_t sites_without_batch(const Shape5& s) { return static_cast<std::uint64_t>(s.c) * s.t * s.h * s.w; }

struct Units {
  double param_div;
  double flop_div;
  int decimals;
  const char* param_unit;
  const char* flop_unit;
};

Units units_of(ReportScale s) {
  if (s == ReportScale::kModule) return {1e3, 1e6, 1, "K", "M"};
  return {1e6, 1e9, 3, "M", "G"};
}

void add_to(CostReport& r, const std::string& id, std::uint64_t params, std::uint64_t flops, bool in_total) {
  for (CostRow& row : r.rows) {
    if (row.id == id) {
      row.params += params;
      row.flops += flops;
      return;
    }
  }
  r.rows.push_back({id, params, flops, in_total});
}

void finish_totals(CostReport& r) {
  r.total_params = 0;
  r.total_flops = 0;
  for (const CostRow& row : r.rows) {
    if (!row.in_total) continue;
    r.total_params += row.params;
    r.total_flops += row.flops;
  }
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double rel_gap(double ours, double ref) { return ref == 0 ? 0 : std::fabs(ours - ref) / ref; }

}  // namespace

const CostRow* CostReport::find(const std::string& id) const {
  for (const CostRow& r : rows) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::string format_scaled(std::uint64_t value, double divisor, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, static_cast<double>(value) / divisor);
  return buf;
}

std::vector<LayerCost> layer_costs(const ModuleGraph& g, const CostOptions& opt) {
  const ShapeMap shapes = infer_shapes(g);
  std::vector<LayerCost> out;
  out.reserve(g.layers.size());
  for (const LayerSpec& l : g.layers) {
    LayerCost c;
    c.id = l.id;
    c.kind = l.kind;
    c.group = l.group;
    c.module = l.module;
    c.stage = l.stage;
    c.output = shapes.at(l.id).front();
    if (l.kind == LayerKind::kConv) {
      const Conv3DSpec& s = l.conv();
      c.params = s.param_count();
      c.flops = sites_without_batch(c.output) * (s.in_channels / s.groups) * s.kernel.volume();
    } else if (l.kind == LayerKind::kPool) {
      c.flops = sites_without_batch(c.output) * l.pool().kernel.volume();
    } else if (l.kind == LayerKind::kBatchNorm && opt.include_bn_params) {
      c.params = 2 * std::get<BatchNormSpec>(l.params).channels;
    }
    out.push_back(std::move(c));
  }
  return out;
}

CostReport analyze_costs(const ModuleGraph& g, const CostOptions& opt) {
  CostReport r;
  r.title = to_string(g.arch) + " " + g.input_shape.str() + (opt.per_layer ? " per layer" : "");
  for (const LayerCost& c : layer_costs(g, opt)) {
    if (c.kind == LayerKind::kInput) continue;
    const bool in_total = c.group != "Classifier";
    if (opt.per_layer) {
      r.rows.push_back({c.id, c.params, c.flops, in_total});
    } else {
      add_to(r, c.group, c.params, c.flops, in_total);
    }
  }
  finish_totals(r);
  r.notes = g.notes;
  if (opt.include_bn_params) r.notes.push_back("batch-norm scale/shift parameters included");
  r.notes.push_back("Classifier row excluded from Total");
  return r;
}

CostReport count_params(const ModuleGraph& g, const CostOptions& opt) {
  CostReport r = analyze_costs(g, opt);
  for (CostRow& row : r.rows) row.flops = 0;
  finish_totals(r);
  return r;
}

CostReport count_flops(const ModuleGraph& g, const CostOptions& opt) {
  CostReport r = analyze_costs(g, opt);
  for (CostRow& row : r.rows) row.params = 0;
  finish_totals(r);
  return r;
}

PublishedModuleCost published_4b(Arch variant) {
  switch (variant) {
    case Arch::kI3D: return {736.5, 1175.2};
    case Arch::kIST: return {329.5, 537.0};
    case Arch::kSST: return {209.5, 331.0};
    case Arch::kGSST: return {104.7, 166.7};
  }
  return {};
}

CostReport module_report(const ModuleGraph& g, const std::string& module, const CostOptions& opt) {
  CostReport r;
  r.scale = ReportScale::kModule;
  r.title = to_string(g.arch) + " module " + module + " input " + g.input_shape.str();
  r.rows = {{"stage one", 0, 0, true}, {"stage two", 0, 0, true}};
  bool found = false;
  for (const LayerCost& c : layer_costs(g, opt)) {
    if (c.module != module) continue;
    found = true;
    CostRow& row = r.rows[c.stage == 1 ? 0 : 1];
    row.params += c.params;
    row.flops += c.flops;
  }
  if (!found) throw std::invalid_argument("graph has no module '" + module + "'");
  finish_totals(r);
  r.notes = g.notes;

  const InceptionWidths canonical = canonical_widths()[2].widths;
  const Shape5 canonical_in{1, 480, 8, 14, 14};
  const bool is_canonical_4b = g.input_shape.c == canonical_in.c && g.input_shape.t == canonical_in.t &&
                               g.input_shape.h == canonical_in.h && g.input_shape.w == canonical_in.w &&
                               g.layer(module + "/b1_1x1").conv().out_channels == canonical.b1 &&
                               g.layer(module + "/b4_proj").conv().out_channels == canonical.b4_proj &&
                               !opt.include_bn_params;
  if (is_canonical_4b) {
    const PublishedModuleCost ref = published_4b(g.arch);
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << "published reference " << ref.params_k << "K / " << ref.flops_m << "M; constructed differs by ";
    os.precision(2);
    os << 100.0 * rel_gap(r.total_params / 1e3, ref.params_k) << "% / "
       << 100.0 * rel_gap(r.total_flops / 1e6, ref.flops_m) << "%";
    r.notes.push_back(os.str());
  }
  return r;
}

FactorizationComparison compare_factorizations(std::size_t in_channels, std::size_t out_channels, std::size_t k,
                                               const Extent3& sites) {
  if (k == 0 || k % 2 == 0) throw std::invalid_argument("kernel size must be odd, got " + std::to_string(k));
  if (in_channels == 0 || out_channels == 0) throw std::invalid_argument("channel counts must be positive");
  if (sites.volume() == 0) throw std::invalid_argument("site extents must be positive");
  const std::size_t p = k / 2;
  auto conv = [](std::size_t in, std::size_t out, Extent3 kernel, Extent3 pad) {
    Conv3DSpec s;
    s.in_channels = in;
    s.out_channels = out;
    s.kernel = kernel;
    s.padding = pad;
    return s;
  };
  const Extent3 full{k, k, k}, temporal{k, 1, 1}, spatial{1, k, k};
  const Extent3 pfull{p, p, p}, ptemporal{p, 0, 0}, pspatial{0, p, p};
  const std::size_t I = in_channels, O = out_channels;

  FactorizationComparison out;
  auto add = [&](std::string label, std::vector<Conv3DSpec> layers) {
    FactorizationCandidate c;
    c.label = std::move(label);
    if (k == 1) layers = {conv(I, O, full, pfull)};
    for (const Conv3DSpec& s : layers) {
      c.layer_params.push_back(s.param_count());
      c.params += s.param_count();
    }
    c.flops = c.params * sites.volume();
    c.layers = std::move(layers);
    out.candidates.push_back(std::move(c));
  };
  add("full3D", {conv(I, O, full, pfull)});
  add("temporal-first-widen-early", {conv(I, O, temporal, ptemporal), conv(O, O, spatial, pspatial)});
  add("temporal-first-widen-late", {conv(I, I, temporal, ptemporal), conv(I, O, spatial, pspatial)});
  add("spatial-first-widen-early", {conv(I, O, spatial, pspatial), conv(O, O, temporal, ptemporal)});
  add("spatial-first-widen-late", {conv(I, I, spatial, pspatial), conv(I, O, temporal, ptemporal)});
  for (std::size_t i = 1; i < out.candidates.size(); ++i) {
    if (out.candidates[i].params < out.candidates[out.best].params) out.best = i;
  }
  return out;
}

std::string emit_report(const CostReport& r, const std::string& format) {
  const Units u = units_of(r.scale);
  std::ostringstream os;
  if (format == "table") {
    os << "# " << r.title << "\n# convention: " << r.convention << "\n";
    os << "Layer | Params (" << u.param_unit << ") | FLOPs (" << u.flop_unit << ")\n";
    if (!r.rows.empty()) {
      for (const CostRow& row : r.rows) {
        os << row.id << " | " << format_scaled(row.params, u.param_div, u.decimals) << " | "
           << format_scaled(row.flops, u.flop_div, u.decimals) << (row.in_total ? "" : " | not in total") << "\n";
      }
      os << "Total | " << format_scaled(r.total_params, u.param_div, u.decimals) << " | "
         << format_scaled(r.total_flops, u.flop_div, u.decimals) << "\n";
    }
    for (const std::string& n : r.notes) os << "# note: " << n << "\n";
  } else if (format == "csv") {
    os << "layer,params_" << u.param_unit << ",flops_" << u.flop_unit << ",params,flops,in_total\n";
    if (!r.rows.empty()) {
      for (const CostRow& row : r.rows) {
        os << csv_escape(row.id) << "," << format_scaled(row.params, u.param_div, u.decimals) << ","
           << format_scaled(row.flops, u.flop_div, u.decimals) << "," << row.params << "," << row.flops << ","
           << (row.in_total ? 1 : 0) << "\n";
      }
      os << "total," << format_scaled(r.total_params, u.param_div, u.decimals) << ","
         << format_scaled(r.total_flops, u.flop_div, u.decimals) << "," << r.total_params << "," << r.total_flops
         << ",1\n";
    }
  } else if (format == "json") {
    nlohmann::ordered_json j;
    j["title"] = r.title;
    j["convention"] = r.convention;
    j["units"] = {{"params", u.param_unit}, {"flops", u.flop_unit}, {"decimals", u.decimals}};
    j["rows"] = nlohmann::ordered_json::array();
    for (const CostRow& row : r.rows) {
      j["rows"].push_back({{"id", row.id},
                           {"params", row.params},
                           {"flops", row.flops},
                           {"params_scaled", format_scaled(row.params, u.param_div, u.decimals)},
                           {"flops_scaled", format_scaled(row.flops, u.flop_div, u.decimals)},
                           {"in_total", row.in_total}});
    }
    j["total"] = {{"params", r.total_params},
                  {"flops", r.total_flops},
                  {"params_scaled", format_scaled(r.total_params, u.param_div, u.decimals)},
                  {"flops_scaled", format_scaled(r.total_flops, u.flop_div, u.decimals)}};
    j["notes"] = r.notes;
    os << j.dump(2) << "\n";
  } else {
    throw std::invalid_argument("unknown report format '" + format + "' (expected table|csv|json)");
  }
  return os.str();
}

std::string emit_factorizations(const FactorizationComparison& c, const std::string& format) {
  std::ostringstream os;
  auto breakdown = [](const FactorizationCandidate& f) {
    std::string s;
    for (std::size_t i = 0; i < f.layer_params.size(); ++i) s += (i ? "+" : "") + std::to_string(f.layer_params[i]);
    return s;
  };
  auto layers = [](const FactorizationCandidate& f) {
    std::string s;
    for (std::size_t i = 0; i < f.layers.size(); ++i) {
      const Conv3DSpec& l = f.layers[i];
      s += (i ? " -> " : "") + l.kernel.str() + " " + std::to_string(l.in_channels) + "->" +
           std::to_string(l.out_channels);
    }
    return s;
  };
  if (format == "table") {
    os << "Candidate | Layers | Params | Breakdown | Params (K) | FLOPs (M)\n";
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
      const auto& f = c.candidates[i];
      os << f.label << " | " << layers(f) << " | " << f.params << " | " << breakdown(f) << " | "
         << format_scaled(f.params, 1e3, 1) << " | " << format_scaled(f.flops, 1e6, 1)
         << (i == c.best ? " | best" : "") << "\n";
    }
  } else if (format == "csv") {
    os << "label,params,breakdown,flops,best\n";
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
      const auto& f = c.candidates[i];
      os << f.label << "," << f.params << "," << breakdown(f) << "," << f.flops << "," << (i == c.best ? 1 : 0)
         << "\n";
    }
  } else if (format == "json") {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < c.candidates.size(); ++i) {
      const auto& f = c.candidates[i];
      j.push_back({{"label", f.label},
                   {"layers", layers(f)},
                   {"layer_params", f.layer_params},
                   {"params", f.params},
                   {"flops", f.flops},
                   {"best", i == c.best}});
    }
    os << j.dump(2) << "\n";
  } else {
    throw std::invalid_argument("unknown format '" + format + "' (expected table|csv|json)");
  }
  return os.str();
}

}  // namespace lw3d
