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

#include "lw3d/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>

#include "lw3d/config.hpp"
#include "lw3d/cost.hpp"
#include "lw3d/dataio.hpp"
#include "lw3d/executor.hpp"
#include "lw3d/fusion.hpp"
#include "lw3d/train.hpp"

namespace lw3d::cli {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

const CLI::Validator kShape(
    [](std::string& s) {
      try {
        parse_shape(s);
      } catch (const std::exception& e) {
        return std::string(e.what());
      }
      return std::string();
    },
    "CxTxHxW", "shape");

const CLI::Validator kArch = CLI::IsMember({"i3d", "inc", "ist", "sst", "gsst"});

// Network selection shared by several subcommands: either --config or the
// individual flags.
struct ModelFlags {
  std::string config;
  std::string arch;
  std::string input;
  std::size_t classes;
  double width_mult;
  std::size_t shuffle_groups = 16;

  ModelFlags(std::string a, std::string in, std::size_t n, double m)
      : arch(std::move(a)), input(std::move(in)), classes(n), width_mult(m) {}

  void attach(CLI::App* app) {
    auto* c = app->add_option("--config", config, "YAML model description (replaces the flags below)")
                  ->check(CLI::ExistingFile);
    app->add_option("--arch", arch, "Architecture")->check(kArch)->capture_default_str()->excludes(c);
    app->add_option("--input", input, "Input shape CxTxHxW")->check(kShape)->capture_default_str()->excludes(c);
    app->add_option("--classes", classes, "Class count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str()
        ->excludes(c);
    app->add_option("--width-mult", width_mult, "Uniform width multiplier")
        ->check(CLI::PositiveNumber)
        ->capture_default_str()
        ->excludes(c);
    app->add_option("--shuffle-groups", shuffle_groups, "Preferred channel-shuffle group count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str()
        ->excludes(c);
  }

  ModelConfig resolve() const {
    if (!config.empty()) return load_model_config(config);
    ModelConfig m;
    m.arch = parse_arch(arch);
    m.input = parse_shape(input);
    m.classes = classes;
    m.build.width_mult = width_mult;
    m.build.shuffle_groups = shuffle_groups;
    return m;
  }
};

void set_threads_from_env() {
  const char* v = std::getenv("LW3D_THREADS");
  if (v == nullptr || *v == '\0') return;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n <= 0) throw CLI::ValidationError("LW3D_THREADS", "must be a positive integer, got '" + std::string(v) + "'");
  omp_set_num_threads(static_cast<int>(n));
}

// Matches a clip's channel count to the network (single-channel clips are
// replicated) and its spatial size (bilinear resize).
Tensor5D fit_clip(Tensor5D clip, const Shape5& want) {
  if (clip.shape().c == 1 && want.c == 3) {
    const Tensor5D parts[3] = {clip, clip, clip};
    clip = concat_channels(parts);
  }
  if (clip.shape().c != want.c) {
    throw ShapeError("clip has " + std::to_string(clip.shape().c) + " channels, network expects " +
                     std::to_string(want.c));
  }
  if (clip.shape().h != want.h || clip.shape().w != want.w) clip = resize_bilinear(clip, want.h, want.w);
  return clip;
}

// Output sink: a file when a path is given, `fallback` otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw FormatError("cannot open '" + path + "' for writing");
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

InitScheme parse_init(const std::string& s) { return s == "he" ? InitScheme::kHe : InitScheme::kGlorot; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Light-weight 3D convolutional network toolkit", "lw3d"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::function<void()> action;

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Per-layer parameter and FLOP accounting");
  ModelFlags an_model("i3d", "3x32x224x224", 60, 1.0);
  an_model.attach(analyze);
  std::string an_format = "table";
  bool an_bn = false, an_per_layer = false;
  std::string an_module;
  analyze->add_option("--format", an_format, "Output format")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();
  analyze->add_flag("--include-bn-params", an_bn, "Count batch-norm scale and shift as parameters");
  analyze->add_flag("--per-layer", an_per_layer, "One row per layer instead of per group");
  analyze->add_option("--module", an_module, "Report one inception module (e.g. 4b) by stage");
  analyze->callback([&] {
    action = [&] {
      const ModelConfig m = an_model.resolve();
      CostOptions opt{an_bn, an_per_layer};
      if (an_module.empty()) {
        out << emit_report(analyze_costs(m.build_graph(), opt), an_format);
      } else {
        out << emit_report(module_report(extract_module(m.arch, m.input, m.classes, an_module, m.build), an_module, opt),
                           an_format);
      }
    };
  });

  // compare-factorizations
  auto* cmp = app.add_subcommand("compare-factorizations", "Parameter cost of spatiotemporal factorizations");
  std::size_t cf_in = 96, cf_out = 208, cf_k = 3;
  std::string cf_sites = "8x14x14", cf_format = "table";
  cmp->add_option("--in", cf_in, "Input channels")->check(CLI::PositiveNumber)->capture_default_str();
  cmp->add_option("--out", cf_out, "Output channels")->check(CLI::PositiveNumber)->capture_default_str();
  cmp->add_option("--k", cf_k, "Kernel size (odd)")->check(CLI::PositiveNumber)->capture_default_str();
  cmp->add_option("--sites", cf_sites, "Output sites TxHxW")->capture_default_str();
  cmp->add_option("--format", cf_format, "Output format")
      ->check(CLI::IsMember({"table", "csv", "json"}))
      ->capture_default_str();
  cmp->callback([&] {
    action = [&] {
      const Shape5 s = parse_shape("1x" + cf_sites);
      out << emit_factorizations(compare_factorizations(cf_in, cf_out, cf_k, {s.t, s.h, s.w}), cf_format);
    };
  });

  // manifest
  auto* man = app.add_subcommand("manifest", "Print the canonical layer manifest (weight-file order)");
  ModelFlags mf_model("i3d", "3x32x224x224", 60, 1.0);
  mf_model.attach(man);
  man->callback([&] { action = [&] { out << manifest_text(mf_model.resolve().build_graph()); }; });

  // init-weights
  auto* initw = app.add_subcommand("init-weights", "Write a seeded weight file");
  ModelFlags iw_model("gsst", "3x8x32x32", 2, 0.125);
  iw_model.attach(initw);
  std::uint64_t iw_seed = 0;
  std::string iw_scheme = "glorot", iw_out;
  initw->add_option("--seed", iw_seed, "Seed")->capture_default_str();
  initw->add_option("--init", iw_scheme, "Weight scheme")
      ->check(CLI::IsMember({"glorot", "he", "zero"}))
      ->capture_default_str();
  initw->add_option("--out", iw_out, "Weight file to write")->required();
  initw->callback([&] {
    action = [&] {
      const ModuleGraph g = iw_model.resolve().build_graph();
      const NetworkWeights w = iw_scheme == "zero" ? zero_weights(g) : init_weights(g, iw_seed, parse_init(iw_scheme));
      save_weights(iw_out, g, w);
      out << "wrote " << g.count(LayerKind::kConv) << " conv and " << g.count(LayerKind::kBatchNorm)
          << " batch-norm records to " << iw_out << "\n";
    };
  });

  // infer
  auto* inf = app.add_subcommand("infer", "Class scores for clips, averaged over sampled windows");
  ModelFlags in_model("gsst", "3x8x32x32", 2, 0.125);
  in_model.attach(inf);
  std::string in_weights, in_manifest, in_out;
  std::vector<std::string> in_clips;
  std::size_t in_windows = 4;
  std::uint64_t in_seed = 0;
  inf->add_option("--weights", in_weights, "Weight file")->required()->check(CLI::ExistingFile);
  auto* clip_opt = inf->add_option("--clip", in_clips, "Tensor file(s), one video each")->check(CLI::ExistingFile);
  auto* man_opt = inf->add_option("--manifest", in_manifest, "Clip manifest")->check(CLI::ExistingFile);
  clip_opt->excludes(man_opt);
  inf->add_option("--windows", in_windows, "Temporal windows averaged per video")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  inf->add_option("--seed", in_seed, "Window sampling seed")->capture_default_str();
  inf->add_option("--out", in_out, "Score CSV path (default stdout)");
  inf->callback([&] {
    action = [&] {
      if (in_clips.empty() && in_manifest.empty()) throw CLI::RequiredError("--clip or --manifest");
      const ModuleGraph g = in_model.resolve().build_graph();
      const NetworkWeights w = load_weights(in_weights, g);
      std::vector<ClipRecord> records;
      if (!in_manifest.empty()) {
        records = read_manifest(in_manifest);
      } else {
        for (const auto& p : in_clips) records.push_back({p, 0, Stream::kRgb, p});
      }
      std::vector<ScoreVector> scores;
      for (std::size_t i = 0; i < records.size(); ++i) {
        const Tensor5D video = load_clip(records[i]);
        ScoreVector acc(g.num_classes, 0.0);
        for (std::size_t k = 0; k < in_windows; ++k) {
          const std::uint64_t seed = record_seed(in_seed, i * in_windows + k);
          const Tensor5D clip = fit_clip(sample_clip(video, g.input_shape.t, seed), g.input_shape);
          const auto probs = average_positions(forward(g, w, clip));
          for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += probs[0][c];
        }
        for (double& v : acc) v /= static_cast<double>(in_windows);
        scores.push_back(std::move(acc));
      }
      Sink sink(in_out, out);
      write_scores_csv(*sink, scores);
      if (!in_manifest.empty()) {
        std::vector<std::size_t> labels;
        for (const auto& r : records) labels.push_back(r.label);
        err << "accuracy " << fixed(evaluate_accuracy(scores, labels), 6) << "\n";
      }
    };
  });

  // train-toy
  auto* tt = app.add_subcommand("train-toy", "Train a scaled-down network on synthetic or listed clips");
  ModelFlags tt_model("gsst", "3x8x32x32", 2, 0.125);
  tt_model.attach(tt);
  TrainConfig tcfg;
  tcfg.learning_rate = 0.01f;
  tcfg.grad_clip_norm = 1.0;
  tcfg.seed = 7;
  std::size_t tt_per_class = 8;
  double tt_noise = 0.1;
  std::string tt_data, tt_save, tt_init = "he";
  tt->add_option("--epochs", tcfg.epochs, "Epochs")->check(CLI::PositiveNumber)->capture_default_str();
  tt->add_option("--seed", tcfg.seed, "Seed for data, weights and shuffling")->capture_default_str();
  tt->add_option("--lr", tcfg.learning_rate, "Initial learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  tt->add_option("--momentum", tcfg.momentum, "Momentum")->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  tt->add_option("--decay", tcfg.lr_decay_factor, "Learning-rate divisor on plateau")->capture_default_str();
  tt->add_option("--patience", tcfg.plateau_patience, "Epochs without improvement before decay")
      ->capture_default_str();
  tt->add_option("--threshold", tcfg.plateau_threshold, "Minimum loss improvement")->capture_default_str();
  tt->add_option("--batch", tcfg.batch_size, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  tt->add_option("--clip-norm", tcfg.grad_clip_norm, "Gradient L2 clip (0 disables)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  tt->add_option("--init", tt_init, "Initial weights")->check(CLI::IsMember({"he", "glorot"}))->capture_default_str();
  tt->add_option("--data", tt_data, "Clip manifest (default: synthetic dataset)")->check(CLI::ExistingFile);
  tt->add_option("--clips-per-class", tt_per_class, "Synthetic clips per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tt->add_option("--noise", tt_noise, "Synthetic noise level")->check(CLI::NonNegativeNumber)->capture_default_str();
  tt->add_option("--save-weights", tt_save, "Write the trained weights here");
  tt->callback([&] {
    action = [&] {
      tcfg.validate();
      const ModuleGraph g = tt_model.resolve().build_graph();
      std::vector<Sample> data;
      if (tt_data.empty()) {
        SynthConfig sc;
        sc.classes = g.num_classes;
        sc.clips_per_class = tt_per_class;
        sc.shape = g.input_shape;
        sc.shape.n = 1;
        sc.noise = tt_noise;
        sc.seed = tcfg.seed;
        data = synth_samples(sc);
      } else {
        for (const ClipRecord& r : read_manifest(tt_data)) data.push_back({load_clip(r), r.label});
      }
      for (Sample& s : data) s.clip = fit_clip(std::move(s.clip), g.input_shape);
      out << "epoch,loss,accuracy,lr\n";
      const TrainResult res = train_toy(g, data, tcfg, init_weights(g, tcfg.seed, parse_init(tt_init)),
                                        [&](const EpochStats& s) {
                                          out << s.epoch << "," << fixed(s.loss, 6) << "," << fixed(s.accuracy, 4)
                                              << "," << general(s.lr) << "\n";
                                          out.flush();
                                        });
      if (!tt_save.empty()) save_weights(tt_save, g, res.weights);
    };
  });

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of analytic gradients");
  std::string gc_op = "all";
  std::size_t gc_trials = 20;
  std::uint64_t gc_seed = 0;
  double gc_tol = 1e-2;
  std::vector<std::string> ops = gradcheck_ops();
  ops.push_back("all");
  gc->add_option("--op", gc_op, "Operator")->check(CLI::IsMember(ops))->capture_default_str();
  gc->add_option("--trials", gc_trials, "Random instances per operator")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gc->add_option("--seed", gc_seed, "Seed")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "Maximum accepted relative error")->capture_default_str();
  int gc_status = kOk;
  gc->callback([&] {
    action = [&] {
      std::vector<std::string> which = gc_op == "all" ? gradcheck_ops() : std::vector<std::string>{gc_op};
      out << "op,trials,max_rel_error,exact,pass\n";
      for (const auto& op : which) {
        const GradcheckResult r = gradcheck(op, gc_trials, gc_seed);
        const bool pass = r.exact ? r.max_rel_error == 0 : r.max_rel_error <= gc_tol;
        if (!pass) gc_status = kDataError;
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
        out << r.op << "," << r.trials << "," << buf << "," << (r.exact ? 1 : 0) << "," << (pass ? 1 : 0) << "\n";
      }
    };
  });

  // synth-data
  auto* sd = app.add_subcommand("synth-data", "Write a synthetic labelled clip dataset");
  SynthConfig scfg;
  std::string sd_out, sd_shape = "3x8x32x32", sd_stream = "rgb";
  sd->add_option("--out", sd_out, "Output directory")->required();
  sd->add_option("--classes", scfg.classes, "Class count")->check(CLI::PositiveNumber)->capture_default_str();
  sd->add_option("--clips-per-class", scfg.clips_per_class, "Clips per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sd->add_option("--shape", sd_shape, "Clip shape CxTxHxW")->check(kShape)->capture_default_str();
  sd->add_option("--stream", sd_stream, "Stream")->check(CLI::IsMember({"rgb", "depth"}))->capture_default_str();
  sd->add_option("--noise", scfg.noise, "Noise level")->check(CLI::NonNegativeNumber)->capture_default_str();
  sd->add_option("--seed", scfg.seed, "Seed")->capture_default_str();
  sd->callback([&] {
    action = [&] {
      scfg.shape = parse_shape(sd_shape);
      scfg.stream = parse_stream(sd_stream);
      const SynthDataset ds = synth_dataset(scfg, sd_out);
      out << "wrote " << ds.records.size() << " clips and manifest.tsv to " << sd_out << "\n"
          << "nearest-centroid sanity accuracy " << fixed(ds.sanity_accuracy, 4) << "\n";
    };
  });

  // fuse
  auto* fu = app.add_subcommand("fuse", "Merge two streams' prediction scores");
  std::string fu_a, fu_b, fu_labels, fu_strategy = "ms2", fu_out;
  double fu_acc_a = 0, fu_acc_b = 0;
  fu->add_option("--scores-a", fu_a, "First stream scores CSV")->required()->check(CLI::ExistingFile);
  fu->add_option("--scores-b", fu_b, "Second stream scores CSV")->required()->check(CLI::ExistingFile);
  fu->add_option("--labels", fu_labels, "Ground-truth labels CSV")->check(CLI::ExistingFile);
  fu->add_option("--strategy", fu_strategy, "ms1 (average) or ms2 (gated tanh weights)")
      ->check(CLI::IsMember({"ms1", "ms2"}))
      ->capture_default_str();
  fu->add_option("--acc-a", fu_acc_a, "Validation accuracy of stream a")->check(CLI::Range(0.0, 1.0));
  fu->add_option("--acc-b", fu_acc_b, "Validation accuracy of stream b")->check(CLI::Range(0.0, 1.0));
  fu->add_option("--out", fu_out, "Merged score CSV path (default stdout)");
  fu->callback([&] {
    action = [&] {
      const auto a = read_scores_csv(fu_a);
      const auto b = read_scores_csv(fu_b);
      if (a.size() != b.size()) {
        throw std::invalid_argument("score files have " + std::to_string(a.size()) + " and " +
                                    std::to_string(b.size()) + " rows");
      }
      const FusionStrategy st = parse_strategy(fu_strategy);
      std::vector<ScoreVector> merged;
      for (std::size_t i = 0; i < a.size(); ++i) merged.push_back(merge(a[i], b[i], st, fu_acc_a, fu_acc_b));
      Sink sink(fu_out, out);
      write_scores_csv(*sink, merged);
      if (!fu_labels.empty()) {
        const double acc = evaluate_accuracy(merged, read_labels_csv(fu_labels));
        (fu_out.empty() ? err : out) << "accuracy " << fixed(acc, 6) << "\n";
      }
    };
  });

  // bench
  auto* be = app.add_subcommand("bench", "Forward-pass wall-clock timing on this machine");
  ModelFlags be_model("gsst", "3x32x224x224", 60, 1.0);
  be_model.attach(be);
  std::size_t be_batch = 4, be_repeat = 5;
  std::string be_conv = "lowered";
  be->add_option("--batch", be_batch, "Batch size")->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--repeat", be_repeat, "Timed runs")->check(CLI::PositiveNumber)->capture_default_str();
  be->add_option("--conv", be_conv, "Convolution implementation")
      ->check(CLI::IsMember({"lowered", "direct"}))
      ->capture_default_str();
  be->callback([&] {
    action = [&] {
      const ModuleGraph g = be_model.resolve().build_graph();
      const NetworkWeights w = init_weights(g, 0);
      Shape5 s = g.input_shape;
      s.n = be_batch;
      const Tensor5D x = full(s, 0.5f);
      ForwardOptions opt;
      opt.conv = be_conv == "direct" ? ConvImpl::kDirect : ConvImpl::kLowered;
      std::vector<double> ms;
      for (std::size_t i = 0; i < be_repeat; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        forward(g, w, x, opt);
        ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
      }
      std::sort(ms.begin(), ms.end());
      out << "# timing is nondeterministic; published GPU timings are not targets for this report\n"
          << "arch " << to_string(g.arch) << ", input " << s.str() << ", threads " << omp_get_max_threads()
          << ", conv " << be_conv << "\n"
          << "median_ms " << fixed(ms[ms.size() / 2], 1) << "\n"
          << "min_ms " << fixed(ms.front(), 1) << "\n"
          << "max_ms " << fixed(ms.back(), 1) << "\n";
    };
  });

  try {
    set_threads_from_env();
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (action) action();
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return gc_status;
}

}  // namespace lw3d::cli
