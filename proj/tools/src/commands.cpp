// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "onegan/data.hpp"
#include "onegan/errors.hpp"
#include "onegan/paths.hpp"
#include "onegan/priors.hpp"
#include "onegan/training.hpp"

namespace onegan::cli {

namespace {

const std::set<std::string> kMetrics{"iou", "dice", "nmi", "ami", "cis"};
const std::set<std::string> kTasks{"segment", "reconstruct", "remove", "translate", "cluster"};

std::string iteration_dir(int64_t iteration) {
  std::ostringstream os;
  os << "iter_" << std::setw(7) << std::setfill('0') << iteration;
  return os.str();
}

std::vector<fs::path> collect_images(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  auto is_image = [](const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
  };
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && is_image(e.path())) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw ValidationError("input not found: " + in.string());
    }
  }
  if (files.empty()) throw ValidationError("no input images");
  return files;
}

torch::Tensor load_images(const std::vector<fs::path>& files, int64_t side) {
  std::vector<torch::Tensor> images;
  for (const auto& f : files) images.push_back(read_image(f, side));
  return torch::stack(images);
}

std::vector<int64_t> check_children(const std::vector<int64_t>& children, const HyperParams& hp) {
  for (auto k : children) {
    if (k < 1 || k > hp.n_child) {
      throw ValidationError("unknown child class " + std::to_string(k) + " (valid: 1.." +
                            std::to_string(hp.n_child) + ")");
    }
  }
  return children;
}

// Keeps only metrics.log lines from iterations before `iteration`, so a
// resumed run does not duplicate records written after its checkpoint.
void truncate_log(const fs::path& file, int64_t iteration) {
  if (!fs::exists(file)) return;
  std::ifstream in(file);
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (LossReport::from_line(line).iteration < iteration) keep.push_back(line);
  }
  in.close();
  std::ofstream out(file, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

std::vector<int64_t> sample_children(const HyperParams& hp, int64_t max_rows) {
  std::vector<int64_t> out;
  const int64_t rows = std::min(hp.n_child, max_rows);
  for (int64_t r = 0; r < rows; ++r) out.push_back(1 + r * hp.n_child / rows);
  return out;
}

Config effective_config(const TrainArgs& args) {
  auto config = load_config(args.config);
  if (args.seed) config.train.seed = *args.seed;
  if (args.ablation != "none") apply_ablation(config, args.ablation);
  config.train.data_root = resolve_data_root(config, args.config).string();
  config.validate();
  return config;
}

} // namespace

fs::path resolve_data_root(const Config& config, const fs::path& config_file) {
  fs::path root(config.train.data_root);
  if (root.empty()) throw ConfigError("config has no [data] root");
  if (root.is_relative() && !config_file.empty()) {
    auto candidate = config_file.parent_path() / root;
    if (fs::exists(candidate) || !fs::exists(root)) root = candidate;
  }
  return fs::absolute(root).lexically_normal();
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const auto dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("iter_", 0) != 0) continue;
    if (!fs::exists(e.path() / "manifest.json")) continue;
    if (!best || name > best->filename().string()) best = e.path();
  }
  return best;
}

torch::Tensor generation_grid(GeneratorSet& nets, const std::vector<int64_t>& children,
                              int64_t columns, uint64_t seed, bool decompose, bool shared_z) {
  const auto& hp = nets.hp;
  check_children(children, hp);
  if (children.empty() || columns < 1) throw ValidationError("empty generation grid");
  torch::NoGradGuard guard;
  nets.train(false);
  auto gen = make_generator(seed);
  auto z = torch::randn({shared_z ? 1 : columns, hp.d_z}, gen);
  if (shared_z) z = z.expand({columns, hp.d_z}).contiguous();
  std::vector<torch::Tensor> rows;
  for (auto k : children) {
    auto child = torch::full({columns}, k - 1, torch::kLong);
    auto out = generation_path(make_priors(hp, child, parent_of(child, hp), z), nets);
    rows.push_back(out.quad.image);
    if (decompose) {
      rows.push_back(out.quad.fg);
      rows.push_back(out.quad.mask);
      rows.push_back(out.quad.bg);
    }
  }
  return make_grid(rows);
}

int cmd_train(const TrainArgs& args, std::ostream& log) {
  auto config = effective_config(args);
  const fs::path run = args.out;
  fs::create_directories(run / "checkpoints");
  fs::create_directories(run / "samples");
  save_config(config, run / "config.cfg");

  auto data = load_dataset(config.train.data_root, config.hp.image_size);
  log << "data: " << data.objects.size(0) << " objects, " << data.backgrounds.size(0)
      << " backgrounds from " << config.train.data_root << '\n';
  Trainer trainer(config, data.objects, data.backgrounds);

  const auto metrics_file = run / "metrics.log";
  if (args.resume) {
    if (auto ckpt = latest_checkpoint(run)) {
      trainer.load_checkpoint(*ckpt);
      truncate_log(metrics_file, trainer.iteration());
      log << "resumed from " << ckpt->string() << " at iteration " << trainer.iteration() << '\n';
    } else {
      log << "no checkpoint under " << (run / "checkpoints").string() << ", starting fresh\n";
    }
  } else if (latest_checkpoint(run)) {
    throw UsageError("run directory already holds checkpoints; pass --resume or a new --out");
  } else {
    std::ofstream(metrics_file, std::ios::trunc);
  }

  std::ofstream metrics(metrics_file, std::ios::app);
  const auto& hp = config.hp;
  const auto& tr = config.train;
  const int64_t console_every = std::max<int64_t>(tr.log_every, hp.total_iters / 200);
  const auto started = std::chrono::steady_clock::now();
  const int64_t first = trainer.iteration();
  int64_t steps = 0;

  auto checkpoint = [&] {
    const auto dir = run / "checkpoints" / iteration_dir(trainer.iteration());
    trainer.save_checkpoint(dir);
    log << "checkpoint " << dir.string() << " (phase " << trainer.state().phase << ")\n";
  };

  while (trainer.iteration() < hp.total_iters) {
    if (args.max_steps && steps >= *args.max_steps) break;
    const int phase = trainer.state().phase;
    auto reports = trainer.train_iteration();
    ++steps;
    const int64_t done = trainer.iteration();
    if (tr.log_every > 0 && (done - 1) % tr.log_every == 0) {
      for (const auto& r : reports) metrics << r.to_line() << '\n';
      metrics.flush();
    }
    if (done % console_every == 0 || done == hp.total_iters) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      log << "iter " << done << '/' << hp.total_iters << " phase " << phase;
      for (const auto& r : reports) {
        log << ' ' << to_string(r.tag);
        char sep = ':';
        for (const char* key : {"L_GEN", "L_D"}) {
          if (auto it = r.values.find(key); it != r.values.end()) {
            log << sep << key << '=' << std::setprecision(4) << it->second;
            sep = ',';
          }
        }
      }
      log << " (" << std::setprecision(3) << (done - first) / std::max(secs, 1e-9) << " it/s)\n";
    }
    if (tr.sample_every > 0 && done % tr.sample_every == 0) {
      auto grid = generation_grid(trainer.nets(), sample_children(hp, 6), 8, tr.seed, true, false);
      write_png(grid, run / "samples" / (iteration_dir(done) + ".png"));
      trainer.nets().train(true);
    }
    if (tr.checkpoint_every > 0 && done % tr.checkpoint_every == 0) checkpoint();
  }
  if (!fs::exists(run / "checkpoints" / iteration_dir(trainer.iteration()))) checkpoint();
  return 0;
}

int cmd_generate(const GenerateArgs& args, std::ostream& log) {
  CheckpointInfo info;
  auto nets = load_generator_set(args.checkpoint, &info);
  auto children = args.children;
  if (children.empty()) {
    for (int64_t k = 1; k <= info.config.hp.n_child; ++k) children.push_back(k);
  }
  auto grid = generation_grid(*nets, children, args.columns, args.seed, args.decompose, args.shared_z);
  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  write_png(grid, args.out);
  log << "wrote " << args.out.string() << " (" << children.size() << " classes x " << args.columns
      << " samples)\n";
  return 0;
}

int cmd_infer(const InferArgs& args, std::ostream& log) {
  if (!kTasks.count(args.task)) throw UsageError("unknown inference task: " + args.task);
  if (args.task == "translate" && args.target_children.empty()) {
    throw UsageError("translate needs --target-child");
  }
  if (args.task != "translate" && !args.target_children.empty()) {
    throw UsageError("--target-child applies only to translate");
  }
  if (args.task != "cluster" && args.k) throw UsageError("--k applies only to cluster");

  CheckpointInfo info;
  auto nets = load_generator_set(args.checkpoint, &info);
  const auto& config = info.config;
  const auto& hp = config.hp;
  check_children(args.target_children, hp);
  const auto files = collect_images(args.inputs);
  const auto images = to_model_range(load_images(files, hp.image_size));
  const auto n = images.size(0);

  torch::NoGradGuard guard;
  nets->train(false);
  AutoencodeOptions options;
  options.bypass = config.mixup.bypass;
  auto autoencode = [&](const MixupCoeffs& mix, std::optional<int64_t> override_child) {
    auto gen = make_generator(args.seed);
    options.class_override = override_child;
    return autoencode_path(images, *nets, mix, gen, options);
  };

  if (args.task == "cluster") {
    const int64_t k = args.k.value_or(hp.n_child);
    auto labels = cluster_codes(images, *nets, k, args.seed);
    if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
    std::ofstream out(args.out);
    for (int64_t i = 0; i < n; ++i) out << files[static_cast<std::size_t>(i)].string() << '\t' << labels[static_cast<std::size_t>(i)] << '\n';
    log << "wrote " << n << " cluster labels (k=" << k << ") to " << args.out.string() << '\n';
    return 0;
  }

  if (args.task == "segment" || args.task == "remove") {
    fs::create_directories(args.out);
    auto result = autoencode(inference_mixup(config.mixup, n), std::nullopt);
    for (int64_t i = 0; i < n; ++i) {
      const auto stem = files[static_cast<std::size_t>(i)].stem().string();
      if (args.task == "segment") {
        write_png((result.quad.mask[i] >= 0.5).to(torch::kUInt8), args.out / (stem + "_mask.png"));
      } else {
        write_png(result.quad.bg[i], args.out / (stem + "_bg.png"));
      }
    }
    log << "wrote " << n << " " << (args.task == "segment" ? "masks" : "backgrounds") << " to "
        << args.out.string() << '\n';
    return 0;
  }

  if (args.out.has_parent_path()) fs::create_directories(args.out.parent_path());
  if (args.task == "reconstruct") {
    auto r = autoencode(inference_mixup(config.mixup, n), std::nullopt);
    write_png(make_grid({images, r.quad.image, r.quad.fg, r.quad.mask, r.quad.bg}), args.out);
  } else {
    // Translation feeds the target's LUT code (beta0 = 0) while the full
    // bypass (beta1 = 1) carries shape and pose from the input.
    std::vector<torch::Tensor> rows{images};
    for (auto k : args.target_children) {
      rows.push_back(autoencode(MixupCoeffs::constant(n, 0.0, 1.0), k).quad.image);
    }
    write_png(make_grid(rows), args.out);
  }
  log << "wrote " << args.out.string() << '\n';
  return 0;
}

std::vector<MetricReport> evaluate(GeneratorSet& nets, const Config& config, const fs::path& data,
                                   const std::vector<std::string>& metrics, uint64_t seed,
                                   int64_t per_class, int64_t iteration, std::ostream& log) {
  for (const auto& m : metrics) {
    if (!kMetrics.count(m)) throw UsageError("unknown metric: " + m);
  }
  const auto& hp = config.hp;
  auto ds = load_dataset(data, hp.image_size);
  const auto digest = config_digest(config);
  auto wants = [&](const char* m) { return std::find(metrics.begin(), metrics.end(), m) != metrics.end(); };
  std::vector<MetricReport> out;
  auto report = [&](const std::string& name, double value, int64_t count) {
    out.push_back(MetricReport{name, value, count, digest, iteration});
    log << name << " = " << value << " (n=" << count << ")\n";
  };

  if (wants("iou") || wants("dice")) {
    if (!ds.eval_masks.defined()) {
      log << "skipped iou/dice: evaluation set has no ground-truth masks\n";
    } else {
      auto s = segmentation_eval(nets, ds.eval_images, ds.eval_masks, config.mixup, seed);
      if (wants("iou")) report("iou", s.iou, s.count);
      if (wants("dice")) report("dice", s.dice, s.count);
    }
  }
  if (wants("nmi") || wants("ami")) {
    if (!ds.eval_child.defined()) {
      log << "skipped nmi/ami: evaluation set has no class labels\n";
    } else if (ds.eval_images.size(0) < hp.n_child) {
      log << "skipped nmi/ami: fewer evaluation images than child classes\n";
    } else {
      auto labels = cluster_codes(ds.eval_images, nets, hp.n_child, seed);
      std::vector<int64_t> truth(ds.eval_child.data_ptr<int64_t>(),
                                 ds.eval_child.data_ptr<int64_t>() + ds.eval_child.numel());
      const auto count = static_cast<int64_t>(truth.size());
      if (wants("nmi")) report("nmi", nmi(labels, truth), count);
      if (wants("ami")) report("ami", ami(labels, truth), count);
    }
  }
  if (wants("cis")) {
    if (!ds.oracle_images.defined() || ds.oracle_images.size(0) == 0) {
      log << "skipped cis: dataset has no oracle split\n";
    } else {
      OracleOptions opt;
      opt.seed = seed;
      auto oracle = train_oracle_classifier(ds.oracle_images, ds.oracle_child, hp.n_child, opt);
      log << "oracle holdout accuracy " << oracle.holdout_accuracy << '\n';
      if (!oracle.certified) {
        log << "skipped cis: oracle below the certification floor\n";
      } else {
        report("cis", conditional_is_protocol(nets, oracle, per_class, seed), hp.n_child * per_class);
      }
    }
  }
  return out;
}

int cmd_eval(const EvalArgs& args, std::ostream& log) {
  for (const auto& m : args.metrics) {
    if (!kMetrics.count(m)) throw UsageError("unknown metric: " + m);
  }
  CheckpointInfo info;
  auto nets = load_generator_set(args.checkpoint, &info);
  auto config = info.config;
  if (args.ablation != "none") {
    if (config.train.ablation != args.ablation) {
      log << "warning: checkpoint trained with ablation '" << config.train.ablation
          << "', evaluating as '" << args.ablation << "'\n";
    }
    apply_ablation(config, args.ablation);
  }
  const fs::path data = args.data.empty() ? fs::path(config.train.data_root) : args.data;
  auto reports = evaluate(*nets, config, data, args.metrics, args.seed, args.per_class,
                          info.iteration, log);
  const fs::path out = args.out.empty() ? args.checkpoint.parent_path().parent_path() / "results.txt"
                                        : args.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  append_results(reports, out);
  log << "appended " << reports.size() << " records to " << out.string() << '\n';
  return 0;
}

int cmd_synth(const SynthArgs& args, std::ostream& log) {
  SyntheticSceneSpec spec;
  spec.n_parent = args.n_parent;
  spec.colors_per_shape = args.colors_per_shape;
  spec.image_size = args.image_size;
  spec.validate();
  // Independent streams per split so eval and oracle scenes never repeat training scenes.
  auto train = generate_synthetic(spec, args.count, args.backgrounds, args.seed * 3 + 1);
  auto eval = generate_synthetic(spec, args.eval_count, 0, args.seed * 3 + 2);
  auto oracle = generate_synthetic(spec, args.oracle_count, 0, args.seed * 3 + 3);
  write_synthetic(train, eval, oracle, args.out);
  log << "wrote " << args.count << " objects, " << args.backgrounds << " backgrounds, "
      << args.eval_count << " eval and " << args.oracle_count << " oracle scenes ("
      << spec.n_child() << " child classes) to " << args.out.string() << '\n';
  return 0;
}

int cmd_ingest(const IngestArgs& args, std::ostream& log) {
  auto split = ingest_real(args.dataset, args.boxes, args.out, args.image_size, args.seed);
  log << "ingested " << split.objects.size() << " object images and " << split.backgrounds.size()
      << " background patches from " << split.background_sources.size() << " donor images into "
      << args.out.string() << '\n';
  return 0;
}

} // namespace onegan::cli
