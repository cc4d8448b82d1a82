// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "commands.hpp"
#include "onegan/config.hpp"
#include "onegan/errors.hpp"

namespace {

namespace cli = onegan::cli;

void check_ablation(const std::string& tag) {
  if (!onegan::is_known_ablation(tag)) throw onegan::UsageError("unknown ablation: " + tag);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical foreground/background image generation and segmentation"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Intra-op threads (0 = library default)");

  cli::TrainArgs train;
  uint64_t train_seed = 0;
  int64_t max_steps = 0;
  auto* t = app.add_subcommand("train", "Train a model from a config file");
  t->add_option("--config", train.config, "Config file")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_flag("--resume", train.resume, "Continue from the latest checkpoint in --out");
  auto* seed_opt = t->add_option("--seed", train_seed, "Override the config seed");
  t->add_option("--ablation", train.ablation, "Ablation tag")->default_val("none");
  t->add_option("--max-steps", max_steps, "Stop after this many iterations");

  cli::GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Sample a grid of generated images");
  g->add_option("--checkpoint", gen.checkpoint, "Checkpoint directory")->required();
  g->add_option("--out", gen.out, "Output PNG")->required();
  g->add_option("--child", gen.children, "Child classes, 1-based (default: all)");
  g->add_option("--columns", gen.columns, "Samples per class")->default_val(8);
  g->add_option("--seed", gen.seed, "Sampling seed")->default_val(0);
  g->add_flag("--decompose", gen.decompose, "Add foreground, mask and background rows");
  g->add_flag("--shared-z", gen.shared_z, "One pose code for every column");

  cli::InferArgs inf;
  int64_t k = 0;
  auto* i = app.add_subcommand("infer", "Run a trained model on images");
  i->add_option("task", inf.task, "segment, reconstruct, remove, translate or cluster")
      ->required()
      ->check(CLI::IsMember({"segment", "reconstruct", "remove", "translate", "cluster"}));
  i->add_option("inputs", inf.inputs, "Image files or directories")->required();
  i->add_option("--checkpoint", inf.checkpoint, "Checkpoint directory")->required();
  i->add_option("--out", inf.out, "Output file or directory")->required();
  i->add_option("--seed", inf.seed, "Sampling seed")->default_val(0);
  i->add_option("--target-child", inf.target_children, "Target child classes, 1-based");
  auto* k_opt = i->add_option("--k", k, "Cluster count (default: number of child classes)");

  cli::EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint directory")->required();
  e->add_option("--data", ev.data, "Dataset root (default: the training data)");
  e->add_option("--metrics", ev.metrics, "iou dice nmi ami cis")->delimiter(',');
  e->add_option("--ablation", ev.ablation, "Ablation tag")->default_val("none");
  e->add_option("--out", ev.out, "Results file (default: <run>/results.txt)");
  e->add_option("--seed", ev.seed, "Evaluation seed")->default_val(0);
  e->add_option("--per-class", ev.per_class, "Generated images per class for cis")->default_val(50);

  cli::SynthArgs syn;
  auto* s = app.add_subcommand("synth", "Write a synthetic dataset with ground truth");
  s->add_option("--out", syn.out, "Dataset root")->required();
  s->add_option("--parents", syn.n_parent, "Shape families")->default_val(3);
  s->add_option("--colors", syn.colors_per_shape, "Colors per shape")->default_val(4);
  s->add_option("--size", syn.image_size, "Image side")->default_val(64);
  s->add_option("--count", syn.count, "Training scenes")->default_val(2000);
  s->add_option("--backgrounds", syn.backgrounds, "Background textures")->default_val(500);
  s->add_option("--eval", syn.eval_count, "Held-out scenes with masks")->default_val(200);
  s->add_option("--oracle", syn.oracle_count, "Labeled scenes for the oracle")->default_val(1200);
  s->add_option("--seed", syn.seed, "Seed")->default_val(0);

  cli::IngestArgs ing;
  auto* n = app.add_subcommand("ingest", "Convert a bounding-box image collection");
  n->add_option("--dataset", ing.dataset, "Image directory")->required()->check(CLI::ExistingDirectory);
  n->add_option("--boxes", ing.boxes, "Box file")->required()->check(CLI::ExistingFile);
  n->add_option("--out", ing.out, "Dataset root")->required();
  n->add_option("--size", ing.image_size, "Image side")->default_val(128);
  n->add_option("--seed", ing.seed, "Split seed")->default_val(0);

  CLI11_PARSE(app, argc, argv);

  try {
    if (threads > 0) torch::set_num_threads(threads);
    if (t->parsed()) {
      check_ablation(train.ablation);
      if (*seed_opt) train.seed = train_seed;
      if (max_steps > 0) train.max_steps = max_steps;
      return cli::cmd_train(train, std::cout);
    }
    if (g->parsed()) return cli::cmd_generate(gen, std::cout);
    if (i->parsed()) {
      if (*k_opt) inf.k = k;
      return cli::cmd_infer(inf, std::cout);
    }
    if (e->parsed()) {
      check_ablation(ev.ablation);
      return cli::cmd_eval(ev, std::cout);
    }
    if (s->parsed()) return cli::cmd_synth(syn, std::cout);
    if (n->parsed()) return cli::cmd_ingest(ing, std::cout);
  } catch (const onegan::UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
