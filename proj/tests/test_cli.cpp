// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "commands.hpp"
#include "onegan/errors.hpp"
#include "onegan/training.hpp"
#include "support.hpp"
#include "testing.hpp"

namespace fs = std::filesystem;
using namespace onegan;

namespace {

const char* kTinyConfig = R"([model]
n_child = 12
n_parent = 3
d_z = 8
d_c = 4
d_p = 4
d_bg = 4
image_size = 64
channel_scale = 0.0625

[train]
batch_size = 2
total_iters = 6
phase1_iters = 2
real_recon_delay = 2
encoder_warmup_iters = 1
checkpoint_every = 3
sample_every = 3
log_every = 1
seed = 5

[data]
root = synth
)";

// Synthetic data plus a config next to it; built once per process.
const fs::path& workspace() {
  static const fs::path dir = [] {
    auto d = test::scratch_dir("cli");
    cli::SynthArgs s;
    s.out = d / "synth";
    s.count = 24;
    s.backgrounds = 12;
    s.eval_count = 16;
    s.oracle_count = 0;
    s.seed = 2;
    std::ostringstream log;
    cli::cmd_synth(s, log);
    std::ofstream(d / "tiny.cfg") << kTinyConfig;
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

cv::Size png_size(const fs::path& p) { return cv::imread(p.string(), cv::IMREAD_UNCHANGED).size(); }

cli::TrainArgs train_args(const fs::path& out) {
  cli::TrainArgs a;
  a.config = workspace() / "tiny.cfg";
  a.out = out;
  return a;
}

// Trains the reference run once.
const fs::path& reference_run() {
  static const fs::path run = [] {
    auto out = workspace() / "run_ref";
    std::ostringstream log;
    cli::cmd_train(train_args(out), log);
    return out;
  }();
  return run;
}

}  // namespace

TEST_CASE("cli train writes config, log, samples and checkpoints") {
  const auto& run = reference_run();
  CHECK(fs::exists(run / "config.cfg"));
  CHECK(fs::exists(run / "samples" / "iter_0000003.png"));
  CHECK(fs::exists(run / "checkpoints" / "iter_0000003" / "manifest.json"));
  auto latest = cli::latest_checkpoint(run);
  REQUIRE(latest);
  CHECK(latest->filename() == "iter_0000006");
  // Relative data roots resolve against the config file's directory.
  auto echoed = load_config(run / "config.cfg");
  CHECK(fs::path(echoed.train.data_root) == fs::absolute(workspace() / "synth").lexically_normal());

  std::ifstream log(run / "metrics.log");
  std::string line;
  int64_t lines = 0, last = -1;
  while (std::getline(log, line)) {
    auto r = LossReport::from_line(line);
    CHECK(r.iteration >= last);
    last = r.iteration;
    ++lines;
  }
  // 3 generation-only iterations, 2 with fake_recon, 2 with real_recon (6 total).
  CHECK(lines == 1 + 1 + 2 + 2 + 3 + 3);
  CHECK(last == 5);
}

TEST_CASE("cli train refuses to overwrite a run without --resume") {
  CHECK_THROWS_AS(cli::cmd_train(train_args(reference_run()), std::clog), UsageError);
}

TEST_CASE("cli resume reproduces the uninterrupted run") {
  auto out = workspace() / "run_resumed";
  fs::remove_all(out);
  auto args = train_args(out);
  args.max_steps = 4;
  std::ostringstream log;
  cli::cmd_train(args, log);
  // Drop the later checkpoint so resuming starts mid-way and must truncate the log.
  REQUIRE(fs::exists(out / "checkpoints" / "iter_0000004"));
  args.max_steps.reset();
  args.resume = true;
  cli::cmd_train(args, log);
  CHECK(log.str().find("resumed from") != std::string::npos);

  CHECK(slurp(out / "metrics.log") == slurp(reference_run() / "metrics.log"));
  const auto a = reference_run() / "checkpoints" / "iter_0000006";
  const auto b = out / "checkpoints" / "iter_0000006";
  int64_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a / "modules")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / rel), rel.string());
    ++files;
  }
  CHECK(files > 0);
}

TEST_CASE("cli generate is deterministic and validates classes") {
  const auto ckpt = reference_run() / "checkpoints" / "iter_0000006";
  cli::GenerateArgs g;
  g.checkpoint = ckpt;
  g.children = {1, 7};
  g.columns = 3;
  g.seed = 11;
  g.decompose = true;
  g.out = workspace() / "gen_a.png";
  std::ostringstream log;
  cli::cmd_generate(g, log);
  g.out = workspace() / "gen_b.png";
  cli::cmd_generate(g, log);
  CHECK(slurp(workspace() / "gen_a.png") == slurp(workspace() / "gen_b.png"));

  auto size = png_size(workspace() / "gen_a.png");
  // 2 classes x 4 rows of 64 px plus 2 px padding on every edge.
  CHECK(size.height == 8 * 64 + 9 * 2);
  CHECK(size.width == 3 * 64 + 4 * 2);

  g.children = {13};
  CHECK_THROWS_AS(cli::cmd_generate(g, log), ValidationError);
  g.children = {0};
  CHECK_THROWS_AS(cli::cmd_generate(g, log), ValidationError);
}

TEST_CASE("cli generate with shared z repeats the pose across classes") {
  auto nets = load_generator_set(reference_run() / "checkpoints" / "iter_0000006");
  auto grid = cli::generation_grid(*nets, {1, 2}, 4, 0, false, true);
  // One z for every column, so tiles within a row are identical.
  auto tile = [&](int64_t r, int64_t c) {
    return grid.slice(1, 2 + r * 66, 2 + r * 66 + 64).slice(2, 2 + c * 66, 2 + c * 66 + 64);
  };
  CHECK(torch::equal(tile(0, 0), tile(0, 3)));
  CHECK(torch::equal(tile(1, 1), tile(1, 2)));
}

TEST_CASE("cli infer tasks") {
  const auto ckpt = reference_run() / "checkpoints" / "iter_0000006";
  const auto eval_dir = workspace() / "synth" / "eval";
  std::vector<fs::path> inputs{eval_dir / "img_00000.png", eval_dir / "img_00001.png",
                               eval_dir / "img_00002.png"};
  std::ostringstream log;
  cli::InferArgs a;
  a.checkpoint = ckpt;
  a.inputs = inputs;

  a.task = "segment";
  a.out = workspace() / "seg";
  cli::cmd_infer(a, log);
  auto mask = read_mask(a.out / "img_00001_mask.png", 64);
  CHECK(mask.size(0) == 1);
  CHECK(((mask == 0) | (mask == 1)).all().item<bool>());

  a.task = "remove";
  a.out = workspace() / "rm";
  cli::cmd_infer(a, log);
  CHECK(fs::exists(a.out / "img_00002_bg.png"));

  a.task = "reconstruct";
  a.out = workspace() / "rec.png";
  cli::cmd_infer(a, log);
  CHECK(png_size(a.out).height == 5 * 64 + 6 * 2);

  a.task = "translate";
  a.out = workspace() / "tr.png";
  CHECK_THROWS_AS(cli::cmd_infer(a, log), UsageError);
  a.target_children = {2, 9};
  cli::cmd_infer(a, log);
  CHECK(png_size(a.out).height == 3 * 64 + 4 * 2);
  a.target_children = {99};
  CHECK_THROWS_AS(cli::cmd_infer(a, log), ValidationError);
  a.target_children.clear();

  a.task = "cluster";
  a.k = 2;
  a.out = workspace() / "clusters.tsv";
  cli::cmd_infer(a, log);
  std::ifstream in(a.out);
  std::string path;
  int64_t label = -1, rows = 0;
  while (in >> path >> label) {
    CHECK((label == 0 || label == 1));
    ++rows;
  }
  CHECK(rows == 3);

  a.task = "denoise";
  CHECK_THROWS_AS(cli::cmd_infer(a, log), UsageError);
}

TEST_CASE("cli eval appends metric records") {
  const auto ckpt = reference_run() / "checkpoints" / "iter_0000006";
  cli::EvalArgs e;
  e.checkpoint = ckpt;
  e.metrics = {"iou", "dice", "nmi", "ami", "cis"};
  e.out = workspace() / "results.txt";
  fs::remove(e.out);
  std::ostringstream log;
  cli::cmd_eval(e, log);
  cli::cmd_eval(e, log);
  // 16 eval scenes with masks and labels; no oracle split, so cis is skipped.
  CHECK(log.str().find("skipped cis") != std::string::npos);
  std::ifstream in(e.out);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  REQUIRE(lines.size() == 8);
  CHECK(lines[0].rfind("metric=iou value=", 0) == 0);
  CHECK(lines[0].find("count=16") != std::string::npos);
  CHECK(lines[0].find("iter=6") != std::string::npos);
  CHECK(lines[0] == lines[4]);

  e.metrics = {"fid"};
  CHECK_THROWS_AS(cli::cmd_eval(e, log), UsageError);
}

TEST_CASE("cli executable reports errors with a nonzero status") {
  const std::string exe = ONEGAN_CLI_PATH;
  CHECK(std::system((exe + " --help > /dev/null").c_str()) == 0);
  CHECK(std::system((exe + " generate --checkpoint /nonexistent --out /dev/null 2> /dev/null").c_str()) != 0);
  CHECK(std::system((exe + " frobnicate 2> /dev/null").c_str()) != 0);
  CHECK(std::system((exe + " train --config " + (workspace() / "tiny.cfg").string() +
                     " --out /tmp/x --ablation bogus 2> /dev/null")
                        .c_str()) != 0);
}

TEST_CASE("shipped configs load and resolve their data roots") {
  const fs::path configs = fs::path(ONEGAN_SOURCE_DIR) / "configs";
  auto desk = load_config(configs / "desk.cfg");
  CHECK(desk.hp.n_child == 12);
  CHECK(desk.hp.n_parent == 3);
  CHECK(desk.hp.image_size == 64);
  CHECK(desk.hp.channel_scale == 0.5);
  CHECK(desk.hp.phase1_iters == 5000);
  CHECK(desk.hp.total_iters == 20000);
  CHECK(cli::resolve_data_root(desk, configs / "desk.cfg") == configs / "data" / "synth");
  auto birds = load_config(configs / "birds.cfg");
  CHECK(birds.hp.n_child == 200);
  CHECK(birds.hp.total_iters == 600000);
}
