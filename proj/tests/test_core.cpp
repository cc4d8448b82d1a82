// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "testing.hpp"

#include <sstream>

#include "onegan/config.hpp"
#include "onegan/errors.hpp"
#include "onegan/priors.hpp"
#include "support.hpp"

using namespace onegan;

TEST_CASE("onehot places a single 1 at the 1-based index") {
  auto v = onehot(3, 5);
  CHECK(v.size(0) == 5);
  CHECK(v.sum().item<float>() == 1.0f);
  CHECK(v[2].item<float>() == 1.0f);
  CHECK_THROWS_AS(onehot(0, 5), ValidationError);
  CHECK_THROWS_AS(onehot(6, 5), ValidationError);
}

TEST_CASE("sampled priors are consistent one-hot bundles") {
  HyperParams hp;  // 200 children, 20 parents
  auto gen = make_generator(11);
  auto pb = sample_priors(hp, 64, gen);
  CHECK(pb.e_c.sizes() == torch::IntArrayRef{64, 200});
  CHECK(pb.e_p.sizes() == torch::IntArrayRef{64, 20});
  CHECK(pb.z.sizes() == torch::IntArrayRef{64, 100});
  CHECK(torch::equal(pb.e_bg, pb.e_p));
  CHECK(torch::all(pb.e_c.sum(1) == 1).item<bool>());
  CHECK(torch::all(pb.e_p.sum(1) == 1).item<bool>());
  CHECK(torch::all((pb.e_c == 0) | (pb.e_c == 1)).item<bool>());
  CHECK(torch::equal(pb.e_c.argmax(1), pb.child));
  CHECK(torch::equal(pb.e_p.argmax(1), pb.parent));
  CHECK(torch::equal(pb.parent, parent_of(pb.child, hp)));
}

TEST_CASE("hierarchy groups children into contiguous parent blocks") {
  HyperParams hp;
  CHECK(parent_of(0, hp) == 0);
  CHECK(parent_of(9, hp) == 0);
  CHECK(parent_of(10, hp) == 1);
  CHECK(parent_of(199, hp) == 19);
  hp.n_child = 12;
  hp.n_parent = 3;
  for (int64_t c = 0; c < 12; ++c) CHECK(parent_of(c, hp) == c / 4);
  CHECK_THROWS_AS(parent_of(12, hp), ValidationError);
}

TEST_CASE("priors are deterministic per seed and cover the class range") {
  HyperParams hp;
  hp.n_child = 12;
  hp.n_parent = 3;
  auto g1 = make_generator(5);
  auto g2 = make_generator(5);
  auto a = sample_priors(hp, 4000, g1);
  auto b = sample_priors(hp, 4000, g2);
  CHECK(torch::equal(a.child, b.child));
  CHECK(torch::equal(a.z, b.z));
  auto counts = torch::bincount(a.child, {}, 12);
  CHECK(counts.min().item<int64_t>() > 4000 / 12 * 0.75);
  CHECK(std::abs(a.z.mean().item<double>()) < 0.02);
  CHECK(std::abs(a.z.std().item<double>() - 1.0) < 0.02);

  auto g3 = make_generator(5);
  auto ind = sample_priors(hp, 4000, g3, true);
  CHECK_FALSE(torch::equal(ind.parent, parent_of(ind.child, hp)));
}

TEST_CASE("make_priors validates shapes") {
  auto hp = test::tiny_hp();
  auto child = torch::tensor({0, 5}, torch::kLong);
  auto parent = torch::tensor({0, 1}, torch::kLong);
  auto pb = make_priors(hp, child, parent, torch::zeros({2, hp.d_z}));
  CHECK(pb.size() == 2);
  CHECK_THROWS_AS(make_priors(hp, child, parent, torch::zeros({2, hp.d_z + 1})), ShapeError);
  CHECK_THROWS_AS(make_priors(hp, child, parent.slice(0, 0, 1), torch::zeros({2, hp.d_z})),
                  ShapeError);
}

TEST_CASE("hyperparameter validation") {
  HyperParams hp;
  CHECK_NOTHROW(hp.validate());
  hp.image_size = 96;
  CHECK_THROWS_AS(hp.validate(), ValidationError);
  hp.image_size = 64;
  CHECK_NOTHROW(hp.validate());
  hp.n_parent = hp.n_child;
  CHECK_THROWS_AS(hp.validate(), ValidationError);
  hp = HyperParams{};
  hp.phase1_iters = hp.total_iters;
  CHECK_THROWS_AS(hp.validate(), ValidationError);
}

TEST_CASE("channel widths scale and stay positive") {
  HyperParams hp;
  CHECK(hp.width(1024) == 1024);
  hp.channel_scale = 0.5;
  CHECK(hp.width(1024) == 512);
  CHECK(hp.width(3) == 2);
  hp.channel_scale = 1.0 / 1024;
  CHECK(hp.width(64) == 1);
  hp.image_size = 64;
  CHECK(hp.side(128) == 64);
  CHECK(hp.side(16) == 8);
}

TEST_CASE("config text round-trips and rejects unknown keys") {
  Config c;
  c.hp.n_child = 12;
  c.hp.n_parent = 3;
  c.hp.image_size = 64;
  c.hp.channel_scale = 0.5;
  c.train.seed = 42;
  c.train.gan_loss = GanLoss::hinge;
  c.mixup.beta1_lo = 0.25;
  c.train.data_root = "data/synth";
  auto text = format_config(c);
  auto back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(config_digest(back) == config_digest(c));
  CHECK(back.train.gan_loss == GanLoss::hinge);
  CHECK(back.train.data_root == "data/synth");

  CHECK_THROWS_AS(parse_config("[model]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[model]\nn_child = twelve\n"), ConfigError);
  auto partial = parse_config("[model]\nn_child = 12\nn_parent = 3\n");
  CHECK(partial.hp.n_child == 12);
  CHECK(partial.hp.d_z == 100);

  Config other = c;
  other.train.seed = 43;
  CHECK(config_digest(other) != config_digest(c));
}

TEST_CASE("config files load from disk") {
  auto dir = test::scratch_dir("config");
  Config c;
  c.hp.batch_size = 7;
  save_config(c, dir / "run.cfg");
  CHECK(load_config(dir / "run.cfg").hp.batch_size == 7);
  CHECK_THROWS_AS(load_config(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("ablation tags set their documented switches") {
  Config base;
  auto with = [&](const char* tag) {
    Config c = base;
    apply_ablation(c, tag);
    CHECK(c.train.ablation == tag);
    CHECK_NOTHROW(c.mixup.validate());
    return c;
  };
  auto c = with("no-mixup");
  CHECK(c.mixup.beta0_lo == 1.0);
  CHECK(c.mixup.beta1_lo == 1.0);
  c = with("full-mixup");
  CHECK(c.mixup.beta1_lo == 0.0);
  CHECK(c.mixup.beta1_hi == 1.0);
  CHECK_FALSE(with("no-bypass").mixup.bypass);
  CHECK(with("no-mask-reg").weights.w_mask == 0.0);
  CHECK_FALSE(with("phase-I-only").train.phase2_enabled);
  c = with("no-multi-phase");
  CHECK(c.hp.phase1_iters == 0);
  CHECK(c.hp.real_recon_delay == 0);
  CHECK_FALSE(with("no-real-recon").train.real_recon_enabled);
  with("none");
  CHECK_FALSE(is_known_ablation("no-everything"));
  CHECK_THROWS_AS(apply_ablation(base, "no-everything"), ValidationError);
}
