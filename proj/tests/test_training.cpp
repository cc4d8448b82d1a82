// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "testing.hpp"

#include "onegan/errors.hpp"
#include "onegan/training.hpp"
#include "support.hpp"

using namespace onegan;
using onegan::test::tiny_config;

namespace {

torch::Tensor random_images(int64_t n, int64_t side, uint64_t seed) {
  auto gen = make_generator(seed);
  return torch::randint(0, 256, {n, 3, side, side}, gen, torch::kUInt8);
}

std::vector<torch::Tensor> snapshot(const std::vector<torch::Tensor>& params) {
  std::vector<torch::Tensor> out;
  for (const auto& p : params) out.push_back(p.detach().clone());
  return out;
}

bool equal_all(const std::vector<torch::Tensor>& a, const std::vector<torch::Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!torch::equal(a[i], b[i])) return false;
  }
  return true;
}

std::vector<torch::Tensor> values(const std::vector<std::pair<std::string, torch::Tensor>>& named) {
  std::vector<torch::Tensor> out;
  for (const auto& [n, t] : named) out.push_back(t.detach().clone());
  return out;
}

struct TinyRun {
  Config config = tiny_config();
  torch::Tensor objects = random_images(6, 64, 1);
  torch::Tensor backgrounds = random_images(4, 64, 2);
};

}  // namespace

TEST_SUITE("schedule") {

TEST_CASE("phase schedule at the default iteration counts") {
  HyperParams hp;
  auto s0 = phase_schedule(0, hp);
  CHECK(s0.phase == 1);
  CHECK_FALSE(s0.fake_recon_active);
  CHECK_FALSE(s0.real_recon_active);
  CHECK_FALSE(s0.generators_frozen);

  auto s1 = phase_schedule(200000, hp);
  CHECK(s1.phase == 2);
  CHECK(s1.fake_recon_active);
  CHECK_FALSE(s1.real_recon_active);
  CHECK(s1.generators_frozen);

  CHECK(phase_schedule(199999, hp).phase == 1);
  CHECK(phase_schedule(204999, hp).generators_frozen);
  CHECK_FALSE(phase_schedule(205000, hp).generators_frozen);
  CHECK_FALSE(phase_schedule(399999, hp).real_recon_active);
  auto s2 = phase_schedule(400000, hp);
  CHECK(s2.real_recon_active);
  CHECK(s2.fake_recon_active);
  CHECK_THROWS_AS(phase_schedule(-1, hp), ValidationError);
}

TEST_CASE("phase schedule is monotone and respects its invariants") {
  HyperParams hp;
  hp.phase1_iters = 50;
  hp.real_recon_delay = 30;
  hp.encoder_warmup_iters = 10;
  PhaseState prev = phase_schedule(0, hp);
  for (int64_t it = 1; it < 200; ++it) {
    auto s = phase_schedule(it, hp);
    CHECK(s.phase >= prev.phase);
    CHECK((!prev.fake_recon_active || s.fake_recon_active));
    CHECK((!prev.real_recon_active || s.real_recon_active));
    if (s.phase == 1) CHECK_FALSE((s.fake_recon_active || s.real_recon_active));
    if (s.real_recon_active) CHECK(s.fake_recon_active);
    CHECK(s.generators_frozen == (it >= 50 && it < 60));
    prev = s;
  }
  auto off = phase_schedule(1000, hp, false, true);
  CHECK(off.phase == 1);
  auto no_real = phase_schedule(1000, hp, true, false);
  CHECK(no_real.fake_recon_active);
  CHECK_FALSE(no_real.real_recon_active);
}

TEST_CASE("discriminator bank clones once with identical parameters") {
  auto hp = onegan::test::tiny_hp();
  DiscriminatorBank bank(hp);
  CHECK(bank.image_count() == 1);
  CHECK(bank.background_count() == 1);
  CHECK_THROWS_AS(bank.image(PathTag::fake_recon), StateError);
  bank.clone();
  CHECK(bank.image_count() == 3);
  CHECK(bank.background_count() == 3);
  for (auto tag : {PathTag::fake_recon, PathTag::real_recon}) {
    CHECK(equal_all(snapshot(bank.image(PathTag::generation)->parameters()),
                    snapshot(bank.image(tag)->parameters())));
    CHECK(equal_all(snapshot(bank.background(PathTag::generation)->parameters()),
                    snapshot(bank.background(tag)->parameters())));
    // Distinct storage, not aliases.
    CHECK(bank.image(tag)->parameters()[0].data_ptr() !=
          bank.image(PathTag::generation)->parameters()[0].data_ptr());
  }
  CHECK_THROWS_AS(bank.clone(), StateError);
}

TEST_CASE("optimizers use lr 2e-4 with empty state and one per clone") {
  HyperParams defaults;
  CHECK(defaults.lr == doctest::Approx(2e-4));
  auto hp = onegan::test::tiny_hp();
  GeneratorSet nets(hp);
  DiscriminatorBank bank(hp);
  auto opt = make_optimizers(nets, bank, hp);
  CHECK(opt.all().size() == 4);
  for (const auto& [name, o] : opt.all()) {
    for (const auto& group : o->param_groups()) {
      const auto& o2 = static_cast<const torch::optim::AdamOptions&>(group.options());
      CHECK(o2.lr() == doctest::Approx(hp.lr));
      CHECK(std::get<0>(o2.betas()) == doctest::Approx(0.9));
      CHECK(std::get<1>(o2.betas()) == doctest::Approx(0.999));
    }
    CHECK(o->state().empty());
  }
  bank.clone();
  add_clone_optimizers(opt, bank, hp);
  CHECK(opt.all().size() == 8);
  CHECK(opt.d_image.at(PathTag::fake_recon).get() != opt.d_image.at(PathTag::generation).get());
}

TEST_CASE("phase I step touches only the generation pair") {
  TinyRun run;
  run.config.hp.phase1_iters = 5;
  Trainer trainer(run.config, run.objects, run.backgrounds);
  auto reports = trainer.train_iteration();
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].tag == PathTag::generation);
  CHECK(trainer.bank().image_count() == 1);
  const auto& flow = trainer.last_gradient_flow();
  CHECK(flow.size() == 1);
  CHECK(flow.at(PathTag::generation) == std::set<std::string>{"d_bg.generation", "d_c.generation"});
  for (const char* key : {"L_E", "L_MSE", "L_REG_v", "L_G", "L_M", "L_GEN", "L_D"}) {
    CHECK(reports[0].values.count(key) == 1);
  }
  CHECK(reports[0].values.count("L_REC") == 0);
  CHECK(reports[0].values.count("L_VAE") == 0);
}

TEST_CASE("phase II step runs three paths with isolated discriminator clones") {
  TinyRun run;
  run.config.hp.phase1_iters = 0;
  run.config.hp.real_recon_delay = 0;
  run.config.hp.encoder_warmup_iters = 0;
  Trainer trainer(run.config, run.objects, run.backgrounds);
  auto reports = trainer.train_iteration();
  REQUIRE(reports.size() == 3);
  CHECK(reports[0].tag == PathTag::generation);
  CHECK(reports[1].tag == PathTag::fake_recon);
  CHECK(reports[2].tag == PathTag::real_recon);
  CHECK(reports[0].values.count("L_AE") == 0);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    const auto& v = reports[i].values;
    CHECK(v.at("L_AE") == doctest::Approx(v.at("L_GEN") + v.at("L_VAE") + v.at("L_REC") + v.at("L_PER")).epsilon(1e-5));
  }
  CHECK(reports[2].values.at("L_E") == 0.0);
  CHECK(reports[2].values.at("L_MSE") == 0.0);
  const auto& flow = trainer.last_gradient_flow();
  for (auto tag : {PathTag::generation, PathTag::fake_recon, PathTag::real_recon}) {
    const std::string name(to_string(tag));
    CHECK(flow.at(tag) == std::set<std::string>{"d_bg." + name, "d_c." + name});
  }
  // After one divergent update, clones differ.
  CHECK_FALSE(equal_all(snapshot(trainer.bank().image(PathTag::generation)->parameters()),
                        snapshot(trainer.bank().image(PathTag::fake_recon)->parameters())));
}

TEST_CASE("generators stay fixed during the encoder warmup") {
  TinyRun run;
  run.config.hp.phase1_iters = 1;
  run.config.hp.encoder_warmup_iters = 3;
  run.config.hp.real_recon_delay = 1;
  Trainer trainer(run.config, run.objects, run.backgrounds);
  trainer.train_iteration();  // phase I
  REQUIRE(trainer.state().generators_frozen);
  auto gen_before = snapshot(trainer.nets().generator_parameters());
  auto enc_before = snapshot(trainer.nets().encoder_parameters());
  trainer.train_iteration();
  CHECK(equal_all(gen_before, snapshot(trainer.nets().generator_parameters())));
  CHECK_FALSE(equal_all(enc_before, snapshot(trainer.nets().encoder_parameters())));
  while (trainer.state().generators_frozen) trainer.train_iteration();
  trainer.train_iteration();
  CHECK_FALSE(equal_all(gen_before, snapshot(trainer.nets().generator_parameters())));
}

TEST_CASE("two iterations are bitwise reproducible under a fixed seed") {
  TinyRun run;
  run.config.hp.phase1_iters = 1;
  run.config.hp.encoder_warmup_iters = 0;
  run.config.hp.real_recon_delay = 0;
  auto train_two = [&] {
    Trainer trainer(run.config, run.objects, run.backgrounds);
    std::vector<std::string> lines;
    for (int i = 0; i < 2; ++i) {
      for (const auto& r : trainer.train_iteration()) lines.push_back(r.to_line());
    }
    return std::make_pair(values(trainer.named_state()), lines);
  };
  auto [a, la] = train_two();
  auto [b, lb] = train_two();
  CHECK(la == lb);
  CHECK(equal_all(a, b));
}

}  // TEST_SUITE

TEST_CASE("training step requires a background batch") {
  TinyRun run;
  Trainer trainer(run.config, torch::Tensor(), torch::Tensor());
  auto objects = to_model_range(run.objects.slice(0, 0, 2));
  CHECK_THROWS_AS(trainer.training_step(objects, torch::Tensor()), ConfigError);
  CHECK_THROWS_AS(trainer.train_iteration(), ConfigError);
}

TEST_CASE("resume from a checkpoint reproduces the next step bitwise") {
  TinyRun run;
  run.config.hp.phase1_iters = 1;
  run.config.hp.encoder_warmup_iters = 1;
  run.config.hp.real_recon_delay = 1;
  const auto dir = onegan::test::scratch_dir("resume") / "ckpt";

  Trainer straight(run.config, run.objects, run.backgrounds);
  straight.train_iteration();
  straight.train_iteration();
  straight.save_checkpoint(dir);
  std::vector<std::string> expected;
  for (const auto& r : straight.train_iteration()) expected.push_back(r.to_line());

  Trainer resumed(run.config, run.objects, run.backgrounds);
  resumed.load_checkpoint(dir);
  CHECK(resumed.iteration() == 2);
  CHECK(resumed.bank().cloned());
  std::vector<std::string> got;
  for (const auto& r : resumed.train_iteration()) got.push_back(r.to_line());
  CHECK(got == expected);
  CHECK(equal_all(values(straight.named_state()), values(resumed.named_state())));

  auto info = read_checkpoint_info(dir);
  CHECK(info.iteration == 2);
  CHECK(info.state.phase == 2);
  CHECK(info.bank_cloned);
  CHECK(format_config(info.config) == format_config(run.config));
}

TEST_CASE("checkpoint loading rejects mismatched shapes") {
  TinyRun run;
  const auto dir = onegan::test::scratch_dir("shape_mismatch") / "ckpt";
  Trainer trainer(run.config, run.objects, run.backgrounds);
  trainer.save_checkpoint(dir);
  auto other = run.config;
  other.hp.d_z = 9;
  Trainer wrong(other, run.objects, run.backgrounds);
  CHECK_THROWS_AS(wrong.load_checkpoint(dir), ConfigError);
  auto nets = load_generator_set(dir);
  CHECK(nets->hp.d_z == run.config.hp.d_z);
}
