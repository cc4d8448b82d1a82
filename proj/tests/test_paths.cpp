// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "testing.hpp"

#include <string>
#include <vector>

#include "onegan/errors.hpp"
#include "onegan/paths.hpp"
#include "support.hpp"

using namespace onegan;

namespace {

PriorBundle priors_for(const HyperParams& hp, std::vector<int64_t> child, const torch::Tensor& z) {
  auto c = torch::tensor(child, torch::kLong);
  return make_priors(hp, c, parent_of(c, hp), z);
}

}  // namespace

TEST_SUITE("invariants") {

TEST_CASE("compositing identity at fixed and random masks") {
  torch::manual_seed(5);
  auto fg = torch::rand({2, 3, 8, 8}, torch::kDouble) * 2 - 1;
  auto bg = torch::rand({2, 3, 8, 8}, torch::kDouble) * 2 - 1;
  auto ones = torch::ones({2, 1, 8, 8}, torch::kDouble);
  CHECK((composite(fg, bg, ones * 0) - bg).abs().max().item<double>() < 1e-6);
  CHECK((composite(fg, bg, ones) - fg).abs().max().item<double>() < 1e-6);
  CHECK((composite(fg, bg, ones * 0.5) - (fg + bg) / 2).abs().max().item<double>() < 1e-6);
  auto m = torch::rand({2, 1, 8, 8}, torch::kDouble);
  auto got = composite(fg, bg, m);
  // Elementwise oracle.
  auto acc = fg.accessor<double, 4>();
  auto bcc = bg.accessor<double, 4>();
  auto mcc = m.accessor<double, 4>();
  auto gcc = got.accessor<double, 4>();
  double worst = 0;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const double want = bcc[n][c][y][x] * (1 - mcc[n][0][y][x]) + acc[n][c][y][x] * mcc[n][0][y][x];
          worst = std::max(worst, std::abs(want - gcc[n][c][y][x]));
        }
  CHECK(worst < 1e-6);
  CHECK_THROWS_AS(composite(fg, bg, torch::rand({2, 3, 8, 8})), ShapeError);
  CHECK_THROWS_AS(composite(fg, bg.slice(2, 0, 4), ones), ShapeError);
}

TEST_CASE("dual mixup endpoints") {
  torch::manual_seed(6);
  auto vp_l = torch::randn({3, 4}, torch::kDouble), vc_l = torch::randn({3, 5}, torch::kDouble);
  auto vp_e = torch::randn({3, 4}, torch::kDouble), vc_e = torch::randn({3, 5}, torch::kDouble);
  auto a = torch::randn({3, 2, 4, 4}, torch::kDouble), b = torch::randn({3, 2, 4, 4}, torch::kDouble);
  auto near = [](const torch::Tensor& x, const torch::Tensor& y) {
    return (x - y).abs().max().item<double>() < 1e-6;
  };
  auto m0 = dual_mixup(vp_l, vc_l, vp_e, vc_e, a, b, MixupCoeffs::constant(3, 0, 0));
  CHECK(near(m0.v_p, vp_l));
  CHECK(near(m0.v_c, vc_l));
  CHECK(near(m0.pre_fg, a));
  auto m1 = dual_mixup(vp_l, vc_l, vp_e, vc_e, a, b, MixupCoeffs::constant(3, 1, 1));
  CHECK(near(m1.v_p, vp_e));
  CHECK(near(m1.v_c, vc_e));
  CHECK(near(m1.pre_fg, b));
  auto mh = dual_mixup(vp_l, vc_l, vp_e, vc_e, a, b, MixupCoeffs::constant(3, 0.5, 0.5));
  CHECK(near(mh.v_p, (vp_l + vp_e) / 2));
  CHECK(near(mh.v_c, (vc_l + vc_e) / 2));
  CHECK(near(mh.pre_fg, (a + b) / 2));
  // Per-instance coefficients.
  MixupCoeffs per{torch::tensor({0.0, 1.0, 0.5}), torch::tensor({1.0, 0.0, 0.5})};
  auto mp = dual_mixup(vp_l, vc_l, vp_e, vc_e, a, b, per);
  CHECK(near(mp.v_p[0], vp_l[0]));
  CHECK(near(mp.v_p[1], vp_e[1]));
  CHECK(near(mp.pre_fg[0], b[0]));
  CHECK(near(mp.pre_fg[1], a[1]));
  CHECK_THROWS_AS(dual_mixup(vp_l, vc_l, vp_e, vc_e, a, b, MixupCoeffs::constant(3, 1.5, 0)),
                  ValidationError);
  CHECK_THROWS_AS(dual_mixup(vp_l, vc_l, vp_e.slice(1, 0, 3), vc_e, a, b, per), ShapeError);
}

TEST_CASE("A_fg and A_bg do not depend on the child code") {
  auto hp = test::tiny_hp();
  hp.image_size = 64;
  torch::manual_seed(7);
  GeneratorSet nets(hp);
  torch::NoGradGuard guard;
  auto z = torch::randn({2, hp.d_z});
  // Children 0 and 1 share parent 0; 3 and 4 share parent 1.
  auto a = generation_path(priors_for(hp, {0, 3}, z), nets);
  auto b = generation_path(priors_for(hp, {1, 4}, z), nets);
  CHECK((a.pre_fg - b.pre_fg).abs().max().item<double>() < 1e-6);
  CHECK((a.pre_bg - b.pre_bg).abs().max().item<double>() < 1e-6);
  CHECK((a.quad.bg - b.quad.bg).abs().max().item<double>() < 1e-6);
  CHECK_FALSE(torch::allclose(a.quad.fg, b.quad.fg));
}

TEST_CASE("autoencoded background ignores the class override when the mask is unchanged") {
  auto hp = test::tiny_hp();
  torch::manual_seed(8);
  GeneratorSet nets(hp);
  nets.train(false);
  torch::NoGradGuard guard;
  auto image = torch::rand({2, 3, 64, 64}) * 2 - 1;
  // beta0 = 1 feeds only encoder codes to G_fg, so the override cannot reach the mask.
  auto mix = MixupCoeffs::constant(2, 1.0, 0.75);
  auto g1 = make_generator(1);
  auto g2 = make_generator(1);
  AutoencodeOptions o1, o2;
  o1.class_override = 1;
  o2.class_override = 5;
  auto a = autoencode_path(image, nets, mix, g1, o1);
  auto b = autoencode_path(image, nets, mix, g2, o2);
  CHECK(torch::equal(a.quad.mask, b.quad.mask));
  CHECK((a.quad.bg - b.quad.bg).abs().max().item<double>() < 1e-4);
  CHECK_FALSE(torch::equal(a.lut.v_c, b.lut.v_c));

  // With LUT codes mixed in the mask may move, but B_bg stays a function of
  // (I, I_m): recomputing from b's mask reproduces b's background.
  auto mix_lut = MixupCoeffs::constant(2, 0.0, 0.5);
  auto g3 = make_generator(2);
  auto c = autoencode_path(image, nets, mix_lut, g3, o1);
  auto bg = nets.g_bg->render(nets.e_bg->forward(image, c.quad.mask));
  CHECK((bg - c.quad.bg).abs().max().item<double>() < 1e-4);
}

} // TEST_SUITE

TEST_CASE("autoencoding executes its steps in order") {
  auto hp = test::tiny_hp();
  GeneratorSet nets(hp);
  torch::NoGradGuard guard;
  std::vector<std::string> steps;
  AutoencodeOptions o;
  o.observer = [&](std::string_view s) { steps.emplace_back(s); };
  auto gen = make_generator(3);
  auto out = autoencode_path(torch::zeros({2, 3, 64, 64}), nets, MixupCoeffs::constant(2, 0.5, 0.5),
                             gen, o);
  CHECK((steps == std::vector<std::string>{"encode_content", "encode_style", "generate_foreground",
                                           "encode_background", "generate_background", "composite"}));
  CHECK(out.quad.image.sizes() == torch::IntArrayRef{2, 3, 64, 64});
  CHECK(out.posterior.has_value());
  CHECK(out.posterior->bypass_bg.defined());
  CHECK_FALSE(out.pre_bg.defined());
}

TEST_CASE("bypass can be disabled") {
  auto hp = test::tiny_hp();
  GeneratorSet nets(hp);
  torch::NoGradGuard guard;
  AutoencodeOptions o;
  o.bypass = false;
  auto gen = make_generator(3);
  auto out = autoencode_path(torch::zeros({2, 3, 64, 64}), nets, MixupCoeffs::constant(2, 0.5, 0.5),
                             gen, o);
  CHECK(out.pre_bg.defined());
  CHECK(torch::equal(out.pre_fg_in, out.pre_fg));
  CHECK(torch::allclose(out.quad.bg, nets.g_bg->render(out.pre_bg)));
}

TEST_CASE("class override is validated and routed to the LUT") {
  auto hp = test::tiny_hp();
  GeneratorSet nets(hp);
  torch::NoGradGuard guard;
  auto gen = make_generator(3);
  AutoencodeOptions o;
  o.class_override = 4;
  auto mix = MixupCoeffs::constant(1, 0.5, 0.5);
  auto out = autoencode_path(torch::zeros({1, 3, 64, 64}), nets, mix, gen, o);
  CHECK(out.child_used[0].item<int64_t>() == 3);
  CHECK(torch::allclose(out.lut.v_c[0], nets.lut->v_c->weight.select(1, 3)));
  o.class_override = hp.n_child + 1;
  CHECK_THROWS_AS(autoencode_path(torch::zeros({1, 3, 64, 64}), nets, mix, gen, o), ValidationError);
  CHECK_THROWS_AS(autoencode_path(torch::zeros({2, 3, 64, 64}), nets, mix, gen), ShapeError);
}

TEST_CASE("reparameterization has the requested moments") {
  auto gen = make_generator(9);
  auto mu = torch::full({20000, 2}, 1.5);
  auto logsig = torch::full({20000, 2}, std::log(0.5));
  auto s = reparameterize(mu, logsig, gen);
  CHECK(s.mean().item<double>() == doctest::Approx(1.5).epsilon(0.01));
  CHECK(s.std().item<double>() == doctest::Approx(0.5).epsilon(0.02));
  CHECK_THROWS_AS(reparameterize(mu, logsig.slice(1, 0, 1), gen), ShapeError);
  // Gradient flows to mu and logsig, not to the noise.
  auto m = torch::zeros({3}, torch::requires_grad());
  auto l = torch::zeros({3}, torch::requires_grad());
  reparameterize(m, l, gen).sum().backward();
  CHECK(torch::allclose(m.grad(), torch::ones({3})));
}

TEST_CASE("sampled mixup coefficients stay in range") {
  MixupConfig cfg;
  auto gen = make_generator(4);
  auto mix = sample_mixup(cfg, 1000, gen);
  CHECK(mix.beta0.min().item<double>() >= 0.0);
  CHECK(mix.beta0.max().item<double>() <= 1.0);
  CHECK(mix.beta1.min().item<double>() >= 0.5);
  CHECK(mix.beta1.max().item<double>() <= 1.0);
  cfg.beta1_lo = 1.5;
  CHECK_THROWS_AS(sample_mixup(cfg, 4, gen), ValidationError);
}

TEST_CASE("argmax picks the lowest index on ties") {
  auto l = torch::tensor({{1.0, 3.0, 3.0}, {2.0, 2.0, 2.0}});
  auto a = argmax_lowest(l);
  CHECK(a[0].item<int64_t>() == 1);
  CHECK(a[1].item<int64_t>() == 0);
}
