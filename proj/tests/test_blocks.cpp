// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "testing.hpp"

#include "onegan/blocks.hpp"
#include "onegan/errors.hpp"
#include "onegan/priors.hpp"

using namespace onegan;

TEST_SUITE("invariants") {

TEST_CASE("GLUNorm halves the channel count") {
  torch::manual_seed(1);
  for (int64_t c : {1, 2, 3, 8, 17, 64}) {
    for (int64_t side : {1, 4, 7}) {
      GLUNorm glu(c);
      auto y = glu->forward(torch::randn({2, 2 * c, side, side}));
      CHECK(y.sizes() == torch::IntArrayRef{2, c, side, side});
    }
  }
  GLUNorm glu(3);
  CHECK_THROWS_AS(glu->forward(torch::randn({1, 5, 4, 4})), ShapeError);
  CHECK_THROWS_AS(glu->forward(torch::randn({1, 8, 4, 4})), ShapeError);
}

TEST_CASE("GLUNorm normalizes only the gated half") {
  torch::manual_seed(2);
  auto hp_in = torch::randn({3, 8, 5, 5}, torch::kDouble) * 3 + 2;
  GLUNorm glu(4);
  glu->to(torch::kDouble);
  auto out = glu->forward(hp_in);
  auto xl = hp_in.slice(1, 0, 4);
  auto xr = hp_in.slice(1, 4, 8);
  auto mean = xl.mean({1, 2, 3}, true);
  auto var = xl.var({1, 2, 3}, false, true);
  auto expected = torch::sigmoid(xr) * (xl - mean) / torch::sqrt(var + 1e-5);
  CHECK((out - expected).abs().max().item<double>() < 1e-6);
}

TEST_CASE("LayerNorm2d output has zero mean and unit variance per instance") {
  torch::manual_seed(3);
  LayerNorm2d ln(6);
  ln->to(torch::kDouble);
  auto x = torch::randn({4, 6, 8, 8}, torch::kDouble) * 5 - 7;
  auto y = ln->forward(x);
  auto m = y.mean({1, 2, 3});
  auto v = y.var({1, 2, 3}, false);
  CHECK(m.abs().max().item<double>() < 1e-6);
  CHECK((v - 1).abs().max().item<double>() < 1e-4);  // eps 1e-5 shrinks the variance slightly

  // Affine parameters apply per channel.
  {
    torch::NoGradGuard g;
    ln->weight.fill_(2.0);
    ln->bias.fill_(0.5);
  }
  auto y2 = ln->forward(x);
  CHECK((y2 - (2 * y + 0.5)).abs().max().item<double>() < 1e-6);
  CHECK_THROWS_AS(ln->forward(torch::randn({1, 5, 4, 4}, torch::kDouble)), ShapeError);
}

} // TEST_SUITE

TEST_CASE("UPBlk doubles the resolution and checks its target side") {
  UpBlock up(8, 4, 16);
  auto y = up->forward(torch::randn({2, 8, 8, 8}));
  CHECK(y.sizes() == torch::IntArrayRef{2, 4, 16, 16});
  CHECK_THROWS_AS(up->forward(torch::randn({2, 8, 4, 4})), ShapeError);
  CHECK_THROWS_AS(up->forward(torch::randn({2, 7, 8, 8})), ShapeError);
  UpBlock keep(8, 8, 16, false);
  CHECK(keep->forward(torch::randn({1, 8, 16, 16})).sizes() == torch::IntArrayRef{1, 8, 16, 16});
}

TEST_CASE("DOWNBlk halves the resolution") {
  DownBlock down(3, 5);
  CHECK(down->forward(torch::randn({2, 3, 8, 8})).sizes() == torch::IntArrayRef{2, 5, 4, 4});
  CHECK_THROWS_AS(down->forward(torch::randn({2, 3, 7, 7})), ShapeError);
  CHECK_THROWS_AS(down->forward(torch::randn({2, 4, 8, 8})), ShapeError);
}

TEST_CASE("RESBlk consumes a conditioning vector") {
  ResBlock res(64, 32, 16);
  auto y = res->forward(torch::randn({1, 64, 8, 8}), torch::randn({1, 32}));
  CHECK(y.sizes() == torch::IntArrayRef{1, 16, 8, 8});
  CHECK_THROWS_AS(res->forward(torch::randn({1, 64, 8, 8}), torch::randn({1, 31})), ShapeError);
  // Conditioning changes the output.
  torch::NoGradGuard g;
  auto x = torch::randn({1, 64, 8, 8});
  auto a = res->forward(x, torch::zeros({1, 32}));
  auto b = res->forward(x, torch::ones({1, 32}));
  CHECK_FALSE(torch::allclose(a, b));
}

TEST_CASE("RESBlk0 is residual around a two-stage core") {
  ResBlock0 r(4);
  {
    torch::NoGradGuard g;
    for (auto& p : r->parameters()) p.zero_();
  }
  // Zero convolutions give GLUNorm(0) = sigmoid(0) * LN(0) = 0, so the
  // block reduces to the identity.
  auto x = torch::randn({2, 4, 6, 6});
  CHECK(torch::allclose(r->forward(x), x));
}

TEST_CASE("blocks produce finite outputs") {
  torch::manual_seed(4);
  auto x = torch::randn({2, 8, 8, 8}) * 100;
  CHECK(torch::isfinite(GLUNorm(4)->forward(x)).all().item<bool>());
  CHECK(torch::isfinite(UpBlock(8, 4, 16)->forward(x)).all().item<bool>());
  CHECK(torch::isfinite(DownBlock(8, 4)->forward(x)).all().item<bool>());
  CHECK(torch::isfinite(ResBlock0(8)->forward(x)).all().item<bool>());
  CHECK(torch::isfinite(ResBlock(8, 3, 2)->forward(x, torch::randn({2, 3}))).all().item<bool>());
}
