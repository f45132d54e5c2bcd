#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pvc/conditioning.hpp"
#include "pvc/ops.hpp"
#include "pvc/rng.hpp"

using namespace pvc;

TEST_CASE("relative timestamps") {
  CHECK(relative_timestamps(5) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(relative_timestamps(2) == std::vector<double>{0.0, 1.0});
  CHECK(relative_timestamps(1) == std::vector<double>{0.0});
  CHECK_THROWS_AS(relative_timestamps(0), std::invalid_argument);
  for (std::size_t t = 2; t <= 96; ++t) {
    const auto ts = relative_timestamps(t);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 1; i < t; ++i) {
      lo = std::min(lo, ts[i] - ts[i - 1]);
      hi = std::max(hi, ts[i] - ts[i - 1]);
    }
    CHECK(hi - lo < 1e-15);
    CHECK(ts.front() == 0.0);
    CHECK(ts.back() == 1.0);
  }
}

TEST_CASE("sinusoidal embedding") {
  const Tensor e0 = sinusoidal_embed({0.0});
  REQUIRE(e0.shape() == Shape{1, 256});
  for (std::size_t j = 0; j < 128; ++j) {
    CHECK(e0[j] == 0.0);
    CHECK(e0[128 + j] == 1.0);
  }
  const Tensor e1 = sinusoidal_embed({1.0}, 1.0);
  CHECK(std::abs(e1[0] - 0.8414709848078965) < 1e-15);
  CHECK(std::abs(e1[128] - 0.5403023058681398) < 1e-15);
  // Lowest frequency is 10000^-1 of the highest.
  CHECK(std::abs(e1[127] - std::sin(1e-4)) < 1e-15);

  const Tensor grid = sinusoidal_embed(relative_timestamps(201), 1.0);
  for (double v : grid.data()) CHECK(std::abs(v) <= 1.0);
  for (std::size_t a = 0; a < 201; ++a)
    for (std::size_t b = a + 1; b < 201; ++b) {
      double d = 0.0;
      for (std::size_t j = 0; j < 256; ++j) d += std::pow(grid[a * 256 + j] - grid[b * 256 + j], 2);
      CHECK(d > 0.0);
    }
  CHECK_THROWS_AS(sinusoidal_embed({1.5}), std::invalid_argument);
}

TEST_CASE("temporal embedding MLP") {
  Rng rng(2);
  TemporalEmbeddingParams p{Tensor::zeros({256, 4}), rng.gaussian_tensor({4, 3}, 1.0)};
  const Tensor tt = sinusoidal_embed({0.0, 0.3, 1.0});
  const Tensor te0 = temporal_embedding(tt, p);
  REQUIRE(te0.shape() == Shape{3, 3});
  for (double v : te0.data()) CHECK(v == 0.0);

  p.w1 = rng.gaussian_tensor({256, 4}, 0.1);
  const Tensor in = rng.gaussian_tensor({1, 256}, 1.0);
  const Tensor got = temporal_embedding(in, p);
  // Step-by-step composition.
  double expect[3] = {0, 0, 0};
  for (std::size_t h = 0; h < 4; ++h) {
    double a = 0.0;
    for (std::size_t i = 0; i < 256; ++i) a += in[i] * p.w1.at({i, h});
    const double s = a / (1.0 + std::exp(-a));
    for (std::size_t o = 0; o < 3; ++o) expect[o] += s * p.w2.at({h, o});
  }
  for (std::size_t o = 0; o < 3; ++o) CHECK(std::abs(got[o] - expect[o]) < 1e-14);
  CHECK_THROWS_AS(temporal_embedding(Tensor({1, 255}), p), std::invalid_argument);
}

TEST_CASE("AdaLN") {
  Rng rng(4);
  const std::size_t d = 6;
  AdaLnParams zero = make_ada_ln(d, d);
  const Tensor x = rng.gaussian_tensor({2, 3, d}, 1.0);
  const Tensor z = rng.gaussian_tensor({2, 3, d}, 1.0);
  const Tensor zeroed = ada_ln(x, z, zero);
  for (double v : zeroed.data()) CHECK(v == 0.0);

  AdaLnParams p{rng.gaussian_tensor({d, d}, 0.5), rng.gaussian_tensor({d, d}, 0.5), rng.gaussian_tensor({d, d}, 0.5),
                rng.gaussian_tensor({d, d}, 0.5)};
  const AffineCoeffs at_zero = affine_coeffs(Tensor({1, d}), p);
  for (double v : at_zero.gamma.data()) CHECK(v == 0.0);
  for (double v : at_zero.beta.data()) CHECK(v == 0.0);

  SUBCASE("constant input yields the shift term") {
    const Tensor flat({2, 3, d}, 0.7);
    const Tensor out = ada_ln(flat, z, p);
    CHECK(max_abs_diff(out, affine_coeffs(z, p).beta) == 0.0);
  }

  SUBCASE("composition oracle") {
    const Tensor out = ada_ln(x, z, p);
    for (std::size_t row = 0; row < 6; ++row) {
      double g[6] = {}, b[6] = {}, s3[6], s5[6];
      for (std::size_t h = 0; h < d; ++h) {
        double a3 = 0.0, a5 = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          a3 += z[row * d + i] * p.w3.at({i, h});
          a5 += z[row * d + i] * p.w5.at({i, h});
        }
        s3[h] = a3 * sigmoid(a3);
        s5[h] = a5 * sigmoid(a5);
      }
      for (std::size_t o = 0; o < d; ++o)
        for (std::size_t h = 0; h < d; ++h) {
          g[o] += s3[h] * p.w4.at({h, o});
          b[o] += s5[h] * p.w6.at({h, o});
        }
      double m = 0.0, v = 0.0;
      for (std::size_t i = 0; i < d; ++i) m += x[row * d + i];
      m /= d;
      for (std::size_t i = 0; i < d; ++i) v += (x[row * d + i] - m) * (x[row * d + i] - m);
      v /= d;
      for (std::size_t i = 0; i < d; ++i) {
        const double want = g[i] * (x[row * d + i] - m) / std::sqrt(v + kNormEps) + b[i];
        CHECK(std::abs(out[row * d + i] - want) < 1e-13);
      }
    }
  }

  SUBCASE("coefficients are per token and permutation equivariant") {
    const AffineCoeffs c = affine_coeffs(z, p);
    Tensor zr = z;  // swap token rows 0 and 4
    for (std::size_t i = 0; i < d; ++i) std::swap(zr[0 * d + i], zr[4 * d + i]);
    const AffineCoeffs cr = affine_coeffs(zr, p);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(cr.gamma[i] == c.gamma[4 * d + i]);
      CHECK(cr.beta[4 * d + i] == c.beta[i]);
      CHECK(cr.gamma[2 * d + i] == c.gamma[2 * d + i]);
    }
  }
  CHECK_THROWS_AS(ada_ln(x, Tensor({2, 3, d + 1}), p), std::invalid_argument);
}
