#include "dapinn/autodiff.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "dapinn/network.hpp"
#include "dapinn/rng.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using dapinn::ConfigError;
using dapinn::NumericError;
using dapinn::Rng;
using dapinn::UsageError;
namespace ad = dapinn::ad;

namespace {
constexpr double kPi = 3.141592653589793238462643383279;
}

TEST_CASE("lifted inputs carry basis seeds") {
  ad::Recording rec(2);
  const ad::Var a = rec.input(3.0, 0);
  CHECK(a.value() == 3.0);
  CHECK(a.first(0) == 1.0);
  CHECK(a.first(1) == 0.0);
  CHECK(a.second(0, 0) == 0.0);
  CHECK(a.second(0, 1) == 0.0);
  CHECK(a.second(1, 1) == 0.0);

  const ad::Var b = rec.input(0.0, 1);
  CHECK(b.value() == 0.0);
  CHECK(b.first(0) == 0.0);
  CHECK(b.first(1) == 1.0);

  CHECK_THROWS_AS(rec.input(1.0, 2), ConfigError);
}

TEST_CASE("elementary op values and derivative channels") {
  {
    ad::Recording rec(1);
    const ad::Var x = rec.input(3.0, 0);
    const ad::Var y = x * x;
    CHECK(y.value() == 9.0);
    CHECK(y.first(0) == 6.0);
    CHECK(y.second(0, 0) == 2.0);
  }
  {
    ad::Recording rec(1);
    const ad::Var y = ad::tanh(rec.input(0.0, 0));
    CHECK(y.value() == 0.0);
    CHECK(y.first(0) == 1.0);
    CHECK(y.second(0, 0) == 0.0);
  }
  {
    ad::Recording rec(1);
    const ad::Var y = ad::sin(rec.input(kPi / 2.0, 0));
    CHECK(y.value() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y.first(0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(y.second(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  }
}

TEST_CASE("unary ops match finite differences over 1000 random inputs") {
  struct UnaryCase {
    const char* name;
    std::function<ad::Var(ad::Var)> build;
    std::function<double(double)> plain;
  };
  const UnaryCase cases[] = {
      {"tanh", [](ad::Var v) { return ad::tanh(v); }, [](double x) { return std::tanh(x); }},
      {"sin", [](ad::Var v) { return ad::sin(v); }, [](double x) { return std::sin(x); }},
      {"cos", [](ad::Var v) { return ad::cos(v); }, [](double x) { return std::cos(x); }},
      {"exp", [](ad::Var v) { return ad::exp(v); }, [](double x) { return std::exp(x); }},
      {"pow2", [](ad::Var v) { return ad::pow_int(v, 2); }, [](double x) { return x * x; }},
      {"pow3", [](ad::Var v) { return ad::pow_int(v, 3); }, [](double x) { return x * x * x; }},
      {"pow4", [](ad::Var v) { return ad::pow_int(v, 4); }, [](double x) { return x * x * x * x; }},
      {"neg", [](ad::Var v) { return -v; }, [](double x) { return -x; }},
  };

  Rng rng(17);
  for (const auto& c : cases) {
    for (int trial = 0; trial < 1000; ++trial) {
      const double x = rng.uniform(-2.0, 2.0);
      ad::Recording rec(1);
      const ad::Var y = c.build(rec.input(x, 0));
      CHECK(oracles::close(y.value(), c.plain(x), 1e-14));
      const double fd1 = oracles::central_first(c.plain, x, 1e-5);
      const double fd2 = oracles::central_second(c.plain, x, 1e-4);
      if (!oracles::close(y.first(0), fd1, 1e-6))
        FAIL(c.name << " first derivative mismatch at x=" << x);
      if (!oracles::close(y.second(0, 0), fd2, 1e-4))
        FAIL(c.name << " second derivative mismatch at x=" << x);
    }
  }
}

TEST_CASE("binary ops match finite differences over 1000 random inputs") {
  struct BinaryCase {
    const char* name;
    std::function<ad::Var(ad::Var, ad::Var)> build;
    std::function<double(double, double)> plain;
  };
  const BinaryCase cases[] = {
      {"add", [](ad::Var a, ad::Var b) { return a + b; }, [](double a, double b) { return a + b; }},
      {"sub", [](ad::Var a, ad::Var b) { return a - b; }, [](double a, double b) { return a - b; }},
      {"mul", [](ad::Var a, ad::Var b) { return a * b; }, [](double a, double b) { return a * b; }},
      {"div", [](ad::Var a, ad::Var b) { return a / b; }, [](double a, double b) { return a / b; }},
  };

  Rng rng(29);
  for (const auto& c : cases) {
    const bool is_div = std::string_view(c.name) == "div";
    for (int trial = 0; trial < 1000; ++trial) {
      const double x = rng.uniform(-2.0, 2.0);
      double y = rng.uniform(-2.0, 2.0);
      if (is_div && std::abs(y) < 0.25) y += y < 0 ? -0.25 : 0.25;

      ad::Recording rec(2);
      const ad::Var z = c.build(rec.input(x, 0), rec.input(y, 1));
      const double h1 = 1e-5, h2 = 1e-4;
      const double fdx = oracles::central_first([&](double t) { return c.plain(t, y); }, x, h1);
      const double fdy = oracles::central_first([&](double t) { return c.plain(x, t); }, y, h1);
      const double fdxx = oracles::central_second([&](double t) { return c.plain(t, y); }, x, h2);
      const double fdyy = oracles::central_second([&](double t) { return c.plain(x, t); }, y, h2);
      const double fdxy = (c.plain(x + h2, y + h2) - c.plain(x + h2, y - h2) -
                           c.plain(x - h2, y + h2) + c.plain(x - h2, y - h2)) /
                          (4.0 * h2 * h2);
      CHECK(oracles::close(z.first(0), fdx, 1e-6));
      CHECK(oracles::close(z.first(1), fdy, 1e-6));
      CHECK(oracles::close(z.second(0, 0), fdxx, 1e-4));
      CHECK(oracles::close(z.second(1, 1), fdyy, 1e-4));
      CHECK(oracles::close(z.second(0, 1), fdxy, 1e-4));
    }
  }
}

TEST_CASE("second-derivative block stays symmetric through op chains") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    ad::Recording rec(3);
    ad::Var a = rec.input(rng.uniform(-1.5, 1.5), 0);
    ad::Var b = rec.input(rng.uniform(-1.5, 1.5), 1);
    ad::Var c = rec.input(rng.uniform(-1.5, 1.5), 2);
    ad::Var z = ad::tanh(a * b + c) * ad::sin(b) + ad::exp(c * 0.3) / (b * b + 2.0);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(z.second(i, j) == z.second(j, i));
  }
}

TEST_CASE("derivatives are linear in function combination") {
  Rng rng(37);
  for (int trial = 0; trial < 50; ++trial) {
    ad::Recording rec(1);
    const ad::Var x = rec.input(rng.uniform(-1.0, 1.0), 0);
    const ad::Var f = ad::sin(x) * x;
    const ad::Var g = ad::tanh(x * x);
    const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    const ad::Var combo = a * f + b * g;
    CHECK(combo.first(0) == a * f.first(0) + b * g.first(0));
    CHECK(combo.second(0, 0) == a * f.second(0, 0) + b * g.second(0, 0));
  }
}

TEST_CASE("constant-like scalars behave as constants") {
  ad::Recording rec(1);
  const ad::Var x = rec.input(0.7, 0);
  const ad::Var c = rec.constant(2.5);
  const ad::Var z = x * c + c;
  CHECK(z.value() == 0.7 * 2.5 + 2.5);
  CHECK(z.first(0) == 2.5);
  CHECK(z.second(0, 0) == 0.0);
}

TEST_CASE("parameter gradient of simple losses") {
  {
    ad::Recording rec(0);
    const ad::Var theta = rec.parameter(3.0);
    const auto grad = rec.parameter_gradient(theta * theta);
    REQUIRE(grad.size() == 1);
    CHECK(grad[0] == doctest::Approx(6.0).epsilon(1e-14));
  }
  {
    // loss = (d(theta*x^2)/dx at x=1)^2 = (2*theta)^2, d/dtheta = 8*theta
    ad::Recording rec(1);
    const ad::Var theta = rec.parameter(1.0);
    const ad::Var x = rec.input(1.0, 0);
    const ad::Var u = theta * (x * x);
    const ad::Var ux = rec.first_node(u, 0);
    const auto grad = rec.parameter_gradient(ux * ux);
    REQUIRE(grad.size() == 1);
    CHECK(grad[0] == doctest::Approx(8.0).epsilon(1e-14));
  }
}

namespace {

// loss = (u_xx)^2 for a 2-hidden-layer tanh network at one point.
double second_derivative_loss(const dapinn::net::Architecture& arch,
                              std::span<const double> values, double x) {
  ad::Recording rec(1);
  std::vector<ad::Var> params;
  params.reserve(values.size());
  for (double v : values) params.push_back(rec.parameter(v));
  const ad::Var input = rec.input(x, 0);
  const ad::Var u = dapinn::net::forward(rec, arch, params, {&input, 1})[0];
  const ad::Var uxx = rec.second_node(u, 0, 0);
  return (uxx * uxx).value();
}

}  // namespace

TEST_CASE("parameter gradient of a second-derivative loss matches finite differences") {
  const dapinn::net::Architecture arch{1, {6, 6}, 1};
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    auto params = dapinn::net::init_glorot(arch, 1000 + trial);
    const double x = rng.uniform(-1.0, 1.0);

    ad::Recording rec(1);
    std::vector<ad::Var> pvars;
    for (double v : params.values) pvars.push_back(rec.parameter(v));
    const ad::Var input = rec.input(x, 0);
    const ad::Var u = dapinn::net::forward(rec, arch, pvars, {&input, 1})[0];
    const ad::Var uxx = rec.second_node(u, 0, 0);
    const auto grad = rec.parameter_gradient(uxx * uxx);

    const double h = 1e-4;
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      auto perturbed = params.values;
      perturbed[i] += h;
      const double up = second_derivative_loss(arch, perturbed, x);
      perturbed[i] -= 2.0 * h;
      const double dn = second_derivative_loss(arch, perturbed, x);
      const double fd = (up - dn) / (2.0 * h);
      if (!oracles::close(grad[i], fd, 1e-5))
        FAIL("grad mismatch at parameter " << i << ": " << grad[i] << " vs " << fd);
    }
  }
}

namespace {

double mixed_ops_loss(std::span<const double> theta, double x) {
  ad::Recording rec(1);
  std::vector<ad::Var> t;
  for (double v : theta) t.push_back(rec.parameter(v));
  const ad::Var xv = rec.input(x, 0);
  const ad::Var r = ad::sin(t[0] * xv) * ad::cos(t[1] + xv) /
                    (ad::exp(t[2] * 0.5) + xv * xv) -
                    ad::pow_int(xv * t[1], 3) * 0.05;
  const ad::Var rxx = rec.second_node(r, 0, 0);
  const ad::Var rx = rec.first_node(r, 0);
  return (rxx * rxx + rx * r).value();
}

}  // namespace

TEST_CASE("every backward rule participates in a finite-difference cross-check") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> theta = {rng.uniform(0.3, 1.5), rng.uniform(-1.0, 1.0),
                                 rng.uniform(-0.5, 0.5)};
    const double x = rng.uniform(-1.2, 1.2);

    ad::Recording rec(1);
    std::vector<ad::Var> t;
    for (double v : theta) t.push_back(rec.parameter(v));
    const ad::Var xv = rec.input(x, 0);
    const ad::Var r = ad::sin(t[0] * xv) * ad::cos(t[1] + xv) /
                      (ad::exp(t[2] * 0.5) + xv * xv) -
                      ad::pow_int(xv * t[1], 3) * 0.05;
    const ad::Var rxx = rec.second_node(r, 0, 0);
    const ad::Var rx = rec.first_node(r, 0);
    const auto grad = rec.parameter_gradient(rxx * rxx + rx * r);

    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto p = theta;
      const double h = 1e-5;
      p[i] += h;
      const double up = mixed_ops_loss(p, x);
      p[i] -= 2.0 * h;
      const double dn = mixed_ops_loss(p, x);
      CHECK(oracles::close(grad[i], (up - dn) / (2.0 * h), 1e-5));
    }
  }
}

TEST_CASE("value-channel losses reduce to classic reverse mode") {
  const int H = 8;
  const dapinn::net::Architecture arch{1, {H}, 1};
  auto params = dapinn::net::init_glorot(arch, 7);
  const std::vector<double> xs = {-0.9, -0.3, 0.2, 0.8};
  const std::vector<double> ys = {0.1, -0.4, 0.3, 0.9};

  ad::Recording rec(1);
  std::vector<ad::Var> pvars;
  for (double v : params.values) pvars.push_back(rec.parameter(v));
  ad::Var loss = rec.constant(0.0);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const ad::Var x = rec.input(xs[s], 0);
    const ad::Var u = dapinn::net::forward(rec, arch, pvars, {&x, 1})[0];
    const ad::Var d = u - ys[s];
    loss = loss + 0.5 * (d * d);
  }
  const auto grad = rec.parameter_gradient(loss);
  const auto ref = oracles::backprop_1hidden(H, params.values, xs, ys);
  REQUIRE(grad.size() == ref.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double denom = std::max(std::abs(ref[i]), 1e-30);
    CHECK(std::abs(grad[i] - ref[i]) / denom <= 1e-12);
  }
}

TEST_CASE("recording replay is bit-identical and backward visits each node once") {
  Rng rng(53);
  ad::Recording rec(2);
  ad::Var a = rec.input(rng.uniform(-1.0, 1.0), 0);
  ad::Var b = rec.input(rng.uniform(-1.0, 1.0), 1);
  ad::Var p = rec.parameter(0.4);
  ad::Var z = ad::tanh(a * p) / (b * b + 1.5) + ad::sin(b) * ad::exp(a * 0.2);
  CHECK(rec.replay_matches());
  (void)rec.parameter_gradient(z);
  CHECK(rec.last_backward_visits() == std::size_t(z.idx) + 1);
}

TEST_CASE("error paths") {
  ad::Recording rec(1);
  ad::Recording other(1);
  const ad::Var x = rec.input(1.0, 0);
  const ad::Var y = other.input(2.0, 0);
  CHECK_THROWS_AS(x + y, UsageError);
  CHECK_THROWS_AS(other.parameter_gradient(x), UsageError);

  const ad::Var zero = rec.constant(0.0);
  CHECK_THROWS_WITH_AS(x / zero, doctest::Contains("div"), NumericError);

  CHECK_THROWS_AS(ad::pow_int(x, 5), UsageError);
  CHECK_THROWS_AS(ad::pow_int(x, -1), UsageError);

  // overflow inside exp is reported with the op name
  const ad::Var big = rec.constant(1e6);
  CHECK_THROWS_WITH_AS(ad::exp(big * big), doctest::Contains("exp"), NumericError);
}

TEST_CASE("reset clears nodes but keeps the recording usable") {
  ad::Recording rec(1);
  (void)rec.input(1.0, 0);
  (void)rec.parameter(2.0);
  CHECK(rec.node_count() == 2);
  CHECK(rec.parameter_count() == 1);
  rec.reset();
  CHECK(rec.node_count() == 0);
  CHECK(rec.parameter_count() == 0);
  const ad::Var x = rec.input(0.5, 0);
  CHECK((x * x).value() == 0.25);
}
