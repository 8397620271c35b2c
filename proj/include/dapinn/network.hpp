#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dapinn/autodiff.hpp"

namespace dapinn::net {

/// Feedforward shape: input width, hidden widths, output width.
/// Hidden layers use tanh; the final layer is affine.
struct Architecture {
  int input = 1;
  std::vector<int> hidden;
  int output = 1;

  bool operator==(const Architecture&) const = default;

  /// All layer widths, input first.
  std::vector<int> layer_sizes() const;

  /// Throws ConfigError unless every width is >= 1 and at least one hidden
  /// layer is present (experiment configurations require one; forward and
  /// param_count also accept hidden-free affine networks).
  void validate() const;
};

/// Trainable weights and biases, flattened per layer as
/// [W1 row-major, b1, W2, b2, ...]. `seed` records how they were drawn.
struct ParameterSet {
  Architecture arch;
  std::vector<double> values;
  std::uint64_t seed = 0;
};

std::size_t param_count(const Architecture& arch);

/// Estimated FLOPs of one forward pass, with `alpha_bar` the mean cost of one
/// activation evaluation.
double flop_count(const Architecture& arch, double alpha_bar = 10.0);

/// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
/// Bit-identical results for identical (arch, seed).
ParameterSet init_glorot(const Architecture& arch, std::uint64_t seed);

/// Registers every entry of `params` as a parameter leaf, in flatten order.
std::vector<ad::Var> register_parameters(ad::Recording& rec,
                                         const ParameterSet& params);

/// Network outputs with all derivative channels propagated.
std::vector<ad::Var> forward(ad::Recording& rec, const Architecture& arch,
                             std::span<const ad::Var> params,
                             std::span<const ad::Var> inputs);

/// Plain double evaluation (no derivative channels); first output.
double eval(const Architecture& arch, std::span<const double> params,
            std::span<const double> inputs);

struct AdamState {
  std::size_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  explicit AdamState(std::size_t n_params, double lr = 1e-3)
      : m(n_params, 0.0), v(n_params, 0.0), learning_rate(lr) {}
};

/// One bias-corrected Adam update in place. Throws NumericError naming the
/// first offending index if the gradient has a non-finite entry.
void adam_step(AdamState& state, ParameterSet& params,
               std::span<const double> gradient);

/// Binary checkpoint ("DAPN1" magic, layer sizes, seed, flat f64 array,
/// little-endian).
void save_checkpoint(const std::string& path, const ParameterSet& params);
ParameterSet load_checkpoint(const std::string& path);

}  // namespace dapinn::net
