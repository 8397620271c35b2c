#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dapinn/network.hpp"

namespace dapinn::aug {

enum class Kind : std::uint8_t { Identity, Replica, Power, Fourier };

/// Input mapping family applied per physical coordinate. A coordinate whose
/// mask entry is false passes through unchanged; by default only spatial
/// coordinates are augmented (time is never expanded in the benchmarks).
struct Scheme {
  Kind kind = Kind::Identity;
  int order = 2;        // power: p in {2, 3}
  double period = 0.0;  // fourier: T > 0
  int harmonics = 1;    // fourier: n >= 1
  std::vector<std::uint8_t> mask;  // empty = augment every coordinate

  bool operator==(const Scheme&) const = default;

  bool augments(int coord) const {
    return mask.empty() || mask[std::size_t(coord)] != 0;
  }

  /// Copy with the default mask for a problem layout: spatial coordinates
  /// augmented, the trailing time coordinate left alone.
  Scheme with_default_mask(int spatial_dim, bool time_dependent) const;
};

Scheme identity();
Scheme replica();
Scheme power(int order);
Scheme fourier(double period, int harmonics = 1);

/// Parses "identity", "replica", "power2", "power3",
/// "fourier:T=<real>,n=<int>".
Scheme scheme_from_string(std::string_view text);
std::string scheme_to_string(const Scheme& scheme);

/// Number of images emitted for one augmented coordinate.
int images_per_coordinate(const Scheme& scheme);

/// Length of the tau vector for a physical point of dimension `physical_dim`.
int augmented_dim(const Scheme& scheme, int physical_dim);

/// Images tau of a physical point together with the analytic first and second
/// derivatives of every image with respect to every physical coordinate.
/// Cross-coordinate second derivatives are zero for every scheme.
struct AugmentedPoint {
  int physical_dim = 0;
  std::vector<double> tau;
  std::vector<double> jac_;     // row i: d tau_i / d x_k
  std::vector<double> second_;  // row i: d^2 tau_i / d x_k^2

  double jac(int i, int k) const { return jac_[std::size_t(i) * physical_dim + k]; }
  double second(int i, int k) const { return second_[std::size_t(i) * physical_dim + k]; }
};

AugmentedPoint augment(const Scheme& scheme, std::span<const double> x);

/// Lifts the images of `x` as seeded inputs of `rec` (one per tau entry), so
/// downstream arithmetic propagates derivatives with respect to the physical
/// coordinates directly.
std::vector<ad::Var> seed_inputs(ad::Recording& rec, const AugmentedPoint& point);

/// u together with du/dx_k and d^2u/dx_k^2 for every physical coordinate,
/// where u(x) = N(tau(x)).
struct CompositeDerivatives {
  double u = 0.0;
  std::vector<double> du;
  std::vector<double> d2u;
};

CompositeDerivatives composite_derivatives(const Scheme& scheme,
                                           const net::Architecture& arch,
                                           const net::ParameterSet& params,
                                           std::span<const double> x);

/// Known hand-expanded residual kernels, transcribed with their printed
/// coefficients: power2-1d, replica-1d, power2-1d-source, replica-2d,
/// power2-2d, power3-heat, fourier-diffusion.
std::vector<std::string> expansion_ids();

/// Max |generic chain-rule residual - verbatim expansion| over `pairs` random
/// (network, point) pairs. The generic side drives composite_derivatives; the
/// verbatim side evaluates the printed formula on the network's partial
/// derivatives with respect to tau.
double expanded_residual_equivalence(std::string_view expansion_id,
                                     int pairs = 500, std::uint64_t seed = 1);

}  // namespace dapinn::aug
