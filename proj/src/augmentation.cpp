#include "dapinn/augmentation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "dapinn/rng.hpp"

namespace dapinn::aug {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

Scheme Scheme::with_default_mask(int spatial_dim, bool time_dependent) const {
  Scheme out = *this;
  out.mask.assign(std::size_t(spatial_dim) + (time_dependent ? 1 : 0), 1);
  if (time_dependent) out.mask.back() = 0;
  return out;
}

Scheme identity() { return Scheme{}; }

Scheme replica() {
  Scheme s;
  s.kind = Kind::Replica;
  return s;
}

Scheme power(int order) {
  if (order < 2 || order > 3) throw ConfigError("power order must be 2 or 3");
  Scheme s;
  s.kind = Kind::Power;
  s.order = order;
  return s;
}

Scheme fourier(double period, int harmonics) {
  if (period <= 0.0) throw ConfigError("fourier period must be > 0");
  if (harmonics < 1) throw ConfigError("fourier harmonics must be >= 1");
  Scheme s;
  s.kind = Kind::Fourier;
  s.period = period;
  s.harmonics = harmonics;
  return s;
}

Scheme scheme_from_string(std::string_view text) {
  if (text == "identity") return identity();
  if (text == "replica") return replica();
  if (text == "power2") return power(2);
  if (text == "power3") return power(3);
  if (text.starts_with("fourier:")) {
    std::string_view rest = text.substr(8);
    double period = 0.0;
    int harmonics = 1;
    bool saw_period = false;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      std::string_view item = rest.substr(0, comma);
      rest = comma == std::string_view::npos ? std::string_view{}
                                             : rest.substr(comma + 1);
      if (item.starts_with("T=")) {
        const std::string value(item.substr(2));
        char* end = nullptr;
        period = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || *end != '\0')
          throw ConfigError("bad fourier period in scheme string: " + std::string(text));
        saw_period = true;
      } else if (item.starts_with("n=")) {
        const auto sv = item.substr(2);
        if (std::from_chars(sv.data(), sv.data() + sv.size(), harmonics).ec !=
            std::errc{})
          throw ConfigError("bad fourier harmonic count in scheme string: " +
                            std::string(text));
      } else {
        throw ConfigError("unknown fourier option in scheme string: " +
                          std::string(text));
      }
    }
    if (!saw_period)
      throw ConfigError("fourier scheme string needs T=<real>: " + std::string(text));
    return fourier(period, harmonics);
  }
  throw ConfigError("unknown augmentation scheme: " + std::string(text));
}

std::string scheme_to_string(const Scheme& scheme) {
  switch (scheme.kind) {
    case Kind::Identity: return "identity";
    case Kind::Replica: return "replica";
    case Kind::Power: return scheme.order == 2 ? "power2" : "power3";
    case Kind::Fourier: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "fourier:T=%.17g,n=%d", scheme.period,
                    scheme.harmonics);
      return buf;
    }
  }
  return "identity";
}

int images_per_coordinate(const Scheme& scheme) {
  switch (scheme.kind) {
    case Kind::Identity: return 1;
    case Kind::Replica: return 2;
    case Kind::Power: return scheme.order;
    case Kind::Fourier: return 1 + 2 * scheme.harmonics;
  }
  return 1;
}

int augmented_dim(const Scheme& scheme, int physical_dim) {
  if (!scheme.mask.empty() &&
      scheme.mask.size() != std::size_t(physical_dim))
    throw UsageError("scheme mask length does not match physical dimension");
  int total = 0;
  for (int k = 0; k < physical_dim; ++k)
    total += scheme.augments(k) ? images_per_coordinate(scheme) : 1;
  return total;
}

AugmentedPoint augment(const Scheme& scheme, std::span<const double> x) {
  if (scheme.kind == Kind::Fourier && scheme.period <= 0.0)
    throw ConfigError("fourier period must be > 0");
  const int d = static_cast<int>(x.size());
  const int m = augmented_dim(scheme, d);
  AugmentedPoint out;
  out.physical_dim = d;
  out.tau.reserve(std::size_t(m));
  out.jac_.assign(std::size_t(m) * d, 0.0);
  out.second_.assign(std::size_t(m) * d, 0.0);

  const auto emit = [&](double value, int coord, double d1, double d2) {
    const std::size_t row = out.tau.size();
    out.tau.push_back(value);
    out.jac_[row * d + coord] = d1;
    out.second_[row * d + coord] = d2;
  };

  for (int k = 0; k < d; ++k) {
    const double v = x[k];
    if (!scheme.augments(k)) {
      emit(v, k, 1.0, 0.0);
      continue;
    }
    switch (scheme.kind) {
      case Kind::Identity:
        emit(v, k, 1.0, 0.0);
        break;
      case Kind::Replica:
        emit(v, k, 1.0, 0.0);
        emit(v, k, 1.0, 0.0);
        break;
      case Kind::Power: {
        emit(v, k, 1.0, 0.0);
        double vpm2 = 1.0;  // v^(p-2)
        double vpm1 = v;    // v^(p-1)
        for (int p = 2; p <= scheme.order; ++p) {
          const double value = vpm1 * v;
          emit(value, k, double(p) * vpm1, double(p) * double(p - 1) * vpm2);
          vpm2 = vpm1;
          vpm1 = value;
        }
        break;
      }
      case Kind::Fourier: {
        emit(v, k, 1.0, 0.0);
        for (int h = 1; h <= scheme.harmonics; ++h) {
          const double w = kTwoPi * double(h) / scheme.period;
          const double s = std::sin(w * v), c = std::cos(w * v);
          emit(s, k, w * c, -w * w * s);
          emit(c, k, -w * s, -w * w * c);
        }
        break;
      }
    }
  }
  return out;
}

std::vector<ad::Var> seed_inputs(ad::Recording& rec, const AugmentedPoint& point) {
  const int n = rec.directions();
  if (n != point.physical_dim)
    throw UsageError("recording direction count does not match physical dimension");
  const int np = n * (n + 1) / 2;
  std::vector<double> first(static_cast<std::size_t>(n), 0.0);
  std::vector<double> second(static_cast<std::size_t>(np), 0.0);
  std::vector<ad::Var> taus;
  taus.reserve(point.tau.size());
  for (std::size_t i = 0; i < point.tau.size(); ++i) {
    for (int k = 0; k < n; ++k) first[std::size_t(k)] = point.jac(int(i), k);
    std::fill(second.begin(), second.end(), 0.0);
    for (int k = 0; k < n; ++k)
      second[std::size_t(ad::pair_index(k, k))] = point.second(int(i), k);
    taus.push_back(rec.input_seeded(point.tau[i], first, second));
  }
  return taus;
}

CompositeDerivatives composite_derivatives(const Scheme& scheme,
                                           const net::Architecture& arch,
                                           const net::ParameterSet& params,
                                           std::span<const double> x) {
  const int d = static_cast<int>(x.size());
  ad::Recording rec(d);
  const auto point = augment(scheme, x);
  const auto taus = seed_inputs(rec, point);
  std::vector<ad::Var> pvars;
  pvars.reserve(params.values.size());
  for (double v : params.values) pvars.push_back(rec.constant(v));
  const ad::Var u = net::forward(rec, arch, pvars, taus)[0];
  CompositeDerivatives out;
  out.u = u.value();
  out.du.resize(std::size_t(d));
  out.d2u.resize(std::size_t(d));
  for (int k = 0; k < d; ++k) {
    out.du[std::size_t(k)] = u.first(k);
    out.d2u[std::size_t(k)] = u.second(k, k);
  }
  return out;
}

// --- hand-expanded residual kernels -----------------------------------------

namespace {

// Network partials with respect to its own inputs at tau.
struct TauPartials {
  double value;
  std::vector<double> n1;   // dN/dtau_i
  std::vector<double> n2_;  // d2N/dtau_i dtau_j, dense
  int dim;

  double n2(int i, int j) const { return n2_[std::size_t(i) * dim + j]; }
};

TauPartials tau_partials(const net::Architecture& arch,
                         const net::ParameterSet& params,
                         std::span<const double> tau) {
  const int m = static_cast<int>(tau.size());
  ad::Recording rec(m);
  std::vector<ad::Var> inputs;
  inputs.reserve(std::size_t(m));
  for (int i = 0; i < m; ++i) inputs.push_back(rec.input(tau[std::size_t(i)], i));
  std::vector<ad::Var> pvars;
  pvars.reserve(params.values.size());
  for (double v : params.values) pvars.push_back(rec.constant(v));
  const ad::Var u = net::forward(rec, arch, pvars, inputs)[0];
  TauPartials out;
  out.dim = m;
  out.value = u.value();
  out.n1.resize(std::size_t(m));
  out.n2_.resize(std::size_t(m) * m);
  for (int i = 0; i < m; ++i) {
    out.n1[std::size_t(i)] = u.first(i);
    for (int j = 0; j < m; ++j) out.n2_[std::size_t(i) * m + j] = u.second(i, j);
  }
  return out;
}

double poisson1d_source(double x) {
  double f = 0.0;
  for (int i = 1; i <= 3; ++i) f += double(i) * std::sin(double(i) * x);
  return f + 7.0 * std::sin(7.0 * x) + 8.0 * std::sin(8.0 * x);
}

double diffusion_reaction_source(double x, double t) {
  return std::exp(-t) * (1.5 * std::sin(2.0 * x) + (8.0 / 3.0) * std::sin(3.0 * x) +
                         (15.0 / 4.0) * std::sin(4.0 * x) +
                         (63.0 / 8.0) * std::sin(8.0 * x));
}

struct Expansion {
  const char* id;
  Scheme scheme;
  int spatial_dim;
  bool time_dependent;
  double lo, hi;  // spatial sampling range
  // generic residual from composite derivatives at x
  double (*generic)(const CompositeDerivatives&, std::span<const double>);
  // verbatim printed expansion from tau partials at x
  double (*verbatim)(const TauPartials&, std::span<const double>,
                     const AugmentedPoint&);
};

double generic_uxx(const CompositeDerivatives& c, std::span<const double>) {
  return c.d2u[0];
}

double generic_laplacian2d(const CompositeDerivatives& c, std::span<const double>) {
  return c.d2u[0] + c.d2u[1];
}

double generic_uxx_poisson(const CompositeDerivatives& c, std::span<const double> x) {
  return c.d2u[0] + poisson1d_source(x[0]);
}

double generic_heat(const CompositeDerivatives& c, std::span<const double>) {
  return c.du[1] - 0.4 * c.d2u[0];
}

double generic_diffusion(const CompositeDerivatives& c, std::span<const double> x) {
  return c.du[1] - c.d2u[0] - diffusion_reaction_source(x[0], x[1]);
}

double verbatim_power2_1d(const TauPartials& N, std::span<const double>,
                          const AugmentedPoint& ap) {
  const double t1 = ap.tau[0], t2 = ap.tau[1];
  return N.n2(0, 0) + 4.0 * t1 * N.n2(0, 1) + 4.0 * t2 * N.n2(1, 1) + 2.0 * N.n1[1];
}

double verbatim_replica_1d(const TauPartials& N, std::span<const double>,
                           const AugmentedPoint&) {
  return N.n2(0, 0) + 2.0 * N.n2(0, 1) + N.n2(1, 1);
}

double verbatim_power2_1d_source(const TauPartials& N, std::span<const double> x,
                                 const AugmentedPoint&) {
  const double xv = x[0];
  return N.n2(0, 0) + 4.0 * xv * N.n2(0, 1) + 4.0 * xv * xv * N.n2(1, 1) +
         2.0 * N.n1[1] + poisson1d_source(xv);
}

double verbatim_replica_2d(const TauPartials& N, std::span<const double>,
                           const AugmentedPoint&) {
  return N.n2(0, 0) + 2.0 * N.n2(0, 1) + N.n2(1, 1) + N.n2(2, 2) +
         2.0 * N.n2(2, 3) + N.n2(3, 3);
}

double verbatim_power2_2d(const TauPartials& N, std::span<const double>,
                          const AugmentedPoint& ap) {
  const double t1 = ap.tau[0], t2 = ap.tau[1], t3 = ap.tau[2], t4 = ap.tau[3];
  return N.n2(0, 0) + 4.0 * t1 * N.n2(0, 1) + 4.0 * t2 * N.n2(1, 1) +
         2.0 * N.n1[1] + N.n2(2, 2) + 4.0 * t3 * N.n2(2, 3) +
         4.0 * t4 * N.n2(3, 3) + 2.0 * N.n1[3];
}

double verbatim_power3_heat(const TauPartials& N, std::span<const double>,
                            const AugmentedPoint& ap) {
  const double t1 = ap.tau[0], t2 = ap.tau[1], t3 = ap.tau[2];
  const double lap = N.n2(0, 0) + 4.0 * t2 * N.n2(1, 1) +
                     9.0 * t2 * t2 * N.n2(2, 2) + 4.0 * t1 * N.n2(0, 1) +
                     6.0 * t2 * N.n2(0, 2) + 12.0 * t3 * N.n2(1, 2) +
                     2.0 * N.n1[1] + 6.0 * t1 * N.n1[2];
  return N.n1[3] - 0.4 * lap;
}

double verbatim_fourier_diffusion(const TauPartials& N, std::span<const double> x,
                                  const AugmentedPoint& ap) {
  const double t2 = ap.tau[1], t3 = ap.tau[2];
  const double lap = N.n2(0, 0) + t3 * t3 * N.n2(1, 1) + t2 * t2 * N.n2(2, 2) +
                     2.0 * t3 * N.n2(0, 1) - 2.0 * t2 * N.n2(0, 2) -
                     2.0 * t2 * t3 * N.n2(1, 2) - t2 * N.n1[1] - t3 * N.n1[2];
  return N.n1[3] - lap - diffusion_reaction_source(x[0], x[1]);
}

const Expansion kExpansions[] = {
    {"power2-1d", power(2), 1, false, 0.0, 3.141592653589793, generic_uxx,
     verbatim_power2_1d},
    {"replica-1d", replica(), 1, false, 0.0, 3.141592653589793, generic_uxx,
     verbatim_replica_1d},
    {"power2-1d-source", power(2), 1, false, 0.0, 3.141592653589793,
     generic_uxx_poisson, verbatim_power2_1d_source},
    {"replica-2d", replica(), 2, false, 0.0, 1.0, generic_laplacian2d,
     verbatim_replica_2d},
    {"power2-2d", power(2), 2, false, 0.0, 1.0, generic_laplacian2d,
     verbatim_power2_2d},
    {"power3-heat", power(3), 1, true, 0.0, 1.0, generic_heat,
     verbatim_power3_heat},
    {"fourier-diffusion", fourier(kTwoPi, 1), 1, true, -3.141592653589793,
     3.141592653589793, generic_diffusion, verbatim_fourier_diffusion},
};

}  // namespace

std::vector<std::string> expansion_ids() {
  std::vector<std::string> out;
  for (const auto& e : kExpansions) out.emplace_back(e.id);
  return out;
}

double expanded_residual_equivalence(std::string_view expansion_id, int pairs,
                                     std::uint64_t seed) {
  const Expansion* exp = nullptr;
  for (const auto& e : kExpansions)
    if (expansion_id == e.id) exp = &e;
  if (!exp)
    throw UsageError("unknown expansion id: " + std::string(expansion_id));

  const int phys = exp->spatial_dim + (exp->time_dependent ? 1 : 0);
  const Scheme scheme =
      exp->scheme.with_default_mask(exp->spatial_dim, exp->time_dependent);
  net::Architecture arch;
  arch.input = augmented_dim(scheme, phys);
  arch.hidden = {10, 10};
  arch.output = 1;

  Rng rng(derive_seed(seed, 0x3e5u));
  double worst = 0.0;
  std::vector<double> x(static_cast<std::size_t>(phys), 0.0);
  for (int p = 0; p < pairs; ++p) {
    const auto params = init_glorot(arch, rng.next_u64());
    for (int k = 0; k < exp->spatial_dim; ++k)
      x[std::size_t(k)] = rng.uniform(exp->lo, exp->hi);
    if (exp->time_dependent) x[std::size_t(phys - 1)] = rng.uniform01();

    const auto composite = composite_derivatives(scheme, arch, params, x);
    const double generic = exp->generic(composite, x);

    const auto point = augment(scheme, x);
    const auto partials = tau_partials(arch, params, point.tau);
    const double verbatim = exp->verbatim(partials, x, point);

    worst = std::max(worst, std::abs(generic - verbatim));
  }
  return worst;
}

}  // namespace dapinn::aug
