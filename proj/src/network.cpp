#include "dapinn/network.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dapinn/rng.hpp"

namespace dapinn::net {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

std::vector<int> Architecture::layer_sizes() const {
  std::vector<int> sizes;
  sizes.reserve(hidden.size() + 2);
  sizes.push_back(input);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

void Architecture::validate() const {
  if (input < 1 || output < 1) throw ConfigError("network widths must be >= 1");
  if (hidden.empty()) throw ConfigError("network needs at least one hidden layer");
  for (int w : hidden)
    if (w < 1) throw ConfigError("network widths must be >= 1");
}

std::size_t param_count(const Architecture& arch) {
  const auto sizes = arch.layer_sizes();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    total += std::size_t(sizes[l] + 1) * std::size_t(sizes[l + 1]);
  return total;
}

double flop_count(const Architecture& arch, double alpha_bar) {
  if (alpha_bar < 0.0) throw ConfigError("activation cost must be >= 0");
  const auto sizes = arch.layer_sizes();
  double mults = 0.0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
    mults += double(sizes[l]) * double(sizes[l + 1]);
  double activations = 0.0;
  for (int w : arch.hidden) activations += double(w);
  return 2.0 * mults + alpha_bar * activations;
}

ParameterSet init_glorot(const Architecture& arch, std::uint64_t seed) {
  ParameterSet out;
  out.arch = arch;
  out.seed = seed;
  out.values.reserve(param_count(arch));
  Rng rng(derive_seed(seed, /*salt=*/0x61u));
  const auto sizes = arch.layer_sizes();
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int fan_in = sizes[l], fan_out = sizes[l + 1];
    const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
    for (int i = 0; i < fan_out * fan_in; ++i)
      out.values.push_back(rng.uniform(-limit, limit));
    for (int i = 0; i < fan_out; ++i) out.values.push_back(0.0);
  }
  return out;
}

std::vector<ad::Var> register_parameters(ad::Recording& rec,
                                         const ParameterSet& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.values.size());
  for (double v : params.values) vars.push_back(rec.parameter(v));
  return vars;
}

std::vector<ad::Var> forward(ad::Recording& rec, const Architecture& arch,
                             std::span<const ad::Var> params,
                             std::span<const ad::Var> inputs) {
  if (static_cast<int>(inputs.size()) != arch.input)
    throw UsageError("forward: input length does not match architecture");
  if (params.size() != param_count(arch))
    throw UsageError("forward: parameter span length does not match architecture");

  const auto sizes = arch.layer_sizes();
  std::vector<ad::Var> z(inputs.begin(), inputs.end());
  std::vector<ad::Var> next;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int n_in = sizes[l], n_out = sizes[l + 1];
    const bool last = (l + 2 == sizes.size());
    next.clear();
    next.reserve(n_out);
    const std::size_t w_off = off;
    const std::size_t b_off = off + std::size_t(n_out) * n_in;
    for (int r = 0; r < n_out; ++r) {
      ad::Var acc = params[b_off + r];
      for (int cidx = 0; cidx < n_in; ++cidx)
        acc = acc + params[w_off + std::size_t(r) * n_in + cidx] * z[cidx];
      next.push_back(last ? acc : ad::tanh(acc));
    }
    z.swap(next);
    off = b_off + n_out;
  }
  return z;
}

double eval(const Architecture& arch, std::span<const double> params,
            std::span<const double> inputs) {
  if (static_cast<int>(inputs.size()) != arch.input)
    throw UsageError("eval: input length does not match architecture");
  const auto sizes = arch.layer_sizes();
  std::vector<double> z(inputs.begin(), inputs.end());
  std::vector<double> next;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int n_in = sizes[l], n_out = sizes[l + 1];
    const bool last = (l + 2 == sizes.size());
    next.assign(n_out, 0.0);
    const std::size_t w_off = off;
    const std::size_t b_off = off + std::size_t(n_out) * n_in;
    for (int r = 0; r < n_out; ++r) {
      double acc = params[b_off + r];
      for (int cidx = 0; cidx < n_in; ++cidx)
        acc += params[w_off + std::size_t(r) * n_in + cidx] * z[cidx];
      next[r] = last ? acc : std::tanh(acc);
    }
    z.swap(next);
    off = b_off + n_out;
  }
  return z[0];
}

void adam_step(AdamState& state, ParameterSet& params,
               std::span<const double> gradient) {
  if (gradient.size() != params.values.size())
    throw UsageError("adam_step: gradient length does not match parameters");
  for (std::size_t i = 0; i < gradient.size(); ++i)
    if (!std::isfinite(gradient[i]))
      throw NumericError("non-finite gradient for parameter index " +
                         std::to_string(i));
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.t));
  const double c2 = 1.0 - std::pow(b2, double(state.t));
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    const double g = gradient[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params.values[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
  }
}

namespace {

constexpr char kMagic[5] = {'D', 'A', 'P', 'N', '1'};

template <class T>
void write_raw(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_raw(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  const auto sizes = params.arch.layer_sizes();
  write_raw<std::uint32_t>(out, std::uint32_t(sizes.size()));
  for (int s : sizes) write_raw<std::uint32_t>(out, std::uint32_t(s));
  write_raw<std::uint64_t>(out, params.seed);
  write_raw<std::uint64_t>(out, std::uint64_t(params.values.size()));
  out.write(reinterpret_cast<const char*>(params.values.data()),
            std::streamsize(params.values.size() * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

ParameterSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[5];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("bad checkpoint magic (want DAPN1): " + path);
  const auto n_sizes = read_raw<std::uint32_t>(in);
  if (n_sizes < 2 || n_sizes > 64) throw IoError("corrupt checkpoint header: " + path);
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = int(read_raw<std::uint32_t>(in));
  ParameterSet out;
  out.arch.input = sizes.front();
  out.arch.output = sizes.back();
  out.arch.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
  out.seed = read_raw<std::uint64_t>(in);
  const auto n_params = read_raw<std::uint64_t>(in);
  if (!in || n_params != param_count(out.arch))
    throw IoError("checkpoint parameter count does not match architecture: " + path);
  out.values.resize(n_params);
  in.read(reinterpret_cast<char*>(out.values.data()),
          std::streamsize(n_params * sizeof(double)));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return out;
}

}  // namespace dapinn::net
