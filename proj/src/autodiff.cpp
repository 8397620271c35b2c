#include "dapinn/autodiff.hpp"

#include <cstring>
#include <string>

namespace dapinn::ad {

namespace {

struct Activation {
  double v, d1, d2, d3;
};

Activation eval_tanh(double x) {
  const double t = std::tanh(x);
  const double d1 = 1.0 - t * t;
  return {t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0)};
}

Activation eval_sin(double x) {
  const double s = std::sin(x), c = std::cos(x);
  return {s, c, -s, -c};
}

Activation eval_cos(double x) {
  const double s = std::sin(x), c = std::cos(x);
  return {c, -s, -c, s};
}

Activation eval_exp(double x) {
  const double e = std::exp(x);
  return {e, e, e, e};
}

}  // namespace

const char* op_name(Recording::Op op) {
  switch (op) {
    case Recording::Op::Input: return "input";
    case Recording::Op::Param: return "param";
    case Recording::Op::Const: return "const";
    case Recording::Op::Add: return "add";
    case Recording::Op::Sub: return "sub";
    case Recording::Op::Mul: return "mul";
    case Recording::Op::Div: return "div";
    case Recording::Op::Neg: return "neg";
    case Recording::Op::AddConst: return "add-const";
    case Recording::Op::MulConst: return "mul-const";
    case Recording::Op::Tanh: return "tanh";
    case Recording::Op::Sin: return "sin";
    case Recording::Op::Cos: return "cos";
    case Recording::Op::Exp: return "exp";
    case Recording::Op::First: return "first-derivative";
    case Recording::Op::Second: return "second-derivative";
  }
  return "?";
}

double Var::value() const { return rec->channels(idx)[0]; }

double Var::first(int direction) const {
  if (direction < 0 || direction >= rec->directions())
    throw UsageError("derivative direction out of range");
  return rec->channels(idx)[1 + direction];
}

double Var::second(int i, int j) const {
  const int n = rec->directions();
  if (i < 0 || j < 0 || i >= n || j >= n)
    throw UsageError("derivative direction out of range");
  if (i > j) std::swap(i, j);
  return rec->channels(idx)[1 + n + pair_index(i, j)];
}

Recording::Recording(int directions)
    : n_(directions), stride_(channel_count(directions)) {
  if (directions < 0) throw ConfigError("negative direction count");
}

void Recording::reset() {
  ops_.clear();
  vals_.clear();
  consts_.clear();
  param_nodes_.clear();
  last_visits_ = 0;
}

int32_t Recording::push_node(Op op, int32_t a, int32_t b) {
  const int32_t idx = static_cast<int32_t>(ops_.size());
  ops_.push_back({op, a, b});
  vals_.resize(vals_.size() + stride_);
  consts_.push_back(0.0);
  return idx;
}

void Recording::check_finite(const double* c, Op op) const {
  double acc = 0.0;
  for (int k = 0; k < stride_; ++k) acc += c[k];
  if (!std::isfinite(acc))
    throw NumericError(std::string("non-finite value produced by op '") +
                       op_name(op) + "'");
}

void Recording::check_owned(Var v, const char* what) const {
  if (v.rec != this || v.idx < 0 ||
      v.idx >= static_cast<int32_t>(ops_.size()))
    throw UsageError(std::string(what) + ": node does not belong to this recording");
}

Var Recording::input(double value, int direction) {
  if (direction < 0 || direction >= n_)
    throw ConfigError("input direction index out of range");
  const int32_t idx = push_node(Op::Input, -1, -1);
  double* c = channels_mut(idx);
  c[0] = value;
  c[1 + direction] = 1.0;
  return {this, idx};
}

Var Recording::input_seeded(double value, std::span<const double> first,
                            std::span<const double> second_packed) {
  if (static_cast<int>(first.size()) != n_ ||
      static_cast<int>(second_packed.size()) != n_ * (n_ + 1) / 2)
    throw UsageError("seed spans do not match direction count");
  const int32_t idx = push_node(Op::Input, -1, -1);
  double* c = channels_mut(idx);
  c[0] = value;
  for (int i = 0; i < n_; ++i) c[1 + i] = first[i];
  for (int p = 0; p < n_ * (n_ + 1) / 2; ++p) c[1 + n_ + p] = second_packed[p];
  return {this, idx};
}

Var Recording::parameter(double value) {
  const int32_t idx = push_node(Op::Param, -1, -1);
  channels_mut(idx)[0] = value;
  param_nodes_.push_back(idx);
  return {this, idx};
}

Var Recording::constant(double value) {
  const int32_t idx = push_node(Op::Const, -1, -1);
  consts_.back() = value;
  channels_mut(idx)[0] = value;
  return {this, idx};
}

Var Recording::first_node(Var src, int k) {
  check_owned(src, "first_node");
  if (k < 0 || k >= n_) throw UsageError("derivative direction out of range");
  const int32_t idx = push_node(Op::First, src.idx, k);
  channels_mut(idx)[0] = channels(src.idx)[1 + k];
  return {this, idx};
}

Var Recording::second_node(Var src, int k, int l) {
  check_owned(src, "second_node");
  if (k < 0 || l < 0 || k >= n_ || l >= n_)
    throw UsageError("derivative direction out of range");
  if (k > l) std::swap(k, l);
  const int32_t idx = push_node(Op::Second, src.idx, pair_index(k, l));
  channels_mut(idx)[0] = channels(src.idx)[1 + n_ + pair_index(k, l)];
  return {this, idx};
}

Var Recording::emit_binary(Op op, Var a, Var b) {
  check_owned(a, "binary op");
  if (b.rec != this) throw UsageError("binary op: operands from different recordings");
  const int32_t idx = push_node(op, a.idx, b.idx);
  forward_one(idx, channels_mut(idx), vals_.data());
  check_finite(channels(idx), op);
  return {this, idx};
}

Var Recording::emit_unary(Op op, Var a) {
  check_owned(a, "unary op");
  const int32_t idx = push_node(op, a.idx, -1);
  forward_one(idx, channels_mut(idx), vals_.data());
  check_finite(channels(idx), op);
  return {this, idx};
}

Var Recording::emit_with_const(Op op, Var a, double cst) {
  check_owned(a, "op");
  const int32_t idx = push_node(op, a.idx, -1);
  consts_.back() = cst;
  forward_one(idx, channels_mut(idx), vals_.data());
  check_finite(channels(idx), op);
  return {this, idx};
}

void Recording::forward_one(std::size_t i, double* out, const double* all) const {
  const Node node = ops_[i];
  const int n = n_;
  const int np = n * (n + 1) / 2;
  const double* A = node.a >= 0 ? all + std::size_t(node.a) * stride_ : nullptr;
  const double* B = node.b >= 0 ? all + std::size_t(node.b) * stride_ : nullptr;

  switch (node.op) {
    case Op::Input:
    case Op::Param:
      // leaf channels are written at emission time; replay keeps them
      return;
    case Op::Const: {
      for (int k = 0; k < stride_; ++k) out[k] = 0.0;
      out[0] = consts_[i];
      return;
    }
    case Op::Add:
      for (int k = 0; k < stride_; ++k) out[k] = A[k] + B[k];
      return;
    case Op::Sub:
      for (int k = 0; k < stride_; ++k) out[k] = A[k] - B[k];
      return;
    case Op::Neg:
      for (int k = 0; k < stride_; ++k) out[k] = -A[k];
      return;
    case Op::AddConst:
      for (int k = 0; k < stride_; ++k) out[k] = A[k];
      out[0] += consts_[i];
      return;
    case Op::MulConst: {
      const double c = consts_[i];
      for (int k = 0; k < stride_; ++k) out[k] = A[k] * c;
      return;
    }
    case Op::Mul: {
      out[0] = A[0] * B[0];
      for (int k = 0; k < n; ++k)
        out[1 + k] = A[1 + k] * B[0] + A[0] * B[1 + k];
      for (int j = 0, p = 0; j < n; ++j)
        for (int ii = 0; ii <= j; ++ii, ++p)
          out[1 + n + p] = A[1 + n + p] * B[0] + A[1 + ii] * B[1 + j] +
                           A[1 + j] * B[1 + ii] + A[0] * B[1 + n + p];
      return;
    }
    case Op::Div: {
      const double r = 1.0 / B[0];
      out[0] = A[0] * r;
      for (int k = 0; k < n; ++k)
        out[1 + k] = (A[1 + k] - out[0] * B[1 + k]) * r;
      for (int j = 0, p = 0; j < n; ++j)
        for (int ii = 0; ii <= j; ++ii, ++p)
          out[1 + n + p] = (A[1 + n + p] - out[1 + ii] * B[1 + j] -
                            out[1 + j] * B[1 + ii] - out[0] * B[1 + n + p]) *
                           r;
      return;
    }
    case Op::Tanh:
    case Op::Sin:
    case Op::Cos:
    case Op::Exp: {
      Activation f;
      switch (node.op) {
        case Op::Tanh: f = eval_tanh(A[0]); break;
        case Op::Sin: f = eval_sin(A[0]); break;
        case Op::Cos: f = eval_cos(A[0]); break;
        default: f = eval_exp(A[0]); break;
      }
      out[0] = f.v;
      for (int k = 0; k < n; ++k) out[1 + k] = f.d1 * A[1 + k];
      for (int j = 0, p = 0; j < n; ++j)
        for (int ii = 0; ii <= j; ++ii, ++p)
          out[1 + n + p] = f.d1 * A[1 + n + p] + f.d2 * A[1 + ii] * A[1 + j];
      return;
    }
    case Op::First: {
      for (int k = 0; k < stride_; ++k) out[k] = 0.0;
      out[0] = A[1 + node.b];
      return;
    }
    case Op::Second: {
      for (int k = 0; k < stride_; ++k) out[k] = 0.0;
      out[0] = A[1 + n + node.b];
      return;
    }
  }
  (void)np;
}

std::vector<double> Recording::parameter_gradient(Var loss) {
  std::vector<double> grad(param_nodes_.size(), 0.0);
  parameter_gradient_accumulate(loss, 1.0, grad);
  return grad;
}

void Recording::parameter_gradient_accumulate(Var loss, double seed,
                                              std::span<double> out) {
  check_owned(loss, "parameter_gradient");
  if (!std::isfinite(channels(loss.idx)[0]))
    throw NumericError("loss value is not finite");
  if (out.size() < param_nodes_.size())
    throw UsageError("gradient output span too small");
  backward(loss.idx, seed);
  for (std::size_t s = 0; s < param_nodes_.size(); ++s)
    out[s] += adj_[std::size_t(param_nodes_[s]) * stride_];
}

void Recording::backward(int32_t loss_idx, double seed) {
  const int n = n_;
  const std::size_t active = std::size_t(loss_idx) + 1;
  adj_.assign(active * stride_, 0.0);
  adj_[std::size_t(loss_idx) * stride_] = seed;
  last_visits_ = 0;

  // Adjoint of the packed pair (k,j) of node base pointer `c`.
  const auto sym = [n](const double* c, int k, int j) {
    if (k > j) std::swap(k, j);
    return c[1 + n + pair_index(k, j)];
  };

  for (int32_t i = loss_idx; i >= 0; --i) {
    ++last_visits_;
    const Node node = ops_[i];
    const double* cb = adj_.data() + std::size_t(i) * stride_;
    double* ab = node.a >= 0 ? adj_.data() + std::size_t(node.a) * stride_ : nullptr;
    double* bb = node.b >= 0 ? adj_.data() + std::size_t(node.b) * stride_ : nullptr;
    const double* A = node.a >= 0 ? channels(node.a) : nullptr;
    const double* B = node.b >= 0 ? channels(node.b) : nullptr;

    switch (node.op) {
      case Op::Input:
      case Op::Param:
      case Op::Const:
        break;
      case Op::Add:
        for (int k = 0; k < stride_; ++k) {
          ab[k] += cb[k];
          bb[k] += cb[k];
        }
        break;
      case Op::Sub:
        for (int k = 0; k < stride_; ++k) {
          ab[k] += cb[k];
          bb[k] -= cb[k];
        }
        break;
      case Op::Neg:
        for (int k = 0; k < stride_; ++k) ab[k] -= cb[k];
        break;
      case Op::AddConst:
        for (int k = 0; k < stride_; ++k) ab[k] += cb[k];
        break;
      case Op::MulConst: {
        const double c = consts_[i];
        for (int k = 0; k < stride_; ++k) ab[k] += cb[k] * c;
        break;
      }
      case Op::Mul: {
        double av = cb[0] * B[0];
        double bv = cb[0] * A[0];
        for (int k = 0; k < n; ++k) {
          av += cb[1 + k] * B[1 + k];
          bv += cb[1 + k] * A[1 + k];
        }
        for (int p = 0; p < n * (n + 1) / 2; ++p) {
          av += cb[1 + n + p] * B[1 + n + p];
          bv += cb[1 + n + p] * A[1 + n + p];
        }
        ab[0] += av;
        bb[0] += bv;
        for (int k = 0; k < n; ++k) {
          double afk = cb[1 + k] * B[0];
          double bfk = cb[1 + k] * A[0];
          for (int j = 0; j < n; ++j) {
            afk += sym(cb, k, j) * B[1 + j];
            bfk += sym(cb, k, j) * A[1 + j];
          }
          afk += sym(cb, k, k) * B[1 + k];
          bfk += sym(cb, k, k) * A[1 + k];
          ab[1 + k] += afk;
          bb[1 + k] += bfk;
        }
        for (int p = 0; p < n * (n + 1) / 2; ++p) {
          ab[1 + n + p] += cb[1 + n + p] * B[0];
          bb[1 + n + p] += cb[1 + n + p] * A[0];
        }
        break;
      }
      case Op::Div: {
        const double r = 1.0 / B[0];
        const double* C = channels(i);
        double rbar = 0.0;
        double cvbar = cb[0];
        // second-derivative stage
        double cfbar[4];
        for (int k = 0; k < n; ++k) cfbar[k] = cb[1 + k];
        for (int j = 0, p = 0; j < n; ++j)
          for (int ii = 0; ii <= j; ++ii, ++p) {
            const double w = cb[1 + n + p];
            if (w == 0.0) continue;
            ab[1 + n + p] += w * r;
            rbar += w * C[1 + n + p] * B[0];
            bb[1 + n + p] -= w * C[0] * r;
            cvbar -= w * B[1 + n + p] * r;
            if (ii == j) {
              cfbar[ii] -= 2.0 * w * B[1 + ii] * r;
              bb[1 + ii] -= 2.0 * w * C[1 + ii] * r;
            } else {
              cfbar[ii] -= w * B[1 + j] * r;
              cfbar[j] -= w * B[1 + ii] * r;
              bb[1 + j] -= w * C[1 + ii] * r;
              bb[1 + ii] -= w * C[1 + j] * r;
            }
          }
        // first-derivative stage
        for (int k = 0; k < n; ++k) {
          const double w = cfbar[k];
          ab[1 + k] += w * r;
          bb[1 + k] -= w * C[0] * r;
          cvbar -= w * B[1 + k] * r;
          rbar += w * C[1 + k] * B[0];
        }
        // value stage
        ab[0] += cvbar * r;
        rbar += cvbar * A[0];
        bb[0] -= rbar * r * r;
        break;
      }
      case Op::Tanh:
      case Op::Sin:
      case Op::Cos:
      case Op::Exp: {
        Activation f;
        switch (node.op) {
          case Op::Tanh: f = eval_tanh(A[0]); break;
          case Op::Sin: f = eval_sin(A[0]); break;
          case Op::Cos: f = eval_cos(A[0]); break;
          default: f = eval_exp(A[0]); break;
        }
        double avbar = cb[0] * f.d1;
        for (int k = 0; k < n; ++k) avbar += cb[1 + k] * f.d2 * A[1 + k];
        for (int j = 0, p = 0; j < n; ++j)
          for (int ii = 0; ii <= j; ++ii, ++p)
            avbar += cb[1 + n + p] *
                     (f.d2 * A[1 + n + p] + f.d3 * A[1 + ii] * A[1 + j]);
        ab[0] += avbar;
        for (int k = 0; k < n; ++k) {
          double afk = cb[1 + k] * f.d1;
          for (int j = 0; j < n; ++j) afk += sym(cb, k, j) * f.d2 * A[1 + j];
          afk += sym(cb, k, k) * f.d2 * A[1 + k];
          ab[1 + k] += afk;
        }
        for (int p = 0; p < n * (n + 1) / 2; ++p)
          ab[1 + n + p] += cb[1 + n + p] * f.d1;
        break;
      }
      case Op::First:
        ab[1 + node.b] += cb[0];
        break;
      case Op::Second:
        ab[1 + n + node.b] += cb[0];
        break;
    }
  }
}

bool Recording::replay_matches() const {
  std::vector<double> replay(vals_);
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op op = ops_[i].op;
    if (op == Op::Input || op == Op::Param) continue;
    double* out = replay.data() + i * stride_;
    forward_one(i, out, replay.data());
  }
  return std::memcmp(replay.data(), vals_.data(),
                     vals_.size() * sizeof(double)) == 0;
}

Var pow_int(Var x, int k) {
  if (k < 0 || k > 4)
    throw UsageError("pow_int supports exponents 0..4 only");
  Recording& rec = *x.rec;
  switch (k) {
    case 0: return rec.constant(1.0);
    case 1: return x;
    case 2: return x * x;
    case 3: return x * x * x;
    default: {
      Var s = x * x;
      return s * s;
    }
  }
}

}  // namespace dapinn::ad
