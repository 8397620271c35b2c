#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dapinn/errors.hpp"

namespace dapinn::ad {

class Recording;

/// Handle to one scalar node of a Recording. Cheap to copy; valid as long as
/// the owning Recording is alive and not reset.
struct Var {
  Recording* rec = nullptr;
  int32_t idx = -1;

  double value() const;
  double first(int direction) const;
  double second(int i, int j) const;
};

/// Number of stored channels for `n` tracked input directions:
/// value + n first derivatives + packed symmetric second-derivative block.
constexpr int channel_count(int n) { return 1 + n + n * (n + 1) / 2; }

/// Packed index of the symmetric pair (i,j), i <= j.
constexpr int pair_index(int i, int j) { return j * (j + 1) / 2 + i; }

/// Append-only record of a scalar computation.
///
/// Every node carries the exact value, first and second derivatives with
/// respect to up to `directions` tracked inputs (forward propagation), and the
/// structure needed to run reverse mode over the whole computation, which
/// yields exact gradients with respect to registered parameters for any loss
/// assembled from values, first or second derivatives.
///
/// A Recording is single-threaded. Distinct Recordings are independent and may
/// be used concurrently from different threads.
class Recording {
public:
  explicit Recording(int directions);

  int directions() const { return n_; }
  std::size_t node_count() const { return ops_.size(); }
  std::size_t parameter_count() const { return param_nodes_.size(); }

  /// Drops all nodes and parameter registrations, keeping buffer capacity.
  void reset();

  /// Tracked input seeded with the standard basis vector e_direction.
  Var input(double value, int direction);

  /// Tracked input with explicit first derivatives (length = directions) and
  /// packed symmetric second derivatives (length = directions*(directions+1)/2)
  /// with respect to the underlying coordinates. Used to push an augmentation
  /// map's Jacobian and curvature into the seed, so the network's forward pass
  /// composes the chain rule automatically.
  Var input_seeded(double value, std::span<const double> first,
                   std::span<const double> second_packed);

  /// Trainable parameter leaf; its slot order defines the gradient layout.
  Var parameter(double value);

  Var constant(double value);

  /// New node whose value is d src / d x_k. Constant with respect to inputs,
  /// still differentiable with respect to parameters.
  Var first_node(Var src, int k);

  /// New node whose value is d^2 src / d x_k d x_l.
  Var second_node(Var src, int k, int l);

  /// d loss / d theta for every registered parameter, in registration order.
  std::vector<double> parameter_gradient(Var loss);

  /// Adds seed * (d loss / d theta) into `out` (length >= parameter_count).
  void parameter_gradient_accumulate(Var loss, double seed,
                                     std::span<double> out);

  /// Recomputes every node value from the leaves; true iff all values are
  /// reproduced bit-identically.
  bool replay_matches() const;

  /// Number of nodes visited by the most recent backward traversal.
  std::size_t last_backward_visits() const { return last_visits_; }

  // --- internal: elementary operations -------------------------------------

  enum class Op : uint8_t {
    Input,
    Param,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    AddConst,
    MulConst,
    Tanh,
    Sin,
    Cos,
    Exp,
    First,
    Second,
  };

  Var emit_binary(Op op, Var a, Var b);
  Var emit_unary(Op op, Var a);
  Var emit_with_const(Op op, Var a, double c);

  const double* channels(int32_t idx) const { return vals_.data() + std::size_t(idx) * stride_; }

private:
  friend struct Var;

  struct Node {
    Op op;
    int32_t a = -1;
    int32_t b = -1;
  };

  int32_t push_node(Op op, int32_t a, int32_t b);
  double* channels_mut(int32_t idx) { return vals_.data() + std::size_t(idx) * stride_; }
  void check_finite(const double* c, Op op) const;
  void check_owned(Var v, const char* what) const;
  void forward_one(std::size_t i, double* out, const double* all) const;
  void backward(int32_t loss_idx, double seed);

  int n_;
  int stride_;
  std::vector<Node> ops_;
  std::vector<double> vals_;
  std::vector<double> consts_;  // payload for Const/AddConst/MulConst, by node
  std::vector<int32_t> param_nodes_;
  std::vector<double> adj_;  // reused backward buffer
  std::size_t last_visits_ = 0;
};

const char* op_name(Recording::Op op);

// --- arithmetic --------------------------------------------------------------

inline Var operator+(Var a, Var b) { return a.rec->emit_binary(Recording::Op::Add, a, b); }
inline Var operator-(Var a, Var b) { return a.rec->emit_binary(Recording::Op::Sub, a, b); }
inline Var operator*(Var a, Var b) { return a.rec->emit_binary(Recording::Op::Mul, a, b); }
inline Var operator/(Var a, Var b) { return a.rec->emit_binary(Recording::Op::Div, a, b); }
inline Var operator-(Var a) { return a.rec->emit_unary(Recording::Op::Neg, a); }

inline Var operator+(Var a, double c) { return a.rec->emit_with_const(Recording::Op::AddConst, a, c); }
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return (-a) + c; }
inline Var operator*(Var a, double c) { return a.rec->emit_with_const(Recording::Op::MulConst, a, c); }
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, Var a) { return a.rec->constant(c) / a; }

inline Var tanh(Var a) { return a.rec->emit_unary(Recording::Op::Tanh, a); }
inline Var sin(Var a) { return a.rec->emit_unary(Recording::Op::Sin, a); }
inline Var cos(Var a) { return a.rec->emit_unary(Recording::Op::Cos, a); }
inline Var exp(Var a) { return a.rec->emit_unary(Recording::Op::Exp, a); }

/// x^k by repeated multiplication; k in [0, 4].
Var pow_int(Var x, int k);

inline Var square(Var x) { return x * x; }

}  // namespace dapinn::ad
