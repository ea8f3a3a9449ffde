#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "slr/tensor.hpp"

namespace slr::nn {

using Value = std::variant<RealTensor, ComplexTensor>;

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape over a closed set of tensor ops.
///
/// Complex gradients follow dL/dRe + i dL/dIm, so a complex-linear op y = A x
/// propagates grad_x = A^H grad_y.
class Tape {
 public:
  using Backward = std::function<void(Tape &, const Value &grad)>;

  Var constant(RealTensor v) { return push(std::move(v), false, nullptr); }
  Var constant(ComplexTensor v) { return push(std::move(v), false, nullptr); }
  Var variable(RealTensor v) { return push(std::move(v), true, nullptr); }
  Var variable(ComplexTensor v) { return push(std::move(v), true, nullptr); }

  /// Records an op result; it requires a gradient iff any input does.
  Var record(Value v, std::initializer_list<Var> inputs, Backward backward);

  const RealTensor &real(Var v) const;
  const ComplexTensor &complex(Var v) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool holds_complex(Var v) const { return std::holds_alternative<ComplexTensor>(nodes_.at(v.id).value); }

  /// Gradient of the last backward() root; zero tensor if the node was not reached.
  RealTensor real_grad(Var v) const;
  ComplexTensor complex_grad(Var v) const;

  void accumulate(Var v, const RealTensor &g);
  void accumulate(Var v, const ComplexTensor &g);

  /// Seeds d(root)/d(root) = 1 for a one-element real root and sweeps the
  /// tape in reverse recording order.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Value value;
    Value grad;
    bool has_grad = false;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Value v, bool requires_grad, Backward backward);

  std::vector<Node> nodes_;
};

}  // namespace slr::nn
