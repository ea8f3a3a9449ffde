#include "slr/nn/tape.hpp"

#include <stdexcept>

namespace slr::nn {

Var Tape::push(Value v, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(v);
  n.requires_grad = requires_grad;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::record(Value v, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
  return push(std::move(v), needs, needs ? std::move(backward) : nullptr);
}

const RealTensor &Tape::real(Var v) const {
  const auto *p = std::get_if<RealTensor>(&nodes_.at(v.id).value);
  if (!p) throw std::logic_error("tape node holds a complex tensor, real expected");
  return *p;
}

const ComplexTensor &Tape::complex(Var v) const {
  const auto *p = std::get_if<ComplexTensor>(&nodes_.at(v.id).value);
  if (!p) throw std::logic_error("tape node holds a real tensor, complex expected");
  return *p;
}

RealTensor Tape::real_grad(Var v) const {
  const Node &n = nodes_.at(v.id);
  if (!n.has_grad) return RealTensor(real(v).shape());
  return std::get<RealTensor>(n.grad);
}

ComplexTensor Tape::complex_grad(Var v) const {
  const Node &n = nodes_.at(v.id);
  if (!n.has_grad) return ComplexTensor(complex(v).shape());
  return std::get<ComplexTensor>(n.grad);
}

void Tape::accumulate(Var v, const RealTensor &g) {
  Node &n = nodes_.at(v.id);
  if (!n.requires_grad) return;
  real(v).check_same(g);
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    std::get<RealTensor>(n.grad) += g;
  }
}

void Tape::accumulate(Var v, const ComplexTensor &g) {
  Node &n = nodes_.at(v.id);
  if (!n.requires_grad) return;
  complex(v).check_same(g);
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    std::get<ComplexTensor>(n.grad) += g;
  }
}

void Tape::backward(Var root) {
  const RealTensor &r = real(root);
  if (r.size() != 1) throw std::invalid_argument("backward: root must be a one-element real tensor");
  for (auto &n : nodes_) {
    n.has_grad = false;
    n.grad = Value{};
  }
  RealTensor seed(r.shape());
  seed[0] = 1.0;
  accumulate(root, seed);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node &n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

}  // namespace slr::nn
