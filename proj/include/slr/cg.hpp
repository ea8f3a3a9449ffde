#pragma once

#include <functional>

#include "slr/tensor.hpp"

namespace slr {

struct CgOptions {
  int max_iterations = 30;
  double tolerance = 1e-8;  // on ||b - A x|| / ||b||
};

struct CgReport {
  int iterations = 0;
  double relative_residual = 0;
  bool converged = false;
};

using LinearOperator = std::function<ComplexTensor(const ComplexTensor &)>;

/// Conjugate gradient for a Hermitian positive semidefinite operator, starting
/// from the contents of x.
CgReport conjugate_gradient(const LinearOperator &op, const ComplexTensor &b, ComplexTensor &x,
                            const CgOptions &opts);

}  // namespace slr
