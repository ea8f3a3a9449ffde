#include "slr/cg.hpp"

#include <cmath>

namespace slr {

CgReport conjugate_gradient(const LinearOperator &op, const ComplexTensor &b, ComplexTensor &x,
                            const CgOptions &opts) {
  b.check_same(x);
  CgReport rep;
  const double bnorm = norm(b);
  if (bnorm == 0) {
    x.fill(cplx(0));
    rep.converged = true;
    return rep;
  }
  ComplexTensor r = b - op(x);
  double rr = norm2(r);
  rep.relative_residual = std::sqrt(rr) / bnorm;
  if (rep.relative_residual <= opts.tolerance) {
    rep.converged = true;
    return rep;
  }
  ComplexTensor p = r;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const ComplexTensor ap = op(p);
    const double pap = inner(p, ap).real();
    if (!(pap > 0)) break;
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_new = norm2(r);
    rep.iterations = it + 1;
    rep.relative_residual = std::sqrt(rr_new) / bnorm;
    if (rep.relative_residual <= opts.tolerance) {
      rep.converged = true;
      break;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }
  return rep;
}

}  // namespace slr
