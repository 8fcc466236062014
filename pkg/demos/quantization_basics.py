"""First steps: a model, a section frame, and a few Toeplitz matrices.

Run with: python3 demos/quantization_basics.py
"""

import numpy as np

from btquant import (
    build_basis,
    build_quadrature,
    gram_matrix,
    operator_norm,
    orthonormalize,
    sphere_gram_closed_form,
    standard_observable,
    toeplitz,
    trace,
)
from btquant import make_model


def main():
    sphere = make_model("sphere")
    m = 8

    # The holomorphic sections at level m are spanned by the monomials
    # 1, z, ..., z^m; the quadrature rule discretizes the curved measure.
    basis = build_basis(sphere, m)
    rule = build_quadrature(sphere, 2 * m + 8)
    gram = gram_matrix(basis, rule)
    oracle = np.diag(sphere_gram_closed_form(m))
    print(f"level m = {m}, dimension {m + 1}")
    print(f"gram vs closed form: max dev {np.max(np.abs(gram - oracle)):.3e}")

    frame = orthonormalize(basis, gram)

    # Toeplitz compression: multiply by the observable, project back.
    x3 = standard_observable(sphere, "x3")
    t3 = toeplitz(frame, rule, x3)
    eigs = np.sort(np.linalg.eigvalsh(t3.entries))
    print("\nheight operator spectrum (equally spaced, shrunk by m/(m+2)):")
    print("  ", np.array2string(eigs, precision=6))
    print(f"largest eigenvalue  {eigs[-1]:.6f}")
    print(f"closed form m/(m+2) {m / (m + 2):.6f}")

    # Operator norms never exceed the sup of the symbol.
    for name in ("x1", "x2", "x3"):
        t = toeplitz(frame, rule, standard_observable(sphere, name))
        print(f"||T_{name}|| = {operator_norm(t):.6f}  (sup of symbol is 1)")

    # The trace of a Toeplitz matrix is a quadrature-exact integral.
    sq = x3 * x3
    tsq = toeplitz(frame, rule, sq)
    print(f"\ntrace T_(x3^2) = {trace(tsq).real:.8f}")
    print(f"(m+1)/3        = {(m + 1) / 3:.8f}")


if __name__ == "__main__":
    main()
