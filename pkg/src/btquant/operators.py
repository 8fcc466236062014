"""Toeplitz and geometric-quantization matrices with their functionals.

Operators are dense complex matrices in the orthonormal frame of the level-m
section space.  A Toeplitz matrix compresses multiplication by f back onto
the holomorphic sections; the geometric-quantization matrix compresses the
prequantum operator P_f = nabla_{X_f} + i f with the Hamiltonian field
solved from the chart form of m omega(X_f, .) = df:

    X_f = (i / (m g)) (dzbar f d_z - dz f d_zbar).

With this orientation of X_f the identity Q_f = i T_{f - 2 Delta f / (2m)}
holds exactly (the other orientation lands outside the scanned constants;
see tuynman_residual).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, OracleMissing, UnderResolved
from .geometry import ModelKind, laplacian


@dataclass
class OperatorMatrix:
    """Endomorphism of the level-m section space in the orthonormal frame."""

    frame: object
    rule: object
    entries: np.ndarray
    provenance: str

    @property
    def model(self):
        return self.frame.model

    @property
    def m(self):
        return self.frame.m

    @property
    def dim(self):
        return self.frame.dim

    def __repr__(self):
        return f"OperatorMatrix({self.provenance!r}, m={self.m})"

    def _like(self, entries, provenance):
        return OperatorMatrix(self.frame, self.rule, entries, provenance)

    def __matmul__(self, other):
        _check_compatible(self, other)
        return self._like(self.entries @ other.entries,
                          f"{self.provenance}*{other.provenance}")

    def __add__(self, other):
        _check_compatible(self, other)
        return self._like(self.entries + other.entries,
                          f"{self.provenance}+{other.provenance}")

    def __sub__(self, other):
        _check_compatible(self, other)
        return self._like(self.entries - other.entries,
                          f"{self.provenance}-{other.provenance}")

    def __mul__(self, scalar):
        c = complex(scalar)
        return self._like(c * self.entries, f"{c}*{self.provenance}")

    __rmul__ = __mul__

    def adjoint(self):
        return self._like(self.entries.conj().T, f"{self.provenance}^*")


def _check_compatible(a, b):
    if not isinstance(b, OperatorMatrix):
        raise DimensionMismatch(f"expected an OperatorMatrix, got {type(b).__name__}")
    if a.model != b.model or a.m != b.m:
        raise DimensionMismatch(
            f"operators live at different levels or models: "
            f"{a.provenance} (m={a.m}) vs {b.provenance} (m={b.m})"
        )


def _check_resolution(frame, rule):
    if rule.model != frame.model:
        raise DimensionMismatch("frame and rule live on different models")
    m = frame.m
    if frame.model.kind is ModelKind.SPHERE:
        if rule.resolution < 2 * m + 8:
            raise UnderResolved(
                f"sphere level {m} needs radial resolution >= {2 * m + 8}, "
                f"rule has {rule.resolution}"
            )
    else:
        if rule.resolution < 4 * m:
            raise UnderResolved(
                f"torus level {m} needs grid >= {4 * m}, rule has {rule.resolution}"
            )


def toeplitz(frame, rule, f):
    """T_f in the orthonormal frame: entries[i, j] = <sigma_i, f sigma_j>."""
    _check_resolution(frame, rule)
    fvals = np.asarray(f.eval(rule.zs_array), dtype=complex)
    return toeplitz_from_values(frame, rule, fvals, f"T[{f.label}]")


def toeplitz_from_values(frame, rule, values, label="T[values]"):
    """Toeplitz compression of pointwise multiplier values at the rule nodes."""
    _check_resolution(frame, rule)
    values = np.asarray(values, dtype=complex)
    w = rule.weights_array
    if values.shape != w.shape:
        raise DimensionMismatch("multiplier values must be given at every node")
    son = frame.node_eval(rule)
    entries = (son.conj() * (w * values)[None, :]) @ son.T
    return OperatorMatrix(frame, rule, entries, label)


def geometric_quantization(frame, rule, f):
    """Q_f = Pi P_f Pi with P_f = nabla_{X_f} + i f, in the orthonormal frame."""
    _check_resolution(frame, rule)
    if f._d_zbar is None:
        raise OracleMissing(f"geometric quantization of {f.label!r} needs d_zbar")
    zs = rule.zs_array
    w = rule.weights_array
    m = frame.m
    g = frame.model.kahler_density(zs)
    a = 1j * np.asarray(f.d_zbar(zs), dtype=complex) / (m * g)
    fvals = np.asarray(f.eval(zs), dtype=complex)
    son = frame.node_eval(rule)
    dson = frame.node_deriv(rule)
    integrand = a[None, :] * dson + 1j * fvals[None, :] * son
    entries = (son.conj() * w[None, :]) @ integrand.T
    return OperatorMatrix(frame, rule, entries, f"Q[{f.label}]")


def tuynman_residual(frame, rule, f, c):
    """Operator-norm distance between Q_f and i T_{f - c Delta f / (2m)}."""
    if f._d_z_zbar is None:
        raise OracleMissing(f"tuynman residual of {f.label!r} needs d_z_zbar")
    q = geometric_quantization(frame, rule, f)
    shifted = f + (-float(c) / (2.0 * frame.m)) * laplacian(frame.model, f)
    t = toeplitz(frame, rule, shifted)
    return operator_norm(q.entries - 1j * t.entries)


def operator_norm(a):
    """Largest singular value; accepts an OperatorMatrix or a bare array."""
    entries = getattr(a, "entries", a)
    if entries.size == 0:
        return 0.0
    return float(np.linalg.svd(entries, compute_uv=False)[0])


def trace(a):
    """Sum of diagonal entries."""
    return complex(np.trace(getattr(a, "entries", a)))


def hs_inner(a, b):
    """Hilbert-Schmidt product trace(A* B), anti-linear in the first slot."""
    _check_compatible(a, b)
    return complex(np.trace(a.entries.conj().T @ b.entries))
