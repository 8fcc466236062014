"""Holomorphic section spaces of the quantum line bundle at level m.

The level-m space is presented through explicit chart functions s_j(z)
together with the metric weight h(z)^m: monomials z^j (j = 0..m) on the
sphere, and the m theta functions with characteristics j/m on the torus.
All numerics run on "weighted" section values h^{m/2}(z) s_j(z), which stay
bounded on the whole chart; raw chart values are still available through
`basis_eval` but overflow for large |z| at high level, as monomials do.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.special

from .errors import (
    DimensionMismatch,
    LevelInvalid,
    NotPositiveDefinite,
    UnderResolved,
)
from .geometry import ModelKind


class SectionBasis:
    """Common interface of the concrete bases; see SphereBasis, TorusBasis."""

    def __init__(self, model, m):
        if int(m) != m or m < 1:
            raise LevelInvalid(f"level must be a positive integer, got {m!r}")
        self.model = model
        self.m = int(m)

    def weight(self, z):
        """h(z)^m, the level-m metric weight."""
        raise NotImplementedError

    def basis_eval(self, j, z):
        """Raw chart function s_j(z)."""
        raise NotImplementedError

    def weighted_eval(self, z):
        """(dim, n) array of h^{m/2}(z) s_j(z); bounded on the chart."""
        raise NotImplementedError

    def weighted_deriv(self, z):
        """(dim, n) array of h^{m/2} (s_j' + m (d_z log h) s_j).

        This is the weighted (1,0) covariant derivative of s_j on the
        holomorphic frame, the only derivative the prequantum operator needs.
        """
        raise NotImplementedError


class SphereBasis(SectionBasis):
    """Monomials z^j, j = 0..m; dim = m+1."""

    def __init__(self, model, m):
        super().__init__(model, m)
        self.dim = self.m + 1

    def weight(self, z):
        t = (np.asarray(z, dtype=complex) * np.conj(z)).real
        return np.exp(-self.m * np.log1p(t))

    def basis_eval(self, j, z):
        return np.asarray(z, dtype=complex) ** int(j)

    def _u_phi(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        t = (z * z.conj()).real
        u = t / (1.0 + t)
        return u, np.angle(z)

    def weighted_eval(self, z):
        # h^{m/2} z^j = u^{j/2} (1-u)^{(m-j)/2} e^{i j phi}; fuse the
        # exponents in log space so neither factor overflows.
        u, phi = self._u_phi(z)
        j = np.arange(self.dim)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.exp(0.5 * j * np.log(u)[None, :]
                         + 0.5 * (self.m - j) * np.log1p(-u)[None, :])
        mag = np.where(np.isnan(mag), 0.0, mag)  # 0*log(0) corners
        at_zero = u == 0.0
        if np.any(at_zero):
            mag[:, at_zero] = 0.0
            mag[0, at_zero] = 1.0
        at_one = u == 1.0
        if np.any(at_one):
            mag[:, at_one] = 0.0
            mag[self.m, at_one] = 1.0
        return mag * np.exp(1j * j * phi[None, :])

    def weighted_deriv(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        u, phi = self._u_phi(z)
        out = np.zeros((self.dim, z.size), dtype=complex)
        j = np.arange(1, self.dim)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.exp(0.5 * (j - 1) * np.log(u)[None, :]
                         + 0.5 * (self.m - j + 1) * np.log1p(-u)[None, :])
        mag = np.where(np.isnan(mag), 0.0, mag)
        at_zero = u == 0.0
        if np.any(at_zero):
            mag[:, at_zero] = 0.0
            mag[0, at_zero] = 1.0  # j = 1 row: h^{m/2} * 1 at z = 0
        # d/dz z^j = j z^{j-1}; the connection term m (d log h) z^j combines to
        # h^{m/2} (j z^{j-1} + m dlogh z^j) with dlogh = -zbar/(1+t).
        deriv_mag = j * mag * np.exp(1j * (j - 1) * phi[None, :])
        psi = self.weighted_eval(z)
        t = (z * z.conj()).real
        dlogh = -z.conj() / (1.0 + t)
        out[1:, :] = deriv_mag
        out += self.m * dlogh[None, :] * psi
        return out


class TorusBasis(SectionBasis):
    """Theta functions with characteristics j/m, j = 0..m-1; dim = m.

    s_j(z) = sum_n exp(pi i m tau (n + j/m)^2 + 2 pi i m (n + j/m) z).
    The series is truncated at |n| <= cutoff where the discarded Gaussian
    tail is below 1e-14 across the fundamental domain.
    """

    def __init__(self, model, m, extra_terms=0):
        super().__init__(model, m)
        self.dim = self.m
        self.tau = model.tau
        self.cutoff = int(np.ceil(4.0 / np.sqrt(self.m * self.tau.imag))) + 4 + int(extra_terms)
        self._ns = np.arange(-self.cutoff, self.cutoff + 1)

    def weight(self, z):
        y_im = np.asarray(z, dtype=complex).imag
        return np.exp(-2.0 * np.pi * self.m * y_im**2 / self.tau.imag)

    def basis_eval(self, j, z):
        z = np.asarray(z, dtype=complex)
        c = j / self.m
        n = self._ns[:, None] + c
        expo = (1j * np.pi * self.m * self.tau * n**2
                + 2j * np.pi * self.m * n * z.ravel()[None, :])
        vals = np.exp(expo).sum(axis=0)
        return vals.reshape(z.shape)

    def _weighted_terms(self, z):
        """Per-term weighted exponentials, shape (dim, terms, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        x, y = self.model.lattice_coords(z)
        tau1, tau2 = self.tau.real, self.tau.imag
        cs = np.arange(self.dim)[:, None, None] / self.m
        n = self._ns[None, :, None]
        shifted = n + cs + y[None, None, :]
        real_part = -np.pi * self.m * tau2 * shifted**2
        imag_part = (np.pi * self.m * tau1 * (n + cs) ** 2
                     + 2.0 * np.pi * self.m * (n + cs) * x[None, None, :])
        return np.exp(real_part + 1j * imag_part), shifted

    def weighted_eval(self, z):
        terms, _ = self._weighted_terms(z)
        return terms.sum(axis=1)

    def weighted_deriv(self, z):
        # Term by term, s_j' + m (d_z log h) s_j picks up the factor
        # 2 pi i m (n + j/m + y), which keeps the Gaussian decay.
        terms, shifted = self._weighted_terms(z)
        return 2j * np.pi * self.m * (shifted * terms).sum(axis=1)


def build_basis(model, m, extra_terms=0):
    """Section basis of level m for the model; dim = m+1 (sphere) or m (torus)."""
    if model.kind is ModelKind.SPHERE:
        if extra_terms:
            raise LevelInvalid("extra_terms applies only to the torus theta series")
        return SphereBasis(model, m)
    return TorusBasis(model, m, extra_terms=extra_terms)


def sphere_gram_closed_form(m):
    """Diagonal Gram entries 2 pi j! (m-j)! / (m+1)! as an array."""
    j = np.arange(m + 1)
    logs = (scipy.special.gammaln(j + 1) + scipy.special.gammaln(m - j + 1)
            - scipy.special.gammaln(m + 2))
    return 2.0 * np.pi * np.exp(logs)


_GRAM_CACHE = {}


def gram_matrix(basis, rule=None, mode="quadrature"):
    """Gram matrix G[j,k] = integral of h^m conj(s_j) s_k against Omega.

    mode "closed_form" (sphere only) returns the exact diagonal Beta-integral
    values; mode "quadrature" integrates on the rule and, on the sphere,
    cross-checks against the closed form, raising UnderResolved on
    disagreement.
    """
    mode = str(getattr(mode, "value", mode)).lower()
    if mode not in ("quadrature", "closed_form"):
        raise ValueError(f"unknown Gram mode {mode!r}")
    if mode == "closed_form":
        if basis.model.kind is not ModelKind.SPHERE:
            raise ValueError("closed-form Gram entries exist only on the sphere")
        return np.diag(sphere_gram_closed_form(basis.m)).astype(complex)

    if rule is None:
        raise ValueError("quadrature mode needs a rule")
    if rule.model != basis.model:
        raise DimensionMismatch("rule and basis live on different models")
    key = (basis.model, basis.m, rule.resolution, getattr(basis, "cutoff", None))
    cached = _GRAM_CACHE.get(key)
    if cached is not None:
        return cached
    psi = basis.weighted_eval(rule.zs_array)
    w = rule.weights_array
    gram = (psi.conj() * w[None, :]) @ psi.T
    gram = 0.5 * (gram + gram.conj().T)
    if basis.model.kind is ModelKind.SPHERE:
        closed = np.diag(sphere_gram_closed_form(basis.m))
        scale = float(np.max(np.abs(closed)))
        if np.max(np.abs(gram - closed)) > 1e-8 * scale:
            raise UnderResolved(
                f"sphere Gram at level {basis.m} disagrees with the closed form "
                f"at resolution {rule.resolution}"
            )
    try:
        scipy.linalg.cholesky(gram, lower=False)
    except scipy.linalg.LinAlgError:
        raise NotPositiveDefinite(f"Gram matrix at level {basis.m} is not positive definite")
    _GRAM_CACHE[key] = gram
    return gram


@dataclass
class OrthonormalFrame:
    """An orthonormal basis of the section space: transform C with C* G C = I."""

    basis: SectionBasis
    transform: np.ndarray
    gram: np.ndarray
    _eval_cache: dict = field(default_factory=dict, repr=False)

    @property
    def model(self):
        return self.basis.model

    @property
    def m(self):
        return self.basis.m

    @property
    def dim(self):
        return self.basis.dim

    def weighted_on_eval(self, z):
        """Weighted values of the orthonormal sections, shape (dim, n)."""
        return self.transform.T @ self.basis.weighted_eval(z)

    def weighted_on_deriv(self, z):
        return self.transform.T @ self.basis.weighted_deriv(z)

    def node_eval(self, rule):
        """weighted_on_eval at the rule nodes, cached per rule."""
        key = (id(rule), "eval")
        if key not in self._eval_cache:
            self._eval_cache[key] = (rule, self.weighted_on_eval(rule.zs_array))
        return self._eval_cache[key][1]

    def node_deriv(self, rule):
        key = (id(rule), "deriv")
        if key not in self._eval_cache:
            self._eval_cache[key] = (rule, self.weighted_on_deriv(rule.zs_array))
        return self._eval_cache[key][1]


def orthonormalize(basis, gram):
    """Frame from the inverse upper Cholesky factor of the Gram matrix."""
    gram = np.asarray(gram, dtype=complex)
    if gram.shape != (basis.dim, basis.dim):
        raise DimensionMismatch(
            f"Gram shape {gram.shape} does not match dim {basis.dim}"
        )
    try:
        upper = scipy.linalg.cholesky(gram, lower=False)
    except scipy.linalg.LinAlgError:
        raise NotPositiveDefinite("Cholesky factorization failed")
    transform = scipy.linalg.solve_triangular(upper, np.eye(basis.dim, dtype=complex))
    residual = np.max(np.abs(transform.conj().T @ gram @ transform - np.eye(basis.dim)))
    if residual > 1e-10:
        raise NotPositiveDefinite(
            f"orthonormalization residual {residual:.3e} exceeds 1e-10"
        )
    return OrthonormalFrame(basis, transform, gram)


def inner_product(frame, rule, a, b):
    """Scalar product of two coefficient vectors, anti-linear in the first.

    The vectors are coefficients in the orthonormal frame; the product is
    evaluated through the quadrature rule, so it doubles as a check that the
    frame really is orthonormal under the discrete measure.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != (frame.dim,) or b.shape != (frame.dim,):
        raise DimensionMismatch(
            f"coefficient vectors must have length {frame.dim}"
        )
    son = frame.node_eval(rule)
    va = son.T @ a
    vb = son.T @ b
    return complex(np.sum(rule.weights_array * va.conj() * vb))
