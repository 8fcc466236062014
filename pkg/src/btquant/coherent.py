"""Coherent vectors, Bergman kernel, Berezin symbols and transform.

The coherent vector at x is anchored at the unit-norm covector over x, so
its coefficients in the orthonormal frame are conj(psi_j(x)) with
psi_j = h^{m/2} sigma_j the weighted orthonormal sections.  Under this
anchor the kernel diagonal u_m(x) = <e_x, e_x> coincides with Rawnsley's
epsilon function, and on the sphere both are the constant (m+1)/(2 pi).
"""

from dataclasses import dataclass

import numpy as np

from .errors import KernelZero, NonFiniteLog, UnderResolved
from .geometry import ChartPoint, ModelKind, as_complex
from .operators import OperatorMatrix, toeplitz

# Relative floor for two-point denominators; the kernel decays exponentially
# off-diagonal, so anything this small carries no usable phase information.
KERNEL_FLOOR = 1e-12


@dataclass
class CoherentVector:
    """Coefficients of the coherent vector e_x in the orthonormal frame."""

    frame: object
    anchor: ChartPoint
    coeffs: np.ndarray

    @property
    def m(self):
        return self.frame.m

    def norm_squared(self):
        return float(np.vdot(self.coeffs, self.coeffs).real)


@dataclass
class SymbolField:
    """A pointwise-computable scalar field on the model (symbol, epsilon, ...)."""

    m: int
    label: str
    fn: object

    def eval(self, x):
        return self.fn(x)

    __call__ = eval


def _anchor_point(frame, x):
    z = as_complex(x)
    if frame.model.kind is ModelKind.TORUS:
        z = complex(frame.model.reduce(z))
    return z


def _weighted_at(frame, x):
    """psi_j(x) for a single point, shape (dim,)."""
    z = _anchor_point(frame, x)
    return frame.weighted_on_eval(np.array([z]))[:, 0]


def coherent_vector(frame, x):
    """Coherent vector at x; coeffs[j] = conj(psi_j(x))."""
    z = _anchor_point(frame, x)
    psi = _weighted_at(frame, x)
    coeffs = psi.conj()
    norm2 = float(np.vdot(coeffs, coeffs).real)
    if not norm2 > 0.0:
        raise NonFiniteLog(f"coherent vector vanishes at {z}")
    return CoherentVector(frame, ChartPoint(z), coeffs)


def bergman_kernel(frame, x, y):
    """B_m(x, y) = <e_x, e_y> = sum_j psi_j(x) conj(psi_j(y))."""
    cx = coherent_vector(frame, x).coeffs
    cy = coherent_vector(frame, y).coeffs
    return complex(np.vdot(cx, cy))


def kernel_diagonal(frame, x):
    """u_m(x) = B_m(x, x), real and positive."""
    psi = _weighted_at(frame, x)
    return float(np.vdot(psi, psi).real)


def kernel_pair_product(frame, x, y):
    """v_m(x, y) = B_m(x, y) B_m(y, x) = |B_m(x, y)|^2."""
    return abs(bergman_kernel(frame, x, y)) ** 2


def covariant_symbol(a, x):
    """sigma(A)(x) = <e_x, A e_x> / <e_x, e_x>."""
    c = coherent_vector(a.frame, x).coeffs
    den = float(np.vdot(c, c).real)
    return complex(np.vdot(c, a.entries @ c) / den)


def two_point_symbol(a, x, y):
    """sigma(A)(x, y) = <e_x, A e_y> / <e_x, e_y>; raises when the overlap dies."""
    cx = coherent_vector(a.frame, x).coeffs
    cy = coherent_vector(a.frame, y).coeffs
    den = complex(np.vdot(cx, cy))
    floor = KERNEL_FLOOR * float(np.vdot(cx, cx).real)
    if abs(den) <= floor:
        raise KernelZero(
            f"coherent overlap {abs(den):.3e} under floor {floor:.3e} "
            f"between {as_complex(x)} and {as_complex(y)}"
        )
    return complex(np.vdot(cx, a.entries @ cy) / den)


def symbol_field(a):
    """sigma(A) as a SymbolField."""
    return SymbolField(a.m, f"sigma[{a.provenance}]", lambda x: covariant_symbol(a, x))


def epsilon(frame, rule, x):
    """Rawnsley epsilon at x, cross-checked between its two definitions.

    The frame-sum route sum_j h^m |sigma_j|^2 and the coherent-vector route
    h(e_x, e_x)/<e_x, e_x> must agree to 1e-10; `rule` fixes the discrete
    measure the frame was orthonormalized under.
    """
    del rule  # the value is pointwise; the rule already shaped the frame
    psi = _weighted_at(frame, x)
    frame_sum = float(np.vdot(psi, psi).real)
    coeffs = psi.conj()
    # e_x evaluated at x through its own coefficients, then metric-normalized.
    section_value = complex(coeffs @ psi)
    norm2 = float(np.vdot(coeffs, coeffs).real)
    coherent_route = abs(section_value) ** 2 / norm2
    if abs(coherent_route - frame_sum) > 1e-10 * max(1.0, frame_sum):
        raise NonFiniteLog(
            f"epsilon routes disagree: {frame_sum!r} vs {coherent_route!r}"
        )
    return frame_sum


def epsilon_field(frame, rule):
    return SymbolField(frame.m, "epsilon", lambda x: epsilon(frame, rule, x))


def berezin_transform(frame, rule, f, x, method="symbol"):
    """I_m(f)(x) by the symbol route or the kernel-integral route."""
    method = str(method).lower()
    if method == "symbol":
        return covariant_symbol(toeplitz(frame, rule, f), x)
    if method != "integral":
        raise ValueError(f"unknown Berezin transform method {method!r}")
    psi = _weighted_at(frame, x)
    son = frame.node_eval(rule)
    overlap = psi @ son.conj()  # B_m(x, y_n) over the nodes
    u_x = float(np.vdot(psi, psi).real)
    fvals = np.asarray(f.eval(rule.zs_array), dtype=complex)
    value = np.sum(rule.weights_array * np.abs(overlap) ** 2 * fvals) / u_x
    return complex(value)


def contravariant_reconstruct(frame, rule, f):
    """Operator with contravariant symbol f: integral of f P_x epsilon Omega.

    P_x is the coherent projector at x.  By construction this reproduces the
    Toeplitz matrix of f up to quadrature error; it is assembled from the
    projector formula, not by calling `toeplitz`, so the agreement is a real
    cross-check.
    """
    son = frame.node_eval(rule)
    w = rule.weights_array
    fvals = np.asarray(f.eval(rule.zs_array), dtype=complex)
    u = np.sum((son.conj() * son).real, axis=0)
    eps = u  # frame-sum form of epsilon at the nodes
    scale = w * fvals * eps / u
    entries = (son.conj() * scale[None, :]) @ son.T
    return OperatorMatrix(frame, rule, entries, f"contra[{f.label}]")


def _diag_symbol_times_u(a, rule):
    """sigma(A)(y_n) u_m(y_n) over the nodes of the rule."""
    son = a.frame.node_eval(rule)
    return np.sum((a.entries @ son.conj()) * son, axis=0)


def trace_via_symbol(a, rule=None):
    """integral of sigma(A) epsilon Omega; equals trace(A) within quadrature."""
    rule = rule if rule is not None else a.rule
    values = _diag_symbol_times_u(a, rule)
    return complex(np.sum(rule.weights_array * values))


def adjointness_check(a, f, rule=None):
    """|<A, T_f>_HS - <sigma(A), f>_eps| with the epsilon-weighted L2 product."""
    rule = rule if rule is not None else a.rule
    t = toeplitz(a.frame, rule, f)
    lhs = complex(np.trace(a.entries.conj().T @ t.entries))
    sym_u = _diag_symbol_times_u(a, rule)  # sigma(A) * u, u = epsilon
    fvals = np.asarray(f.eval(rule.zs_array), dtype=complex)
    rhs = complex(np.sum(rule.weights_array * sym_u.conj() * fvals))
    return abs(lhs - rhs)


def twisted_product(frame, rule, f, g, x, method="matrix", tolerance=1e-8):
    """R_m(f, g)(x) = sigma(T_f T_g)(x).

    The "integral" method composes the two-point symbols against the
    two-point function psi_m(x, y) epsilon(y) Omega(y), skipping nodes whose
    coherent overlap with x is under the kernel floor; if the skipped terms
    could carry more than `tolerance`, KernelZero is raised.
    """
    tf = toeplitz(frame, rule, f)
    tg = toeplitz(frame, rule, g)
    method = str(method).lower()
    if method == "matrix":
        return covariant_symbol(tf @ tg, x)
    if method != "integral":
        raise ValueError(f"unknown twisted product method {method!r}")

    psi_x = _weighted_at(frame, x)
    cx = psi_x.conj()
    u_x = float(np.vdot(psi_x, psi_x).real)
    son = frame.node_eval(rule)
    w = rule.weights_array
    overlap = psi_x @ son.conj()  # B(x, y_n)
    u_y = np.sum((son.conj() * son).real, axis=0)
    # <e_x, T_f e_y> and <e_y, T_g e_x> over the nodes.
    num_left = psi_x @ (tf.entries @ son.conj())
    num_right = son.T @ (tg.entries @ cx)
    keep = np.abs(overlap) > KERNEL_FLOOR * u_x
    # sigma(Tf)(x,y) sigma(Tg)(y,x) psi(x,y) eps(y): the overlap denominators
    # cancel against v_m, leaving num_left num_right / u_x.
    sym_left = num_left[keep] / overlap[keep]
    sym_right = num_right[keep] / overlap[keep].conj()
    two_point = (np.abs(overlap[keep]) ** 2) / (u_x * u_y[keep])
    value = np.sum(w[keep] * sym_left * sym_right * two_point * u_y[keep])
    skipped = np.sum(w[~keep] * np.abs(num_left[~keep] * num_right[~keep])) / u_x
    if skipped > tolerance:
        raise KernelZero(
            f"skipped quadrature mass {skipped:.3e} exceeds tolerance {tolerance:.3e}"
        )
    return complex(value)


def embedding_point(frame, x):
    """Projective coordinates of x under the coherent-state embedding.

    Weighted orthonormal section values at x, normalized to unit length;
    defined up to a phase and overall scale.
    """
    psi = _weighted_at(frame, x)
    norm = np.linalg.norm(psi)
    if not norm > 0.0:
        raise NonFiniteLog(f"all sections vanish at {as_complex(x)}")
    return psi / norm


# Central-difference step for the kernel-diagonal log; 1e-4 drowns the
# second difference in rounding noise at the 1e-6 acceptance scale, 1e-3
# keeps both truncation and noise near 1e-9.
PULLBACK_STEP = 1e-3


def pullback_fs_density(frame, x, step=PULLBACK_STEP):
    """Density p with (phi_m)* omega_FS = p(x) i dz dzbar.

    p = m g + d_z d_zbar log u_m, the second term from a compact nine-point
    stencil on log u_m in the chart.  Accepts one point or an array of
    points; the return shape matches.
    """
    scalar = np.ndim(x) == 0 and not isinstance(x, (list, tuple, np.ndarray))
    if scalar:
        zs = np.array([_anchor_point(frame, x)])
    else:
        zs = np.asarray([as_complex(p) for p in np.asarray(x).ravel()],
                        dtype=complex)
        if frame.model.kind is ModelKind.TORUS:
            zs = frame.model.reduce(zs)
    offsets = np.array(
        [0.0, step, -step, 1j * step, -1j * step,
         step + 1j * step, step - 1j * step, -step + 1j * step, -step - 1j * step]
    )
    pts = (zs[None, :] + offsets[:, None]).ravel()
    son = frame.weighted_on_eval(pts)
    u = np.sum((son.conj() * son).real, axis=0).reshape(offsets.size, zs.size)
    if not np.all(np.isfinite(u)) or np.any(u <= 0.0):
        raise NonFiniteLog("kernel diagonal not positive on the stencil")
    logs = np.log(u)
    cross = logs[1] + logs[2] + logs[3] + logs[4]
    diag = logs[5] + logs[6] + logs[7] + logs[8]
    lap = (4.0 * cross + diag - 20.0 * logs[0]) / (6.0 * step**2)
    p = frame.m * frame.model.kahler_density(zs).real + 0.25 * lap
    return float(p[0]) if scalar else p.reshape(np.shape(x))
