"""Coherent states: reproducing kernels, the density function, and the
metric the projective embedding pulls back.

Run with: python3 demos/coherent_states_tour.py
"""

import numpy as np

from btquant import (
    bergman_kernel,
    berezin_transform,
    epsilon,
    kernel_diagonal,
    pullback_fs_density,
    sample_chart_points,
    standard_observable,
    toeplitz,
    trace,
    trace_via_symbol,
)
from btquant import make_model
from btquant.asymptotics import level_frame


def main():
    sphere = make_model("sphere")
    m = 12
    frame, rule = level_frame(sphere, m)
    rng = np.random.default_rng(3)
    pts = sample_chart_points(sphere, 4, rng, u_max=0.8)

    # On the sphere every point looks the same, so the coherent density is
    # the constant dim/vol.
    print(f"epsilon at random points (target {(m + 1) / (2 * np.pi):.8f}):")
    for z in pts:
        print(f"  {epsilon(frame, rule, z):.8f}")

    # The kernel diagonal is that same density; off the diagonal the kernel
    # decays with the distance between the points.
    z0, z1 = pts[0], pts[1]
    print(f"\n|B(x,y)|^2 / (u(x) u(y)) for two random points: "
          f"{abs(bergman_kernel(frame, z0, z1))**2 / (kernel_diagonal(frame, z0) * kernel_diagonal(frame, z1)):.6f}")

    # The Berezin transform averages a symbol against the coherent family;
    # for the height function it is an exact contraction by m/(m+2).
    x3 = standard_observable(sphere, "x3")
    z = pts[2]
    print(f"\nI_m(x3) at a probe: {berezin_transform(frame, rule, x3, z).real:+.8f}")
    print(f"(m/(m+2)) x3:       {m / (m + 2) * x3.eval(z).real:+.8f}")

    # Traces can be computed either from the matrix or from its symbol.
    t = toeplitz(frame, rule, x3 * x3)
    print(f"\ntrace from matrix: {trace(t).real:.10f}")
    print(f"trace from symbol: {trace_via_symbol(t, rule).real:.10f}")

    # The coherent embedding into projective space pulls the ambient metric
    # back to m times the base metric, up to curvature corrections that die
    # with m; on the sphere they vanish identically.
    dens = pullback_fs_density(frame, pts)
    base = m * sphere.kahler_density(pts).real
    print(f"\npullback density / (m * metric): "
          f"{np.array2string(dens / base, precision=8)}")


if __name__ == "__main__":
    main()
