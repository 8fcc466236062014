"""Extracting the star product term by term from finite matrices.

The product T_f T_g is not a Toeplitz matrix, but its defect has an
asymptotic expansion whose first coefficient encodes the Poisson bracket.
This script fits that coefficient numerically and verifies its algebra.

Run with: python3 demos/star_product_extraction.py
"""

import numpy as np

from btquant import poisson_bracket, sample_chart_points, standard_observable
from btquant import make_model
from btquant.asymptotics import extract_c1


def main():
    sphere = make_model("sphere")
    x1 = standard_observable(sphere, "x1")
    x3 = standard_observable(sphere, "x3")
    rng = np.random.default_rng(11)
    probes = sample_chart_points(sphere, 6, rng, u_max=0.8)

    report = extract_c1(x3, x1, probes=probes, fit_order=7,
                        sass_levels=(8, 12, 16, 24, 32))

    # The antisymmetric part of the fitted coefficient must reproduce the
    # bracket with a factor -i.
    c1_fg = report.summary["c1_fg"]
    c1_gf = report.summary["c1_gf"]
    bracket = np.asarray(poisson_bracket(sphere, x3, x1).eval(probes))
    print("probe        i(C1(f,g) - C1(g,f))      (x3,x1 bracket)")
    for z, a, b, t in zip(probes, c1_fg, c1_gf, bracket):
        lhs = 1j * (a - b)
        print(f"  {z:+.3f}   {lhs.real:+.8f}   {t.real:+.8f}")
    print(f"\nantisymmetry deviation: {report.summary['antisym_dev']:.3e}")
    print(f"fit residual:           {report.summary['fit_residual']:.3e}")

    # Subtracting the fitted term from the defect should leave a remainder
    # one order smaller; its measured slope confirms the expansion really
    # gained an order.
    print("\nsecond-order remainder:")
    for m, r in zip(report.summary["sass_levels"], report.summary["sass_residuals"]):
        print(f"  m = {m:3d}   {r:.6e}")
    slope_rows = [r for r in report.rows if r.quantity == "order2_slope"]
    print(f"remainder slope: {slope_rows[0].value.real:.4f} (want <= -1.9)")
    print(f"overall verdict: {'PASS' if report.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
