"""Watching the classical limit arrive: norms, commutators, products.

Run with: python3 demos/semiclassical_limits.py
"""

from btquant import standard_observable
from btquant import make_model
from btquant.asymptotics import check_dirac, check_norm_limit, check_product


def _show(report, title):
    print(f"\n{title}")
    levels = report.summary["levels"]
    key = "residuals" if "residuals" in report.summary else "gaps"
    for m, r in zip(levels, report.summary[key]):
        print(f"  m = {m:3d}   {r:.6e}")
    print(f"  fitted decay order {report.summary['slope']:.4f}")
    print(f"  overall verdict: {'PASS' if report.passed else 'FAIL'}")


def main():
    sphere = make_model("sphere")
    x1 = standard_observable(sphere, "x1")
    x2 = standard_observable(sphere, "x2")
    x3 = standard_observable(sphere, "x3")

    # The operator norm climbs to the sup norm of the symbol like 1/m.
    _show(check_norm_limit(x3), "sup|f| - ||T_f|| for f = x3")

    # Commutators shrink onto the Poisson bracket at the same rate.  On the
    # sphere the residual is exactly 4m/(m+2)^2, so the numbers below can be
    # checked against a closed form.
    _show(check_dirac(x3, x1), "||m i [T_x3, T_x1] - T_(x3,x1 bracket)||")

    # Products of quantizations converge to the quantized product.
    _show(check_product((x3, x1)), "||T_x3 T_x1 - T_(x3 x1)||")
    _show(check_product((x1, x2, x3)), "three factors x1 x2 x3")


if __name__ == "__main__":
    main()
