"""Batch front door: JSON config in, CSV/JSON verification report out.

Usage:
    btquant --config run.json [--out report.csv] [--format csv|json]
            [--seed N] [--verbose]

The config selects a model, a level set, and a list of experiments; every
experiment contributes rows (experiment, model, level, quantity, value_re,
value_im, error, pass).  Exit status is 0 exactly when every row passes.
"""

import argparse
import csv
import io
import json
import sys
import time

import numpy as np

from . import __version__
from . import asymptotics as asy
from . import coherent
from .errors import ConfigInvalid, IoError, QuantizationError, RankDeficient
from .geometry import (
    ModelKind,
    make_model,
    sample_chart_points,
    standard_observable,
)
from .operators import geometric_quantization, operator_norm, toeplitz, tuynman_residual

SELECTORS = ("norm", "dirac", "product", "star_c1", "trace", "berezin",
             "epsilon", "tuynman", "surjectivity", "pullback", "adjointness",
             "contravariant")

TUYNMAN_SCAN = (0.25, 0.5, 1.0, 2.0, 4.0)


# ---------------------------------------------------------------------------
# Config parsing


def _require(condition, field, detail):
    if not condition:
        raise ConfigInvalid(f"{field}: {detail}", field=field)


def _parse_model(spec):
    _require(isinstance(spec, dict), "model", "must be an object")
    kind = spec.get("kind")
    _require(kind in ("sphere", "torus"), "model.kind",
             "must be 'sphere' or 'torus'")
    if kind == "sphere":
        _require("tau" not in spec, "model.tau", "only valid for the torus")
        return make_model(ModelKind.SPHERE)
    tau = spec.get("tau", [0.0, 1.0])
    _require(isinstance(tau, (list, tuple)) and len(tau) == 2
             and all(isinstance(v, (int, float)) for v in tau),
             "model.tau", "must be a [re, im] pair")
    _require(tau[1] > 0, "model.tau", "imaginary part must be positive")
    return make_model(ModelKind.TORUS, tau=complex(tau[0], tau[1]))


def _parse_observable(model, text, field):
    """Observable strings: coordinate/Fourier names, '^' powers, '*' products."""
    _require(isinstance(text, str) and text.strip(), field,
             "must be a nonempty string")
    result = None
    for part in text.split("*"):
        part = part.strip()
        if "^" in part and not part.startswith(("f_", "re f_", "im f_")):
            base_txt, _, exp_txt = part.partition("^")
            _require(exp_txt.isdigit() and int(exp_txt) >= 1, field,
                     f"bad exponent in {part!r}")
            base, power = base_txt.strip(), int(exp_txt)
        else:
            base, power = part, 1
        try:
            if base.replace(".", "", 1).replace("-", "", 1).isdigit():
                factor = standard_observable(model, float(base))
            else:
                factor = standard_observable(model, base)
        except QuantizationError as exc:
            raise ConfigInvalid(f"{field}: {exc}", field=field) from exc
        for _ in range(power):
            result = factor if result is None else result * factor
    return result


_KNOWN_KEYS = {"model", "levels", "resolution", "observables", "experiments",
               "tolerance", "fit_order", "probe_count", "seed", "output",
               "format"}


class ExperimentConfig:
    """Validated run description; see the module docstring for the schema."""

    def __init__(self, raw):
        _require(isinstance(raw, dict), "config", "top level must be an object")
        for key in raw:
            _require(key in _KNOWN_KEYS, key, "unknown field")
        self.raw = raw
        self.model = _parse_model(raw.get("model", {"kind": "sphere"}))

        levels = raw.get("levels")
        if levels is None:
            levels = list(asy.default_levels(self.model))
        _require(isinstance(levels, list) and levels
                 and all(isinstance(m, int) and m >= 1 for m in levels)
                 and all(b > a for a, b in zip(levels, levels[1:])),
                 "levels", "must be a nonempty ascending list of integers >= 1")
        self.levels = tuple(levels)

        self.resolution = raw.get("resolution")
        if self.resolution is not None:
            _require(isinstance(self.resolution, int) and self.resolution >= 8,
                     "resolution", "must be an integer >= 8")

        self.tolerance = raw.get("tolerance", 1e-7)
        _require(isinstance(self.tolerance, float) and 0 < self.tolerance < 1,
                 "tolerance", "must lie in (0, 1)")

        self.fit_order = raw.get("fit_order", 3)
        _require(isinstance(self.fit_order, int) and self.fit_order >= 1,
                 "fit_order", "must be an integer >= 1")

        self.probe_count = raw.get("probe_count", 20)
        _require(isinstance(self.probe_count, int) and self.probe_count >= 1,
                 "probe_count", "must be an integer >= 1")

        self.seed = raw.get("seed", 0)
        _require(isinstance(self.seed, int) and self.seed >= 0,
                 "seed", "must be a nonnegative integer")

        self.output = raw.get("output")
        self.format = raw.get("format", "csv")
        _require(self.format in ("csv", "json"), "format",
                 "must be 'csv' or 'json'")

        names = raw.get("observables")
        if names is None:
            if self.model.kind is ModelKind.SPHERE:
                names = ["x1", "x3"]
            else:
                names = ["re f_{1,0}"]
        _require(isinstance(names, list) and names, "observables",
                 "must be a nonempty list")
        self.observables = [
            _parse_observable(self.model, txt, f"observables[{i}]")
            for i, txt in enumerate(names)
        ]

        experiments = raw.get("experiments")
        if experiments is None:
            experiments = default_experiments(self.model)
        _require(isinstance(experiments, list) and experiments,
                 "experiments", "must be a nonempty list")
        self.experiments = []
        for i, entry in enumerate(experiments):
            field = f"experiments[{i}]"
            if isinstance(entry, str):
                entry = {"name": entry}
            _require(isinstance(entry, dict), field,
                     "must be a name or an object with 'name'")
            name = entry.get("name")
            _require(name in SELECTORS, field,
                     f"unknown experiment {name!r}; choose from {sorted(SELECTORS)}")
            self.experiments.append(dict(entry))


def default_experiments(model):
    """The all-green CI set for one model (every criterion-backed check)."""
    if model.kind is ModelKind.SPHERE:
        return [
            "norm",
            {"name": "dirac", "f": "x3", "g": "x1"},
            {"name": "product", "factors": ["x3", "x1"]},
            {"name": "product", "factors": ["x1", "x2", "x3"]},
            {"name": "star_c1", "f": "x3", "g": "x1", "fit_order": 7,
             "sass_levels": [8, 12, 16, 24, 32]},
            {"name": "trace", "observables": ["1", "x3^2"]},
            {"name": "berezin", "observables": ["x3"]},
            "epsilon",
            "tuynman",
            {"name": "surjectivity", "levels": [1, 2, 3]},
            "pullback",
            "adjointness",
            {"name": "contravariant"},
        ]
    return [
        "norm",
        {"name": "dirac", "f": "re f_{1,0}", "g": "im f_{0,1}"},
        {"name": "product", "factors": ["re f_{1,0}", "im f_{0,1}"],
         "levels": [8, 12, 16, 24, 32]},
        {"name": "trace", "observables": ["re f_{1,0}"]},
        {"name": "berezin", "observables": ["re f_{1,0}"]},
        "epsilon",
        "tuynman",
        {"name": "surjectivity", "levels": [2, 3]},
        "pullback",
        "adjointness",
        "contravariant",
    ]


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config: not valid JSON ({exc})", field="config")
    return ExperimentConfig(raw)


# ---------------------------------------------------------------------------
# Experiment runners


def _exp_levels(config, params, cap=None, floor=None):
    levels = params.get("levels", list(config.levels))
    _require(isinstance(levels, list) and levels
             and all(isinstance(m, int) and m >= 1 for m in levels),
             "experiments.levels", "must be a list of integers >= 1")
    levels = tuple(sorted(levels))
    if cap is not None:
        levels = tuple(m for m in levels if m <= cap) or (min(levels),)
    if floor is not None:
        levels = tuple(m for m in levels if m >= floor) or (max(levels),)
    return levels


def _pair(config, params, defaults):
    f = _parse_observable(config.model, params.get("f", defaults[0]),
                          "experiments.f")
    g = _parse_observable(config.model, params.get("g", defaults[1]),
                          "experiments.g")
    return f, g


def _default_pair(model):
    if model.kind is ModelKind.SPHERE:
        return ("x3", "x1")
    return ("re f_{1,0}", "im f_{0,1}")


def _run_norm(config, params, probes):
    rows = []
    for obs in config.observables:
        rep = asy.check_norm_limit(obs, _exp_levels(config, params),
                                   config.resolution)
        rows.extend(rep.rows)
    return rows


def _run_dirac(config, params, probes):
    f, g = _pair(config, params, _default_pair(config.model))
    rep = asy.check_dirac(f, g, _exp_levels(config, params), config.resolution)
    return rep.rows


def _run_product(config, params, probes):
    names = params.get("factors")
    if names is None:
        names = list(_default_pair(config.model))
    factors = [_parse_observable(config.model, n, "experiments.factors")
               for n in names]
    rep = asy.check_product(factors, _exp_levels(config, params),
                            config.resolution)
    return rep.rows


def _run_star_c1(config, params, probes):
    f, g = _pair(config, params, _default_pair(config.model))
    sass = params.get("sass_levels")
    rep = asy.extract_c1(
        f, g, _exp_levels(config, params), probes, config.resolution,
        fit_order=params.get("fit_order", config.fit_order),
        antisym_tol=params.get("antisym_tol", 1e-3),
        sass_levels=tuple(sass) if sass else None,
    )
    return rep.rows


def _run_trace(config, params, probes):
    names = params.get("observables")
    if names is not None:
        obs_list = [_parse_observable(config.model, n, "experiments.observables")
                    for n in names]
    else:
        obs_list = config.observables
    rows = []
    for obs in obs_list:
        rep = asy.check_trace_expansion(obs, _exp_levels(config, params),
                                        config.resolution,
                                        fit_order=config.fit_order)
        rows.extend(rep.rows)
    return rows


def _run_berezin(config, params, probes):
    names = params.get("observables")
    if names is not None:
        obs_list = [_parse_observable(config.model, n, "experiments.observables")
                    for n in names]
    else:
        obs_list = config.observables
    rows = []
    for obs in obs_list:
        rep = asy.check_berezin_expansion(obs, _exp_levels(config, params),
                                          probes, config.resolution,
                                          fit_order=config.fit_order)
        rows.extend(rep.rows)
    return rows


def _run_epsilon(config, params, probes):
    model = config.model
    rows = []
    min_m = 2 if model.kind is ModelKind.TORUS else 1
    for m in _exp_levels(config, params, floor=min_m):
        frame, rule = asy.level_frame(model, m, config.resolution)
        eps = np.array([coherent.epsilon(frame, rule, z) for z in probes])
        spread = float(np.max(eps) - np.min(eps))
        son = frame.weighted_on_eval(rule.zs_array)
        eps_nodes = np.sum((son.conj() * son).real, axis=0)
        integral = float(np.dot(rule.weights_array, eps_nodes))
        rep = asy.Report("epsilon", model.kind.value)
        if model.kind is ModelKind.SPHERE:
            target = (m + 1) / (2.0 * np.pi)
            dev = float(np.max(np.abs(eps - target)))
            rep.add(m, "spread", spread, error=1e-10, passed=spread <= 1e-10)
            rep.add(m, "value_dev", dev, error=1e-10, passed=dev <= 1e-10)
        else:
            rep.add(m, "spread", spread, passed=True)
        int_dev = abs(integral - frame.dim)
        rep.add(m, "integral_dev", int_dev, error=1e-8, passed=int_dev <= 1e-8)
        rows.extend(rep.rows)
    return rows


def _run_tuynman(config, params, probes):
    model = config.model
    tol = params.get("tolerance", config.tolerance)
    names = ("1", "x1", "x2", "x3") if model.kind is ModelKind.SPHERE else \
        ("1", "re f_{1,0}", "im f_{0,1}")
    obs = [_parse_observable(model, n, "experiments.observables") for n in names]
    min_m = 2 if model.kind is ModelKind.TORUS else 1
    levels = _exp_levels(config, params, cap=20, floor=min_m)
    rep = asy.Report("tuynman", model.kind.value)
    worst = {c: 0.0 for c in TUYNMAN_SCAN}
    for m in levels:
        frame, rule = asy.level_frame(model, m, config.resolution)
        for f in obs:
            for c in TUYNMAN_SCAN:
                r = tuynman_residual(frame, rule, f, c)
                worst[c] = max(worst[c], r)
        best_c = min(TUYNMAN_SCAN, key=lambda c: worst[c])
        rep.add(m, "best_residual", worst[best_c], error=tol, passed=True)
    best_c = min(TUYNMAN_SCAN, key=lambda c: worst[c])
    rep.add(0, "c_star", best_c, error=worst[best_c],
            passed=worst[best_c] < tol)
    return rep.rows


def _run_surjectivity(config, params, probes):
    model = config.model
    rows = []
    for m in _exp_levels(config, params, cap=6):
        if model.kind is ModelKind.SPHERE:
            family = asy.sphere_harmonic_family(model, m)
        else:
            family = [standard_observable(model, ("fourier", k, l))
                      for k in range(m) for l in range(m)]
        try:
            rep = asy.surjectivity_rank(m, family, config.resolution,
                                        seed=config.seed)
            rows.extend(rep.rows)
        except RankDeficient as exc:
            rep = asy.Report("surjectivity", model.kind.value)
            rep.add(m, "rank", exc.rank, error=float(exc.expected), passed=False)
            rows.extend(rep.rows)
    return rows


def _run_pullback(config, params, probes):
    model = config.model
    tol = params.get("tolerance", 1e-6)
    rows = []
    # Below m = 4 the torus correction's harmonics alias onto the grid mean
    # at the default resolution, so the sweep starts where the check is sharp.
    min_m = 4 if model.kind is ModelKind.TORUS else 1
    for m in _exp_levels(config, params, cap=16, floor=min_m):
        frame, rule = asy.level_frame(model, m, config.resolution)
        rep = asy.Report("pullback", model.kind.value)
        if model.kind is ModelKind.SPHERE:
            dens = coherent.pullback_fs_density(frame, probes)
            target = m * model.kahler_density(probes)
            dev = float(np.max(np.abs(dens - target) / target))
            rep.add(m, "relative_dev", dev, error=tol, passed=dev <= tol)
        else:
            zs = rule.zs_array
            dens = coherent.pullback_fs_density(frame, zs)
            corr = dens - m * model.kahler_density(zs)
            mean = float(np.dot(rule.weights_array, corr)
                         / np.sum(rule.weights_array))
            rep.add(m, "correction_mean", mean, error=tol,
                    passed=abs(mean) <= tol)
            rep.add(m, "correction_max", float(np.max(np.abs(corr))),
                    passed=True)
        rows.extend(rep.rows)
    return rows


def _run_adjointness(config, params, probes):
    model = config.model
    tol = params.get("tolerance", config.tolerance)
    rows = []
    min_m = 2 if model.kind is ModelKind.TORUS else 1
    if model.kind is ModelKind.SPHERE:
        op_specs = [("T[x3]", ("x3",)), ("T[x1]T[x2]", ("x1", "x2"))]
        sym_names = ("x1", "x3")
    else:
        op_specs = [("T[re f10]", ("re f_{1,0}",))]
        sym_names = ("re f_{1,0}", "im f_{0,1}")
    syms = [_parse_observable(model, n, "experiments.observables")
            for n in sym_names]
    for m in _exp_levels(config, params, floor=min_m):
        frame, rule = asy.level_frame(model, m, config.resolution)
        rep = asy.Report("adjointness", model.kind.value)
        for label, names in op_specs:
            mats = [toeplitz(frame, rule,
                             _parse_observable(model, n, "experiments.observables"))
                    for n in names]
            a = mats[0]
            for extra in mats[1:]:
                a = a @ extra
            for f in syms:
                dev = coherent.adjointness_check(a, f)
                rep.add(m, f"dev[{label},{f.label}]", dev, error=tol,
                        passed=dev <= tol)
        rows.extend(rep.rows)
    return rows


def _run_contravariant(config, params, probes):
    model = config.model
    tol = params.get("tolerance", config.tolerance)
    rows = []
    min_m = 2 if model.kind is ModelKind.TORUS else 1
    for m in _exp_levels(config, params, cap=12, floor=min_m):
        frame, rule = asy.level_frame(model, m, config.resolution)
        rep = asy.Report("contravariant", model.kind.value)
        for obs in config.observables:
            recon = coherent.contravariant_reconstruct(frame, rule, obs)
            direct = toeplitz(frame, rule, obs)
            dev = operator_norm(recon.entries - direct.entries)
            rep.add(m, f"dev[{obs.label}]", dev, error=tol, passed=dev <= tol)
        rows.extend(rep.rows)
    return rows


_RUNNERS = {
    "norm": _run_norm, "dirac": _run_dirac, "product": _run_product,
    "star_c1": _run_star_c1, "trace": _run_trace, "berezin": _run_berezin,
    "epsilon": _run_epsilon, "tuynman": _run_tuynman,
    "surjectivity": _run_surjectivity, "pullback": _run_pullback,
    "adjointness": _run_adjointness, "contravariant": _run_contravariant,
}


class ReportSet:
    def __init__(self, rows, metadata):
        self.rows = rows
        self.metadata = metadata

    @property
    def passed(self):
        return all(row.passed for row in self.rows)


def run_experiment(config):
    """Run every configured experiment; rows in config order, levels ascending."""
    t0 = time.perf_counter()
    rows = []
    for index, entry in enumerate(config.experiments):
        name = entry["name"]
        params = {k: v for k, v in entry.items() if k != "name"}
        rng = np.random.default_rng([config.seed, index])
        probes = sample_chart_points(
            config.model, config.probe_count, rng,
            u_max=0.9 if config.model.kind is ModelKind.SPHERE else 1.0)
        try:
            exp_rows = _RUNNERS[name](config, params, probes)
        except ConfigInvalid:
            raise
        except QuantizationError as exc:
            raise QuantizationError(
                f"experiment '{name}' (index {index}) failed: {exc}") from exc
        rows.extend(sorted(exp_rows, key=lambda r: r.level))
    metadata = {
        "version": __version__,
        "config": config.raw,
        "wall_time_s": time.perf_counter() - t0,
    }
    return ReportSet(rows, metadata)


# ---------------------------------------------------------------------------
# Emission

CSV_COLUMNS = ("experiment", "model", "level", "quantity",
               "value_re", "value_im", "error", "pass")


def _row_record(row):
    return {
        "experiment": row.experiment,
        "model": row.model,
        "level": row.level,
        "quantity": row.quantity,
        "value_re": row.value.real,
        "value_im": row.value.imag,
        "error": row.error,
        "pass": row.passed,
    }


def emit_report(report_set, fmt, path):
    """Write rows as CSV or JSON; '-' or None writes to stdout."""
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in report_set.rows:
            rec = _row_record(row)
            writer.writerow([
                rec["experiment"], rec["model"], rec["level"], rec["quantity"],
                repr(rec["value_re"]), repr(rec["value_im"]),
                repr(rec["error"]), "true" if rec["pass"] else "false",
            ])
        text = buffer.getvalue()
    elif fmt == "json":
        payload = {
            "metadata": report_set.metadata,
            "rows": [_row_record(row) for row in report_set.rows],
        }
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        raise ConfigInvalid(f"format: unknown format {fmt!r}", field="format")

    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc


def load_report(path):
    """Re-ingest a JSON report: (rows, metadata) with rows as ReportRow."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc
    rows = [
        asy.ReportRow(r["experiment"], r["model"], r["level"], r["quantity"],
                      complex(r["value_re"], r["value_im"]), r["error"],
                      r["pass"])
        for r in payload["rows"]
    ]
    return rows, payload["metadata"]


# ---------------------------------------------------------------------------
# Entry point


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="btquant",
        description="Run quantization verification experiments from a JSON config.")
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--out", default=None,
                        help="output path (default: config 'output' or stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output format (default: config 'format' or csv)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--verbose", action="store_true",
                        help="print one line per report row to stderr")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.raw["seed"] = args.seed
            config.seed = args.seed
        report_set = run_experiment(config)
        if args.verbose:
            for row in report_set.rows:
                status = "PASS" if row.passed else "FAIL"
                print(f"{status} {row.experiment}/{row.model} m={row.level} "
                      f"{row.quantity} = {row.value.real:.6g}", file=sys.stderr)
        out = args.out if args.out is not None else config.output
        fmt = args.format if args.format is not None else config.format
        emit_report(report_set, fmt, out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except IoError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except QuantizationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0 if report_set.passed else 1


if __name__ == "__main__":
    sys.exit(main())
