"""Command-line front end.

Subcommands: ``check-existence``, ``fit``, ``classify``, ``consistency-exp``
and ``separation-exp``. Settings come from flags and/or a JSON manifest given
with ``--manifest``; flags override manifest values. Every command writes a
JSON report (to ``--out`` or stdout).

Exit codes: 0 success, 1 I/O or parse failure, 2 failed existence check.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .asymptotics import (
    ContaminatedGaussian,
    GaussianLaw,
    ShiftedMixtureSpec,
    UniformBall,
    UniformCube,
    run_consistency_experiment,
    run_separation_experiment,
)
from .em import FitConfig, check_finite_sample_existence, fit
from .exceptions import CSVParseError, EsdMixError, InputDomainError, PreconditionError
from .generators import DensityGenerator
from .mixture import MixtureParams, map_classify

__all__ = ["parse_csv", "dumps_report", "theta_to_dict", "theta_from_dict", "main", "run"]

COMMANDS = ("check-existence", "fit", "classify", "consistency-exp", "separation-exp")

# manifest key -> type; flags share these names with '-' instead of '_'
MANIFEST_KEYS = {
    "command": str,
    "data": str,
    "theta": str,
    "out": str,
    "K": int,
    "gamma": float,
    "model": str,
    "nu": float,
    "starts": int,
    "seed": int,
    "max_iter": int,
    "tol": float,
    "min_weight": float,
    "jobs": int,
    "levels": list,
    "sizes": list,
    "epsilon": float,
    "eta": float,
    "law": str,
    "law_scale": float,
    "xi": list,
    "gap": float,
    "dim": int,
    "n": int,
    "reference_m": int,
    "n_test": int,
}


def parse_csv(path) -> np.ndarray:
    """Read a numeric CSV file into an ``(n, p)`` float array.

    A first row containing any non-numeric cell is treated as a header.
    """
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as err:
        raise CSVParseError(f"cannot read {path}: {err}") from err
    if not rows:
        raise CSVParseError(f"{path}: empty file")

    def _numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    start = 0 if all(_numeric(c) for c in rows[0]) else 1
    body = rows[start:]
    if not body:
        raise CSVParseError(f"{path}: no data rows after header")
    width = len(body[0])
    out = np.empty((len(body), width))
    for i, row in enumerate(body):
        lineno = i + start + 1
        if len(row) != width:
            raise CSVParseError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise CSVParseError(f"{path}: non-numeric value {cell!r} at row {lineno}, column {j + 1}") from None
    return out


def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    s = format(x, ".17g")
    if all(ch in "-0123456789" for ch in s):
        s += ".0"
    return s


def _encode(obj, out: list):
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)) + ": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        out.append("[")
        for i, v in enumerate(seq):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    out: list = []
    _encode(obj, out)
    return "".join(out) + "\n"


def theta_to_dict(theta: MixtureParams) -> dict:
    d = {
        "K": theta.K,
        "model": "t" if theta.gen.is_student_t else "gaussian",
        "pi": theta.weights,
        "mu": theta.means,
        "sigma": theta.covs,
    }
    if theta.gen.is_student_t:
        d["nu"] = theta.gen.nu
    return d


def theta_from_dict(d: dict) -> MixtureParams:
    model = d.get("model", "gaussian")
    gen = DensityGenerator.student_t(d["nu"]) if model == "t" else DensityGenerator.gaussian()
    w = np.asarray(d["pi"], dtype=float)
    return MixtureParams.from_arrays(w / w.sum(), d["mu"], d["sigma"], gen)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="esdmix", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS)
    ap.add_argument("--manifest", help="JSON file with settings (flags win)")
    ap.add_argument("--data", help="input CSV")
    ap.add_argument("--theta", help="fit report whose parameters 'classify' should use")
    ap.add_argument("--out", help="output JSON path (default: stdout)")
    ap.add_argument("--K", type=int)
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--model", choices=("gaussian", "t"))
    ap.add_argument("--nu", type=float)
    ap.add_argument("--starts", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--max-iter", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--min-weight", type=float)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--levels", type=float, nargs="+", help="shift gaps, one per separation level")
    ap.add_argument("--sizes", type=int, nargs="+", help="sample sizes for consistency-exp")
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--eta", type=float)
    ap.add_argument("--law", choices=("gaussian", "uniform_ball", "uniform_cube", "contaminated"))
    ap.add_argument("--law-scale", type=float, help="covariance scale, radius or half-width of the laws")
    ap.add_argument("--xi", type=float, nargs="+")
    ap.add_argument("--gap", type=float, help="shift gap for consistency-exp")
    ap.add_argument("--dim", type=int)
    ap.add_argument("--n", type=int, help="sample size per level for separation-exp")
    ap.add_argument("--reference-m", type=int)
    ap.add_argument("--n-test", type=int)
    return ap


DEFAULTS = {
    "K": 2, "gamma": 100.0, "model": "gaussian", "starts": 10, "seed": 0, "max_iter": 500,
    "tol": 1e-8, "min_weight": 1e-6, "jobs": 1, "epsilon": None, "eta": 0.01,
    "law": "gaussian", "law_scale": 1.0, "xi": None, "gap": 6.0, "dim": 2, "n": 5000,
    "reference_m": None, "n_test": 2000, "sizes": [200, 2000, 20000], "levels": [6, 12, 24, 48],
}


def _merge_settings(args: argparse.Namespace) -> dict:
    settings = {}
    if args.manifest:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
        if not isinstance(manifest, dict):
            raise InputDomainError("manifest must be a JSON object")
        unknown = set(manifest) - set(MANIFEST_KEYS)
        if unknown:
            raise InputDomainError(f"unknown manifest keys: {sorted(unknown)}")
        for key, val in manifest.items():
            typ = MANIFEST_KEYS[key]
            if typ is list:
                if not isinstance(val, list):
                    raise InputDomainError(f"manifest key {key!r} must be a list")
                settings[key] = val
            else:
                try:
                    settings[key] = typ(val)
                except (TypeError, ValueError):
                    raise InputDomainError(f"manifest key {key!r} has invalid value {val!r}") from None
    for key in MANIFEST_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    for key, val in DEFAULTS.items():
        settings.setdefault(key, val)
    if settings.get("command") not in COMMANDS:
        raise InputDomainError(f"command must be one of {COMMANDS}")
    return settings


def _fit_config(s: dict, K=None) -> FitConfig:
    return FitConfig(
        K=int(K if K is not None else s["K"]),
        gamma=float(s["gamma"]),
        model=s["model"],
        nu=s.get("nu"),
        n_starts=int(s["starts"]),
        max_iter=int(s["max_iter"]),
        rel_tol=float(s["tol"]),
        seed=int(s["seed"]),
        min_weight=float(s["min_weight"]),
        n_jobs=int(s["jobs"]),
    )


def _make_laws(s: dict, K: int):
    kind, scale, dim = s["law"], float(s["law_scale"]), int(s["dim"])
    if kind == "gaussian":
        return [GaussianLaw(scale * np.eye(dim)) for _ in range(K)]
    if kind == "uniform_ball":
        return [UniformBall(scale, dim) for _ in range(K)]
    if kind == "uniform_cube":
        return [UniformCube(scale, dim) for _ in range(K)]
    return [ContaminatedGaussian(scale * np.eye(dim), 0.05, 9.0) for _ in range(K)]


def _default_epsilon(s: dict) -> float:
    kind, scale, dim = s["law"], float(s["law_scale"]), int(s["dim"])
    if kind == "uniform_ball":
        return scale * (1 - 0.5 * s["eta"]) ** (1.0 / dim)
    if kind == "uniform_cube":
        return scale * math.sqrt(dim)
    from scipy.stats import chi2

    factor = 9.0 if kind == "contaminated" else 1.0
    return math.sqrt(scale * factor * chi2.ppf(1 - 0.5 * s["eta"], dim))


def _xi(s: dict, K: int):
    xi = s["xi"] if s["xi"] is not None else [1.0 / K] * K
    if len(xi) != K:
        raise InputDomainError(f"--xi needs {K} values")
    return xi


def _cmd_check(s):
    data = parse_csv(s["data"])
    diag = check_finite_sample_existence(data, _fit_config(s))
    return (0 if diag.ok else 2), diag.as_dict()


def _cmd_fit(s):
    data = parse_csv(s["data"])
    cfg = _fit_config(s)
    res = fit(data, cfg)
    report = {"K": cfg.K, "gamma": cfg.gamma, "model": cfg.model}
    if cfg.model == "t":
        report["nu"] = cfg.nu
    report.update({
        "loglik": res.loglik,
        "pi": res.theta.weights,
        "mu": res.theta.means,
        "sigma": res.theta.covs,
        "assignments": res.assignments,
        "n_iter": res.n_iter,
        "converged": res.converged,
        "seed": cfg.seed,
        "start_index": res.start_index,
    })
    return 0, report


def _cmd_classify(s):
    data = parse_csv(s["data"])
    if not s.get("theta"):
        raise InputDomainError("classify needs --theta pointing at a fit report")
    with open(s["theta"]) as fh:
        theta = theta_from_dict(json.load(fh))
    labels = map_classify(data, theta)
    return 0, {"K": theta.K, "assignments": labels}


def _cmd_consistency(s):
    K, dim = int(s["K"]), int(s["dim"])
    eps = s["epsilon"] if s["epsilon"] is not None else _default_epsilon(s)
    spec = ShiftedMixtureSpec.collinear(_make_laws(s, K), _xi(s, K), [float(s["gap"])], eps, s["eta"])
    sizes = [int(v) for v in s["sizes"]]
    ref_m = int(s["reference_m"] or 10 * max(sizes))
    rep = run_consistency_experiment(spec, 0, sizes, _fit_config(s), ref_m, int(s["seed"]))
    return 0, {
        "experiment": "consistency",
        "reference_M": ref_m,
        "seed": int(s["seed"]),
        "validity": rep.validity,
        "reference": None if rep.reference is None else theta_to_dict(rep.reference),
        "reference_loglik": rep.reference_loglik,
        "rows": [vars(r) for r in rep.rows],
    }


def _cmd_separation(s):
    K = int(s["K"])
    gaps = [float(v) for v in s["levels"]]
    eps = s["epsilon"] if s["epsilon"] is not None else _default_epsilon(s)
    spec = ShiftedMixtureSpec.collinear(_make_laws(s, K), _xi(s, K), gaps, eps, s["eta"])
    rep = run_separation_experiment(spec, range(len(gaps)), _fit_config(s), int(s["n"]), int(s["seed"]),
                                    n_test=int(s["n_test"]))
    return 0, {
        "experiment": "separation",
        "epsilon": eps,
        "seed": int(s["seed"]),
        "assumption_ok": rep.assumption_ok,
        "assumption_check": rep.assumption_check,
        "rows": [vars(r) for r in rep.rows],
    }


_HANDLERS = {
    "check-existence": _cmd_check,
    "fit": _cmd_fit,
    "classify": _cmd_classify,
    "consistency-exp": _cmd_consistency,
    "separation-exp": _cmd_separation,
}


def run(settings: dict) -> int:
    """Execute one command from merged settings; writes the report, returns the exit code."""
    try:
        code, report = _HANDLERS[settings["command"]](settings)
    except PreconditionError as err:
        print(f"esdmix: {err}", file=sys.stderr)
        code, report = 2, err.diagnostics.as_dict()
    except (OSError, CSVParseError, json.JSONDecodeError, KeyError) as err:
        print(f"esdmix: {err}", file=sys.stderr)
        return 1
    except EsdMixError as err:
        print(f"esdmix: {err}", file=sys.stderr)
        return 1
    text = dumps_report(report)
    out = settings.get("out")
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command is None and not args.manifest:
        _build_parser().print_usage(sys.stderr)
        return 1
    try:
        settings = _merge_settings(args)
    except (OSError, json.JSONDecodeError, EsdMixError) as err:
        print(f"esdmix: {err}", file=sys.stderr)
        return 1
    return run(settings)


if __name__ == "__main__":
    sys.exit(main())
