"""Command-line front end.

Every command is a pure function of its resolved configuration: floats are
written with 17 significant digits, JSON with sorted keys and no extra
whitespace, lines end in LF. Exit codes: 0 success, 2 domain precondition,
3 configuration error, 4 statistical gate failure, 5 oracle inconsistency.
"""

import argparse
import csv
import json
import math
import os
from pathlib import Path
import sys
import time

import numpy as np

from . import __version__
from .errors import ConfigError, CorrugateError, TooFewSamples
from .geometry import CATALOG, Curve, make_catalog_curve
from .limitlaw import limit_bundle, limit_covariance_matrix, psd_defect, sample_limit
from .metric import MetricSpec, shortness_report
from .montecarlo import (DEFAULT_ENUMERATION_N, ExperimentConfig, all_sign_sequences,
                         build_geometry, enumerate_exact, run_ensemble)
from .stats import covariance_comparison, empirical_moments, ks_gof, rate_fit
from .twist import (build_twisted_map, deterministic_phase, isometry_defect,
                    random_phase, sample_signs, sup_difference, twist_difference, velocity)

SCHEMA = 1
WORKERS_ENV = "CORRUGATE_WORKERS"
KS_ALPHA = 0.01
DEGENERATE_SUP = 1e-12

COMMON_DEFAULTS = {"curve": "helix:a=0.1,b=0.05", "metric": "const:2", "frames": "rmf",
                   "quadrature_order": 16, "out": ".", "timing": False}
DEFAULTS = {
    "twist": {"n": 64, "random": False, "seed": 0, "grid": 4096},
    "verify": {"n": 64, "random": False, "seed": 0, "grid": 4096},
    "c0rate": {"n_list": "8,16,32,64,128,256,512,1024", "random": False, "seed": 0},
    "clt": {"n": 1024, "samples": 2000, "t_grid": "0.25,0.5,0.75,1", "seed": 42,
            "k_sigma": 4.0, "enumerate": False, "workers": None},
    "limit-sample": {"samples": 1000, "t_grid": "0.25,0.5,0.75,1", "seed": 42},
    "enumerate": {"n": DEFAULT_ENUMERATION_N, "t_grid": "0.25,0.5,0.75,1", "workers": None},
    "catalog": {},
}


# -- input parsing -----------------------------------------------------------

def _float(text, what):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse {what} value {text!r} as a number") from None


def _read_table(path, columns):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read table {path!r}: {exc}") from None
    if data.shape[1] != columns:
        raise ConfigError(f"table {path!r} needs {columns} columns, found {data.shape[1]}")
    return data


def parse_curve(spec):
    """``name:key=value,...`` for catalog curves or ``table:path.csv`` (columns u,x,y,z)."""
    name, _, rest = spec.partition(":")
    if name == "table":
        data = _read_table(rest, 4)
        return Curve.tabulated(data[:, 0], data[:, 1:])
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"curve parameter {item!r} is not key=value")
        params[key.strip()] = _float(value, key)
    return make_catalog_curve(name, params)


def parse_metric(spec):
    """``const:VALUE``, ``poly:c0,c1,...`` or ``table:path.csv`` (columns u,g)."""
    kind, _, rest = spec.partition(":")
    if kind == "const":
        return MetricSpec.constant(_float(rest, "metric"))
    if kind == "poly":
        return MetricSpec.polynomial([_float(c, "metric") for c in rest.split(",") if c])
    if kind == "table":
        data = _read_table(rest, 2)
        return MetricSpec.tabulated(data[:, 0], data[:, 1])
    raise ConfigError(f"unknown metric kind {kind!r} (expected const, poly or table)")


def parse_floats(text, what):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [_float(x, what) for x in str(text).split(",") if x.strip()]


def parse_grid(text):
    t = parse_floats(text, "t_grid")
    if not t or any(x <= 0.0 or x > 1.0 for x in t) or any(b <= a for a, b in zip(t, t[1:])):
        raise ConfigError("t_grid must be sorted, distinct and within (0, 1]")
    return t


# -- output ------------------------------------------------------------------

def fmt(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (str, int, np.integer)) else fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, obj):
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":")))
        fh.write("\n")


class Run:
    """Collects outputs of one command and writes the manifest last."""

    def __init__(self, command, config):
        self.command = command
        self.config = config
        self.out = Path(config["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []
        self.start = time.perf_counter()

    def path(self, name):
        self.files.append(name)
        return self.out / name

    def manifest(self, extra=None):
        cfg = {k: v for k, v in self.config.items() if k not in ("out", "timing", "workers")}
        body = {"schema": SCHEMA, "command": self.command, "config": cfg,
                "version": __version__, "master_seed": self.config.get("seed"),
                "outputs": sorted(self.files + ["manifest.json"]),
                "wall_time": (time.perf_counter() - self.start) if self.config["timing"] else None}
        if extra:
            body.update(extra)
        write_json(self.out / "manifest.json", body)


# -- commands ----------------------------------------------------------------

def _phase(cfg, n):
    if cfg["random"]:
        return random_phase(n, sample_signs(n, int(cfg["seed"])))
    return deterministic_phase(n)


def _workers(cfg):
    w = cfg.get("workers")
    if w is None:
        w = os.environ.get(WORKERS_ENV, "1")
    return w if w == "auto" else int(w)


def cmd_twist(cfg):
    curve, metric = parse_curve(cfg["curve"]), parse_metric(cfg["metric"])
    n = int(cfg["n"])
    fmap = build_twisted_map(curve, metric, cfg["frames"], _phase(cfg, n),
                             int(cfg["quadrature_order"]))
    u = np.linspace(0.0, 1.0, int(cfg["grid"]))
    f0 = np.atleast_2d(curve(u))
    fn = f0 + twist_difference(fmap, u)
    v = velocity(fmap, u)
    g = metric(u)
    defect = np.abs(np.sum(v * v, axis=1) - g) / g
    run = Run("twist", cfg)
    write_csv(run.path("twist.csv"),
              ["u", "f0_x", "f0_y", "f0_z", "fn_x", "fn_y", "fn_z", "isometry_defect"],
              (np.column_stack([u, f0, fn, defect])))
    run.manifest({"max_isometry_defect": float(defect.max())})
    return 0


def cmd_verify(cfg):
    curve, metric = parse_curve(cfg["curve"]), parse_metric(cfg["metric"])
    report = shortness_report(curve, metric, int(cfg["grid"]))
    run = Run("verify", cfg)
    body = {"shortness": vars(report)}
    if report.min_margin >= -1e-12:
        n = int(cfg["n"])
        fmap = build_twisted_map(curve, metric, cfg["frames"], _phase(cfg, n),
                                 int(cfg["quadrature_order"]))
        body["isometry_defect"] = isometry_defect(fmap, int(cfg["grid"]))
        body["sup_difference"] = sup_difference(fmap)
        body["breakpoint_max_difference"] = float(
            np.max(np.linalg.norm(fmap.breakpoint_differences, axis=1)))
    write_json(run.path("verify.json"), body)
    run.manifest()
    return 0 if report.is_strictly_short or report.min_margin >= -1e-12 else 2


def cmd_c0rate(cfg):
    curve, metric = parse_curve(cfg["curve"]), parse_metric(cfg["metric"])
    try:
        ns = [int(x) for x in str(cfg["n_list"]).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad n-list {cfg['n_list']!r}") from None
    if len(ns) < 4 or any(n < 1 for n in ns) or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ConfigError("n-list needs >= 4 strictly increasing positive integers")
    sups = []
    for n in ns:
        fmap = build_twisted_map(curve, metric, cfg["frames"], _phase(cfg, n),
                                 int(cfg["quadrature_order"]))
        sups.append(sup_difference(fmap))
    run = Run("c0rate", cfg)
    write_csv(run.path("c0rate.csv"), ["n", "sup_difference"], zip(ns, sups))
    if max(sups) <= DEGENERATE_SUP:
        fit = {"status": "refused", "note": "DegenerateValues: all sup differences <= 1e-12"}
    else:
        fit = dict(vars(rate_fit(ns, sups)), status="ok")
    write_json(run.path("ratefit.json"), fit)
    run.manifest()
    return 0


def _z_directions(bundle, t_grid):
    _, _, Z = bundle.frames.at(np.asarray(t_grid))
    return Z


def cmd_clt(cfg):
    curve, metric = parse_curve(cfg["curve"]), parse_metric(cfg["metric"])
    t_grid = parse_grid(cfg["t_grid"])
    n = int(cfg["n"])
    if cfg["enumerate"]:
        return _clt_enumerate(cfg, curve, metric, n, t_grid)
    M = int(cfg["samples"])
    if M < 20:
        raise TooFewSamples(f"clt needs at least 20 samples for its gates, got {M}")
    config = ExperimentConfig(curve, metric, n, M, t_grid, int(cfg["seed"]), cfg["frames"],
                              int(cfg["quadrature_order"]), _workers(cfg))
    ens = run_ensemble(config)
    mom = empirical_moments(ens)
    bundle = limit_bundle(curve, metric, cfg["frames"])
    oracle = limit_covariance_matrix(bundle, t_grid)
    report = covariance_comparison(mom.covariance, oracle, mom.covariance_se,
                                   float(cfg["k_sigma"]), t_grid)
    Z = _z_directions(bundle, t_grid)
    gofs = []
    for i, t in enumerate(t_grid):
        sigma = math.sqrt(float(Z[i] @ oracle[3 * i:3 * i + 3, 3 * i:3 * i + 3] @ Z[i]))
        res = ks_gof(ens.samples[:, i, :] @ Z[i], sigma)
        gofs.append(dict(vars(res), t=t, passed=res.p_value >= KS_ALPHA))
    run = Run("clt", cfg)
    write_csv(run.path("ensemble.csv"), ["sample", "t", "D_x", "D_y", "D_z"],
              ([j, t_grid[i], *ens.samples[j, i]] for j in range(M) for i in range(len(t_grid))))
    write_json(run.path("covariance.json"), {
        "t_grid": t_grid, "oracle": oracle, "empirical": mom.covariance,
        "standard_errors": mom.covariance_se, "pass_matrix": report.pass_matrix,
        "worst_deviation": report.worst_deviation, "k_sigma": report.k_sigma,
        "all_pass": report.all_pass, "oracle_psd_defect": psd_defect(oracle)})
    write_json(run.path("gof.json"), {"alpha": KS_ALPHA, "projection": "Z(t)", "tests": gofs})
    passed = report.all_pass and all(g["passed"] for g in gofs)
    run.manifest({"gates_passed": passed})
    return 0 if passed else 4


def _clt_enumerate(cfg, curve, metric, n, t_grid):
    config = ExperimentConfig(curve, metric, n, 2 ** n, t_grid, int(cfg["seed"]), cfg["frames"],
                              int(cfg["quadrature_order"]), _workers(cfg), cost_cap=float("inf"))
    geom = build_geometry(config)
    law = enumerate_exact(curve, metric, n, t_grid, cfg["frames"],
                          int(cfg["quadrature_order"]), geometry=geom)
    ens = run_ensemble(config, signs=all_sign_sequences(n), geometry=geom)
    mom = empirical_moments(ens, ddof=0)
    run = Run("clt", cfg)
    _write_law(run, law)
    dev = {"mean_max_abs_deviation": float(np.max(np.abs(mom.mean - law.mean))),
           "covariance_max_abs_deviation": float(np.max(np.abs(mom.covariance - law.covariance)))}
    write_json(run.path("enumeration_check.json"), dev)
    passed = max(dev.values()) <= 1e-12
    run.manifest({"gates_passed": passed})
    return 0 if passed else 4


def _write_law(run, law):
    G = len(law.t_grid)
    write_csv(run.path("enumeration.csv"), ["outcome", "weight", "t", "D_x", "D_y", "D_z"],
              ([j, law.weight, law.t_grid[i], *law.outcomes[j, i]]
               for j in range(law.outcomes.shape[0]) for i in range(G)))
    write_json(run.path("exact_law.json"), {"n": law.n, "t_grid": list(law.t_grid),
                                            "mean": law.mean, "covariance": law.covariance})


def cmd_enumerate(cfg):
    curve, metric = parse_curve(cfg["curve"]), parse_metric(cfg["metric"])
    t_grid = parse_grid(cfg["t_grid"])
    law = enumerate_exact(curve, metric, int(cfg["n"]), t_grid, cfg["frames"],
                          int(cfg["quadrature_order"]))
    run = Run("enumerate", cfg)
    _write_law(run, law)
    run.manifest()
    return 0


def cmd_limit_sample(cfg):
    curve, metric = parse_curve(cfg["curve"]), parse_metric(cfg["metric"])
    t_grid = parse_grid(cfg["t_grid"])
    M = int(cfg["samples"])
    bundle = limit_bundle(curve, metric, cfg["frames"])
    oracle = limit_covariance_matrix(bundle, t_grid)
    draws = sample_limit(bundle, t_grid, M, int(cfg["seed"]))
    run = Run("limit-sample", cfg)
    write_csv(run.path("limit_samples.csv"), ["sample", "t", "L_x", "L_y", "L_z"],
              ([j, t_grid[i], *draws[j, i]] for j in range(M) for i in range(len(t_grid))))
    run.manifest({"oracle_covariance": oracle})
    return 0


def cmd_catalog(cfg):
    body = {name: {"required": list(e["required"]), "optional": e["optional"], "formula": e["doc"]}
            for name, e in CATALOG.items()}
    body["tabulated"] = {"spec": "table:path.csv", "columns": ["u", "x", "y", "z"]}
    sys.stdout.write(json.dumps(body, sort_keys=True, separators=(",", ":")) + "\n")
    return 0


COMMANDS = {"twist": cmd_twist, "verify": cmd_verify, "c0rate": cmd_c0rate, "clt": cmd_clt,
            "limit-sample": cmd_limit_sample, "enumerate": cmd_enumerate,
            "catalog": cmd_catalog}


# -- argument handling -------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(3)


def build_parser():
    S = argparse.SUPPRESS
    parser = _Parser(prog="corrugate", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, frames=True):
        p.add_argument("--config", default=S, help="JSON file of options; flags override it")
        p.add_argument("--curve", default=S, help="e.g. helix:a=0.1,b=0.05 or table:file.csv")
        p.add_argument("--metric", default=S, help="const:V, poly:c0,c1,... or table:file.csv")
        p.add_argument("--frames", default=S, choices=["rmf", "frenet"])
        p.add_argument("--quadrature-order", dest="quadrature_order", type=int, default=S)
        p.add_argument("--out", default=S, help="output directory")
        p.add_argument("--timing", action="store_true", default=S,
                       help="record wall time in the manifest (breaks byte stability)")

    def randomness(p):
        p.add_argument("--random", action="store_true", default=S)
        p.add_argument("--seed", type=int, default=S)

    p = sub.add_parser("twist", help="build a twisted curve and sample it")
    common(p)
    randomness(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--grid", type=int, default=S)

    p = sub.add_parser("verify", help="shortness and isometry report")
    common(p)
    randomness(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--grid", type=int, default=S)

    p = sub.add_parser("c0rate", help="sup |f_n - f0| over a list of n and its log-log slope")
    common(p)
    randomness(p)
    p.add_argument("--n-list", dest="n_list", default=S)

    p = sub.add_parser("clt", help="ensemble of random twists vs the Gaussian limit")
    common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--t-grid", dest="t_grid", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--k-sigma", dest="k_sigma", type=float, default=S)
    p.add_argument("--enumerate", action="store_true", default=S)
    p.add_argument("--workers", default=S)

    p = sub.add_parser("limit-sample", help="exact draws of the limit process")
    common(p)
    p.add_argument("--samples", type=int, default=S)
    p.add_argument("--t-grid", dest="t_grid", default=S)
    p.add_argument("--seed", type=int, default=S)

    p = sub.add_parser("enumerate", help="exact law of D_n over all 2^n sign sequences")
    common(p)
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--t-grid", dest="t_grid", default=S)
    p.add_argument("--workers", default=S)

    sub.add_parser("catalog", help="list catalog curves")
    return parser


def resolve_config(command, args):
    """Defaults, then the ``--config`` file, then explicit flags."""
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(DEFAULTS[command])
    path = args.pop("config", None)
    if path:
        try:
            with open(path) as fh:
                from_file = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        unknown = sorted(set(from_file) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config key(s) for {command}: {', '.join(unknown)}")
        cfg.update(from_file)
    cfg.update(args)
    return cfg


def main(argv=None):
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    try:
        cfg = resolve_config(command, args)
        return COMMANDS[command](cfg)
    except CorrugateError as exc:
        sys.stderr.write(f"corrugate {command}: {type(exc).__name__}: {exc}\n")
        return exc.exit_code


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
