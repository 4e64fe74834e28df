"""Command-line front end.

Every subcommand resolves its configuration from built-in defaults, an
optional ``--config`` JSON file and explicit flags (in that order of
precedence), writes its artifacts plus ``manifest.json`` into ``--out``
and can be replayed with ``tcfou rerun --manifest``.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure,
3 failed verdict under ``--assert``.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from scipy import special

from . import io
from .bernstein import from_spec, validate
from .convergence import (ks_distance, j1_distance, sup_norm_density, sup_norm_moments,
                          track_report, vprime_envelope, identity_bound)
from .errors import AccuracyError, DomainError, HorizonError, NumericError, ResourceError
from .fou import (FouModel, ProcessPath, abs_moment, covariance_matrix, density_p,
                  fou_filter, sample_fbm_batch)
from .fpe import mild_residual, residual_track
from .numerics import Grid, RngStream, parse_values
from .subordinator import sample_inverse_batch, sample_subordinator
from .timechange import (TcfouModel, cdf_tc, density_tc, limit_density, limit_moment,
                         moment_tc, sample_tcfou_batch)

OUT_ENV = "TCFOU_OUTDIR"
CHUNK = 256  # paths per random stream; fixed so results never depend on --jobs

MODEL = {"hurst": 0.7, "theta": 1.0, "sigma": 1.0, "alpha": 0.5, "phi": None}
DEFAULTS = {
    "simulate": {**MODEL, "process": "tcfou", "t_grid": "0:1:0.01", "paths": 1,
                 "seed": None, "backend": "interpolated", "n_fine": 2**14, "cutoff": 1e-4},
    "density": {**MODEL, "t": "1", "x_grid": "-3:3:0.05", "parent": False},
    "moments": {**MODEL, "n": "2", "t_grid": "0.5:5:0.5", "parent": False},
    "covariance": {"hurst": 0.7, "theta": 1.0, "sigma": 1.0, "t_grid": "0:2:0.25"},
    "limit": {**MODEL, "t": 100.0, "x_grid": "-2:2:0.25", "threshold": 1e-3, "paths": 0,
              "seed": None, "n_fine": 2**12},
    "converge": {**MODEL, "track": "0.6,0.55,0.52", "metric": "v2-supnorm", "n": 2,
                 "k": "0.5,2", "t_grid": None, "eps": 0.1, "threshold": None, "t": 1.0,
                 "paths": 0, "seed": None},
    "j1": {"a": None, "b": None, "horizon": None, "column": 1},
    "fpe-check": {**MODEL, "lambda_grid": "0.5,1,2", "x_grid": "0.5,1",
                  "track": "0.6,0.55,0.52", "threshold": 1e-3},
}
STOCHASTIC = {"simulate"}
METRICS = ("v2-supnorm", "moment-supnorm", "density-supnorm", "parent-density-supnorm",
           "vprime-envelope", "ks")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- configuration --------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON file with parameters (flags override it)")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or .)")
    p.add_argument("--format", choices=("csv", "json"), help="data artifact format (csv)")
    p.add_argument("--jobs", type=int, help="worker threads; never changes results (1)")
    p.add_argument("--assert", dest="assert_", action="store_true", default=None,
                   help="exit 3 when a report verdict fails")


def _add_model(p):
    p.add_argument("--hurst", type=float, help="Hurst index H in [1/2, 1) (0.7)")
    p.add_argument("--theta", type=float, help="relaxation time (1)")
    p.add_argument("--sigma", type=float, help="noise scale (1)")
    p.add_argument("--alpha", type=float, help="stable index of the time change (0.5)")
    p.add_argument("--phi", help='Bernstein function as JSON {"kind": ..., "params": {...}}')


def build_parser():
    parser = _Parser(prog="tcfou", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="sample paths")
    _add_model(p)
    p.add_argument("--process", choices=("fbm", "fou", "tcfou", "subordinator", "inverse"))
    p.add_argument("--t-grid", dest="t_grid", help="a:b:step or comma list (0:1:0.01)")
    p.add_argument("--paths", type=int, help="number of paths (1)")
    p.add_argument("--seed", type=int, help="random seed (required)")
    p.add_argument("--backend", choices=("interpolated", "exact"))
    p.add_argument("--n-fine", dest="n_fine", type=int, help="operational grid steps (16384)")
    p.add_argument("--cutoff", type=float, help="jump cutoff for non-stable kinds (1e-4)")

    p = sub.add_parser("density", help="density curves of U_H or U_H,Phi")
    _add_model(p)
    p.add_argument("--t", help="time or comma list of times (1)")
    p.add_argument("--x-grid", dest="x_grid", help="a:b:step or comma list (-3:3:0.05)")
    p.add_argument("--parent", action="store_true", default=None,
                   help="fOU density instead of the time-changed one")

    p = sub.add_parser("moments", help="absolute moment tables")
    _add_model(p)
    p.add_argument("--n", help="moment orders, comma list (2)")
    p.add_argument("--t-grid", dest="t_grid", help="(0.5:5:0.5)")
    p.add_argument("--parent", action="store_true", default=None)

    p = sub.add_parser("covariance", help="fOU covariance on a grid")
    p.add_argument("--hurst", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--t-grid", dest="t_grid", help="(0:2:0.25)")

    p = sub.add_parser("limit", help="compare the marginal at t with the limit law")
    _add_model(p)
    p.add_argument("--t", type=float, help="(100)")
    p.add_argument("--x-grid", dest="x_grid", help="(-2:2:0.25)")
    p.add_argument("--threshold", type=float, help="max density gap for the verdict (1e-3)")
    p.add_argument("--paths", type=int, help="Monte Carlo size for a KS test (0 = skip)")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-fine", dest="n_fine", type=int, help="(4096)")

    p = sub.add_parser("converge", help="metrics along a track of Hurst indices")
    _add_model(p)
    p.add_argument("--track", help="comma list of H values (0.6,0.55,0.52)")
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--n", type=int, help="moment order for moment-supnorm (2)")
    p.add_argument("--k", help="interval K as lo,hi for density metrics (0.5,2)")
    p.add_argument("--t-grid", dest="t_grid", help="time grid for sup-norms")
    p.add_argument("--eps", type=float, help="cut for vprime-envelope (0.1)")
    p.add_argument("--threshold", type=float, help="bound for the last value")
    p.add_argument("--t", type=float, help="time of the marginal for the ks metric (1)")
    p.add_argument("--paths", type=int, help="Monte Carlo size for the ks metric")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("j1", help="Skorohod J1 distance of two simulated paths")
    p.add_argument("--a", help="paths CSV of the first run")
    p.add_argument("--b", help="paths CSV of the second run")
    p.add_argument("--horizon", type=float, help="T (default: common end of both grids)")
    p.add_argument("--column", type=int, help="value column to compare (1)")

    p = sub.add_parser("fpe-check", help="mild-solution residuals and the H track")
    _add_model(p)
    p.add_argument("--lambda-grid", dest="lambda_grid", help="(0.5,1,2)")
    p.add_argument("--x-grid", dest="x_grid", help="nonzero points (0.5,1)")
    p.add_argument("--track", help="(0.6,0.55,0.52)")
    p.add_argument("--threshold", type=float, help="bound on |relative residual| (1e-3)")

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int)
    p.add_argument("--assert", dest="assert_", action="store_true", default=None)

    for name, sp in sub.choices.items():
        if name != "rerun":
            _add_common(sp)
    return parser


def resolve(command, args):
    """Merge defaults, the JSON config file and explicit flags."""
    cfg = {**DEFAULTS[command], "format": "csv", "jobs": 1, "assert": False, "out": None}
    path = getattr(args, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        unknown = set(loaded) - set(cfg) - {"schema_version"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k != "schema_version"})
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        cfg["assert" if key == "assert_" else key] = val
    return normalise(command, cfg)


def normalise(command, cfg):
    """Fold ``alpha`` into the ``phi`` spec and check the domains."""
    if "phi" in cfg:
        phi = cfg["phi"]
        if isinstance(phi, str):
            try:
                phi = json.loads(Path(phi[1:]).read_text() if phi.startswith("@") else phi)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"bad --phi value: {exc}") from exc
        if phi is None:
            phi = {"kind": "stable", "params": {"alpha": cfg["alpha"]}}
        cfg["phi"] = phi
        cfg.pop("alpha", None)
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError("--seed is required for stochastic commands")
    if cfg.get("paths") and cfg.get("seed") is None:
        raise ConfigError("--seed is required when Monte Carlo paths are requested")
    if cfg["jobs"] < 1:
        raise ConfigError("--jobs must be at least 1")
    try:
        if "hurst" in cfg:
            FouModel(cfg["hurst"], cfg["theta"], cfg["sigma"])
        if "phi" in cfg:
            f = from_spec(cfg["phi"])
            report = validate(f)
            if not report.ok:
                raise ConfigError("invalid Bernstein function: " + "; ".join(report.violations))
    except (DomainError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


# --- helpers ------------------------------------------------------------------------

def pmap(fn, items, jobs):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _fou(cfg, H=None):
    return FouModel(cfg["hurst"] if H is None else H, cfg["theta"], cfg["sigma"])


def _tc(cfg, H=None):
    return TcfouModel(_fou(cfg, H), from_spec(cfg["phi"]))


class Run:
    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.hash = io.config_hash(cfg)
        out = cfg.get("out") or os.environ.get(OUT_ENV) or "."
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []
        self.verdict = True

    def table(self, name, header, rows):
        """Write rows as CSV or as a JSON object of columns, following ``--format``."""
        rows = list(rows)
        if self.cfg["format"] == "json":
            cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
            io.write_json(self.out / f"{name}.json", {"columns": cols}, self.hash)
            self.artifacts.append(f"{name}.json")
        else:
            io.write_csv(self.out / f"{name}.csv", header, rows, self.hash)
            self.artifacts.append(f"{name}.csv")

    def report(self, name, obj, verdict=None):
        io.write_json(self.out / f"{name}.json", obj, self.hash)
        self.artifacts.append(f"{name}.json")
        if verdict is not None:
            self.verdict = self.verdict and bool(verdict)

    def finish(self):
        io.write_manifest(self.out, self.command, self.cfg, self.artifacts)
        if self.cfg.get("assert") and not self.verdict:
            return 3
        return 0


# --- subcommands ----------------------------------------------------------------------

def cmd_simulate(run):
    cfg = run.cfg
    grid = Grid.parse(cfg["t_grid"])
    n, proc = cfg["paths"], cfg["process"]
    if n < 1:
        raise ConfigError("--paths must be positive")
    rng = RngStream(cfg["seed"])
    phi = from_spec(cfg["phi"])

    def chunk(c):
        rows = min(CHUNK, n - c * CHUNK)
        r = rng.child(c)
        if proc in ("fbm", "fou"):
            if grid.start != 0.0 or not grid.is_uniform or len(grid) < 2:
                raise ConfigError("fbm/fou need a uniform grid starting at 0")
            B = sample_fbm_batch(cfg["hurst"], len(grid) - 1, grid.step, rows, r.generator())
            return B if proc == "fbm" else fou_filter(B, grid.step, cfg["theta"], cfg["sigma"])
        if proc == "tcfou":
            return sample_tcfou_batch(_tc(cfg), grid, rows, r, backend=cfg["backend"],
                                      n_fine=cfg["n_fine"])
        if proc == "subordinator":
            return np.array([sample_subordinator(phi, grid, r.child(i), cfg["cutoff"]).values
                             for i in range(rows)])
        return sample_inverse_batch(phi, grid, rows, r, jump_cutoff=cfg["cutoff"])

    vals = np.concatenate(pmap(chunk, range(math.ceil(n / CHUNK)), cfg["jobs"]))
    first = "grid" if proc == "subordinator" else "t"
    names = ["value"] if n == 1 else [f"value_{i}" for i in range(n)]
    run.table("paths", [first, *names], np.column_stack([grid.points, vals.T]).tolist())


def cmd_density(run):
    cfg = run.cfg
    ts = parse_values(cfg["t"])
    xs = parse_values(cfg["x_grid"])
    if np.any(ts <= 0):
        raise ConfigError("density times must be positive")

    def one(t):
        if cfg["parent"]:
            return density_p(_fou(cfg), float(t), xs)
        return density_tc(_tc(cfg), float(t), xs)

    curves = pmap(one, ts, cfg["jobs"])
    if ts.size == 1:
        run.table("density", ["x", "p"], zip(xs, curves[0]))
    else:
        run.table("density", ["t", "x", "p"],
                  [(t, x, p) for t, c in zip(ts, curves) for x, p in zip(xs, c)])


def cmd_moments(run):
    cfg = run.cfg
    orders = [int(v) for v in parse_values(cfg["n"])]
    ts = parse_values(cfg["t_grid"])
    if any(k < 1 for k in orders) or np.any(ts < 0):
        raise ConfigError("orders must be positive and times nonnegative")

    def one(t):
        if t == 0:
            return [0.0] * len(orders)
        if cfg["parent"]:
            return [abs_moment(_fou(cfg), k, float(t)) for k in orders]
        return [moment_tc(_tc(cfg), k, float(t), allow_odd=True) for k in orders]

    vals = pmap(one, ts, cfg["jobs"])
    run.table("moments", ["t", "n", "V"],
              [(t, k, v) for t, row in zip(ts, vals) for k, v in zip(orders, row)])


def cmd_covariance(run):
    cfg = run.cfg
    ts = Grid.parse(cfg["t_grid"]).points
    C = covariance_matrix(_fou(cfg), ts)
    run.table("covariance", ["t", "s", "C"],
              [(t, s, C[i, j]) for i, t in enumerate(ts) for j, s in enumerate(ts)])


def cmd_limit(run):
    cfg = run.cfg
    m = _tc(cfg)
    t = float(cfg["t"])
    xs = parse_values(cfg["x_grid"])
    p_t = density_tc(m, t, xs)
    p_inf = limit_density(m, xs)
    gap = float(np.max(np.abs(p_t - p_inf)))
    rep = {"t": t, "max_density_gap": gap, "threshold": cfg["threshold"],
           "moment_2": moment_tc(m, 2, t), "limit_moment_2": limit_moment(m, 1)}
    ok = gap < cfg["threshold"]
    if cfg["paths"]:
        vals = sample_tcfou_batch(m, Grid(np.array([0.0, t])), cfg["paths"],
                                  RngStream(cfg["seed"]), n_fine=cfg["n_fine"])[:, 1]
        sd = math.sqrt(limit_moment(m, 1))
        ks = ks_distance(vals, lambda x: special.ndtr(x / sd))
        rep["ks"] = {"statistic": ks.statistic, "crit_1": ks.crit_1, "crit_5": ks.crit_5,
                     "n": ks.n}
        ok = ok and ks.passes(0.01)
    rep["verdict"] = bool(ok)
    run.table("limit", ["x", "p_t", "p_limit"], zip(xs, p_t, p_inf))
    run.report("limit_report", rep, ok)


def cmd_converge(run):
    cfg = run.cfg
    track = [float(h) for h in parse_values(cfg["track"])]
    metric = cfg["metric"]
    tg = Grid.parse(cfg["t_grid"]) if cfg["t_grid"] else None
    lo, hi = parse_values(cfg["k"])

    def one(H):
        if metric == "v2-supnorm":
            return sup_norm_moments(2, H, cfg["theta"], cfg["sigma"], tg)
        if metric == "moment-supnorm":
            return sup_norm_moments(cfg["n"], H, cfg["theta"], cfg["sigma"], tg)
        if metric in ("density-supnorm", "parent-density-supnorm"):
            return sup_norm_density(_tc(cfg), H, (lo, hi), tg,
                                    parent=metric.startswith("parent"))
        if metric == "vprime-envelope":
            return vprime_envelope(H, cfg["theta"], cfg["eps"])
        if not cfg["paths"]:
            raise ConfigError("the ks metric needs --paths and --seed")
        t = float(cfg["t"])
        i = track.index(H)
        vals = sample_tcfou_batch(_tc(cfg, H), Grid(np.array([0.0, t])), cfg["paths"],
                                  RngStream(cfg["seed"]).child(i))[:, 1]
        xs = np.linspace(-8, 8, 2001) * math.sqrt(limit_moment(_tc(cfg, 0.5), 1))
        F = cdf_tc(_tc(cfg, 0.5), t, xs)
        return ks_distance(vals, lambda x: np.interp(x, xs, F)).statistic

    values = pmap(one, track, cfg["jobs"])
    rep = track_report(metric, track, values, cfg["threshold"],
                       {k: v for k, v in cfg.items() if k not in io.EXECUTION_KEYS})
    run.table("converge", ["H", "value"], zip(track, values))
    run.report("converge_report", rep.to_dict(), rep.verdict)


def _load_path(path, column):
    _, data = io.read_csv(path)
    if data.ndim != 2 or column >= data.shape[1] or column < 1:
        raise ConfigError(f"{path}: no value column {column}")
    return ProcessPath(Grid(data[:, 0]), data[:, column], "tcfou")


def cmd_j1(run):
    cfg = run.cfg
    if not cfg["a"] or not cfg["b"]:
        raise ConfigError("j1 needs --a and --b path files")
    f = _load_path(cfg["a"], cfg["column"])
    g = _load_path(cfg["b"], cfg["column"])
    T = cfg["horizon"] or min(f.grid.stop, g.grid.stop)
    d = j1_distance(f, g, T)
    keep_f, keep_g = f.grid.points <= T, g.grid.points <= T
    ident = identity_bound(f.grid.points[keep_f], f.values[keep_f],
                            g.grid.points[keep_g], g.values[keep_g])
    run.report("j1", {"horizon": T, "j1": d, "identity_bound": ident})


def cmd_fpe_check(run):
    cfg = run.cfg
    m = _tc(cfg)
    lams = parse_values(cfg["lambda_grid"])
    xs = parse_values(cfg["x_grid"])
    if np.any(xs == 0):
        raise ConfigError("x = 0 is excluded from residual checks")
    pairs = [(float(lam), float(x)) for lam in lams for x in xs]
    res = pmap(lambda p: mild_residual(m, *p), pairs, cfg["jobs"])
    worst = max(abs(r.relative_residual) for r in res)
    ok = worst < cfg["threshold"]
    track = [float(h) for h in parse_values(cfg["track"])]
    rep = residual_track(m, track, lams=[float(v) for v in lams], xs=[float(v) for v in xs])
    run.table("residuals", ["H", "lambda", "x", "term1", "term2", "term3", "residual",
                            "relative_residual"],
              [(r.H, r.lam, r.x, *r.terms, r.residual, r.relative_residual) for r in res])
    run.report("fpe_report", {"residuals": [r.to_dict() for r in res], "max_relative": worst,
                              "threshold": cfg["threshold"], "solution_verdict": bool(ok),
                              "track": rep.to_dict()}, ok and rep.verdict)


COMMANDS = {"simulate": cmd_simulate, "density": cmd_density, "moments": cmd_moments,
            "covariance": cmd_covariance, "limit": cmd_limit, "converge": cmd_converge,
            "j1": cmd_j1, "fpe-check": cmd_fpe_check}


def execute(command, cfg):
    run = Run(command, cfg)
    COMMANDS[command](run)
    return run.finish()


_NEGATIVE = re.compile(r"^-\.?\d")


def _attach_negative_values(argv):
    """Write ``--flag -3:3:0.05`` as ``--flag=-3:3:0.05`` so argparse keeps the value."""
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_attach_negative_values(argv))
    except SystemExit as exc:  # --help, or a usage error (status 1)
        return exc.code
    try:
        if args.command == "rerun":
            try:
                man = io.read_manifest(args.manifest)
            except (OSError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
            command = man["command"]
            cfg = {**man["config"], "jobs": args.jobs or 1, "assert": bool(args.assert_),
                   "out": args.out}
            if io.config_hash(cfg) != man["config_hash"]:
                raise ConfigError("manifest config does not match its hash")
        else:
            command = args.command
            cfg = resolve(command, args)
        return execute(command, cfg)
    except ConfigError as exc:
        print(f"tcfou: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except (AccuracyError, NumericError, HorizonError, ResourceError) as exc:
        print(f"tcfou: numerical failure: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"tcfou: invalid configuration: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
