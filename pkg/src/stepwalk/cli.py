"""Command-line front end: ``simulate``, ``limit``, ``verify`` and ``coeff``.

Settings come from flags and/or a flat ``key=value`` config file given with
``--config``; flags win. Exit codes: 0 success, 1 failed checks, 2 usage
error, 3 numerical error.
"""

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import suites
from .coefficients import build_coefficients
from .diagnostics import REGIMES, BracketSeries, brackets, scaled_paths, write_brackets_csv
from .laws import parse_law
from .limits import (LimitCovarianceModel, NumericalDegeneracyError, TimeGrid, kernel_json,
                     limit_covariance, sample_limit_triplet, write_ensemble_csv)
from .stats import EnsembleSummary, TestReport
from .verify import covariance_discrepancy
from .walks import (ReinforcementParams, grid_indices, map_paths, read_paths_csv, suggested_batch,
                    write_paths_csv)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("simulate", "limit", "verify", "coeff")


class UsageError(ValueError):
    def __init__(self, key, msg):
        super().__init__(f"invalid {key!r}: {msg}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    command: str
    law: str = "rademacher"
    mean: float = 0.0
    sd: float = 1.0
    values: str | None = None
    weights: str | None = None
    p: float | None = None
    n: int | None = None
    n_paths: int | None = None
    seed: int | None = None
    grid: tuple | None = None
    regime: str | None = None
    method: str = "cholesky"
    steps: int = 2**14
    out: str | None = None
    format: str = "csv"
    threads: int | None = None
    suite: str | None = None
    input: str | None = None
    emit_aux: bool = True
    brackets_out: str | None = None
    kernel_out: str | None = None


FIELDS = {f.name for f in dataclasses.fields(RunConfig)} - {"command"}
ALIASES = {"paths": "n_paths", "emit-aux": "emit_aux", "brackets-out": "brackets_out",
           "kernel-out": "kernel_out"}


def _parser():
    ap = argparse.ArgumentParser(prog="stepwalk", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="flat key=value file; flags override it")
    ap.add_argument("--law")
    ap.add_argument("--mean")
    ap.add_argument("--sd")
    ap.add_argument("--values", help="comma-separated support of a discrete law")
    ap.add_argument("--weights", help="comma-separated weights of a discrete law")
    ap.add_argument("--p")
    ap.add_argument("--n")
    ap.add_argument("--paths", dest="n_paths")
    ap.add_argument("--seed")
    ap.add_argument("--grid", help="comma-separated time points")
    ap.add_argument("--regime")
    ap.add_argument("--method")
    ap.add_argument("--steps")
    ap.add_argument("--out", help="output path ('-' for stdout)")
    ap.add_argument("--format")
    ap.add_argument("--threads")
    ap.add_argument("--suite")
    ap.add_argument("--input", help="path CSV written by 'simulate' to summarise")
    ap.add_argument("--no-aux", dest="emit_aux", action="store_const", const="false")
    ap.add_argument("--brackets-out")
    ap.add_argument("--kernel-out")
    return ap


def read_config_file(path):
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError("config", f"line {ln} is not key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            k = ALIASES.get(k, k)
            if k not in FIELDS:
                raise UsageError(k, "unknown config key")
            out[k] = v
    return out


def _to_int(key, v):
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise UsageError(key, f"expected an integer, got {v!r}") from None
    if f != int(f):
        raise UsageError(key, f"expected an integer, got {v!r}")
    return int(f)


def _to_float(key, v):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise UsageError(key, f"expected a number, got {v!r}") from None


def _to_grid(v):
    try:
        pts = tuple(float(x) for x in str(v).split(",") if x.strip())
    except ValueError:
        raise UsageError("grid", f"malformed grid {v!r}") from None
    if not pts:
        raise UsageError("grid", "empty grid")
    try:
        TimeGrid(np.array(pts))
    except ValueError as e:
        raise UsageError("grid", str(e)) from None
    return pts


def _to_bool(key, v):
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(key, f"expected a boolean, got {v!r}")


def _convert(raw):
    conv = {}
    for k, v in raw.items():
        if k in ("p", "mean", "sd"):
            conv[k] = _to_float(k, v)
        elif k in ("n", "n_paths", "seed", "steps", "threads"):
            conv[k] = _to_int(k, v)
        elif k == "grid":
            conv[k] = _to_grid(v)
        elif k == "emit_aux":
            conv[k] = _to_bool(k, v)
        else:
            conv[k] = v
    return conv


def parse_config(argv):
    """Parse flags (and an optional config file) into a validated :class:`RunConfig`."""
    args = _parser().parse_args(argv)
    raw = read_config_file(args.config) if args.config else {}
    for k, v in vars(args).items():
        if k in ("command", "config") or v is None:
            continue
        raw[k] = v
    cfg = RunConfig(args.command, **_convert(raw))
    validate(cfg)
    return cfg


def _require(cfg, key):
    if getattr(cfg, key) is None:
        raise UsageError(key, f"required for '{cfg.command}'")


def validate(cfg):
    if cfg.p is not None and not 0.0 <= cfg.p <= 1.0:
        raise UsageError("p", f"must lie in [0, 1], got {cfg.p}")
    for key in ("n", "n_paths", "steps", "threads"):
        v = getattr(cfg, key)
        if v is not None and v < 1:
            raise UsageError(key, "must be positive")
    if cfg.seed is not None and not 0 <= cfg.seed < 2**64:
        raise UsageError("seed", "must be a 64-bit unsigned integer")
    if cfg.format not in ("csv", "jsonl"):
        raise UsageError("format", "must be csv or jsonl")
    try:
        law = parse_law(cfg.law, cfg.mean, cfg.sd, cfg.values, cfg.weights)
    except ValueError as e:
        raise UsageError("law", str(e)) from None

    if cfg.command == "simulate":
        for key in ("p", "n", "n_paths", "out"):
            _require(cfg, key)
        if cfg.grid is not None and max(cfg.grid) > 1.0:
            raise UsageError("grid", "simulate grid points must lie in [0, 1]")
        if cfg.regime is not None:
            if cfg.regime not in REGIMES:
                raise UsageError("regime", f"choose from {', '.join(REGIMES)}")
            if cfg.grid is None:
                raise UsageError("grid", "scaled output needs a time grid")
            if cfg.regime == "critical" and cfg.p != 0.5:
                raise UsageError("p", "critical scaling is defined only at p = 0.5")
            if cfg.regime.startswith("martingale") and cfg.p >= 1.0:
                raise UsageError("p", "martingale scalings need p < 1")
        if cfg.brackets_out is not None:
            if cfg.p >= 1.0:
                raise UsageError("brackets_out", "brackets are disabled at p=1")
            if not law.centred:
                raise UsageError("brackets_out", "brackets need a centred law")
            if not cfg.emit_aux:
                raise UsageError("brackets_out", "brackets need the auxiliary series")
    elif cfg.command == "limit":
        for key in ("p", "grid", "n_paths", "out"):
            _require(cfg, key)
        if cfg.p >= 1.0:
            raise UsageError("p", "limit model needs p < 1")
        if cfg.method not in ("cholesky", "euler"):
            raise UsageError("method", "must be cholesky or euler")
    elif cfg.command == "verify":
        _require(cfg, "seed")
        if cfg.input is not None:
            for key in ("p", "n", "grid"):
                _require(cfg, key)
        else:
            _require(cfg, "suite")
            names = list(suites.SUITES) if cfg.suite == "all" else [cfg.suite]
            for name in names:
                if name not in suites.SUITES:
                    raise UsageError("suite", f"unknown suite; choose from {', '.join(suites.SUITES)}, all")
                _suite_overrides(cfg, name)
    elif cfg.command == "coeff":
        for key in ("p", "n"):
            _require(cfg, key)
    return cfg


_SUITE_KEYS = ("p", "n", "n_paths", "grid")


def _suite_overrides(cfg, name):
    cls = suites.SUITES[name][0]
    fields = {f.name for f in dataclasses.fields(cls)}
    out = {}
    for key in _SUITE_KEYS:
        v = getattr(cfg, key)
        if v is None:
            continue
        if key not in fields:
            raise UsageError(key, f"not a setting of suite {name!r}")
        out[key] = v
    if cfg.law != "rademacher" or cfg.values is not None:
        if "law" not in fields:
            raise UsageError("law", f"not a setting of suite {name!r}")
        law_text = cfg.law
        if cfg.law == "discrete" and cfg.values:
            law_text = "discrete:" + cfg.values
        if cfg.law == "gaussian":
            raise UsageError("law", "suites take rademacher or inline discrete laws")
        out["law"] = law_text
    return out


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def _close(fh):
    if fh is not sys.stdout:
        fh.close()


def _params(cfg):
    law = parse_law(cfg.law, cfg.mean, cfg.sd, cfg.values, cfg.weights)
    return ReinforcementParams(cfg.p, law, cfg.emit_aux)


def run_scaled(cfg):
    params = _params(cfg)
    need_check = cfg.regime == "martingale-counterbalanced"
    coeffs = None
    if cfg.regime.startswith("martingale"):
        coeffs = build_coefficients(cfg.p, cfg.n, counterbalanced=need_check)
    grid = list(cfg.grid)
    parts = map_paths(lambda b: scaled_paths(b, coeffs, grid, cfg.regime), params, cfg.n, cfg.n_paths,
                      cfg.seed or 0, cfg.threads)
    fh = _open_out(cfg.out)
    try:
        fh.write("path_id,component,t,value\n")
        r = 0
        for sp in parts:
            for j in range(len(next(iter(sp.values.values())))):
                for name, vals in sp.values.items():
                    for t, v in zip(grid, vals[j]):
                        fh.write(f"{r},{name},{t:.17g},{v:.17g}\n")
                r += 1
    finally:
        _close(fh)
    print(f"simulate[{cfg.regime}]: {cfg.n_paths} paths x {len(grid)} times -> {cfg.out}",
          file=sys.stderr if cfg.out == "-" else sys.stdout)
    return EXIT_OK


def run_simulate(cfg):
    if cfg.regime is not None:
        return run_scaled(cfg)
    params = _params(cfg)
    idx = np.arange(cfg.n + 1) if cfg.grid is None else np.unique(grid_indices(cfg.n, cfg.grid))
    names = ("S", "S_hat", "S_check") + (("V_hat", "G_check") if cfg.emit_aux else ())
    coeffs = build_coefficients(cfg.p, cfg.n) if cfg.brackets_out else None

    def keep(batch):
        part = {k: getattr(batch, k)[:, idx] for k in names}
        if coeffs is not None:
            part["brackets"] = brackets(batch, coeffs)
        return part

    parts = map_paths(keep, params, cfg.n, cfg.n_paths, cfg.seed or 0, cfg.threads)
    series = {k: np.concatenate([part[k] for part in parts]) for k in names}
    ids = np.arange(cfg.n_paths)
    fh = _open_out(cfg.out)
    try:
        if cfg.format == "csv":
            write_paths_csv(fh, ids, idx, series, cfg.emit_aux)
        else:
            for r in ids:
                rec = {"path_id": int(r), "k": idx.tolist()}
                rec.update({k: series[k][r].tolist() for k in names})
                fh.write(json.dumps(rec) + "\n")
    finally:
        _close(fh)
    if coeffs is not None:
        cat = lambda name: np.concatenate([getattr(part["brackets"], name) for part in parts])  # noqa: E731
        series_b = BracketSeries(cat("qv_hat"), cat("qv_check"), cat("qv_mixed"), None, None, None)
        with open(cfg.brackets_out, "w", newline="") as bh:
            write_brackets_csv(bh, ids, series_b, idx)
    print(f"simulate: {cfg.n_paths} paths x {len(idx)} indices (p={cfg.p}, law={params.law.kind}) -> {cfg.out}",
          file=sys.stderr if cfg.out == "-" else sys.stdout)
    return EXIT_OK


def run_limit(cfg):
    model = LimitCovarianceModel(cfg.p)
    grid = TimeGrid(np.array(cfg.grid))
    ens = sample_limit_triplet(model, grid, cfg.n_paths, cfg.seed or 0, cfg.method,
                               cfg.steps if cfg.method == "euler" else None)
    fh = _open_out(cfg.out)
    try:
        if cfg.format == "csv":
            write_ensemble_csv(fh, ens)
        else:
            for r in range(ens.samples.shape[0]):
                rec = {"path_id": r, "t": grid.points.tolist()}
                rec.update({c: ens.samples[r, j].tolist() for j, c in enumerate(ens.components)})
                fh.write(json.dumps(rec) + "\n")
    finally:
        _close(fh)
    if cfg.kernel_out:
        with open(cfg.kernel_out, "w") as kh:
            kh.write(kernel_json(model, grid, ens.components))
    t = grid.points[-1]
    parts = []
    for j, c in enumerate(ens.components):
        v = float(np.var(ens.samples[:, j, -1], ddof=1)) if ens.samples.shape[0] > 1 else float("nan")
        parts.append(f"var {c}({t:g})={v:.4f} (kernel {limit_covariance(model, c, c, t, t):.4f})")
    print(f"limit[{cfg.method}]: {cfg.n_paths} paths; " + "; ".join(parts),
          file=sys.stderr if cfg.out == "-" else sys.stdout)
    return EXIT_OK


def summary_from_csv(fh, n, grid, sigma2=1.0, batch_size=None):
    """Diffusive-scaled :class:`EnsembleSummary` of a path dump, folded in the in-memory block order."""
    path_ids, indices, series = read_paths_csv(fh)
    idx = grid_indices(n, grid)
    pos = {k: i for i, k in enumerate(indices)}
    missing = [int(k) for k in idx if int(k) not in pos]
    if missing:
        raise ValueError(f"path dump lacks indices {missing[:5]}")
    cols = [pos[int(k)] for k in idx]
    root = np.sqrt(sigma2) * np.sqrt(n)
    labels = [(c, float(t)) for c in ("S", "S_hat", "S_check") for t in grid]
    rows = np.concatenate([series[c][:, cols] / root for c in ("S", "S_hat", "S_check")], axis=1)
    bs = suggested_batch(n) if batch_size is None else int(batch_size)
    out = None
    for s in range(0, len(path_ids), bs):
        part = EnsembleSummary.empty(labels).update(rows[s:s + bs])
        out = part if out is None else out.merge(part)
    return out


def run_verify(cfg):
    out_fh = None if cfg.out is None else _open_out(cfg.out)
    reports = []
    if cfg.input is not None:
        law = parse_law(cfg.law, cfg.mean, cfg.sd, cfg.values, cfg.weights)
        with open(cfg.input, newline="") as fh:
            summ = summary_from_csv(fh, cfg.n, list(cfg.grid), law.sigma2)
        rep = covariance_discrepancy(summ, LimitCovarianceModel(cfg.p), 0.05, 4.0, suite="input-covariance",
                                     config={"input": cfg.input, "n": cfg.n, "grid": list(cfg.grid)},
                                     seed=cfg.seed)
        reports.append(rep)
    else:
        names = list(suites.SUITES) if cfg.suite == "all" else [cfg.suite]
        for name in names:
            reports.append(suites.run_suite(name, cfg.seed, cfg.threads, **_suite_overrides(cfg, name)))
    text = reports[0].to_json() if len(reports) == 1 else \
        "[" + ",\n".join(r.to_json() for r in reports) + "]"
    if out_fh is None:
        sys.stdout.write(text + "\n")
        line_fh = sys.stderr
    else:
        out_fh.write(text + "\n")
        _close(out_fh)
        line_fh = sys.stderr if cfg.out == "-" else sys.stdout
    for r in reports:
        print(r.summary_line(), file=line_fh)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def run_coeff(cfg):
    p = cfg.p
    table = build_coefficients(p, cfg.n, counterbalanced=p < 1.0)
    fh = _open_out(cfg.out or "-")
    try:
        if cfg.format == "csv":
            fh.write("k,a_hat,a_check\n")
            for k in range(1, cfg.n + 1):
                chk = "" if table.a_check is None else format(table.a_check[k - 1], ".17g")
                fh.write(f"{k},{table.a_hat[k - 1]:.17g},{chk}\n")
        else:
            for k in range(1, cfg.n + 1):
                chk = None if table.a_check is None else float(table.a_check[k - 1])
                fh.write(json.dumps({"k": k, "a_hat": float(table.a_hat[k - 1]), "a_check": chk}) + "\n")
    finally:
        _close(fh)
    return EXIT_OK


def run(cfg):
    return {"simulate": run_simulate, "limit": run_limit, "verify": run_verify, "coeff": run_coeff}[cfg.command](cfg)


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except UsageError as e:
        print(f"stepwalk: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    except OSError as e:
        print(f"stepwalk: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except (NumericalDegeneracyError, FloatingPointError, ArithmeticError) as e:
        print(f"stepwalk: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, OSError) as e:
        print(f"stepwalk: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
