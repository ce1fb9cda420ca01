"""Monte Carlo harness: error tables, timing and interval coverage.

Every replication draws its graph from its own seed substream,
``SeedSequence(seed, spawn_key=(n, cell, r))``, so results do not depend
on the number of worker processes or on the order they finish in.
"""

from __future__ import annotations

import json
import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import DataError, DegeneracyError
from .estimator import estimate_all
from .inference import fit, normal_quantile
from .io import dump_json, write_csv
from .mle import fit_mle
from .model import linear_design, sample_graph, tally

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "resolve_theta",
    "replication_seed",
    "run_error_table",
    "run_timing",
    "run_coverage",
    "COVERAGE_PARAMS",
]

log = logging.getLogger(__name__)

ESTIMATORS = ("tdre", "mle")
COVERAGE_PARAMS = ("rho", "theta", "alpha_1", "alpha_mid", "alpha_n", "beta_1", "beta_mid", "beta_n")

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_LOG_N = r"log\(?n\)?"


def resolve_theta(spec, n: int) -> float:
    """Evaluate a density specification at size ``n``.

    Accepted forms (spaces ignored): a number such as ``0`` or ``-0.5``;
    ``-log(n)/c`` (also written ``-(log n)/c`` or ``-(1/c)log(n)``); and
    ``-log(log(n))``.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        value = float(spec)
    else:
        s = str(spec).replace(" ", "").lower()
        if re.fullmatch(_NUM, s):
            value = float(s)
        elif m := (re.fullmatch(rf"-\(?{_LOG_N}\)?/({_NUM})", s)
                   or re.fullmatch(rf"-\(1/({_NUM})\)\*?{_LOG_N}", s)):
            c = float(m.group(1))
            if c == 0:
                raise DataError(f"theta specification {spec!r} divides by zero")
            value = -math.log(n) / c
        elif re.fullmatch(r"-log\(log\(?n\)?\)", s):
            value = -math.log(math.log(n))
        else:
            raise DataError(f"unrecognised theta specification {spec!r}")
    if not math.isfinite(value):
        raise DataError(f"theta specification {spec!r} is not finite at n={n}")
    return value


@dataclass
class ExperimentConfig:
    n_values: list = field(default_factory=lambda: [200, 300, 500])
    theta_specs: list = field(default_factory=lambda: ["0"])
    rho: float = 0.5
    replications: int = 200
    seed: int = 0
    estimators: list = field(default_factory=lambda: ["tdre"])
    outputs: str = "results"
    level: float = 0.05
    workers: int = 1
    timing_repeats: int = 10

    def __post_init__(self):
        if self.replications < 1:
            raise DataError("replications must be at least 1")
        if self.timing_repeats < 1:
            raise DataError("timing_repeats must be at least 1")
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad:
            raise DataError(f"unknown estimators {sorted(bad)}")
        for n in self.n_values:
            if int(n) != n or n < 2 or n % 2:
                raise DataError(f"n must be an even integer >= 2, got {n}")
            for spec in self.theta_specs:
                resolve_theta(spec, n)
        if not 0 < self.level < 1:
            raise DataError("level must lie in (0, 1)")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Load a JSON or TOML file (chosen by suffix, JSON otherwise)."""
        path = Path(path)
        raw = path.read_bytes()
        try:
            if path.suffix.lower() == ".toml":
                data = tomllib.loads(raw.decode("utf-8"))
            else:
                data = json.loads(raw)
        except Exception as exc:  # both parsers raise their own error types
            raise DataError(f"{path}: cannot parse config ({exc})") from None
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise DataError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExperimentResult:
    """Rows of one experiment plus optional residual samples.

    ``rows`` hold one entry per cell and estimator.  Keys starting with
    ``time_`` are wall-clock measurements; everything else is a
    deterministic function of the configuration.
    """

    kind: str
    config: dict
    rows: list
    residuals: dict = field(default_factory=dict)

    def deterministic_rows(self) -> list:
        return [{k: v for k, v in r.items() if not k.startswith("time_")} for r in self.rows]

    def write(self, outdir=None) -> dict:
        """Write ``<kind>.csv``, ``<kind>.json`` and residual CSVs; return paths.

        The worker count is left out of the recorded configuration because
        it never changes the results, so runs with different pool sizes
        produce identical files.
        """
        out = Path(outdir if outdir is not None else self.config["outputs"])
        out.mkdir(parents=True, exist_ok=True)
        paths = {}
        csv_path = out / f"{self.kind}.csv"
        write_csv(self.rows, csv_path)
        paths["csv"] = str(csv_path)
        json_path = out / f"{self.kind}.json"
        config = {k: v for k, v in self.config.items() if k != "workers"}
        dump_json({"kind": self.kind, "config": config, "rows": self.rows}, json_path)
        paths["json"] = str(json_path)
        for cell, samples in self.residuals.items():
            res_path = out / f"residuals_{cell}.csv"
            names = sorted(samples)
            length = max(len(v) for v in samples.values())
            rows = [
                {k: (samples[k][i] if i < len(samples[k]) else None) for k in names}
                for i in range(length)
            ]
            write_csv(rows, res_path, names)
            paths[f"residuals_{cell}"] = str(res_path)
        return paths


def replication_seed(seed: int, n: int, cell: int, r: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(int(n), int(cell), int(r)))


def _cells(cfg: ExperimentConfig):
    for n in cfg.n_values:
        for cell, spec in enumerate(cfg.theta_specs):
            yield int(n), cell, spec, resolve_theta(spec, n)


def _tracked(n: int) -> dict:
    """Nodes reported individually: first, middle and last (1-based 1, n/2, n)."""
    return {"1": 0, "mid": n // 2 - 1, "n": n - 1}


def _errors(est_alpha, est_beta, est_theta, est_rho, truth, n) -> dict:
    out = {
        "err_theta": abs(est_theta - truth.theta),
        "err_rho": abs(est_rho - truth.rho),
        "err_alpha_max": float(np.max(np.abs(est_alpha - truth.alpha))),
        "err_beta_max": float(np.max(np.abs(est_beta - truth.beta))),
    }
    for tag, i in _tracked(n).items():
        out[f"err_alpha_{tag}"] = abs(float(est_alpha[i] - truth.alpha[i]))
    return out


def _error_replication(task):
    cfg, n, cell, theta, r = task
    truth = linear_design(n, cfg["rho"], theta)
    g = sample_graph(truth, replication_seed(cfg["seed"], n, cell, r))
    out = {}
    for name in cfg["estimators"]:
        try:
            if name == "tdre":
                rep = estimate_all(tally(g))
                out[name] = _errors(rep.alpha, rep.beta, rep.theta, rep.rho, truth, n)
            else:
                p = fit_mle(g).theta_tilde
                out[name] = _errors(p.alpha, p.beta, p.theta, p.rho, truth, n)
        except DegeneracyError as exc:
            out[name] = {"failure": type(exc).__name__}
    return r, out


def _map(func, tasks, workers: int):
    if workers <= 1:
        results = [func(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [res for _, res in sorted(results, key=lambda x: x[0])]


def _summarise(outcomes: list, reps: int) -> dict:
    ok = [o for o in outcomes if "failure" not in o]
    failures = {}
    for o in outcomes:
        if "failure" in o:
            failures[o["failure"]] = failures.get(o["failure"], 0) + 1
    row = {"replications": reps, "successes": len(ok), "degenerate": reps - len(ok)}
    keys = sorted(ok[0]) if ok else []
    for k in keys:
        row[f"mean_{k}"] = float(math.fsum(o[k] for o in ok) / len(ok))
    row["failures"] = json.dumps(failures, sort_keys=True)
    return row


def run_error_table(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean absolute errors per ``(n, theta spec)`` cell and estimator.

    Degenerate replications (zero counts, or an MLE that fails to
    converge) are excluded from the means and counted per cause.
    """
    c = cfg.to_dict()
    rows = []
    for n, cell, spec, theta in _cells(cfg):
        tasks = [(c, n, cell, theta, r) for r in range(cfg.replications)]
        outcomes = _map(_error_replication, tasks, cfg.workers)
        for name in cfg.estimators:
            row = {"n": n, "theta_spec": str(spec), "theta": theta, "rho": cfg.rho, "estimator": name}
            row.update(_summarise([o[name] for o in outcomes], cfg.replications))
            if row["successes"] == 0:
                log.warning("cell n=%d theta=%s: every %s run was degenerate", n, spec, name)
            rows.append(row)
    return ExperimentResult("errors", c, rows)


def run_timing(cfg: ExperimentConfig) -> ExperimentResult:
    """Mean wall-clock seconds of each estimator, ``timing_repeats`` runs per cell.

    Graph sampling is not timed; the TDRE time includes building the
    dyad tally.  Runs are sequential so the timings do not compete.
    """
    rows = []
    for n, cell, spec, theta in _cells(cfg):
        truth = linear_design(n, cfg.rho, theta)
        times = {name: [] for name in cfg.estimators}
        failures = {name: 0 for name in cfg.estimators}
        for r in range(cfg.timing_repeats):
            g = sample_graph(truth, replication_seed(cfg.seed, n, cell, r))
            for name in cfg.estimators:
                start = time.perf_counter()
                try:
                    if name == "tdre":
                        estimate_all(tally(g))
                    else:
                        fit_mle(g)
                except DegeneracyError:
                    failures[name] += 1
                    continue
                times[name].append(time.perf_counter() - start)
        for name in cfg.estimators:
            t = times[name]
            rows.append({
                "n": n, "theta_spec": str(spec), "theta": theta, "estimator": name,
                "repeats": cfg.timing_repeats, "failures": failures[name],
                "time_mean": float(np.mean(t)) if t else None,
                "time_min": float(np.min(t)) if t else None,
            })
    return ExperimentResult("timing", cfg.to_dict(), rows)


def _coverage_replication(task):
    cfg, n, cell, theta, r, level = task
    truth = linear_design(n, cfg["rho"], theta)
    g = sample_graph(truth, replication_seed(cfg["seed"], n, cell, r))
    try:
        f = fit(tally(g))
    except DegeneracyError as exc:
        return r, {"failure": type(exc).__name__}
    rep, tab = f.report, f.table
    z = float(normal_quantile(1.0 - level / 2.0))
    track = _tracked(n)
    items = {
        "rho": (rep.rho - tab.rho_star, truth.rho, tab.sigma_rho),
        "theta": (rep.theta - tab.theta_star, truth.theta, tab.sigma_theta),
    }
    for tag, i in track.items():
        items[f"alpha_{tag}"] = (rep.alpha[i], truth.alpha[i], math.sqrt(tab.sigma_alpha2[i]))
        items[f"beta_{tag}"] = (rep.beta[i], truth.beta[i], math.sqrt(tab.sigma_beta2[i]))
    out = {}
    for name, (centre, target, se) in items.items():
        resid = float((centre - target) / se)
        out[name] = (abs(resid) <= z, resid)
    return r, out


def run_coverage(cfg: ExperimentConfig, level: float | None = None) -> ExperimentResult:
    """Coverage of the ``1 - level`` intervals and standardised residuals.

    ``rho`` and ``theta`` use the bias-corrected intervals; the degree
    parameters use ``estimate +/- z sigma_hat``.  Residuals are
    ``(estimate - bias - truth) / sigma_hat`` and go to per-cell CSVs
    for QQ plots.
    """
    level = cfg.level if level is None else level
    c = cfg.to_dict()
    rows, residuals = [], {}
    for n, cell, spec, theta in _cells(cfg):
        tasks = [(c, n, cell, theta, r, level) for r in range(cfg.replications)]
        outcomes = _map(_coverage_replication, tasks, cfg.workers)
        ok = [o for o in outcomes if "failure" not in o]
        row = {
            "n": n, "theta_spec": str(spec), "theta": theta, "rho": cfg.rho, "level": level,
            "replications": cfg.replications, "successes": len(ok),
            "degenerate": cfg.replications - len(ok),
        }
        samples = {}
        for name in COVERAGE_PARAMS:
            hits = [o[name][0] for o in ok]
            row[f"cover_{name}"] = float(np.mean(hits)) if hits else None
            samples[name] = [o[name][1] for o in ok]
        rows.append(row)
        residuals[f"n{n}_c{cell}"] = samples
    return ExperimentResult("coverage", c, rows, residuals)
