"""Monte Carlo coverage study for isotonic regression at ``x = 0.5``.

Three designs with ``X ~ U(0, 1)`` and ``e ~ N(0, 1)``:

1. ``Y = 2 exp(X - 0.5) + e``
2. ``Y = 2 (X - 0.5) + exp(X) e``
3. ``Y = 24 exp(X - 0.5) - 24 (X - 0.5) - 12 (X - 0.5)^2 + 0.1 e``

Replication ``s`` draws its data from the substream ``(master_seed, s, 0)``;
all methods in a replication share one bootstrap seed, so they are compared
on common random numbers.  Results are aggregated in replication order and
do not depend on the number of worker threads.
"""

from __future__ import annotations

import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bootstrap_engine import BootstrapPlan, WeightScheme, ci_for_model
from .errors import MonobootError, ReplicationFailed
from .estimators import build_isoreg
from .gcm_core import DEFAULT_GRID_POINTS
from .mean_function import QMode

X_EVAL = 0.5
METHODS = ("oracle", "nd_known", "nd_robust", "naive", "moon")
COLUMNS = ("method", "D1_avg", "D3_avg", "coverage", "avg_length")


@dataclass(frozen=True)
class DgpModel:
    """Design with its value, exponent and drift coefficient at ``x = 0.5``."""

    id: int
    theta0_at_half: float
    q_true: int
    d_true: float

    def __post_init__(self):
        if self.id not in (1, 2, 3):
            raise ValueError("model id must be 1, 2 or 3")
        if self.q_true % 2 == 0:
            raise ValueError("q must be odd")

    def regression(self, x):
        x = np.asarray(x, dtype=float)
        v = x - 0.5
        if self.id == 1:
            return 2.0 * np.exp(v)
        if self.id == 2:
            return 2.0 * v
        return 24.0 * np.exp(v) - 24.0 * v - 12.0 * v**2


MODELS = {
    1: DgpModel(1, 2.0, 1, 1.0),
    2: DgpModel(2, 0.0, 1, 1.0),
    3: DgpModel(3, 24.0, 3, 1.0),
}


def generate_dgp(model: DgpModel | int, n: int, rng: np.random.Generator):
    """``n`` i.i.d. pairs from the chosen design."""
    model = MODELS[model] if isinstance(model, int) else model
    if n < 1:
        raise ValueError("n must be positive")
    x = rng.uniform(0.0, 1.0, n)
    e = rng.standard_normal(n)
    if model.id == 1:
        y = model.regression(x) + e
    elif model.id == 2:
        y = model.regression(x) + np.exp(x) * e
    else:
        y = model.regression(x) + 0.1 * e
    return x, y


@dataclass(frozen=True)
class SimConfig:
    """Configuration of a coverage study (JSON keys mirror the field names)."""

    model: int = 1
    n: int = 500
    S: int = 400
    B: int = 400
    methods: tuple[str, ...] = ("oracle", "nd_known", "nd_robust")
    master_seed: int = 0
    alpha: float = 0.05
    weights: str = "multinomial"
    grid_points: int = DEFAULT_GRID_POINTS
    m: int | None = None
    qbar: int = 3
    strict: bool = True

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError("model must be 1, 2 or 3")
        if self.n < 50:
            raise ValueError("n must be at least 50")
        if self.S < 1 or self.B < 1:
            raise ValueError("S and B must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")
        object.__setattr__(self, "methods", tuple(self.methods))
        WeightScheme(self.weights)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        return cls(**d)


def method_plan(method: str, config: SimConfig, seed: int) -> BootstrapPlan:
    """Bootstrap plan of a named method for one replication."""
    dgp = MODELS[config.model]
    common = dict(B=config.B, scheme=WeightScheme(config.weights), alpha=config.alpha,
                  seed=seed, grid_points=config.grid_points)
    known = QMode.known(dgp.q_true)
    if method == "oracle":
        return BootstrapPlan(mode="reshaped", q_mode=known, d_override={dgp.q_true: dgp.d_true}, **common)
    if method == "nd_known":
        return BootstrapPlan(mode="reshaped", q_mode=known, **common)
    if method == "nd_robust":
        return BootstrapPlan(mode="reshaped", q_mode=QMode.robust(config.qbar), **common)
    if method == "naive":
        return BootstrapPlan(mode="naive", **common)
    if method == "moon":
        m = config.m if config.m is not None else math.ceil(math.sqrt(config.n))
        return BootstrapPlan(mode="m_of_n", q_mode=known, m=m, **common)
    raise ValueError(f"unknown method {method!r}")


@dataclass
class SimReport:
    """Per-method summary rows and run metadata.

    ``rows`` holds one dict per method with the keys of :data:`COLUMNS`
    plus ``failures``.  Runtimes are kept in ``timing`` and are not
    serialized, so reports of identical runs are byte-identical.
    """

    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict, compare=False)

    def row(self, method: str) -> dict:
        for r in self.rows:
            if r["method"] == method:
                return r
        raise KeyError(method)


def _replication_seeds(master_seed: int, s: int) -> tuple[np.random.Generator, int]:
    data_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(s, 0))))
    boot_seed = int(np.random.SeedSequence(master_seed, spawn_key=(s, 1)).generate_state(1, np.uint64)[0])
    return data_rng, boot_seed


def run_replication(config: SimConfig, s: int) -> dict:
    """Outcomes of every method on replication ``s``.

    Returns a mapping ``method -> (covered, length, D1, D3)`` or
    ``method -> exception`` for failed methods.
    """
    dgp = MODELS[config.model]
    data_rng, boot_seed = _replication_seeds(config.master_seed, s)
    x, y = generate_dgp(dgp, config.n, data_rng)
    model = build_isoreg(x, y, X_EVAL, support=(0.0, 1.0))
    out = {}
    for method in config.methods:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                res = ci_for_model(model, method_plan(method, config, boot_seed))
        except MonobootError as exc:
            out[method] = exc
            continue
        d = res.d_estimates
        if method == "oracle":
            d = {dgp.q_true: dgp.d_true}
        out[method] = (res.covers(dgp.theta0_at_half), res.length,
                       d.get(1, math.nan), d.get(3, math.nan))
    return out


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("MONOBOOT_THREADS", "1"))
    return max(1, int(workers))


def _mean_or_none(v: list[float]):
    a = np.asarray(v, dtype=float)
    a = a[np.isfinite(a)]
    return float(np.mean(a)) if a.size else None


def run_simulation(config: SimConfig, workers: int | None = None) -> SimReport:
    """Coverage study; deterministic given ``config.master_seed``.

    Parameters
    ----------
    workers : int, optional
        Thread count; defaults to ``MONOBOOT_THREADS`` or 1.

    Raises
    ------
    ReplicationFailed
        In strict mode, when any method fails on any replication.
    """
    t0 = time.perf_counter()
    nw = _workers(workers)
    if nw == 1:
        results = [run_replication(config, s) for s in range(config.S)]
    else:
        with ThreadPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(lambda s: run_replication(config, s), range(config.S)))
    rows = []
    for method in config.methods:
        ok = [r[method] for r in results if not isinstance(r[method], Exception)]
        failures = [(s, r[method]) for s, r in enumerate(results) if isinstance(r[method], Exception)]
        if failures and config.strict:
            s, exc = failures[0]
            raise ReplicationFailed(f"{method} failed on replication {s}: {exc}") from exc
        cov = [o[0] for o in ok]
        rows.append({
            "method": method,
            "D1_avg": _mean_or_none([o[2] for o in ok]),
            "D3_avg": _mean_or_none([o[3] for o in ok]),
            "coverage": float(np.mean(cov)) if cov else None,
            "avg_length": _mean_or_none([o[1] for o in ok]),
            "failures": len(failures),
        })
    meta = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()}
    return SimReport(rows, meta, {"seconds": time.perf_counter() - t0, "workers": nw})


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    return "NA" if v is None else f"{v:.3f}"


def emit_report(report: SimReport, format: str = "json") -> str:
    """Serialize a report as ``csv``, ``markdown`` or ``json``."""
    if format == "json":
        payload = {"metadata": report.metadata, "rows": report.rows}
        return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    cells = [[r["method"]] + [_fmt(r[c]) for c in COLUMNS[1:]] for r in report.rows]
    if format == "csv":
        return "\n".join(",".join(line) for line in [list(COLUMNS)] + cells) + "\n"
    if format == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "---|" * len(COLUMNS)]
        lines += ["| " + " | ".join(c) + " |" for c in cells]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {format!r}")


def report_from_json(text: str) -> SimReport:
    """Inverse of ``emit_report(report, "json")``."""
    payload = json.loads(text)
    return SimReport(payload["rows"], payload["metadata"])


def summary_lines(report: SimReport) -> list[str]:
    """One human-readable line per method."""
    return [f"{r['method']}: coverage={_fmt(r['coverage'])} length={_fmt(r['avg_length'])} "
            f"D1={_fmt(r['D1_avg'])} D3={_fmt(r['D3_avg'])} failures={r['failures']}"
            for r in report.rows]


# ---------------------------------------------------------------------------
# bootstrap-versus-sampling-law experiment
# ---------------------------------------------------------------------------


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def sampling_law(model_id: int, n: int, reps: int, seed: int) -> np.ndarray:
    """Monte Carlo draws of ``theta_hat(0.5) - theta0(0.5)``."""
    from .estimators import generalized_grenander

    dgp = MODELS[model_id]
    out = np.empty(reps)
    for r in range(reps):
        x, y = generate_dgp(dgp, n, np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,)))))
        out[r] = generalized_grenander(build_isoreg(x, y, X_EVAL, support=(0.0, 1.0))) - dgp.theta0_at_half
    return out


def ks_experiment(model_id: int = 1, n: int = 500, B: int = 2000, reps: int = 2000,
                  seeds: int = 20, master_seed: int = 0) -> dict:
    """KS distances of reshaped (oracle drift) and naive draws to the sampling law.

    Returns arrays ``reshaped`` and ``naive`` with one distance per seed.
    """
    dgp = MODELS[model_id]
    law = sampling_law(model_id, n, reps, int(np.random.SeedSequence(master_seed, spawn_key=(2**31,))
                                               .generate_state(1, np.uint64)[0]))
    ks_r, ks_n = np.empty(seeds), np.empty(seeds)
    for s in range(seeds):
        data_rng, boot_seed = _replication_seeds(master_seed, s)
        x, y = generate_dgp(dgp, n, data_rng)
        model = build_isoreg(x, y, X_EVAL, support=(0.0, 1.0))
        oracle = BootstrapPlan(B=B, q_mode=QMode.known(dgp.q_true),
                               d_override={dgp.q_true: dgp.d_true}, seed=boot_seed)
        ks_r[s] = ks_distance(ci_for_model(model, oracle).draws, law)
        ks_n[s] = ks_distance(ci_for_model(model, BootstrapPlan(B=B, mode="naive", seed=boot_seed)).draws, law)
    return {"reshaped": ks_r, "naive": ks_n}


def _print_timing(report: SimReport) -> None:
    print(f"simulation took {report.timing.get('seconds', 0.0):.1f}s "
          f"with {report.timing.get('workers', 1)} worker(s)", file=sys.stderr)
