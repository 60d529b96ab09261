"""Monte-Carlo harness: batched runs, thresholds, distance fits, sweeps.

Reproducibility contract
------------------------
Work is split into fixed-size chunks; chunk ``k`` of a batch seeds its own
``PCG64`` from ``SeedSequence((*seed, k))`` and the adaptive stop rule is
evaluated over cumulative results *in chunk-index order*.  The set of chunks
contributing to a batch therefore depends only on (seed, config), never on
scheduling, so the CSV output is byte-identical for any worker count.

CSV schema (one row per batch):
``model,d,p,p_e,p_p,r_e,shots,failures,p_l,stderr,seed,wall_s``
Floats are rendered with ``%.12g``; ``wall_s`` is written as 0 when timing
recording is disabled (golden-file and determinism tests).
"""
from __future__ import annotations

import json
import math
import subprocess
import time
from concurrent.futures import FIRST_COMPLETED, ProcessPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ._kernels import KernelContext
from .dem import build_base_graph
from .lattice import build_lattice
from .noise import Model, NoiseParams

CHUNK_SHOTS = 512
CSV_COLUMNS = (
    "model", "d", "p", "p_e", "p_p", "r_e",
    "shots", "failures", "p_l", "stderr", "seed", "wall_s",
)
SCHEMA_VERSION = 1

#: Rough per-gate thresholds used only to center automatic sweep grids.
_PURE_LEAK_GUESS = {Model.LT: 0.036, Model.EC: 0.069, Model.LOSS: 0.045}
_PURE_PAULI_GUESS = 0.0087

SeedLike = Union[int, Sequence[int]]


class NoCrossingError(RuntimeError):
    """The logical-error curves do not cross anywhere on the scanned grid."""


class FitError(RuntimeError):
    """Too few usable grid points to fit a slope."""


def _seed_tuple(seed: SeedLike) -> Tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    out = tuple(int(s) for s in seed)
    if not out:
        raise ValueError("seed must contain at least one integer")
    return out


def _seed_text(seed: SeedLike) -> str:
    return ":".join(str(s) for s in _seed_tuple(seed))


def chunk_generator(seed: SeedLike, chunk_index: int) -> np.random.Generator:
    """The canonical per-chunk RNG; shared by every execution path."""
    entropy = _seed_tuple(seed) + (int(chunk_index),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class RunStats:
    """Aggregated result of one Monte-Carlo batch at a single operating point."""

    model: Model
    d: int
    p_e: float
    p_p: float
    shots: int
    failures: int
    seed: Tuple[int, ...]
    wall_s: float

    def __post_init__(self) -> None:
        if not 0 <= self.failures <= self.shots:
            raise ValueError("failures must lie in [0, shots]")

    @property
    def p(self) -> float:
        return self.p_e + self.p_p

    @property
    def r_e(self) -> float:
        return self.p_e / self.p if self.p > 0 else 0.0

    @property
    def p_l(self) -> float:
        return self.failures / self.shots if self.shots else 0.0

    @property
    def stderr(self) -> float:
        if self.shots == 0:
            return 0.0
        q = self.p_l
        return math.sqrt(q * (1.0 - q) / self.shots)

    def log_pl_var(self) -> float:
        """Variance of ln(p_l) from binomial statistics (inf if p_l is 0/1)."""
        if self.failures == 0 or self.failures == self.shots:
            return math.inf
        return (1.0 - self.p_l) / (self.p_l * self.shots)


@dataclass(frozen=True)
class ThresholdEstimate:
    """Crossing of two logical-error curves p_l(p; d_small), p_l(p; d_large)."""

    model: Model
    r_e: float
    d_small: int
    d_large: int
    p_th: float
    p_th_err: float
    rows: Tuple[RunStats, ...]

    def grid(self) -> Tuple[float, ...]:
        return tuple(sorted({row.p for row in self.rows}))


@dataclass(frozen=True)
class DistanceFit:
    """Weighted log-log slope of p_l versus p/p_th below the fit bound."""

    model: Model
    d: int
    slope: float
    slope_err: float
    p_th: float
    fit_bound: float
    n_used: int
    rows: Tuple[RunStats, ...]


@dataclass(frozen=True)
class RatioPoint:
    d: int
    p: float
    p_l_lt: float
    p_l_ec: float
    eta: float
    eta_err: float
    low_confidence: bool


@dataclass(frozen=True)
class SlopeFit:
    model: Model
    d: int
    slope: float
    slope_err: float
    n_used: int


@dataclass(frozen=True)
class CompareResult:
    r_e: float
    rows: Tuple[RunStats, ...]
    ratios: Tuple[RatioPoint, ...]
    slopes: Tuple[SlopeFit, ...]


_CONTEXT_CACHE: Dict[Tuple[int, NoiseParams], KernelContext] = {}


def get_context(d: int, params: NoiseParams) -> KernelContext:
    key = (d, params)
    ctx = _CONTEXT_CACHE.get(key)
    if ctx is None:
        graph = build_base_graph(build_lattice(d), params)
        ctx = KernelContext.build(graph)
        _CONTEXT_CACHE[key] = ctx
    return ctx


def _run_chunk_task(
    d: int, params: NoiseParams, seed: Tuple[int, ...], chunk_index: int, n_shots: int
) -> Tuple[int, int, int]:
    ctx = get_context(d, params)
    failures = ctx.run(n_shots, chunk_generator(seed, chunk_index))
    return chunk_index, n_shots, failures


def run_batch(
    params: NoiseParams,
    d: int,
    shots: int,
    seed: SeedLike,
    workers: int = 1,
    min_failures: int = 0,
    max_shots: Optional[int] = None,
    chunk_shots: int = CHUNK_SHOTS,
) -> RunStats:
    """Simulate and decode a batch, aggregating a logical failure count.

    With ``min_failures == 0`` exactly ``shots`` shots run.  Otherwise chunks
    keep running until both ``shots`` shots and ``min_failures`` failures have
    accumulated, or ``max_shots`` is reached, whichever comes first (evaluated
    at chunk boundaries in index order, so the result is scheduling-free).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if max_shots is not None and max_shots < shots:
        raise ValueError("max_shots must be >= shots")
    seed_t = _seed_tuple(seed)
    get_context(d, params)  # build/compile before the clock starts
    t0 = time.perf_counter()

    adaptive = min_failures > 0
    if adaptive:
        total = max_shots if max_shots is not None else shots * 10_000
    else:
        total = shots
    n_chunks = (total + chunk_shots - 1) // chunk_shots

    def size_of(k: int) -> int:
        return chunk_shots if k < n_chunks - 1 else total - chunk_shots * (n_chunks - 1)

    done_shots = 0
    done_failures = 0

    def stopped() -> bool:
        if not adaptive:
            return False  # fixed-length batch; the loop bounds handle it
        return done_shots >= shots and done_failures >= min_failures
    if workers == 1:
        for k in range(n_chunks):
            _, n, fails = _run_chunk_task(d, params, seed_t, k, size_of(k))
            done_shots += n
            done_failures += fails
            if stopped():
                break
    else:
        pending: Dict[int, Tuple[int, int]] = {}
        next_apply = 0
        next_submit = 0
        window = 4 * workers
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = set()
            while next_apply < n_chunks:
                while next_submit < n_chunks and len(futures) < window:
                    futures.add(
                        pool.submit(
                            _run_chunk_task, d, params, seed_t,
                            next_submit, size_of(next_submit),
                        )
                    )
                    next_submit += 1
                if not futures:
                    break
                ready, futures = wait(futures, return_when=FIRST_COMPLETED)
                for fut in ready:
                    k, n, fails = fut.result()
                    pending[k] = (n, fails)
                while next_apply in pending:
                    n, fails = pending.pop(next_apply)
                    done_shots += n
                    done_failures += fails
                    next_apply += 1
                    if stopped():
                        break
                if stopped():
                    for fut in futures:
                        fut.cancel()
                    break

    wall = time.perf_counter() - t0
    return RunStats(
        model=params.model, d=d, p_e=params.p_e, p_p=params.p_p,
        shots=done_shots, failures=done_failures, seed=seed_t, wall_s=wall,
    )


def _interp_crossing(
    ps: Sequence[float], deltas: Sequence[float], dvars: Sequence[float]
) -> Tuple[float, float]:
    """Root of the piecewise-linear delta curve, with propagated variance."""
    for i in range(len(ps) - 1):
        a, b = deltas[i], deltas[i + 1]
        if not (math.isfinite(a) and math.isfinite(b)):
            continue
        if a == 0.0:
            return ps[i], math.sqrt(dvars[i]) if math.isfinite(dvars[i]) else 0.0
        if (a > 0.0) != (b > 0.0):
            h = ps[i + 1] - ps[i]
            denom = a - b
            p_th = ps[i] + h * a / denom
            da = -b / denom**2  # d(t)/d(a), t = a / (a - b)
            db = a / denom**2
            var = h * h * (da * da * dvars[i] + db * db * dvars[i + 1])
            return p_th, math.sqrt(var) if math.isfinite(var) else 0.0
    raise NoCrossingError(
        f"no crossing on grid [{ps[0]:g}, {ps[-1]:g}] (deltas: "
        + ", ".join(f"{x:.3g}" for x in deltas) + ")"
    )


def estimate_threshold(
    model: Model,
    d_pair: Tuple[int, int],
    p_grid: Sequence[float],
    shots: int,
    seed: SeedLike,
    r_e: float = 1.0,
    workers: int = 1,
    **params_kw,
) -> ThresholdEstimate:
    """Locate where the curves for two lattice sizes cross.

    Below the crossing the larger lattice has the smaller logical error rate,
    above it the larger; the root of ``ln p_l(d_small) - ln p_l(d_large)``
    interpolated linearly across the grid is the threshold.
    """
    d_small, d_large = sorted(int(d) for d in d_pair)
    if d_small == d_large:
        raise ValueError("need two distinct lattice sizes")
    ps = sorted(float(p) for p in p_grid)
    if len(ps) < 2:
        raise ValueError("need at least two grid points")
    seed_t = _seed_tuple(seed)
    rows: List[RunStats] = []
    by_d: Dict[int, List[RunStats]] = {d_small: [], d_large: []}
    for j, d in enumerate((d_small, d_large)):
        for i, p in enumerate(ps):
            params = NoiseParams.from_total(p, r_e, model, **params_kw)
            st = run_batch(params, d, shots, seed_t + (j, i), workers=workers)
            rows.append(st)
            by_d[d].append(st)
    deltas, dvars = [], []
    for lo, hi in zip(by_d[d_small], by_d[d_large]):
        if lo.failures == 0 or hi.failures == 0:
            deltas.append(math.nan)
            dvars.append(math.inf)
        else:
            deltas.append(math.log(lo.p_l) - math.log(hi.p_l))
            dvars.append(lo.log_pl_var() + hi.log_pl_var())
    p_th, p_th_err = _interp_crossing(ps, deltas, dvars)
    return ThresholdEstimate(
        model=model, r_e=r_e, d_small=d_small, d_large=d_large,
        p_th=p_th, p_th_err=p_th_err, rows=tuple(rows),
    )


def _weighted_slope(xs, ys, ws) -> Tuple[float, float]:
    s = sum(ws)
    sx = sum(w * x for w, x in zip(ws, xs))
    sy = sum(w * y for w, y in zip(ws, ys))
    sxx = sum(w * x * x for w, x in zip(ws, xs))
    sxy = sum(w * x * y for w, x, y in zip(ws, xs, ys))
    det = s * sxx - sx * sx
    if det <= 0:
        raise FitError("degenerate fit abscissae")
    slope = (s * sxy - sx * sy) / det
    return slope, math.sqrt(s / det)


def fit_distance(
    model: Model,
    d: int,
    p_grid: Sequence[float],
    p_th: float,
    shots: int,
    seed: SeedLike,
    r_e: float = 1.0,
    workers: int = 1,
    min_point_failures: int = 100,
    min_failures: int = 0,
    max_shots: Optional[int] = None,
    **params_kw,
) -> DistanceFit:
    """Fit the sub-threshold scaling exponent of the logical error rate.

    All grid points must sit below ``10**-0.6 * p_th``; points with fewer
    than ``min_point_failures`` failures are excluded from the fit.
    """
    bound = 10.0 ** (-0.6) * p_th
    ps = sorted(float(p) for p in p_grid)
    bad = [p for p in ps if p > bound * (1 + 1e-12)]
    if bad:
        raise ValueError(f"grid points {bad} exceed the fit bound {bound:g}")
    seed_t = _seed_tuple(seed)
    rows: List[RunStats] = []
    for i, p in enumerate(ps):
        params = NoiseParams.from_total(p, r_e, model, **params_kw)
        rows.append(
            run_batch(
                params, d, shots, seed_t + (i,), workers=workers,
                min_failures=min_failures, max_shots=max_shots,
            )
        )
    usable = [st for st in rows if st.failures >= min_point_failures]
    if len(usable) < 3:
        raise FitError(
            f"only {len(usable)} grid points reached {min_point_failures} failures; need >= 3"
        )
    xs = [math.log(st.p / p_th) for st in usable]
    ys = [math.log(st.p_l) for st in usable]
    ws = [1.0 / st.log_pl_var() for st in usable]
    slope, slope_err = _weighted_slope(xs, ys, ws)
    return DistanceFit(
        model=model, d=d, slope=slope, slope_err=slope_err, p_th=p_th,
        fit_bound=bound, n_used=len(usable), rows=tuple(rows),
    )


def default_re_grid() -> List[float]:
    grid = [round(0.50 + 0.05 * k, 2) for k in range(11)]
    grid.append(0.98)
    return sorted(grid)


def guess_threshold(model: Model, r_e: float) -> float:
    """Harmonic interpolation between the pure-leak and pure-Pauli scales."""
    if model is Model.PAULI or r_e == 0.0:
        return _PURE_PAULI_GUESS
    pure = _PURE_LEAK_GUESS[model]
    return 1.0 / (r_e / pure + (1.0 - r_e) / _PURE_PAULI_GUESS)


def sweep_re(
    d_pair: Tuple[int, int],
    shots: int,
    seed: SeedLike,
    re_grid: Optional[Sequence[float]] = None,
    models: Sequence[Model] = (Model.LT, Model.EC),
    workers: int = 1,
    n_grid: int = 5,
    span: float = 0.22,
    max_widen: int = 2,
) -> List[ThresholdEstimate]:
    """Threshold (in total error rate) versus erasure/leak fraction.

    Grids auto-center on a harmonic-interpolation guess and widen on a missed
    crossing; each (model, r_e, attempt) triple gets its own seed branch.
    """
    res = re_grid if re_grid is not None else default_re_grid()
    seed_t = _seed_tuple(seed)
    out: List[ThresholdEstimate] = []
    for mi, model in enumerate(models):
        for ri, r_e in enumerate(res):
            if not 0.0 <= r_e <= 1.0:
                raise ValueError("erasure fraction must be in [0, 1]")
            width = span
            last_exc: Optional[NoCrossingError] = None
            for attempt in range(max_widen + 1):
                center = guess_threshold(model, r_e)
                grid = np.linspace(center * (1 - width), center * (1 + width), n_grid)
                try:
                    out.append(
                        estimate_threshold(
                            model, d_pair, [float(p) for p in grid], shots,
                            seed_t + (mi, ri, attempt), r_e=r_e, workers=workers,
                        )
                    )
                    last_exc = None
                    break
                except NoCrossingError as exc:
                    last_exc = exc
                    width *= 1.8
            if last_exc is not None:
                raise last_exc
    return out


def compare_lt_ec(
    d_list: Sequence[int],
    p_grid: Sequence[float],
    r_e: float,
    shots: int,
    seed: SeedLike,
    workers: int = 1,
    min_failures: int = 0,
    max_shots: Optional[int] = None,
    min_point_failures: int = 100,
) -> CompareResult:
    """Head-to-head of leak tracking vs mid-circuit conversion.

    Emits per-(d, p) logical-rate ratios (flagged low-confidence when either
    side has fewer than ``min_point_failures`` failures) and per-(model, d)
    log-log slopes over the confident points.
    """
    ds = sorted(int(d) for d in d_list)
    ps = sorted(float(p) for p in p_grid)
    seed_t = _seed_tuple(seed)
    rows: List[RunStats] = []
    table: Dict[Tuple[int, float, Model], RunStats] = {}
    for mi, model in enumerate((Model.LT, Model.EC)):
        for di, d in enumerate(ds):
            for pi, p in enumerate(ps):
                params = NoiseParams.from_total(p, r_e, model)
                st = run_batch(
                    params, d, shots, seed_t + (mi, di, pi), workers=workers,
                    min_failures=min_failures, max_shots=max_shots,
                )
                rows.append(st)
                table[(d, p, model)] = st
    ratios: List[RatioPoint] = []
    for d in ds:
        for p in ps:
            lt = table[(d, p, Model.LT)]
            ec = table[(d, p, Model.EC)]
            low = lt.failures < min_point_failures or ec.failures < min_point_failures
            if lt.failures > 0 and ec.failures > 0:
                eta = lt.p_l / ec.p_l
                eta_err = eta * math.sqrt(lt.log_pl_var() + ec.log_pl_var())
            else:
                eta, eta_err = math.nan, math.nan
            ratios.append(
                RatioPoint(
                    d=d, p=p, p_l_lt=lt.p_l, p_l_ec=ec.p_l,
                    eta=eta, eta_err=eta_err, low_confidence=low,
                )
            )
    slopes: List[SlopeFit] = []
    for model in (Model.LT, Model.EC):
        for d in ds:
            pts = [
                table[(d, p, model)]
                for p in ps
                if table[(d, p, model)].failures >= min_point_failures
            ]
            if len(pts) < 3:
                continue
            xs = [math.log(st.p) for st in pts]
            ys = [math.log(st.p_l) for st in pts]
            ws = [1.0 / st.log_pl_var() for st in pts]
            slope, err = _weighted_slope(xs, ys, ws)
            slopes.append(SlopeFit(model=model, d=d, slope=slope, slope_err=err, n_used=len(pts)))
    return CompareResult(r_e=r_e, rows=tuple(rows), ratios=tuple(ratios), slopes=tuple(slopes))


# ---------------------------------------------------------------------------
# serialization


def format_float(x: float) -> str:
    return f"{float(x):.12g}"


def stats_csv_row(st: RunStats, record_timing: bool = True) -> str:
    wall = st.wall_s if record_timing else 0.0
    fields = (
        st.model.value,
        str(st.d),
        format_float(st.p),
        format_float(st.p_e),
        format_float(st.p_p),
        format_float(st.r_e),
        str(st.shots),
        str(st.failures),
        format_float(st.p_l),
        format_float(st.stderr),
        _seed_text(st.seed),
        format_float(wall),
    )
    return ",".join(fields)


def write_csv(path: Union[str, Path], rows: Iterable[RunStats], record_timing: bool = True) -> None:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(stats_csv_row(st, record_timing) for st in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def git_describe() -> str:
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, cwd=Path(__file__).parent, timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    return proc.stdout.strip() if proc.returncode == 0 else "unknown"


def threshold_payload(est: ThresholdEstimate) -> dict:
    return {
        "model": est.model.value,
        "r_e": est.r_e,
        "d_small": est.d_small,
        "d_large": est.d_large,
        "p_th": est.p_th,
        "p_th_err": est.p_th_err,
        "grid": list(est.grid()),
    }


def distance_fit_payload(fit: DistanceFit) -> dict:
    return {
        "model": fit.model.value,
        "d": fit.d,
        "slope": fit.slope,
        "slope_err": fit.slope_err,
        "p_th": fit.p_th,
        "fit_bound": fit.fit_bound,
        "n_used": fit.n_used,
    }


def compare_payload(cmp_res: CompareResult) -> dict:
    return {
        "r_e": cmp_res.r_e,
        "ratios": [
            {
                "d": r.d, "p": r.p, "p_l_lt": r.p_l_lt, "p_l_ec": r.p_l_ec,
                "eta": None if math.isnan(r.eta) else r.eta,
                "eta_err": None if math.isnan(r.eta_err) else r.eta_err,
                "low_confidence": r.low_confidence,
            }
            for r in cmp_res.ratios
        ],
        "slopes": [
            {
                "model": s.model.value, "d": s.d,
                "slope": s.slope, "slope_err": s.slope_err, "n_used": s.n_used,
            }
            for s in cmp_res.slopes
        ],
    }


def write_manifest(path: Union[str, Path], command: str, config: dict, results: dict) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "tool": "rhgsim",
        "git_describe": git_describe(),
        "command": command,
        "config": config,
        "results": results,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_manifest(path: Union[str, Path]) -> dict:
    payload = json.loads(Path(path).read_text())
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported manifest schema version: {version!r}")
    return payload
