"""Seeded Monte Carlo: empirical ROC curves, error exponents and timing.

Every trial draws from its own counter-based stream keyed by
``(seed, hypothesis, trial)``, so results do not depend on how trials are
split across worker processes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.stats import beta

from .detectors import glrt, labeled_llr, ulr
from .errors import ConfigurationError
from .probability import HypothesisModel, Pmf, TypeVector, sample, trial_rng
from .trellis import LogLikMatrix, build_loglik

logger = logging.getLogger(__name__)

MIN_RUNS = 100
CONFIDENCE = 0.95


@dataclass(frozen=True, eq=False)
class DetectorContext:
    """Everything a detector needs for one (model, n), computed once."""

    model: HypothesisModel
    n: int
    u: LogLikMatrix
    v: LogLikMatrix
    p_bar: Pmf
    q_bar: Pmf

    @classmethod
    def build(cls, model: HypothesisModel, n: int) -> "DetectorContext":
        model.check_n(n)
        p_bar, q_bar = model.averages()
        return cls(model, n, build_loglik(model, 1, n), build_loglik(model, 0, n), p_bar, q_bar)


DetectorFn = Callable[[DetectorContext, np.ndarray, TypeVector], float]

DETECTORS: dict[str, DetectorFn] = {
    "labeled": lambda ctx, x, t: labeled_llr(x, ctx.u, ctx.v),
    "ulr": lambda ctx, x, t: ulr(t, ctx.p_bar, ctx.q_bar).statistic,
    "detA": lambda ctx, x, t: glrt(t, ctx.u, ctx.v, "detA").statistic,
    "detB": lambda ctx, x, t: glrt(t, ctx.u, ctx.v, "detB").statistic,
    "hungarian": lambda ctx, x, t: glrt(t, ctx.u, ctx.v, "hungarian").statistic,
    "auction": lambda ctx, x, t: glrt(t, ctx.u, ctx.v, "auction").statistic,
}


def check_detectors(names: Sequence[str]) -> tuple[str, ...]:
    names = tuple(names)
    unknown = [d for d in names if d not in DETECTORS]
    if unknown or not names:
        raise ConfigurationError(
            f"unknown detector(s) {unknown}; choose from {sorted(DETECTORS)}", field="detectors"
        )
    return names


# --- simulation -----------------------------------------------------------------

@lru_cache(maxsize=8)
def _context(model: HypothesisModel, n: int) -> DetectorContext:
    return DetectorContext.build(model, n)


def _run_chunk(args) -> np.ndarray:
    model, n, detectors, seed, hypothesis, lo, hi = args
    ctx = _context(model, n)
    fns = [DETECTORS[d] for d in detectors]
    out = np.empty((hi - lo, len(fns)))
    for row, trial in enumerate(range(lo, hi)):
        x, t = sample(model, hypothesis, n, trial_rng(seed, hypothesis, trial))
        for j, fn in enumerate(fns):
            out[row, j] = fn(ctx, x, t)
    return out


def default_workers() -> int:
    return os.cpu_count() or 1


def simulate(
    model: HypothesisModel,
    n: int,
    detectors: Sequence[str],
    runs: int,
    seed: int,
    workers: int | None = 1,
) -> dict[str, dict[int, np.ndarray]]:
    """Statistics of each detector on ``runs`` draws per hypothesis.

    All detectors see the same draws.  Returns ``{detector: {h: stats}}``.
    """
    detectors = check_detectors(detectors)
    if runs < 1:
        raise ConfigurationError("runs must be positive", field="runs")
    model.check_n(n)
    workers = default_workers() if workers is None else max(1, int(workers))
    result = {}
    for h in (0, 1):
        if workers == 1:
            stats = _run_chunk((model, n, detectors, seed, h, 0, runs))
        else:
            bounds = np.linspace(0, runs, 4 * workers + 1).astype(int)
            jobs = [(model, n, detectors, seed, h, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                stats = np.concatenate(list(pool.map(_run_chunk, jobs)))
        for j, d in enumerate(detectors):
            result.setdefault(d, {})[h] = stats[:, j]
    return result


# --- ROC ------------------------------------------------------------------------

def clopper_pearson(k, n: int, confidence: float = CONFIDENCE) -> tuple[np.ndarray, np.ndarray]:
    """Exact binomial interval for k successes in n trials."""
    k = np.asarray(k, dtype=float)
    a = (1 - confidence) / 2
    lo = np.where(k > 0, beta.ppf(a, k, n - k + 1), 0.0)
    hi = np.where(k < n, beta.ppf(1 - a, k + 1, n - k), 1.0)
    return np.nan_to_num(lo), np.nan_to_num(hi, nan=1.0)


def binomial_se(p: float, runs: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / runs)


@dataclass(frozen=True, eq=False)
class RocCurve:
    """Empirical operating points; decide H1 when the statistic exceeds the threshold."""

    detector: str
    n: int
    runs: int
    seed: int
    thresholds: np.ndarray
    type1: np.ndarray
    type2: np.ndarray
    type1_ci: tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)
    type2_ci: tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)
    degenerate: bool = False

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.type1.tolist(), self.type2.tolist()))

    def nearest(self, type1_target: float, log_scale: bool = False) -> int:
        """Index of the operating point whose type-I error is closest to the target."""
        if log_scale:
            with np.errstate(divide="ignore"):
                dist = np.abs(np.log(self.type1) - math.log(type1_target))
        else:
            dist = np.abs(self.type1 - type1_target)
        return int(np.argmin(dist))

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        for key, value in (metadata or {}).items():
            buf.write(f"# {key}: {value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "type1", "type2", "type1_lo", "type1_hi", "type2_lo", "type2_hi"])
        for i in range(self.thresholds.size):
            w.writerow([
                f"{self.thresholds[i]:.12g}", f"{self.type1[i]:.12g}", f"{self.type2[i]:.12g}",
                f"{self.type1_ci[0][i]:.6g}", f"{self.type1_ci[1][i]:.6g}",
                f"{self.type2_ci[0][i]:.6g}", f"{self.type2_ci[1][i]:.6g}",
            ])
        return buf.getvalue()


def roc_from_stats(stats0: np.ndarray, stats1: np.ndarray, detector: str = "", n: int = 0, seed: int = 0) -> RocCurve:
    """Exact empirical ROC: one point per distinct pooled statistic value, plus the all-H1 point."""
    s0 = np.sort(np.asarray(stats0, dtype=float))
    s1 = np.sort(np.asarray(stats1, dtype=float))
    if s0.size != s1.size:
        raise ConfigurationError("both hypotheses need the same number of runs", field="runs")
    runs = s0.size
    pooled = np.unique(np.concatenate([s0, s1]))[::-1]
    thresholds = np.append(pooled, -np.inf)
    false_alarms = runs - np.searchsorted(s0, thresholds, side="right")
    misses = np.searchsorted(s1, thresholds, side="right")
    type1 = false_alarms / runs
    type2 = misses / runs
    return RocCurve(
        detector, n, runs, seed, thresholds, type1, type2,
        clopper_pearson(false_alarms, runs), clopper_pearson(misses, runs),
        degenerate=pooled.size == 1,
    )


def roc(
    model: HypothesisModel,
    n: int,
    detector: str,
    runs: int,
    seed: int,
    workers: int | None = 1,
) -> RocCurve:
    return roc_curves(model, n, [detector], runs, seed, workers)[detector]


def roc_curves(
    model: HypothesisModel,
    n: int,
    detectors: Sequence[str],
    runs: int,
    seed: int,
    workers: int | None = 1,
) -> dict[str, RocCurve]:
    """ROC of several detectors on common draws."""
    if runs < MIN_RUNS:
        raise ConfigurationError(f"need at least {MIN_RUNS} runs, got {runs}", field="runs")
    stats = simulate(model, n, detectors, runs, seed, workers)
    curves = {}
    for d, by_h in stats.items():
        curve = roc_from_stats(by_h[0], by_h[1], d, n, seed)
        if curve.degenerate:
            logger.warning("detector %s produced a constant statistic; its ROC is a single segment", d)
        curves[d] = curve
    return curves


# --- empirical exponents -----------------------------------------------------------

@dataclass(frozen=True)
class ThresholdRule:
    """How the operating point is chosen from the H0 statistic.

    ``type1``: the point whose type-I error is nearest ``value``.
    ``exponent``: the point whose type-I error is nearest ``exp(-n * value)``
    on a log scale, so every n probes the same type-I exponent.
    """

    kind: str = "exponent"
    value: float = 0.01

    def __post_init__(self):
        if self.kind not in ("type1", "exponent"):
            raise ConfigurationError(f"unknown threshold rule {self.kind!r}", field="rule")
        if self.kind == "type1" and not 0 < self.value < 1:
            raise ConfigurationError("type-I target must lie in (0, 1)", field="rule")
        if self.kind == "exponent" and not self.value > 0:
            raise ConfigurationError("exponent target must be positive", field="rule")

    def target(self, n: int) -> float:
        return self.value if self.kind == "type1" else math.exp(-n * self.value)

    def describe(self) -> str:
        return f"{self.kind}={self.value:g}"


@dataclass(frozen=True)
class ExponentEstimate:
    n: int
    minus_log_p0_err_over_n: float
    minus_log_p1_err_over_n: float
    type1: float
    type2: float
    false_alarms: int
    misses: int
    runs: int
    threshold: float
    detector: str = ""

    @property
    def alpha(self) -> float:
        return self.minus_log_p0_err_over_n

    @property
    def beta(self) -> float:
        return self.minus_log_p1_err_over_n


def exponent_point(curve: RocCurve, rule: ThresholdRule) -> ExponentEstimate | None:
    """Operating point picked by ``rule``; None when either error count is zero."""
    i = curve.nearest(rule.target(curve.n), log_scale=rule.kind == "exponent")
    fa = int(round(curve.type1[i] * curve.runs))
    ms = int(round(curve.type2[i] * curve.runs))
    if fa == 0 or ms == 0 or fa == curve.runs or ms == curve.runs:
        return None
    return ExponentEstimate(
        curve.n,
        -math.log(curve.type1[i]) / curve.n,
        -math.log(curve.type2[i]) / curve.n,
        float(curve.type1[i]), float(curve.type2[i]), fa, ms, curve.runs,
        float(curve.thresholds[i]), curve.detector,
    )


def empirical_exponents(
    model: HypothesisModel,
    n_list: Sequence[int],
    detector: str | Sequence[str],
    threshold_rule: ThresholdRule,
    runs: int,
    seed: int,
    workers: int | None = 1,
) -> list[ExponentEstimate] | dict[str, list[ExponentEstimate]]:
    """-log(error)/n pairs per n; points with an unobserved error are dropped with a warning.

    With a single detector name the result is a list, with several a dict by detector.
    """
    names = [detector] if isinstance(detector, str) else list(detector)
    out: dict[str, list[ExponentEstimate]] = {d: [] for d in names}
    for n in n_list:
        curves = roc_curves(model, n, names, runs, seed, workers)
        for d in names:
            est = exponent_point(curves[d], threshold_rule)
            if est is None:
                warnings.warn(
                    f"{d} at n={n}: an error count is zero or saturated with {runs} runs; point dropped",
                    RuntimeWarning, stacklevel=2,
                )
                continue
            out[d].append(est)
    return out[names[0]] if isinstance(detector, str) else out


# --- timing --------------------------------------------------------------------

@dataclass(frozen=True)
class BenchTable:
    n: int
    m: int
    reps: int
    medians: dict[str, dict[int, float]]  # seconds, by detector then hypothesis

    def normalized(self) -> dict[str, dict[int, float]]:
        base = self.medians["ulr"]
        return {d: {h: v / base[h] for h, v in by_h.items()} for d, by_h in self.medians.items()}

    def to_csv(self, metadata: dict | None = None) -> str:
        buf = io.StringIO()
        for key, value in (metadata or {}).items():
            buf.write(f"# {key}: {value}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["detector", "median_s_h0", "median_s_h1", "ratio_h0", "ratio_h1"])
        norm = self.normalized()
        for d, by_h in self.medians.items():
            w.writerow([d, f"{by_h[0]:.6g}", f"{by_h[1]:.6g}", f"{norm[d][0]:.6g}", f"{norm[d][1]:.6g}"])
        return buf.getvalue()


def bench(
    model: HypothesisModel,
    n: int,
    detectors: Sequence[str] = ("ulr", "detB", "detA", "auction"),
    reps: int = 200,
    seed: int = 0,
) -> BenchTable:
    """Median wall-clock time of each statistic, detectors interleaved on common draws."""
    if reps < MIN_RUNS:
        raise ConfigurationError(f"need at least {MIN_RUNS} reps, got {reps}", field="reps")
    names = check_detectors(("ulr",) + tuple(d for d in detectors if d != "ulr"))
    ctx = DetectorContext.build(model, n)
    medians: dict[str, dict[int, float]] = {d: {} for d in names}
    clock = time.perf_counter_ns
    for h in (0, 1):
        times = np.empty((reps, len(names)))
        for r in range(reps):
            x, t = sample(model, h, n, trial_rng(seed, h, r))
            for j, d in enumerate(names):
                fn = DETECTORS[d]
                start = clock()
                fn(ctx, x, t)
                times[r, j] = clock() - start
        for j, d in enumerate(names):
            medians[d][h] = float(np.median(times[:, j])) * 1e-9
    return BenchTable(n, model.m, reps, medians)
