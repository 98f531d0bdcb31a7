"""Decision statistics for unlabeled observations.

All statistics are on the log-likelihood-ratio scale: decide H1 when the
statistic exceeds the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .assignment import AuctionConfig, auction_sp, hungarian
from .errors import DomainError
from .probability import Pmf, TypeVector
from .trellis import LogLikMatrix, Path, RowGroupedBenefit, path_value

SOLVERS = ("hungarian", "auction", "detA", "detB")
Solver = Union[str, AuctionConfig]


@dataclass(frozen=True)
class DetectorOutput:
    statistic: float
    path_h1: Path | None = None
    path_h0: Path | None = None
    value_h1: float | None = None
    value_h0: float | None = None

    def to_dict(self) -> dict:
        out = {"statistic": self.statistic}
        if self.path_h1 is not None:
            out.update(
                path_h1=list(self.path_h1.states),
                path_h0=list(self.path_h0.states),
                value_h1=self.value_h1,
                value_h0=self.value_h0,
            )
        return out


def decide(statistic: float, threshold: float) -> int:
    return int(statistic > threshold)


def ulr(t: TypeVector, p_bar: Pmf, q_bar: Pmf) -> DetectorOutput:
    """Type-weighted log ratio of the averaged pmfs; cost independent of n."""
    if t.n == 0:
        raise DomainError("ULR needs at least one observation")
    p = np.asarray(p_bar, dtype=float)
    q = np.asarray(q_bar, dtype=float)
    if p.shape != (t.m,) or q.shape != (t.m,):
        raise DomainError("averaged pmfs must match the alphabet of the type")
    return DetectorOutput(float(t.counts @ (np.log(p) - np.log(q))) / t.n)


def labeled_llr(x, u: LogLikMatrix, v: LogLikMatrix) -> float:
    """Benchmark statistic when the labels are known."""
    idx = np.asarray(x, dtype=np.int64) - 1
    if idx.shape != (u.n,) or u.values.shape != v.values.shape:
        raise DomainError("observation length must match the trellis width")
    cols = np.arange(u.n)
    return float((u.values[idx, cols] - v.values[idx, cols]).sum())


def _check(t: TypeVector, trellis: LogLikMatrix) -> None:
    if t.m != trellis.m or t.n != trellis.n:
        raise DomainError(f"type {t.counts.tolist()} does not fit a {trellis.m}x{trellis.n} trellis")


def detector_a(t: TypeVector, trellis: LogLikMatrix) -> tuple[Path, float]:
    """Greedy path: walk the sorted observations, give each the best free column of its row."""
    _check(t, trellis)
    L = trellis.values
    states = np.empty(trellis.n, dtype=np.int64)
    blocked = np.zeros(trellis.n, dtype=bool)
    for k in t.sorted_symbols() - 1:
        row = np.where(blocked, -np.inf, L[k])
        col = int(np.argmax(row))
        states[col] = k
        blocked[col] = True
    path = Path.from_index(states)
    return path, path_value(trellis, path)


def detector_b(t: TypeVector, trellis: LogLikMatrix) -> tuple[Path, float]:
    """Repair the unconstrained best path with the fewest, cheapest state changes."""
    _check(t, trellis)
    L = trellis.values
    p = np.argmax(L, axis=0)
    sx = t.sorted_symbols() - 1
    sp = np.sort(p)
    g = sp != sx
    changes = np.stack([sp[g], sx[g]])
    if changes.shape[1]:
        # A run of r identical (old, new) changes applied one at a time, each
        # at the free step of least loss, picks the r smallest losses (lowest
        # column first on ties), so each run is applied in one stable sort.
        brk = np.flatnonzero(np.any(changes[:, 1:] != changes[:, :-1], axis=0)) + 1
        starts = np.concatenate([[0], brk])
        ends = np.concatenate([brk, [changes.shape[1]]])
        free = {int(s): np.flatnonzero(p == s) for s in np.unique(changes[0])}
        for lo, hi in zip(starts, ends):
            old, new = int(changes[0, lo]), int(changes[1, lo])
            cand = free[old]
            loss = L[old, cand] - L[new, cand]
            pick = np.argsort(loss, kind="stable")[: hi - lo]
            p[cand[pick]] = new
            free[old] = np.delete(cand, pick)
    path = Path.from_index(p)
    return path, path_value(trellis, path)


def best_compatible_path(t: TypeVector, trellis: LogLikMatrix, solver: Solver) -> tuple[Path, float]:
    """Path search on one trellis with the named solver."""
    if isinstance(solver, AuctionConfig):
        _check(t, trellis)
        res = auction_sp(RowGroupedBenefit.from_type(trellis, t), solver)
        return res.path, res.total_benefit
    if solver == "detA":
        return detector_a(t, trellis)
    if solver == "detB":
        return detector_b(t, trellis)
    if solver == "hungarian":
        _check(t, trellis)
        res = hungarian(RowGroupedBenefit.from_type(trellis, t))
        return res.path, res.total_benefit
    if solver == "auction":
        _check(t, trellis)
        res = auction_sp(RowGroupedBenefit.from_type(trellis, t), AuctionConfig.for_alphabet(trellis.m))
        return res.path, res.total_benefit
    raise DomainError(f"unknown solver {solver!r}; expected one of {SOLVERS} or an AuctionConfig")


def glrt(t: TypeVector, u: LogLikMatrix, v: LogLikMatrix, solver: Solver = "hungarian") -> DetectorOutput:
    """Difference of the best compatible path values under H1 and H0.

    The two searches are independent; the label estimates may differ.
    """
    if u.values.shape != v.values.shape:
        raise DomainError("H1 and H0 trellises must have the same shape")
    path1, val1 = best_compatible_path(t, u, solver)
    path0, val0 = best_compatible_path(t, v, solver)
    return DetectorOutput(val1 - val0, path1, path0, val1, val0)
