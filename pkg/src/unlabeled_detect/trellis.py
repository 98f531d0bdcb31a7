"""Log-likelihood trellises and the implicit augmented trellis.

A trellis is the m-by-n matrix of marginal log-likelihoods, entry (k, i)
being log r_i(k).  A path picks one state per column.  The augmented
trellis repeats row k once per observed occurrence of symbol k; it is kept
implicit as (base matrix, multiplicities).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .probability import HypothesisModel, TypeVector


@dataclass(frozen=True, eq=False)
class LogLikMatrix:
    values: np.ndarray

    def __init__(self, values, check: bool = True):
        arr = np.array(values, dtype=float)
        if arr.ndim != 2:
            raise DomainError(f"trellis must be 2-D, got shape {arr.shape}")
        if check:
            if not np.all(np.isfinite(arr)):
                raise DomainError("trellis entries must be finite")
            col_mass = np.exp(arr).sum(axis=0)
            if arr.shape[1] and np.max(np.abs(col_mass - 1.0)) > 1e-9:
                raise DomainError("each trellis column must be the log of a pmf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def to_csv(self) -> str:
        """m rows by n columns, nats, 17 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.values:
            writer.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LogLikMatrix":
        rows = [[float(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
        return cls(rows)


@dataclass(frozen=True)
class Path:
    """One state per trellis column, as 1-based symbols."""

    states: tuple[int, ...]

    def __init__(self, states: Iterable[int]):
        object.__setattr__(self, "states", tuple(int(s) for s in states))

    @classmethod
    def from_index(cls, idx: np.ndarray) -> "Path":
        return cls(np.asarray(idx) + 1)

    @property
    def index(self) -> np.ndarray:
        """0-based row indices."""
        return np.asarray(self.states, dtype=np.int64) - 1

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True, eq=False)
class RowGroupedBenefit:
    """Augmented n-by-n trellis: row k of ``base`` copied ``multiplicities[k]`` times."""

    base: LogLikMatrix
    multiplicities: np.ndarray

    def __init__(self, base, multiplicities: Sequence[int]):
        if not isinstance(base, LogLikMatrix):
            base = LogLikMatrix(base, check=False)
        mult = np.asarray(multiplicities, dtype=np.int64)
        if mult.shape != (base.m,) or np.any(mult < 0):
            raise DomainError(f"need {base.m} nonnegative multiplicities, got {mult.tolist()}")
        mult.setflags(write=False)
        starts = np.concatenate([[0], np.cumsum(mult)])
        starts.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "multiplicities", mult)
        object.__setattr__(self, "_starts", starts)

    @classmethod
    def from_type(cls, base: LogLikMatrix, t: TypeVector) -> "RowGroupedBenefit":
        return cls(base, t.counts)

    @property
    def n(self) -> int:
        return int(self._starts[-1])

    @property
    def is_square(self) -> bool:
        return self.n == self.base.n

    @property
    def group_starts(self) -> np.ndarray:
        """First augmented-row index of each group (length m + 1)."""
        return self._starts

    def group_of(self, person: int) -> int:
        return int(np.searchsorted(self._starts, person, side="right") - 1)

    def materialize(self) -> np.ndarray:
        return np.repeat(self.base.values, self.multiplicities, axis=0)


def build_loglik(model: HypothesisModel, hypothesis: int, n: int) -> LogLikMatrix:
    """Trellis of log r_i(k) under the given hypothesis."""
    return LogLikMatrix(np.log(model.marginals(hypothesis, n)).T)


def path_value(matrix: LogLikMatrix, path: Path) -> float:
    idx = path.index
    if idx.size != matrix.n:
        raise DomainError(f"path has {idx.size} steps, trellis has {matrix.n} columns")
    if idx.size and (idx.min() < 0 or idx.max() >= matrix.m):
        raise DomainError("path state outside the trellis rows")
    return float(matrix.values[idx, np.arange(idx.size)].sum())


def compatible(path: Path, t: TypeVector) -> bool:
    idx = path.index
    if idx.size != t.n or (idx.size and (idx.min() < 0 or idx.max() >= t.m)):
        return False
    return bool(np.array_equal(np.bincount(idx, minlength=t.m), t.counts))


def benefit(rg: RowGroupedBenefit, person: int, obj: int) -> float:
    """Entry (person, obj) of the augmented trellis without materializing it."""
    if not (0 <= person < rg.n) or not (0 <= obj < rg.base.n):
        raise DomainError(f"index ({person}, {obj}) outside {rg.n}x{rg.base.n}")
    return float(rg.base.values[rg.group_of(person), obj])


def path_from_assignment(rg: RowGroupedBenefit, object_of_person: np.ndarray) -> Path:
    """State sequence induced by an assignment: column j gets the row group of its person."""
    groups = np.repeat(np.arange(rg.base.m), rg.multiplicities)
    states = np.empty(rg.base.n, dtype=np.int64)
    states[np.asarray(object_of_person)] = groups
    return Path.from_index(states)


def assignment_from_path(rg: RowGroupedBenefit, path: Path) -> np.ndarray:
    """Inverse of ``path_from_assignment``: persons of each group take their columns in increasing order."""
    idx = path.index
    out = np.empty(rg.n, dtype=np.int64)
    for k in range(rg.base.m):
        cols = np.flatnonzero(idx == k)
        lo, hi = rg.group_starts[k], rg.group_starts[k + 1]
        if cols.size != hi - lo:
            raise DomainError(f"path visits row {k + 1} {cols.size} times, multiplicity is {hi - lo}")
        out[lo:hi] = cols
    return out
