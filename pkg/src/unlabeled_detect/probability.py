"""Probability vectors over a finite alphabet, hypothesis models and sampling.

Symbols are 1-based at the API surface (observations, paths, JSON files) and
0-based inside numpy arrays.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path as FsPath
from typing import Iterable, Sequence

import numpy as np
from scipy.special import rel_entr

from .errors import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

PMF_FLOOR = 1e-12
_SUM_SLACK = 1e-6
_WEIGHT_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Strictly positive probability vector.

    Entries below ``PMF_FLOOR`` are raised to the floor and the vector is
    renormalized; ``correction`` records the largest absolute change made.
    """

    probs: np.ndarray
    correction: float = field(default=0.0, compare=False)

    def __init__(self, probs: Iterable[float], floor: float = PMF_FLOOR):
        raw = np.asarray(list(probs) if not isinstance(probs, np.ndarray) else probs, dtype=float)
        if raw.ndim != 1 or raw.size == 0:
            raise DomainError(f"pmf must be a non-empty vector, got shape {raw.shape}")
        if not np.all(np.isfinite(raw)) or np.any(raw < 0):
            raise DomainError(f"pmf entries must be finite and nonnegative: {raw.tolist()}")
        total = raw.sum()
        if abs(total - 1.0) > _SUM_SLACK:
            raise DomainError(f"pmf entries sum to {total!r}, expected 1")
        clamped = np.maximum(raw, floor)
        clamped = clamped / clamped.sum()
        object.__setattr__(self, "probs", _frozen(clamped))
        object.__setattr__(self, "correction", float(np.max(np.abs(clamped - raw))))

    @property
    def m(self) -> int:
        return self.probs.size

    def __len__(self) -> int:
        return self.probs.size

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.probs.shape == other.probs.shape and bool(np.all(self.probs == other.probs))

    def __hash__(self) -> int:
        return hash(self.probs.tobytes())

    def __repr__(self) -> str:
        return f"Pmf({np.array2string(self.probs, precision=6, separator=', ')})"

    @classmethod
    def uniform(cls, m: int) -> "Pmf":
        return cls(np.full(m, 1.0 / m))


@dataclass(frozen=True)
class DistributionClass:
    """A PMF together with the asymptotic fraction of indices that use it."""

    pmf: Pmf
    weight: float

    def __post_init__(self):
        if not isinstance(self.pmf, Pmf):
            object.__setattr__(self, "pmf", Pmf(self.pmf))
        if not (0.0 < self.weight <= 1.0 + _WEIGHT_TOL):
            raise DomainError(f"class weight must lie in (0, 1], got {self.weight!r}")


def _check_classes(classes: Sequence[DistributionClass], name: str) -> int:
    if len(classes) == 0:
        raise ConfigurationError("class list is empty", field=name)
    m = classes[0].pmf.m
    if any(c.pmf.m != m for c in classes):
        raise ConfigurationError("all pmfs must share one alphabet size", field=name)
    total = sum(c.weight for c in classes)
    if abs(total - 1.0) > 1e-12 * max(1, len(classes)):
        raise ConfigurationError(f"class weights sum to {total!r}, expected 1", field=name)
    return m


def class_sizes(classes: Sequence[DistributionClass], n: int) -> list[int]:
    """Number of indices owned by each class at sample size ``n``.

    Each class gets ``weight * n`` consecutive indices; non-integral products
    are a configuration error rather than something to round away.
    """
    if n < 0:
        raise ConfigurationError(f"sample size must be nonnegative, got {n}", field="n")
    sizes = []
    for idx, c in enumerate(classes):
        exact = c.weight * n
        size = int(round(exact))
        if abs(exact - size) > _WEIGHT_TOL * max(1.0, n):
            raise ConfigurationError(
                f"class {idx} with weight {c.weight!r} does not divide n={n} (weight*n = {exact!r})",
                field="n",
            )
        sizes.append(size)
    if sum(sizes) != n:
        raise ConfigurationError(f"class sizes {sizes} do not sum to n={n}", field="n")
    return sizes


@dataclass(frozen=True)
class HypothesisModel:
    """Per-index PMF sequences under H1 and H0, as weighted distribution classes."""

    h1_classes: tuple[DistributionClass, ...]
    h0_classes: tuple[DistributionClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "h1_classes", tuple(self.h1_classes))
        object.__setattr__(self, "h0_classes", tuple(self.h0_classes))
        m1 = _check_classes(self.h1_classes, "h1")
        m0 = _check_classes(self.h0_classes, "h0")
        if m1 != m0:
            raise ConfigurationError(f"alphabet sizes differ: h1 has {m1}, h0 has {m0}", field="m")

    @property
    def m(self) -> int:
        return self.h1_classes[0].pmf.m

    def classes(self, hypothesis: int) -> tuple[DistributionClass, ...]:
        if hypothesis == 1:
            return self.h1_classes
        if hypothesis == 0:
            return self.h0_classes
        raise DomainError(f"hypothesis must be 0 or 1, got {hypothesis!r}")

    def marginals(self, hypothesis: int, n: int) -> np.ndarray:
        """n-by-m array whose row i is the PMF in force at index i."""
        classes = self.classes(hypothesis)
        sizes = class_sizes(classes, n)
        rows = [np.broadcast_to(c.pmf.probs, (s, self.m)) for c, s in zip(classes, sizes)]
        return np.concatenate(rows, axis=0) if rows else np.empty((0, self.m))

    def check_n(self, n: int) -> None:
        class_sizes(self.h1_classes, n)
        class_sizes(self.h0_classes, n)

    def averages(self) -> tuple[Pmf, Pmf]:
        """(p_bar, q_bar)."""
        return average_pmf(self.h1_classes), average_pmf(self.h0_classes)


@dataclass(frozen=True, eq=False)
class TypeVector:
    """Symbol counts of an observation block."""

    counts: np.ndarray

    def __init__(self, counts: Iterable[int]):
        arr = np.asarray(list(counts) if not isinstance(counts, np.ndarray) else counts)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("counts must be a non-empty vector")
        if not np.all(arr == np.floor(arr)) or np.any(arr < 0):
            raise DomainError(f"counts must be nonnegative integers: {arr.tolist()}")
        object.__setattr__(self, "counts", _frozen(arr.astype(np.int64)))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def m(self) -> int:
        return self.counts.size

    @property
    def frequencies(self) -> np.ndarray:
        n = self.n
        if n == 0:
            return np.zeros(self.m)
        return self.counts / n

    def sorted_symbols(self) -> np.ndarray:
        """The sorted observation vector (1-based symbols)."""
        return np.repeat(np.arange(1, self.m + 1), self.counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TypeVector):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __hash__(self) -> int:
        return hash(self.counts.tobytes())

    def __repr__(self) -> str:
        return f"TypeVector({self.counts.tolist()})"


def type_vector(x: Sequence[int], m: int) -> TypeVector:
    """Count how often each symbol 1..m occurs in ``x``."""
    arr = np.asarray(x, dtype=np.int64).ravel()
    bad = np.flatnonzero((arr < 1) | (arr > m))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"symbol {int(arr[i])} at index {i} is outside the alphabet 1..{m}")
    return TypeVector(np.bincount(arr - 1, minlength=m))


def average_pmf(classes: Sequence[DistributionClass]) -> Pmf:
    """Weight-averaged PMF of a class list."""
    if len(classes) == 0:
        raise DomainError("cannot average an empty class list")
    m = classes[0].pmf.m
    if any(c.pmf.m != m for c in classes):
        raise DomainError("all pmfs must share one alphabet size")
    acc = np.zeros(m)
    for c in classes:
        acc += c.weight * c.pmf.probs
    return Pmf(acc / acc.sum())


def kl_divergence(a, b) -> float:
    """D(a || b) in nats, with 0 log 0 = 0. ``a`` may contain zeros, ``b`` may not."""
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    if pa.shape != pb.shape:
        raise DomainError(f"dimension mismatch: {pa.shape} vs {pb.shape}")
    if np.any(pb <= 0):
        raise DomainError("second argument must be strictly positive")
    return float(max(rel_entr(pa, pb).sum(), 0.0))


def paired_classes(
    a_classes: Sequence[DistributionClass], b_classes: Sequence[DistributionClass]
) -> tuple[list[DistributionClass], list[DistributionClass]]:
    """Common refinement of two class lists laid out over the same index range.

    Both lists assign consecutive index blocks in declaration order; the
    refinement splits the blocks at every boundary of either list so that
    piece ``j`` of the result covers the same indices under both.
    """
    def edges(classes):
        return np.concatenate([[0.0], np.cumsum([c.weight for c in classes])])

    ea, eb = edges(a_classes), edges(b_classes)
    cuts = np.unique(np.concatenate([ea, eb]))
    cuts = cuts[np.concatenate([[True], np.diff(cuts) > 1e-12])]
    cuts[-1] = max(ea[-1], eb[-1])
    out_a, out_b = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        ia = min(int(np.searchsorted(ea, mid) - 1), len(a_classes) - 1)
        ib = min(int(np.searchsorted(eb, mid) - 1), len(b_classes) - 1)
        out_a.append(DistributionClass(a_classes[ia].pmf, hi - lo))
        out_b.append(DistributionClass(b_classes[ib].pmf, hi - lo))
    return out_a, out_b


def divergence_rate(
    from_classes: Sequence[DistributionClass],
    to_classes: Sequence[DistributionClass],
    pairing: Sequence[int] | None = None,
) -> float:
    """Weighted average of per-class KL divergences.

    Class ``i`` of ``from_classes`` is compared with class ``pairing[i]`` of
    ``to_classes`` (identity pairing by default); paired weights must match.
    """
    if pairing is None:
        if len(from_classes) != len(to_classes):
            raise DomainError(
                f"cannot pair {len(from_classes)} classes with {len(to_classes)}; "
                "use paired_classes() to refine them first"
            )
        pairing = range(len(from_classes))
    total = 0.0
    for i, j in enumerate(pairing):
        a, b = from_classes[i], to_classes[j]
        if abs(a.weight - b.weight) > 1e-12:
            raise DomainError(f"weight mismatch in pair ({i}, {j}): {a.weight} vs {b.weight}")
        total += a.weight * kl_divergence(a.pmf.probs, b.pmf.probs)
    return total


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sample(model: HypothesisModel, hypothesis: int, n: int, rng: np.random.Generator):
    """Draw one observation block under ``hypothesis``.

    Returns the labeled vector (1-based symbols, index order) and its type.
    """
    classes = model.classes(hypothesis)
    sizes = class_sizes(classes, n)
    m = model.m
    parts = []
    for c, size in zip(classes, sizes):
        if size:
            cdf = np.cumsum(c.pmf.probs)
            cdf[-1] = 1.0
            parts.append(np.searchsorted(cdf, rng.random(size), side="right"))
    x = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    x = np.minimum(x, m - 1) + 1
    return x, TypeVector(np.bincount(x - 1, minlength=m))


def _parse_number(value) -> float:
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def model_from_dict(data: dict) -> tuple[HypothesisModel, dict]:
    """Build a model from ``{m, h0: [{pmf, weight}], h1: [...]}``.

    Returns the model and a report of the clamp corrections applied to each
    pmf (largest absolute change, keyed ``"h1[0]"`` etc.).
    """
    try:
        m = int(data["m"])
        raw = {"h1": data["h1"], "h0": data["h0"]}
    except KeyError as exc:
        raise ConfigurationError("missing required key", field=str(exc.args[0])) from None
    built = {}
    report = {}
    for name, entries in raw.items():
        classes = []
        for i, entry in enumerate(entries):
            probs = [_parse_number(v) for v in entry["pmf"]]
            if len(probs) != m:
                raise ConfigurationError(f"pmf has {len(probs)} entries, expected m={m}", field=f"{name}[{i}].pmf")
            try:
                pmf = Pmf(probs)
            except DomainError as exc:
                raise ConfigurationError(str(exc), field=f"{name}[{i}].pmf") from None
            if pmf.correction > 0:
                report[f"{name}[{i}]"] = pmf.correction
            classes.append(DistributionClass(pmf, _parse_number(entry.get("weight", 1.0))))
        built[name] = classes
    for key, corr in report.items():
        if corr > 1e-15:
            logger.info("pmf %s adjusted by clamp/renormalize (max change %.3g)", key, corr)
    return HypothesisModel(built["h1"], built["h0"]), report


def load_model(path) -> tuple[HypothesisModel, dict]:
    with open(FsPath(path), encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def model_to_dict(model: HypothesisModel) -> dict:
    def enc(classes):
        return [{"pmf": c.pmf.probs.tolist(), "weight": c.weight} for c in classes]

    return {"m": model.m, "h1": enc(model.h1_classes), "h0": enc(model.h0_classes)}
