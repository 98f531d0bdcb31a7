"""Maximum-benefit assignment on the augmented trellis.

Three solvers share one result type:

* ``hungarian`` -- exact Kuhn-Munkres with row/column potentials, O(n^3).
* ``auction_sp`` -- epsilon-scaled auction in which the persons of one
  multiplicity group bid together ("similar persons").
* ``brute_force`` -- enumeration of the distinct compatible paths, a test
  oracle for n <= 8.

Persons are the augmented rows, grouped by trellis row; objects are the
trellis columns.  Within a group the persons are exchangeable, so every
solver reports the group's objects in increasing order.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RefusalError, SolverError
from .trellis import Path, RowGroupedBenefit, path_from_assignment, path_value

BRUTE_FORCE_MAX_N = 8


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    object_of_person: np.ndarray
    total_benefit: float
    iterations: int = 0
    final_epsilon: float = 0.0
    path: Path | None = None


@dataclass(frozen=True)
class AuctionConfig:
    epsilon_final: float = 1e-3
    scaling_factor: float = 4.0
    epsilon_initial: float | None = None
    max_bids: int = 10**6

    def __post_init__(self):
        if not self.epsilon_final > 0:
            raise DomainError("epsilon_final must be positive")
        if not self.scaling_factor > 1:
            raise DomainError("scaling_factor must exceed 1")
        if self.epsilon_initial is not None and not self.epsilon_initial >= self.epsilon_final:
            raise DomainError("epsilon_initial must be at least epsilon_final")

    @classmethod
    def for_alphabet(cls, m: int, **kw) -> "AuctionConfig":
        """The default final epsilon 1e-3/m."""
        return cls(epsilon_final=1e-3 / m, **kw)


def _require_square(rg: RowGroupedBenefit) -> None:
    if not rg.is_square:
        raise DomainError(f"augmented trellis is {rg.n}x{rg.base.n}, not square")


def _finish(rg: RowGroupedBenefit, object_of_person: np.ndarray, **diag) -> AssignmentResult:
    path = path_from_assignment(rg, object_of_person)
    # canonical within-group order: increasing object index
    canon = np.empty_like(object_of_person)
    idx = path.index
    for k in range(rg.base.m):
        lo, hi = rg.group_starts[k], rg.group_starts[k + 1]
        canon[lo:hi] = np.flatnonzero(idx == k)
    return AssignmentResult(canon, path_value(rg.base, path), path=path, **diag)


def hungarian(rg: RowGroupedBenefit) -> AssignmentResult:
    """Exact maximum via shortest augmenting paths with dual potentials."""
    _require_square(rg)
    n = rg.n
    if n == 0:
        return _finish(rg, np.empty(0, dtype=np.int64))
    cost = -rg.materialize()
    # 1-based bookkeeping with a dummy column 0
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j
    way = np.zeros(n + 1, dtype=np.int64)
    steps = 0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(masked)) + 1
            delta = masked[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            steps += 1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    object_of_person = np.empty(n, dtype=np.int64)
    object_of_person[p[1:] - 1] = np.arange(n)
    return _finish(rg, object_of_person, iterations=steps)


def auction_sp(rg: RowGroupedBenefit, cfg: AuctionConfig | None = None) -> AssignmentResult:
    """Epsilon-scaled auction with group bidding for similar persons.

    A group with ``u`` unassigned persons bids at once for its ``u`` best
    objects outside its holdings.  With ``w`` the next best value outside
    the holdings, every object the group ends up holding is priced so that
    its value is ``w - eps``; this keeps the group's objects mutually
    equivalent and within ``eps`` of anything it could buy, which yields a
    total benefit within ``n * epsilon_final`` of the maximum.
    """
    _require_square(rg)
    if cfg is None:
        cfg = AuctionConfig.for_alphabet(rg.base.m)
    n = rg.n
    A = rg.base.values
    mult = rg.multiplicities
    active = [k for k in range(rg.base.m) if mult[k] > 0]
    if n == 0:
        return _finish(rg, np.empty(0, dtype=np.int64))

    if len(active) == 1:
        k = active[0]
        obj = np.empty(n, dtype=np.int64)
        obj[rg.group_starts[k]:rg.group_starts[k + 1]] = np.arange(n)
        return _finish(rg, obj, iterations=0, final_epsilon=cfg.epsilon_final)

    span = float(A[active].max() - A[active].min())
    eps = cfg.epsilon_initial if cfg.epsilon_initial is not None else span / 2
    eps = max(eps, cfg.epsilon_final)
    prices = np.zeros(n)
    owner = np.full(n, -1, dtype=np.int64)
    held = np.zeros(rg.base.m, dtype=np.int64)
    bids = 0
    while True:
        owner.fill(-1)
        held.fill(0)
        queue = deque(active)
        queued = set(active)
        while queue:
            k = queue.popleft()
            queued.discard(k)
            want = int(mult[k] - held[k])
            if want == 0:
                continue
            row = A[k]
            values = row - prices
            mine = owner == k
            cand = np.where(mine, -np.inf, values)
            part = np.argpartition(-cand, want)
            targets = part[:want]
            w = cand[part[want]]
            level = w - eps
            displaced = owner[targets]
            prices[targets] = row[targets] - level
            if held[k]:
                prices[mine] = np.maximum(prices[mine], row[mine] - level)
            for g in displaced[displaced >= 0]:
                held[g] -= 1
                if g not in queued:
                    queue.append(int(g))
                    queued.add(int(g))
            owner[targets] = k
            held[k] = mult[k]
            bids += 1
            if bids > cfg.max_bids:
                raise SolverError(
                    "auction did not converge within the bid cap",
                    bids=bids, epsilon=eps, unassigned=int((owner < 0).sum()),
                )
        if eps <= cfg.epsilon_final:
            break
        eps = max(eps / cfg.scaling_factor, cfg.epsilon_final)

    object_of_person = np.empty(n, dtype=np.int64)
    for k in active:
        object_of_person[rg.group_starts[k]:rg.group_starts[k + 1]] = np.flatnonzero(owner == k)
    return _finish(rg, object_of_person, iterations=bids, final_epsilon=eps)


def _multiset_permutations(counts: list[int]):
    n = sum(counts)
    out = []
    state = [0] * n

    def rec(pos):
        if pos == n:
            out.append(tuple(state))
            return
        for k, c in enumerate(counts):
            if c:
                counts[k] -= 1
                state[pos] = k
                rec(pos + 1)
                counts[k] += 1

    rec(0)
    return out


def brute_force(rg: RowGroupedBenefit) -> AssignmentResult:
    """Exhaustive maximum over the distinct compatible paths (n <= 8)."""
    _require_square(rg)
    n = rg.n
    if n > BRUTE_FORCE_MAX_N:
        raise RefusalError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got n={n}")
    if n == 0:
        return _finish(rg, np.empty(0, dtype=np.int64))
    paths = np.array(_multiset_permutations([int(c) for c in rg.multiplicities]), dtype=np.int64)
    totals = rg.base.values[paths, np.arange(n)].sum(axis=1)
    best = int(np.argmax(totals))
    path = Path.from_index(paths[best])
    obj = np.empty(n, dtype=np.int64)
    for k in range(rg.base.m):
        obj[rg.group_starts[k]:rg.group_starts[k + 1]] = np.flatnonzero(paths[best] == k)
    return _finish(rg, obj, iterations=len(paths))
