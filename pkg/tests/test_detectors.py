import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_trellis, random_type, seeds
from unlabeled_detect.assignment import AuctionConfig, brute_force
from unlabeled_detect.detectors import (
    decide,
    detector_a,
    detector_b,
    glrt,
    labeled_llr,
    ulr,
)
from unlabeled_detect.errors import DomainError
from unlabeled_detect.probability import Pmf, TypeVector, kl_divergence
from unlabeled_detect.trellis import LogLikMatrix, Path, RowGroupedBenefit, compatible, path_value

WORKED_B_VALUE = math.log(3 / 5) + math.log(7 / 12) + math.log(1 / 3) + math.log(1 / 4) + math.log(1 / 3)


def literal_b(L, x):
    """Reference detector B: one change at a time, as a plain loop (0-based)."""
    m, n = L.shape
    p = np.argmax(L, axis=0)
    sx = np.sort(x)
    sp = np.sort(p)
    g = sp != sx
    ch = np.stack([sp[g], sx[g]])
    bl = np.zeros(n, dtype=bool)
    for i in range(ch.shape[1]):
        cand = np.flatnonzero((p == ch[0, i]) & ~bl)
        k = int(np.argmin(L[ch[0, i], cand] - L[ch[1, i], cand]))
        p[cand[k]] = ch[1, i]
        bl[cand[k]] = True
    return p


def literal_a(L, x):
    """One sorted entry at a time, best unblocked column of its row, first index on ties."""
    n = L.shape[1]
    path = [None] * n
    free = list(range(n))
    for k in np.sort(x):
        best = max(free, key=lambda j: (L[k, j], -j))
        path[best] = k
        free.remove(best)
    return np.array(path)


class TestWorkedInstance:
    def test_detector_a_path(self, worked_trellis, worked_type):
        path, value = detector_a(worked_type, worked_trellis)
        assert path.states == (3, 2, 3, 1, 1)
        assert value == pytest.approx(math.log(1 / 120), abs=1e-12)

    def test_detector_b_path_and_value(self, worked_trellis, worked_type):
        path, value = detector_b(worked_type, worked_trellis)
        assert path.states == (3, 3, 2, 1, 1)
        assert value == pytest.approx(WORKED_B_VALUE, abs=1e-12)

    def test_detector_b_keeps_a_compatible_argmax_path(self, worked_trellis):
        path, _ = detector_b(TypeVector([1, 0, 4]), worked_trellis)
        assert path.states == (3, 3, 3, 3, 1)

    def test_glrt_solvers_reach_the_optimum(self, worked_trellis, worked_type):
        rg = RowGroupedBenefit.from_type(worked_trellis, worked_type)
        best = brute_force(rg).total_benefit
        v = LogLikMatrix(np.full((3, 5), math.log(1 / 3)))
        for solver in ("hungarian", "auction", "detB"):
            out = glrt(worked_type, worked_trellis, v, solver)
            assert out.value_h1 == pytest.approx(best, abs=5 * 1e-3 / 3)


class TestDegenerate:
    def test_single_symbol_alphabet(self):
        L = LogLikMatrix(np.zeros((1, 4)))
        t = TypeVector([4])
        for det in (detector_a, detector_b):
            assert det(t, L)[0].states == (1, 1, 1, 1)

    def test_constant_trellis_assigns_columns_in_order(self):
        L = LogLikMatrix(np.full((3, 5), math.log(1 / 3)))
        path, _ = detector_a(TypeVector([2, 1, 2]), L)
        assert path.states == (1, 1, 2, 3, 3)

    def test_shape_mismatch(self, worked_trellis):
        with pytest.raises(DomainError):
            detector_a(TypeVector([1, 1, 1]), worked_trellis)
        with pytest.raises(DomainError):
            glrt(TypeVector([2, 1, 2]), worked_trellis, LogLikMatrix(np.zeros((1, 5))))

    def test_unknown_solver(self, worked_trellis, worked_type):
        with pytest.raises(DomainError):
            glrt(worked_type, worked_trellis, worked_trellis, "simplex")


class TestUlr:
    def test_equal_averages_give_zero(self):
        p = Pmf([0.2, 0.3, 0.5])
        assert ulr(TypeVector([4, 0, 9]), p, p).statistic == 0.0

    def test_type_at_null_average(self):
        p, q = Pmf([0.2, 0.3, 0.5]), Pmf([0.1, 0.4, 0.5])
        out = ulr(TypeVector([1, 4, 5]), p, q)
        assert out.statistic == pytest.approx(-kl_divergence(q, p), abs=1e-15)

    def test_hand_value(self):
        out = ulr(TypeVector([2, 1, 2]), Pmf([0.2, 0.3, 0.5]), Pmf.uniform(3))
        expected = 0.4 * math.log(0.6) + 0.2 * math.log(0.9) + 0.4 * math.log(1.5)
        assert out.statistic == pytest.approx(expected, abs=1e-15)
        assert out.path_h1 is None

    def test_empty_type(self):
        with pytest.raises(DomainError):
            ulr(TypeVector([0, 0]), Pmf([0.5, 0.5]), Pmf([0.5, 0.5]))


class TestLabeled:
    def test_identical_trellises(self, worked_trellis):
        assert labeled_llr([3, 2, 1, 3, 1], worked_trellis, worked_trellis) == 0.0

    def test_worked_labels(self, worked_trellis):
        v = LogLikMatrix(np.full((3, 5), math.log(1 / 3)))
        x = [3, 2, 1, 3, 1]
        expected = path_value(worked_trellis, Path(x)) - path_value(v, Path(x))
        assert labeled_llr(x, worked_trellis, v) == pytest.approx(expected, abs=1e-14)

    def test_single_sample(self):
        u = LogLikMatrix(np.log([[0.2], [0.8]]))
        v = LogLikMatrix(np.log([[0.6], [0.4]]))
        assert labeled_llr([2], u, v) == pytest.approx(math.log(2))


def test_decide_is_strict():
    assert decide(1.0, 0.5) == 1
    assert decide(0.5, 0.5) == 0


def test_identical_hypotheses_give_zero_statistic(rng):
    L = random_trellis(rng, 4, 12)
    t = random_type(rng, 4, 12)
    for solver in ("hungarian", "auction", "detA", "detB"):
        assert glrt(t, L, L, solver).statistic == 0.0


def test_detector_output_json_shape(worked_trellis, worked_type):
    d = glrt(worked_type, worked_trellis, worked_trellis, "detB").to_dict()
    assert d["path_h1"] == [3, 3, 2, 1, 1]
    assert set(d) == {"statistic", "path_h1", "path_h0", "value_h1", "value_h0"}


@settings(max_examples=300, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 60), st.floats(0.2, 3.0))
def test_detector_b_matches_literal_listing(seed, m, n, conc):
    rng = np.random.default_rng(seed)
    L = random_trellis(rng, m, n, conc)
    t = random_type(rng, m, n)
    path, value = detector_b(t, L)
    assert np.array_equal(path.index, literal_b(L.values, t.sorted_symbols() - 1))
    assert value == path_value(L, path)


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(1, 6), st.integers(1, 40))
def test_detector_a_matches_literal_description(seed, m, n):
    rng = np.random.default_rng(seed)
    L = random_trellis(rng, m, n)
    t = random_type(rng, m, n)
    path, _ = detector_a(t, L)
    assert np.array_equal(path.index, literal_a(L.values, t.sorted_symbols() - 1))


def test_detector_b_with_tied_columns_matches_literal_listing(rng):
    # integer-valued rows produce many exact ties between candidate steps
    for _ in range(200):
        m, n = rng.integers(2, 5), rng.integers(2, 25)
        cols = rng.integers(1, 4, size=(n, m)).astype(float)
        L = LogLikMatrix(np.log(cols / cols.sum(axis=1, keepdims=True)).T)
        t = random_type(rng, m, n)
        assert np.array_equal(detector_b(t, L)[0].index, literal_b(L.values, t.sorted_symbols() - 1))


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 5), st.integers(1, 50))
def test_path_detectors_are_consistent(seed, m, n):
    rng = np.random.default_rng(seed)
    u, v = random_trellis(rng, m, n), random_trellis(rng, m, n)
    t = random_type(rng, m, n)
    for solver in ("hungarian", "auction", "detA", "detB"):
        out = glrt(t, u, v, solver)
        assert compatible(out.path_h1, t) and compatible(out.path_h0, t)
        expected = path_value(u, out.path_h1) - path_value(v, out.path_h0)
        assert out.statistic == pytest.approx(expected, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 8))
def test_hungarian_glrt_equals_brute_force_difference(seed, m, n):
    rng = np.random.default_rng(seed)
    u, v = random_trellis(rng, m, n), random_trellis(rng, m, n)
    t = random_type(rng, m, n)
    expected = (brute_force(RowGroupedBenefit.from_type(u, t)).total_benefit
                - brute_force(RowGroupedBenefit.from_type(v, t)).total_benefit)
    assert glrt(t, u, v, "hungarian").statistic == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(seeds, st.integers(1, 60))
def test_binary_alphabet_detectors_coincide(seed, n):
    rng = np.random.default_rng(seed)
    u, v = random_trellis(rng, 2, n), random_trellis(rng, 2, n)
    t = random_type(rng, 2, n)
    ref = glrt(t, u, v, "hungarian").statistic
    for solver in ("detA", "detB"):
        assert glrt(t, u, v, solver).statistic == pytest.approx(ref, abs=1e-9)
    cfg = AuctionConfig.for_alphabet(2)
    assert glrt(t, u, v, cfg).statistic == pytest.approx(ref, abs=2 * n * cfg.epsilon_final)
