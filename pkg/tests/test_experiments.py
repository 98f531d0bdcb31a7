import json
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import gammaln

from conftest import WORKED_COLUMNS
from unlabeled_detect.errors import ConfigurationError
from unlabeled_detect.experiments import (
    ExperimentConfig,
    build_experiment,
    exp1_average,
    exp1_columns,
    exp1_model,
    exp2_model,
    exp3_model,
    worked_example_model,
)
from unlabeled_detect.probability import model_to_dict


class TestExp1:
    def test_three_symbol_endpoints(self):
        cols = exp1_columns(3, 11)
        np.testing.assert_allclose(cols[:, 0], [0, 1 / 3, 2 / 3], atol=1e-15)
        np.testing.assert_allclose(cols[:, -1], [1 / 3] * 3, atol=1e-15)

    @pytest.mark.parametrize("m, n", [(2, 2), (3, 5), (5, 100), (8, 37)])
    def test_columns_are_pmfs(self, m, n):
        cols = exp1_columns(m, n)
        np.testing.assert_allclose(cols.sum(axis=0), 1.0, atol=1e-14)
        assert cols.min() >= 0

    @pytest.mark.parametrize("m, n", [(3, 100), (5, 40), (4, 2)])
    def test_average_closed_form(self, m, n):
        np.testing.assert_allclose(exp1_columns(m, n).mean(axis=1), exp1_average(m), atol=1e-14)

    def test_model_layout(self):
        model = exp1_model(4, 20)
        assert len(model.classes(1)) == 20 and len(model.classes(0)) == 1
        np.testing.assert_allclose(np.asarray(model.classes(0)[0].pmf), 0.25)


class TestExp2:
    def test_null_is_increasing_ramp(self):
        model = exp2_model(5, 0.1)
        np.testing.assert_allclose(np.asarray(model.classes(0)[0].pmf), np.arange(1, 6) / 15, atol=1e-15)

    def test_alternative_classes(self):
        model = exp2_model(5, 0.2)
        first, last = (np.asarray(c.pmf) for c in model.classes(1))
        np.testing.assert_allclose(first, [0.8, 0.05, 0.05, 0.05, 0.05], atol=1e-15)
        np.testing.assert_allclose(last, first[::-1], atol=1e-15)

    def test_averages_differ(self):
        p_bar, q_bar = exp2_model(5, 0.1).averages()
        assert not np.allclose(np.asarray(p_bar), np.asarray(q_bar))


def test_exp3_classes():
    model = exp3_model()
    h1 = [np.asarray(c.pmf).tolist() for c in model.classes(1)]
    h0 = [np.asarray(c.pmf).tolist() for c in model.classes(0)]
    assert h1 == [[0.1, 0.9], [0.9, 0.1]]
    assert h0 == [[0.5, 0.5], [0.3, 0.7]]
    model.check_n(50)
    with pytest.raises(ConfigurationError):
        model.check_n(51)


def test_worked_model_matches_fractions():
    model = worked_example_model()
    got = model.marginals(1, 5)
    expected = np.array([[float(Fraction(f)) for f in col] for col in WORKED_COLUMNS])
    np.testing.assert_allclose(got, expected, atol=1e-15)
    np.testing.assert_allclose(model.marginals(0, 5), 1 / 3, atol=1e-15)


class TestConfig:
    @pytest.mark.parametrize(
        "kw, field",
        [
            (dict(experiment="exp4"), "experiment"),
            (dict(experiment="exp1", m=1), "m"),
            (dict(experiment="exp2", delta=1.0), "delta"),
            (dict(experiment="exp2", n=51), "n"),
            (dict(experiment="exp3", n=7), "n"),
            (dict(experiment="worked", n=6), "n"),
            (dict(experiment="custom"), "model"),
            (dict(runs=0), "runs"),
        ],
    )
    def test_invalid_settings_name_the_field(self, kw, field):
        with pytest.raises(ConfigurationError) as exc:
            ExperimentConfig(**kw)
        assert exc.value.field == field
        assert str(exc.value).startswith(f"{field}:")

    def test_exp3_is_binary(self):
        assert ExperimentConfig(experiment="exp3", m=7, n=50).m == 2

    def test_digest_is_stable(self):
        a = ExperimentConfig(seed=3, detectors=["ulr", "detB"])
        b = ExperimentConfig(seed=3, detectors=("ulr", "detB"))
        assert a.digest() == b.digest()
        assert a.digest() != ExperimentConfig(seed=4, detectors=("ulr", "detB")).digest()

    def test_output_dir_does_not_change_digest(self):
        assert ExperimentConfig(output_dir="a").digest() == ExperimentConfig(output_dir="b").digest()
        assert "output_dir" not in ExperimentConfig().provenance()

    def test_as_dict_is_json(self):
        json.dumps(ExperimentConfig().as_dict())


class TestBuild:
    def test_exp1_follows_n(self):
        model = build_experiment(ExperimentConfig(experiment="exp1", m=3, n=40))
        assert len(model.classes(1)) == 40

    def test_custom_model_round_trip(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps(model_to_dict(exp3_model())))
        model = build_experiment(ExperimentConfig(experiment="custom", m=2, n=20, model_path=str(path)))
        np.testing.assert_allclose(model.marginals(1, 20), exp3_model().marginals(1, 20))

    def test_custom_model_must_divide_n(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps(model_to_dict(exp3_model())))
        with pytest.raises(ConfigurationError):
            build_experiment(ExperimentConfig(experiment="custom", m=2, n=21, model_path=str(path)))


def _compositions(n, m):
    """All count vectors of length m summing to n."""
    if m == 1:
        return np.array([[n]])
    return np.vstack([np.column_stack([np.full(len(rest), k), rest])
                      for k in range(n + 1) for rest in [_compositions(n - k, m - 1)]])


def _multinomial(counts, p):
    counts = np.asarray(counts)
    n = counts.sum(axis=1)
    log = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + (counts * np.log(p)).sum(axis=1)
    return np.exp(log)


def _type_law_exp2(m, n, delta):
    """Exact law of the type under both hypotheses of exp2, keyed by a base-(n+1) index."""
    model = exp2_model(m, delta)
    first, last = (np.asarray(c.pmf) for c in model.classes(1))
    q = np.asarray(model.classes(0)[0].pmf)
    base = (n + 1) ** np.arange(m)
    half = _compositions(n // 2, m)
    pa, pb = _multinomial(half, first), _multinomial(half, last)
    idx_half = half @ base
    full = _compositions(n, m)
    p1 = np.zeros((n + 1) ** m)
    for t, w in zip(idx_half, pa):
        np.add.at(p1, t + idx_half, w * pb)
    return full, p1[full @ base], _multinomial(full, q)


def _type2_at(score, p0, p1, alpha):
    """Type-II error of the randomized test rejecting for large score at type-I exactly alpha."""
    order = np.argsort(-score, kind="stable")
    s, a, b = score[order], p0[order], p1[order]
    starts = np.flatnonzero(np.r_[True, np.diff(s) != 0])
    g0, g1 = np.add.reduceat(a, starts), np.add.reduceat(b, starts)
    c0 = np.cumsum(g0)
    k = int(np.searchsorted(c0, alpha))
    before0 = c0[k - 1] if k else 0.0
    before1 = g1[:k].sum()
    frac = (alpha - before0) / g0[k]
    return 1.0 - before1 - frac * g1[k]


def test_exp2_ulr_is_within_factor_two_of_the_unlabeled_optimum():
    # any unlabeled detector is a test on the type, so none can beat the likelihood ratio of type laws
    full, p1, p0 = _type_law_exp2(5, 20, 0.1)
    assert p1.sum() == pytest.approx(1.0, abs=1e-12) and p0.sum() == pytest.approx(1.0, abs=1e-12)
    p_bar, q_bar = exp2_model(5, 0.1).averages()
    ulr_score = full @ np.log(np.asarray(p_bar) / np.asarray(q_bar))
    optimum = _type2_at(np.log(p1) - np.log(p0), p0, p1, 0.1)
    ulr_type2 = _type2_at(ulr_score, p0, p1, 0.1)
    assert optimum <= ulr_type2 < 2 * optimum
    assert ulr_type2 < 1e-7
