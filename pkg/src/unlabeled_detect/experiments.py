"""The three reference experiments as hypothesis models."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import ConfigurationError
from .probability import DistributionClass, HypothesisModel, Pmf, load_model, model_from_dict

EXPERIMENTS = ("exp1", "exp2", "exp3", "worked", "custom")
DEFAULT_DETECTORS = ("ulr", "detA", "detB", "auction")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "exp1"
    m: int = 3
    n: int = 100
    delta: float = 0.1
    runs: int = 10_000
    seed: int = 0
    detectors: tuple[str, ...] = DEFAULT_DETECTORS
    output_dir: str = "."
    model_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "detectors", tuple(self.detectors))
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"unknown experiment {self.experiment!r}", field="experiment")
        if self.experiment == "exp3" and self.m != 2:
            object.__setattr__(self, "m", 2)
        if self.experiment == "exp1" and self.m < 2:
            raise ConfigurationError("exp1 needs m >= 2", field="m")
        if self.experiment == "exp1" and self.n < 2:
            raise ConfigurationError("exp1 needs n >= 2", field="n")
        if self.experiment == "exp2":
            if not 0 < self.delta < 1:
                raise ConfigurationError("exp2 needs 0 < delta < 1", field="delta")
            if self.m < 2:
                raise ConfigurationError("exp2 needs m >= 2", field="m")
        if self.experiment in ("exp2", "exp3") and self.n % 2:
            raise ConfigurationError(f"{self.experiment} splits the sample in halves; n={self.n} is odd", field="n")
        if self.experiment == "worked" and (self.m, self.n) != (3, 5):
            object.__setattr__(self, "m", 3)
            if self.n != 5:
                raise ConfigurationError("the worked example has n=5", field="n")
        if self.experiment == "custom" and not self.model_path:
            raise ConfigurationError("custom experiment needs a model file", field="model")
        if self.runs < 1:
            raise ConfigurationError("runs must be positive", field="runs")

    def with_n(self, n: int) -> "ExperimentConfig":
        return replace(self, n=n)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["detectors"] = list(self.detectors)
        return d

    def provenance(self) -> dict:
        """Settings that determine results; the output location is left out."""
        d = self.as_dict()
        del d["output_dir"]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.provenance(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def exp1_columns(m: int, n: int) -> np.ndarray:
    """m-by-n matrix of H1 pmfs: rows move linearly from (k-1)*kappa to 1/m."""
    kappa = 2.0 / (m * (m - 1))
    start = kappa * np.arange(m)[:, None]
    frac = np.arange(n)[None, :] / (n - 1)
    return start + frac * (1.0 / m - start)


def exp1_average(m: int) -> np.ndarray:
    """Closed-form n-average of the exp1 columns (independent of n)."""
    k = np.arange(m)
    return 1.0 / (2 * m) + k / (m * (m - 1))


def exp1_model(m: int, n: int) -> HypothesisModel:
    cols = exp1_columns(m, n)
    h1 = [DistributionClass(Pmf(cols[:, i]), 1.0 / n) for i in range(n)]
    return HypothesisModel(h1, [DistributionClass(Pmf.uniform(m), 1.0)])


def exp2_model(m: int, delta: float) -> HypothesisModel:
    step = 2.0 / (m * (m + 1))
    q = Pmf(step * np.arange(1, m + 1))
    first = np.full(m, delta / (m - 1))
    first[0] = 1 - delta
    last = first[::-1].copy()
    h1 = [DistributionClass(Pmf(first), 0.5), DistributionClass(Pmf(last), 0.5)]
    return HypothesisModel(h1, [DistributionClass(q, 1.0)])


def exp3_model() -> HypothesisModel:
    h0 = [DistributionClass(Pmf([0.5, 0.5]), 0.5), DistributionClass(Pmf([0.3, 0.7]), 0.5)]
    h1 = [DistributionClass(Pmf([0.1, 0.9]), 0.5), DistributionClass(Pmf([0.9, 0.1]), 0.5)]
    return HypothesisModel(h1, h0)


def worked_example_model() -> HypothesisModel:
    """Five-sample, three-symbol instance with a uniform null, shipped as package data."""
    text = resources.files("unlabeled_detect").joinpath("data/worked_example.json").read_text()
    return model_from_dict(json.loads(text))[0]


def build_experiment(cfg: ExperimentConfig) -> HypothesisModel:
    if cfg.experiment == "exp1":
        model = exp1_model(cfg.m, cfg.n)
    elif cfg.experiment == "exp2":
        model = exp2_model(cfg.m, cfg.delta)
    elif cfg.experiment == "exp3":
        model = exp3_model()
    elif cfg.experiment == "worked":
        model = worked_example_model()
    else:
        model, _ = load_model(cfg.model_path)
    model.check_n(cfg.n)
    return model
