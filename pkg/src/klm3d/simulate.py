"""Synthetic participants: noisy actual times around a scenario's predictions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scenario import Scenario, ScenarioPrediction, predict_scenario
from .stats import TrialRecord

NOISE_KINDS = ("none", "gaussian", "lognormal", "constant")
MIN_ACTUAL_MS = 1.0


@dataclass(frozen=True)
class NoiseSpec:
    """Multiplicative noise: actual = predicted * (1 + eps).

    ``gaussian`` draws eps ~ N(0, scale); ``lognormal`` draws 1 + eps from a
    lognormal with mean 1 and log-SD ``scale``; ``constant`` sets eps = scale
    for every trial. Outliers multiply the actual time by
    ``outlier_multiplier``.
    """

    kind: str = "gaussian"
    scale: float = 0.0
    failure_rate: float = 0.0
    outlier_rate: float = 0.0
    outlier_multiplier: float = 3.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"noise kind must be one of {NOISE_KINDS}")
        if self.kind != "constant" and not self.scale >= 0:
            raise ValueError("noise scale must be >= 0")
        for name in ("failure_rate", "outlier_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.outlier_multiplier > 1:
            raise ValueError("outlier_multiplier must be > 1")


def _factor(noise: NoiseSpec, z: float) -> float:
    if noise.kind == "none":
        return 1.0
    if noise.kind == "constant":
        return 1.0 + noise.scale
    if noise.kind == "gaussian":
        return 1.0 + noise.scale * z
    s = noise.scale
    return float(np.exp(s * z - s * s / 2.0))


def simulate_logs(
    scenario: Scenario,
    noise: NoiseSpec,
    seed: int,
    participants: int = 1,
    prediction: Optional[ScenarioPrediction] = None,
) -> list[TrialRecord]:
    """One record per (participant, trial).

    Each record draws from its own generator keyed on (seed, participant,
    trial index), so any subset can be regenerated independently and the
    output does not depend on generation order. With ``kind="none"`` and no
    outliers the actual times equal the predictions exactly.
    """
    prediction = prediction or predict_scenario(scenario)
    records = []
    for p in range(participants):
        pid = f"P{p + 1:02d}"
        for index, (trial_id, pred) in enumerate(prediction.trials):
            rng = np.random.default_rng([seed, p, index])
            z, u_fail, u_out = rng.standard_normal(), rng.random(), rng.random()
            factor = _factor(noise, z)
            if u_out < noise.outlier_rate:
                factor *= noise.outlier_multiplier
            if factor == 1.0:
                phase_actual = pred.per_phase
                actual = pred.total
            else:
                phase_actual = tuple(t * factor for t in pred.per_phase)
                actual = pred.total * factor
            if actual < MIN_ACTUAL_MS:
                phase_actual = tuple(t * MIN_ACTUAL_MS / pred.total for t in pred.per_phase)
                actual = MIN_ACTUAL_MS
            records.append(TrialRecord(
                participant_id=pid,
                modality=scenario.modality.name,
                trial_id=str(trial_id),
                actual_total=actual,
                predicted_total=pred.total,
                failed=bool(u_fail < noise.failure_rate),
                phase_actual=phase_actual,
                phase_predicted=pred.per_phase,
            ))
    return records
