"""Movement-time models, confirmation operators and their additive composition.

All times are handled in milliseconds. Each model file declares its own
native units (the distal pointing constants are published in seconds) and
values are converted once, when the model is built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from . import jsonio
from .errors import InvalidWidth, MissingCoefficients, SchemaError
from .geometry import (
    MovementSpec,
    angular_distance,
    angular_width,
    depth_change,
    linear_distance,
)

MODEL_KINDS = ("distal_pointing", "gaze", "hand")
CONFIRMATION_NAMES = ("trigger", "airtap", "pinch_release", "blink", "dwell", "none")

# Multiplier from a declared unit to the canonical one (ms, ms/bit, ms/cm, bits).
UNIT_SCALE = {
    "ms": 1.0,
    "s": 1000.0,
    "ms/bit": 1.0,
    "s/bit": 1000.0,
    "ms/cm": 1.0,
    "s/cm": 1000.0,
    "ms/m": 0.01,
    "s/m": 10.0,
    "bits": 1.0,
}
CANONICAL_UNIT = {"a": "ms", "b": "ms/bit", "c": "ms/cm", "id_crit": "bits", "saccade_ms": "ms"}

# Units a bare number is assumed to be in, and the units used when writing files.
NATIVE_UNITS = {
    "distal_pointing": {"a": "s", "b": "s/bit"},
    "gaze": {"a": "ms", "b": "ms/bit", "id_crit": "bits", "saccade_ms": "ms"},
    "hand": {"a": "ms", "b": "ms/bit", "c": "ms/cm"},
}
ID_FORMULATIONS = {
    "distal_pointing": ("angular",),
    "gaze": ("fitts", "shannon"),
    "hand": ("shannon",),
}

GAZE_ID_CRIT = 1.74
GAZE_SACCADE_MS = 232.0


@dataclass(frozen=True)
class ConfirmationOperator:
    name: str
    duration: float

    def __post_init__(self):
        if self.name not in CONFIRMATION_NAMES:
            raise ValueError(f"unknown confirmation operator {self.name!r}")
        if not self.duration >= 0:
            raise ValueError("confirmation duration must be >= 0")
        if self.name == "none" and self.duration != 0:
            raise ValueError("the 'none' confirmation has zero duration")


@dataclass(frozen=True)
class OperatorModel:
    """A movement-time model with coefficients in canonical units.

    ``embedded_confirmation`` names a confirmation whose time is already
    contained in the model's predictions (the distal pointing model was fit
    on selections that ended in a trigger pull).
    """

    kind: str
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None
    id_crit: Optional[float] = None
    saccade_ms: Optional[float] = None
    embedded_confirmation: Optional[ConfirmationOperator] = None
    id_formulation: str = ""

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.id_formulation:
            object.__setattr__(self, "id_formulation", ID_FORMULATIONS[self.kind][0])
        if self.id_formulation not in ID_FORMULATIONS[self.kind]:
            raise ValueError(f"{self.kind} does not support ID formulation {self.id_formulation!r}")
        if self.b is not None and not self.b > 0:
            raise ValueError("slope b must be > 0")
        if self.kind == "gaze":
            if self.id_crit is None or not self.id_crit > 0:
                raise ValueError("gaze id_crit must be > 0")
            if self.saccade_ms is None or not self.saccade_ms > 0:
                raise ValueError("gaze saccade_ms must be > 0")
        else:
            if self.a is None or self.b is None:
                raise ValueError(f"{self.kind} requires coefficients a and b")
        if self.kind == "hand" and self.c is None:
            raise ValueError("hand model requires coefficient c")
        if self.kind == "distal_pointing" and (
            self.embedded_confirmation is None or self.embedded_confirmation.name != "trigger"
        ):
            raise ValueError("distal_pointing predictions embed a trigger confirmation")

    @classmethod
    def from_dict(cls, data: Mapping, confirmations: Mapping[str, ConfirmationOperator] | None = None,
                  where: str = "model") -> OperatorModel:
        confirmations = confirmations or default_confirmations()
        if not isinstance(data, Mapping):
            raise SchemaError(f"{where}: expected an object")
        kind = data.get("model_kind")
        if kind not in MODEL_KINDS:
            raise SchemaError(f"{where}.model_kind: expected one of {MODEL_KINDS}, got {kind!r}")
        raw_params = data.get("params", {})
        if not isinstance(raw_params, Mapping):
            raise SchemaError(f"{where}.params: expected an object")
        values = {}
        for name, raw in raw_params.items():
            if name not in CANONICAL_UNIT:
                raise SchemaError(f"{where}.params.{name}: unknown parameter")
            values[name] = _to_canonical(raw, NATIVE_UNITS[kind].get(name, CANONICAL_UNIT[name]),
                                         f"{where}.params.{name}")
        embedded = data.get("embedded_confirmation")
        if embedded is not None:
            if embedded not in confirmations:
                raise SchemaError(f"{where}.embedded_confirmation: unknown operator {embedded!r}")
            embedded = confirmations[embedded]
        if kind == "gaze":
            values.setdefault("id_crit", GAZE_ID_CRIT)
            values.setdefault("saccade_ms", GAZE_SACCADE_MS)
        try:
            return cls(kind=kind, embedded_confirmation=embedded,
                       id_formulation=data.get("id_formulation") or "", **values)
        except ValueError as exc:
            raise SchemaError(f"{where}: {exc}") from exc

    def to_dict(self) -> dict:
        params = {}
        for name, unit in NATIVE_UNITS[self.kind].items():
            value = getattr(self, name)
            params[name] = None if value is None else {"value": value / UNIT_SCALE[unit], "unit": unit}
        return {
            "model_kind": self.kind,
            "id_formulation": self.id_formulation,
            "params": params,
            "embedded_confirmation": self.embedded_confirmation.name if self.embedded_confirmation else None,
        }


def _to_canonical(raw, default_unit: str, where: str) -> Optional[float]:
    if raw is None:
        return None
    if isinstance(raw, Mapping):
        unit = raw.get("unit", default_unit)
        value = raw.get("value")
    else:
        unit, value = default_unit, raw
    if unit not in UNIT_SCALE:
        raise SchemaError(f"{where}.unit: unknown unit {unit!r}")
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}.value: expected a number, got {value!r}")
    return float(value) * UNIT_SCALE[unit]


@dataclass(frozen=True)
class ParameterSet:
    """The three movement-time models plus the confirmation constants."""

    models: Mapping[str, OperatorModel]
    confirmations: Mapping[str, ConfirmationOperator]

    def model(self, kind: str) -> OperatorModel:
        return self.models[kind]

    def confirmation(self, name: str) -> ConfirmationOperator:
        try:
            return self.confirmations[name]
        except KeyError:
            raise SchemaError(f"unknown confirmation operator {name!r}") from None

    def with_model(self, model: OperatorModel) -> ParameterSet:
        return replace(self, models={**self.models, model.kind: model})

    def to_dict(self) -> dict:
        return {
            "confirmations": {n: {"value": c.duration, "unit": "ms"} for n, c in self.confirmations.items()},
            "models": [self.models[k].to_dict() for k in MODEL_KINDS if k in self.models],
        }

    @classmethod
    def from_dict(cls, data: Mapping, base: Optional[ParameterSet] = None,
                  source: str = "params") -> ParameterSet:
        """Build from either a bundle (``models`` list) or a single model file.

        Anything the file leaves out is taken from ``base``.
        """
        if not isinstance(data, Mapping):
            raise SchemaError(f"{source}: expected a JSON object")
        confirmations = dict(base.confirmations) if base else {}
        models = dict(base.models) if base else {}
        for name, raw in (data.get("confirmations") or {}).items():
            if name not in CONFIRMATION_NAMES:
                raise SchemaError(f"{source}.confirmations.{name}: unknown operator")
            try:
                confirmations[name] = ConfirmationOperator(
                    name, _to_canonical(raw, "ms", f"{source}.confirmations.{name}"))
            except ValueError as exc:
                raise SchemaError(f"{source}.confirmations.{name}: {exc}") from exc
        if "model_kind" in data:
            entries = [("", data)]
        else:
            raw_models = data.get("models", [])
            if not isinstance(raw_models, list):
                raise SchemaError(f"{source}.models: expected a list")
            entries = [(f"[{i}]", m) for i, m in enumerate(raw_models)]
        for suffix, entry in entries:
            model = OperatorModel.from_dict(entry, confirmations, where=f"{source}.models{suffix}")
            models[model.kind] = model
        return cls(models=models, confirmations=confirmations)


def default_confirmations() -> dict[str, ConfirmationOperator]:
    return dict(default_parameters().confirmations)


_DEFAULTS: Optional[ParameterSet] = None


def default_parameters() -> ParameterSet:
    global _DEFAULTS
    if _DEFAULTS is None:
        text = resources.files("klm3d").joinpath("data/default_params.json").read_text(encoding="utf-8")
        raw = jsonio.loads(text, source="default_params.json")
        confirmations = {
            name: ConfirmationOperator(name, _to_canonical(v, "ms", name))
            for name, v in raw["confirmations"].items()
        }
        base = ParameterSet(models={}, confirmations=confirmations)
        _DEFAULTS = ParameterSet.from_dict(raw, base=base, source="default_params.json")
    return _DEFAULTS


def load_parameters(path=None) -> ParameterSet:
    """Defaults, overlaid with the contents of ``path`` when given."""
    if path is None:
        return default_parameters()
    return ParameterSet.from_dict(jsonio.read_json(path), base=default_parameters(), source=str(path))


# --- index of difficulty -------------------------------------------------

def id_ang(alpha: float, omega: float) -> float:
    """Angular index of difficulty, log2(alpha/omega + 1), in bits."""
    if not omega > 0:
        raise InvalidWidth(f"angular width must be > 0, got {omega!r}")
    return math.log2(alpha / omega + 1.0)


def id_fitts(amplitude: float, width: float) -> float:
    """Original Fitts formulation, log2(2A/W). Zero amplitude gives -inf."""
    if not width > 0:
        raise InvalidWidth(f"target width must be > 0, got {width!r}")
    if amplitude == 0:
        return -math.inf
    return math.log2(2.0 * amplitude / width)


def id_shannon(distance: float, width: float) -> float:
    if not width > 0:
        raise InvalidWidth(f"target width must be > 0, got {width!r}")
    return math.log2(distance / width + 1.0)


# --- movement-time models ------------------------------------------------

def _model(model: Optional[OperatorModel], kind: str) -> OperatorModel:
    if model is None:
        return default_parameters().model(kind)
    if model.kind != kind:
        raise ValueError(f"expected a {kind} model, got {model.kind}")
    return model


def mt_distal_pointing(id_bits: float, model: Optional[OperatorModel] = None) -> float:
    m = _model(model, "distal_pointing")
    return m.a + m.b * id_bits


def mt_gaze(id_bits: float, model: Optional[OperatorModel] = None) -> float:
    """Constant saccade time below the critical ID, the linear Fitts fit at or above it."""
    m = _model(model, "gaze")
    if id_bits < m.id_crit:
        return m.saccade_ms
    if m.a is None or m.b is None:
        raise MissingCoefficients(
            f"gaze movement with ID {id_bits:.4f} >= id_crit {m.id_crit} needs gaze coefficients a and b; "
            "none are shipped by default, supply them in a parameter file"
        )
    return m.a + m.b * id_bits


def mt_hand(distance: float, width: float, ctd_cm: float, model: Optional[OperatorModel] = None) -> float:
    m = _model(model, "hand")
    return m.a + m.b * id_shannon(distance, width) + m.c * ctd_cm


def movement_time(model: OperatorModel, movement: MovementSpec) -> float:
    """Predicted movement time (ms) for one movement under ``model``."""
    if model.kind == "distal_pointing":
        return mt_distal_pointing(id_ang(angular_distance(movement), angular_width(movement)), model)
    if model.kind == "gaze":
        alpha, omega = angular_distance(movement), angular_width(movement)
        ident = id_fitts(alpha, omega) if model.id_formulation == "fitts" else id_shannon(alpha, omega)
        return mt_gaze(ident, model)
    return mt_hand(linear_distance(movement), movement.target.effective_extent,
                   depth_change(movement), model)


def movement_id(model: OperatorModel, movement: MovementSpec) -> float:
    """The index of difficulty ``model`` would use for ``movement``."""
    if model.kind == "distal_pointing":
        return id_ang(angular_distance(movement), angular_width(movement))
    if model.kind == "gaze":
        alpha, omega = angular_distance(movement), angular_width(movement)
        return id_fitts(alpha, omega) if model.id_formulation == "fitts" else id_shannon(alpha, omega)
    return id_shannon(linear_distance(movement), movement.target.effective_extent)


# --- composition ---------------------------------------------------------

@dataclass(frozen=True)
class Phase:
    movement: MovementSpec
    mt_model: OperatorModel
    confirmation: ConfirmationOperator


def compose(mt_ms: float, model: OperatorModel, confirmation: ConfirmationOperator) -> float:
    embedded = model.embedded_confirmation
    if embedded is None:
        return mt_ms + confirmation.duration
    if confirmation.name == embedded.name:
        return mt_ms
    # swap the embedded confirmation for the one actually performed
    return mt_ms + confirmation.duration - embedded.duration


def phase_time(phase: Phase) -> float:
    return compose(movement_time(phase.mt_model, phase.movement), phase.mt_model, phase.confirmation)


@dataclass(frozen=True)
class TrialPrediction:
    per_phase: tuple[float, ...]
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", math.fsum(self.per_phase))


def predict_trial(phases: Sequence[Phase] | Iterable[Phase]) -> TrialPrediction:
    phases = list(phases)
    if not phases:
        raise ValueError("a trial needs at least one phase")
    return TrialPrediction(tuple(phase_time(p) for p in phases))
