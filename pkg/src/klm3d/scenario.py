"""Interaction tasks: modalities, trial sequences, and the two study layouts.

Published layout dimensions are honored exactly; the 3D coordinates the
study never published (where the home button or the table targets sit) are
filled in with plausible values that every layout parameter can override.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import EmptyScenario, InvalidLayout, SchemaError
from .geometry import MovementSpec, TargetGeometry, Vec3
from .operators import (
    ConfirmationOperator,
    OperatorModel,
    ParameterSet,
    Phase,
    TrialPrediction,
    default_parameters,
    predict_trial,
)

INCH = 0.0254
FOOT = 12 * INCH

TASK_KINDS = ("menu_selection", "manipulation")

# modality -> (movement-time model, confirmation per task kind)
MODALITIES: dict[str, tuple[str, dict[str, str]]] = {
    "Controller": ("distal_pointing", {"menu_selection": "trigger", "manipulation": "trigger"}),
    "ControllerBlink": ("distal_pointing", {"menu_selection": "blink", "manipulation": "blink"}),
    "GazeController": ("gaze", {"menu_selection": "trigger", "manipulation": "trigger"}),
    "GazeAirtap": ("gaze", {"menu_selection": "airtap", "manipulation": "airtap"}),
    # dwell cannot end a continuous manipulation
    "GazeDwell": ("gaze", {"menu_selection": "dwell"}),
    # menu buttons are poked, so no separate confirmation
    "Hand": ("hand", {"menu_selection": "none", "manipulation": "pinch_release"}),
}


@dataclass(frozen=True)
class Modality:
    name: str
    mt_model: OperatorModel
    confirmation: ConfirmationOperator


def make_modality(name: str, task_kind: str, params: Optional[ParameterSet] = None) -> Modality:
    params = params or default_parameters()
    if name not in MODALITIES:
        raise SchemaError(f"unknown modality {name!r}; expected one of {sorted(MODALITIES)}")
    kind, confirmations = MODALITIES[name]
    if task_kind not in confirmations:
        raise SchemaError(f"modality {name} is not used for {task_kind} tasks")
    return Modality(name, params.model(kind), params.confirmation(confirmations[task_kind]))


@dataclass(frozen=True)
class TrialSpec:
    trial_id: int
    phases: tuple[Phase, ...]


@dataclass(frozen=True)
class Scenario:
    task_kind: str
    modality: Modality
    trials: tuple[TrialSpec, ...]

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise SchemaError(f"unknown task kind {self.task_kind!r}")
        if self.task_kind not in MODALITIES[self.modality.name][1]:
            raise SchemaError(f"modality {self.modality.name} is not used for {self.task_kind} tasks")
        allowed = (1, 2) if self.task_kind == "menu_selection" else (3,)
        for trial in self.trials:
            if len(trial.phases) not in allowed:
                raise SchemaError(
                    f"trial {trial.trial_id}: {self.task_kind} trials have {allowed} phases, "
                    f"got {len(trial.phases)}"
                )


# --- menu selection ------------------------------------------------------

@dataclass(frozen=True)
class MenuLayout:
    """Menu dimensions in inches (as published) plus placement choices in meters.

    ``button_pitch_in`` is the center-to-center spacing of neighbouring
    buttons; the Next button sits ``next_offset_m`` to the right of the menu
    center.
    """

    menu_width_in: float = 14.16
    menu_height_in: float = 7.44
    button_size_in: float = 2.28
    button_pitch_in: float = 3.19
    rows: int = 2
    cols: int = 4
    pages: int = 2
    next_offset_m: float = 0.232
    next_height_m: float = 0.0
    next_size_in: Optional[float] = None

    def validate(self):
        for name in ("menu_width_in", "menu_height_in", "button_size_in", "button_pitch_in"):
            if not getattr(self, name) > 0:
                raise InvalidLayout(f"{name} must be > 0")
        if self.next_size_in is not None and not self.next_size_in > 0:
            raise InvalidLayout("next_size_in must be > 0")
        if self.rows < 1 or self.cols < 1 or self.pages < 1:
            raise InvalidLayout("rows, cols and pages must be >= 1")
        if self.button_pitch_in < self.button_size_in:
            raise InvalidLayout("buttons overlap: pitch is smaller than the button size")
        if (self.cols - 1) * self.button_pitch_in + self.button_size_in > self.menu_width_in:
            raise InvalidLayout("button grid is wider than the menu")
        if (self.rows - 1) * self.button_pitch_in + self.button_size_in > self.menu_height_in:
            raise InvalidLayout("button grid is taller than the menu")


DEFAULT_VIEWER_DISTANCE = 2.73 * FOOT


def menu_button_centers(layout: MenuLayout, viewer_distance: float) -> list[Vec3]:
    """Centers of one page's buttons, row-major from the top left."""
    pitch = layout.button_pitch_in * INCH
    centers = []
    for r in range(layout.rows):
        for c in range(layout.cols):
            x = (c - (layout.cols - 1) / 2) * pitch
            y = ((layout.rows - 1) / 2 - r) * pitch
            centers.append(Vec3(x, y, viewer_distance))
    return centers


def generate_menu_scenario(
    modality: str | Modality = "Controller",
    layout: Optional[MenuLayout] = None,
    viewer_distance: float = DEFAULT_VIEWER_DISTANCE,
    params: Optional[ParameterSet] = None,
) -> Scenario:
    """Menu selection trials: one per button, first page then second.

    The viewer sits at the origin facing +z with the menu plane
    ``viewer_distance`` away; the home button is at the menu center. Trials
    on later pages first select the Next button.
    """
    layout = layout or MenuLayout()
    layout.validate()
    if not viewer_distance > 0:
        raise InvalidLayout("viewer_distance must be > 0")
    if isinstance(modality, str):
        modality = make_modality(modality, "menu_selection", params)

    size = layout.button_size_in * INCH
    next_size = (layout.next_size_in or layout.button_size_in) * INCH
    origin = Vec3(0.0, 0.0, 0.0)
    home = Vec3(0.0, 0.0, viewer_distance)
    next_button = TargetGeometry(
        Vec3(layout.next_offset_m, layout.next_height_m, viewer_distance), next_size, "rect", next_size, next_size)

    def phase(start: Vec3, target: TargetGeometry) -> Phase:
        return Phase(MovementSpec(origin, start, target), modality.mt_model, modality.confirmation)

    trials = []
    trial_id = 1
    for page in range(layout.pages):
        for center in menu_button_centers(layout, viewer_distance):
            button = TargetGeometry(center, size, "rect", size, size)
            if page == 0:
                phases = (phase(home, button),)
            else:
                # every later page is one Next press away in the published task
                phases = (phase(home, next_button), phase(next_button.center, button))
            trials.append(TrialSpec(trial_id, phases))
            trial_id += 1
    return Scenario("menu_selection", modality, tuple(trials))


# --- manipulation --------------------------------------------------------

@dataclass(frozen=True)
class ManipulationLayout:
    """Tabletop layout in meters. y is up, the table surface is y = 0, +z points away from the participant."""

    origin: tuple[float, float, float] = (0.0, 0.5, 0.0)
    start_xs: tuple[float, ...] = (-0.2, -0.1, 0.1, 0.2)
    start_z: float = 0.45
    distance_range: tuple[float, float] = (0.12, 0.35)
    scale_range: tuple[float, float] = (1.2, 4.0)
    targets_per_direction: int = 4
    cylinder_diameter: float = 0.06
    cylinder_base_height: float = 0.05
    handle_size: float = 0.03
    depth_axis: Optional[tuple[float, float, float]] = None

    def validate(self):
        lo, hi = self.distance_range
        if not 0 < lo <= hi:
            raise InvalidLayout("distance_range must satisfy 0 < low <= high")
        slo, shi = self.scale_range
        if not 1 < slo <= shi:
            raise InvalidLayout("scale_range must satisfy 1 < low <= high")
        for name in ("cylinder_diameter", "cylinder_base_height", "handle_size"):
            if not getattr(self, name) > 0:
                raise InvalidLayout(f"{name} must be > 0")
        if not self.start_xs or self.targets_per_direction < 1:
            raise InvalidLayout("need at least one start location and one target per direction")


# far, near, east, west
_DIRECTIONS = (Vec3(0, 0, 1), Vec3(0, 0, -1), Vec3(1, 0, 0), Vec3(-1, 0, 0))


def seed_for_modality(modality: str, base_seed: int = 0) -> int:
    """Stable per-modality seed, so all participants in a modality share one sequence."""
    return (zlib.crc32(modality.encode("utf-8")) + base_seed) % 2**32


def generate_manipulation_scenario(
    seed: int,
    modality: str | Modality = "Controller",
    layout: Optional[ManipulationLayout] = None,
    params: Optional[ParameterSet] = None,
) -> Scenario:
    """Three-phase tabletop manipulation trials: place, find the handle, scale.

    For each start location, half of the targets lie toward the far/near
    table edges and half toward the east/west edges. Distances and scale
    factors are drawn uniformly from their ranges with ``seed``.
    """
    layout = layout or ManipulationLayout()
    layout.validate()
    if isinstance(modality, str):
        modality = make_modality(modality, "manipulation", params)
    rng = np.random.default_rng(seed)
    origin = Vec3.of(layout.origin)
    depth_axis = Vec3.of(layout.depth_axis).normalized() if layout.depth_axis is not None else None
    h = layout.cylinder_base_height
    per_start = layout.targets_per_direction * len(_DIRECTIONS)

    def phase(start: Vec3, target: TargetGeometry) -> Phase:
        return Phase(MovementSpec(origin, start, target, depth_axis), modality.mt_model, modality.confirmation)

    trials = []
    trial_id = 1
    for x in layout.start_xs:
        start = Vec3(x, h / 2, layout.start_z)
        distances = rng.uniform(*layout.distance_range, size=per_start)
        scales = rng.uniform(*layout.scale_range, size=per_start)
        for k in range(per_start):
            direction = _DIRECTIONS[k // layout.targets_per_direction]
            placed = start + direction.scale(float(distances[k]))
            handle = Vec3(placed.x, h, placed.z)
            pulled = Vec3(placed.x, h * float(scales[k]), placed.z)
            phases = (
                phase(start, TargetGeometry(placed, layout.cylinder_diameter, "disk")),
                phase(placed, TargetGeometry(handle, layout.handle_size, "sphere")),
                phase(handle, TargetGeometry(pulled, layout.handle_size, "sphere")),
            )
            trials.append(TrialSpec(trial_id, phases))
            trial_id += 1
    return Scenario("manipulation", modality, tuple(trials))


def manipulation_factors(scenario: Scenario) -> list[tuple[float, float]]:
    """(translation distance m, scale factor) per trial, recovered from the geometry."""
    out = []
    for trial in scenario.trials:
        place, _, scale = trial.phases
        distance = (place.movement.target.center - place.movement.start).norm()
        base = scale.movement.start.y
        out.append((distance, scale.movement.target.center.y / base))
    return out


# --- prediction ----------------------------------------------------------

@dataclass(frozen=True)
class ScenarioPrediction:
    task_kind: str
    modality: str
    trials: tuple[tuple[int, TrialPrediction], ...]
    total: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", math.fsum(p.total for _, p in self.trials))

    @property
    def mean(self) -> float:
        return self.total / len(self.trials)

    def to_dict(self) -> dict:
        return {
            "task_kind": self.task_kind,
            "modality": self.modality,
            "units": {"time": "ms"},
            "trials": [
                {"id": tid, "per_phase": list(p.per_phase), "total": p.total} for tid, p in self.trials
            ],
            "total": self.total,
            "mean": self.mean,
        }


def predict_scenario(scenario: Scenario) -> ScenarioPrediction:
    if not scenario.trials:
        raise EmptyScenario("scenario has no trials")
    return ScenarioPrediction(
        scenario.task_kind,
        scenario.modality.name,
        tuple((t.trial_id, predict_trial(t.phases)) for t in scenario.trials),
    )


# --- JSON ----------------------------------------------------------------

def scenario_to_dict(scenario: Scenario) -> dict:
    def target(t: TargetGeometry) -> dict:
        out = {"center": t.center.as_list(), "extent": t.extent, "shape": t.shape}
        if t.width is not None:
            out["width"] = t.width
        if t.height is not None:
            out["height"] = t.height
        return out

    def phase(p: Phase) -> dict:
        out = {
            "origin": p.movement.origin.as_list(),
            "start": p.movement.start.as_list(),
            "target": target(p.movement.target),
            "confirmation": p.confirmation.name,
        }
        if p.movement.depth_axis is not None:
            out["depth_axis"] = p.movement.depth_axis.as_list()
        return out

    return {
        "task_kind": scenario.task_kind,
        "modality": scenario.modality.name,
        "units": {"length": "m", "time": "ms"},
        "trials": [{"id": t.trial_id, "phases": [phase(p) for p in t.phases]} for t in scenario.trials],
    }


def _field(obj, key, where):
    if not isinstance(obj, Mapping):
        raise SchemaError(f"{where}: expected an object")
    if key not in obj:
        raise SchemaError(f"{where}.{key}: missing field")
    return obj[key]


def _vec(raw, where) -> Vec3:
    if not (isinstance(raw, Sequence) and len(raw) == 3
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in raw)):
        raise SchemaError(f"{where}: expected [x, y, z] numbers")
    try:
        return Vec3.of(raw)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def _number(raw, where) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise SchemaError(f"{where}: expected a number")
    return float(raw)


def scenario_from_dict(data, params: Optional[ParameterSet] = None, source: str = "scenario") -> Scenario:
    params = params or default_parameters()
    task_kind = _field(data, "task_kind", source)
    if task_kind not in TASK_KINDS:
        raise SchemaError(f"{source}.task_kind: expected one of {TASK_KINDS}, got {task_kind!r}")
    units = data.get("units")
    if units is not None and (not isinstance(units, Mapping) or units.get("length", "m") != "m"
                              or units.get("time", "ms") != "ms"):
        raise SchemaError(f"{source}.units: only meters and milliseconds are supported")
    modality = make_modality(_field(data, "modality", source), task_kind, params)
    raw_trials = _field(data, "trials", source)
    if not isinstance(raw_trials, list):
        raise SchemaError(f"{source}.trials: expected a list")
    trials = []
    for i, raw_trial in enumerate(raw_trials):
        where = f"{source}.trials[{i}]"
        trial_id = _field(raw_trial, "id", where)
        raw_phases = _field(raw_trial, "phases", where)
        if not isinstance(raw_phases, list):
            raise SchemaError(f"{where}.phases: expected a list")
        phases = []
        for j, rp in enumerate(raw_phases):
            pw = f"{where}.phases[{j}]"
            rt = _field(rp, "target", pw)
            try:
                target = TargetGeometry(
                    _vec(_field(rt, "center", f"{pw}.target"), f"{pw}.target.center"),
                    _number(_field(rt, "extent", f"{pw}.target"), f"{pw}.target.extent"),
                    rt.get("shape", "sphere"),
                    rt.get("width"),
                    rt.get("height"),
                )
                depth_axis = _vec(rp["depth_axis"], f"{pw}.depth_axis") if rp.get("depth_axis") is not None else None
                movement = MovementSpec(
                    _vec(_field(rp, "origin", pw), f"{pw}.origin"),
                    _vec(_field(rp, "start", pw), f"{pw}.start"),
                    target,
                    depth_axis,
                )
            except (ValueError, TypeError) as exc:
                raise SchemaError(f"{pw}: {exc}") from exc
            confirmation = params.confirmation(rp.get("confirmation", modality.confirmation.name))
            phases.append(Phase(movement, modality.mt_model, confirmation))
        trials.append(TrialSpec(trial_id, tuple(phases)))
    return Scenario(task_kind, modality, tuple(trials))


def layout_from_dict(task_kind: str, data: Mapping):
    cls = MenuLayout if task_kind == "menu_selection" else ManipulationLayout
    known = set(asdict(cls()).keys())
    unknown = set(data) - known
    if unknown:
        raise SchemaError(f"layout: unknown fields {sorted(unknown)}")
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    return cls(**values)
