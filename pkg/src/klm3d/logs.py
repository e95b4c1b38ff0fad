"""Trial-log files (CSV or JSON Lines) and joining them to predictions."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from . import jsonio
from .errors import JoinError, ParseError, SchemaError
from .stats import TrialRecord

FIELDS = (
    "participant_id", "modality", "trial_id", "actual_total", "predicted_total",
    "failed", "phase_actual", "phase_predicted",
)
REQUIRED = ("participant_id", "modality", "trial_id", "actual_total")

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


def _float(value, where: str) -> float:
    if isinstance(value, bool):
        raise SchemaError(f"{where}: expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise SchemaError(f"{where}: expected a finite number, got {value!r}")
    return out


def _floats(value, where: str) -> Optional[tuple[float, ...]]:
    if value is None or value == "":
        return None
    if isinstance(value, str):
        value = value.split(";")
    if not isinstance(value, list):
        raise SchemaError(f"{where}: expected a list of numbers")
    return tuple(_float(v, where) for v in value)


def _bool(value, where: str) -> bool:
    if isinstance(value, bool):
        return value
    if value is None:
        return False
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise SchemaError(f"{where}: expected a boolean, got {value!r}")


def record_from_row(row: Mapping, where: str) -> TrialRecord:
    for name in REQUIRED:
        if row.get(name) in (None, ""):
            raise SchemaError(f"{where}: missing field '{name}'")
    predicted = row.get("predicted_total")
    try:
        return TrialRecord(
            participant_id=str(row["participant_id"]),
            modality=str(row["modality"]),
            trial_id=str(row["trial_id"]),
            actual_total=_float(row["actual_total"], f"{where}, field 'actual_total'"),
            predicted_total=None if predicted in (None, "") else _float(predicted, f"{where}, field 'predicted_total'"),
            failed=_bool(row.get("failed"), f"{where}, field 'failed'"),
            phase_actual=_floats(row.get("phase_actual"), f"{where}, field 'phase_actual'"),
            phase_predicted=_floats(row.get("phase_predicted"), f"{where}, field 'phase_predicted'"),
        )
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def read_trial_log(path) -> list[TrialRecord]:
    """Read a log; ``.jsonl`` files are JSON Lines, anything else is CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from exc
    records = []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            row = jsonio.loads(line, source=f"{path}:{lineno}")
            if not isinstance(row, dict):
                raise SchemaError(f"{path}:{lineno}: expected a JSON object")
            records.append(record_from_row(row, f"{path}:{lineno}"))
        return records
    reader = csv.DictReader(io.StringIO(text))
    missing = [f for f in REQUIRED if f not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"{path}:1: header lacks columns {missing}")
    for row in reader:
        records.append(record_from_row(row, f"{path}:{reader.line_num}"))
    return records


def _row(r: TrialRecord) -> dict:
    return {
        "participant_id": r.participant_id,
        "modality": r.modality,
        "trial_id": r.trial_id,
        "actual_total": r.actual_total,
        "predicted_total": r.predicted_total,
        "failed": r.failed,
        "phase_actual": list(r.phase_actual) if r.phase_actual is not None else None,
        "phase_predicted": list(r.phase_predicted) if r.phase_predicted is not None else None,
    }


def write_trial_log(path, records: Iterable[TrialRecord]) -> None:
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        lines = [json.dumps(_row(r)) for r in records]
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIELDS)
    for r in records:
        row = _row(r)
        writer.writerow([
            row["participant_id"], row["modality"], row["trial_id"],
            repr(row["actual_total"]),
            "" if row["predicted_total"] is None else repr(row["predicted_total"]),
            int(row["failed"]),
            "" if row["phase_actual"] is None else ";".join(repr(v) for v in row["phase_actual"]),
            "" if row["phase_predicted"] is None else ";".join(repr(v) for v in row["phase_predicted"]),
        ])
    path.write_text(buf.getvalue(), encoding="utf-8")


# --- predictions ---------------------------------------------------------

def predictions_index(prediction_docs: Sequence[Mapping]) -> dict[tuple, tuple[float, tuple[float, ...]]]:
    """Map (participant or None, modality, trial id) -> (total, per-phase) from prediction files."""
    index = {}
    for doc in prediction_docs:
        modality = doc.get("modality")
        trials = doc.get("trials")
        if not isinstance(modality, str) or not isinstance(trials, list):
            raise SchemaError("prediction file needs 'modality' and a 'trials' list")
        for i, t in enumerate(trials):
            where = f"predictions[{modality}].trials[{i}]"
            if not isinstance(t, Mapping) or "id" not in t or "total" not in t:
                raise SchemaError(f"{where}: needs 'id' and 'total'")
            participant = t.get("participant_id")
            key = (None if participant is None else str(participant), modality, str(t["id"]))
            index[key] = (_float(t["total"], f"{where}.total"),
                          _floats(t.get("per_phase"), f"{where}.per_phase") or ())
    return index


def join_predictions(records: Sequence[TrialRecord], index: Mapping) -> list[TrialRecord]:
    """Attach predicted totals (and per-phase values) to every record.

    A prediction with a participant id only matches that participant; one
    without applies to every participant.
    """
    out, unmatched = [], []
    for r in records:
        hit = index.get((r.participant_id, r.modality, r.trial_id)) or index.get((None, r.modality, r.trial_id))
        if hit is None:
            unmatched.append(r.key)
            continue
        total, per_phase = hit
        out.append(replace(r, predicted_total=total, phase_predicted=per_phase or r.phase_predicted))
    if unmatched:
        listing = ", ".join("/".join(k) for k in unmatched[:20])
        more = f" (+{len(unmatched) - 20} more)" if len(unmatched) > 20 else ""
        raise JoinError(f"{len(unmatched)} log rows have no prediction: {listing}{more}", unmatched)
    return out
