"""Command-line front end: generate, predict, simulate, evaluate, compare, calibrate.

Exit codes: 0 ok, 1 usage, 2 parse/schema, 3 data/join, 4 gate failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import jsonio
from .errors import Klm3dError, ParseError, SchemaError
from .logs import join_predictions, predictions_index, read_trial_log, write_trial_log
from .operators import OperatorModel, ParameterSet, id_ang, id_fitts, id_shannon, load_parameters
from .report import bar_chart_svg, predictions_csv, summary_csv
from .scenario import (
    DEFAULT_VIEWER_DISTANCE,
    MODALITIES,
    generate_manipulation_scenario,
    generate_menu_scenario,
    layout_from_dict,
    predict_scenario,
    scenario_from_dict,
    scenario_to_dict,
    seed_for_modality,
)
from .simulate import NOISE_KINDS, NoiseSpec, simulate_logs
from .stats import (
    PCT_FORMS,
    EvalConfig,
    evaluate,
    fit_hand_model,
    fit_id_crit,
    fit_linear,
    mean_rank_difference,
    pairwise_prediction_accuracy,
    rank_modalities,
)

PARAMS_ENV = "KLM3D_PARAMS"

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_DATA, EXIT_GATE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _params(args) -> ParameterSet:
    path = args.params or os.environ.get(PARAMS_ENV) or None
    return load_parameters(path)


def _flags(args) -> dict:
    """The flags a command ran with, recorded in its outputs."""
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in ("func",):
            continue
        out[key] = [str(v) for v in value] if isinstance(value, list) else value
    return out


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_suffix(suffix)


def _load_scenario(path, params):
    return scenario_from_dict(jsonio.read_json(path), params, source=str(path))


# --- subcommands ---------------------------------------------------------

def cmd_generate(args) -> int:
    params = _params(args)
    layout = None
    if args.layout:
        raw = jsonio.read_json(args.layout)
        if not isinstance(raw, dict):
            raise SchemaError(f"{args.layout}: expected a JSON object")
        task = "menu_selection" if args.kind == "menu" else "manipulation"
        layout = layout_from_dict(task, raw)
    if args.kind == "menu":
        scenario = generate_menu_scenario(args.modality, layout, args.viewer_distance, params)
    else:
        seed = args.seed if args.seed is not None else seed_for_modality(args.modality)
        scenario = generate_manipulation_scenario(seed, args.modality, layout, params)
    jsonio.write_json(args.out, scenario_to_dict(scenario))
    print(f"wrote {len(scenario.trials)} trials to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    params = _params(args)
    scenario = _load_scenario(args.scenario, params)
    prediction = predict_scenario(scenario).to_dict()
    if args.stamp:
        prediction["generated_at"] = datetime.now(timezone.utc).isoformat()
    out = Path(args.out)
    jsonio.write_json(out, prediction)
    _sibling(out, ".csv").write_text(predictions_csv(prediction), encoding="utf-8")
    print(f"predicted {len(prediction['trials'])} trials, total {prediction['total']:.1f} ms", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    params = _params(args)
    scenario = _load_scenario(args.scenario, params)
    noise = NoiseSpec(args.noise, args.scale, args.failure_rate, args.outlier_rate, args.outlier_multiplier)
    records = simulate_logs(scenario, noise, args.seed, participants=args.participants)
    write_trial_log(args.out, records)
    print(f"wrote {len(records)} records to {args.out}", file=sys.stderr)
    return EXIT_OK


def _prediction_docs(paths, params) -> list[dict]:
    docs = []
    for path in paths:
        doc = jsonio.read_json(path)
        if isinstance(doc, dict) and "task_kind" in doc and any("phases" in t for t in doc.get("trials", [])):
            doc = predict_scenario(scenario_from_dict(doc, params, source=str(path))).to_dict()
        docs.append(doc)
    return docs


def cmd_evaluate(args) -> int:
    params = _params(args)
    records = [r for path in args.logs for r in read_trial_log(path)]
    pred_paths = list(args.predictions or []) + list(args.scenario or [])
    if pred_paths:
        records = join_predictions(records, predictions_index(_prediction_docs(pred_paths, params)))
    config = EvalConfig(args.pct_form, args.tost_ref, args.bound, args.outlier_sd, args.alpha)
    report = evaluate(records, config).to_dict()
    report["flags"] = _flags(args)
    if args.stamp:
        report["generated_at"] = datetime.now(timezone.utc).isoformat()
    out = Path(args.out)
    jsonio.write_json(out, report)
    _sibling(out, ".csv").write_text(summary_csv(report), encoding="utf-8")
    if args.svg:
        Path(args.svg).write_text(bar_chart_svg(report), encoding="utf-8")
    for name, m in report["modalities"].items():
        tost = m["tost"] or {}
        print(f"{name:16s} pct_diff={100 * m['percent_difference']:6.2f}%  "
              f"equivalent={tost.get('equivalent')}", file=sys.stderr)
    if args.gate and not all((m["tost"] or {}).get("equivalent") for m in report["modalities"].values()):
        print("gate: at least one modality is not equivalent within the bound", file=sys.stderr)
        return EXIT_GATE
    return EXIT_OK


def read_averages(path) -> tuple[dict[str, float], dict[str, float]]:
    """Per-modality average times from JSON ``{name: {predicted, actual}}`` or CSV ``modality,predicted,actual``."""
    path = Path(path)
    predicted, actual = {}, {}
    if path.suffix.lower() == ".csv":
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"{path}: cannot read file ({exc.strerror})") from exc
        reader = csv.DictReader(io.StringIO(text))
        if not {"modality", "predicted", "actual"} <= set(reader.fieldnames or []):
            raise SchemaError(f"{path}:1: header needs modality, predicted, actual")
        rows = {row["modality"]: row for row in reader}
    else:
        rows = jsonio.read_json(path)
        if not isinstance(rows, dict):
            raise SchemaError(f"{path}: expected an object keyed by modality")
    for name, row in rows.items():
        try:
            predicted[name] = float(row["predicted"])
            actual[name] = float(row["actual"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"{path}: modality {name!r} needs numeric 'predicted' and 'actual'") from None
    return predicted, actual


def compare_averages(predicted: dict[str, float], actual: dict[str, float]) -> dict:
    pred_rank, act_rank = rank_modalities(predicted), rank_modalities(actual)
    pairwise = pairwise_prediction_accuracy(predicted, actual)
    return {
        "modalities": {
            m: {"predicted": predicted[m], "actual": actual[m],
                "predicted_rank": pred_rank[m], "actual_rank": act_rank[m]}
            for m in predicted
        },
        "mean_rank_difference": mean_rank_difference(pred_rank, act_rank),
        "pairwise": {"n_correct": pairwise.correct, "n_total": pairwise.total, "rate": pairwise.rate,
                     "incorrect_pairs": [list(p) for p in pairwise.incorrect_pairs]},
    }


def cmd_compare(args) -> int:
    result = compare_averages(*read_averages(args.averages))
    text = jsonio.dumps(result)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _column(rows, name, where) -> list[float]:
    out = []
    for lineno, row in rows:
        value = row.get(name)
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise SchemaError(f"{where}:{lineno}: field '{name}' must be a number, got {value!r}") from None
        if not math.isfinite(v):
            raise SchemaError(f"{where}:{lineno}: field '{name}' must be finite")
        out.append(v)
    return out


def calibrate_rows(rows: Sequence[tuple[int, dict]], model_kind: str, where: str = "calibration",
                   id_formulation: Optional[str] = None) -> OperatorModel:
    """Fit a model from per-movement rows.

    Rows need ``mt_ms`` plus either ``id`` or the geometry it derives from:
    ``alpha``/``omega`` (degrees) for pointing and gaze, ``distance``/``width``
    (meters) for the hand model, which also needs ``ctd`` (cm).
    """
    if not rows:
        raise SchemaError(f"{where}: no rows")
    mts = _column(rows, "mt_ms", where)
    has_id = all(row.get("id") not in (None, "") for _, row in rows)
    if model_kind in ("distal_pointing", "gaze"):
        if has_id:
            ids = _column(rows, "id", where)
        else:
            alphas, omegas = _column(rows, "alpha", where), _column(rows, "omega", where)
            if model_kind == "distal_pointing":
                ids = [id_ang(a, w) for a, w in zip(alphas, omegas)]
            elif (id_formulation or "fitts") == "fitts":
                ids = [id_fitts(a, w) for a, w in zip(alphas, omegas)]
            else:
                ids = [id_shannon(a, w) for a, w in zip(alphas, omegas)]
        if model_kind == "distal_pointing":
            fit = fit_linear(ids, mts)
            return OperatorModel.from_dict({
                "model_kind": "distal_pointing",
                "params": {"a": {"value": fit.a, "unit": "ms"}, "b": {"value": fit.b, "unit": "ms/bit"}},
                "embedded_confirmation": "trigger",
            })
        fit = fit_id_crit(ids, mts)
        params = {
            "a": {"value": fit.a, "unit": "ms"},
            "b": {"value": fit.b, "unit": "ms/bit"},
            "id_crit": {"value": fit.id_crit, "unit": "bits"},
        }
        if fit.saccade_ms is not None:
            params["saccade_ms"] = {"value": fit.saccade_ms, "unit": "ms"}
        return OperatorModel.from_dict({"model_kind": "gaze", "id_formulation": id_formulation or "fitts",
                                        "params": params})
    if model_kind == "hand":
        if has_id:
            ids = _column(rows, "id", where)
        else:
            ids = [id_shannon(d, w) for d, w in zip(_column(rows, "distance", where), _column(rows, "width", where))]
        fit = fit_hand_model(ids, _column(rows, "ctd", where), mts)
        return OperatorModel.from_dict({
            "model_kind": "hand",
            "params": {"a": {"value": fit.a, "unit": "ms"}, "b": {"value": fit.b, "unit": "ms/bit"},
                       "c": {"value": fit.c, "unit": "ms/cm"}},
        })
    raise UsageError(f"unknown model kind {model_kind!r}")


def cmd_calibrate(args) -> int:
    path = Path(args.logs)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from exc
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        rows = [(i, jsonio.loads(line, f"{path}:{i}")) for i, line in enumerate(text.splitlines(), 1) if line.strip()]
    else:
        reader = csv.DictReader(io.StringIO(text))
        rows = [(reader.line_num, row) for row in reader]
    model = calibrate_rows(rows, args.model, str(path), args.id_formulation)
    jsonio.write_json(args.out, model.to_dict())
    print(f"wrote fitted {args.model} parameters to {args.out}", file=sys.stderr)
    return EXIT_OK


# --- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="klm3d", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_params(p):
        p.add_argument("--params", help=f"operator parameter file (default: ${PARAMS_ENV} or built-in constants)")

    p = sub.add_parser("generate", help="generate a menu or manipulation scenario")
    p.add_argument("kind", choices=("menu", "manipulation"))
    p.add_argument("--modality", default="Controller", choices=sorted(MODALITIES))
    p.add_argument("--seed", type=int, help="manipulation only; default derives from the modality name")
    p.add_argument("--viewer-distance", type=float, default=DEFAULT_VIEWER_DISTANCE, help="menu only, meters")
    p.add_argument("--layout", help="JSON file overriding layout parameters")
    p.add_argument("--out", required=True)
    with_params(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("predict", help="predict per-trial times for a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True, help="JSON path; a CSV is written next to it")
    p.add_argument("--stamp", action="store_true", help="embed a timestamp")
    with_params(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="simulate trial logs around a scenario's predictions")
    p.add_argument("--scenario", required=True)
    p.add_argument("--noise", choices=NOISE_KINDS, default="gaussian")
    p.add_argument("--scale", type=float, default=0.1, help="noise scale as a fraction of predicted time")
    p.add_argument("--failure-rate", type=float, default=0.0)
    p.add_argument("--outlier-rate", type=float, default=0.0)
    p.add_argument("--outlier-multiplier", type=float, default=3.0)
    p.add_argument("--participants", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help=".csv or .jsonl")
    with_params(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="compare logged times with predictions")
    p.add_argument("--logs", action="append", required=True)
    p.add_argument("--predictions", action="append", help="prediction or scenario JSON (repeatable)")
    p.add_argument("--scenario", action="append", help="scenario JSON to predict and join (repeatable)")
    p.add_argument("--pct-form", choices=PCT_FORMS, default="symmetric")
    p.add_argument("--tost-ref", choices=PCT_FORMS, default="vs-predicted")
    p.add_argument("--bound", type=float, default=0.20)
    p.add_argument("--outlier-sd", type=float, default=2.0)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--gate", action="store_true", help="exit 4 unless every modality is equivalent")
    p.add_argument("--stamp", action="store_true", help="embed a timestamp")
    p.add_argument("--svg", help="also write a bar chart here")
    p.add_argument("--out", required=True, help="JSON path; a CSV summary is written next to it")
    with_params(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="rankings and pairwise accuracy from average times")
    p.add_argument("--averages", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="fit model coefficients from per-movement data")
    p.add_argument("--logs", required=True)
    p.add_argument("--model", required=True, choices=("distal_pointing", "gaze", "hand"))
    p.add_argument("--id-formulation", choices=("fitts", "shannon"), help="gaze only")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "bound", None) is not None and not 0 < args.bound < 1:
        parser.error("--bound must lie in (0, 1)")
    if getattr(args, "outlier_sd", None) is not None and not args.outlier_sd > 0:
        parser.error("--outlier-sd must be > 0")
    try:
        return args.func(args)
    except Klm3dError as exc:
        print(f"klm3d: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (UsageError, ValueError) as exc:
        print(f"klm3d: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
