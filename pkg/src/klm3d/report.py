"""Tabular and chart output for predictions and evaluation reports."""
from __future__ import annotations

import csv
import io
from typing import Mapping
from xml.sax.saxutils import escape

SUMMARY_COLUMNS = (
    "modality", "n_kept", "n_outliers", "n_failed", "total_actual", "total_predicted", "percent_difference",
    "z", "p_z", "sd_delta", "cohens_d", "effect_band",
    "tost_t", "tost_p", "tost_sd", "ci_low", "ci_high", "equivalent",
    "predicted_rank", "actual_rank",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_csv(report: Mapping) -> str:
    """One row per modality, Z-test columns then TOST columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for name, m in report["modalities"].items():
        tost = m.get("tost") or {}
        writer.writerow([_cell(v) for v in (
            name, m["n_kept"], m["n_outliers"], m["n_failed"], m["total_actual"], m["total_predicted"],
            m["percent_difference"], m["z"], m["p_z"], m["sd_delta"], m["cohens_d"], m["effect_band"],
            tost.get("t"), tost.get("p"), tost.get("sd"), tost.get("ci_low"), tost.get("ci_high"),
            tost.get("equivalent"), m["predicted_rank"], m["actual_rank"],
        )])
    return buf.getvalue()


def predictions_csv(prediction: Mapping) -> str:
    n_phases = max((len(t["per_phase"]) for t in prediction["trials"]), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["modality", "trial_id", "n_phases", *[f"phase_{i + 1}" for i in range(n_phases)], "total"])
    for t in prediction["trials"]:
        phases = [repr(v) for v in t["per_phase"]] + [""] * (n_phases - len(t["per_phase"]))
        writer.writerow([prediction["modality"], t["id"], len(t["per_phase"]), *phases, repr(t["total"])])
    return buf.getvalue()


def bar_chart_svg(report: Mapping, title: str = "Total predicted and actual time") -> str:
    """Paired predicted/actual bars (seconds) per modality, labelled with the percent difference."""
    mods = list(report["modalities"].items())
    width, height = 120 + 110 * max(len(mods), 1), 360
    left, top, bottom = 70, 50, 300
    peak = max((max(m["total_actual"], m["total_predicted"]) for _, m in mods), default=1.0) / 1000.0
    peak = peak or 1.0
    scale = (bottom - top) / (peak * 1.1)
    bar = 36
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{left}" y1="{bottom}" x2="{width - 20}" y2="{bottom}" stroke="#333"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="#333"/>',
        f'<text x="18" y="{(top + bottom) / 2:.1f}" transform="rotate(-90 18 {(top + bottom) / 2:.1f})" '
        f'text-anchor="middle">Total time (s)</text>',
    ]
    for k in range(6):
        v = peak * 1.1 * k / 5
        y = bottom - v * scale
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.1f}</text>')
    for i, (name, m) in enumerate(mods):
        x0 = left + 30 + i * 110
        pred_s, act_s = m["total_predicted"] / 1000.0, m["total_actual"] / 1000.0
        for j, (value, color, label) in enumerate(((pred_s, "#4c72b0", "predicted"), (act_s, "#dd8452", "actual"))):
            h = value * scale
            out.append(
                f'<rect x="{x0 + j * bar}" y="{bottom - h:.2f}" width="{bar - 4}" height="{h:.2f}" fill="{color}">'
                f'<title>{escape(name)} {label}: {value:.2f} s</title></rect>'
            )
        label_y = bottom - max(pred_s, act_s) * scale - 8
        out.append(f'<text x="{x0 + bar:.1f}" y="{label_y:.1f}" text-anchor="middle">'
                   f'{100 * m["percent_difference"]:.2f}%</text>')
        out.append(f'<text x="{x0 + bar:.1f}" y="{bottom + 18}" text-anchor="middle">{escape(name)}</text>')
    lx = width - 150
    out.append(f'<rect x="{lx}" y="{top - 14}" width="12" height="12" fill="#4c72b0"/>')
    out.append(f'<text x="{lx + 18}" y="{top - 4}">Predicted</text>')
    out.append(f'<rect x="{lx + 80}" y="{top - 14}" width="12" height="12" fill="#dd8452"/>')
    out.append(f'<text x="{lx + 98}" y="{top - 4}">Actual</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
