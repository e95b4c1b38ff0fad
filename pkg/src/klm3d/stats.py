"""Comparing logged trial times against predictions, and fitting model coefficients.

Times are milliseconds throughout. Per-trial percentage differences and
equivalence bounds are fractions (0.20 means 20%).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats as sps

from .errors import (
    DegenerateRegression,
    InsufficientData,
    InsufficientModalities,
    ZeroVariance,
)

PCT_FORMS = ("symmetric", "vs-predicted", "vs-actual")
EFFECT_BANDS = ((0.2, "negligible"), (0.5, "small"), (0.8, "medium"), (math.inf, "large"))

# r2 values closer than this are treated as tied when choosing a threshold
R2_TIE_TOL = 1e-12


@dataclass(frozen=True)
class TrialRecord:
    participant_id: str
    modality: str
    trial_id: str
    actual_total: float
    predicted_total: Optional[float] = None
    failed: bool = False
    phase_actual: Optional[tuple[float, ...]] = None
    phase_predicted: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not self.failed and not self.actual_total > 0:
            raise ValueError(f"trial {self.trial_id}: actual_total must be > 0")
        if self.predicted_total is not None and not self.predicted_total > 0:
            raise ValueError(f"trial {self.trial_id}: predicted_total must be > 0")

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.participant_id, self.modality, self.trial_id)

    @property
    def delta(self) -> float:
        return self.actual_total - self.predicted_total


def _group(records: Iterable[TrialRecord]) -> dict[str, list[TrialRecord]]:
    groups: dict[str, list[TrialRecord]] = {}
    for r in records:
        groups.setdefault(r.modality, []).append(r)
    return groups


# --- outliers ------------------------------------------------------------

def remove_failed_and_outliers(
    records: Sequence[TrialRecord], sd_multiplier: float = 2.0
) -> tuple[list[TrialRecord], list[TrialRecord]]:
    """Drop failed trials, then trials whose delta lies more than
    ``sd_multiplier`` standard deviations from the mean delta.

    Works per modality in a single pass: mean and (population) SD are
    computed once from the non-failed trials and every trial is tested
    against them. A delta exactly on the boundary is kept. Running this on
    its own output can remove more trials, since the SD shrinks.

    Returns ``(kept, removed)``, each in input order.
    """
    if not records:
        raise InsufficientData("no trial records")
    drop: set[int] = set()
    for modality, group in _group(records).items():
        live = [r for r in group if not r.failed]
        drop.update(id(r) for r in group if r.failed)
        if live:
            deltas = np.array([r.delta for r in live])
            mean = deltas.mean()
            sd = deltas.std()
            limit = sd_multiplier * sd
            drop.update(id(r) for r, d in zip(live, deltas) if abs(d - mean) > limit)
        remaining = sum(1 for r in live if id(r) not in drop)
        if remaining < 3:
            raise InsufficientData(f"{modality}: only {remaining} trials left after filtering (need 3)")
    kept = [r for r in records if id(r) not in drop]
    removed = [r for r in records if id(r) in drop]
    return kept, removed


# --- percentage differences ----------------------------------------------

def percent_difference(total_actual: float, total_predicted: float, form: str = "symmetric") -> float:
    """Unsigned difference between two totals as a fraction.

    ``symmetric`` divides by the mean of the two; ``vs-predicted`` and
    ``vs-actual`` divide by one side.
    """
    diff = abs(total_actual - total_predicted)
    if form == "symmetric":
        return diff / ((total_actual + total_predicted) / 2.0)
    if form == "vs-predicted":
        return diff / total_predicted
    if form == "vs-actual":
        return diff / total_actual
    raise ValueError(f"unknown percent-difference form {form!r}")


def per_trial_percent(actual, predicted, reference: str = "vs-predicted") -> np.ndarray:
    """Signed per-trial differences (actual - predicted) as fractions of ``reference``."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if reference == "vs-predicted":
        return (a - p) / p
    if reference == "vs-actual":
        return (a - p) / a
    if reference == "symmetric":
        return (a - p) / ((a + p) / 2.0)
    raise ValueError(f"unknown percentage reference {reference!r}")


# --- paired Z test -------------------------------------------------------

@dataclass(frozen=True)
class ZTest:
    z: float
    p: float
    sd: float
    d: float
    mean: float
    n: int


def paired_z_test(actual: Sequence[float], predicted: Sequence[float]) -> ZTest:
    """Paired Z test on deltas (actual - predicted), with Cohen's d = mean/SD.

    Uses the sample SD and a two-sided normal p-value. z > 0 means the
    actual times were longer than predicted.
    """
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape:
        raise ValueError("actual and predicted must have the same length")
    n = a.size
    if n < 2:
        raise InsufficientData("paired Z test needs at least 2 pairs")
    deltas = a - p
    if np.ptp(deltas) == 0:
        raise ZeroVariance("all deltas are identical; Z is undefined")
    mean = float(deltas.mean())
    sd = float(deltas.std(ddof=1))
    z = mean / (sd / math.sqrt(n))
    pval = float(2.0 * sps.norm.sf(abs(z)))
    return ZTest(z=z, p=pval, sd=sd, d=mean / sd, mean=mean, n=n)


def effect_band(d: float) -> str:
    size = abs(d)
    for limit, name in EFFECT_BANDS:
        if size < limit:
            return name
    return "large"


def dagger(d: float) -> str:
    return "†" * ("negligible", "small", "medium", "large").index(effect_band(d))


# --- TOST ----------------------------------------------------------------

@dataclass(frozen=True)
class TostResult:
    t: float
    p: float
    sd: float
    mean: float
    ci_low: float
    ci_high: float
    equivalent: bool
    t_lower: float
    t_upper: float
    p_lower: float
    p_upper: float
    n: int
    bound: float


def tost_equivalence(pct_diffs: Sequence[float], bound: float = 0.20, alpha: float = 0.05) -> TostResult:
    """Two one-sided t tests of |mean| < ``bound`` on per-trial fractions.

    The reported ``t`` and ``p`` belong to whichever one-sided test is
    weaker. The confidence interval is the matching (1 - 2*alpha) interval,
    so ``equivalent`` holds exactly when it sits inside (-bound, bound).
    """
    x = np.asarray(pct_diffs, dtype=float)
    n = x.size
    if n < 3:
        raise InsufficientData("TOST needs at least 3 observations")
    if not 0 < bound:
        raise ValueError("bound must be positive")
    df = n - 1
    mean = float(x.mean())
    sd = 0.0 if np.ptp(x) == 0 else float(x.std(ddof=1))
    se = sd / math.sqrt(n)
    if se > 0:
        t_lower = (mean + bound) / se
        t_upper = (mean - bound) / se
    else:
        # all observations equal: the verdict is decided by the mean alone
        t_lower = math.copysign(math.inf, mean + bound) if mean + bound != 0 else math.nan
        t_upper = math.copysign(math.inf, mean - bound) if mean - bound != 0 else math.nan
    p_lower = 1.0 if math.isnan(t_lower) else float(sps.t.sf(t_lower, df))
    p_upper = 1.0 if math.isnan(t_upper) else float(sps.t.cdf(t_upper, df))
    if p_upper >= p_lower:
        t_stat, pval = t_upper, p_upper
    else:
        t_stat, pval = t_lower, p_lower
    half = float(sps.t.ppf(1.0 - alpha, df)) * se
    return TostResult(
        t=t_stat, p=pval, sd=sd, mean=mean,
        ci_low=mean - half, ci_high=mean + half,
        equivalent=pval < alpha,
        t_lower=t_lower, t_upper=t_upper, p_lower=p_lower, p_upper=p_upper,
        n=n, bound=bound,
    )


# --- rankings ------------------------------------------------------------

def rank_modalities(avg_times: Mapping[str, float]) -> dict[str, int]:
    """1 = fastest. Tied times share the lower rank."""
    if len(avg_times) < 2:
        raise InsufficientModalities("ranking needs at least 2 modalities")
    values = sorted(avg_times.values())
    return {name: values.index(t) + 1 for name, t in avg_times.items()}


def mean_rank_difference(predicted_ranks: Mapping[str, int], actual_ranks: Mapping[str, int]) -> float:
    return sum(abs(predicted_ranks[m] - actual_ranks[m]) for m in predicted_ranks) / len(predicted_ranks)


@dataclass(frozen=True)
class PairwiseAccuracy:
    correct: int
    total: int
    incorrect_pairs: tuple[tuple[str, str], ...] = ()

    @property
    def rate(self) -> float:
        return self.correct / self.total


def pairwise_prediction_accuracy(
    predicted_avgs: Mapping[str, float], actual_avgs: Mapping[str, float]
) -> PairwiseAccuracy:
    """How many modality pairs have their faster member predicted correctly.

    A pair tied on either side counts as incorrect.
    """
    if set(predicted_avgs) != set(actual_avgs):
        raise ValueError("predicted and actual averages cover different modalities")
    if len(predicted_avgs) < 2:
        raise InsufficientModalities("pairwise accuracy needs at least 2 modalities")
    correct, total, wrong = 0, 0, []
    for m1, m2 in itertools.combinations(predicted_avgs, 2):
        total += 1
        sp = np.sign(predicted_avgs[m1] - predicted_avgs[m2])
        sa = np.sign(actual_avgs[m1] - actual_avgs[m2])
        if sp != 0 and sp == sa:
            correct += 1
        else:
            wrong.append((m1, m2))
    return PairwiseAccuracy(correct, total, tuple(wrong))


# --- regression ----------------------------------------------------------

@dataclass(frozen=True)
class LinearFit:
    a: float
    b: float
    r2: float
    se_a: float
    se_b: float
    n: int


def fit_linear(xs: Sequence[float], ys: Sequence[float]) -> LinearFit:
    """Ordinary least squares y = a + b*x."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n = x.size
    if n != y.size:
        raise ValueError("xs and ys differ in length")
    if n < 2 or np.ptp(x) == 0:
        raise DegenerateRegression("need at least two distinct x values")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    b = float(((x - xm) * (y - ym)).sum()) / sxx
    a = float(ym - b * xm)
    resid = y - (a + b * x)
    ss_res = float((resid**2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if n > 2:
        s2 = ss_res / (n - 2)
        se_b = math.sqrt(s2 / sxx)
        se_a = math.sqrt(s2 * (1.0 / n + xm**2 / sxx))
    else:
        se_a = se_b = math.nan
    return LinearFit(a=a, b=b, r2=r2, se_a=se_a, se_b=se_b, n=n)


@dataclass(frozen=True)
class IdCritFit:
    id_crit: float
    a: float
    b: float
    r2: float
    n_used: int
    saccade_ms: Optional[float]
    candidates: tuple[tuple[float, float], ...] = field(default=(), repr=False)


def fit_id_crit(ids: Sequence[float], mts: Sequence[float], min_points: int = 3) -> IdCritFit:
    """Find the ID below which movement time stops following a line.

    Candidate thresholds are the distinct ID values, smallest first; for each
    the line is fit to the points at or above it, and the threshold giving
    the highest r2 wins (the smallest on ties). ``saccade_ms`` is the mean
    time of the excluded points, or None when nothing was excluded.
    """
    x = np.asarray(ids, dtype=float)
    y = np.asarray(mts, dtype=float)
    if x.size != y.size:
        raise ValueError("ids and mts differ in length")
    unique = np.unique(x)
    if unique.size < 5:
        raise DegenerateRegression(f"need at least 5 distinct ID values, got {unique.size}")
    scored = []
    for threshold in unique:
        mask = x >= threshold
        if mask.sum() < min_points or np.unique(x[mask]).size < 2:
            continue
        scored.append((float(threshold), fit_linear(x[mask], y[mask])))
    if not scored:
        raise DegenerateRegression(f"no threshold leaves {min_points} or more points to fit")
    best_r2 = max(f.r2 for _, f in scored)
    threshold, fit = next((t, f) for t, f in scored if f.r2 >= best_r2 - R2_TIE_TOL)
    below = y[x < threshold]
    return IdCritFit(
        id_crit=threshold, a=fit.a, b=fit.b, r2=fit.r2, n_used=fit.n,
        saccade_ms=float(below.mean()) if below.size else None,
        candidates=tuple((t, f.r2) for t, f in scored),
    )


@dataclass(frozen=True)
class HandFit:
    a: float
    b: float
    c: float
    r2: float
    se: tuple[float, float, float]
    n: int


def fit_hand_model(ids: Sequence[float], ctds: Sequence[float], mts: Sequence[float]) -> HandFit:
    """Two-predictor least squares MT = a + b*ID + c*CTD."""
    x1 = np.asarray(ids, dtype=float)
    x2 = np.asarray(ctds, dtype=float)
    y = np.asarray(mts, dtype=float)
    n = y.size
    if not x1.size == x2.size == n:
        raise ValueError("ids, ctds and mts differ in length")
    if n < 4:
        raise DegenerateRegression("hand model fit needs at least 4 rows")
    X = np.column_stack([np.ones(n), x1, x2])
    if np.linalg.matrix_rank(X) < 3:
        raise DegenerateRegression("design matrix is rank deficient (ID or CTD constant or collinear)")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    s2 = ss_res / (n - 3)
    se = tuple(float(v) for v in np.sqrt(np.diag(s2 * np.linalg.inv(X.T @ X))))
    a, b, c = (float(v) for v in beta)
    return HandFit(a=a, b=b, c=c, r2=r2, se=se, n=n)


# --- full evaluation -----------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    pct_form: str = "symmetric"
    tost_reference: str = "vs-predicted"
    bound: float = 0.20
    outlier_sd: float = 2.0
    alpha: float = 0.05

    def __post_init__(self):
        if self.pct_form not in PCT_FORMS:
            raise ValueError(f"pct_form must be one of {PCT_FORMS}")
        if self.tost_reference not in PCT_FORMS:
            raise ValueError(f"tost_reference must be one of {PCT_FORMS}")
        if not 0 < self.bound < 1:
            raise ValueError("equivalence bound must lie in (0, 1)")
        if not self.outlier_sd > 0:
            raise ValueError("outlier SD multiplier must be > 0")


@dataclass
class ComparisonStats:
    """Z test and TOST for one set of paired actual/predicted times."""

    n: int
    total_actual: float
    total_predicted: float
    percent_difference: float
    z: Optional[ZTest]
    tost: Optional[TostResult]
    notes: list[str] = field(default_factory=list)

    @property
    def effect_band(self) -> Optional[str]:
        return effect_band(self.z.d) if self.z else None


def compare_times(actual: Sequence[float], predicted: Sequence[float], config: EvalConfig) -> ComparisonStats:
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    notes = []
    try:
        z = paired_z_test(a, p)
    except ZeroVariance:
        z = None
        notes.append("zero_variance: all deltas identical, Z test undefined")
    except InsufficientData as exc:
        z = None
        notes.append(f"insufficient_data: {exc}")
    try:
        tost = tost_equivalence(per_trial_percent(a, p, config.tost_reference), config.bound, config.alpha)
    except InsufficientData as exc:
        tost = None
        notes.append(f"insufficient_data: {exc}")
    total_a, total_p = math.fsum(a), math.fsum(p)
    return ComparisonStats(
        n=int(a.size), total_actual=total_a, total_predicted=total_p,
        percent_difference=percent_difference(total_a, total_p, config.pct_form),
        z=z, tost=tost, notes=notes,
    )


@dataclass
class ModalityReport:
    modality: str
    n_total: int
    n_failed: int
    n_outliers: int
    n_kept: int
    mean_actual: float
    mean_predicted: float
    overall: ComparisonStats
    phases: list[ComparisonStats] = field(default_factory=list)
    predicted_rank: Optional[int] = None
    actual_rank: Optional[int] = None


@dataclass
class EvalReport:
    config: EvalConfig
    modalities: dict[str, ModalityReport]
    mean_rank_difference: Optional[float] = None
    pairwise: Optional[PairwiseAccuracy] = None

    def to_dict(self) -> dict:
        def stats_dict(cs: ComparisonStats) -> dict:
            out = {
                "n": cs.n,
                "total_actual": cs.total_actual,
                "total_predicted": cs.total_predicted,
                "percent_difference": cs.percent_difference,
                "z": None, "p_z": None, "sd_delta": None, "cohens_d": None, "effect_band": None,
                "tost": None,
                "notes": list(cs.notes),
            }
            if cs.z:
                out.update(z=cs.z.z, p_z=cs.z.p, sd_delta=cs.z.sd, cohens_d=cs.z.d, effect_band=cs.effect_band)
            if cs.tost:
                out["tost"] = {k: v for k, v in asdict(cs.tost).items() if k != "bound"}
            return out

        modalities = {}
        for name, m in self.modalities.items():
            entry = {
                "n_total": m.n_total, "n_failed": m.n_failed, "n_outliers": m.n_outliers, "n_kept": m.n_kept,
                "mean_actual": m.mean_actual, "mean_predicted": m.mean_predicted,
                "predicted_rank": m.predicted_rank, "actual_rank": m.actual_rank,
                **stats_dict(m.overall),
            }
            if m.phases:
                entry["phases"] = [stats_dict(p) for p in m.phases]
            modalities[name] = entry
        pairwise = None
        if self.pairwise:
            pairwise = {
                "n_correct": self.pairwise.correct, "n_total": self.pairwise.total, "rate": self.pairwise.rate,
                "incorrect_pairs": [list(p) for p in self.pairwise.incorrect_pairs],
            }
        return _finite({
            "config": asdict(self.config),
            "modalities": modalities,
            "mean_rank_difference": self.mean_rank_difference,
            "pairwise": pairwise,
        })


def _finite(obj):
    """Replace non-finite floats with None so the report is valid JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def evaluate(records: Sequence[TrialRecord], config: Optional[EvalConfig] = None) -> EvalReport:
    """Run the whole comparison, per modality, on trials that carry predictions."""
    config = config or EvalConfig()
    missing = [r.key for r in records if r.predicted_total is None]
    if missing:
        raise InsufficientData(f"{len(missing)} records have no predicted time, e.g. {missing[0]}")
    kept, removed = remove_failed_and_outliers(records, config.outlier_sd)
    kept_by = _group(kept)
    all_by = _group(records)
    reports: dict[str, ModalityReport] = {}
    for name in sorted(all_by):
        group = all_by[name]
        rows = kept_by.get(name, [])
        actual = [r.actual_total for r in rows]
        predicted = [r.predicted_total for r in rows]
        n_failed = sum(r.failed for r in group)
        report = ModalityReport(
            modality=name, n_total=len(group), n_failed=n_failed,
            n_outliers=len(group) - n_failed - len(rows), n_kept=len(rows),
            mean_actual=float(np.mean(actual)), mean_predicted=float(np.mean(predicted)),
            overall=compare_times(actual, predicted, config),
        )
        n_phases = {len(r.phase_actual or ()) for r in rows} | {len(r.phase_predicted or ()) for r in rows}
        if len(n_phases) == 1 and n_phases != {0}:
            for i in range(n_phases.pop()):
                report.phases.append(compare_times(
                    [r.phase_actual[i] for r in rows], [r.phase_predicted[i] for r in rows], config))
        reports[name] = report

    result = EvalReport(config=config, modalities=reports)
    if len(reports) >= 2:
        pred_avg = {n: m.mean_predicted for n, m in reports.items()}
        act_avg = {n: m.mean_actual for n, m in reports.items()}
        pred_rank, act_rank = rank_modalities(pred_avg), rank_modalities(act_avg)
        for n, m in reports.items():
            m.predicted_rank, m.actual_rank = pred_rank[n], act_rank[n]
        result.mean_rank_difference = mean_rank_difference(pred_rank, act_rank)
        result.pairwise = pairwise_prediction_accuracy(pred_avg, act_avg)
    return result
