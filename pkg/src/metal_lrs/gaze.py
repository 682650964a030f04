"""Scanpath features from fixation logs and permutation significance tests.

Feature geometry: saccade vectors between consecutive fixations, total path
length, mean horizontal amplitude, unsigned turning angles in [0, pi]
between consecutive non-degenerate saccades (population std).

Permutation tests compare the permuted statistic to the observed one in
exact rational arithmetic on a permutation-invariant sufficient statistic,
so ties at the extremes are counted exactly (the monotone rank case really
gives 2/720). Sampled p uses the +1-smoothed estimator and an independent
generator stream per (seed, permutation index).
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DegenerateGroupsError,
    MalformedRowError,
    NonMonotonicOnsetsError,
    ValidationError,
    ZeroVarianceError,
)

FEATURE_NAMES = (
    "fixation_count",
    "scanpath_length",
    "horizontal_saccade_amplitude",
    "relative_angle_sum",
    "relative_angle_std",
)


@dataclass(frozen=True)
class Fixation:
    x: float
    y: float
    duration_ms: float
    onset_ms: float


@dataclass
class GazeTrial:
    subject_id: str
    trial_id: str
    fixations: list[Fixation]
    recalled: bool | None = None
    score: float | None = None


@dataclass
class GazeFeatures:
    """None marks a feature that is not computable for the trial."""

    fixation_count: int
    scanpath_length: float
    horizontal_saccade_amplitude: float | None
    relative_angle_sum: float | None
    relative_angle_std: float | None

    def value(self, name: str) -> float | None:
        if name not in FEATURE_NAMES:
            raise ValidationError("feature", f"unknown feature {name!r}")
        v = getattr(self, name)
        return float(v) if v is not None else None

    def to_dict(self) -> dict:
        return {name: self.value(name) for name in FEATURE_NAMES}


def gaze_features(trial: GazeTrial) -> GazeFeatures:
    points = [(f.x, f.y) for f in trial.fixations]
    if not points:
        raise ValidationError("fixations", "a trial needs at least one fixation")
    vectors = [
        (bx - ax, by - ay) for (ax, ay), (bx, by) in zip(points, points[1:])
    ]
    length = sum(math.hypot(dx, dy) for dx, dy in vectors)
    horizontal = (
        sum(abs(dx) for dx, _ in vectors) / len(vectors) if vectors else None
    )
    moving = [(dx, dy) for dx, dy in vectors if dx != 0.0 or dy != 0.0]
    angles = []
    for (ax, ay), (bx, by) in zip(moving, moving[1:]):
        cosine = (ax * bx + ay * by) / (math.hypot(ax, ay) * math.hypot(bx, by))
        angles.append(math.acos(max(-1.0, min(1.0, cosine))))
    return GazeFeatures(
        fixation_count=len(points),
        scanpath_length=length,
        horizontal_saccade_amplitude=horizontal,
        relative_angle_sum=sum(angles) if angles else None,
        relative_angle_std=float(np.std(angles)) if len(angles) >= 2 else None,
    )


# ---------------------------------------------------------------------- parsing

_REQUIRED_COLUMNS = ("subject", "trial", "x", "y", "duration_ms", "onset_ms", "recalled")


def _parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_fixation_log(lines: Iterable[str]) -> list[GazeTrial]:
    """Parse the fixation CSV (header: subject,trial,x,y,duration_ms,onset_ms,
    recalled[,score]); rows may arrive shuffled, fixations come out
    onset-ordered per (subject, trial)."""
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise MalformedRowError(1, "header", "empty file")
    missing = [c for c in _REQUIRED_COLUMNS if c not in reader.fieldnames]
    if missing:
        raise MalformedRowError(1, missing[0], "missing column in header")
    has_score = "score" in reader.fieldnames

    trials: dict[tuple[str, str], GazeTrial] = {}
    for row in reader:
        line = reader.line_num
        for column in _REQUIRED_COLUMNS:
            if row.get(column) in (None, ""):
                raise MalformedRowError(line, column, "missing value")
        try:
            x = float(row["x"])
            y = float(row["y"])
        except ValueError as exc:
            raise MalformedRowError(line, "x", str(exc)) from exc
        try:
            duration = float(row["duration_ms"])
        except ValueError as exc:
            raise MalformedRowError(line, "duration_ms", str(exc)) from exc
        if duration <= 0:
            raise MalformedRowError(line, "duration_ms", f"duration must be > 0, got {duration}")
        try:
            onset = float(row["onset_ms"])
        except ValueError as exc:
            raise MalformedRowError(line, "onset_ms", str(exc)) from exc
        try:
            recalled = _parse_bool(row["recalled"])
        except ValueError as exc:
            raise MalformedRowError(line, "recalled", str(exc)) from exc
        score = None
        if has_score and row.get("score") not in (None, ""):
            try:
                score = float(row["score"])
            except ValueError as exc:
                raise MalformedRowError(line, "score", str(exc)) from exc

        key = (row["subject"], row["trial"])
        trial = trials.get(key)
        if trial is None:
            trial = GazeTrial(row["subject"], row["trial"], [], recalled, score)
            trials[key] = trial
        else:
            if trial.recalled != recalled:
                raise MalformedRowError(line, "recalled", "recall flag differs within the trial")
            if trial.score != score:
                raise MalformedRowError(line, "score", "recall score differs within the trial")
        trial.fixations.append(Fixation(x, y, duration, onset))

    out = []
    for key in sorted(trials):
        trial = trials[key]
        trial.fixations.sort(key=lambda f: f.onset_ms)
        onsets = [f.onset_ms for f in trial.fixations]
        if any(b <= a for a, b in zip(onsets, onsets[1:])):
            raise NonMonotonicOnsetsError(
                f"duplicate onset in trial {key[1]!r} of subject {key[0]!r}"
            )
        out.append(trial)
    return out


# ----------------------------------------------------------- permutation tests


@dataclass
class AnovaResult:
    f_statistic: float
    p_value: float
    permutations: int
    seed: int | None
    exact: bool
    zero_variance: bool = False

    def to_dict(self) -> dict:
        return {
            "statistic": self.f_statistic,
            "p": self.p_value,
            "permutations": self.permutations,
            "seed": self.seed,
            "exact": self.exact,
            "zero_variance": self.zero_variance,
        }


@dataclass
class CorrelationResult:
    coefficient: float
    p_value: float
    method: str
    permutations: int
    seed: int | None
    exact: bool

    def to_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "p": self.p_value,
            "method": self.method,
            "permutations": self.permutations,
            "seed": self.seed,
            "exact": self.exact,
        }


def _stream(seed: int, index: int) -> np.random.Generator:
    # independent per-permutation stream, derived from (seed, index)
    return np.random.default_rng([seed, index])


def _group_sum_stat(values: Sequence[Fraction], flags: Sequence[bool]) -> Fraction:
    """Sum T of the recalled group; with group sizes fixed, the between-group
    sum of squares is a strictly increasing function of T^2/nA + (S-T)^2/nB,
    so comparing this statistic orders permutations exactly like F."""
    n_a = sum(flags)
    n_b = len(flags) - n_a
    total = sum(values)
    t_a = sum(v for v, flag in zip(values, flags) if flag)
    return t_a * t_a / n_a + (total - t_a) * (total - t_a) / n_b


def permutation_anova(
    values: Sequence[float],
    groups: Sequence[bool],
    permutations: int = 10_000,
    seed: int | None = 0,
    exact: bool = False,
) -> AnovaResult:
    """One-way permutation ANOVA over a binary grouping.

    exact=True enumerates every distinct assignment of values to the two
    groups and returns p = (#assignments with F >= observed) / total;
    otherwise p = (1 + #exceedances) / (1 + permutations).
    """
    if len(values) != len(groups):
        raise ValidationError("groups", "values and groups must align")
    flags = [bool(g) for g in groups]
    n_a = sum(flags)
    n_b = len(flags) - n_a
    if n_a < 2 or n_b < 2:
        raise DegenerateGroupsError(f"need >= 2 trials per group, got {n_a} and {n_b}")
    if permutations < 1:
        raise ValidationError("permutations", "must be >= 1")

    data = [Fraction(float(v)) for v in values]
    n = len(data)
    mean = sum(data) / n
    sst = sum((v - mean) ** 2 for v in data)
    if sst == 0:
        return AnovaResult(0.0, 1.0, permutations, seed, exact, zero_variance=True)

    observed = _group_sum_stat(data, flags)

    # reported F in floats, from the same partition
    grand = float(mean)
    xs = np.asarray([float(v) for v in values], dtype=float)
    mask = np.asarray(flags)
    ssb = n_a * (xs[mask].mean() - grand) ** 2 + n_b * (xs[~mask].mean() - grand) ** 2
    ssw = float(sst) - ssb
    if ssw <= 0:
        f_stat = math.inf if ssb > 0 else 0.0
    else:
        f_stat = (ssb / 1.0) / (ssw / (n - 2))

    if exact:
        total = math.comb(n, n_a)
        if total > 500_000:
            raise ValidationError("exact", f"{total} assignments is too many to enumerate")
        hits = 0
        for combo in itertools.combinations(range(n), n_a):
            perm_flags = [False] * n
            for i in combo:
                perm_flags[i] = True
            if _group_sum_stat(data, perm_flags) >= observed:
                hits += 1
        return AnovaResult(f_stat, hits / total, total, seed, True)

    if seed is None:
        raise ValidationError("seed", "sampled mode needs a seed")
    hits = 0
    indices = np.arange(n)
    for i in range(permutations):
        order = _stream(seed, i).permutation(indices)
        perm_flags = [flags[j] for j in order]
        if _group_sum_stat(data, perm_flags) >= observed:
            hits += 1
    return AnovaResult(f_stat, (1 + hits) / (1 + permutations), permutations, seed, False)


def _average_ranks(values: Sequence[float]) -> list[Fraction]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks: list[Fraction] = [Fraction(0)] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        shared = Fraction(sum(range(i + 1, j + 2)), j - i + 1)
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def _cross_stat(xs: Sequence[Fraction], ys: Sequence[Fraction]) -> Fraction:
    """|sum(x*y) - sum(x)*sum(y)/n|: with x fixed and y a permutation of the
    same multiset, both variances are invariant, so this orders permutations
    exactly like |Pearson r|."""
    n = len(xs)
    return abs(sum(x * y for x, y in zip(xs, ys)) - sum(xs) * sum(ys) / n)


def correlation_test(
    x: Sequence[float],
    y: Sequence[float],
    method: str = "rank",
    permutations: int = 10_000,
    seed: int | None = 0,
    exact: bool = False,
) -> CorrelationResult:
    """Rank (Spearman) or linear (Pearson) correlation with a two-sided
    permutation p-value, permuting the second vector."""
    if method not in ("rank", "linear"):
        raise ValidationError("method", f"unknown method {method!r}")
    if len(x) != len(y):
        raise ValidationError("y", "paired vectors must align")
    if len(x) < 3:
        raise ValidationError("x", "need at least 3 paired observations")
    if permutations < 1:
        raise ValidationError("permutations", "must be >= 1")
    n = len(x)
    if len(set(x)) == 1 or len(set(y)) == 1:
        raise ZeroVarianceError("a constant vector has no correlation")

    if method == "rank":
        xs = _average_ranks(x)
        ys = _average_ranks(y)
    else:
        xs = [Fraction(float(v)) for v in x]
        ys = [Fraction(float(v)) for v in y]

    xf = np.asarray([float(v) for v in xs], dtype=float)
    yf = np.asarray([float(v) for v in ys], dtype=float)
    coefficient = float(np.corrcoef(xf, yf)[0, 1])

    observed = _cross_stat(xs, ys)

    if exact:
        total = math.factorial(n)
        if total > 500_000:
            raise ValidationError("exact", f"{total} permutations is too many to enumerate")
        hits = sum(
            1
            for order in itertools.permutations(range(n))
            if _cross_stat(xs, [ys[i] for i in order]) >= observed
        )
        return CorrelationResult(coefficient, hits / total, method, total, seed, True)

    if seed is None:
        raise ValidationError("seed", "sampled mode needs a seed")
    hits = 0
    indices = np.arange(n)
    for i in range(permutations):
        order = _stream(seed, i).permutation(indices)
        if _cross_stat(xs, [ys[j] for j in order]) >= observed:
            hits += 1
    return CorrelationResult(coefficient, (1 + hits) / (1 + permutations), method, permutations, seed, False)


def feature_report(
    trials: list[GazeTrial],
    permutations: int = 10_000,
    seed: int = 0,
    exact: bool = False,
) -> list[dict]:
    """Per-feature association tests against the recall outcome: permutation
    ANOVA over the recalled flag, rank correlation against the recall score
    when one is present. Trials lacking a feature are excluded from that
    feature's test."""
    report = []
    features = [(t, gaze_features(t)) for t in trials]
    for name in FEATURE_NAMES:
        rows = [(t, f.value(name)) for t, f in features if f.value(name) is not None]
        anova_pairs = [(v, t.recalled) for t, v in rows if t.recalled is not None]
        if len(anova_pairs) >= 4:
            values, flags = zip(*anova_pairs)
            try:
                result = permutation_anova(values, flags, permutations, seed, exact)
                report.append({"feature": name, "test": "permutation_anova", "n": len(values), **result.to_dict()})
            except DegenerateGroupsError as exc:
                report.append({"feature": name, "test": "permutation_anova", "skipped": str(exc)})
        score_pairs = [(v, t.score) for t, v in rows if t.score is not None]
        if len(score_pairs) >= 3:
            values, scores = zip(*score_pairs)
            try:
                result = correlation_test(values, scores, "rank", permutations, seed, exact)
                report.append({"feature": name, "test": "rank_correlation", "n": len(values), **result.to_dict()})
            except ZeroVarianceError as exc:
                report.append({"feature": name, "test": "rank_correlation", "skipped": str(exc)})
    return report
