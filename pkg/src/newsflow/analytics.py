"""Diversity measurements and cohort comparisons.

Covers cluster-level reading entropy over a community partition, interest
category entropy series from simulation runs, max-category-change rates,
diversity cohort splits with a cluster affinity ranking, and the two
significance tests the comparisons rely on (Welch's t, two-proportion z).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import erfc, exp, lgamma, log, log1p, sqrt

import numpy as np

from .core import entropy, normalize
from .graphcluster import BrowseLog, Partition
from .simengine import BatchResult, RunResult

__all__ = [
    "PeriodWindow",
    "FIRST_WINDOW",
    "LAST_WINDOW",
    "UserDiversityRecord",
    "CohortReport",
    "cluster_entropy",
    "diversity_records",
    "interest_entropy_series",
    "ace",
    "max_category_change_rate",
    "max_share_over_threshold",
    "cohort_split",
    "cluster_affinity_diff",
    "welch_t_test",
    "two_proportion_z_test",
    "scenario_summary",
]


@dataclass(frozen=True)
class PeriodWindow:
    """Inclusive turn/day range."""

    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"window start {self.start} > end {self.end}")

    def contains(self, day) -> np.ndarray:
        day = np.asarray(day)
        return (day >= self.start) & (day <= self.end)

    def overlaps(self, other: "PeriodWindow") -> bool:
        return self.start <= other.end and other.start <= self.end


FIRST_WINDOW = PeriodWindow(1, 10)
LAST_WINDOW = PeriodWindow(36, 45)


@dataclass(frozen=True)
class UserDiversityRecord:
    user_id: int
    h1: float
    h2: float
    delta: float
    argmax1: int
    argmax2: int


@dataclass(frozen=True)
class CohortReport:
    increasing: list
    decreasing: list
    stats: dict


# ---------------------------------------------------------------------------
# cluster entropy over a browsing log
# ---------------------------------------------------------------------------

def cluster_entropy(log: BrowseLog, partition: Partition, window: PeriodWindow,
                    user_id: int) -> float:
    """Entropy (bits) of one user's in-window reads over article communities.

    Raises if the user read no clustered article in the window; such users are
    excluded from period comparisons rather than scored zero.
    """
    mask = (log.users == user_id) & window.contains(log.days)
    comms = [partition.assignment[int(a)] for a in log.articles[mask]
             if int(a) in partition.assignment]
    if not comms:
        raise ValueError(f"user {user_id} has no clustered reads in {window}")
    counts = np.bincount(np.asarray(comms))
    return entropy(normalize(counts[counts > 0]))


def _modal_community(log, partition, window, user_id) -> int:
    mask = (log.users == user_id) & window.contains(log.days)
    counts: dict[int, int] = {}
    for a in log.articles[mask]:
        c = partition.assignment.get(int(a))
        if c is not None:
            counts[c] = counts.get(c, 0) + 1
    best = max(counts.values())
    return min(c for c, n in counts.items() if n == best)


def diversity_records(log: BrowseLog, partition: Partition,
                      window1: PeriodWindow, window2: PeriodWindow,
                      min_reads: int | None = None,
                      max_reads: int | None = None) -> list[UserDiversityRecord]:
    """Per-user cluster entropy for both windows.

    Users must have at least one clustered read in each window; optional
    total-read bounds reproduce the "read 10 to 100 articles" style filter.
    """
    records = []
    user_ids, totals = np.unique(log.users, return_counts=True)
    for uid, total in zip(user_ids, totals):
        uid = int(uid)
        if min_reads is not None and total < min_reads:
            continue
        if max_reads is not None and total > max_reads:
            continue
        try:
            h1 = cluster_entropy(log, partition, window1, uid)
            h2 = cluster_entropy(log, partition, window2, uid)
        except ValueError:
            continue
        records.append(UserDiversityRecord(
            user_id=uid, h1=h1, h2=h2, delta=h2 - h1,
            argmax1=_modal_community(log, partition, window1, uid),
            argmax2=_modal_community(log, partition, window2, uid)))
    return records


# ---------------------------------------------------------------------------
# simulation interest series
# ---------------------------------------------------------------------------

def interest_entropy_series(result: RunResult) -> tuple[np.ndarray, np.ndarray]:
    """Per-turn mean and std over users of interest entropy (rows 0..turns)."""
    return result.entropy.mean(axis=1), result.entropy.std(axis=1)


def ace(result: RunResult, window: PeriodWindow, mode: str = "window_mean") -> float:
    """Average interest category entropy over a period.

    mode "window_mean": mean over the window's turns of the per-turn user
    mean; "final_turn": the per-turn user mean at the window's last turn.
    """
    means = result.entropy.mean(axis=1)
    if window.end >= means.size:
        raise ValueError(f"window {window} exceeds recorded turns")
    if mode == "window_mean":
        return float(means[window.start : window.end + 1].mean())
    if mode == "final_turn":
        return float(means[window.end])
    raise ValueError(f"unknown ace mode {mode!r}")


def max_category_change_rate(result: RunResult, window1: PeriodWindow,
                             window2: PeriodWindow) -> float:
    """Percent of users whose top interest category differs between the last
    turns of the two (expectedly disjoint) windows."""
    a1 = result.argmax[window1.end]
    a2 = result.argmax[window2.end]
    return float(np.mean(a1 != a2) * 100.0)


def max_share_over_threshold(result: RunResult, turn: int, threshold: float = 0.5) -> float:
    """Fraction of users whose largest interest-category share exceeds
    `threshold` at `turn`."""
    return float(np.mean(result.max_share[turn] > threshold))


# ---------------------------------------------------------------------------
# cohorts
# ---------------------------------------------------------------------------

def cohort_split(records: list[UserDiversityRecord]) -> CohortReport:
    """Diversity-increasing users vs the equally many most-decreasing users.

    Increasing = delta > 0. Decreasing = the |increasing| most negative deltas
    (ties by user id); zero deltas join neither cohort.
    """
    if len(records) < 2:
        raise ValueError("cohort split needs at least 2 records")
    increasing = sorted(r.user_id for r in records if r.delta > 0)
    negative = sorted((r for r in records if r.delta < 0),
                      key=lambda r: (r.delta, r.user_id))
    decreasing = [r.user_id for r in negative[: len(increasing)]]

    def _stats(ids):
        sel = [r for r in records if r.user_id in set(ids)]
        if not sel:
            return {"size": 0}
        deltas = np.asarray([r.delta for r in sel])
        return {"size": len(sel),
                "mean_delta": float(deltas.mean()),
                "mean_h1": float(np.mean([r.h1 for r in sel])),
                "mean_h2": float(np.mean([r.h2 for r in sel]))}

    return CohortReport(increasing=increasing, decreasing=decreasing,
                        stats={"increasing": _stats(increasing),
                               "decreasing": _stats(decreasing)})


def cluster_affinity_diff(log: BrowseLog, partition: Partition,
                          cohorts: CohortReport) -> list[dict]:
    """Communities ranked by the gap between cohort reading fractions.

    For each community: the fraction of each cohort's users who read at least
    one of its articles, ranked by absolute difference (descending), ties by
    community id.
    """
    inc, dec = set(cohorts.increasing), set(cohorts.decreasing)
    if not inc or not dec:
        raise ValueError("both cohorts must be non-empty")
    readers: dict[int, set] = {}
    for u, a in zip(log.users, log.articles):
        c = partition.assignment.get(int(a))
        if c is not None:
            readers.setdefault(c, set()).add(int(u))
    rows = []
    for c in sorted(readers):
        frac_inc = len(readers[c] & inc) / len(inc)
        frac_dec = len(readers[c] & dec) / len(dec)
        rows.append({"community": c, "frac_increasing": frac_inc,
                     "frac_decreasing": frac_dec,
                     "difference": frac_inc - frac_dec})
    rows.sort(key=lambda r: (-abs(r["difference"]), r["community"]))
    return rows


# ---------------------------------------------------------------------------
# significance tests
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (Lentz)."""
    max_iter, eps, fpmin = 300, 3e-16, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < fpmin:
        d = fpmin
    d = 1.0 / d
    h = d
    for it in range(1, max_iter + 1):
        m2 = 2 * it
        for aa in (it * (b - it) * x / ((qam + m2) * (a + m2)),
                   -(a + it) * (qab + it) * x / ((a + m2) * (qap + m2))):
            d = 1.0 + aa * d
            if abs(d) < fpmin:
                d = fpmin
            c = 1.0 + aa / c
            if abs(c) < fpmin:
                c = fpmin
            d = 1.0 / d
            delta = d * c
            h *= delta
        if abs(delta - 1.0) < eps:
            return h
    return h


def _betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = exp(lgamma(a + b) - lgamma(a) - lgamma(b)
                + a * log(x) + b * log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_sided_p(t: float, df: float) -> float:
    """Two-sided p-value of a t statistic with `df` degrees of freedom."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    return _betainc(df / 2.0, 0.5, df / (df + t * t))


def welch_t_test(a, b) -> tuple[float, float]:
    """Welch's unequal-variance t test; returns (t, two-sided p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise ValueError("each sample needs at least 2 values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise ValueError("both samples have zero variance")
    sa, sb = va / a.size, vb / b.size
    t = (a.mean() - b.mean()) / sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    return float(t), float(student_t_two_sided_p(t, df))


def two_proportion_z_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pooled two-proportion z test; returns (z, two-sided p)."""
    if n1 <= 0 or n2 <= 0:
        raise ValueError("sample sizes must be positive")
    pooled = (k1 + k2) / (n1 + n2)
    if pooled <= 0.0 or pooled >= 1.0:
        raise ValueError("pooled proportion must lie strictly inside (0, 1)")
    se = sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    z = (k1 / n1 - k2 / n2) / se
    return float(z), float(erfc(abs(z) / sqrt(2.0)))


# ---------------------------------------------------------------------------
# batch summaries
# ---------------------------------------------------------------------------

def _metric(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"per_run": [float(v) for v in arr],
            "mean": float(arr.mean()), "std": float(arr.std())}


def scenario_summary(batch: BatchResult, first: PeriodWindow = FIRST_WINDOW,
                     last: PeriodWindow = LAST_WINDOW,
                     share_threshold: float = 0.5) -> dict:
    """Table-style summary of one scenario batch: entropy averages for both
    periods (window-mean and final-turn variants), max-category-change rate,
    dominant-share fraction, and the first-vs-last significance test."""
    results = batch.results
    ace_first = [ace(r, first) for r in results]
    ace_last = [ace(r, last) for r in results]
    t, p = welch_t_test(ace_first, ace_last)
    final_turn = results[0].n_turns
    return {
        "scenario": batch.config.recommender,
        "runs": batch.runs,
        "initial_entropy": _metric([float(r.entropy[0].mean()) for r in results]),
        "ace_first_window_mean": _metric(ace_first),
        "ace_first_final_turn": _metric([ace(r, first, "final_turn") for r in results]),
        "ace_last_window_mean": _metric(ace_last),
        "ace_last_final_turn": _metric([ace(r, last, "final_turn") for r in results]),
        "mcc_percent": _metric([max_category_change_rate(r, first, last) for r in results]),
        "max_share_over_half": _metric(
            [max_share_over_threshold(r, final_turn, share_threshold) for r in results]),
        "decline_welch": {"t": t, "p": p},
        "windows": {"first": [first.start, first.end], "last": [last.start, last.end]},
    }
