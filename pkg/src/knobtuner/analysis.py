"""Turn tuning results into decisions: improvement accounting, fair
comparison, and bottleneck identification.

Percent changes are always recomputed from the raw metric values, never
copied from pre-rendered tables, because printed percentages routinely
carry rounding or transcription slips.  Display rounding is half-up to two
decimals; stored values keep full precision.

Comparisons and bottleneck verdicts refuse to run across unequal budgets
or mismatched objectives: a system tuned with a larger budget has an
unfair head start, so its numbers say nothing about the systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .harness import MetricBundle
from .search import TuningReport


class AnalysisError(ValueError):
    """Inputs do not satisfy the fairness preconditions of an analysis."""


def percent_display(relative_change: float) -> float:
    """Signed percent, rounded half-up to two decimals (display contract)."""
    d = Decimal(repr(relative_change * 100.0)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    return float(d)


@dataclass(frozen=True)
class MetricChange:
    """One metric's movement between the default and the tuned setting.

    ``relative_change`` is the raw signed ratio (tuned - default) / default;
    ``percent`` is its display rounding.  ``adjusted_change`` flips the sign
    for minimize metrics so that positive always means better.  A zero
    default makes the change undefined (None) rather than infinite.
    """

    name: str
    default_value: float
    tuned_value: float
    direction: str
    relative_change: float | None
    percent: float | None
    adjusted_change: float | None
    improved: bool | None

    def display(self) -> str:
        if self.percent is None:
            return "undefined"
        arrow = {True: "improved", False: "regressed", None: "unchanged"}[self.improved]
        return f"{self.percent:+.2f}% ({arrow})"


@dataclass(frozen=True)
class ImprovementSummary:
    """Per-metric improvement table for one default-vs-tuned pair."""

    changes: tuple[MetricChange, ...]

    def __iter__(self):
        return iter(self.changes)

    def __getitem__(self, name: str) -> MetricChange:
        for c in self.changes:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_rows(self) -> list[dict]:
        return [
            {
                "metric": c.name,
                "default": c.default_value,
                "tuned": c.tuned_value,
                "direction": c.direction,
                "relative_change": c.relative_change,
                "percent": c.percent,
                "improved": c.improved,
            }
            for c in self.changes
        ]


def summarize(
    default: MetricBundle,
    tuned: MetricBundle,
    directions: dict[str, str] | None = None,
) -> ImprovementSummary:
    """Per-metric signed changes between a default and a tuned measurement.

    Only metrics present in both bundles are summarized, in the default
    bundle's order.  ``directions`` assigns minimize/maximize per metric;
    a metric not listed inherits the bundle direction when it is the
    objective and maximize otherwise.
    """
    directions = directions or {}
    changes: list[MetricChange] = []
    for name, dv in default.values.items():
        if name not in tuned.values:
            continue
        tv = tuned.values[name]
        direction = directions.get(name)
        if direction is None:
            direction = default.direction if name == default.objective else "maximize"
        if direction not in ("maximize", "minimize"):
            raise AnalysisError(f"unknown direction {direction!r} for metric {name!r}")
        if dv == 0:
            changes.append(
                MetricChange(name, float(dv), float(tv), direction, None, None, None, None)
            )
            continue
        rel = (float(tv) - float(dv)) / float(dv)
        adjusted = -rel if direction == "minimize" else rel
        improved: bool | None
        if rel == 0:
            improved = None
        else:
            improved = adjusted > 0
        changes.append(
            MetricChange(
                name=name,
                default_value=float(dv),
                tuned_value=float(tv),
                direction=direction,
                relative_change=rel,
                percent=percent_display(rel),
                adjusted_change=adjusted,
                improved=improved,
            )
        )
    return ImprovementSummary(changes=tuple(changes))


# ---------------------------------------------------------------------------
# Fair comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonResult:
    """Equal-budget ordering of two tuned systems by their best objective."""

    ranked: tuple[tuple[str, float], ...]
    tie: bool
    objective: str
    budget: int

    @property
    def winner(self) -> str | None:
        return None if self.tie else self.ranked[0][0]

    def display(self) -> str:
        if self.tie:
            names = " = ".join(n for n, _ in self.ranked)
            return f"tie: {names} at {self.ranked[0][1]}"
        return " > ".join(f"{n} ({v})" for n, v in self.ranked)


def _check_comparable(reports: Sequence[tuple[str, TuningReport]], label: str) -> None:
    budgets = {r.budget for _, r in reports}
    if len(budgets) > 1:
        raise AnalysisError(
            f"{label}: budgets differ {sorted(budgets)}; "
            "equal budgets are required for a fair result"
        )
    objectives = {(r.objective, r.direction) for _, r in reports}
    if len(objectives) > 1:
        raise AnalysisError(
            f"{label}: objectives differ "
            f"{sorted(f'{o} ({d})' for o, d in objectives)}; results are not comparable"
        )


def compare(
    report_a: TuningReport,
    report_b: TuningReport,
    name_a: str = "A",
    name_b: str = "B",
) -> ComparisonResult:
    """Order two tuned systems by best objective under equal budgets.

    Raises:
        AnalysisError: ``comparison-invalid`` when budgets or objectives
            differ.
    """
    _check_comparable([(name_a, report_a), (name_b, report_b)], "comparison-invalid")
    pairs = [(name_a, report_a.best.metric), (name_b, report_b.best.metric)]
    ranked = tuple(sorted(pairs, key=lambda p: -p[1]))
    return ComparisonResult(
        ranked=ranked,
        tie=pairs[0][1] == pairs[1][1],
        objective=report_a.objective,
        budget=report_a.budget,
    )


# ---------------------------------------------------------------------------
# Bottleneck identification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BottleneckVerdict:
    """Which candidate limits end-to-end performance.

    A candidate id containing ``+`` denotes a combination of co-deployed
    systems; when a combination is (among) the worst, the limit lies in the
    interaction between its members, and ``interaction`` is set.
    """

    candidates: tuple[tuple[str, float], ...]
    verdict: tuple[str, ...]
    interaction: bool
    rule: str

    def display(self) -> str:
        who = ", ".join(self.verdict)
        kind = "interaction bottleneck" if self.interaction else "bottleneck"
        return f"{kind}: {who}"


def identify_bottleneck(
    candidates: Sequence[tuple[str, TuningReport]],
) -> BottleneckVerdict:
    """Worst tuned-best candidate(s) among systems and their combinations.

    Every candidate must be tuned to the same objective under the same
    budget; the verdict is the argmin of tuned-best performance, with ties
    all reported.

    Raises:
        AnalysisError: fewer than two candidates, or mismatched
            budgets/objectives (``analysis-invalid``).
    """
    if len(candidates) < 2:
        raise AnalysisError(
            "analysis-invalid: bottleneck identification needs at least two candidates"
        )
    ids = [name for name, _ in candidates]
    if len(set(ids)) != len(ids):
        raise AnalysisError("analysis-invalid: duplicate candidate ids")
    _check_comparable(candidates, "analysis-invalid")
    scored = tuple((name, r.best.metric) for name, r in candidates)
    worst = min(v for _, v in scored)
    verdict = tuple(name for name, v in scored if v == worst)
    interaction = any("+" in name for name in verdict)
    return BottleneckVerdict(
        candidates=scored,
        verdict=verdict,
        interaction=interaction,
        rule="argmin of tuned-best objective at equal budget; ties all reported",
    )
