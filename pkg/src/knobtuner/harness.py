"""Test-execution harness: drive a system and a workload to measure settings.

The tuner never touches a system directly.  It hands each proposed setting
to a :class:`SystemManipulator` (apply, restart, await readiness) and then
asks a :class:`WorkloadGenerator` to produce a :class:`MetricBundle`.  One
call to :func:`evaluate` is one test and consumes exactly one budget unit,
no matter how many workload repetitions it aggregates.

Failure taxonomy: :class:`SutError` marks a single failed test (the run
continues, the budget unit is spent); :class:`FatalSutError` aborts the run
with a partial report.
"""

from __future__ import annotations

import math
import statistics
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from .search import (
    BaseOptimizer,
    EvaluationError,
    Sample,
    TuningAbort,
    TuningReport,
    tune,
)
from .space import ParameterSpace, Setting, validate

if TYPE_CHECKING:
    from .adapters import TrajectoryStore


class SutError(EvaluationError):
    """One test failed: bad apply, failed restart, workload error, timeout."""


class FatalSutError(TuningAbort):
    """The system is beyond recovery; stop tuning and report what we have."""


class BudgetExhaustedError(RuntimeError):
    """An evaluation was requested after the budget ran out."""


class SystemManipulator(ABC):
    """Control surface of the system under tune.

    After ``apply`` + ``restart`` + ``await_ready`` all succeed, the system
    observably runs under the applied setting.
    """

    @abstractmethod
    def apply(self, setting: Setting) -> None:
        """Install a configuration setting.  Raises SutError on rejection."""

    @abstractmethod
    def restart(self) -> None:
        """Restart so the setting takes effect.  Raises SutError on failure."""

    @abstractmethod
    def await_ready(self, timeout: float | None = None) -> None:
        """Block until the system serves traffic.  Raises SutError on timeout."""

    def teardown(self) -> None:
        """Release resources at end of run.  Idempotent."""


class WorkloadGenerator(ABC):
    """Produces load against the current system state and measures it."""

    @abstractmethod
    def run(self) -> "MetricBundle":
        """Run the workload once.  Raises SutError on failure."""


@dataclass(frozen=True)
class MetricBundle:
    """Named measurements from one workload run.

    ``objective`` names the metric being tuned; ``direction`` says which way
    is better.  ``canonical()`` is the maximize-normalized objective value
    that optimizers compare.
    """

    values: dict[str, float]
    objective: str
    direction: str = "maximize"

    def __post_init__(self) -> None:
        if self.objective not in self.values:
            raise ValueError(f"objective metric {self.objective!r} missing from bundle")
        if self.direction not in ("maximize", "minimize"):
            raise ValueError(f"unknown direction {self.direction!r}")
        for name, v in self.values.items():
            if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
                raise ValueError(f"metric {name!r} is not finite: {v!r}")

    def canonical(self) -> float:
        v = float(self.values[self.objective])
        return -v if self.direction == "minimize" else v


class TuningBudget:
    """Counts tests against a hard maximum; consumption is monotone."""

    def __init__(self, max_tests: int, consumed: int = 0):
        if max_tests < 1:
            raise ValueError(f"max_tests must be >= 1, got {max_tests}")
        if not (0 <= consumed <= max_tests):
            raise ValueError(f"consumed {consumed} outside [0, {max_tests}]")
        self.max_tests = max_tests
        self.consumed = consumed

    @property
    def remaining(self) -> int:
        return self.max_tests - self.consumed

    @property
    def exhausted(self) -> bool:
        return self.consumed >= self.max_tests

    def consume(self) -> None:
        if self.exhausted:
            raise BudgetExhaustedError(f"budget of {self.max_tests} tests already spent")
        self.consumed += 1


@dataclass(frozen=True)
class TestOutcome:
    """Result of one budgeted test (possibly several workload repeats)."""

    setting: Setting
    repeats: tuple[MetricBundle, ...]
    value: float | None
    status: str
    duration: float
    detail: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def merged_metrics(self) -> dict[str, float] | None:
        """Per-metric median across successful repeats."""
        if not self.repeats:
            return None
        keys: list[str] = []
        for b in self.repeats:
            for k in b.values:
                if k not in keys:
                    keys.append(k)
        return {
            k: float(statistics.median([b.values[k] for b in self.repeats if k in b.values]))
            for k in keys
        }


def evaluate(
    setting: Setting,
    manipulator: SystemManipulator,
    workload: WorkloadGenerator,
    repeats: int = 1,
    timeout: float | None = None,
) -> TestOutcome:
    """Run one configuration test: apply, restart, await, measure k times.

    Aggregation is the median of the canonical objective over successful
    repeats.  Setup failure or failure of every repeat yields a failed
    outcome; either way exactly one budget unit is spent by the caller.
    FatalSutError passes through untouched.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    start = time.monotonic()
    try:
        manipulator.apply(setting)
        manipulator.restart()
        manipulator.await_ready(timeout)
    except SutError as exc:
        return TestOutcome(
            setting=tuple(setting),
            repeats=(),
            value=None,
            status="failed",
            duration=time.monotonic() - start,
            detail=f"setup: {exc}",
        )
    bundles: list[MetricBundle] = []
    errors: list[str] = []
    for _ in range(repeats):
        try:
            bundles.append(workload.run())
        except SutError as exc:
            errors.append(str(exc))
    duration = time.monotonic() - start
    if not bundles:
        return TestOutcome(
            setting=tuple(setting),
            repeats=(),
            value=None,
            status="failed",
            duration=duration,
            detail="; ".join(errors) or "no successful workload run",
        )
    value = float(statistics.median(b.canonical() for b in bundles))
    return TestOutcome(
        setting=tuple(setting),
        repeats=tuple(bundles),
        value=value,
        status="ok",
        duration=duration,
    )


def run_tuning(
    space: ParameterSpace,
    optimizer: BaseOptimizer,
    manipulator: SystemManipulator,
    workload: WorkloadGenerator,
    budget: int,
    baseline: Setting,
    seed: int,
    *,
    repeats: int = 1,
    timeout: float | None = None,
    store: "TrajectoryStore | None" = None,
    objective_name: str = "objective",
    direction: str = "maximize",
    algo: str | None = None,
    params: dict[str, Any] | None = None,
    run_id: str | None = None,
) -> TuningReport:
    """Drive a full budgeted tuning run over a real or synthetic system.

    When ``store`` is given, every consumed test is appended to it before
    the next one starts (a crash loses at most the in-flight test), and an
    existing stored trajectory is replayed first so the run resumes with
    exactly the remaining budget.  The final report is also written to the
    store.

    Teardown of the manipulator is guaranteed, whatever the outcome.
    """
    preload: tuple[Sample, ...] = ()
    if store is not None:
        preload = tuple(store.load())
    accounting = TuningBudget(budget, consumed=len(preload))

    def objective(setting: Setting):
        outcome = evaluate(setting, manipulator, workload, repeats=repeats, timeout=timeout)
        if not outcome.ok:
            raise SutError(outcome.detail or "test failed")
        return outcome.value, outcome.merged_metrics()

    def on_sample(sample: Sample) -> None:
        accounting.consume()
        if store is not None:
            store.append(sample)

    try:
        report = tune(
            optimizer,
            objective,
            space,
            budget,
            baseline,
            seed,
            preload=preload,
            on_sample=on_sample,
            algo=algo,
            params=params,
            objective_name=objective_name,
            direction=direction,
            run_id=run_id,
        )
    finally:
        manipulator.teardown()
    if store is not None:
        store.write_report(report)
    return report


# ---------------------------------------------------------------------------
# In-process adapters for synthetic surfaces
# ---------------------------------------------------------------------------


class SurfaceSut(SystemManipulator):
    """Manipulator over a synthetic surface; apply validates the setting."""

    def __init__(self, surface):
        self.surface = surface
        self.current: Setting | None = None

    def apply(self, setting: Setting) -> None:
        violations = validate(setting, self.surface.space)
        if violations:
            raise SutError("; ".join(str(v) for v in violations))
        self.current = tuple(setting)

    def restart(self) -> None:
        pass

    def await_ready(self, timeout: float | None = None) -> None:
        pass


class SurfaceWorkload(WorkloadGenerator):
    """Measures the surface at whatever setting the manipulator applied."""

    def __init__(self, sut: SurfaceSut, direction: str = "maximize"):
        self.sut = sut
        self.direction = direction

    def run(self) -> MetricBundle:
        if self.sut.current is None:
            raise SutError("no setting applied")
        surface = self.sut.surface
        value = surface.raw_value(self.sut.current)
        return MetricBundle(
            values={surface.metric_name: value},
            objective=surface.metric_name,
            direction=self.direction,
        )


def surface_pair(surface, direction: str = "maximize") -> tuple[SurfaceSut, SurfaceWorkload]:
    """Manipulator/workload pair measuring a synthetic surface in-process."""
    sut = SurfaceSut(surface)
    return sut, SurfaceWorkload(sut, direction=direction)
