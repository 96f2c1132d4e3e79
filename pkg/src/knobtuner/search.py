"""Budget-aware black-box optimizers over the unit hypercube.

The centerpiece is recursive random search: a Latin-hypercube exploration
round locates a promising point, exploitation samples uniformly in a box
around it, the box recenters on improvement and shrinks after stalls, and
when it collapses below a minimum radius the search restarts globally.  Pure
random and pure Latin-hypercube strategies share the same propose/observe
contract, so a driver can swap them freely.

All strategies maximize; a minimization objective must be negated by the
caller before it reaches this module.  Failed evaluations are recorded with
``metric=None`` and still consume budget: a crashed test spent the resource.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .sampling import exhaustive_design, lhs_points, make_rng, uniform_points_in_box
from .space import (
    ParameterSpace,
    Setting,
    check_setting,
    clip_box,
    from_unit,
    to_unit,
)

REPORT_FORMAT_VERSION = 1

PHASES = ("seed-baseline", "explore", "exploit")
TERMINATIONS = ("budget-exhausted", "user-stop")


class ProtocolError(RuntimeError):
    """Propose/observe called out of order, or an observed sample does not
    match the pending proposal."""


class BaselineError(RuntimeError):
    """The baseline configuration failed to evaluate; nothing to improve on."""


class EvaluationError(Exception):
    """A single test failed.  The sample is recorded without a metric and
    the budget unit is still consumed."""


class TuningAbort(Exception):
    """Unrecoverable condition; the run stops and reports what it has."""


class StoreMismatchError(RuntimeError):
    """A persisted trajectory does not replay against this configuration."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RrsParams:
    """Hyperparameters of recursive random search.

    Attributes:
        p_explore: Confidence that one exploration round lands in the top
            ``r_percentile`` fraction of the space, in (0, 1).
        r_percentile: Target top-fraction defining "promising", in (0, 1).
        exploit_count: Consecutive non-improving local samples tolerated
            before the search box shrinks (>= 1).
        shrink: Radius multiplier applied at each shrink, in (0, 1).
        r0: Initial exploitation half-width in unit space, in (0, 1].
        rho_min: Radius below which exploitation ends and a global restart
            begins, in (0, r0).
        early_jump: Leave an exploration round as soon as a sample beats the
            threshold estimated by a previous round, rather than finishing
            the round.
        carry_threshold: Keep the historical maximum of the round thresholds
            instead of re-estimating from each completed round alone.
    """

    p_explore: float = 0.99
    r_percentile: float = 0.1
    exploit_count: int = 8
    shrink: float = 0.5
    r0: float = 0.25
    rho_min: float = 0.01
    early_jump: bool = True
    carry_threshold: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.p_explore < 1.0):
            raise ValueError(f"p_explore must be in (0, 1), got {self.p_explore}")
        if not (0.0 < self.r_percentile < 1.0):
            raise ValueError(f"r_percentile must be in (0, 1), got {self.r_percentile}")
        if self.exploit_count < 1:
            raise ValueError(f"exploit_count must be >= 1, got {self.exploit_count}")
        if not (0.0 < self.shrink < 1.0):
            raise ValueError(f"shrink must be in (0, 1), got {self.shrink}")
        if not (0.0 < self.r0 <= 1.0):
            raise ValueError(f"r0 must be in (0, 1], got {self.r0}")
        if not (0.0 < self.rho_min < self.r0):
            raise ValueError(f"rho_min must be in (0, r0), got {self.rho_min}")

    @property
    def n_explore(self) -> int:
        return n_explore(self)

    def to_dict(self) -> dict:
        return asdict(self)


def n_explore(params: RrsParams) -> int:
    """Exploration round size: ceil(ln(1-p) / ln(1-r)).

    The smallest sample count for which, with probability at least
    ``p_explore``, at least one point of the round falls in the best
    ``r_percentile`` fraction of the space.
    """
    n = math.ceil(math.log(1.0 - params.p_explore) / math.log(1.0 - params.r_percentile))
    return max(n, 1)


@dataclass(frozen=True)
class Sample:
    """One evaluated configuration test.

    ``metric`` is the direction-normalized objective (higher is better), or
    None for a failed test.  ``metrics`` optionally carries the raw named
    measurements behind it.
    """

    setting: Setting
    point: tuple[float, ...]
    metric: float | None
    test_index: int
    phase: str
    metrics: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.metric is not None and not math.isfinite(self.metric):
            raise ValueError(f"metric must be finite, got {self.metric}")
        if self.test_index < 0:
            raise ValueError(f"test_index must be >= 0, got {self.test_index}")

    @property
    def ok(self) -> bool:
        return self.metric is not None

    def to_record(self) -> dict:
        return {
            "test_index": self.test_index,
            "phase": self.phase,
            "setting": list(self.setting),
            "point": [float(x) for x in self.point],
            "metric": self.metric,
            "metrics": self.metrics,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Sample":
        return cls(
            setting=tuple(record["setting"]),
            point=tuple(float(x) for x in record["point"]),
            metric=record["metric"],
            test_index=int(record["test_index"]),
            phase=record["phase"],
            metrics=record.get("metrics"),
        )


@dataclass(frozen=True)
class TuningState:
    """Immutable snapshot of an optimizer's internal position."""

    phase: str
    n_observed: int
    radius: float | None = None
    since_improve: int | None = None
    threshold: float | None = None
    round_size: int | None = None
    best_metric: float | None = None


@dataclass(frozen=True)
class TuningReport:
    """Complete, serializable result of one tuning run."""

    best: Sample
    baseline: Sample
    trajectory: tuple[Sample, ...]
    termination: str
    seed: int
    budget: int
    algo: str
    params: dict[str, Any] = field(default_factory=dict)
    objective: str = "objective"
    direction: str = "maximize"
    run_id: str | None = None

    def __post_init__(self) -> None:
        if self.termination not in TERMINATIONS:
            raise ValueError(f"unknown termination {self.termination!r}")
        if self.direction not in ("maximize", "minimize"):
            raise ValueError(f"unknown direction {self.direction!r}")

    @property
    def improvement_ratio(self) -> float | None:
        """best/baseline metric ratio; None when baseline is not positive."""
        if self.baseline.metric is not None and self.baseline.metric > 0:
            return self.best.metric / self.baseline.metric
        return None

    @property
    def tests_run(self) -> int:
        return len(self.trajectory)

    def best_curve(self) -> list[tuple[int, float]]:
        """(test_index, best metric so far) pairs over successful samples."""
        out: list[tuple[int, float]] = []
        best = -math.inf
        for s in self.trajectory:
            if s.metric is not None and s.metric > best:
                best = s.metric
            if best > -math.inf:
                out.append((s.test_index, best))
        return out

    def to_dict(self) -> dict:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "run_id": self.run_id,
            "algo": self.algo,
            "params": dict(self.params),
            "objective": self.objective,
            "direction": self.direction,
            "seed": self.seed,
            "budget": self.budget,
            "tests_run": self.tests_run,
            "termination": self.termination,
            "baseline": self.baseline.to_record(),
            "best": self.best.to_record(),
            "improvement_ratio": self.improvement_ratio,
            "trajectory": [s.to_record() for s in self.trajectory],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "TuningReport":
        version = obj.get("format_version", REPORT_FORMAT_VERSION)
        if version != REPORT_FORMAT_VERSION:
            raise ValueError(f"unsupported report format_version {version!r}")
        return cls(
            best=Sample.from_record(obj["best"]),
            baseline=Sample.from_record(obj["baseline"]),
            trajectory=tuple(Sample.from_record(r) for r in obj["trajectory"]),
            termination=obj["termination"],
            seed=int(obj["seed"]),
            budget=int(obj["budget"]),
            algo=obj["algo"],
            params=obj.get("params", {}),
            objective=obj.get("objective", "objective"),
            direction=obj.get("direction", "maximize"),
            run_id=obj.get("run_id"),
        )


# ---------------------------------------------------------------------------
# Optimizer strategies
# ---------------------------------------------------------------------------


class BaseOptimizer(BaseEstimator):
    """Shared propose/observe contract for budget-aware strategies.

    Lifecycle: construct with hyperparameters only, then ``setup`` binds a
    space and seed, then a driver alternates ``propose`` and ``observe``
    strictly.  Strategies never require more evaluations than granted; every
    ``propose`` yields a valid unit point.

    Subclasses implement ``_next_point`` and ``_update`` and may read the
    attributes set by setup (``space_``, ``seed_``, ``d_``).
    """

    def setup(
        self,
        space: ParameterSpace,
        seed: int,
        budget: int | None = None,
        baseline: Setting | None = None,
    ) -> "BaseOptimizer":
        self.space_ = space
        self.seed_ = int(seed)
        self.d_ = space.dimension
        self.budget_ = budget
        self.baseline_ = baseline
        self.n_observed_ = 0
        self._pending: np.ndarray | None = None
        self._setup()
        return self

    def _setup(self) -> None:
        raise NotImplementedError

    def _next_point(self) -> np.ndarray:
        raise NotImplementedError

    def _update(self, sample: Sample) -> None:
        raise NotImplementedError

    @property
    def phase(self) -> str:
        """Phase label for the pending or next proposal."""
        return "explore"

    def propose(self) -> np.ndarray:
        if not hasattr(self, "space_"):
            raise ProtocolError("setup() must be called before propose()")
        if self._pending is not None:
            raise ProtocolError("a proposal is already pending observation")
        point = np.asarray(self._next_point(), dtype=float)
        self._pending = point
        return point.copy()

    def observe(self, sample: Sample) -> None:
        if self._pending is None:
            raise ProtocolError("observe() without a pending proposal")
        if not np.array_equal(np.asarray(sample.point, dtype=float), self._pending):
            raise ProtocolError(
                f"observed point does not match pending proposal at test {sample.test_index}"
            )
        self._pending = None
        self.n_observed_ += 1
        self._update(sample)

    def snapshot(self) -> TuningState:
        return TuningState(phase=self.phase, n_observed=getattr(self, "n_observed_", 0))


class RrsOptimizer(BaseOptimizer):
    """Recursive random search.

    Explore: one Latin-hypercube round of ``n_explore`` points estimates the
    promising-performance threshold and seeds a local search at the round's
    best point.  Exploit: sample uniformly in a box of half-width ``radius``
    around the incumbent; strict improvement recenters, ``exploit_count``
    consecutive misses shrink the box by ``shrink``, and a box below
    ``rho_min`` triggers a fresh global round.

    Constructor arguments mirror :class:`RrsParams` and are stored verbatim;
    validation happens in ``setup``.
    """

    def __init__(
        self,
        p_explore: float = 0.99,
        r_percentile: float = 0.1,
        exploit_count: int = 8,
        shrink: float = 0.5,
        r0: float = 0.25,
        rho_min: float = 0.01,
        early_jump: bool = True,
        carry_threshold: bool = False,
    ):
        self.p_explore = p_explore
        self.r_percentile = r_percentile
        self.exploit_count = exploit_count
        self.shrink = shrink
        self.r0 = r0
        self.rho_min = rho_min
        self.early_jump = early_jump
        self.carry_threshold = carry_threshold

    def params_(self) -> RrsParams:
        return RrsParams(
            p_explore=self.p_explore,
            r_percentile=self.r_percentile,
            exploit_count=self.exploit_count,
            shrink=self.shrink,
            r0=self.r0,
            rho_min=self.rho_min,
            early_jump=self.early_jump,
            carry_threshold=self.carry_threshold,
        )

    def _setup(self) -> None:
        self.rrs_params_ = self.params_()
        self._rng = make_rng(self.seed_, 4)
        self._threshold: float | None = None
        self._enter_explore()

    def _enter_explore(self) -> None:
        self._phase = "explore"
        design = lhs_points(self.d_, self.rrs_params_.n_explore, self._rng)
        self._design = design
        self._design_pos = 0
        self._round: list[Sample] = []
        self._center: Sample | None = None

    def _enter_exploit(self, center: Sample) -> None:
        self._phase = "exploit"
        self._center = center
        self._radius = self.rrs_params_.r0
        self._since_improve = 0

    @property
    def phase(self) -> str:
        return self._phase

    def _next_point(self) -> np.ndarray:
        if self._phase == "explore":
            if self._design_pos >= len(self._design):
                self._enter_explore()
            point = self._design[self._design_pos]
            self._design_pos += 1
            return point
        box = clip_box(np.asarray(self._center.point), self._radius)
        return uniform_points_in_box(box, 1, self._rng)[0]

    def _update(self, sample: Sample) -> None:
        if self._phase == "explore":
            self._observe_explore(sample)
        else:
            self._observe_exploit(sample)

    def _observe_explore(self, sample: Sample) -> None:
        p = self.rrs_params_
        if (
            p.early_jump
            and sample.ok
            and self._threshold is not None
            and sample.metric > self._threshold
        ):
            self._enter_exploit(sample)
            return
        self._round.append(sample)
        if len(self._round) < p.n_explore:
            return
        best = _round_best(self._round)
        if best is None:
            self._enter_explore()
            return
        if p.carry_threshold and self._threshold is not None:
            self._threshold = max(self._threshold, best.metric)
        else:
            self._threshold = best.metric
        self._enter_exploit(best)

    def _observe_exploit(self, sample: Sample) -> None:
        p = self.rrs_params_
        if sample.ok and sample.metric > self._center.metric:
            self._center = sample
            self._since_improve = 0
            return
        self._since_improve += 1
        if self._since_improve >= p.exploit_count:
            self._radius *= p.shrink
            self._since_improve = 0
            if self._radius < p.rho_min:
                self._enter_explore()

    def snapshot(self) -> TuningState:
        exploiting = self._phase == "exploit"
        return TuningState(
            phase=self._phase,
            n_observed=self.n_observed_,
            radius=self._radius if exploiting else None,
            since_improve=self._since_improve if exploiting else None,
            threshold=self._threshold,
            round_size=len(self._round) if not exploiting else None,
            best_metric=self._center.metric if exploiting else None,
        )


def _round_best(samples: Sequence[Sample]) -> Sample | None:
    """Best successful sample of a round; earliest wins ties; None if all failed."""
    best: Sample | None = None
    for s in samples:
        if s.ok and (best is None or s.metric > best.metric):
            best = s
    return best


class RandomOptimizer(BaseOptimizer):
    """Points drawn i.i.d. uniform over the whole unit cube."""

    def _setup(self) -> None:
        self._rng = make_rng(self.seed_, 5)

    def _next_point(self) -> np.ndarray:
        return self._rng.random(self.d_)

    def _update(self, sample: Sample) -> None:
        pass


class LhsOptimizer(BaseOptimizer):
    """A single stratified design evaluated in order, with no adaptation.

    ``m`` defaults to the search budget (budget minus the baseline test) so
    one design covers the whole run.  With ``exhaustive=True`` on a fully
    discrete space, the design enumerates every grid cell exactly once in a
    seeded random order, skipping the baseline's own cell since the baseline
    test already measured it; budget equal to the space size then guarantees
    the exact optimum.

    If the driver asks for more points than one design holds, a fresh design
    of the same size continues the run.
    """

    def __init__(self, m: int | None = None, exhaustive: bool = False):
        self.m = m
        self.exhaustive = exhaustive

    def _setup(self) -> None:
        self._rng = make_rng(self.seed_, 6)
        if self.exhaustive:
            if not self.space_.is_fully_discrete():
                raise ValueError("exhaustive mode requires a fully discrete space")
            design = exhaustive_design(self.space_, self.seed_, skip=self.baseline_)
            self._m = design.m
            self._design = design.points
        else:
            if self.m is not None:
                self._m = int(self.m)
            elif self.budget_ is not None:
                self._m = max(int(self.budget_) - 1, 1)
            else:
                raise ValueError("LhsOptimizer needs m or a budget to size its design")
            if self._m < 1:
                raise ValueError(f"design size must be >= 1, got {self._m}")
            self._design = lhs_points(self.d_, self._m, self._rng)
        self._pos = 0

    def _next_point(self) -> np.ndarray:
        if self._pos >= len(self._design):
            self._design = lhs_points(self.d_, self._m, self._rng)
            self._pos = 0
        point = self._design[self._pos]
        self._pos += 1
        return point

    def _update(self, sample: Sample) -> None:
        pass


ALGORITHMS: dict[str, type[BaseOptimizer]] = {
    "rrs": RrsOptimizer,
    "random": RandomOptimizer,
    "lhs": LhsOptimizer,
}


def make_optimizer(algo: str, params: dict[str, Any] | None = None) -> BaseOptimizer:
    """Construct a strategy by name with keyword hyperparameters."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {sorted(ALGORITHMS)}")
    return ALGORITHMS[algo](**(params or {}))


# ---------------------------------------------------------------------------
# Driver loop
# ---------------------------------------------------------------------------

#: An objective maps a setting to a direction-normalized value (higher is
#: better), or to (value, raw metrics dict).  It raises EvaluationError for
#: a failed test and TuningAbort for an unrecoverable one.
Objective = Callable[[Setting], "float | tuple[float, dict[str, float]]"]


def tune(
    optimizer: BaseOptimizer,
    objective: Objective,
    space: ParameterSpace,
    budget: int,
    baseline: Setting,
    seed: int,
    *,
    preload: Sequence[Sample] = (),
    on_sample: Callable[[Sample], None] | None = None,
    algo: str | None = None,
    params: dict[str, Any] | None = None,
    objective_name: str = "objective",
    direction: str = "maximize",
    run_id: str | None = None,
) -> TuningReport:
    """Run one budgeted tuning loop and return its report.

    The baseline is evaluated first and consumes one test; a baseline
    failure is fatal.  The loop then alternates propose/evaluate/observe
    until exactly ``budget`` tests have been consumed, counting failures.

    ``preload`` replays an existing trajectory prefix (e.g. recovered from
    disk after a crash) through the optimizer without consuming budget, so
    the run continues exactly where it stopped.

    ``on_sample`` is invoked once per newly consumed test, after the
    optimizer has seen it; persistence hooks go here.

    Raises:
        BaselineError: the baseline evaluation failed.
        StoreMismatchError: the preload does not replay against this
            optimizer/seed/space combination.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    baseline = check_setting(baseline, space)
    optimizer.setup(space, seed=seed, budget=budget, baseline=baseline)

    trajectory: list[Sample] = []
    termination = "budget-exhausted"

    if preload:
        trajectory = _replay(optimizer, list(preload), space, baseline, budget)
    else:
        base_point = to_unit(baseline, space)
        try:
            value, metrics = _call_objective(objective, baseline)
        except EvaluationError as exc:
            raise BaselineError(f"baseline evaluation failed: {exc}") from exc
        if value is None:
            raise BaselineError("baseline evaluation returned no usable metric")
        base_sample = Sample(
            setting=baseline,
            point=tuple(float(x) for x in base_point),
            metric=value,
            test_index=0,
            phase="seed-baseline",
            metrics=metrics,
        )
        trajectory.append(base_sample)
        if on_sample is not None:
            on_sample(base_sample)

    while len(trajectory) < budget:
        point = optimizer.propose()
        setting = from_unit(point, space)
        phase = optimizer.phase
        try:
            value, metrics = _call_objective(objective, setting)
        except EvaluationError as exc:
            value, metrics = None, getattr(exc, "metrics", None)
        except (TuningAbort, KeyboardInterrupt):
            termination = "user-stop"
            break
        sample = Sample(
            setting=setting,
            point=tuple(float(x) for x in point),
            metric=value,
            test_index=len(trajectory),
            phase=phase,
            metrics=metrics,
        )
        optimizer.observe(sample)
        trajectory.append(sample)
        if on_sample is not None:
            on_sample(sample)

    best = _trajectory_best(trajectory)
    return TuningReport(
        best=best,
        baseline=trajectory[0],
        trajectory=tuple(trajectory),
        termination=termination,
        seed=seed,
        budget=budget,
        algo=algo or type(optimizer).__name__,
        params=dict(params) if params is not None else optimizer.get_params(),
        objective=objective_name,
        direction=direction,
        run_id=run_id,
    )


def _call_objective(
    objective: Objective, setting: Setting
) -> tuple[float | None, dict[str, float] | None]:
    result = objective(setting)
    if isinstance(result, tuple):
        value, metrics = result
    else:
        value, metrics = result, None
    if value is None or not math.isfinite(value):
        return None, metrics
    return float(value), metrics


def _replay(
    optimizer: BaseOptimizer,
    records: list[Sample],
    space: ParameterSpace,
    baseline: Setting,
    budget: int,
) -> list[Sample]:
    """Feed a persisted prefix back through a freshly set-up optimizer."""
    if len(records) > budget:
        raise StoreMismatchError(
            f"stored trajectory has {len(records)} tests but budget is {budget}"
        )
    for i, rec in enumerate(records):
        if rec.test_index != i:
            raise StoreMismatchError(
                f"stored trajectory is not contiguous at position {i} "
                f"(test_index {rec.test_index})"
            )
    first = records[0]
    if first.phase != "seed-baseline" or first.setting != tuple(baseline):
        raise StoreMismatchError("stored trajectory does not start with this baseline")
    if first.metric is None:
        raise StoreMismatchError("stored baseline has no metric")
    for rec in records[1:]:
        point = optimizer.propose()
        if not np.array_equal(np.asarray(rec.point, dtype=float), point):
            raise StoreMismatchError(
                f"stored point at test {rec.test_index} does not match replay; "
                "seed, space, or optimizer settings differ from the original run"
            )
        optimizer.observe(rec)
    return list(records)


def _trajectory_best(trajectory: Sequence[Sample]) -> Sample:
    """Highest metric; ties broken toward the earliest test."""
    best: Sample | None = None
    for s in trajectory:
        if s.metric is None:
            continue
        if best is None or s.metric > best.metric:
            best = s
    if best is None:
        raise BaselineError("no successful evaluation in trajectory")
    return best


def rrs_tune(
    objective: Objective,
    space: ParameterSpace,
    budget: int,
    baseline: Setting,
    params: RrsParams | None = None,
    seed: int = 0,
    **kwargs: Any,
) -> TuningReport:
    """Convenience wrapper: recursive random search with default params."""
    params = params or RrsParams()
    optimizer = RrsOptimizer(**params.to_dict())
    return tune(
        optimizer,
        objective,
        space,
        budget,
        baseline,
        seed,
        algo="rrs",
        params=params.to_dict(),
        **kwargs,
    )
