"""High-level estimator-style facade over the tuning stack.

:class:`ConfigTuner` follows the fit-and-inspect idiom: construct with
hyperparameters only, call :meth:`fit` with an objective (a callable or a
synthetic surface), then read trailing-underscore attributes.  Everything
it does is also reachable through the lower-level modules; this class just
packages the common path.
"""

from __future__ import annotations

from typing import Any, Callable

from sklearn.base import BaseEstimator

from .harness import run_tuning, surface_pair
from .search import make_optimizer, tune
from .space import ParameterSpace, Setting
from .surfaces import SyntheticSurface


class ConfigTuner(BaseEstimator):
    """Budgeted configuration tuner with a pluggable search strategy.

    Args:
        algo: "rrs", "random" or "lhs".
        budget: Total number of tests, baseline included.
        seed: PRNG seed; identical seeds give identical runs.
        repeats: Workload repetitions aggregated per test (surfaces only
            need 1).
        direction: "maximize" or "minimize" of the objective value.
        algo_params: Extra keyword hyperparameters for the strategy.

    Attributes (after fit):
        report_: Full :class:`~knobtuner.search.TuningReport`.
        best_setting_: Best configuration as a name->value dict.
        best_metric_: Its objective value in the original direction.
        baseline_metric_: Measured baseline objective value.
        improvement_ratio_: best/baseline of the canonical metric, or None.
        n_tests_: Tests actually consumed.
    """

    def __init__(
        self,
        algo: str = "rrs",
        budget: int = 100,
        seed: int = 0,
        repeats: int = 1,
        direction: str = "maximize",
        algo_params: dict[str, Any] | None = None,
    ):
        self.algo = algo
        self.budget = budget
        self.seed = seed
        self.repeats = repeats
        self.direction = direction
        self.algo_params = algo_params

    def fit(
        self,
        objective: "SyntheticSurface | Callable[[Setting], float]",
        space: ParameterSpace | None = None,
        baseline: Setting | None = None,
    ) -> "ConfigTuner":
        """Tune against a surface or a plain callable and keep the report.

        A surface brings its own space and default baseline; a callable
        needs ``space`` (and ``baseline`` unless every parameter declares a
        default).  The callable receives a setting tuple and returns the
        raw objective value; raising
        :class:`~knobtuner.search.EvaluationError` marks a failed test.
        """
        optimizer = make_optimizer(self.algo, self.algo_params)
        sign = -1.0 if self.direction == "minimize" else 1.0

        if isinstance(objective, SyntheticSurface):
            surface = objective
            space = surface.space
            baseline = baseline if baseline is not None else surface.default_setting()
            manipulator, workload = surface_pair(surface, direction=self.direction)
            report = run_tuning(
                space,
                optimizer,
                manipulator,
                workload,
                self.budget,
                baseline,
                self.seed,
                repeats=self.repeats,
                objective_name=surface.metric_name,
                direction=self.direction,
                algo=self.algo,
                params=optimizer.get_params(),
            )
        else:
            if space is None:
                raise ValueError("a callable objective requires a space")
            baseline = baseline if baseline is not None else space.default_setting()

            def canonical(setting: Setting):
                return sign * float(objective(setting))

            report = tune(
                optimizer,
                canonical,
                space,
                self.budget,
                baseline,
                self.seed,
                algo=self.algo,
                direction=self.direction,
            )

        self.report_ = report
        self.space_ = space
        self.best_setting_ = space.setting_to_dict(report.best.setting)
        self.best_metric_ = sign * report.best.metric
        self.baseline_metric_ = sign * report.baseline.metric
        self.improvement_ratio_ = report.improvement_ratio
        self.n_tests_ = report.tests_run
        return self
