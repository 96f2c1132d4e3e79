"""Acceptance criteria: ten end-to-end checks at pinned tolerances.

Each test exercises one criterion and emits a single pass/fail line via the
``acceptance`` fixture; the lines are echoed in the terminal summary.
"""

from __future__ import annotations

import json
import time

import numpy as np

from knobtuner.adapters import TrajectoryStore
from knobtuner.analysis import identify_bottleneck, summarize
from knobtuner.cli import main
from knobtuner.harness import (
    FatalSutError,
    MetricBundle,
    SurfaceSut,
    SurfaceWorkload,
    SystemManipulator,
    run_tuning,
    surface_pair,
)
from knobtuner.sampling import lhs
from knobtuner.search import LhsOptimizer, RandomOptimizer, RrsOptimizer, rrs_tune, tune
from knobtuner.space import Parameter, ParameterSpace
from knobtuner.surfaces import (
    SyntheticSurface,
    brute_force,
    surface_bumpy,
    surface_steplike,
)

SEEDS = tuple(range(10))


def test_criterion_01_oracle_verifies_steplike_extremes(acceptance):
    start = time.monotonic()
    surface = surface_steplike()
    baseline_value = surface.value(surface.default_setting())
    oracle = brute_force(surface, resolution=25)
    elapsed = time.monotonic() - start
    passed = baseline_value == 9815.0 and oracle.best_value == 118184.0 and elapsed < 60.0
    acceptance(
        1,
        "grid oracle pins steplike default and optimum exactly",
        passed,
        f"default={baseline_value}, optimum={oracle.best_value}, "
        f"evals={oracle.evaluation_count}, {elapsed:.1f}s",
    )


def test_criterion_02_rrs_budget_150_tenfold_improvement(acceptance):
    start = time.monotonic()
    surface = surface_steplike()
    hits = 0
    ratios = []
    for seed in SEEDS:
        report = rrs_tune(
            surface.value, surface.space, 150, surface.default_setting(), seed=seed
        )
        ratio = report.improvement_ratio
        ratios.append(ratio)
        if ratio >= 10.0:
            hits += 1
    elapsed = time.monotonic() - start
    passed = hits >= 9 and elapsed < 60.0
    acceptance(
        2,
        "recursive random search reaches 10x baseline within 150 tests",
        passed,
        f"{hits}/10 seeds >= 10x (min ratio {min(ratios):.2f}), {elapsed:.1f}s",
    )


def test_criterion_03_lhs_stratification_holds_everywhere(acceptance):
    rng = np.random.default_rng(20260821)
    violations = 0
    for _ in range(100):
        d = int(rng.integers(1, 11))
        m = int(rng.integers(1, 201))
        seed = int(rng.integers(0, 2**31))
        points = lhs(d, m, seed=seed).points
        for col in points.T:
            strata = np.minimum(np.floor(col * m).astype(int), m - 1)
            if sorted(strata.tolist()) != list(range(m)):
                violations += 1
    acceptance(
        3,
        "every stratum is hit exactly once across 100 random designs",
        violations == 0,
        f"{violations} violations over 100 (d, m, seed) draws",
    )


def test_criterion_04_budget_prefix_monotonicity(acceptance):
    surface = surface_bumpy()
    baseline = surface.default_setting()
    failures = []
    for seed in SEEDS:
        reports = {
            budget: rrs_tune(surface.value, surface.space, budget, baseline, seed=seed)
            for budget in (20, 40, 80, 160)
        }
        for budget in (20, 40, 80):
            small = reports[budget]
            large = reports[2 * budget]
            small_records = [s.to_record() for s in small.trajectory]
            large_records = [s.to_record() for s in large.trajectory]
            if small.tests_run != budget or large.tests_run != 2 * budget:
                failures.append(f"seed {seed} budget {budget}: wrong test count")
            elif large_records[: len(small_records)] != small_records:
                failures.append(f"seed {seed} budget {budget}: not a prefix")
            elif large.best.metric < small.best.metric:
                failures.append(f"seed {seed} budget {budget}: best regressed")
    acceptance(
        4,
        "doubling the budget extends the trajectory without rewriting it",
        not failures,
        failures[0] if failures else "30 prefix pairs checked across 10 seeds",
    )


def test_criterion_05_rugged_surface_needs_search_not_luck(acceptance):
    surface = surface_bumpy()
    space = surface.space

    def local_maxima(flag: bool, n: int = 100) -> int:
        xs = np.linspace(space["max_threads"].lo, space["max_threads"].hi, n)
        ys = np.linspace(space["accept_count"].lo, space["accept_count"].hi, n)
        grid = np.asarray([[surface.value((x, y, flag)) for y in ys] for x in xs])
        count = 0
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                patch = grid[i - 1 : i + 2, j - 1 : j + 2]
                if grid[i, j] == patch.max() and int(np.sum(patch == grid[i, j])) == 1:
                    count += 1
        return count

    maxima = local_maxima(False) + local_maxima(True)
    oracle = brute_force(surface, resolution=600)
    bar = 0.95 * oracle.best_value
    baseline = surface.default_setting()

    rrs_hits = 0
    random_hits = 0
    for seed in SEEDS:
        rrs_report = rrs_tune(surface.value, space, 300, baseline, seed=seed)
        if rrs_report.best.metric >= bar:
            rrs_hits += 1
        random_report = tune(
            RandomOptimizer(), surface.value, space, 300, baseline, seed, algo="random"
        )
        if random_report.best.metric >= bar:
            random_hits += 1

    passed = maxima >= 10 and rrs_hits >= 8 and random_hits < rrs_hits
    acceptance(
        5,
        "on a many-optima surface RRS reaches 95% of the true peak, random does not",
        passed,
        f"{maxima} grid-verified local maxima; >=95% of {oracle.best_value:.1f}: "
        f"rrs {rrs_hits}/10 seeds, random {random_hits}/10",
    )


def test_criterion_06_exhaustive_mode_matches_brute_force(acceptance):
    space = ParameterSpace.of(
        Parameter.integer("a", 0, 7, default=0),
        Parameter.integer("b", 0, 7, default=0),
        Parameter.integer("c", 0, 7, default=0),
    )

    def fn(setting) -> float:
        a, b, c = setting
        # 269 is odd, so n -> (269 n + 113) mod 512 permutes the cell ids:
        # injective, non-monotone, and every value is float-exact.
        return float((269 * (a + 8 * b + 64 * c) + 113) % 512)

    values = {fn((a, b, c)) for a in range(8) for b in range(8) for c in range(8)}
    assert len(values) == 512, "fixture objective must be injective"

    surface = SyntheticSurface(surface_id="discrete-512", space=space, fn=fn)
    oracle = brute_force(surface, resolution=8)
    sut, workload = surface_pair(surface)
    report = run_tuning(
        space,
        LhsOptimizer(exhaustive=True),
        sut,
        workload,
        budget=512,
        baseline=space.default_setting(),
        seed=0,
        algo="lhs",
    )
    distinct = len({s.setting for s in report.trajectory})
    passed = (
        report.tests_run == 512
        and distinct == 512
        and report.best.setting == oracle.best_setting
        and report.best.metric == oracle.best_value
    )
    acceptance(
        6,
        "exhaustive mode over 512 discrete settings returns the exact optimum",
        passed,
        f"optimum {report.best.setting} at {report.best.metric} "
        f"(oracle {oracle.best_setting} at {oracle.best_value}), {distinct} distinct settings",
    )


def test_criterion_07_composition_exposes_the_weak_stage(acceptance):
    from knobtuner.surfaces import get_surface, surface_backend

    backend = surface_backend()
    composed = get_surface("frontend+backend")

    backend_report = rrs_tune(
        backend.value, backend.space, 150, backend.default_setting(), seed=3,
        objective_name="requests_per_sec",
    )
    composed_report = rrs_tune(
        composed.value, composed.space, 150, composed.default_setting(), seed=3,
        objective_name="requests_per_sec",
    )
    verdict = identify_bottleneck(
        [("backend", backend_report), ("frontend+backend", composed_report)]
    )
    passed = (
        backend_report.best.metric >= 160.0 * 0.98
        and composed_report.best.metric == 100.0
        and verdict.verdict == ("frontend+backend",)
        and verdict.interaction
    )
    acceptance(
        7,
        "tuning the composition stalls at the untunable stage and is flagged as such",
        passed,
        f"backend alone {backend_report.best.metric:.1f}, composed "
        f"{composed_report.best.metric:.1f}, verdict {verdict.display()!r}",
    )


def test_criterion_08_improvement_table_recomputes_from_raw_counts(acceptance):
    default = MetricBundle(
        values={
            "txns_per_sec": 978.0,
            "hits_per_sec": 3235.0,
            "requests_passed": 3184598.0,
            "requests_failed": 165.0,
            "errors": 37.0,
        },
        objective="txns_per_sec",
    )
    tuned = MetricBundle(
        values={
            "txns_per_sec": 1018.0,
            "hits_per_sec": 3620.0,
            "requests_passed": 3381644.0,
            "requests_failed": 144.0,
            "errors": 34.0,
        },
        objective="txns_per_sec",
    )
    summary = summarize(
        default, tuned, {"requests_failed": "minimize", "errors": "minimize"}
    )
    got = {c.name: c.percent for c in summary}
    improved = all(c.improved for c in summary)
    # Recomputed from the raw counters; pre-rounded figures in circulation
    # for this table differ in the last digit for two rows (4.07 and 11.91),
    # which is exactly why the displayed percent is never copied over.
    expected = {
        "txns_per_sec": 4.09,
        "hits_per_sec": 11.90,
        "requests_passed": 6.19,
        "requests_failed": -12.73,
        "errors": -8.11,
    }
    passed = got == expected and improved
    acceptance(
        8,
        "mixed-direction improvement table matches exact decimal recomputation",
        passed,
        f"failed {got['requests_failed']}%, errors {got['errors']}%, "
        f"txns {got['txns_per_sec']}% (recomputed; 4.07 is the hand-rounded figure)",
    )


def test_criterion_09_identical_runs_identical_artifacts(acceptance, tmp_path):
    config_body = {
        "format_version": 1,
        "name": "determinism-check",
        "sut": {"kind": "surface", "surface": "steplike"},
        "budget": 60,
        "seed": 17,
    }
    config = tmp_path / "run.json"
    payloads = []
    for sub in ("first", "second"):
        out_dir = tmp_path / sub
        body = dict(config_body, output_dir=str(out_dir))
        config.write_text(json.dumps(body))
        code = main(["tune", "--config", str(config)])
        assert code == 0
        payloads.append(
            (
                (out_dir / "trajectory.csv").read_bytes(),
                (out_dir / "trajectory.jsonl").read_bytes(),
                (out_dir / "best_curve.csv").read_bytes(),
            )
        )
    passed = payloads[0] == payloads[1]
    acceptance(
        9,
        "re-running the same tuning command reproduces the artifacts byte for byte",
        passed,
        f"trajectory.csv {len(payloads[0][0])} bytes, "
        f"trajectory.jsonl {len(payloads[0][1])} bytes compared",
    )


class CrashAfter(SystemManipulator):
    """Delegates to a surface SUT until the nth apply, then dies fatally."""

    def __init__(self, surface, crash_on_apply: int):
        self.inner = SurfaceSut(surface)
        self.crash_on_apply = crash_on_apply
        self.applies = 0
        self.current = None

    def apply(self, setting):
        self.applies += 1
        if self.applies >= self.crash_on_apply:
            raise FatalSutError("injected hard crash")
        self.inner.apply(setting)
        self.current = self.inner.current

    def restart(self):
        self.inner.restart()

    def await_ready(self, timeout=None):
        self.inner.await_ready(timeout)


def test_criterion_10_crash_resume_completes_the_exact_remainder(acceptance, tmp_path):
    surface = surface_steplike()
    budget, crashed_tests, seed = 80, 24, 5

    store = TrajectoryStore(tmp_path / "run", space=surface.space)
    crashing = CrashAfter(surface, crash_on_apply=crashed_tests + 1)
    partial = run_tuning(
        surface.space,
        RrsOptimizer(),
        crashing,
        SurfaceWorkload(crashing.inner),
        budget=budget,
        baseline=surface.default_setting(),
        seed=seed,
        store=store,
        algo="rrs",
    )
    stored = len(store.load())

    healthy_sut, healthy_workload = surface_pair(surface)
    applies = []
    original_apply = healthy_sut.apply

    def counting_apply(setting):
        applies.append(tuple(setting))
        original_apply(setting)

    healthy_sut.apply = counting_apply
    resumed = run_tuning(
        surface.space,
        RrsOptimizer(),
        healthy_sut,
        healthy_workload,
        budget=budget,
        baseline=surface.default_setting(),
        seed=seed,
        store=store,
        algo="rrs",
    )

    fresh_sut, fresh_workload = surface_pair(surface)
    uninterrupted = run_tuning(
        surface.space,
        RrsOptimizer(),
        fresh_sut,
        fresh_workload,
        budget=budget,
        baseline=surface.default_setting(),
        seed=seed,
        algo="rrs",
    )
    same_trajectory = [s.to_record() for s in resumed.trajectory] == [
        s.to_record() for s in uninterrupted.trajectory
    ]
    contiguous = [s.test_index for s in resumed.trajectory] == list(range(budget))
    passed = (
        partial.termination == "user-stop"
        and stored == crashed_tests
        and len(applies) == budget - crashed_tests
        and resumed.termination == "budget-exhausted"
        and resumed.tests_run == budget
        and contiguous
        and same_trajectory
        and resumed.best.metric >= resumed.baseline.metric
    )
    acceptance(
        10,
        "a run killed mid-flight resumes from disk and spends only the remaining budget",
        passed,
        f"crashed at {stored} tests, resumed with {len(applies)} more of budget {budget}; "
        f"trajectory identical to an uninterrupted run: {same_trajectory}",
    )
