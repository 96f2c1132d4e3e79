"""Command-line interface: tune, oracle, report, compare, bottleneck, surfaces.

Conventions: result data goes to stdout and files, diagnostics go to
stderr, and the exit status is 0 exactly when the command completed its
contract.  Flag values always override run-config values, and the
effective configuration is echoed into the report for auditability.

Run config schema (JSON)::

    {
      "format_version": 1,
      "name": "steplike-rrs",              // optional run id
      "sut": {"kind": "surface", "surface": "steplike", "noise": 0.0}
          //  or {"kind": "external", "space": "space.json",
          //      "template": "cfg.tmpl", "template_out": "app.cfg",
          //      "restart": ["./restart.sh"], "ready": ["./ready.sh"],
          //      "teardown": ["./stop.sh"], "workload": ["./bench.sh"],
          //      "metrics": {"throughput": "^throughput: (\\S+)"},
          //      "timeout": 120}
      "objective": {"key": "ops_per_sec", "direction": "maximize"},
      "optimizer": {"algo": "rrs", "params": {}},
      "budget": 150,
      "repeats": 1,
      "seed": 7,                           // omitted -> fresh random, recorded
      "baseline": {"query_cache_type": "OFF"},  // omitted -> space defaults
      "output_dir": "runs/steplike"
    }

A surface SUT carries its own parameter space, so "space" is only valid
(and required) for external SUTs.
"""

from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from . import analysis
from .adapters import (
    CommandSpec,
    ExternalManipulator,
    ExternalWorkload,
    MetricParserSpec,
    StoreCorruptError,
    TemplateSpec,
    TrajectoryStore,
)
from .harness import BudgetExhaustedError, MetricBundle, run_tuning, surface_pair
from .search import (
    ALGORITHMS,
    BaselineError,
    Sample,
    StoreMismatchError,
    TuningReport,
    make_optimizer,
)
from .space import ParameterSpace, SpaceError, Setting, load_space, save_space, space_to_json
from .surfaces import brute_force, get_surface, surface_catalog

RUN_CONFIG_FORMAT_VERSION = 1
OUT_DIR_ENV = "KNOBTUNER_OUT"


class CliError(Exception):
    """User-facing failure with a diagnostic message and an exit code."""

    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


class ConfigError(CliError):
    """Run config file is missing, malformed, or inconsistent."""

    def __init__(self, message: str):
        super().__init__(message, code=2)


# ---------------------------------------------------------------------------
# Run config
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    """A fully resolved tuning run: what to tune, how, and where to write."""

    name: str | None
    space: ParameterSpace
    baseline: Setting
    budget: int
    seed: int
    seed_was_random: bool
    repeats: int
    algo: str
    algo_params: dict[str, Any]
    objective_key: str
    direction: str
    output_dir: Path
    sut: dict[str, Any]

    def effective(self) -> dict[str, Any]:
        """The configuration actually in force, echoed into the report."""
        return {
            "name": self.name,
            "sut": self.sut,
            "objective": {"key": self.objective_key, "direction": self.direction},
            "optimizer": {"algo": self.algo, "params": self.algo_params},
            "budget": self.budget,
            "repeats": self.repeats,
            "seed": self.seed,
            "seed_was_random": self.seed_was_random,
            "baseline": dict(zip(self.space.names, self.baseline)),
            "output_dir": str(self.output_dir),
        }


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def load_run_config(path: str, args: argparse.Namespace) -> RunConfig:
    """Parse and validate a run config file, applying flag overrides."""
    cfg_path = Path(path)
    _expect(cfg_path.exists(), f"config file not found: {path}")
    try:
        raw = json.loads(cfg_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path}: invalid JSON: {exc}") from exc
    _expect(isinstance(raw, dict), f"config {path}: expected a JSON object")
    version = raw.get("format_version", RUN_CONFIG_FORMAT_VERSION)
    _expect(
        version == RUN_CONFIG_FORMAT_VERSION,
        f"config {path}: unsupported format_version {version!r}",
    )

    sut = raw.get("sut")
    _expect(isinstance(sut, dict), f"config {path}: missing 'sut' object")
    kind = sut.get("kind")
    _expect(kind in ("surface", "external"), f"config {path}: sut.kind must be 'surface' or 'external'")

    base_dir = cfg_path.parent

    if kind == "surface":
        _expect("space" not in sut and "space" not in raw,
                f"config {path}: a surface SUT defines its own space; remove 'space'")
        surface_id = sut.get("surface")
        _expect(isinstance(surface_id, str), f"config {path}: sut.surface must name a catalog surface")
        try:
            surface = get_surface(surface_id, noise=float(sut.get("noise", 0.0)),
                                  noise_seed=int(sut.get("noise_seed", 0)))
        except ValueError as exc:
            raise ConfigError(f"config {path}: {exc}") from exc
        space = surface.space
        default_objective = surface.metric_name
    else:
        space_path = sut.get("space", raw.get("space"))
        _expect(isinstance(space_path, str), f"config {path}: external sut requires a 'space' file path")
        try:
            space = load_space(base_dir / space_path)
        except (OSError, SpaceError) as exc:
            raise ConfigError(f"config {path}: {exc}") from exc
        default_objective = None

    objective = raw.get("objective", {})
    _expect(isinstance(objective, dict), f"config {path}: 'objective' must be an object")
    objective_key = objective.get("key", default_objective)
    _expect(isinstance(objective_key, str),
            f"config {path}: objective.key is required for an external sut")
    direction = objective.get("direction", "maximize")
    _expect(direction in ("maximize", "minimize"),
            f"config {path}: objective.direction must be maximize or minimize")

    optimizer = raw.get("optimizer", {})
    _expect(isinstance(optimizer, dict), f"config {path}: 'optimizer' must be an object")
    algo = getattr(args, "algo", None) or optimizer.get("algo", "rrs")
    _expect(algo in ALGORITHMS, f"config {path}: unknown algo {algo!r}; choose from {sorted(ALGORITHMS)}")
    algo_params = optimizer.get("params", {})
    _expect(isinstance(algo_params, dict), f"config {path}: optimizer.params must be an object")

    budget = getattr(args, "budget", None)
    if budget is None:
        budget = raw.get("budget")
    _expect(isinstance(budget, int) and budget >= 1,
            f"config {path}: a positive integer budget is required (config field or --budget)")

    repeats = getattr(args, "repeats", None)
    if repeats is None:
        repeats = raw.get("repeats", 1)
    _expect(isinstance(repeats, int) and repeats >= 1, f"config {path}: repeats must be >= 1")

    seed = getattr(args, "seed", None)
    if seed is None:
        seed = raw.get("seed")
    seed_was_random = seed is None
    if seed_was_random:
        seed = secrets.randbelow(2**32)
    _expect(isinstance(seed, int) and seed >= 0, f"config {path}: seed must be a non-negative integer")

    baseline_cfg = raw.get("baseline")
    try:
        if baseline_cfg is None:
            baseline = space.default_setting()
        else:
            _expect(isinstance(baseline_cfg, dict),
                    f"config {path}: 'baseline' must map parameter names to values")
            baseline = space.setting_from_dict(baseline_cfg)
    except SpaceError as exc:
        raise ConfigError(f"config {path}: baseline: {exc}") from exc

    flag_out = getattr(args, "out", None)
    env_out = os.environ.get(OUT_DIR_ENV)
    cfg_out = raw.get("output_dir")
    out = flag_out or env_out or cfg_out
    _expect(out is not None,
            f"config {path}: an output directory is required (config field, --out, or ${OUT_DIR_ENV})")
    if flag_out or env_out:
        output_dir = Path(out)
    elif Path(out).is_absolute():
        output_dir = Path(out)
    else:
        output_dir = base_dir / out

    name = raw.get("name")
    sut_echo = dict(sut)
    return RunConfig(
        name=name,
        space=space,
        baseline=baseline,
        budget=budget,
        seed=seed,
        seed_was_random=seed_was_random,
        repeats=repeats,
        algo=algo,
        algo_params=algo_params,
        objective_key=objective_key,
        direction=direction,
        output_dir=output_dir,
        sut=sut_echo,
    )


def _build_components(config: RunConfig, config_dir: Path):
    """Manipulator/workload pair for the configured SUT."""
    sut = config.sut
    if sut["kind"] == "surface":
        surface = get_surface(
            sut["surface"], noise=float(sut.get("noise", 0.0)),
            noise_seed=int(sut.get("noise_seed", 0)),
        )
        return surface_pair(surface, direction=config.direction)

    def cmd(key: str, timeout: float) -> CommandSpec | None:
        argv = sut.get(key)
        if argv is None:
            return None
        _expect(isinstance(argv, list) and argv and all(isinstance(a, str) for a in argv),
                f"sut.{key} must be a non-empty list of strings")
        return CommandSpec(argv=tuple(argv), cwd=str(config_dir), timeout=timeout)

    timeout = float(sut.get("timeout", 120.0))
    template = None
    if "template" in sut:
        tmpl_path = config_dir / sut["template"]
        _expect(tmpl_path.exists(), f"template file not found: {tmpl_path}")
        _expect("template_out" in sut, "sut.template requires sut.template_out")
        template = TemplateSpec(
            template=tmpl_path.read_text(encoding="utf-8"),
            output_path=str(config_dir / sut["template_out"]),
            formats=sut.get("formats", {}),
        )
    manipulator = ExternalManipulator(
        space=config.space,
        template=template,
        restart_cmd=cmd("restart", timeout),
        ready_cmd=cmd("ready", timeout),
        teardown_cmd=cmd("teardown", timeout),
    )
    workload_cmd = cmd("workload", timeout)
    _expect(workload_cmd is not None, "external sut requires a 'workload' command")
    rules = sut.get("metrics")
    _expect(isinstance(rules, dict) and rules, "external sut requires 'metrics' extraction rules")
    try:
        parser = MetricParserSpec(
            rules=rules,
            objective=config.objective_key,
            direction=config.direction,
            source=sut.get("metrics_source", "stdout"),
            path=sut.get("metrics_path"),
        )
    except ValueError as exc:
        raise ConfigError(f"metrics rules: {exc}") from exc
    return manipulator, ExternalWorkload(workload_cmd, parser)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_tune(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args)
    manipulator, workload = _build_components(config, Path(args.config).parent)
    optimizer = make_optimizer(config.algo, config.algo_params)
    store = TrajectoryStore(config.output_dir, space=config.space)
    if config.seed_was_random:
        print(f"seed not given; using fresh seed {config.seed}", file=sys.stderr)

    try:
        report = run_tuning(
            config.space,
            optimizer,
            manipulator,
            workload,
            config.budget,
            config.baseline,
            config.seed,
            repeats=config.repeats,
            store=store,
            objective_name=config.objective_key,
            direction=config.direction,
            algo=config.algo,
            params=config.effective(),
            run_id=config.name,
        )
    except (BaselineError, StoreMismatchError, StoreCorruptError, BudgetExhaustedError) as exc:
        raise CliError(str(exc)) from exc

    best = config.space.setting_to_dict(report.best.setting)
    print(f"tests run: {report.tests_run} / budget {report.budget}")
    print(f"baseline {config.objective_key}: {report.baseline.metric}")
    print(f"best {config.objective_key}: {report.best.metric}")
    if report.improvement_ratio is not None:
        print(f"improvement ratio: {report.improvement_ratio:.4f}")
    print("best setting:")
    for k, v in best.items():
        print(f"  {k} = {v}")
    print(f"artifacts in {config.output_dir}", file=sys.stderr)
    if report.termination != "budget-exhausted":
        print(f"stopped early: {report.termination}", file=sys.stderr)
        return 1
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    try:
        surface = get_surface(args.surface)
    except ValueError as exc:
        raise CliError(f"{exc}", code=2) from exc
    try:
        result = brute_force(surface, resolution=args.res, cap=args.cap)
    except ValueError as exc:
        raise CliError(str(exc), code=2) from exc
    named = surface.space.setting_to_dict(result.best_setting)
    print(f"surface: {surface.surface_id}")
    print(f"grid best {surface.metric_name}: {result.best_value}")
    print(f"evaluations: {result.evaluation_count} (resolutions {list(result.resolutions)})")
    print("grid best setting:")
    for k, v in named.items():
        print(f"  {k} = {v}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {
            "format_version": 1,
            "surface": surface.surface_id,
            "best_value": result.best_value,
            "best_setting": named,
            "resolutions": list(result.resolutions),
            "evaluation_count": result.evaluation_count,
        }
        (out_dir / "oracle.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {out_dir / 'oracle.json'}", file=sys.stderr)
    return 0


def _load_trajectory(path: Path) -> tuple[list[Sample], TuningReport | None]:
    """Trajectory samples plus the sibling report when one exists."""
    if path.is_dir():
        directory = path
    elif path.name == "trajectory.jsonl":
        directory = path.parent
    else:
        raise CliError(f"{path}: expected a run directory or trajectory.jsonl", code=2)
    store = TrajectoryStore(directory)
    try:
        samples = store.load()
    except StoreCorruptError as exc:
        raise CliError(str(exc)) from exc
    if not samples:
        raise CliError(f"{store.trajectory_path}: no readable records", code=2)
    report = None
    if store.report_path.exists():
        try:
            report = store.load_report()
        except (ValueError, KeyError) as exc:
            print(f"ignoring unreadable report.json: {exc}", file=sys.stderr)
    return samples, report


def cmd_report(args: argparse.Namespace) -> int:
    samples, report = _load_trajectory(Path(args.trajectory))
    objective = report.objective if report else "objective"
    direction = report.direction if report else "maximize"

    print("test_index,best_metric")
    best = None
    curve: list[tuple[int, float]] = []
    for s in samples:
        if s.metric is not None and (best is None or s.metric > best):
            best = s.metric
        if best is not None:
            curve.append((s.test_index, best))
            print(f"{s.test_index},{best!r}")
    if best is None:
        raise CliError("trajectory contains no successful test")

    baseline = samples[0]
    best_sample = max((s for s in samples if s.metric is not None),
                      key=lambda s: (s.metric, -s.test_index))
    base_metrics = baseline.metrics or {objective: baseline.metric}
    best_metrics = best_sample.metrics or {objective: best_sample.metric}
    summary = analysis.summarize(
        MetricBundle(values=base_metrics, objective=objective, direction=direction),
        MetricBundle(values=best_metrics, objective=objective, direction=direction),
    )
    print()
    print(f"{'metric':24s} {'default':>14s} {'tuned':>14s} {'change':>12s}")
    for c in summary:
        pct = "undefined" if c.percent is None else f"{c.percent:+.2f}%"
        print(f"{c.name:24s} {c.default_value:>14g} {c.tuned_value:>14g} {pct:>12s}")

    out_dir = Path(args.out) if args.out else Path(args.trajectory if Path(args.trajectory).is_dir() else Path(args.trajectory).parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_path = out_dir / "best_curve.csv"
    with open(curve_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("# format_version: 1\n")
        fh.write("test_index,best_metric\n")
        for idx, value in curve:
            fh.write(f"{idx},{value!r}\n")
    print(f"wrote {curve_path}", file=sys.stderr)
    return 0


def _load_report(path: str) -> TuningReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    try:
        return TuningReport.from_dict(json.loads(p.read_text(encoding="utf-8")))
    except OSError as exc:
        raise CliError(f"cannot read report: {exc}", code=2) from exc
    except (ValueError, KeyError) as exc:
        raise CliError(f"{p}: not a valid report: {exc}", code=2) from exc


def _report_label(path: str, report: TuningReport) -> str:
    if report.run_id:
        return report.run_id
    p = Path(path)
    return p.parent.name if p.name == "report.json" else p.stem if p.suffix else p.name


def cmd_compare(args: argparse.Namespace) -> int:
    report_a = _load_report(args.report_a)
    report_b = _load_report(args.report_b)
    try:
        result = analysis.compare(
            report_a, report_b,
            name_a=_report_label(args.report_a, report_a),
            name_b=_report_label(args.report_b, report_b),
        )
    except analysis.AnalysisError as exc:
        raise CliError(str(exc)) from exc
    print(f"objective: {result.objective} (budget {result.budget})")
    print(result.display())
    return 0


def cmd_bottleneck(args: argparse.Namespace) -> int:
    candidates = []
    for path in args.reports:
        report = _load_report(path)
        candidates.append((_report_label(path, report), report))
    try:
        verdict = analysis.identify_bottleneck(candidates)
    except analysis.AnalysisError as exc:
        raise CliError(str(exc)) from exc
    print("tuned-best per candidate:")
    for name, value in verdict.candidates:
        print(f"  {name}: {value}")
    print(verdict.display())
    print(f"rule: {verdict.rule}", file=sys.stderr)
    return 0


def cmd_surfaces(args: argparse.Namespace) -> int:
    if args.export:
        try:
            surface = get_surface(args.export)
        except ValueError as exc:
            raise CliError(str(exc), code=2) from exc
        if args.out:
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            save_space(surface.space, out)
            print(f"wrote {out}", file=sys.stderr)
        else:
            print(json.dumps(space_to_json(surface.space), indent=2))
        return 0
    for surface_id in surface_catalog():
        surface = get_surface(surface_id)
        dims = surface.space.dimension
        print(f"{surface_id:20s} {dims}d  metric={surface.metric_name}  "
              f"params: {', '.join(surface.space.names)}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knobtuner",
        description="Budget-constrained configuration tuning with stratified "
                    "exploration and recursive random search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_tune = sub.add_parser("tune", help="run a budgeted tuning loop from a run config")
    p_tune.add_argument("--config", required=True, help="run config JSON file")
    p_tune.add_argument("--budget", type=int, help="override: total number of tests")
    p_tune.add_argument("--seed", type=int, help="override: PRNG seed")
    p_tune.add_argument("--algo", choices=sorted(ALGORITHMS), help="override: search strategy")
    p_tune.add_argument("--repeats", type=int, help="override: workload repetitions per test")
    p_tune.add_argument("--out", help=f"override: output directory (also ${OUT_DIR_ENV})")
    p_tune.set_defaults(func=cmd_tune)

    p_oracle = sub.add_parser("oracle", help="exact grid optimum of a catalog surface")
    p_oracle.add_argument("surface", help="catalog surface id")
    p_oracle.add_argument("--res", type=int, default=25, help="grid resolution per continuous dim")
    p_oracle.add_argument("--cap", type=int, default=10**7, help="max grid evaluations")
    p_oracle.add_argument("--out", help="directory to write oracle.json into")
    p_oracle.set_defaults(func=cmd_oracle)

    p_report = sub.add_parser("report", help="summarize a stored trajectory")
    p_report.add_argument("trajectory", help="run directory or trajectory.jsonl path")
    p_report.add_argument("--out", help="directory for the best-so-far curve CSV")
    p_report.set_defaults(func=cmd_report)

    p_cmp = sub.add_parser("compare", help="order two tuned systems fairly")
    p_cmp.add_argument("report_a", help="first report.json or run directory")
    p_cmp.add_argument("report_b", help="second report.json or run directory")
    p_cmp.set_defaults(func=cmd_compare)

    p_bn = sub.add_parser("bottleneck", help="find the limiting system or combination")
    p_bn.add_argument("reports", nargs="+", help="two or more report.json paths/run dirs")
    p_bn.set_defaults(func=cmd_bottleneck)

    p_sf = sub.add_parser("surfaces", help="list catalog surfaces or export a space file")
    p_sf.add_argument("--export", metavar="ID", help="surface whose space file to export")
    p_sf.add_argument("--out", help="path for the exported space file")
    p_sf.set_defaults(func=cmd_surfaces)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
