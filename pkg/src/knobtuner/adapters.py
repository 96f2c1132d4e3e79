"""Bridges to the outside world: config templating, external commands,
metric parsing, and on-disk trajectory persistence with crash-safe resume.

File formats owned here:

* config template: plain text with ``{name}`` placeholders (``{{``/``}}``
  escape literal braces); every placeholder must name a space parameter.
* trajectory log: JSON lines, one self-delimiting record per test, each
  carrying ``format_version``; appended before the next test starts.
* report: single JSON document, written atomically via rename.
* trajectory/best-curve CSV: derived views for analysis tools; first line
  is a ``# format_version`` comment.
"""

from __future__ import annotations

import json
import os
import re
import signal
import subprocess
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .harness import MetricBundle, SutError, SystemManipulator, WorkloadGenerator
from .search import Sample, TuningReport
from .space import ParameterSpace, Setting

TRAJECTORY_FORMAT_VERSION = 1
CSV_FORMAT_VERSION = 1


class TemplateError(ValueError):
    """A template cannot be rendered: bad syntax or unknown placeholder."""


class ParseError(SutError):
    """Workload output did not yield the promised metrics."""


class StoreCorruptError(RuntimeError):
    """The trajectory log is damaged before its final record."""


# ---------------------------------------------------------------------------
# Config templating
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplateSpec:
    """How to turn a setting into a config file.

    Attributes:
        template: Text with ``{name}`` placeholders.
        output_path: Where the rendered file goes; None renders in memory.
        formats: Optional per-parameter format spec (e.g. ``".1f"``) applied
            to numeric values.
        bool_literals: Rendered text for (False, True).
    """

    template: str
    output_path: str | None = None
    formats: dict[str, str] = field(default_factory=dict)
    bool_literals: tuple[str, str] = ("false", "true")


_TOKEN = re.compile(r"\{\{|\}\}|\{([A-Za-z_]\w*)\}|[{}]")


def render_value(value, fmt: str | None, bool_literals: tuple[str, str]) -> str:
    if isinstance(value, bool):
        return bool_literals[int(value)]
    if fmt:
        return format(value, fmt)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(setting: Setting, space: ParameterSpace, spec: TemplateSpec) -> str:
    """Substitute a setting into a template; write it out if a path is set.

    All placeholders are resolved before anything touches disk, so a bad
    template never leaves a half-written config behind.

    Raises:
        TemplateError: unknown placeholder (named in the message) or a
            stray unescaped brace.
    """
    values = space.setting_to_dict(tuple(setting))
    out: list[str] = []
    pos = 0
    for m in _TOKEN.finditer(spec.template):
        out.append(spec.template[pos : m.start()])
        pos = m.end()
        tok = m.group(0)
        if tok == "{{":
            out.append("{")
        elif tok == "}}":
            out.append("}")
        elif tok in ("{", "}"):
            line = spec.template.count("\n", 0, m.start()) + 1
            raise TemplateError(f"stray {tok!r} at line {line}; use {tok*2!r} for a literal")
        else:
            name = m.group(1)
            if name not in values:
                raise TemplateError(f"placeholder {{{name}}} matches no parameter in the space")
            out.append(render_value(values[name], spec.formats.get(name), spec.bool_literals))
    out.append(spec.template[pos:])
    content = "".join(out)
    if spec.output_path is not None:
        Path(spec.output_path).write_text(content, encoding="utf-8")
    return content


# ---------------------------------------------------------------------------
# External command execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommandSpec:
    """An external step: restart script, readiness probe, or workload run."""

    argv: tuple[str, ...]
    cwd: str | None = None
    env: dict[str, str] = field(default_factory=dict)
    timeout: float = 120.0
    expect_exit: int = 0

    def __post_init__(self) -> None:
        if not self.argv:
            raise ValueError("argv must not be empty")
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")


@dataclass(frozen=True)
class StepResult:
    status: str
    exit_code: int | None
    stdout: str
    stderr: str
    duration: float
    detail: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def exec_step(cmd: CommandSpec) -> StepResult:
    """Run one external command to completion; never hangs the driver.

    On timeout the whole process group is killed so workload children do
    not leak; the result status is ``failed-timeout``.  A spawn failure
    (missing binary, permissions) is a failed step with a diagnostic, not
    an exception.
    """
    start = time.monotonic()
    env = None
    if cmd.env:
        env = dict(os.environ)
        env.update(cmd.env)
    try:
        proc = subprocess.Popen(
            list(cmd.argv),
            cwd=cmd.cwd,
            env=env,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            start_new_session=True,
        )
    except OSError as exc:
        return StepResult(
            status="failed",
            exit_code=None,
            stdout="",
            stderr="",
            duration=time.monotonic() - start,
            detail=f"spawn failed: {exc}",
        )
    try:
        stdout, stderr = proc.communicate(timeout=cmd.timeout)
    except subprocess.TimeoutExpired:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        stdout, stderr = proc.communicate()
        return StepResult(
            status="failed-timeout",
            exit_code=None,
            stdout=stdout,
            stderr=stderr,
            duration=time.monotonic() - start,
            detail=f"killed after {cmd.timeout}s timeout",
        )
    duration = time.monotonic() - start
    if proc.returncode != cmd.expect_exit:
        return StepResult(
            status="failed",
            exit_code=proc.returncode,
            stdout=stdout,
            stderr=stderr,
            duration=duration,
            detail=f"exit code {proc.returncode}, expected {cmd.expect_exit}",
        )
    return StepResult(
        status="ok",
        exit_code=proc.returncode,
        stdout=stdout,
        stderr=stderr,
        duration=duration,
    )


# ---------------------------------------------------------------------------
# Metric parsing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricParserSpec:
    """Extraction rules mapping workload output to named real metrics.

    Each rule is a line-oriented regular expression with exactly one
    capture group holding the number.  The objective metric must have a
    rule and must match exactly once per output.
    """

    rules: dict[str, str]
    objective: str
    direction: str = "maximize"
    source: str = "stdout"
    path: str | None = None

    def __post_init__(self) -> None:
        if self.objective not in self.rules:
            raise ValueError(f"objective {self.objective!r} has no extraction rule")
        if self.source not in ("stdout", "file"):
            raise ValueError(f"source must be 'stdout' or 'file', got {self.source!r}")
        if self.source == "file" and not self.path:
            raise ValueError("source 'file' requires a path")
        for name, pattern in self.rules.items():
            if re.compile(pattern).groups != 1:
                raise ValueError(
                    f"rule for {name!r} must have exactly one capture group: {pattern!r}"
                )


def parse_metrics(output: str, spec: MetricParserSpec) -> MetricBundle:
    """Extract a MetricBundle from raw output text.

    A rule that matches zero times leaves its metric absent; an absent
    objective is a failed parse.  A rule matching more than once is
    ambiguous and always an error.

    Raises:
        ParseError: absent objective, ambiguous rule, or unparsable number
            (the offending line is quoted).
    """
    values: dict[str, float] = {}
    for name, pattern in spec.rules.items():
        matches = list(re.finditer(pattern, output, re.MULTILINE))
        if not matches:
            if name == spec.objective:
                raise ParseError(f"failed-parse: objective {name!r} not found in output")
            continue
        if len(matches) > 1:
            raise ParseError(f"ambiguous-parse: rule for {name!r} matched {len(matches)} times")
        m = matches[0]
        text = m.group(1)
        try:
            values[name] = float(text)
        except ValueError:
            line_start = output.rfind("\n", 0, m.start()) + 1
            line_end = output.find("\n", m.end())
            line = output[line_start : line_end if line_end >= 0 else len(output)]
            raise ParseError(f"unparsable number {text!r} in line: {line!r}") from None
    return MetricBundle(values=values, objective=spec.objective, direction=spec.direction)


# ---------------------------------------------------------------------------
# Trajectory persistence
# ---------------------------------------------------------------------------


class TrajectoryStore:
    """Append-only on-disk record of a tuning run, safe to resume after a crash.

    Layout inside the directory: ``trajectory.jsonl`` (one record per test,
    appended and flushed before the next test), ``report.json`` (written
    atomically at the end), plus derived ``trajectory.csv`` and
    ``best_curve.csv``.
    """

    def __init__(self, directory: str | Path, space: ParameterSpace | None = None):
        self.dir = Path(directory)
        self.space = space
        self.dir.mkdir(parents=True, exist_ok=True)
        self.trajectory_path = self.dir / "trajectory.jsonl"
        self.report_path = self.dir / "report.json"
        self.csv_path = self.dir / "trajectory.csv"
        self.curve_path = self.dir / "best_curve.csv"

    def append(self, sample: Sample) -> None:
        record = {"format_version": TRAJECTORY_FORMAT_VERSION, **sample.to_record()}
        line = json.dumps(record, separators=(",", ":")) + "\n"
        with open(self.trajectory_path, "a", encoding="utf-8") as fh:
            fh.write(line)
            fh.flush()
            os.fsync(fh.fileno())

    def load(self) -> list[Sample]:
        """Longest valid prefix of the stored trajectory.

        A corrupt or truncated final line is discarded with a warning (the
        crash interrupted that append); corruption before the final line
        means the log cannot be trusted and is fatal.
        """
        if not self.trajectory_path.exists():
            return []
        raw_lines = self.trajectory_path.read_text(encoding="utf-8").splitlines()
        lines = [(i, ln) for i, ln in enumerate(raw_lines) if ln.strip()]
        samples: list[Sample] = []
        for pos, (lineno, line) in enumerate(lines):
            try:
                record = json.loads(line)
                version = record.get("format_version")
                if version != TRAJECTORY_FORMAT_VERSION:
                    raise ValueError(f"unsupported format_version {version!r}")
                samples.append(Sample.from_record(record))
            except (ValueError, KeyError, TypeError) as exc:
                if pos == len(lines) - 1:
                    warnings.warn(
                        f"discarding corrupt final record at line {lineno + 1} "
                        f"of {self.trajectory_path}: {exc}",
                        stacklevel=2,
                    )
                    break
                raise StoreCorruptError(
                    f"corrupt record at line {lineno + 1} of {self.trajectory_path}: {exc}"
                ) from exc
        return samples

    def write_report(self, report: TuningReport) -> None:
        tmp = self.report_path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
        os.replace(tmp, self.report_path)
        self.write_csvs(report)

    def load_report(self) -> TuningReport:
        return TuningReport.from_dict(json.loads(self.report_path.read_text(encoding="utf-8")))

    def write_csvs(self, report: TuningReport) -> None:
        names = (
            list(self.space.names)
            if self.space is not None
            else [f"p{i}" for i in range(len(report.baseline.setting))]
        )
        with open(self.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# format_version: {CSV_FORMAT_VERSION}\n")
            fh.write(",".join(["test_index", "phase"] + names + ["metric"]) + "\n")
            for s in report.trajectory:
                cells = [str(s.test_index), s.phase]
                cells += [_csv_cell(v) for v in s.setting]
                cells.append("" if s.metric is None else repr(s.metric))
                fh.write(",".join(cells) + "\n")
        with open(self.curve_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# format_version: {CSV_FORMAT_VERSION}\n")
            fh.write("test_index,best_metric\n")
            for idx, best in report.best_curve():
                fh.write(f"{idx},{repr(best)}\n")


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# External-system adapters
# ---------------------------------------------------------------------------


class ExternalManipulator(SystemManipulator):
    """Generic manipulator driving any SUT via a template and shell steps.

    Each lifecycle hook is optional: a missing command is a no-op, so the
    same adapter covers systems that only need a config file as well as
    systems with full restart/readiness scripts.
    """

    def __init__(
        self,
        space: ParameterSpace,
        template: TemplateSpec | None = None,
        restart_cmd: CommandSpec | None = None,
        ready_cmd: CommandSpec | None = None,
        teardown_cmd: CommandSpec | None = None,
    ):
        self.space = space
        self.template = template
        self.restart_cmd = restart_cmd
        self.ready_cmd = ready_cmd
        self.teardown_cmd = teardown_cmd

    def apply(self, setting: Setting) -> None:
        if self.template is None:
            return
        try:
            render_config(setting, self.space, self.template)
        except (TemplateError, OSError) as exc:
            raise SutError(f"config rendering failed: {exc}") from exc

    def restart(self) -> None:
        self._step("restart", self.restart_cmd)

    def await_ready(self, timeout: float | None = None) -> None:
        cmd = self.ready_cmd
        if cmd is not None and timeout is not None and timeout > 0:
            cmd = CommandSpec(
                argv=cmd.argv,
                cwd=cmd.cwd,
                env=cmd.env,
                timeout=timeout,
                expect_exit=cmd.expect_exit,
            )
        self._step("ready", cmd)

    def teardown(self) -> None:
        if self.teardown_cmd is not None:
            exec_step(self.teardown_cmd)

    def _step(self, label: str, cmd: CommandSpec | None) -> None:
        if cmd is None:
            return
        result = exec_step(cmd)
        if not result.ok:
            tail = result.stderr.strip().splitlines()[-1:] or [""]
            raise SutError(f"{label} step {result.status}: {result.detail} {tail[0]}".strip())


class ExternalWorkload(WorkloadGenerator):
    """Workload generator that shells out and parses the measured metrics."""

    def __init__(self, run_cmd: CommandSpec, parser: MetricParserSpec):
        self.run_cmd = run_cmd
        self.parser = parser

    def run(self) -> MetricBundle:
        result = exec_step(self.run_cmd)
        if not result.ok:
            tail = result.stderr.strip().splitlines()[-1:] or [""]
            raise SutError(f"workload {result.status}: {result.detail} {tail[0]}".strip())
        if self.parser.source == "file":
            try:
                output = Path(self.parser.path).read_text(encoding="utf-8")
            except OSError as exc:
                raise SutError(f"metric file unreadable: {exc}") from exc
        else:
            output = result.stdout
        return parse_metrics(output, self.parser)
